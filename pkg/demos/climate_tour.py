"""Climate block on its own: carbon bookkeeping, polar amplification, tipping odds.

Run with ``python demos/climate_tour.py``; takes well under a second.
"""
from direscu.climate import (INITIAL_CARBON, INITIAL_TEMPERATURE, CarbonState, ClimateParams, balanced_warming,
                             radiative_forcing, step_carbon, step_temperature, tipping_probability)

p = ClimateParams()

# A century of 10 GtC/yr: all of it ends up somewhere in the three reservoirs.
m = CarbonState(*INITIAL_CARBON)
for _ in range(100):
    m = step_carbon(m, 10.0, p)
print(f"carbon after 100 years: atmosphere {m.m_at:.0f}, upper ocean {m.m_uo:.0f}, deep ocean {m.m_do:.0f} GtC")
print(f"  added {sum(m) - sum(INITIAL_CARBON):.1f} GtC (emitted 1000)")

# Without radiative damping temperatures have no resting point, only a growth direction.
inc = balanced_warming(3.68, p)
print(f"balanced warming per year at doubled CO2: north {inc[0]:.4f}, south {inc[1]:.4f}, ocean {inc[2]:.4f} C")
print(f"  the north warms {inc[0] / inc[1]:.3f} times as fast as the south")

# Warm the system under a rising concentration path and watch the tipping hazard.
temp = INITIAL_TEMPERATURE
for year in range(101):
    if year % 25 == 0:
        print(f"year {year:3d}: north {temp.t_at_north:.2f} C, annual tipping probability "
              f"{float(tipping_probability(temp.t_at_north, p)):.4f}")
    temp = step_temperature(temp, radiative_forcing(851.0 + 4.0 * year, year, p), p)
