"""Cooperative planner against the non-cooperative game on a short horizon.

Usage: ``python demos/planner_vs_game.py [horizon]`` (default 20 years; the
desk-scale runs use 100 and take several minutes each).
"""
import sys

from direscu.config import ScenarioConfig
from direscu.policy_metrics import fan_chart, simulate, simulate_branches
from direscu.scenarios import initial_taxes, solve

horizon = int(sys.argv[1]) if len(sys.argv) > 1 else 20
cfg = ScenarioConfig().with_(**{"solver.horizon": horizon})

solutions = {name: solve(cfg, name) for name in ("planner", "fbne")}
for name, sol in solutions.items():
    tax = initial_taxes(sol)
    print(f"{name:8s} initial carbon tax: north {tax[0]:7.1f}, south {tax[1]:7.1f} $/tC")

# The game under-prices carbon because each region ignores the damage it does to the other.
for name, sol in solutions.items():
    calm = simulate_branches(sol, [])[-1]
    print(f"{name:8s} no-tip path, year {horizon - 1}: tax north {calm['tax_north'][horizon - 1]:.1f}, "
          f"atmospheric carbon {calm['m_at'][horizon]:.0f} GtC")

# Tipping shows up as spread across paths; short horizons rarely reach it.
ens = simulate(solutions["planner"], n_paths=500, seed=1)
fan = fan_chart(ens, "t_north")
print(f"planner northern temperature in year {horizon}: mean {fan.mean[-1]:.2f}, 1% quantile {fan.q01[-1]:.2f}, "
      f"max {fan.max[-1]:.2f} C")
