"""Switch model components off one at a time and compare initial taxes.

Usage: ``python demos/counterfactuals.py [horizon]`` (default 20).
"""
import sys

from direscu.config import ScenarioConfig
from direscu.scenarios import initial_taxes, solve

horizon = int(sys.argv[1]) if len(sys.argv) > 1 else 20
base = ScenarioConfig().with_(**{"solver.horizon": horizon})
variants = {
    "baseline": {},
    "no sea-level rise": {"toggles.slr": False},
    "no adaptation": {"toggles.adaptation": False},
    "no heat transport": {"toggles.heat_transport": False},
    "free capital transfer": {"economy.adjustment_cost": 0.0},
    "deterministic": {"toggles.stochastic": False},
}
print(f"{'variant':24s} {'north':>8s} {'south':>8s}")
for label, over in variants.items():
    tax = initial_taxes(solve(base.with_(**over), "planner"))
    print(f"{label:24s} {tax[0]:8.1f} {tax[1]:8.1f}")
