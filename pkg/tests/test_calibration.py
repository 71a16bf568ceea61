import numpy as np
import pytest

from direscu import calibration as cal
from direscu.climate import CarbonState, ClimateParams, step_carbon
from direscu.errors import ConfigError

YEARS = 120
INPUTS = cal.demo_inputs(YEARS)


def perturbed(group, factor=1.15):
    true = cal.get_params(group, cal.GROUPS[group], ClimateParams(), cal.ec.EconomyParams())
    return true, {n: v * factor for n, v in zip(cal.GROUPS[group], true)}


@pytest.mark.parametrize("group", sorted(cal.GROUPS))
def test_round_trip(group):
    targets = cal.synthetic_targets(group, INPUTS, YEARS)
    true, start = perturbed(group)
    res = cal.calibrate(group, targets, INPUTS, initial=start)
    got = np.array([res.params[n] for n in cal.GROUPS[group]])
    np.testing.assert_allclose(got, true, rtol=1e-4)
    assert res.max_residual() < 1e-8
    assert not res.at_bounds


def test_carbon_forward_matches_step_function():
    out = cal.forward("carbon", INPUTS["rising"], YEARS)
    p = ClimateParams()
    s = CarbonState(*cal.cl.INITIAL_CARBON)
    for t in range(5):
        s = CarbonState(*step_carbon(s, INPUTS["rising"]["emissions"][t], p))
    np.testing.assert_allclose(out["m_at"][5], s.m_at, rtol=1e-12)


def test_single_scenario_exact_carbon_target():
    inputs = {"rising": INPUTS["rising"]}
    targets = cal.synthetic_targets("carbon", inputs, YEARS, series=["m_at"])
    res = cal.calibrate("carbon", targets, inputs)
    assert res.max_residual() < 1e-10


def test_inconsistent_targets_report_positive_residual():
    targets = cal.synthetic_targets("carbon", INPUTS, YEARS, series=["m_at"])
    bad = [cal.CalibrationTarget(t.scenario, t.series, t.years, t.values * (1.0 + 0.05 * np.sin(t.years)), t.units)
           for t in targets]
    res = cal.calibrate("carbon", bad, INPUTS)
    assert res.max_residual() > 1e-4
    assert np.isfinite(res.cost) and res.cost > 0


def test_parameter_at_bound_flagged():
    targets = cal.synthetic_targets("sea_level", INPUTS, YEARS)
    true, _ = perturbed("sea_level")
    name = cal.GROUPS["sea_level"][0]
    res = cal.calibrate("sea_level", targets, INPUTS, initial={name: 0.25 * true[0]},
                        bounds={name: (0.0, 0.5 * true[0])})
    assert name in res.at_bounds
    assert res.max_residual() > 0


@pytest.mark.parametrize("years", [[0, 2, 1], [-1, 3], [1, 1]])
def test_invalid_years_rejected(years):
    with pytest.raises(ConfigError):
        cal.CalibrationTarget("s", "m_at", np.array(years), np.ones(len(years)))


def test_length_mismatch_rejected():
    with pytest.raises(ConfigError):
        cal.CalibrationTarget("s", "m_at", np.array([0, 1, 2]), np.ones(2))


def test_unknown_group_rejected():
    with pytest.raises(ConfigError):
        cal.calibrate("nope", [], INPUTS)


def test_targets_round_trip_through_csv(tmp_path):
    targets = cal.synthetic_targets("temperature", INPUTS, 20)
    cal.save_targets(targets, tmp_path / "t.csv")
    back = cal.load_targets(tmp_path / "t.csv")
    assert {(t.scenario, t.series) for t in back} == {(t.scenario, t.series) for t in targets}
    for a in targets:
        b = next(t for t in back if (t.scenario, t.series) == (a.scenario, a.series))
        np.testing.assert_array_equal(a.years, b.years)
        np.testing.assert_allclose(a.values, b.values, rtol=1e-15)
