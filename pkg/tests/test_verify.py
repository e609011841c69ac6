import math

import pytest

from covshift.sgd import Schedule
from covshift.verify import brute_force_index_sets, random_instance, sandwich_margin, verify


@pytest.fixture(scope="module")
def default_report():
    return verify(seed=0, repeats=200)


def test_default_checks_pass(default_report):
    assert default_report.ok, default_report.to_text()
    assert all(c.margin >= 0 for c in default_report.checks)
    assert default_report.to_text().count("PASS") == len(default_report.checks)


def test_hand_value_check(default_report):
    hand = next(c for c in default_report.checks if c.name == "one_step_hand_value")
    assert hand.passed and "expected=0.5" in hand.detail


def test_broken_constant_fails_sandwich():
    rep = verify(seed=0, repeats=50, constant_overrides={"var_upper": 1e-6})
    sandwich = next(c for c in rep.checks if c.name == "bound_sandwich")
    assert not sandwich.passed and sandwich.margin < 0
    assert not rep.ok


def test_random_instance_snr_and_traces():
    inst = random_instance(5, 7, sigma2=2.0, snr_g=0.5)
    assert inst.trace_g == pytest.approx(1.0)
    assert inst.trace_h == pytest.approx(1.0)
    assert float(inst.g @ inst.w_star**2) == pytest.approx(1.0)
    assert random_instance(5, 7) == random_instance(5, 7)


def test_brute_force_matches_threshold_sets():
    inst = random_instance(1, 3)
    best, at_opt = brute_force_index_sets(inst, Schedule(500, 200, 0.03, 0.03))
    assert at_opt == pytest.approx(best, rel=1e-12)


def test_sandwich_margin_reports_component():
    inst = random_instance(2, 5)
    slack, where = sandwich_margin(inst, Schedule(600, 0, 0.02, 0.0))
    assert slack >= 0 and where in ("bias", "variance")
    assert math.isfinite(slack)
