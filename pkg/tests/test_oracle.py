import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covshift.instance import make_custom_instance, make_pk_instance
from covshift.oracle import (
    DiagState,
    crude_variance_bound,
    expected_excess_risk,
    gaussian_quartic_diag,
    oracle_trajectory,
    risk_grid,
    step_bias,
    step_variance,
)
from covshift.sgd import Schedule, excess_risk
from covshift.verify import random_instance
from helpers import quadrature_risk


def test_quartic_examples():
    np.testing.assert_allclose(gaussian_quartic_diag([1, 1], [1, 0]), [3, 1])
    np.testing.assert_allclose(gaussian_quartic_diag([1, 2], [0, 0]), [0, 0])
    np.testing.assert_allclose(gaussian_quartic_diag([2], [1]), [12])


def test_quartic_matches_sampled_fourth_moment():
    gen = np.random.default_rng(0)
    spec = np.array([1.0, 0.5, 2.0])
    a = np.array([0.3, 1.0, 0.2])
    x = gen.standard_normal((400000, 3)) * np.sqrt(spec)
    est = x**2 * ((x**2) @ a)[:, None]
    se = est.std(axis=0) / math.sqrt(x.shape[0])
    assert np.all(np.abs(est.mean(axis=0) - gaussian_quartic_diag(spec, a)) < 5 * se)


def test_step_examples():
    np.testing.assert_array_equal(step_bias([1.0, 2.0], [1.0, 1.0], 0.0), [1.0, 2.0])
    assert step_bias([1.0], [1.0], 0.5)[0] == pytest.approx(0.75)
    np.testing.assert_allclose(step_bias([0.0, 1.0], [1.0, 0.0], 0.5), [0.0, 1.0])
    assert step_variance([0.0], [1.0], 0.5, 1.0)[0] == pytest.approx(0.25)
    c = np.zeros(3)
    for _ in range(10):
        c = step_variance(c, [1.0, 0.5, 0.1], 0.3, 0.0)
    np.testing.assert_array_equal(c, 0.0)
    with pytest.raises(ValueError):
        step_bias([1.0], [1.0], -0.1)
    with pytest.raises(ValueError):
        step_bias([1.0, 1.0], [1.0], 0.1)


def test_one_step_split():
    inst = make_custom_instance([1.0], [1.0], [1.0], 1.0)
    risk = expected_excess_risk(inst, Schedule(1, 0, 0.5, 0.0))
    assert risk.bias == pytest.approx(0.375, abs=1e-15)
    assert risk.variance == pytest.approx(0.125, abs=1e-15)
    assert risk.total == pytest.approx(0.5, abs=1e-15)


def test_frozen_iterate():
    inst = make_pk_instance(2, 5)
    risk = expected_excess_risk(inst, Schedule(30, 30, 1e-14, 1e-14))
    assert risk.bias == pytest.approx(excess_risk(inst, np.zeros(5)), rel=1e-10)
    assert risk.variance < 1e-20


@pytest.mark.parametrize("seed", range(4))
def test_matches_quadrature(seed):
    inst = random_instance(seed, 2 + seed % 2, sigma2=0.7)
    sched = Schedule(1 + seed % 2, 1, 0.4, 0.3)
    w0 = np.linspace(-0.5, 0.5, inst.dim)
    got = expected_excess_risk(inst, sched, w0).total
    assert got == pytest.approx(quadrature_risk(inst, sched, w0=w0), rel=1e-10)


@pytest.mark.parametrize("m,n", [(0, 300), (500, 0), (400, 250), (3, 2)])
def test_loop_and_eigen_agree(m, n):
    inst = random_instance(17, 8)
    sched = Schedule(m, n, 0.05 if m else 0.0, 0.04)
    a = expected_excess_risk(inst, sched, method="loop")
    b = expected_excess_risk(inst, sched, method="eigen")
    assert a.bias == pytest.approx(b.bias, rel=1e-9)
    assert a.variance == pytest.approx(b.variance, rel=1e-9)


def test_unknown_method():
    inst = make_pk_instance(2, 4)
    with pytest.raises(ValueError):
        expected_excess_risk(inst, Schedule(5, 0, 0.1, 0.0), method="magic")


def test_trajectory_ends_at_oracle_value():
    inst = make_pk_instance(3, 6)
    sched = Schedule(40, 25, 0.06, 0.05)
    states = list(oracle_trajectory(inst, sched))
    assert [t for t, _, _ in states] == list(range(1, 66))
    last = states[-1][2].risk(inst)
    exact = expected_excess_risk(inst, sched, method="loop")
    assert last.bias == pytest.approx(exact.bias, rel=1e-12)
    assert last.variance == pytest.approx(exact.variance, rel=1e-12)


def test_initial_state_validates_start():
    inst = make_pk_instance(2, 4)
    with pytest.raises(ValueError):
        DiagState.initial(inst, np.zeros(3))


def test_crude_variance_bound():
    assert crude_variance_bound(0.1, 2.0, 5.0) == pytest.approx(0.4)
    assert crude_variance_bound(0.2, 1.0, 5.0) == math.inf


def test_risk_grid_matches_single_runs():
    inst = random_instance(3, 6)
    g0s = [0.0, 0.01, 0.08]
    gms = [0.0, 0.02, 0.1]
    grid = risk_grid(inst, 120, 80, g0s, gms)
    for i, g0 in enumerate(g0s):
        for j, gm in enumerate(gms):
            if g0 == 0.0:
                continue
            exact = expected_excess_risk(inst, Schedule(120, 80, g0, gm)).total
            assert grid[i, j] == pytest.approx(exact, rel=1e-10)


def test_risk_grid_validation():
    inst = make_pk_instance(2, 4)
    with pytest.raises(ValueError):
        risk_grid(inst, 5, 5, [], [0.1])
    with pytest.raises(ValueError):
        risk_grid(inst, 5, 5, [-0.1], [0.1])


@settings(max_examples=25, deadline=None)
@given(
    d=st.integers(1, 6),
    seed=st.integers(0, 10**6),
    m=st.integers(0, 60),
    n=st.integers(0, 60),
    frac=st.floats(0.01, 0.9),
)
def test_risk_is_nonnegative_and_split_adds(d, seed, m, n, frac):
    inst = random_instance(seed, d)
    gamma = frac / (3.0 * max(inst.trace_g, inst.trace_h))
    sched = Schedule(m, n, gamma if m else 0.0, gamma)
    risk = expected_excess_risk(inst, sched)
    assert risk.bias >= 0 and risk.variance >= 0
    assert risk.total == risk.bias + risk.variance


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), frac=st.floats(0.01, 0.9))
def test_variance_scales_linearly_with_noise(seed, frac):
    inst = random_instance(seed, 4, sigma2=1.0)
    loud = make_custom_instance(inst.g, inst.h, inst.w_star, 3.0)
    gamma = frac / (3.0 * max(inst.trace_g, inst.trace_h))
    sched = Schedule(30, 20, gamma, gamma)
    a = expected_excess_risk(inst, sched)
    b = expected_excess_risk(loud, sched)
    assert b.bias == pytest.approx(a.bias, rel=1e-12)
    assert b.variance == pytest.approx(3.0 * a.variance, rel=1e-10)
