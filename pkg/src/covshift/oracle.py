"""Exact expected excess risk of two-phase SGD under Gaussian design.

With diagonal covariances the diagonals of the bias and variance second-moment
matrices evolve on their own. One step with stepsize ``gamma`` on a domain with
spectrum ``s`` maps a diagonal ``b`` to

    b' = (1 - 2 gamma s + 2 gamma^2 s^2) * b + gamma^2 s (s . b)

and the variance diagonal follows the same map plus ``gamma^2 sigma^2 s``.
The per-step map is a symmetric matrix ``diag(...) + gamma^2 s s^T``, so a run
of ``L`` equal steps can be applied through one eigendecomposition instead of
``L`` updates. :func:`expected_excess_risk` chooses between the two per epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .instance import ProblemInstance, as_spectrum
from .sampler import Domain
from .sgd import Epoch, Schedule, schedule_epochs, stepsize_at

__all__ = [
    "DiagState",
    "RiskSplit",
    "gaussian_quartic_diag",
    "step_bias",
    "step_variance",
    "expected_excess_risk",
    "oracle_trajectory",
    "risk_grid",
    "crude_variance_bound",
]


class RiskSplit(NamedTuple):
    bias: float
    variance: float

    @property
    def total(self):
        return self.bias + self.variance


@dataclass
class DiagState:
    """Diagonals of the bias and variance second-moment matrices."""

    b: np.ndarray
    c: np.ndarray

    @classmethod
    def initial(cls, inst: ProblemInstance, w0=None):
        w0 = np.zeros(inst.dim) if w0 is None else np.asarray(w0, dtype=float)
        if w0.shape != (inst.dim,):
            raise ValueError(f"w0 must have shape ({inst.dim},), got {w0.shape}")
        return cls(b=(w0 - inst.w_star) ** 2, c=np.zeros(inst.dim))

    def risk(self, inst: ProblemInstance) -> RiskSplit:
        return RiskSplit(0.5 * float(inst.h @ self.b), 0.5 * float(inst.h @ self.c))


def _check_pair(spec, a):
    spec = as_spectrum(spec)
    a = np.asarray(a, dtype=float)
    if a.shape != spec.shape:
        raise ValueError(f"length mismatch: spectrum has {spec.size} entries, vector has {a.shape}")
    return spec, a


def gaussian_quartic_diag(spec, a) -> np.ndarray:
    """Diagonal of ``E[x x^T diag(a) x x^T]`` for ``x ~ N(0, diag(spec))``."""
    spec, a = _check_pair(spec, a)
    return 2.0 * spec**2 * a + spec * float(spec @ a)


def step_bias(b, spec, gamma: float) -> np.ndarray:
    """Apply one SGD step with stepsize ``gamma`` to the bias diagonal."""
    spec, b = _check_pair(spec, b)
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return (1.0 - 2.0 * gamma * spec + 2.0 * gamma**2 * spec**2) * b + gamma**2 * spec * float(spec @ b)


def step_variance(c, spec, gamma: float, sigma2: float) -> np.ndarray:
    """Apply one SGD step to the variance diagonal, including the noise injected by that step."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    return step_bias(c, spec, gamma) + gamma**2 * sigma2 * np.asarray(spec, dtype=float)


# -- batched epoch propagation ----------------------------------------------
#
# Rows of ``b`` and ``c`` are independent runs that share the spectrum but
# each has its own stepsize.


def _loop_epoch(s, gammas, length, b, c, sigma2):
    g = gammas[:, None]
    diag = 1.0 - 2.0 * g * s + 2.0 * (g * s) ** 2
    couple = g**2 * s
    inject = sigma2 * couple
    for _ in range(length):
        if b is not None:
            b = diag * b + couple * (b @ s)[:, None]
        if c is not None:
            c = diag * c + couple * (c @ s)[:, None] + inject
    return b, c


def _eigen_epoch(s, gammas, length, b, c, sigma2):
    # eigendecompose K = I - A rather than A so that small decay rates keep
    # their relative accuracy
    g = gammas[:, None]
    k = -(g[:, :, None] * g[:, None, :]) * np.outer(s, s)
    idx = np.arange(s.size)
    k[:, idx, idx] += 2.0 * g * s - 2.0 * (g * s) ** 2
    delta, q = np.linalg.eigh(k)
    qt = np.swapaxes(q, 1, 2)
    # diverging stepsizes overflow to inf/nan; callers treat those as losing grid points
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        stable = delta < 1.0
        logs = np.log1p(-np.where(stable, delta, 0.0))
        power = np.where(stable, np.exp(length * logs), np.power(1.0 - delta, length))
        geo = np.where(stable, -np.expm1(length * logs) / delta, (1.0 - power) / delta)
        geo = np.where(delta == 0.0, float(length), geo)
        if b is not None:
            b = np.einsum("rij,rj->ri", q, power * np.einsum("rij,rj->ri", qt, b))
        if c is not None:
            forcing = np.einsum("rij,j->ri", qt, s) * (sigma2 * gammas**2)[:, None]
            c = np.einsum("rij,rj->ri", q, power * np.einsum("rij,rj->ri", qt, c) + geo * forcing)
    return b, c


# Rough relative costs of one numpy step update versus one eigendecomposition.
_STEP_OVERHEAD = 4000.0
_EIGEN_COST = 12.0


def _use_eigen(rows, d, length):
    loop = length * (6.0 * rows * d + _STEP_OVERHEAD)
    eig = rows * (_EIGEN_COST * d**3 + 8.0 * d * d) + _STEP_OVERHEAD * 4
    return eig < loop


def _propagate(s, gammas, length, b, c=None, sigma2=0.0, method="auto"):
    """Advance every row through ``length`` steps; row ``r`` uses ``gammas[r]``."""
    if length == 0:
        return b, c
    if method == "auto":
        rows = len(gammas) * ((b is not None) + (c is not None))
        method = "eigen" if _use_eigen(rows, s.size, length) else "loop"
    if method == "loop":
        return _loop_epoch(s, gammas, length, b, c, sigma2)
    if method == "eigen":
        return _eigen_epoch(s, gammas, length, b, c, sigma2)
    raise ValueError(f"unknown method {method!r}")


def _spectrum(inst, ep: Epoch):
    return ep.domain.spectrum(inst)


def expected_excess_risk(
    inst: ProblemInstance, sched: Schedule, w0=None, method: str = "auto"
) -> RiskSplit:
    """Exact ``(bias, variance)`` split of the expected target excess risk of :func:`~covshift.sgd.run_sgd`.

    Parameters
    ----------
    inst : ProblemInstance
    sched : Schedule
    w0 : array_like, optional
        Starting point; zero by default.
    method : {"auto", "loop", "eigen"}
        How each constant-stepsize epoch is applied. ``"loop"`` performs the
        step recursion literally; ``"eigen"`` uses a closed form per epoch.
    """
    state = DiagState.initial(inst, w0)
    b, c = state.b[None, :], state.c[None, :]
    for ep in schedule_epochs(sched):
        base = sched.gamma0 if ep.domain is Domain.SOURCE else sched.gammaM
        gam = np.array([base / 2.0**ep.index])
        b, c = _propagate(_spectrum(inst, ep), gam, ep.length, b, c, inst.sigma2, method)
    return DiagState(b[0], c[0]).risk(inst)


def oracle_trajectory(inst: ProblemInstance, sched: Schedule, w0=None) -> Iterator[tuple[int, float, DiagState]]:
    """Yield ``(t, gamma, state)`` after every step ``t = 1..m+n``.

    ``gamma`` is the stepsize of step ``t``. The yielded state is a fresh copy.
    """
    state = DiagState.initial(inst, w0)
    b, c = state.b, state.c
    for t in range(sched.total):
        gamma = stepsize_at(sched, t)
        spec = inst.g if t < sched.m else inst.h
        b = step_bias(b, spec, gamma)
        c = step_variance(c, spec, gamma, inst.sigma2)
        yield t + 1, gamma, DiagState(b.copy(), c.copy())


def crude_variance_bound(gamma: float, sigma2: float, r2: float) -> float:
    """``gamma sigma^2 / (1 - gamma R^2)``; infinite unless ``gamma R^2 < 1``."""
    if gamma * r2 >= 1.0:
        return math.inf
    return gamma * sigma2 / (1.0 - gamma * r2)


def _phase_epochs(sched, domain):
    return [ep for ep in schedule_epochs(sched) if ep.domain is domain]


def risk_grid(
    inst: ProblemInstance,
    m: int,
    n: int,
    gamma0s,
    gammaMs,
    decay: str = "effective",
    w0=None,
) -> np.ndarray:
    """Expected excess risk for every ``(gamma0, gammaM)`` pair.

    Returns an array of shape ``(len(gamma0s), len(gammaMs))``. The source
    phase is evolved once per ``gamma0`` and the target phase once per
    ``gammaM``: the risk is linear in the state reached after pretraining and
    the finetune map is a product of symmetric matrices, so the target
    weights ``h`` can be pulled back through it in reverse epoch order.
    """
    g0 = np.atleast_1d(np.asarray(gamma0s, dtype=float))
    gm = np.atleast_1d(np.asarray(gammaMs, dtype=float))
    if g0.ndim != 1 or gm.ndim != 1 or g0.size == 0 or gm.size == 0:
        raise ValueError("stepsize grids must be nonempty 1-d sequences")
    if np.any(g0 < 0) or np.any(gm < 0):
        raise ValueError("stepsizes must be nonnegative")
    # epoch lengths depend only on (m, n, decay); the gammas here are placeholders
    sched = Schedule(m, n, 1.0, 1.0, decay)
    state = DiagState.initial(inst, w0)

    b = np.repeat(state.b[None, :], g0.size, axis=0)
    c = np.zeros_like(b)
    for ep in _phase_epochs(sched, Domain.SOURCE):
        b, c = _propagate(inst.g, g0 / 2.0**ep.index, ep.length, b, c, inst.sigma2)
    pre = b + c

    u = np.repeat(inst.h[None, :], gm.size, axis=0)
    target = _phase_epochs(sched, Domain.TARGET)
    for ep in reversed(target):
        u, _ = _propagate(inst.h, gm / 2.0**ep.index, ep.length, u)
    # variance injected during finetuning, evolved from zero
    v = np.zeros((gm.size, inst.dim))
    for ep in target:
        _, v = _propagate(inst.h, gm / 2.0**ep.index, ep.length, None, v, inst.sigma2)
    fresh = 0.5 * (v @ inst.h)
    return 0.5 * (pre @ u.T) + fresh[None, :]

