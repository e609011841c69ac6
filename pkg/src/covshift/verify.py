"""Self-checks of the library, reported with measured margins.

Each check returns a :class:`Check` whose ``margin`` is nonnegative exactly
when the check passes. :func:`verify` runs the whole suite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .bounds import bound_report
from .experiments import default_gamma_grid, tune_stepsizes, SweepConfig
from .instance import MomentConstants, ProblemInstance, make_pk_instance
from .oracle import crude_variance_bound, expected_excess_risk, oracle_trajectory
from .sampler import derive_seed
from .sgd import Schedule, excess_risk, run_sgd

__all__ = [
    "Check",
    "VerifyReport",
    "random_instance",
    "brute_force_index_sets",
    "sandwich_margin",
    "verify",
]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass(frozen=True)
class VerifyReport:
    checks: tuple[Check, ...]

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def to_text(self) -> str:
        lines = [
            f"{'PASS' if c.passed else 'FAIL'} {c.name} margin={c.margin:.6g} {c.detail}".rstrip()
            for c in self.checks
        ]
        return "\n".join(lines) + "\n"


def random_instance(seed: int, d: int, sigma2: float = 1.0, snr_g: float | None = None) -> ProblemInstance:
    """Random diagonal instance with positive spectra of trace about 1.

    If ``snr_g`` is given, ``w*`` is rescaled so that ``||w*||_G^2 = snr_g * sigma2``.
    """
    gen = np.random.Generator(np.random.Philox(key=derive_seed(seed, d)))
    g = gen.uniform(0.02, 1.0, d) ** 2
    h = gen.uniform(0.02, 1.0, d) ** 2
    g /= g.sum()
    h /= h.sum()
    w = gen.standard_normal(d)
    if snr_g is not None:
        w *= math.sqrt(snr_g * sigma2 / float(g @ w**2))
    return ProblemInstance(w_star=w, g=g, h=h, sigma2=sigma2)


def _upper_total(inst, sched, cst, j, k):
    rep = bound_report(inst, sched, cst, j=j, k=k)
    return rep.bias_upper + rep.var_upper


def brute_force_index_sets(inst: ProblemInstance, sched: Schedule, constants=None):
    """Minimum of the total upper bound over every admissible ``(J, K)``.

    ``J`` ranges over subsets of the coordinates with positive source
    eigenvalue. Returns ``(minimum, value at the optimal sets)``.
    """
    cst = MomentConstants.gaussian(inst) if constants is None else constants
    d = inst.dim
    usable = np.flatnonzero(inst.g > 0)
    best = math.inf
    for jbits in itertools.product((False, True), repeat=usable.size):
        j = np.zeros(d, dtype=bool)
        j[usable] = jbits
        for kbits in itertools.product((False, True), repeat=d):
            best = min(best, _upper_total(inst, sched, cst, j, np.array(kbits)))
    return best, _upper_total(inst, sched, cst, None, None)


def sandwich_margin(inst: ProblemInstance, sched: Schedule, constants=None) -> tuple[float, str]:
    """Smallest relative slack of oracle bias and variance inside their bounds.

    Negative when a value falls outside ``[lower, upper]``.
    """
    rep = bound_report(inst, sched, constants)
    risk = expected_excess_risk(inst, sched)
    worst, where = math.inf, ""
    for name, value, lo, hi in (
        ("bias", risk.bias, rep.bias_lower, rep.bias_upper),
        ("variance", risk.variance, rep.var_lower, rep.var_upper),
    ):
        scale = max(abs(value), 1e-300)
        slack = min((hi - value) / scale, (value - lo) / scale)
        if slack < worst:
            worst, where = slack, name
    return worst, where


def _check_hand_value():
    inst = ProblemInstance([1.0], [1.0], [1.0], 1.0)
    got = expected_excess_risk(inst, Schedule(1, 0, 0.5, 0.0)).total
    err = abs(got - 0.5)
    return Check("one_step_hand_value", err <= 1e-15, 1e-15 - err, f"oracle={got!r} expected=0.5")


def _check_montecarlo(seed, repeats):
    inst = make_pk_instance(2, 10)
    cfg = SweepConfig("pk:2:10", "supervised", (200,), default_gamma_grid(inst))
    _, gamma = tune_stepsizes(cfg, 200, inst)
    sched = Schedule(0, 200, gamma, gamma)
    exact = expected_excess_risk(inst, sched).total
    risks = np.array([excess_risk(inst, run_sgd(inst, sched, derive_seed(seed, r)).w_final) for r in range(repeats)])
    mean = math.fsum(risks) / repeats
    se = float(risks.std(ddof=1)) / math.sqrt(repeats)
    z = abs(mean - exact) / se
    return Check("montecarlo_vs_oracle", z <= 3.0, 3.0 - z, f"mean={mean:.6g} oracle={exact:.6g} z={z:.3f}")


def _check_sandwich(overrides):
    worst, where = math.inf, ""
    for k in (1, 2):
        inst = make_pk_instance(k, 10)
        cst = MomentConstants.gaussian(inst, **overrides)
        top = 1.0 / (4.0 * cst.alpha * max(inst.trace_g, inst.trace_h))
        for m, n in ((300, 0), (0, 300), (300, 60)):
            for frac in (0.5, 0.05):
                sched = Schedule(m, n, frac * top, frac * top)
                slack, name = sandwich_margin(inst, sched, cst)
                if slack < worst:
                    worst, where = slack, f"P({k}) m={m} n={n} gamma={frac}*limit {name}"
    return Check("bound_sandwich", worst >= 0, worst, f"tightest at {where}")


def _check_index_sets():
    worst = math.inf
    for i in range(3):
        inst = random_instance(100 + i, 4)
        top = 1.0 / (12.0 * max(inst.trace_g, inst.trace_h))
        sched = Schedule(400, 100, 0.5 * top, 0.5 * top)
        best, at_opt = brute_force_index_sets(inst, sched)
        worst = min(worst, (best - at_opt) / best + 1e-12)
    return Check("index_set_bruteforce", worst >= 0, worst, "relative gap of the optimal sets to the enumerated minimum")


def _check_crude_variance():
    worst = math.inf
    for i in range(2):
        inst = random_instance(200 + i, 6, sigma2=0.5 + i)
        r2 = 3.0 * max(inst.trace_g, inst.trace_h)
        gamma = 0.2 / r2
        sched = Schedule(150, 150, gamma, 0.7 * gamma)
        cap = crude_variance_bound(gamma, inst.sigma2, r2)
        for _, _, state in oracle_trajectory(inst, sched):
            worst = min(worst, (cap - float(state.c.max())) / cap)
    return Check("crude_variance_bound", worst >= 0, worst, "relative slack of max c_i below gamma*sigma2/(1-gamma*R2)")


def verify(seed: int = 0, repeats: int = 400, constant_overrides: dict | None = None) -> VerifyReport:
    """Run all self-checks.

    ``constant_overrides`` replaces bound constants in the sandwich check,
    for example ``{"var_upper": 1e-6}`` as a negative control.
    """
    checks = (
        _check_hand_value(),
        _check_montecarlo(seed, repeats),
        _check_sandwich(constant_overrides or {}),
        _check_index_sets(),
        _check_crude_variance(),
    )
    return VerifyReport(checks)
