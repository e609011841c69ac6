"""Closed-form excess-risk bounds, effective dimensions and sample thresholds.

Every bound is reported on the scale of the excess risk
``0.5 * (w - w*)^T H (w - w*)``, so it compares directly with the oracle's
bias and variance. The underlying inequalities bound ``<H, B>`` and
``<H, C>``, which are twice those quantities; each value here is half of the
corresponding inequality's right-hand side.

Index sets are boolean masks over coordinates. Text output lists them as
1-based coordinate numbers.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .instance import MomentConstants, ProblemInstance
from .sampler import Domain
from .sgd import Schedule, effective_count, schedule_epochs

__all__ = [
    "BoundReport",
    "effective_counts",
    "optimal_index_sets",
    "deff",
    "deff_finetune",
    "phase_contraction",
    "bound_report",
    "risk_upper_bound",
    "risk_lower_bound",
    "h_over_g_norm",
    "pretrain_sufficient_m",
    "finetune_sufficient_m",
    "smallest_m_with_effective_count",
    "unified_risk_bound",
    "format_index_set",
]


def effective_counts(m: int, n: int) -> tuple[float, float]:
    """``(M_eff, N_eff)`` with the natural logarithm."""
    return effective_count(m), effective_count(n)


def _mask(inst, members, name):
    if members is None:
        return None
    arr = np.asarray(members)
    if arr.dtype == bool:
        if arr.shape != (inst.dim,):
            raise ValueError(f"{name} mask must have length {inst.dim}")
        return arr.copy()
    out = np.zeros(inst.dim, dtype=bool)
    for i in np.atleast_1d(arr).astype(int):
        if not 1 <= i <= inst.dim:
            raise ValueError(f"{name} index {i} outside 1..{inst.dim}")
        out[i - 1] = True
    return out


def format_index_set(mask) -> str:
    """1-based members of a mask, space separated; empty string for the empty set."""
    return " ".join(str(i + 1) for i in np.flatnonzero(mask))


def _threshold_set(spec, scale):
    # {i : spec_i >= 1 / scale}; empty when the phase has no data or no stepsize
    if scale <= 0:
        return np.zeros(spec.size, dtype=bool)
    return spec >= 1.0 / scale


def optimal_index_sets(inst: ProblemInstance, sched: Schedule):
    """``J = {mu_j >= 1/(gamma0 M_eff)}`` and ``K = {lambda_k >= 1/(gammaM N_eff)}``."""
    m_eff, n_eff = effective_counts(sched.m, sched.n)
    return _threshold_set(inst.g, sched.gamma0 * m_eff), _threshold_set(inst.h, sched.gammaM * n_eff)


def deff(inst: ProblemInstance, k, n_eff: float, gammaM: float) -> float:
    """``|K| + (N_eff gammaM)^2 sum_{i not in K} lambda_i^2``."""
    k = _mask(inst, k, "K")
    tail = inst.h[~k]
    return float(k.sum()) + (n_eff * gammaM) ** 2 * float(tail @ tail)


def phase_contraction(inst: ProblemInstance, sched: Schedule, domain: Domain) -> np.ndarray:
    """Coordinatewise ``prod_t (1 - gamma_t s)`` over the steps of one phase."""
    spec = domain.spectrum(inst)
    out = np.ones(inst.dim)
    base = sched.gamma0 if domain is Domain.SOURCE else sched.gammaM
    for ep in schedule_epochs(sched):
        if ep.domain is domain:
            out *= (1.0 - base / 2.0**ep.index * spec) ** ep.length
    return out


def _check_invertible(inst, j):
    if np.any(inst.g[j] <= 0):
        bad = format_index_set(j & (inst.g <= 0))
        raise ValueError(f"J contains coordinates with zero source eigenvalue: {bad}")


def deff_finetune(inst: ProblemInstance, j, sched: Schedule) -> float:
    """``sum_J p lambda/mu + (M_eff gamma0)^2 sum_{J^c} p lambda mu``.

    ``p_i`` is the squared finetune contraction of coordinate ``i``; with
    ``n = 0`` it is 1 and the value is the pretraining effective dimension.
    """
    j = _mask(inst, j, "J")
    _check_invertible(inst, j)
    p = phase_contraction(inst, sched, Domain.TARGET) ** 2
    m_eff = effective_count(sched.m)
    head = float(np.sum(p[j] * inst.h[j] / inst.g[j]))
    tail = float(np.sum(p[~j] * inst.h[~j] * inst.g[~j]))
    return head + (m_eff * sched.gamma0) ** 2 * tail


@dataclass(frozen=True)
class BoundReport:
    """Ingredients and values of the excess-risk bounds for one run.

    ``leading_bias`` is the bias of the fully contracted mean iterate. Upper
    bounds are ``inf`` outside the stepsize range where they are proved;
    lower bounds are 0 outside theirs.
    """

    m_eff: float
    n_eff: float
    j_set: np.ndarray
    k_set: np.ndarray
    deff: float
    deff_finetune: float
    leading_bias: float
    bias_upper: float
    var_upper: float
    bias_lower: float
    var_lower: float
    sigma2: float
    snr: float
    constants_used: MomentConstants

    def upper(self):
        return self.bias_upper + self.var_upper

    def lower(self):
        return self.bias_lower + self.var_lower

    def to_text(self) -> str:
        """Flat ``key = value`` record; numbers at 15 significant digits."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "constants_used":
                for ck, cv in asdict(v).items():
                    lines.append(f"constants.{ck} = {format(cv, '.15g')}")
            elif f.name in ("j_set", "k_set"):
                lines.append(f"{f.name} = {format_index_set(v)}")
            else:
                lines.append(f"{f.name} = {format(v, '.15g')}")
        return "\n".join(lines) + "\n"


def _snr(inst, sched, delta0, a):
    # signal-to-noise ratio of the algorithm mode (pretrain, supervised or both)
    if sched.m and sched.n:
        signal = float(inst.g @ delta0**2) + float(inst.h @ a**2)
    elif sched.m:
        signal = float(inst.g @ delta0**2)
    else:
        signal = float(inst.h @ delta0**2)
    if inst.sigma2 > 0:
        return signal / inst.sigma2
    return 0.0 if signal == 0 else math.inf


def bound_report(
    inst: ProblemInstance,
    sched: Schedule,
    constants: MomentConstants | None = None,
    j=None,
    k=None,
    w0=None,
) -> BoundReport:
    """Evaluate the upper and lower bounds of the bias and the variance.

    Parameters
    ----------
    inst, sched
        Problem and SGD run.
    constants : MomentConstants, optional
        Defaults to the Gaussian constants of ``inst``.
    j, k : bool mask or 1-based indices, optional
        Index sets for the upper bounds. Default to :func:`optimal_index_sets`.
        The lower bounds always use the optimal sets.
    w0 : array_like, optional
        Starting point; zero by default.
    """
    cst = MomentConstants.gaussian(inst) if constants is None else constants
    m_eff, n_eff = effective_counts(sched.m, sched.n)
    j_opt, k_opt = optimal_index_sets(inst, sched)
    j = j_opt if j is None else _mask(inst, j, "J")
    k = k_opt if k is None else _mask(inst, k, "K")
    w0 = np.zeros(inst.dim) if w0 is None else np.asarray(w0, dtype=float)
    delta0 = w0 - inst.w_star

    a = phase_contraction(inst, sched, Domain.SOURCE) * delta0
    f = phase_contraction(inst, sched, Domain.TARGET) * a
    leading = float(inst.h @ f**2)

    src, tgt = sched.m > 0, sched.n > 0
    upper = _upper(inst, sched, cst, j, k, m_eff, n_eff, delta0, a, leading, src, tgt)
    lower = _lower(inst, sched, cst, j_opt, k_opt, m_eff, n_eff, delta0, a, leading, src, tgt)
    return BoundReport(
        m_eff=m_eff,
        n_eff=n_eff,
        j_set=j,
        k_set=k,
        deff=deff(inst, k, n_eff, sched.gammaM),
        deff_finetune=deff_finetune(inst, j, sched),
        leading_bias=0.5 * leading,
        bias_upper=0.5 * upper[0],
        var_upper=0.5 * upper[1],
        bias_lower=0.5 * lower[0],
        var_lower=0.5 * lower[1],
        sigma2=inst.sigma2,
        snr=_snr(inst, sched, delta0, a),
        constants_used=cst,
    )


def _upper(inst, sched, cst, j, k, m_eff, n_eff, delta0, a, leading, src, tgt):
    d_ft = deff_finetune(inst, j, sched)
    d_tg = deff(inst, k, n_eff, sched.gammaM)
    var_terms = (d_ft / m_eff if src else 0.0) + (d_tg / n_eff if tgt else 0.0)

    gammas = [sched.gamma0] * src + [sched.gammaM] * tgt
    gamma = max(gammas, default=0.0)
    if gamma * cst.r2 >= 1.0:
        var = math.inf
    else:
        var = cst.var_upper * inst.sigma2 / (1.0 - gamma * cst.r2) * var_terms

    bias_ok = True
    if src:
        bias_ok &= sched.gamma0 < 1.0 / (4.0 * cst.alpha * inst.trace_g)
        if tgt:
            bias_ok &= sched.gamma0 < 1.0 / (cst.alpha * inst.trace_h)
    if tgt:
        bias_ok &= sched.gammaM < 1.0 / (4.0 * cst.alpha * inst.trace_h)
    if not bias_ok:
        return math.inf, var

    bias = leading
    heart = 0.0
    if src:
        sq = delta0**2
        heart = float(np.sum(sq[j])) / (m_eff * sched.gamma0) + float(inst.g[~j] @ sq[~j])
        bias += cst.bias_upper_source * cst.alpha * heart * d_ft / m_eff
    if tgt:
        sq = a**2
        head = float(np.sum(sq[k]))
        diamond = head / (n_eff * sched.gammaM) if head else 0.0
        diamond += float(inst.h[~k] @ sq[~k])
        bias += cst.bias_upper_target * cst.alpha * (diamond + heart) * d_tg / n_eff
    return bias, var


def _lower(inst, sched, cst, j, k, m_eff, n_eff, delta0, a, leading, src, tgt):
    if src and not (sched.gamma0 < 1.0 / inst.g.max() and m_eff >= 10):
        return 0.0, 0.0
    if tgt and not (sched.gammaM < 1.0 / inst.h.max() and n_eff >= 10):
        return 0.0, 0.0
    d_ft = deff_finetune(inst, j, sched)
    d_tg = deff(inst, k, n_eff, sched.gammaM)
    var = cst.var_lower * inst.sigma2 * ((d_ft / m_eff if src else 0.0) + (d_tg / n_eff if tgt else 0.0))
    bias = leading
    if src:
        bias += cst.beta * cst.bias_lower * float(inst.g[~j] @ delta0[~j] ** 2) * d_ft / m_eff
    if tgt:
        bias += cst.beta * cst.bias_lower * float(inst.h[~k] @ a[~k] ** 2) * d_tg / n_eff
    return bias, var


def risk_upper_bound(inst, sched, constants=None, j=None, k=None) -> tuple[float, float]:
    """``(bias_upper, var_upper)``; see :func:`bound_report`."""
    rep = bound_report(inst, sched, constants, j, k)
    return rep.bias_upper, rep.var_upper


def risk_lower_bound(inst, sched, constants=None) -> tuple[float, float]:
    """``(bias_lower, var_lower)``; see :func:`bound_report`."""
    rep = bound_report(inst, sched, constants)
    return rep.bias_lower, rep.var_lower


# -- source-data thresholds -------------------------------------------------


def h_over_g_norm(inst: ProblemInstance, k) -> float:
    """``max_{i in K} lambda_i / mu_i``, or 0 when no coordinate counts.

    A coordinate with ``mu_i = 0`` and ``w*_i = 0`` is skipped: SGD from zero
    is already optimal there and the source cannot move it. One with
    ``mu_i = 0`` and ``w*_i != 0`` makes the value infinite.
    """
    k = _mask(inst, k, "K")
    k &= (inst.g > 0) | (inst.w_star != 0)
    if not k.any():
        return 0.0
    if np.any(inst.g[k] <= 0):
        return math.inf
    return float(np.max(inst.h[k] / inst.g[k]))


def smallest_m_with_effective_count(target: float) -> float:
    """Smallest integer ``M`` with ``M_eff >= target`` (``M_eff`` is nondecreasing in ``M``)."""
    if target <= 0:
        return 0.0
    if math.isinf(target):
        return math.inf
    hi = 1
    while effective_count(hi) < target:
        hi *= 2
    lo = hi // 2  # effective_count(lo) < target, or lo == 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if effective_count(mid) >= target:
            hi = mid
        else:
            lo = mid
    return float(hi)


def _supervised_terms(inst, n_sup, gamma_sup):
    n_eff = effective_count(n_sup)
    if not n_eff > 0 or not gamma_sup > 0:
        raise ValueError("n_sup and gamma_sup must be positive")
    k_star = _threshold_set(inst.h, n_eff * gamma_sup)
    return n_eff, k_star, deff(inst, k_star, n_eff, gamma_sup)


def pretrain_sufficient_m(inst: ProblemInstance, n_sup: int, gamma_sup: float, constants=None):
    """Source sample size at which pretraining matches supervised learning.

    Returns ``(m_threshold, k_star, deff_sup, h_over_g)`` where ``m_threshold``
    is the smallest ``M`` with ``M_eff >= N_eff^2 * 4 ||H_K*||_G / (alpha D_sup)``.
    It is ``inf`` when ``K*`` contains a direction the source never excites
    and ``w*`` does not vanish on it.
    """
    cst = MomentConstants.gaussian(inst) if constants is None else constants
    n_eff, k_star, d_sup = _supervised_terms(inst, n_sup, gamma_sup)
    ratio = h_over_g_norm(inst, k_star)
    target = n_eff**2 * 4.0 * ratio / (cst.alpha * d_sup) if ratio else 0.0
    return smallest_m_with_effective_count(target), k_star, d_sup, ratio


def finetune_sufficient_m(
    inst: ProblemInstance, n_sup: int, gamma_sup: float, n_finetune: int, constants=None
):
    """Source sample size at which pretraining plus ``n_finetune`` target samples match supervised learning.

    Returns ``(m_threshold, k_dagger)``; ``K_dagger`` keeps the directions of
    ``K*`` whose target eigenvalue is too small for finetuning to learn.
    """
    if n_finetune <= 0:
        raise ValueError("n_finetune must be positive")
    cst = MomentConstants.gaussian(inst) if constants is None else constants
    n_eff, k_star, d_sup = _supervised_terms(inst, n_sup, gamma_sup)
    n_ft_eff = effective_count(n_finetune)
    ceiling = n_eff * math.log(n_eff) * inst.trace_h / (n_ft_eff * d_sup)
    k_dag = k_star & (inst.h < ceiling)
    ratio = h_over_g_norm(inst, k_dag)
    target = n_eff**2 * 4.0 * ratio / (cst.alpha * d_sup) if ratio else 0.0
    return smallest_m_with_effective_count(target), k_dag


def unified_risk_bound(rep: BoundReport) -> float:
    """``Bias_eff + (1 + sigma^2) SNR (D_src/M_eff + D_tgt/N_eff)`` in its unscaled form.

    Zero effective counts drop their term. ``Bias_eff`` is the contracted
    bias ``2 * leading_bias``.
    """
    rate = 0.0
    if rep.m_eff > 0:
        rate += rep.deff_finetune / rep.m_eff
    if rep.n_eff > 0:
        rate += rep.deff / rep.n_eff
    noise = (1.0 + rep.sigma2) * rep.snr * rate if rate else 0.0
    return 2.0 * rep.leading_bias + noise
