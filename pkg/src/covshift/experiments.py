"""Stepsize tuning, sample-size sweeps and the synthetic studies.

Three algorithm modes share one SGD routine:

* ``pretrain``: ``m`` source samples, no target samples;
* ``supervised``: ``n`` target samples only;
* ``finetune``: a fixed budget of source samples followed by ``n`` target samples.

Stepsizes are tuned by exhaustive search over a logarithmic grid with the
exact oracle. Ties go to the smaller stepsize.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .instance import (
    ProblemInstance,
    load_instance,
    make_example1_instance,
    make_pk_instance,
    parse_key_values,
)
from .oracle import expected_excess_risk, risk_grid
from .sampler import derive_seed
from .sgd import Schedule, run_sgd, excess_risk

__all__ = [
    "MODES",
    "EVALUATORS",
    "SweepConfig",
    "SweepRow",
    "resolve_instance",
    "default_gamma_grid",
    "stable_gamma_limit",
    "make_schedule",
    "tune_stepsizes",
    "run_sweep",
    "load_config",
    "minimal_sample_size",
    "fit_exponent",
    "Example1Row",
    "Example1Result",
    "example1_study",
    "prescribed_finetune_schedule",
    "figure1_study",
]

MODES = ("pretrain", "finetune", "supervised")
EVALUATORS = ("oracle", "montecarlo")


def resolve_instance(spec: str) -> ProblemInstance:
    """Build an instance from ``pk:K:D``, ``example1:EPS`` or an instance file path.

    ``EPS`` may be a fraction such as ``1/16``.
    """
    spec = str(spec).strip()
    kind, _, rest = spec.partition(":")
    if kind == "pk" and rest:
        parts = rest.split(":")
        if len(parts) != 2:
            raise ValueError(f"expected pk:K:D, got {spec!r}")
        return make_pk_instance(int(parts[0]), int(parts[1]))
    if kind == "example1" and rest:
        return make_example1_instance(float(Fraction(rest)))
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"no instance file {spec!r} (and not a pk:K:D or example1:EPS name)")
    return load_instance(path)


def stable_gamma_limit(inst: ProblemInstance, mode: str) -> float:
    """Largest stepsize considered when tuning ``mode`` without the bounds' restriction.

    It is ``1 / tr`` of the covariance the mode trains on: ``G`` for
    pretraining, ``H`` for supervised learning and the larger trace for
    pretrain-finetune.
    """
    traces = {"pretrain": inst.trace_g, "supervised": inst.trace_h, "finetune": max(inst.trace_g, inst.trace_h)}
    if mode not in traces:
        raise ValueError(f"unknown mode {mode!r}")
    return 1.0 / traces[mode]


def default_gamma_grid(inst: ProblemInstance, upper: float | None = None, per_decade: int = 16, lower: float = 1e-4):
    """Log-spaced stepsizes from ``lower`` up to ``upper``, ``per_decade`` points per decade.

    ``upper`` defaults to ``1 / (4 * 3 * max(tr G, tr H))``, the largest
    stepsize covered by the risk bounds for Gaussian data. The grid always
    ends exactly at ``upper``.
    """
    if upper is None:
        upper = 1.0 / (12.0 * max(inst.trace_g, inst.trace_h))
    if not 0 < lower <= upper:
        raise ValueError(f"need 0 < lower <= upper, got {lower}, {upper}")
    steps = math.floor(per_decade * math.log10(upper / lower) + 1e-9)
    grid = lower * 10.0 ** (np.arange(steps + 1) / per_decade)
    if grid[-1] < upper * (1 - 1e-12):
        grid = np.append(grid, upper)
    return tuple(float(g) for g in grid)


@dataclass(frozen=True)
class SweepConfig:
    """One sample-size sweep of one algorithm mode.

    ``gamma_grid`` holds the candidate initial stepsizes. In ``finetune`` mode
    ``gammaM`` also ranges over 0 (no finetuning) and ``pretrain_budget``
    fixes the number of source samples.
    """

    instance_spec: str
    mode: str
    sample_grid: tuple[int, ...]
    gamma_grid: tuple[float, ...]
    pretrain_budget: int | None = None
    repeats: int = 20
    base_seed: int = 0
    evaluator: str = "oracle"
    decay: str = "effective"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.evaluator not in EVALUATORS:
            raise ValueError(f"evaluator must be one of {EVALUATORS}, got {self.evaluator!r}")
        samples = tuple(int(s) for s in self.sample_grid)
        gammas = tuple(float(g) for g in self.gamma_grid)
        if not samples or any(s <= 0 for s in samples):
            raise ValueError("sample_grid must be a nonempty list of positive integers")
        if not gammas or any(not (g > 0 and math.isfinite(g)) for g in gammas):
            raise ValueError("gamma_grid must be a nonempty list of positive stepsizes")
        if self.mode == "finetune":
            if self.pretrain_budget is None or int(self.pretrain_budget) < 0:
                raise ValueError("finetune mode needs a nonnegative pretrain_budget")
            object.__setattr__(self, "pretrain_budget", int(self.pretrain_budget))
        if int(self.repeats) < 1:
            raise ValueError("repeats must be positive")
        object.__setattr__(self, "sample_grid", samples)
        object.__setattr__(self, "gamma_grid", tuple(sorted(gammas)))
        object.__setattr__(self, "repeats", int(self.repeats))
        object.__setattr__(self, "base_seed", int(self.base_seed))


@dataclass(frozen=True)
class SweepRow:
    mode: str
    sample_size: int
    gamma0: float
    gammaM: float
    mean_risk: float
    stderr_risk: float
    n_repeats: int
    evaluator: str
    error: str = ""


def make_schedule(mode, sample_size, gamma0, gammaM, pretrain_budget=None, decay="effective") -> Schedule:
    """Schedule of one mode. Supervised runs use ``gammaM`` on the target data."""
    if mode == "pretrain":
        return Schedule(sample_size, 0, gamma0, 0.0, decay)
    if mode == "supervised":
        return Schedule(0, sample_size, gamma0, gammaM, decay)
    if mode == "finetune":
        return Schedule(pretrain_budget, sample_size, gamma0, gammaM, decay)
    raise ValueError(f"unknown mode {mode!r}")


def _argmin(risks):
    # first minimum in row-major order; diverged (NaN) entries never win
    return int(np.argmin(np.where(np.isnan(risks), np.inf, risks)))


def _tune(inst, mode, sample_size, gammas, budget, decay):
    gammas = np.asarray(gammas, dtype=float)
    if gammas.size == 0:
        raise ValueError("gamma grid is empty")
    if mode == "pretrain":
        risks = risk_grid(inst, sample_size, 0, gammas, [0.0], decay)[:, 0]
        best = _argmin(risks)
        return float(gammas[best]), 0.0, float(risks[best])
    if mode == "supervised" or (mode == "finetune" and budget == 0):
        # with no source data the pretrain stepsize is irrelevant; report it equal to gammaM
        risks = risk_grid(inst, 0, sample_size, [0.0], gammas, decay)[0]
        best = _argmin(risks)
        return float(gammas[best]), float(gammas[best]), float(risks[best])
    targets = np.concatenate(([0.0], gammas))
    risks = risk_grid(inst, budget, sample_size, gammas, targets, decay)
    # row-major argmin: smallest gamma0 first, then smallest gammaM
    i, j = np.unravel_index(_argmin(risks), risks.shape)
    return float(gammas[i]), float(targets[j]), float(risks[i, j])


def tune_stepsizes(cfg: SweepConfig, sample_size: int, inst: ProblemInstance | None = None) -> tuple[float, float]:
    """Grid point minimizing the oracle risk at ``sample_size``; returns ``(gamma0, gammaM)``.

    Pretrain mode reports ``gammaM = 0``; supervised mode reports the tuned
    stepsize in both slots.
    """
    inst = resolve_instance(cfg.instance_spec) if inst is None else inst
    g0, gm, _ = _tune(inst, cfg.mode, int(sample_size), cfg.gamma_grid, cfg.pretrain_budget, cfg.decay)
    return g0, gm


def _mean_stderr(values):
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def _sweep_row(cfg: SweepConfig, inst: ProblemInstance, idx: int) -> SweepRow:
    size = cfg.sample_grid[idx]
    try:
        g0, gm, risk = _tune(inst, cfg.mode, size, cfg.gamma_grid, cfg.pretrain_budget, cfg.decay)
        if cfg.evaluator == "oracle":
            return SweepRow(cfg.mode, size, g0, gm, risk, 0.0, 0, "oracle")
        sched = make_schedule(cfg.mode, size, g0, gm, cfg.pretrain_budget, cfg.decay)
        risks = [
            excess_risk(inst, run_sgd(inst, sched, derive_seed(cfg.base_seed, idx, rep)).w_final)
            for rep in range(cfg.repeats)
        ]
        mean, se = _mean_stderr(risks)
        return SweepRow(cfg.mode, size, g0, gm, mean, se, cfg.repeats, "montecarlo")
    except ValueError as exc:
        nan = math.nan
        return SweepRow(cfg.mode, size, nan, nan, nan, nan, 0, cfg.evaluator, error=str(exc))


def _sweep_task(args):
    cfg, inst, idx = args
    return _sweep_row(cfg, inst, idx)


def run_sweep(cfg: SweepConfig, workers: int = 1, inst: ProblemInstance | None = None) -> list[SweepRow]:
    """Tune and evaluate every sample size of ``cfg``; rows sorted by sample size.

    Monte Carlo repeat ``r`` of grid entry ``i`` uses seed
    ``derive_seed(base_seed, i, r)``, so results do not depend on ``workers``.
    A row that cannot be evaluated carries the message in ``error`` and NaN values.
    """
    inst = resolve_instance(cfg.instance_spec) if inst is None else inst
    tasks = [(cfg, inst, i) for i in range(len(cfg.sample_grid))]
    if workers <= 1 or len(tasks) == 1:
        rows = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    return sorted(rows, key=lambda r: (r.mode, r.sample_size))


_LIST_KEYS = {"sample_grid": int, "gamma_grid": float}
_SCALAR_KEYS = {
    "instance_spec": str,
    "mode": str,
    "pretrain_budget": int,
    "repeats": int,
    "base_seed": int,
    "evaluator": str,
    "decay": str,
}


def config_from_mapping(fields: dict[str, str], defaults: dict | None = None) -> SweepConfig:
    """Build a config from string values; list fields are comma separated."""
    values = dict(defaults or {})
    for key, text in fields.items():
        if key in _LIST_KEYS:
            conv = _LIST_KEYS[key]
            values[key] = tuple(conv(float(tok)) if conv is int else conv(tok) for tok in text.split(",") if tok.strip())
        elif key in _SCALAR_KEYS:
            values[key] = _SCALAR_KEYS[key](text)
        else:
            raise ValueError(f"unknown config key {key!r}")
    if "gamma_grid" not in values and "instance_spec" in values:
        values["gamma_grid"] = default_gamma_grid(resolve_instance(values["instance_spec"]))
    missing = [k for k in ("instance_spec", "mode", "sample_grid") if k not in values]
    if missing:
        raise ValueError(f"config is missing {missing}")
    return SweepConfig(**values)


def load_config(path) -> SweepConfig:
    """Read a ``key = value`` config file whose keys are SweepConfig field names."""
    return config_from_mapping(parse_key_values(Path(path).read_text()))


# -- threshold searches -----------------------------------------------------


def minimal_sample_size(risk_at, target: float, cap: int = 10**7):
    """Smallest count ``c <= cap`` found by doubling then bisection with ``risk_at(c) < target``.

    Assumes ``risk_at`` is nonincreasing. Returns ``None`` if ``risk_at(cap)``
    is still at least ``target``.
    """
    lo, hi = 0, 1
    while risk_at(hi) >= target:
        if hi >= cap:
            return None
        lo, hi = hi, min(2 * hi, cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if risk_at(mid) < target:
            hi = mid
        else:
            lo = mid
    return hi


def fit_exponent(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    slope, _ = np.polyfit(np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float)), 1)
    return float(slope)


# -- Example 1 -----------------------------------------------------------------

# Fixed constants for the pretrain-finetune budgets, chosen once on the
# tested eps values: gamma0 = 1/4, gammaM = eps/2, M = 2 ln(1/eps)/eps,
# N = 2 ln(1/eps)^2/eps.
PRESCRIBED = {"gamma0": 0.25, "gammaM_per_eps": 0.5, "m_coef": 2.0, "n_coef": 2.0}


def prescribed_finetune_schedule(eps: float, constants: dict | None = None) -> Schedule:
    """Pretrain-finetune schedule of budget ``M ~ ln(1/eps)/eps``, ``N ~ ln(1/eps)^2/eps``.

    ``constants`` overrides entries of :data:`PRESCRIBED`.
    """
    c = dict(PRESCRIBED, **(constants or {}))
    log_inv = math.log(1.0 / eps)
    return Schedule(
        math.ceil(c["m_coef"] * log_inv / eps),
        math.ceil(c["n_coef"] * log_inv**2 / eps),
        c["gamma0"],
        c["gammaM_per_eps"] * eps,
    )


@dataclass(frozen=True)
class Example1Row:
    eps: float
    n_supervised: int | None
    gamma_supervised: float
    m_pretrain: int | None
    gamma_pretrain: float
    m_finetune: int
    n_finetune: int
    gamma0_finetune: float
    gammaM_finetune: float
    risk_finetune: float

    @property
    def saturated(self):
        return self.n_supervised is None or self.m_pretrain is None


@dataclass(frozen=True)
class Example1Result:
    rows: list[Example1Row]
    supervised_exponent: float
    pretrain_exponent: float

    def to_csv_lines(self) -> list[str]:
        head = "eps,n_supervised,gamma_supervised,m_pretrain,gamma_pretrain,m_finetune,n_finetune,gamma0_finetune,gammaM_finetune,risk_finetune"
        out = [head]
        for r in self.rows:
            vals = [
                r.eps,
                "saturated" if r.n_supervised is None else r.n_supervised,
                r.gamma_supervised,
                "saturated" if r.m_pretrain is None else r.m_pretrain,
                r.gamma_pretrain,
                r.m_finetune,
                r.n_finetune,
                r.gamma0_finetune,
                r.gammaM_finetune,
                r.risk_finetune,
            ]
            out.append(",".join(format(v, ".15g") if isinstance(v, float) else str(v) for v in vals))
        return out


def _tuned_risk(inst, mode, gammas):
    def risk_at(count):
        return _tune(inst, mode, count, gammas, None, "effective")[2]

    return risk_at


def example1_study(eps_list=(0.25, 1 / 16, 1 / 64), cap: int = 10**7, grid_upper: str = "stable") -> Example1Result:
    """Sample sizes needed on the Example 1 instances to reach excess risk below ``eps``.

    For each ``eps`` this finds the smallest supervised ``N`` and the smallest
    pretraining ``M`` (each with its stepsize tuned per count) and evaluates
    pretrain-finetune at the fixed budgets of :func:`prescribed_finetune_schedule`.
    ``grid_upper="stable"`` tunes up to :func:`stable_gamma_limit`;
    ``"bound"`` uses the default grid. Exponents are fitted over the
    unsaturated rows.
    """
    rows = []
    for eps in eps_list:
        inst = make_example1_instance(eps)
        found = {}
        for mode in ("supervised", "pretrain"):
            upper = stable_gamma_limit(inst, mode) if grid_upper == "stable" else None
            gammas = default_gamma_grid(inst, upper)
            count = minimal_sample_size(_tuned_risk(inst, mode, gammas), eps, cap)
            gamma = _tune(inst, mode, count, gammas, None, "effective")[0] if count else math.nan
            found[mode] = (count, gamma)
        (n_sup, g_sup), (m_pre, g_pre) = found["supervised"], found["pretrain"]
        sched = prescribed_finetune_schedule(eps)
        risk = expected_excess_risk(inst, sched).total
        rows.append(Example1Row(eps, n_sup, g_sup, m_pre, g_pre, sched.m, sched.n, sched.gamma0, sched.gammaM, risk))

    def exponent(attr):
        pts = [(r.eps, getattr(r, attr)) for r in rows if getattr(r, attr) is not None]
        return fit_exponent(*zip(*pts)) if len(pts) >= 2 else math.nan

    return Example1Result(rows, exponent("n_supervised"), exponent("m_pretrain"))


# -- Figure 1 ------------------------------------------------------------------


def figure1_study(
    ks=(5, 10, 20),
    d: int = 200,
    pretrain_budget: int = 5000,
    sample_grid=(250, 500, 1000, 2000, 3000, 4000, 5000),
    grid_upper: str = "stable",
    evaluator: str = "oracle",
    repeats: int = 20,
    base_seed: int = 0,
    workers: int = 1,
) -> dict[int, list[SweepRow]]:
    """Sweep all three modes on ``P(k)`` for each ``k``; returns rows keyed by ``k``."""
    out = {}
    for k in ks:
        spec = f"pk:{k}:{d}"
        inst = make_pk_instance(k, d)
        rows = []
        for mode in MODES:
            upper = stable_gamma_limit(inst, mode) if grid_upper == "stable" else None
            cfg = SweepConfig(
                instance_spec=spec,
                mode=mode,
                sample_grid=tuple(sample_grid),
                gamma_grid=default_gamma_grid(inst, upper),
                pretrain_budget=pretrain_budget,
                repeats=repeats,
                base_seed=base_seed,
                evaluator=evaluator,
            )
            rows += run_sweep(cfg, workers=workers, inst=inst)
        out[k] = rows
    return out
