"""Two-phase online SGD: pretrain on source data, then finetune on target data.

Both phases start from an initial stepsize that is halved after every epoch.
With the default ``decay="effective"`` rule an epoch of a phase with ``c``
samples lasts ``c / ln c`` steps (the phase's effective sample count), so each
phase runs about ``ln c`` epochs. ``decay="log"`` instead halves after every
``ln c`` steps, which drives the stepsize to zero after ``O(ln^2 c)`` steps; it
is kept for comparison only.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .instance import ProblemInstance
from .sampler import Domain, RngState, sample_batch

__all__ = [
    "Schedule",
    "Epoch",
    "RunResult",
    "effective_count",
    "stepsize_at",
    "schedule_epochs",
    "run_sgd",
    "excess_risk",
    "write_trajectory_csv",
]

DECAY_RULES = ("effective", "log")


def effective_count(c: int) -> float:
    """``c / ln c`` for ``c >= 3``; ``c`` itself for ``c`` in {0, 1, 2}."""
    c = int(c)
    if c < 0:
        raise ValueError("sample count must be nonnegative")
    if c < 3:
        return float(c)
    return c / math.log(c)


@dataclass(frozen=True)
class Schedule:
    """Sample counts and initial stepsizes of a pretrain-then-finetune run.

    ``m`` source steps use initial stepsize ``gamma0``; the following ``n``
    target steps restart from ``gammaM``. ``gammaM = 0`` turns finetuning
    into a no-op.
    """

    m: int
    n: int
    gamma0: float
    gammaM: float
    decay: str = "effective"

    def __post_init__(self):
        for name in ("m", "n"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        g0, gm = float(self.gamma0), float(self.gammaM)
        if not (math.isfinite(g0) and math.isfinite(gm)):
            raise ValueError("stepsizes must be finite")
        if g0 < 0 or gm < 0:
            raise ValueError("stepsizes must be nonnegative")
        if self.m > 0 and g0 <= 0:
            raise ValueError("gamma0 must be positive when m > 0")
        if self.decay not in DECAY_RULES:
            raise ValueError(f"decay must be one of {DECAY_RULES}, got {self.decay!r}")
        object.__setattr__(self, "gamma0", g0)
        object.__setattr__(self, "gammaM", gm)

    @property
    def total(self):
        return self.m + self.n


def _epoch_length(count, decay):
    """Steps per epoch for a phase of ``count`` steps; ``None`` means no decay."""
    if decay == "log":
        return math.log(count) if count >= 2 else None
    return effective_count(count) if count >= 1 else None


def _epoch_index(t, length):
    if length is None:
        return 0
    return math.floor(t / length)


def stepsize_at(sched: Schedule, t: int) -> float:
    """Stepsize used by update ``t + 1``, for ``0 <= t < m + n``."""
    t = int(t)
    if not 0 <= t < sched.total:
        raise ValueError(f"t must lie in [0, {sched.total}), got {t}")
    if t < sched.m:
        ell = _epoch_index(t, _epoch_length(sched.m, sched.decay))
        return sched.gamma0 / 2.0**ell
    ell = _epoch_index(t - sched.m, _epoch_length(sched.n, sched.decay))
    return sched.gammaM / 2.0**ell


class Epoch(NamedTuple):
    domain: Domain
    index: int  # halvings applied to the phase's initial stepsize
    length: int


def _phase_epochs(count, decay, domain):
    length = _epoch_length(count, decay)
    if count == 0:
        return []
    if length is None:
        return [Epoch(domain, 0, count)]
    out = []
    start = 0
    while start < count:
        ell = _epoch_index(start, length)
        # first step of the next epoch, located with the same floor as stepsize_at
        stop = max(start + 1, math.ceil((ell + 1) * length))
        while stop > start + 1 and _epoch_index(stop - 1, length) > ell:
            stop -= 1
        while stop < count and _epoch_index(stop, length) == ell:
            stop += 1
        stop = min(stop, count)
        out.append(Epoch(domain, ell, stop - start))
        start = stop
    return out


def schedule_epochs(sched: Schedule) -> list[Epoch]:
    """Constant-stepsize runs of the schedule, in order.

    The stepsize during an epoch is ``gamma / 2**index`` with ``gamma`` the
    initial stepsize of the epoch's phase. Lengths sum to ``m`` then ``n``.
    """
    return _phase_epochs(sched.m, sched.decay, Domain.SOURCE) + _phase_epochs(
        sched.n, sched.decay, Domain.TARGET
    )


def epoch_gamma(sched: Schedule, ep: Epoch) -> float:
    base = sched.gamma0 if ep.domain is Domain.SOURCE else sched.gammaM
    return base / 2.0**ep.index


def excess_risk(inst: ProblemInstance, w) -> float:
    """Target excess risk ``0.5 * (w - w*)^T H (w - w*)``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (inst.dim,):
        raise ValueError(f"w must have shape ({inst.dim},), got {w.shape}")
    diff = w - inst.w_star
    return 0.5 * float(inst.h @ (diff * diff))


@dataclass
class RunResult:
    w_final: np.ndarray
    trajectory: list[tuple[int, str, float, float]] | None = None
    stepsize_warning: bool = False
    metadata: dict = field(default_factory=dict)


def stepsize_admissible(inst: ProblemInstance, sched: Schedule, alpha: float = 3.0) -> bool:
    """Whether the initial stepsizes satisfy ``gamma < 1 / (4 alpha max(tr G, tr H))``."""
    limit = 1.0 / (4.0 * alpha * max(inst.trace_g, inst.trace_h))
    used = [sched.gamma0] if sched.m else []
    used += [sched.gammaM] if sched.n else []
    return all(g < limit for g in used)


_BLOCK = 4096


def run_sgd(
    inst: ProblemInstance,
    sched: Schedule,
    seed: int,
    record_every: int | None = None,
    w0=None,
) -> RunResult:
    """Run one pretrain-finetune SGD pass and return the last iterate.

    Data are drawn fresh from ``RngState(seed)``: source samples for the first
    ``m`` steps and target samples for the next ``n``. When ``record_every``
    is set, the trajectory holds ``(step, phase, gamma, excess_risk)`` rows
    for step 0, every ``record_every``-th step and the final step; ``gamma``
    is the stepsize that produced that iterate.
    """
    if record_every is not None and int(record_every) < 1:
        raise ValueError("record_every must be a positive integer")
    w = np.zeros(inst.dim) if w0 is None else np.array(w0, dtype=float)
    if w.shape != (inst.dim,):
        raise ValueError(f"w0 must have shape ({inst.dim},), got {w.shape}")

    warn = not stepsize_admissible(inst, sched)

    gen = RngState(seed).generator()
    traj = [] if record_every else None
    if traj is not None:
        traj.append((0, "init", 0.0, excess_risk(inst, w)))

    t = 0
    for ep in schedule_epochs(sched):
        gamma = epoch_gamma(sched, ep)
        phase = ep.domain.value
        left = ep.length
        while left:
            rows = min(left, _BLOCK)
            xs, ys = sample_batch(inst, ep.domain, gen, rows)
            for x, y in zip(xs, ys):
                w -= gamma * (x @ w - y) * x
                t += 1
                if traj is not None and (t % record_every == 0 or t == sched.total):
                    traj.append((t, phase, gamma, excess_risk(inst, w)))
            left -= rows
    return RunResult(w_final=w, trajectory=traj, stepsize_warning=warn, metadata={"seed": int(seed)})


def write_trajectory_csv(result: RunResult, path) -> None:
    if result.trajectory is None:
        raise ValueError("run was not recorded; pass record_every to run_sgd")
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["step", "phase", "gamma", "excess_risk"])
        for step, phase, gamma, risk in result.trajectory:
            out.writerow([step, phase, format(gamma, ".15g"), format(risk, ".15g")])
