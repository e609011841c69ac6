"""Covariate-shift regression instances.

All covariances are diagonal in one shared basis, so a covariance is stored
as its vector of eigenvalues (a "spectrum"). An instance bundles the shared
optimum ``w_star``, the source spectrum ``g``, the target spectrum ``h`` and
the label-noise variance ``sigma2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ProblemInstance",
    "MomentConstants",
    "as_spectrum",
    "make_pk_instance",
    "make_example1_instance",
    "make_custom_instance",
    "instance_norms",
    "dump_instance",
    "parse_instance",
    "save_instance",
    "load_instance",
]


def as_spectrum(values, name="spectrum"):
    """Return ``values`` as a 1-d float array of nonnegative eigenvalues."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise ValueError(f"{name} has negative eigenvalues")
    return arr


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """One linear-regression problem under covariate shift.

    Parameters
    ----------
    w_star : ndarray, shape (d,)
        Parameter minimizing both the source and the target risk.
    g, h : ndarray, shape (d,)
        Eigenvalues of the source covariance G and the target covariance H.
    sigma2 : float
        Variance of the additive Gaussian label noise.
    """

    w_star: np.ndarray
    g: np.ndarray
    h: np.ndarray
    sigma2: float

    def __post_init__(self):
        g = as_spectrum(self.g, "g")
        h = as_spectrum(self.h, "h")
        w = np.asarray(self.w_star, dtype=float)
        if w.ndim != 1 or not (g.size == h.size == w.size):
            raise ValueError(
                f"g, h and w_star must share one length; got {g.size}, {h.size}, {w.size}"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError("w_star has non-finite entries")
        sigma2 = float(self.sigma2)
        if not (sigma2 >= 0 and math.isfinite(sigma2)):
            raise ValueError("sigma2 must be a finite nonnegative number")
        if g.sum() <= 0:
            raise ValueError("tr(G) must be positive")
        if h.sum() <= 0:
            raise ValueError("tr(H) must be positive")
        for arr in (g, h, w):
            arr.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "w_star", w)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def dim(self):
        return self.w_star.size

    @property
    def trace_g(self):
        return float(self.g.sum())

    @property
    def trace_h(self):
        return float(self.h.sum())

    def snr_source(self):
        """``||w*||_G^2 / sigma^2`` (inf when noiseless)."""
        return _ratio(float(self.g @ self.w_star**2), self.sigma2)

    def snr_target(self):
        """``||w*||_H^2 / sigma^2`` (inf when noiseless)."""
        return _ratio(float(self.h @ self.w_star**2), self.sigma2)

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (
            self.sigma2 == other.sigma2
            and np.array_equal(self.g, other.g)
            and np.array_equal(self.h, other.h)
            and np.array_equal(self.w_star, other.w_star)
        )

    __hash__ = None


def _ratio(num, den):
    if den > 0:
        return num / den
    return 0.0 if num == 0 else math.inf


@dataclass(frozen=True)
class MomentConstants:
    """Fourth-moment constants and the explicit constants of the risk bounds.

    ``alpha`` and ``beta`` are the upper and lower fourth-moment constants
    (3 and 1 for Gaussian covariates) and ``r2`` is the relaxed fourth-moment
    bound ``R^2``. The remaining fields are the numeric factors multiplying
    each bound term; override them to probe how tight the bounds are.
    """

    alpha: float = 3.0
    beta: float = 1.0
    r2: float = 1.0
    var_upper: float = 8.0
    bias_upper_source: float = 24.0 * math.e
    bias_upper_target: float = 576.0 * math.e**2
    var_lower: float = 1.0 / 400.0
    bias_lower: float = 1.0 / 1200.0

    def __post_init__(self):
        if not self.alpha >= 1:
            raise ValueError("alpha must be at least 1")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.r2 > 0:
            raise ValueError("r2 must be positive")

    @classmethod
    def gaussian(cls, inst: ProblemInstance, **overrides):
        """Constants for Gaussian covariates: alpha=3, beta=1, R^2=3 max(tr G, tr H)."""
        alpha = overrides.pop("alpha", 3.0)
        r2 = overrides.pop("r2", alpha * max(inst.trace_g, inst.trace_h))
        return cls(alpha=alpha, r2=r2, **overrides)


def make_pk_instance(k: int, d: int) -> ProblemInstance:
    """Power-law instance with the top-``k`` source eigenvalues reversed.

    The target spectrum is ``i^-1.5``; the source spectrum is ``i^-2`` with its
    first ``k`` entries in reverse order, so larger ``k`` means worse alignment
    between source and target. ``w*`` is 1 on the first ``k`` coordinates and
    ``1/i`` afterwards; the noise variance is 1.
    """
    k, d = int(k), int(d)
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    idx = np.arange(1, d + 1, dtype=float)
    h = idx**-1.5
    g = idx**-2.0
    g[:k] = g[:k][::-1]
    w = 1.0 / idx
    w[:k] = 1.0
    return ProblemInstance(w_star=w, g=g, h=h, sigma2=1.0)


def example1_copies(eps: float) -> int:
    """Number of ``eps**0.5`` copies in the target spectrum of Example 1."""
    eps = float(eps)
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    copies = 2.0 * eps**-0.5
    n = round(copies)
    if n < 1 or abs(copies - n) > 1e-9 * copies:
        raise ValueError(f"2 * eps**-0.5 = {copies!r} is not an integer")
    return int(n)


def make_example1_instance(eps: float) -> ProblemInstance:
    """Instance on which pretraining alone and supervised learning are both slow.

    ``H = diag(1, eps^0.5 x (2 eps^-0.5 copies))`` and
    ``G = diag(eps^2, 1, 0, ...)``; ``w* = (1, 1, 0, ...)`` and unit noise. The
    zero padding beyond the last nonzero target eigenvalue is dropped.
    """
    copies = example1_copies(eps)
    d = 1 + copies
    h = np.full(d, math.sqrt(eps))
    h[0] = 1.0
    g = np.zeros(d)
    g[0] = eps**2
    g[1] = 1.0
    w = np.zeros(d)
    w[:2] = 1.0
    return ProblemInstance(w_star=w, g=g, h=h, sigma2=1.0)


def make_custom_instance(g, h, w_star, sigma2) -> ProblemInstance:
    return ProblemInstance(w_star=w_star, g=g, h=h, sigma2=sigma2)


def instance_norms(inst: ProblemInstance, w) -> tuple[float, float]:
    """Return ``(||w||_G^2, ||w||_H^2)``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (inst.dim,):
        raise ValueError(f"w must have shape ({inst.dim},), got {w.shape}")
    sq = w * w
    return float(inst.g @ sq), float(inst.h @ sq)


# -- instance files ---------------------------------------------------------
#
# One ``key = value`` pair per line; vectors are comma-separated. Values are
# written with 17 significant digits, which round-trips doubles exactly.

_INSTANCE_KEYS = ("g", "h", "w_star", "sigma2")


def _fmt(x):
    return format(float(x), ".17g")


def dump_instance(inst: ProblemInstance) -> str:
    lines = [
        "g = " + ",".join(_fmt(v) for v in inst.g),
        "h = " + ",".join(_fmt(v) for v in inst.h),
        "w_star = " + ",".join(_fmt(v) for v in inst.w_star),
        "sigma2 = " + _fmt(inst.sigma2),
    ]
    return "\n".join(lines) + "\n"


def parse_key_values(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _floats(text, key):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValueError(f"bad number in {key!r}: {exc}") from None


def parse_instance(text: str) -> ProblemInstance:
    fields = parse_key_values(text)
    missing = [k for k in _INSTANCE_KEYS if k not in fields]
    extra = sorted(set(fields) - set(_INSTANCE_KEYS))
    if missing or extra:
        raise ValueError(f"instance file: missing keys {missing}, unknown keys {extra}")
    sigma2 = _floats(fields["sigma2"], "sigma2")
    if len(sigma2) != 1:
        raise ValueError("sigma2 must be a single number")
    return ProblemInstance(
        w_star=_floats(fields["w_star"], "w_star"),
        g=_floats(fields["g"], "g"),
        h=_floats(fields["h"], "h"),
        sigma2=sigma2[0],
    )


def save_instance(inst: ProblemInstance, path) -> None:
    Path(path).write_text(dump_instance(inst))


def load_instance(path) -> ProblemInstance:
    return parse_instance(Path(path).read_text())
