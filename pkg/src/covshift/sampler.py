"""Gaussian data from the source or target domain.

Randomness comes from numpy's counter-based Philox generator. An
:class:`RngState` names a position in a Philox stream by ``(seed, counter)``;
independent streams for parallel work are keyed by :func:`derive_seed`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .instance import ProblemInstance, as_spectrum

__all__ = [
    "Domain",
    "RngState",
    "derive_seed",
    "sample_covariate",
    "sample_labeled",
    "sample_batch",
]

_MASK64 = (1 << 64) - 1


class Domain(enum.Enum):
    SOURCE = "source"
    TARGET = "target"

    def spectrum(self, inst: ProblemInstance) -> np.ndarray:
        return inst.g if self is Domain.SOURCE else inst.h


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit mixing function."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, *stream: int) -> int:
    """Child seed for the stream path ``stream`` under ``seed``.

    Starting from ``splitmix64(seed)``, each index ``i`` updates the state to
    ``splitmix64(state ^ splitmix64(i))``.
    """
    out = splitmix64(int(seed) & _MASK64)
    for idx in stream:
        out = splitmix64(out ^ splitmix64(int(idx) & _MASK64))
    return out


@dataclass(frozen=True)
class RngState:
    """Position ``counter`` in the Philox stream keyed by ``seed``."""

    seed: int
    counter: int = 0

    def __post_init__(self):
        for name in ("seed", "counter"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v}")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=int(self.seed), counter=int(self.counter)))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngState):
        return rng.generator()
    raise TypeError(f"expected numpy Generator or RngState, got {type(rng).__name__}")


def sample_covariate(spec, rng) -> np.ndarray:
    """Draw ``x ~ N(0, diag(spec))``.

    ``rng`` is a numpy ``Generator`` (advanced in place) or an ``RngState``
    (a fresh generator positioned at that state).
    """
    spec = as_spectrum(spec)
    z = _as_generator(rng).standard_normal(spec.size)
    return np.sqrt(spec) * z


def sample_labeled(inst: ProblemInstance, dom: Domain, rng) -> tuple[np.ndarray, float]:
    """Draw one ``(x, y)`` with ``y = <x, w*> + noise``, noise ~ N(0, sigma^2)."""
    gen = _as_generator(rng)
    x = sample_covariate(dom.spectrum(inst), gen)
    noise = np.sqrt(inst.sigma2) * gen.standard_normal()
    return x, float(x @ inst.w_star + noise)


def sample_batch(inst: ProblemInstance, dom: Domain, rng, size: int):
    """Draw ``size`` i.i.d. labeled pairs; returns ``(X, y)`` with ``X`` of shape (size, d).

    Covariates for the whole batch are drawn first, then the noise.
    """
    gen = _as_generator(rng)
    scale = np.sqrt(dom.spectrum(inst))
    x = gen.standard_normal((int(size), inst.dim)) * scale
    noise = np.sqrt(inst.sigma2) * gen.standard_normal(int(size))
    return x, x @ inst.w_star + noise
