"""Randomized designs: Bernoulli assignments, price perturbations, seeding.

Every random draw in the package goes through :class:`SeedSpec`, which derives an
independent stream from ``(master_seed, rep_index, tag)``. Replications can
therefore run in any order, or in parallel, and still reproduce bit for bit.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "SeedSpec",
    "AssignmentVector",
    "PerturbationMatrix",
    "PowerSchedule",
    "draw_assignment",
    "draw_perturbations",
    "ht_weight",
    "check_probability",
]


def check_probability(pi: float, name: str = "pi") -> float:
    pi = float(pi)
    if not (0.0 < pi < 1.0) or not np.isfinite(pi):
        raise ConfigurationError(f"{name} must lie strictly inside (0, 1), got {pi!r}")
    return pi


@dataclass(frozen=True)
class SeedSpec:
    """Seed for one replication of a study."""

    master_seed: int
    rep_index: int = 0

    def __post_init__(self) -> None:
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigurationError("master_seed must be an unsigned 64-bit integer")
        if int(self.rep_index) < 0:
            raise ConfigurationError("rep_index must be non-negative")

    def rng(self, tag: str) -> np.random.Generator:
        """Generator for the stream named ``tag`` within this replication."""
        key = zlib.crc32(tag.encode("utf-8"))
        ss = np.random.SeedSequence([int(self.master_seed), int(self.rep_index), key])
        return np.random.default_rng(ss)

    def child(self, rep_index: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, rep_index)


@dataclass(frozen=True)
class PowerSchedule:
    """A sequence ``scale * n**(-exponent)``, e.g. h_n or rho_n."""

    scale: float
    exponent: float = 0.0

    def __call__(self, n: int) -> float:
        return float(self.scale) * float(n) ** (-float(self.exponent))


@dataclass(frozen=True, eq=False)
class AssignmentVector:
    """Binary treatment vector together with the design probability that generated it."""

    w: np.ndarray
    pi: float

    def __post_init__(self) -> None:
        w = np.asarray(self.w)
        if w.ndim != 1:
            raise ConfigurationError("assignment vector must be one-dimensional")
        if not np.all((w == 0) | (w == 1)):
            raise ConfigurationError("assignment entries must be exactly 0 or 1")
        object.__setattr__(self, "w", w.astype(np.int8))
        object.__setattr__(self, "pi", check_probability(self.pi))

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def ht_weights(self) -> np.ndarray:
        return ht_weight(self.w, self.pi)


@dataclass(frozen=True, eq=False)
class PerturbationMatrix:
    """Individualized +-h price perturbations of the augmented trial."""

    U: np.ndarray
    h: float
    alpha: float | None = None
    c_h: float | None = None

    def __post_init__(self) -> None:
        U = np.asarray(self.U, dtype=float)
        if U.ndim == 1:
            U = U[:, None]
        if self.h <= 0:
            raise ConfigurationError(f"perturbation magnitude must be positive, got {self.h}")
        if not np.all(np.abs(U) == self.h):
            raise ConfigurationError("perturbation entries must be exactly +h or -h")
        object.__setattr__(self, "U", U)

    @property
    def shape(self) -> tuple[int, int]:
        return self.U.shape


def draw_assignment(n: int, pi: float, seed: SeedSpec) -> AssignmentVector:
    """Draw ``W ~ RCT(pi)``: i.i.d. Bernoulli(pi) entries."""
    pi = check_probability(pi)
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    rng = seed.rng("assignment")
    w = (rng.random(n) < pi).astype(np.int8)
    return AssignmentVector(w, pi)


def draw_perturbations(n: int, J: int, h: float, seed: SeedSpec) -> PerturbationMatrix:
    """Draw an ``n x J`` matrix with i.i.d. entries uniform on {+h, -h}."""
    if h <= 0:
        raise ConfigurationError(f"perturbation magnitude must be positive, got {h}")
    if J < 1 or n < 1:
        raise ConfigurationError("n and J must be at least 1")
    rng = seed.rng("perturbation")
    signs = rng.integers(0, 2, size=(n, J)) * 2 - 1
    return PerturbationMatrix(signs * float(h), float(h))


def ht_weight(w, pi: float):
    """Horvitz-Thompson contrast weight ``w/pi - (1-w)/(1-pi)``; vectorizes over ``w``."""
    pi = check_probability(pi)
    w = np.asarray(w, dtype=float)
    out = w / pi - (1.0 - w) / (1.0 - pi)
    return float(out) if out.ndim == 0 else out
