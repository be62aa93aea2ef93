"""Channel estimators computed from one realized experiment.

* direct effect: Horvitz-Thompson contrast of outcomes
* local indirect effect: neighbor HT weights balanced against the top-r adjacency PCs
* global indirect effect: price elasticity from the perturbation instrument times the
  HT effect of treatment on excess demand
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import AssignmentVector, PerturbationMatrix, ht_weight
from .errors import ConfigurationError, EstimationError, UsageError
from .network import Network, pc_project, raw_weights, top_r_eigenvectors

__all__ = [
    "ExperimentData",
    "EstimateReport",
    "estimate_ade",
    "estimate_local_aie",
    "estimate_global_aie",
    "estimate_all",
    "MAX_CONDITION",
]

MAX_CONDITION = 1e10


@dataclass(frozen=True, eq=False)
class ExperimentData:
    a: AssignmentVector
    net: Network
    U: PerturbationMatrix
    Y: np.ndarray
    Z: np.ndarray
    r: int = 1

    def __post_init__(self) -> None:
        n = self.a.n
        Y = np.asarray(self.Y, dtype=float)
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        if Y.shape != (n,) or self.net.n != n or Z.shape[0] != n or self.U.shape != Z.shape:
            raise UsageError(
                f"inconsistent dimensions: n={n}, Y{Y.shape}, Z{Z.shape}, U{self.U.shape}, network {self.net.n}"
            )
        if not 1 <= self.r <= n:
            raise ConfigurationError(f"PC rank r must satisfy 1 <= r <= n, got {self.r}")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "Z", Z)

    @property
    def n(self) -> int:
        return self.a.n


@dataclass(frozen=True)
class EstimateReport:
    ade: float
    aie_local: float
    aie_global: float
    mpe: float
    gamma_hat: np.ndarray
    tau_z_hat: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict[str, float]:
        return {"ade": self.ade, "aie_local": self.aie_local, "aie_global": self.aie_global, "mpe": self.mpe}


def estimate_ade(data: ExperimentData) -> float:
    return float(np.mean(ht_weight(data.a.w, data.a.pi) * data.Y))


def _local(data: ExperimentData, Psi: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    nu = raw_weights(data.net, data.a)
    if Psi is None:
        Psi = top_r_eigenvectors(data.net, data.r)
    return float(pc_project(nu, Psi) @ data.Y / data.n), Psi


def estimate_local_aie(data: ExperimentData) -> float:
    return _local(data)[0]


def _global(data: ExperimentData) -> tuple[float, np.ndarray, np.ndarray, float]:
    U = data.U.U
    UZ = U.T @ data.Z
    UY = U.T @ data.Y
    tau_z = ht_weight(data.a.w, data.a.pi) @ data.Z / data.n
    cond = float(np.linalg.cond(UZ)) if np.any(UZ) else np.inf
    if not np.any(data.Y):
        # zero outcomes identify a zero elasticity whatever U'Z looks like
        return 0.0, np.zeros(UZ.shape[0]), tau_z, cond
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise EstimationError("U'Z is singular or ill-conditioned", condition_number=cond, h=data.U.h, n=data.n)
    gamma = np.linalg.solve(UZ, UY)
    resid = np.linalg.norm(UZ @ gamma - UY)
    if resid > 1e-8 * max(1.0, np.linalg.norm(UY)):
        raise EstimationError("inaccurate solve for the price elasticity", residual=float(resid), condition_number=cond)
    return float(-gamma @ tau_z), gamma, tau_z, cond


def estimate_global_aie(data: ExperimentData) -> float:
    return _global(data)[0]


def estimate_all(data: ExperimentData, Psi: np.ndarray | None = None) -> EstimateReport:
    """All three channels and their sum; ``Psi`` may pass precomputed eigenvectors."""
    ade = estimate_ade(data)
    local, Psi = _local(data, Psi)
    glob, gamma, tau_z, cond = _global(data)
    diagnostics = {"uz_condition": cond, "projector_rank": int(np.linalg.matrix_rank(Psi))}
    return EstimateReport(ade, local, glob, ade + local + glob, gamma, tau_z, diagnostics)
