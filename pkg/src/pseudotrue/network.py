"""Random networks, local exposures and PC-balancing projections.

Networks are stored as symmetric ``scipy.sparse`` CSR matrices with a zero diagonal.
Edge draws run in row blocks, so memory stays bounded at ``n`` in the tens of
thousands even though the probability kernel itself is dense.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .design import AssignmentVector, PowerSchedule, SeedSpec, ht_weight
from .errors import ConfigurationError, NumericalError, SpecificationError, UsageError

__all__ = [
    "GraphonSpec",
    "Network",
    "ExposureProfile",
    "sample_graphon_network",
    "sample_edges",
    "exposure_profile",
    "raw_weights",
    "top_r_eigenpairs",
    "top_r_eigenvectors",
    "pc_project",
    "write_edge_list",
    "read_edge_list",
]

# dense eigh below this size, Lanczos (ARPACK) above
DENSE_EIGEN_MAX_N = 300
_BLOCK_ENTRIES = 2_000_000


def _ones(q: np.ndarray) -> np.ndarray:
    return np.ones(np.shape(q)[0])


def _uniform_latents(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.random(n)


@dataclass(frozen=True)
class GraphonSpec:
    """Sparse low-rank graphon ``G_n = min(1, rho_n * sum_k lam_k psi_k(q) psi_k(q'))``.

    ``eigenfunctions`` act on arrays of latent positions. ``latent_sampler(rng, n)``
    draws the latents ``Q_i``. If ``eigenfunction_means`` (E[psi_k(Q)]) is omitted it
    is estimated once by Monte Carlo when :meth:`marginal` is first needed.
    """

    eigenvalues: tuple[float, ...]
    eigenfunctions: tuple[Callable[[np.ndarray], np.ndarray], ...]
    density: PowerSchedule
    latent_sampler: Callable[[np.random.Generator, int], np.ndarray] = _uniform_latents
    eigenfunction_means: tuple[float, ...] | None = None
    _mc_means: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise SpecificationError("a graphon needs at least one eigenvalue")
        if len(self.eigenfunctions) != lam.size:
            raise SpecificationError("one eigenfunction per eigenvalue is required")
        if np.any(lam == 0):
            raise SpecificationError("graphon eigenvalues must be nonzero")
        if np.any(np.diff(np.abs(lam)) > 1e-12):
            raise SpecificationError("eigenvalue magnitudes must be weakly decreasing")

    @property
    def rank(self) -> int:
        return len(self.eigenvalues)

    def rho(self, n: int) -> float:
        return self.density(n)

    def features(self, q: np.ndarray) -> np.ndarray:
        """Matrix ``[psi_1(q), ..., psi_r(q)]`` of shape (len(q), r)."""
        return np.column_stack([np.asarray(f(q), dtype=float) for f in self.eigenfunctions])

    def kernel(self, q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
        """Unscaled ``G(q1_a, q2_b)`` for all pairs."""
        lam = np.asarray(self.eigenvalues, dtype=float)
        return (self.features(q1) * lam) @ self.features(q2).T

    def means(self) -> np.ndarray:
        if self.eigenfunction_means is not None:
            return np.asarray(self.eigenfunction_means, dtype=float)
        if "m" not in self._mc_means:
            q = self.latent_sampler(np.random.default_rng(20240607), 1_000_000)
            self._mc_means["m"] = self.features(q).mean(axis=0)
        return self._mc_means["m"]

    def marginal(self, q: np.ndarray) -> np.ndarray:
        """``g(q) = E[G(q, Q')]``."""
        lam = np.asarray(self.eigenvalues, dtype=float)
        return self.features(q) @ (lam * self.means())

    def check_nonnegative(self, rng: np.random.Generator, size: int = 2000) -> float:
        """Smallest kernel value over a random latent sample; raises if clearly negative."""
        q = self.latent_sampler(rng, size)
        low = float(self.kernel(q, q).min())
        if low < -1e-12:
            raise SpecificationError(f"graphon takes negative value {low:.3g} at sampled latents")
        return low

    @classmethod
    def erdos_renyi(cls, scale: float, exponent: float = 0.0) -> "GraphonSpec":
        """Constant graphon ``G = 1``; edges are Bernoulli(rho_n)."""
        return cls((1.0,), (_ones,), PowerSchedule(scale, exponent), eigenfunction_means=(1.0,))

    @classmethod
    def stochastic_block(
        cls,
        block_matrix: Sequence[Sequence[float]],
        class_probs: Sequence[float],
        scale: float,
        exponent: float = 0.0,
    ) -> "GraphonSpec":
        """Stochastic block model with latent classes drawn with ``class_probs``.

        Eigenfunctions are normalized so that ``E[psi_k(Q)^2] = 1`` under the class
        distribution, and zero-eigenvalue directions are dropped.
        """
        B = np.asarray(block_matrix, dtype=float)
        p = np.asarray(class_probs, dtype=float)
        if B.shape != (p.size, p.size) or not np.allclose(B, B.T):
            raise SpecificationError("block matrix must be square, symmetric and match class_probs")
        if np.any(B < 0) or np.any(p <= 0) or not np.isclose(p.sum(), 1.0):
            raise SpecificationError("block probabilities must be >= 0 and class_probs a distribution")
        root = np.sqrt(p)
        vals, vecs = np.linalg.eigh(root[:, None] * B * root[None, :])
        keep = np.abs(vals) > 1e-12 * max(1.0, np.abs(vals).max())
        vals, vecs = vals[keep], vecs[:, keep]
        order = np.argsort(-np.abs(vals), kind="stable")
        vals, vecs = vals[order], vecs[:, order]
        tables = vecs / root[:, None]
        funcs = tuple(_TableFunction(tables[:, k]) for k in range(vals.size))
        cum = np.cumsum(p)

        def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
            return np.minimum(np.searchsorted(cum, rng.random(n), side="right"), p.size - 1)

        means = tuple(float(p @ tables[:, k]) for k in range(vals.size))
        return cls(tuple(vals), funcs, PowerSchedule(scale, exponent), sampler, means)


@dataclass(frozen=True)
class _TableFunction:
    table: np.ndarray

    def __call__(self, q: np.ndarray) -> np.ndarray:
        return self.table[np.asarray(q, dtype=int)]


@dataclass(frozen=True, eq=False)
class Network:
    """Undirected simple graph on ``n`` nodes; ``latents`` are optional node types."""

    adjacency: sp.csr_matrix
    latents: np.ndarray | None = None

    def __post_init__(self) -> None:
        A = sp.csr_matrix(self.adjacency, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise UsageError("adjacency must be square")
        if A.nnz:
            A.sum_duplicates()
            if np.any(A.diagonal() != 0):
                raise SpecificationError("adjacency must have a zero diagonal")
            if (A != A.T).nnz:
                raise SpecificationError("adjacency must be symmetric")
            if np.any(A.data != 1.0):
                raise SpecificationError("adjacency must be binary")
        object.__setattr__(self, "adjacency", A)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2

    @property
    def density(self) -> float:
        n = self.n
        return 2.0 * self.n_edges / (n * (n - 1)) if n > 1 else 0.0

    def dense(self) -> np.ndarray:
        return self.adjacency.toarray()

    def neighbors(self, i: int) -> np.ndarray:
        A = self.adjacency
        return A.indices[A.indptr[i] : A.indptr[i + 1]]

    @classmethod
    def from_dense(cls, E: np.ndarray, latents: np.ndarray | None = None) -> "Network":
        return cls(sp.csr_matrix(np.asarray(E, dtype=float)), latents)

    @classmethod
    def from_edges(cls, n: int, i: np.ndarray, j: np.ndarray, latents=None) -> "Network":
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        data = np.ones(2 * i.size)
        A = sp.csr_matrix((data, (np.r_[i, j], np.r_[j, i])), shape=(n, n))
        return cls(A, latents)


@dataclass(frozen=True, eq=False)
class ExposureProfile:
    """Treated-neighbor counts ``M`` and shares ``S = M / max(1, N)``."""

    M: np.ndarray
    S: np.ndarray


def sample_edges(
    prob_block: Callable[[int, int, int], np.ndarray], n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw independent upper-triangle edges.

    ``prob_block(i0, i1, c0)`` must return the edge probabilities for rows
    ``i0:i1`` and columns ``c0:n``. Returns the ``(i, j)`` arrays with ``i < j``.
    """
    ii_all, jj_all = [], []
    block = max(1, _BLOCK_ENTRIES // max(n, 1))
    for i0 in range(0, n - 1, block):
        i1 = min(n - 1, i0 + block)
        c0 = i0 + 1
        P = prob_block(i0, i1, c0)
        hit = rng.random(P.shape) < P
        ii, jj = np.nonzero(hit)
        ii = ii + i0
        jj = jj + c0
        keep = jj > ii
        ii_all.append(ii[keep])
        jj_all.append(jj[keep])
    if not ii_all:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(ii_all), np.concatenate(jj_all)


def _bernoulli_pairs(n: int, p: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Every pair ``i < j`` independently with probability ``p``, via geometric gaps."""
    total = n * (n - 1) // 2
    if p <= 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    if p >= 1:
        k = np.arange(total, dtype=np.int64)
    else:
        chunks, last = [], -1
        step = int(total * p + 6 * np.sqrt(total * p) + 16)
        while last < total:
            k = last + np.cumsum(rng.geometric(p, size=step), dtype=np.int64)
            chunks.append(k)
            last = int(k[-1])
        k = np.concatenate(chunks)
        k = k[k < total]
    # invert the row-major upper-triangle index
    i = n - 2 - np.floor(np.sqrt(4.0 * n * (n - 1) - 8.0 * k - 7) / 2 - 0.5).astype(np.int64)
    j = k + i + 1 - total + (n - i) * (n - i - 1) // 2
    return i, j


def sample_graphon_network(spec: GraphonSpec, n: int, seed: SeedSpec) -> Network:
    """Draw latents and then ``E_ij ~ Bernoulli(min(1, rho_n G(Q_i, Q_j)))`` for ``i < j``."""
    if n < 2:
        raise ConfigurationError("a network needs at least two nodes")
    rng = seed.rng("network")
    Q = spec.latent_sampler(rng, n)
    rho = spec.rho(n)
    if spec.rank == 1 and spec.eigenfunctions[0] is _ones:
        i, j = _bernoulli_pairs(n, min(1.0, rho * spec.eigenvalues[0]), rng)
        return Network.from_edges(n, i, j, latents=Q)

    def prob_block(i0: int, i1: int, c0: int) -> np.ndarray:
        G = spec.kernel(Q[i0:i1], Q[c0:])
        low = G.min() if G.size else 0.0
        if low < -1e-12:
            raise SpecificationError(f"graphon takes negative value {low:.3g} at sampled latents")
        return np.minimum(1.0, rho * G)

    i, j = sample_edges(prob_block, n, rng)
    return Network.from_edges(n, i, j, latents=Q)


def _check_dims(net: Network, a: AssignmentVector) -> None:
    if a.n != net.n:
        raise UsageError(f"assignment has {a.n} entries but the network has {net.n} nodes")


def exposure_profile(net: Network, a: AssignmentVector) -> ExposureProfile:
    _check_dims(net, a)
    M = net.adjacency @ a.w.astype(float)
    S = M / np.maximum(1.0, net.degrees)
    return ExposureProfile(M, S)


def raw_weights(net: Network, a: AssignmentVector) -> np.ndarray:
    """``nu_i = M_i/pi - (N_i - M_i)/(1-pi)``, the neighbor sum of HT weights."""
    _check_dims(net, a)
    return net.adjacency @ ht_weight(a.w, a.pi)


def top_r_eigenpairs(net: Network, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and orthonormal eigenvectors for the ``r`` largest-|lambda| eigenvalues.

    Small graphs use a dense symmetric solver. Larger ones use ARPACK Lanczos with a
    fixed start vector and an explicit residual check.
    """
    n = net.n
    if not 1 <= r <= n:
        raise ConfigurationError(f"rank r must satisfy 1 <= r <= n, got r={r}, n={n}")
    A = net.adjacency
    if A.nnz == 0:
        return np.zeros(r), np.eye(n, r)
    if n <= DENSE_EIGEN_MAX_N or r >= n - 1:
        vals, vecs = np.linalg.eigh(A.toarray())
    else:
        v0 = np.random.default_rng(0).standard_normal(n)
        try:
            vals, vecs = eigsh(A, k=r, which="LM", v0=v0, maxiter=max(1000, 20 * n))
        except ArpackNoConvergence as exc:
            raise NumericalError(
                "eigensolver did not converge", n=n, r=r, converged=len(exc.eigenvalues)
            ) from exc
    order = np.argsort(-np.abs(vals), kind="stable")[:r]
    vals, vecs = vals[order], vecs[:, order]
    resid = np.linalg.norm(A @ vecs - vecs * vals)
    scale = np.sqrt(A.nnz)  # Frobenius norm of a 0/1 matrix
    if resid > 1e-6 * scale:
        raise NumericalError("eigenvector residual too large", residual=resid, norm=scale)
    return vals, vecs


def top_r_eigenvectors(net: Network, r: int) -> np.ndarray:
    return top_r_eigenpairs(net, r)[1]


def pc_project(v: np.ndarray, Psi: np.ndarray) -> np.ndarray:
    """``(I - Psi Psi^T) v`` for orthonormal ``Psi``."""
    v = np.asarray(v, dtype=float)
    Psi = np.asarray(Psi, dtype=float)
    if Psi.ndim != 2 or Psi.shape[0] != v.shape[0]:
        raise UsageError(f"cannot project a length-{v.shape[0]} vector with basis {Psi.shape}")
    return v - Psi @ (Psi.T @ v)


def write_edge_list(net: Network, path: str | Path) -> None:
    """One ``i j`` pair per line, 0-indexed, ``i < j``; first line is ``# n=<nodes>``."""
    upper = sp.triu(net.adjacency, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={net.n}\n")
        for i, j in zip(upper.row[order], upper.col[order]):
            fh.write(f"{i} {j}\n")


def read_edge_list(path: str | Path, n: int | None = None) -> Network:
    pairs = []
    header_n = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line[1:].strip().startswith("n="):
                    header_n = int(line[1:].strip()[2:])
                continue
            i, j = (int(t) for t in line.split())
            if i == j:
                raise SpecificationError(f"self-loop {i} in edge list")
            pairs.append((min(i, j), max(i, j)))
    n = n if n is not None else header_n
    arr = np.array(sorted(set(pairs)), dtype=np.int64).reshape(-1, 2)
    if n is None:
        n = int(arr.max()) + 1 if arr.size else 0
    if arr.size and arr.max() >= n:
        raise UsageError(f"edge list references node {arr.max()} but n={n}")
    return Network.from_edges(n, arr[:, 0], arr[:, 1])
