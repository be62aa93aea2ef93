"""Market clearing: finite-sample equilibrium prices, population prices, elasticities.

Two duck-typed interfaces are used here.

A *sample market* has ``excess_demand(w, prices) -> (n, J)`` giving each unit's excess
demand at the price it faces (row ``i`` of ``prices``). It may also provide
``excess_demand_jacobian(w, prices) -> (n, J, J)``.

A *population model* has ``mean_excess_demand(pi, p) -> (J,)``, the expectation of
``pi z(1, p) + (1 - pi) z(0, p)``, and ``mean_outcome(pi, p)``, the expectation of
``pi y(1, pi, p) + (1 - pi) y(0, pi, p)``. Analytic ``mean_excess_demand_jacobian``,
``mean_outcome_price_gradient`` and ``population_price`` are used when present, and
central finite differences or root finding otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .design import AssignmentVector, PerturbationMatrix
from .errors import ConfigurationError, EquilibriumError, NumericalError, UsageError

__all__ = [
    "EquilibriumSolution",
    "PopulationTargets",
    "tolerance_schedule",
    "solve_equilibrium",
    "mean_clearing_residual",
    "population_price",
    "elasticities",
    "population_targets",
    "fd_step",
]


def tolerance_schedule(n: int) -> float:
    """Clearing tolerance ``a_n = min(1e-10, 0.1 n^-1.5)``, which is o(1/n)."""
    return min(1e-10, 0.1 * float(n) ** -1.5)


def fd_step(p: np.ndarray | float) -> np.ndarray:
    return 1e-5 * (1.0 + np.abs(np.asarray(p, dtype=float)))


@dataclass(frozen=True)
class EquilibriumSolution:
    price: np.ndarray
    residual_norm: float
    tolerance: float
    iterations: int

    @property
    def scalar_price(self) -> float:
        return float(self.price[0])


@dataclass(frozen=True)
class PopulationTargets:
    """Population clearing price with the price gradients evaluated there."""

    p_star: np.ndarray
    xi_z: np.ndarray
    xi_y: np.ndarray
    tau_z: np.ndarray

    @property
    def gamma(self) -> np.ndarray:
        """Price elasticity ``xi_z^-1 xi_y``."""
        return np.linalg.solve(self.xi_z, self.xi_y)

    @property
    def tau_global(self) -> float:
        """``-gamma' tau_z``, the limit of the global indirect effect."""
        return float(-self.gamma @ self.tau_z)


def _as_prices(U: PerturbationMatrix | np.ndarray | None, n: int, J: int) -> np.ndarray:
    if U is None:
        return np.zeros((n, J))
    arr = U.U if isinstance(U, PerturbationMatrix) else np.asarray(U, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape != (n, J):
        raise UsageError(f"perturbations have shape {arr.shape}, expected {(n, J)}")
    return arr


def mean_clearing_residual(market, w: np.ndarray, p: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """``(1/n) sum_i z_i(w_i, p + U_i)`` as a J-vector."""
    return np.asarray(market.excess_demand(w, p[None, :] + offsets), dtype=float).mean(axis=0)


def _mean_jacobian(market, w, p, offsets) -> np.ndarray:
    J = p.size
    if hasattr(market, "excess_demand_jacobian"):
        return np.asarray(market.excess_demand_jacobian(w, p[None, :] + offsets)).mean(axis=0)
    jac = np.empty((J, J))
    steps = fd_step(p)
    for k in range(J):
        e = np.zeros(J)
        e[k] = steps[k]
        hi = mean_clearing_residual(market, w, p + e, offsets)
        lo = mean_clearing_residual(market, w, p - e, offsets)
        jac[:, k] = (hi - lo) / (2 * steps[k])
    return jac


def solve_equilibrium(
    market,
    a: AssignmentVector,
    U: PerturbationMatrix | np.ndarray | None = None,
    a_n: float | None = None,
    p0: np.ndarray | float | None = None,
    max_iter: int = 200,
) -> EquilibriumSolution:
    """Find ``p`` with ``||(1/n) sum_i z_i(w_i, p + U_i)|| <= a_n``.

    With one good, safeguarded Newton steps run inside a sign-change bracket that is
    grown geometrically around ``p0``. With several goods, damped Newton is used.
    """
    w = a.w
    n = a.n
    J = int(getattr(market, "n_goods", 1))
    offsets = _as_prices(U, n, J)
    tol = tolerance_schedule(n) if a_n is None else float(a_n)
    start = np.zeros(J) if p0 is None else np.broadcast_to(np.asarray(p0, dtype=float), (J,)).copy()
    if J == 1:
        price, iters = _solve_scalar(market, w, offsets, tol, float(start[0]), max_iter)
        price = np.array([price])
    else:
        price, iters = _solve_newton(market, w, offsets, tol, start, max_iter)
    resid = float(np.linalg.norm(mean_clearing_residual(market, w, price, offsets)))
    if not resid <= tol:
        raise EquilibriumError("market did not clear", residual=resid, tolerance=tol, price=price.tolist())
    return EquilibriumSolution(price, resid, tol, iters)


def _solve_scalar(market, w, offsets, tol, p0, max_iter) -> tuple[float, int]:
    def f(p: float) -> float:
        return float(mean_clearing_residual(market, w, np.array([p]), offsets)[0])

    def df(p: float) -> float:
        return float(_mean_jacobian(market, w, np.array([p]), offsets)[0, 0])

    f0 = f(p0)
    if abs(f0) <= tol:
        return p0, 0
    # excess demand falls with price: a positive residual means the price must rise
    lo, flo, hi, fhi = (p0, f0, None, None) if f0 > 0 else (None, None, p0, f0)
    step = 1.0
    for _ in range(80):
        if f0 > 0:
            cand = p0 + step
            fc = f(cand)
            if fc > 0:
                lo, flo = cand, fc
            else:
                hi, fhi = cand, fc
        else:
            cand = p0 - step
            fc = f(cand)
            if fc < 0:
                hi, fhi = cand, fc
            else:
                lo, flo = cand, fc
        if abs(fc) <= tol:
            return cand, 0
        if lo is not None and hi is not None:
            break
        step *= 2.0
    else:
        raise EquilibriumError("no sign change found while bracketing the price", residual=f0)
    if lo >= hi:
        raise EquilibriumError("excess demand is not decreasing in price", lo=lo, hi=hi)

    p, fp = (lo, flo) if abs(flo) < abs(fhi) else (hi, fhi)
    for it in range(1, max_iter + 1):
        slope = df(p)
        cand = p - fp / slope if slope != 0 and np.isfinite(slope) else np.nan
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        fc = f(cand)
        if abs(fc) <= tol:
            return cand, it
        if fc > 0:
            lo = cand
        else:
            hi = cand
        p, fp = cand, fc
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(p)):
            break
    raise EquilibriumError("price iteration stalled", residual=abs(fp), iterations=max_iter)


def _solve_newton(market, w, offsets, tol, p0, max_iter) -> tuple[np.ndarray, int]:
    p = p0.copy()
    r = mean_clearing_residual(market, w, p, offsets)
    for it in range(1, max_iter + 1):
        if np.linalg.norm(r) <= tol:
            return p, it - 1
        jac = _mean_jacobian(market, w, p, offsets)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise EquilibriumError("singular Jacobian in Newton step", residual=float(np.linalg.norm(r))) from exc
        t = 1.0
        for _ in range(40):
            cand = p + t * step
            rc = mean_clearing_residual(market, w, cand, offsets)
            if np.linalg.norm(rc) < (1 - 1e-4 * t) * np.linalg.norm(r):
                break
            t *= 0.5
        else:
            raise EquilibriumError("Newton line search failed", residual=float(np.linalg.norm(r)))
        p, r = cand, rc
    if np.linalg.norm(r) <= tol:
        return p, max_iter
    raise EquilibriumError("Newton iteration did not converge", residual=float(np.linalg.norm(r)))


def population_price(model, pi: float) -> np.ndarray:
    """Root of ``E[pi z(1, p) + (1 - pi) z(0, p)] = 0``."""
    pi = float(pi)
    if not 0.0 <= pi <= 1.0:
        raise ConfigurationError(f"pi must lie in [0, 1], got {pi}")
    if hasattr(model, "population_price"):
        return np.atleast_1d(np.asarray(model.population_price(pi), dtype=float))
    J = int(getattr(model, "n_goods", 1))

    def fun(p):
        return np.asarray(model.mean_excess_demand(pi, np.asarray(p)), dtype=float)

    sol = optimize.root(fun, np.zeros(J), method="hybr", options={"xtol": 1e-14})
    resid = float(np.linalg.norm(fun(sol.x)))
    if not sol.success or resid > 1e-10:
        raise NumericalError("population clearing price not found", residual=resid, message=sol.message)
    return np.atleast_1d(sol.x)


def _fd_gradient(fun, p: np.ndarray) -> np.ndarray:
    """Central differences of a vector- or scalar-valued function; columns index p."""
    steps = fd_step(p)
    cols = []
    for k in range(p.size):
        e = np.zeros(p.size)
        e[k] = steps[k]
        cols.append((np.atleast_1d(fun(p + e)) - np.atleast_1d(fun(p - e))) / (2 * steps[k]))
    return np.column_stack(cols)


def elasticities(model, pi: float, p_star: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
    """Population gradients ``(xi_z, xi_y)`` at ``p_star``.

    ``xi_z`` is the J x J Jacobian of mean excess demand; ``xi_y`` the price gradient of
    the mean outcome with the exposure argument held at ``pi``.
    """
    p = np.atleast_1d(np.asarray(p_star, dtype=float))
    if hasattr(model, "mean_excess_demand_jacobian"):
        xi_z = np.atleast_2d(np.asarray(model.mean_excess_demand_jacobian(pi, p), dtype=float))
    else:
        xi_z = _fd_gradient(lambda q: model.mean_excess_demand(pi, q), p)
    if hasattr(model, "mean_outcome_price_gradient"):
        xi_y = np.atleast_1d(np.asarray(model.mean_outcome_price_gradient(pi, p), dtype=float))
    else:
        xi_y = _fd_gradient(lambda q: model.mean_outcome(pi, q), p).ravel()
    smallest = np.linalg.svd(xi_z, compute_uv=False).min()
    if smallest <= 1e-8:
        raise NumericalError("excess-demand Jacobian is singular", smallest_singular_value=float(smallest))
    return xi_z, xi_y


def population_targets(model, pi: float) -> PopulationTargets:
    """Clearing price, elasticities and ``tau_z = E[z(1, p*) - z(0, p*)]``."""
    p_star = population_price(model, pi)
    xi_z, xi_y = elasticities(model, pi, p_star)
    tau_z = np.atleast_1d(
        np.asarray(model.mean_excess_demand(1.0, p_star), dtype=float)
        - np.asarray(model.mean_excess_demand(0.0, p_star), dtype=float)
    )
    return PopulationTargets(p_star, xi_z, xi_y, tau_z)
