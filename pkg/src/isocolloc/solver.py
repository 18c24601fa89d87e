"""Collocation and Galerkin systems for 1D and mapped 2D elliptic problems.

The 1D operator is ``L u = -u'' + a1 u' + a0 u``; the 2D operator is ``-Δu``.
Homogeneous Dirichlet conditions are imposed by dropping the boundary basis
functions, periodic ones by the wrapped basis of a periodic space.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg

from .geometry import GeometryMap, map_jet, physical_second_order_coeffs
from .point_selection import CollocationSet
from .quadrature import element_rule
from .spline_core import SplineSpace1D, TensorSpace, basis_ders, eval_spline, tensor_basis_ders

__all__ = [
    "Problem1D",
    "Problem2D",
    "LinearSystem",
    "DiscreteSolution",
    "SingularSystemError",
    "assemble_collocation_1d",
    "assemble_collocation_2d",
    "assemble_galerkin",
    "solve",
    "solve_system",
]

log = logging.getLogger(__name__)

_PIVOT_TOL = 1e-14


class SingularSystemError(ArithmeticError):
    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Problem1D:
    """``-u'' + a1 u' + a0 u = f`` on (0, 1).

    ``bc`` is ``"dirichlet"`` (u(0) = u(1) = 0) or ``"periodic"``. A periodic
    problem is only well posed when ``a0`` is not identically zero; this is
    the caller's responsibility. Coefficient functions must accept arrays.
    """

    f: Callable
    a0: Callable = _zero
    a1: Callable = _zero
    bc: str = "dirichlet"

    def __post_init__(self):
        if self.bc not in ("dirichlet", "periodic"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")


@dataclass(frozen=True)
class Problem2D:
    """``-Δu = f`` in ``geometry([0,1]^2)`` with ``u = 0`` on the boundary.

    ``f`` takes physical coordinates ``(x, y)`` as arrays.
    """

    f: Callable
    geometry: GeometryMap


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Dense system over the free degrees of freedom ``free`` of the space."""

    matrix: np.ndarray
    rhs: np.ndarray
    free: np.ndarray
    n_dofs: int

    def __post_init__(self):
        rows, cols = self.matrix.shape
        if rows < cols:
            raise ValueError(f"{rows} equations for {cols} unknowns")
        if self.rhs.shape != (rows,) or self.free.shape != (cols,):
            raise ValueError("inconsistent system dimensions")

    @property
    def square(self) -> bool:
        return self.matrix.shape[0] == self.matrix.shape[1]

    @property
    def kind(self) -> str:
        return "square" if self.square else "overdetermined"

    def relative_residual(self, c) -> float:
        r = self.matrix @ c - self.rhs
        scale = np.linalg.norm(self.rhs) or 1.0
        return float(np.linalg.norm(r) / scale)

    def expand(self, c) -> np.ndarray:
        """Full coefficient vector with constrained entries set to zero."""
        full = np.zeros(self.n_dofs)
        full[self.free] = c
        return full


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    """``u_h = Σ c_k N_k`` (1D) or ``Σ c_k N_k ∘ F^{-1}`` (2D)."""

    space: Union[SplineSpace1D, TensorSpace]
    coeffs: np.ndarray
    geometry: Optional[GeometryMap] = None

    @property
    def is_2d(self) -> bool:
        return isinstance(self.space, TensorSpace)

    def __call__(self, x, r: int = 0):
        if self.is_2d:
            raise TypeError("use evaluate_2d for tensor-product solutions")
        return eval_spline(self.space, self.coeffs, x, r)

    def evaluate_2d(self, xi, eta, r: int = 1):
        """Physical position, value and physical derivatives at parametric points.

        Returns ``(position, value, grad)`` for ``r == 1`` and additionally the
        physical Hessian ``(u_xx, u_xy, u_yy)`` for ``r == 2``.
        """
        xi = np.ravel(xi)
        eta = np.ravel(eta)
        jet = map_jet(self.geometry, xi, eta)
        idx, ders = tensor_basis_ders(self.space, xi, eta, 2)
        c = self.coeffs[idx]  # (N, nloc)
        combined = np.einsum("ndl,nl->nd", ders, c)
        value, grad, hess = physical_second_order_coeffs(jet, combined[:, :, None])
        value, grad, hess = value[:, 0], grad[:, 0], hess[:, 0]
        if r >= 2:
            return jet.position, value, grad, hess
        return jet.position, value, grad


def _free_dofs_1d(space: SplineSpace1D) -> np.ndarray:
    if space.periodic:
        return np.arange(space.dim)
    return np.arange(1, space.dim - 1)


def _average_rows(A, b, cs: CollocationSet):
    if not cs.groups:
        return A, b
    grouped = {i: g for g in cs.groups for i in g}
    rows_A, rows_b = [], []
    for i in range(A.shape[0]):
        g = grouped.get(i)
        if g is None:
            rows_A.append(A[i])
            rows_b.append(b[i])
        elif i == min(g):
            rows_A.append(A[list(g)].mean(axis=0))
            rows_b.append(b[list(g)].mean())
    return np.array(rows_A), np.array(rows_b)


def _check_count(rows: int, cols: int, cs: CollocationSet):
    if rows < cols:
        raise ValueError(
            f"{cs.scheme} set gives {rows} equations for {cols} unknowns"
        )


def assemble_collocation_1d(prob: Problem1D, space: SplineSpace1D, cs: CollocationSet) -> LinearSystem:
    """One row ``Σ_j L N_j(τ) c_j = f(τ)`` per collocation point ``τ``."""
    if (prob.bc == "periodic") != space.periodic:
        raise ValueError(f"{prob.bc} problem on a {space.kind} space")
    if cs.dim != 1:
        raise ValueError("1D assembly needs a univariate collocation set")
    tau = cs.points
    free = _free_dofs_1d(space)
    _check_count(cs.n_equations, free.size, cs)
    A = (
        -space.basis_matrix(tau, 2)
        + np.asarray(prob.a1(tau))[:, None] * space.basis_matrix(tau, 1)
        + np.asarray(prob.a0(tau))[:, None] * space.basis_matrix(tau, 0)
    )
    b = np.broadcast_to(np.asarray(prob.f(tau), dtype=float), tau.shape).copy()
    A, b = _average_rows(A[:, free], b, cs)
    return LinearSystem(A, b, free, space.dim)


def _interior_dofs_2d(ts: TensorSpace) -> np.ndarray:
    return np.flatnonzero(~ts.boundary_mask())


def assemble_collocation_2d(
    prob: Problem2D, ts: TensorSpace, cs2d: CollocationSet, geometry: Optional[GeometryMap] = None
) -> LinearSystem:
    """Rows ``-Σ_k (Δ N_k∘F^{-1})(F(τ)) c_k = f(F(τ))`` over interior functions."""
    geometry = geometry or prob.geometry
    if cs2d.dim != 2:
        raise ValueError("2D assembly needs a bivariate collocation set")
    free = _interior_dofs_2d(ts)
    _check_count(cs2d.n_equations, free.size, cs2d)
    xi, eta = cs2d.points[:, 0], cs2d.points[:, 1]
    jet = map_jet(geometry, xi, eta)
    idx, ders = tensor_basis_ders(ts, xi, eta, 2)
    _, _, hess = physical_second_order_coeffs(jet, ders)
    lap = hess[..., 0] + hess[..., 2]  # (N, nloc)
    A = np.zeros((xi.size, ts.dim))
    rows = np.repeat(np.arange(xi.size), idx.shape[1])
    np.add.at(A, (rows, idx.ravel()), -lap.ravel())
    x, y = jet.position[:, 0], jet.position[:, 1]
    b = np.broadcast_to(np.asarray(prob.f(x, y), dtype=float), x.shape).copy()
    A, b = _average_rows(A[:, free], b, cs2d)
    return LinearSystem(A, b, free, ts.dim)


def assemble_galerkin(
    prob: Union[Problem1D, Problem2D],
    space: Union[SplineSpace1D, TensorSpace],
    geometry: Optional[GeometryMap] = None,
    quad_points: Optional[int] = None,
) -> LinearSystem:
    """Weak form ``∫ u'v' + a1 u' v + a0 u v = ∫ f v`` (1D) or ``∫ ∇u·∇v = ∫ f v`` (2D).

    Gauss-Legendre with ``p + 2`` points per element and direction unless
    ``quad_points`` is given.
    """
    if isinstance(prob, Problem2D):
        return _galerkin_2d(prob, space, geometry or prob.geometry, quad_points)
    p = space.degree
    nq = quad_points or p + 2
    if nq < p + 1:
        raise ValueError(f"need at least {p + 1} quadrature points per element")
    x, w = element_rule(space.elements, nq)
    x, w = x.ravel(), w.ravel()
    first, vals = basis_ders(space.kv, x, 1)
    N0, N1 = vals[:, 0, :], vals[:, 1, :]
    a0 = np.broadcast_to(np.asarray(prob.a0(x), dtype=float), x.shape)
    a1 = np.broadcast_to(np.asarray(prob.a1(x), dtype=float), x.shape)
    f = np.broadcast_to(np.asarray(prob.f(x), dtype=float), x.shape)
    # local[q, test, trial]
    local = w[:, None, None] * (
        N1[:, :, None] * N1[:, None, :]
        + N0[:, :, None] * (a1[:, None, None] * N1[:, None, :] + a0[:, None, None] * N0[:, None, :])
    )
    dofs = space.dof(first[:, None] + np.arange(p + 1))
    K = np.zeros((space.dim, space.dim))
    np.add.at(K, (dofs[:, :, None], dofs[:, None, :]), local)
    F = np.zeros(space.dim)
    np.add.at(F, dofs, w[:, None] * f[:, None] * N0)
    free = _free_dofs_1d(space)
    return LinearSystem(K[np.ix_(free, free)], F[free], free, space.dim)


def _galerkin_2d(prob: Problem2D, ts: TensorSpace, geometry: GeometryMap, quad_points):
    p, q = ts.degrees
    nqx = quad_points or p + 2
    nqy = quad_points or q + 2
    ex, wx = element_rule(ts.space_x.elements, nqx)
    ey, wy = element_rule(ts.space_y.elements, nqy)
    K = np.zeros((ts.dim, ts.dim))
    F = np.zeros(ts.dim)
    for j in range(ey.shape[0]):
        for i in range(ex.shape[0]):
            XI, ETA = np.meshgrid(ex[i], ey[j], indexing="xy")
            W = np.outer(wy[j], wx[i]).ravel()
            xi, eta = XI.ravel(), ETA.ravel()
            jet = map_jet(geometry, xi, eta)
            idx, ders = tensor_basis_ders(ts, xi, eta, 1)
            Jt = np.transpose(jet.jacobian, (0, 2, 1))
            grad = np.linalg.solve(Jt, ders[:, 1:3, :])  # (nq, 2, nloc)
            dV = W * np.abs(jet.det)
            Kloc = np.einsum("q,qka,qkb->ab", dV, grad, grad)
            fv = prob.f(jet.position[:, 0], jet.position[:, 1])
            Floc = np.einsum("q,q,qa->a", dV, fv, ders[:, 0, :])
            dofs = idx[0]
            K[np.ix_(dofs, dofs)] += Kloc
            F[dofs] += Floc
    free = _interior_dofs_2d(ts)
    return LinearSystem(K[np.ix_(free, free)], F[free], free, ts.dim)


def solve(sys: LinearSystem) -> np.ndarray:
    """Solve a square system by partially pivoted LU, else by Householder QR.

    Raises :class:`SingularSystemError` when a pivot (diagonal of U or R)
    falls below ``1e-14`` times the largest matrix entry.
    """
    A, b = sys.matrix, sys.rhs
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    if scale == 0.0:
        raise SingularSystemError("zero system matrix")
    if sys.square:
        with warnings.catch_warnings():
            # exact zero pivots are reported below with more context
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
        _check_pivots(np.diag(lu), scale, "LU")
        c = scipy.linalg.lu_solve((lu, piv), b)
    else:
        Q, R = scipy.linalg.qr(A, mode="economic")
        _check_pivots(np.diag(R), scale, "QR")
        c = scipy.linalg.solve_triangular(R, Q.T @ b)
    log.debug("%s solve: %d x %d, relative residual %.3e", sys.kind, *A.shape, sys.relative_residual(c))
    return c


def _check_pivots(diag, scale, method):
    small = np.abs(diag) < _PIVOT_TOL * scale
    if np.any(small):
        k = int(np.argmax(small))
        raise SingularSystemError(
            f"numerically singular matrix: {method} pivot {k} is {diag[k]:.3e} (scale {scale:.3e})",
            row=k,
            col=k,
        )


def solve_system(sys: LinearSystem, space, geometry: Optional[GeometryMap] = None) -> DiscreteSolution:
    """Solve ``sys`` and wrap the expanded coefficients as a solution."""
    return DiscreteSolution(space, sys.expand(solve(sys)), geometry)
