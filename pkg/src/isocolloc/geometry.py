"""Parametric-to-physical maps of the unit square and derivative pushforward.

The solution basis lives on the parameter square; collocating ``-Δu = f`` in
physical space needs the physical Hessian of ``N ∘ F^{-1}``, which follows
from the chain rule

    H_param = Jᵀ H_phys J + Σ_k (∂u/∂x_k) ∂²F_k,

solved pointwise for the three entries of ``H_phys``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .spline_core import KnotVector, SplineSpace1D, TensorSpace, tensor_basis_ders

__all__ = [
    "MapJet",
    "GeometryMap",
    "IdentityMap",
    "BilinearMap",
    "NurbsMap",
    "SingularJacobianError",
    "map_jet",
    "physical_second_order_coeffs",
    "make_identity",
    "make_rhombus",
    "make_quarter_annulus",
    "invert_map",
]

_SINGULAR_TOL = 1e-12


class SingularJacobianError(ArithmeticError):
    def __init__(self, location, det, frame="parametric"):
        x, y = location
        super().__init__(f"singular geometry Jacobian at {frame} point ({x:.6g}, {y:.6g}), det = {det:.3e}")
        self.location = (float(x), float(y))
        self.frame = frame
        self.det = det


class MapJet(NamedTuple):
    """Position, Jacobian and second derivatives of F at ``N`` points.

    ``jacobian[:, k, a] = ∂x_k/∂ξ_a``; ``second[:, d, k]`` is the ``d``-th
    second derivative (ξξ, ξη, ηη) of component ``k``.
    """

    position: np.ndarray  # (N, 2)
    jacobian: np.ndarray  # (N, 2, 2)
    second: np.ndarray  # (N, 3, 2)

    @property
    def det(self) -> np.ndarray:
        J = self.jacobian
        return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]


class GeometryMap:
    kind = "abstract"

    def _jet(self, xi: np.ndarray, eta: np.ndarray) -> MapJet:
        raise NotImplementedError

    def __call__(self, xi, eta) -> np.ndarray:
        return map_jet(self, xi, eta, check=False).position


class IdentityMap(GeometryMap):
    kind = "identity_2d"

    def _jet(self, xi, eta):
        N = xi.size
        J = np.zeros((N, 2, 2))
        J[:, 0, 0] = J[:, 1, 1] = 1.0
        return MapJet(np.column_stack([xi, eta]), J, np.zeros((N, 3, 2)))


@dataclass(frozen=True, eq=False)
class BilinearMap(GeometryMap):
    """Bilinear quadrilateral; vertices ordered F(0,0), F(1,0), F(0,1), F(1,1)."""

    vertices: np.ndarray
    kind = "bilinear_quad"

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.shape != (4, 2):
            raise ValueError("bilinear map needs four 2D vertices")
        object.__setattr__(self, "vertices", v)

    def _jet(self, xi, eta):
        v00, v10, v01, v11 = self.vertices
        twist = v11 - v10 - v01 + v00
        xi = xi[:, None]
        eta = eta[:, None]
        pos = v00 + xi * (v10 - v00) + eta * (v01 - v00) + xi * eta * twist
        d_xi = (v10 - v00) + eta * twist
        d_eta = (v01 - v00) + xi * twist
        J = np.stack([d_xi, d_eta], axis=2)
        second = np.zeros((xi.size, 3, 2))
        second[:, 1, :] = twist
        return MapJet(pos, J, second)


@dataclass(frozen=True, eq=False)
class NurbsMap(GeometryMap):
    """``F(ξ, η) = Σ_k P_k R_k(ξ, η)`` with control points ordered by ``k = i + j n``."""

    space: TensorSpace
    control_points: np.ndarray
    kind = "general_nurbs"

    def __post_init__(self):
        P = np.array(self.control_points, dtype=float)
        if P.shape != (self.space.dim, 2):
            raise ValueError(f"expected {self.space.dim} control points, got {P.shape}")
        object.__setattr__(self, "control_points", P)

    def _jet(self, xi, eta):
        idx, R = tensor_basis_ders(self.space, xi, eta, 2)
        P = self.control_points[idx]  # (N, nloc, 2)
        D = np.einsum("ndl,nlk->ndk", R, P)
        J = np.stack([D[:, 1], D[:, 2]], axis=2)
        return MapJet(D[:, 0], J, D[:, 3:6])


def map_jet(g: GeometryMap, xi, eta, check: bool = True) -> MapJet:
    """Jet of ``g`` at parametric points (arrays broadcast to 1D).

    With ``check`` a :class:`SingularJacobianError` names the first point
    where the Jacobian determinant (relative to the Jacobian scale) vanishes.
    """
    xi, eta = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(eta, dtype=float))
    xi = xi.ravel()
    eta = eta.ravel()
    tol = 1e-12
    if np.any((xi < -tol) | (xi > 1 + tol) | (eta < -tol) | (eta > 1 + tol)):
        raise ValueError("parametric points must lie in [0, 1]^2")
    jet = g._jet(np.clip(xi, 0, 1), np.clip(eta, 0, 1))
    if check:
        _check_det(jet, xi, eta)
    return jet


def _check_det(jet: MapJet, xi, eta):
    det = jet.det
    scale = np.max(np.abs(jet.jacobian), axis=(1, 2)) ** 2
    bad = np.abs(det) <= _SINGULAR_TOL * scale
    if np.any(bad):
        k = int(np.argmax(bad))
        raise SingularJacobianError((xi[k], eta[k]), float(det[k]))


def physical_second_order_coeffs(jet: MapJet, param_ders: np.ndarray):
    """Push parametric derivatives of basis functions to physical space.

    ``param_ders`` has shape ``(N, 6, F)`` (rows ordered u, u_ξ, u_η, u_ξξ,
    u_ξη, u_ηη) for ``N`` jet points and ``F`` functions; a single point with
    shape ``(6,)`` or ``(6, F)`` is accepted too. Returns ``(value, grad,
    hess)`` where ``grad[..., k]`` holds u_x, u_y and ``hess[..., d]`` holds
    u_xx, u_xy, u_yy.
    """
    d = np.asarray(param_ders, dtype=float)
    squeeze_pt = d.ndim < 3
    squeeze_fn = d.ndim == 1
    if d.ndim == 1:
        d = d[None, :, None]
    elif d.ndim == 2:
        d = d[None]
    J = jet.jacobian
    N = J.shape[0]
    if d.shape[0] != N:
        raise ValueError(f"{d.shape[0]} derivative sets for {N} jet points")
    det = jet.det
    bad = np.abs(det) <= _SINGULAR_TOL * np.max(np.abs(J), axis=(1, 2)) ** 2
    if np.any(bad):
        k = int(np.argmax(bad))
        raise SingularJacobianError(jet.position[k], float(det[k]), frame="physical")
    # grad_param = Jᵀ grad_phys
    grad = np.linalg.solve(np.transpose(J, (0, 2, 1)), d[:, 1:3, :])  # (N, 2, F)
    a, b = J[:, 0, 0], J[:, 1, 0]  # x_ξ, y_ξ
    c, e = J[:, 0, 1], J[:, 1, 1]  # x_η, y_η
    M = np.empty((N, 3, 3))
    M[:, 0] = np.column_stack([a * a, 2 * a * b, b * b])
    M[:, 1] = np.column_stack([a * c, a * e + b * c, b * e])
    M[:, 2] = np.column_stack([c * c, 2 * c * e, e * e])
    # subtract the gradient term: Σ_k u_{x_k} ∂²F_k
    rhs = d[:, 3:6, :] - np.einsum("ndk,nkf->ndf", jet.second, grad)
    hess = np.linalg.solve(M, rhs)  # (N, 3, F)
    value = d[:, 0, :]
    grad = np.moveaxis(grad, 1, -1)
    hess = np.moveaxis(hess, 1, -1)
    if squeeze_pt:
        value, grad, hess = value[0], grad[0], hess[0]
    if squeeze_fn:
        value, grad, hess = value[0], grad[0], hess[0]
    return value, grad, hess


def invert_map(g: GeometryMap, x, y, start=(0.5, 0.5), tol=1e-14, maxiter=50):
    """Newton inversion of ``g`` at one physical point; returns ``(ξ, η)``.

    Iterates are clipped to the parameter square.
    """
    target = np.array([x, y], dtype=float)
    s = np.array(start, dtype=float)
    for _ in range(maxiter):
        jet = map_jet(g, s[0], s[1], check=False)
        r = jet.position[0] - target
        step = np.linalg.solve(jet.jacobian[0], r)
        s = np.clip(s - step, 0.0, 1.0)
        if np.max(np.abs(step)) < tol:
            break
    return s


def make_identity() -> IdentityMap:
    return IdentityMap()


def make_rhombus() -> BilinearMap:
    """Rhombus with vertices (0,0), (1,1/4), (1/4,1), (5/4,5/4)."""
    return BilinearMap(np.array([[0.0, 0.0], [1.0, 0.25], [0.25, 1.0], [1.25, 1.25]]))


def make_quarter_annulus(r_inner: float = 1.0, r_outer: float = 2.0) -> NurbsMap:
    """Exact quarter annulus in the first quadrant.

    ξ runs radially (degree 1) and η along the arc (rational quadratic), so
    F(0,0) = (r_inner, 0), F(1,0) = (r_outer, 0), F(0,1) = (0, r_inner),
    F(1,1) = (0, r_outer) and the Jacobian determinant is positive.
    """
    radial = SplineSpace1D.open(KnotVector([0.0, 0.0, 1.0, 1.0], 1))
    arc = SplineSpace1D.open(KnotVector([0.0, 0.0, 0.0, 1.0, 1.0, 1.0], 2))
    s = np.sqrt(0.5)
    weights = np.array([[1.0, s, 1.0], [1.0, s, 1.0]])
    unit_arc = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    points = [r * unit_arc[j] for j in range(3) for r in (r_inner, r_outer)]
    ts = TensorSpace(radial, arc, weights)
    return NurbsMap(ts, np.array(points))
