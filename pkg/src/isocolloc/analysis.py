"""Error norms, convergence orders, residual diagnostics and knot perturbation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .geometry import map_jet
from .point_selection import surrogate_sp_all
from .problems import ManufacturedProblem
from .quadrature import element_rule, element_samples
from .solver import DiscreteSolution
from .spline_core import KnotVector

__all__ = [
    "ErrorReport",
    "ConvergenceStudy",
    "PerturbationSpec",
    "error_norms",
    "convergence_rates",
    "tail_order",
    "ROUNDOFF_FLOOR",
    "residual_superconvergence",
    "interior_sp",
    "perturb_knots",
    "shift_interior_knots",
    "NORMS",
]

NORMS = ("L2", "H1", "H2", "Linf")
LINF_SAMPLES = 10


@dataclass
class ErrorReport:
    """Errors of one refinement level.

    ``H1`` and ``H2`` are full Sobolev norms; the seminorms are kept alongside.
    ``H2`` is ``None`` for 2D solutions.
    """

    h: float
    dof: int
    L2: float
    H1: float
    Linf: float
    H1_semi: float
    H2: Optional[float] = None
    H2_semi: Optional[float] = None
    n_el: Optional[int] = None

    def get(self, norm: str) -> Optional[float]:
        return getattr(self, norm)


def error_norms(sol: DiscreteSolution, mp: ManufacturedProblem, quad_points: Optional[int] = None) -> ErrorReport:
    """Norms of ``u - u_h`` accumulated element by element in mesh order.

    Quadrature uses ``p + 2`` Gauss points per element and direction unless
    ``quad_points`` is given; the sup norm is sampled at 10 equispaced points
    per element and direction, endpoints included.
    """
    if sol.is_2d:
        return _error_norms_2d(sol, mp, quad_points)
    space = sol.space
    nq = quad_points or space.degree + 2
    x, w = element_rule(space.elements, nq)
    e = [mp.exact(x, r) - sol(x, r) for r in range(3)]
    # per-element sums first, then in mesh order
    sq = [np.sum(w * ei**2, axis=1).sum() for ei in e]
    xs = element_samples(space.elements, LINF_SAMPLES)
    linf = float(np.max(np.abs(mp.exact(xs) - sol(xs))))
    L2 = np.sqrt(sq[0])
    H1 = np.sqrt(sq[0] + sq[1])
    H2 = np.sqrt(sq[0] + sq[1] + sq[2])
    dof = space.dim if space.periodic else space.dim - 2
    return ErrorReport(
        h=space.meshsize,
        dof=dof,
        L2=float(L2),
        H1=float(H1),
        Linf=linf,
        H1_semi=float(np.sqrt(sq[1])),
        H2=float(H2),
        H2_semi=float(np.sqrt(sq[2])),
        n_el=space.n_el,
    )


def _error_norms_2d(sol, mp, quad_points):
    ts = sol.space
    p, q = ts.degrees
    ex, wx = element_rule(ts.space_x.elements, quad_points or p + 2)
    ey, wy = element_rule(ts.space_y.elements, quad_points or q + 2)
    l2 = semi = 0.0
    for j in range(ey.shape[0]):
        for i in range(ex.shape[0]):
            XI, ETA = np.meshgrid(ex[i], ey[j], indexing="xy")
            W = np.outer(wy[j], wx[i]).ravel()
            pos, val, grad = sol.evaluate_2d(XI.ravel(), ETA.ravel())
            det = np.abs(map_jet(sol.geometry, XI.ravel(), ETA.ravel()).det)
            x, y = pos[:, 0], pos[:, 1]
            e0 = mp.u(x, y) - val
            e1 = mp.grad(x, y) - grad
            l2 += np.sum(W * det * e0**2)
            semi += np.sum(W * det * np.sum(e1**2, axis=1))
    sx = element_samples(ts.space_x.elements, LINF_SAMPLES).ravel()
    sy = element_samples(ts.space_y.elements, LINF_SAMPLES).ravel()
    XI, ETA = np.meshgrid(sx, sy, indexing="xy")
    pos, val, _ = sol.evaluate_2d(XI.ravel(), ETA.ravel())
    linf = float(np.max(np.abs(mp.u(pos[:, 0], pos[:, 1]) - val)))
    h = max(ts.space_x.meshsize, ts.space_y.meshsize)
    dof = (ts.n - 2) * (ts.m - 2)
    return ErrorReport(
        h=h,
        dof=dof,
        L2=float(np.sqrt(l2)),
        H1=float(np.sqrt(l2 + semi)),
        Linf=linf,
        H1_semi=float(np.sqrt(semi)),
        n_el=ts.space_x.n_el,
    )


@dataclass
class ConvergenceStudy:
    """Errors over a refinement sequence with per-step and tail orders."""

    scheme: str
    degree: int
    problem: str
    reports: List[ErrorReport]
    orders: Dict[str, List[float]] = field(default_factory=dict)
    tail: Dict[str, float] = field(default_factory=dict)

    def errors(self, norm: str) -> np.ndarray:
        return np.array([r.get(norm) for r in self.reports], dtype=float)

    @property
    def h(self) -> np.ndarray:
        return np.array([r.h for r in self.reports])

    def tail_order(self, norm: str, levels: int = 3, floor: float = 0.0) -> float:
        return tail_order(self.h, self.errors(norm), levels, floor)


# errors at or below this level are dominated by roundoff in the dense solves
ROUNDOFF_FLOOR = 1e-12


def tail_order(h, errors, levels: int = 3, floor: float = 0.0) -> float:
    """Least-squares slope of log(error) against log(h) over the finest levels.

    Levels whose error is at or below ``floor`` are dropped first.
    """
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = e > floor
    h, e = h[keep], e[keep]
    if e.size < 2:
        raise ValueError("need at least two levels above the floor to estimate an order")
    h, e = h[-levels:], e[-levels:]
    if np.allclose(e, e[0], rtol=1e-12, atol=0):
        return 0.0
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def convergence_rates(
    reports: Sequence[ErrorReport], scheme: str = "", degree: int = 0, problem: str = ""
) -> ConvergenceStudy:
    """Per-step orders ``log(e_i/e_{i+1}) / log(h_i/h_{i+1})`` and tail slopes."""
    reports = list(reports)
    if len(reports) < 2:
        raise ValueError("need at least two refinement levels")
    dofs = [r.dof for r in reports]
    if any(b <= a for a, b in zip(dofs, dofs[1:])):
        raise ValueError("refinement levels must be strictly increasing in dof")
    study = ConvergenceStudy(scheme, degree, problem, reports)
    h = study.h
    for norm in NORMS:
        if any(r.get(norm) is None for r in reports):
            continue
        e = study.errors(norm)
        with np.errstate(divide="ignore", invalid="ignore"):
            steps = np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])
        steps = np.where(e[:-1] == e[1:], 0.0, steps)
        study.orders[norm] = [float(s) for s in steps]
        study.tail[norm] = tail_order(h, e) if np.all(e > 0) else float("nan")
    return study


def interior_sp(kv: KnotVector) -> np.ndarray:
    """Superconvergent points of elements with at least ``p`` elements to each boundary."""
    p = kv.degree
    pts = surrogate_sp_all(kv)
    br = kv.breakpoints
    n_el = kv.n_el
    if n_el <= 2 * p:
        return pts[:0]
    lo, hi = br[p], br[n_el - p]
    tol = 1e-12
    return pts[(pts > lo + tol) & (pts < hi - tol)]


def residual_superconvergence(sol: DiscreteSolution, mp: ManufacturedProblem, points=None):
    """Samples of ``D²(u - u_h)`` at ``points`` and their root mean square.

    Defaults to :func:`interior_sp` of the solution's knot vector. Returns
    ``(samples, rms, root_sum_squares)``.
    """
    if points is None:
        points = interior_sp(sol.space.kv)
    points = np.asarray(points, dtype=float)
    samples = mp.exact(points, 2) - sol(points, 2)
    if samples.size == 0:
        return samples, float("nan"), 0.0
    rss = float(np.sqrt(np.sum(samples**2)))
    return samples, float(np.sqrt(np.mean(samples**2))), rss


@dataclass(frozen=True)
class PerturbationSpec:
    """Random shifts ``ξ_i + X_i / (10 n_el)`` with ``X_i ~ U[-1, 1]``.

    Every mesh draws from its own stream, seeded by ``(seed, n_el)``, so each
    refinement level gets fresh values and the study is reproducible.
    """

    seed: int = 0
    scale: float = 0.1

    def rng(self, n_el: int) -> np.random.Generator:
        return np.random.default_rng([int(self.seed), int(n_el)])


def shift_interior_knots(kv: KnotVector, X) -> KnotVector:
    """Move each interior knot by ``X_i / (10 n_el)``."""
    p = kv.degree
    knots = kv.knots.copy()
    interior = knots[p + 1 : kv.n]
    X = np.broadcast_to(np.asarray(X, dtype=float), interior.shape)
    knots[p + 1 : kv.n] = interior + 0.1 / kv.n_el * X
    return KnotVector(knots, p)


def perturb_knots(kv: KnotVector, spec: PerturbationSpec) -> KnotVector:
    """Randomly perturbed copy of an open, uniform knot vector."""
    if not kv.is_open:
        raise ValueError("knot perturbation expects an open knot vector")
    n_interior = kv.n - kv.degree - 1
    X = spec.rng(kv.n_el).uniform(-1.0, 1.0, n_interior)
    p = kv.degree
    knots = kv.knots.copy()
    knots[p + 1 : kv.n] += spec.scale / kv.n_el * X
    return KnotVector(knots, p)
