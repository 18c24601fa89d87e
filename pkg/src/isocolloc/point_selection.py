"""Collocation point sets built from Greville and superconvergent points.

Schemes
-------
``GP``      interior Greville points.
``LSSP``    every superconvergent point (least-squares system).
``ASP``     one superconvergent point per element, Greville near the boundary.
``CSP``     both superconvergent points of every other element, plus boundary
            extras so that the system is square (odd degree only).
``CSP_SYM`` symmetric CSP for an even number of elements; the two points
            nearest the domain center form one averaged equation.

The superconvergent points used here are the reference-element locations of
``SP_TABLE`` mapped affinely to each element.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

from .spline_core import KnotVector, SplineSpace1D

__all__ = [
    "SP_TABLE",
    "CollocationSet",
    "reference_sp",
    "element_sp",
    "surrogate_sp_all",
    "select_gp",
    "select_lssp",
    "select_asp",
    "select_csp",
    "tensorize",
    "SCHEMES",
]

_R5 = np.sqrt(225.0 - 30.0 * np.sqrt(30.0)) / 15.0
SP_TABLE = {
    3: (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0)),
    4: (-1.0, 0.0, 1.0),
    5: (-_R5, _R5),
    6: (-1.0, 0.0, 1.0),
    7: (-0.504918567512, 0.504918567512),
}

SCHEMES = ("GP", "LSSP", "ASP", "CSP", "CSP_SYM")

_DEDUP_TOL = 1e-12
# outermost elements at each end where C-ASP keeps Greville points
_ASP_BOUNDARY_ELEMENTS = 2


@dataclass(frozen=True, eq=False)
class CollocationSet:
    """Ordered collocation points with optional equation-averaging groups.

    ``points`` has shape ``(N,)`` in 1D and ``(N, 2)`` in 2D. Each entry of
    ``groups`` is a tuple of point indices whose equations are replaced by
    their mean.
    """

    points: np.ndarray
    scheme: str
    groups: Tuple[Tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        seen = [i for g in groups for i in g]
        if len(seen) != len(set(seen)):
            raise ValueError("averaging groups must be disjoint")
        if seen and (min(seen) < 0 or max(seen) >= len(pts)):
            raise ValueError("averaging group index out of range")
        object.__setattr__(self, "groups", groups)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self) -> int:
        return 1 if self.points.ndim == 1 else self.points.shape[1]

    @property
    def n_equations(self) -> int:
        return len(self.points) - sum(len(g) - 1 for g in self.groups)


def reference_sp(p: int) -> np.ndarray:
    """Superconvergent points of degree ``p`` on the reference element [-1, 1]."""
    try:
        return np.array(SP_TABLE[p])
    except KeyError:
        raise ValueError(f"superconvergent points are tabulated for degrees 3..7, got {p}") from None


def _as_space(obj: Union[KnotVector, SplineSpace1D]) -> SplineSpace1D:
    if isinstance(obj, SplineSpace1D):
        return obj
    return SplineSpace1D.open(obj)


def element_sp(space, e: int) -> np.ndarray:
    """Superconvergent points of element ``e`` (zero-based), ascending."""
    space = _as_space(space)
    a, b = space.elements[e]
    return 0.5 * (a + b) + reference_sp(space.degree) * 0.5 * (b - a)


def _dedup(x: np.ndarray) -> np.ndarray:
    x = np.sort(x)
    keep = np.concatenate([[True], np.diff(x) > _DEDUP_TOL])
    return x[keep]


def surrogate_sp_all(space) -> np.ndarray:
    """All superconvergent points of the mesh, sorted, shared knots counted once.

    For periodic spaces the point at 1 is identified with the point at 0.
    """
    space = _as_space(space)
    t = reference_sp(space.degree)
    el = space.elements
    pts = (0.5 * (el[:, 0] + el[:, 1]))[:, None] + t[None, :] * (0.5 * (el[:, 1] - el[:, 0]))[:, None]
    pts = _dedup(pts.ravel())
    if space.periodic:
        lo, hi = space.kv.domain
        pts = pts[np.abs(pts - hi) > _DEDUP_TOL]
    return pts


def _interior(space: SplineSpace1D, pts: np.ndarray) -> np.ndarray:
    lo, hi = space.kv.domain
    return pts[(pts > lo + _DEDUP_TOL) & (pts < hi - _DEDUP_TOL)]


def select_gp(space) -> CollocationSet:
    """Interior Greville points (open) or all Greville points (periodic)."""
    space = _as_space(space)
    g = space.greville()
    if not space.periodic:
        g = g[1:-1]
    return CollocationSet(g, "GP")


def select_lssp(space) -> CollocationSet:
    """Every superconvergent point; the open case drops the domain endpoints.

    Raises ``ValueError`` when there are fewer points than unknowns.
    """
    space = _as_space(space)
    pts = surrogate_sp_all(space)
    if not space.periodic:
        pts = _interior(space, pts)
    unknowns = _unknowns(space)
    if pts.size < unknowns:
        raise ValueError(
            f"{pts.size} superconvergent points for {unknowns} unknowns; refine the mesh for LS-SP"
        )
    return CollocationSet(pts, "LSSP")


def _unknowns(space: SplineSpace1D) -> int:
    return space.dim if space.periodic else space.dim - 2


def select_asp(space) -> CollocationSet:
    """One superconvergent point per element.

    Periodic: the left point of each element for odd degree, the midpoint for
    even degree. Open: start from the interior Greville points. Those lying
    in the two outermost elements at either end stay; every other one moves
    to the nearest superconvergent point of its element, where a Greville
    point sitting on a knot belongs to the element on the side of the domain
    center. A Greville point at the center itself stays, which keeps the
    set mirror symmetric. If the nearest point is already taken the next
    nearest free one is used, else the Greville point stays.
    """
    space = _as_space(space)
    p = space.degree
    t = reference_sp(p)
    if space.periodic:
        el = space.elements
        local = t[0] if p % 2 else 0.0
        pts = 0.5 * (el[:, 0] + el[:, 1]) + local * 0.5 * (el[:, 1] - el[:, 0])
        return CollocationSet(np.sort(pts), "ASP")

    g = space.greville()[1:-1]
    br = space.breakpoints
    n_el = space.n_el
    lo, hi = space.kv.domain
    # knot test with a tolerance so mirrored points get mirrored elements
    right_of = np.searchsorted(br, g + _DEDUP_TOL, side="right") - 1
    left_of = np.searchsorted(br, g - _DEDUP_TOL, side="left") - 1
    elem = np.clip(np.where(g <= 0.5 * (lo + hi), right_of, left_of), 0, n_el - 1)
    chosen = []
    for x, e in zip(g, elem):
        new = x
        center = abs(x - 0.5 * (lo + hi)) <= _DEDUP_TOL
        if not center and _ASP_BOUNDARY_ELEMENTS <= e <= n_el - 1 - _ASP_BOUNDARY_ELEMENTS:
            cands = element_sp(space, e)
            for c in cands[np.argsort(np.abs(cands - x), kind="stable")]:
                if not any(abs(c - y) <= _DEDUP_TOL for y in chosen):
                    new = c
                    break
        chosen.append(new)
    pts = np.sort(np.array(chosen))
    _check_distinct(pts)
    return CollocationSet(pts, "ASP")


def select_csp(space, symmetric_variant: bool = False) -> CollocationSet:
    """Clustered superconvergent points (odd degree).

    Clusters are both superconvergent points of elements 1, 3, 5, ...
    (one-based). The open case adds, for ``j = 1 .. (p-3)/2``, the point
    nearer the boundary in the skipped elements ``2j`` (left side) and in the
    mirrored skipped elements on the right side. With an even number of
    elements the right side lacks one point, which is taken as the rightmost
    point of the last element.

    ``symmetric_variant`` (open, even number of elements): mirror the left
    half of the construction onto the right half; the two points nearest the
    center then form one averaged equation.
    """
    space = _as_space(space)
    p = space.degree
    n_el = space.n_el
    if p % 2 == 0 or p not in SP_TABLE:
        raise ValueError(f"CSP is defined for odd degrees 3, 5, 7; got {p}")
    if space.periodic:
        if n_el % 2:
            raise ValueError(f"periodic CSP needs an even number of elements, got {n_el}")
        pts = np.concatenate([element_sp(space, e) for e in range(0, n_el, 2)])
        return CollocationSet(np.sort(pts), "CSP")

    if n_el < p - 2:
        raise ValueError(
            f"CSP with degree {p} needs at least {p - 2} elements "
            f"({n_el + p - 2} unknowns, {2 * n_el} superconvergent points)"
        )
    n_extra = (p - 3) // 2
    if symmetric_variant and n_el % 2 == 0:
        return _csp_symmetric(space, n_extra)

    # zero-based element e; one-based index e+1
    pts = [element_sp(space, e) for e in range(0, n_el, 2)]
    for j in range(1, n_extra + 1):
        pts.append(element_sp(space, 2 * j - 1)[:1])
        right = n_el - 2 * j if n_el % 2 else n_el - 1 - 2 * j
        pts.append(element_sp(space, right)[-1:])
    if n_el % 2 == 0:
        pts.append(element_sp(space, n_el - 1)[-1:])
    pts = np.concatenate(pts)
    _check_distinct(pts)
    return CollocationSet(np.sort(pts), "CSP")


def _csp_symmetric(space: SplineSpace1D, n_extra: int) -> CollocationSet:
    n_el = space.n_el
    half = n_el // 2
    if 2 * n_extra > half:
        raise ValueError(
            f"symmetric CSP with degree {space.degree} needs at least {4 * n_extra} elements, got {n_el}"
        )
    lo, hi = space.kv.domain
    left = [element_sp(space, e) for e in range(0, half, 2)]
    left += [element_sp(space, 2 * j - 1)[:1] for j in range(1, n_extra + 1)]
    left = np.concatenate(left)
    if half % 2 == 0:
        # central elements are both skipped: add the two inner points
        left = np.append(left, element_sp(space, half - 1)[-1])
    pts = np.sort(np.concatenate([left, lo + hi - left]))
    _check_distinct(pts)
    mid = int(np.searchsorted(pts, 0.5 * (lo + hi)))
    return CollocationSet(pts, "CSP_SYM", groups=((mid - 1, mid),))


def _check_distinct(pts: np.ndarray):
    if np.any(np.diff(np.sort(pts)) <= _DEDUP_TOL):
        raise RuntimeError("collocation construction produced coincident points")


def tensorize(cs_x: CollocationSet, cs_y: CollocationSet) -> CollocationSet:
    """Cartesian product of two 1D sets, x-fastest ordering."""
    if cs_x.groups or cs_y.groups:
        raise ValueError("sets with averaging groups cannot be tensorized")
    if cs_x.dim != 1 or cs_y.dim != 1:
        raise ValueError("tensorize expects two univariate sets")
    X, Y = np.meshgrid(cs_x.points, cs_y.points, indexing="xy")
    scheme = cs_x.scheme if cs_x.scheme == cs_y.scheme else f"{cs_x.scheme}x{cs_y.scheme}"
    return CollocationSet(np.column_stack([X.ravel(), Y.ravel()]), scheme)
