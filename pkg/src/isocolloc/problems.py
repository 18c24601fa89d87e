"""Manufactured benchmark problems with closed-form solutions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from .geometry import GeometryMap, make_quarter_annulus, make_rhombus
from .solver import Problem1D, Problem2D

__all__ = ["ManufacturedProblem", "REGISTRY", "get_problem", "check_manufactured"]

pi = np.pi


@dataclass(frozen=True)
class ManufacturedProblem:
    """Exact solution, data and boundary conditions of one benchmark.

    1D problems carry ``u``, ``du``, ``d2u`` and the coefficients ``a0``,
    ``a1``; 2D problems carry ``u`` and ``grad`` in physical coordinates and a
    geometry factory.
    """

    name: str
    dim: int
    u: Callable
    f: Callable
    bc: str = "dirichlet"
    du: Optional[Callable] = None
    d2u: Optional[Callable] = None
    a0: Optional[Callable] = None
    a1: Optional[Callable] = None
    grad: Optional[Callable] = None
    make_geometry: Optional[Callable[[], GeometryMap]] = None
    description: str = ""

    def problem(self):
        if self.dim == 1:
            return Problem1D(self.f, self.a0, self.a1, self.bc)
        return Problem2D(self.f, self.make_geometry())

    def exact(self, x, r: int = 0):
        """r-th derivative of the exact 1D solution."""
        return (self.u, self.du, self.d2u)[r](np.asarray(x, dtype=float))


def _const(c):
    return lambda x: np.full_like(np.asarray(x, dtype=float), c)


def _identity(x):
    return np.asarray(x, dtype=float)


_p1 = ManufacturedProblem(
    name="p1-dirichlet",
    dim=1,
    u=lambda x: np.sin(pi * x),
    du=lambda x: pi * np.cos(pi * x),
    d2u=lambda x: -(pi**2) * np.sin(pi * x),
    f=lambda x: pi**2 * np.sin(pi * x),
    a0=_const(0.0),
    a1=_const(0.0),
    description="-u'' = pi^2 sin(pi x), u(0) = u(1) = 0",
)

_p2 = ManufacturedProblem(
    name="p2-periodic",
    dim=1,
    bc="periodic",
    u=lambda x: np.sin(2 * pi * x),
    du=lambda x: 2 * pi * np.cos(2 * pi * x),
    d2u=lambda x: -4 * pi**2 * np.sin(2 * pi * x),
    f=lambda x: (1 + 4 * pi**2) * np.sin(2 * pi * x) + 2 * pi * np.cos(2 * pi * x),
    a0=_const(1.0),
    a1=_const(1.0),
    description="-u'' + u' + u = f, periodic, u = sin(2 pi x)",
)


def _p3_f(x):
    e = np.exp(x)
    s, c = np.sin(pi * x), np.cos(pi * x)
    return x * (e * s + pi * e * c) - 2 * pi * e * c + pi**2 * e * s


_p3 = ManufacturedProblem(
    name="p3-advection-reaction",
    dim=1,
    u=lambda x: np.sin(pi * x) * np.exp(x),
    du=lambda x: np.exp(x) * (np.sin(pi * x) + pi * np.cos(pi * x)),
    d2u=lambda x: np.exp(x) * ((1 - pi**2) * np.sin(pi * x) + 2 * pi * np.cos(pi * x)),
    f=_p3_f,
    a0=_const(1.0),
    a1=_identity,
    description="-u'' + x u' + u = f, u = sin(pi x) e^x",
)


def _p4_u(x, y):
    r2 = x * x + y * y
    return -(r2 - 1) * (r2 - 4) * x * y * y


def _p4_grad(x, y):
    x2, y2 = x * x, y * y
    ux = -y2 * (5 * x2 * x2 + 6 * x2 * y2 - 15 * x2 + y2 * y2 - 5 * y2 + 4)
    uy = -2 * x * y * (x2 * x2 + 4 * x2 * y2 - 5 * x2 + 3 * y2 * y2 - 10 * y2 + 4)
    return np.stack([ux, uy], axis=-1)


def _p4_f(x, y):
    x2, y2 = x * x, y * y
    return 2 * x * (x2 * x2 + 22 * x2 * y2 - 5 * x2 + 21 * y2 * y2 - 45 * y2 + 4)


_p4 = ManufacturedProblem(
    name="p4-annulus",
    dim=2,
    u=_p4_u,
    grad=_p4_grad,
    f=_p4_f,
    make_geometry=make_quarter_annulus,
    description="-Δu = f on the quarter annulus 1 <= r <= 2",
)

# P5: u = sin(a) sin(b) g with a = α (y - 4x), b = β (x/4 - y), g = x^3 + y^3
_ALPHA = 4 * pi / 15
_BETA = 16 * pi / 15
_GA = np.array([-4 * _ALPHA, _ALPHA])
_GB = np.array([_BETA / 4, -_BETA])


def _p5_parts(x, y):
    a = _ALPHA * (y - 4 * x)
    b = _BETA * (x / 4 - y)
    return np.sin(a), np.cos(a), np.sin(b), np.cos(b), x**3 + y**3


def _p5_u(x, y):
    sa, _, sb, _, g = _p5_parts(x, y)
    return sa * sb * g


def _p5_grad(x, y):
    sa, ca, sb, cb, g = _p5_parts(x, y)
    gx, gy = 3 * x * x, 3 * y * y
    ux = (ca * _GA[0] * sb + sa * cb * _GB[0]) * g + sa * sb * gx
    uy = (ca * _GA[1] * sb + sa * cb * _GB[1]) * g + sa * sb * gy
    return np.stack([ux, uy], axis=-1)


def _p5_f(x, y):
    sa, ca, sb, cb, g = _p5_parts(x, y)
    gx, gy = 3 * x * x, 3 * y * y
    lap_g = 6 * x + 6 * y
    lap_sa = -sa * (_GA @ _GA)
    lap_sb = -sb * (_GB @ _GB)
    grad_sa_sb = ca * cb * (_GA @ _GB)
    grad_sa_g = ca * (_GA[0] * gx + _GA[1] * gy)
    grad_sb_g = cb * (_GB[0] * gx + _GB[1] * gy)
    lap = (
        lap_sa * sb * g
        + sa * lap_sb * g
        + sa * sb * lap_g
        + 2 * grad_sa_sb * g
        + 2 * sb * grad_sa_g
        + 2 * sa * grad_sb_g
    )
    return -lap


_p5 = ManufacturedProblem(
    name="p5-rhombus",
    dim=2,
    u=_p5_u,
    grad=_p5_grad,
    f=_p5_f,
    make_geometry=make_rhombus,
    description="-Δu = f on the rhombus (0,0), (1,1/4), (1/4,1), (5/4,5/4)",
)

REGISTRY: Dict[str, ManufacturedProblem] = {mp.name: mp for mp in (_p1, _p2, _p3, _p4, _p5)}


def get_problem(name: str) -> ManufacturedProblem:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(REGISTRY)}") from None


def check_manufactured(mp: ManufacturedProblem, npts: int = 100, seed: int = 0) -> float:
    """Max relative mismatch between ``L u`` by finite differences and ``f``.

    Derivatives of ``u`` are taken by central differences only, so closed-form
    ``du``/``d2u``/``grad`` are checked separately by the test suite.
    """
    rng = np.random.default_rng(seed)
    if mp.dim == 1:
        h = 1e-4
        x = rng.uniform(0.05, 0.95, npts)
        u0, up, um = mp.u(x), mp.u(x + h), mp.u(x - h)
        d1 = (up - um) / (2 * h)
        d2 = (up - 2 * u0 + um) / h**2
        Lu = -d2 + mp.a1(x) * d1 + mp.a0(x) * u0
        fx = mp.f(x)
    else:
        h = 1e-3
        g = mp.make_geometry()
        pos = g(rng.uniform(0.05, 0.95, npts), rng.uniform(0.05, 0.95, npts))
        x, y = pos[:, 0], pos[:, 1]
        u = mp.u
        lap = (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4 * u(x, y)) / h**2
        Lu = -lap
        fx = mp.f(x, y)
    scale = np.max(np.abs(fx))
    return float(np.max(np.abs(Lu - fx)) / scale)
