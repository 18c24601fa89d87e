"""Acceptance gate: every criterion at its stated tolerance, one verdict line each.

Orders are least-squares slopes of log(error) against log(h) over the three
finest levels. Meshes: 8..128 elements in 1D, 4..32 per direction in 2D.
"""

import time
from functools import lru_cache

import numpy as np
import pytest

from isocolloc.analysis import ROUNDOFF_FLOOR, PerturbationSpec, interior_sp, residual_superconvergence, tail_order
from isocolloc.point_selection import select_asp, select_csp, select_gp, select_lssp
from isocolloc.problems import REGISTRY, check_manufactured, get_problem
from isocolloc.spline_core import (
    SplineSpace1D,
    basis_ders,
    make_open_uniform,
    make_periodic_uniform,
)
from isocolloc.study import StudyConfig, run_convergence, solve_problem

MESH_1D = (8, 16, 32, 64, 128)
MESH_2D = (4, 8, 16, 32)
TOL = 0.25
FLOOR = ROUNDOFF_FLOOR
BUDGET_1D = 5.0
BUDGET_2D = 60.0
PERTURB_SEED = 0

_timings = {}


@lru_cache(maxsize=None)
def study(problem, scheme, p, meshes=MESH_1D, perturb=False):
    cfg = StudyConfig(problem=problem, scheme=scheme, degree=p, meshes=list(meshes), perturb=perturb, seed=PERTURB_SEED)
    t0 = time.perf_counter()
    st = run_convergence(cfg)
    _timings[(problem, scheme, p, meshes, perturb)] = time.perf_counter() - t0
    return st


def order(st, norm, floor=0.0):
    return st.tail_order(norm, floor=floor)


def near(value, target, tol=TOL):
    return abs(value - target) <= tol


def describe(**orders):
    return ", ".join(f"{k} {v:.3f}" for k, v in orders.items())


@pytest.mark.parametrize("p", [3, 5, 7])
def test_c1_csp_dirichlet(verdict, p):
    st = study("p1-dirichlet", "csp", p)
    o = {n: order(st, n, FLOOR) for n in ("L2", "H1", "H2")}
    ok = near(o["L2"], p + 1) and near(o["H1"], p) and near(o["H2"], p - 1)
    verdict(f"1 [P1 C-CSP p={p}]", ok, describe(**o) + f" (targets {p + 1}/{p}/{p - 1} ± {TOL})")


@pytest.mark.parametrize("scheme,p,target", [("csp", 3, 4), ("csp", 5, 6), ("gp", 4, 4), ("gp", 6, 6)])
def test_c2_periodic(verdict, scheme, p, target):
    st = study("p2-periodic", scheme, p)
    o = order(st, "L2", FLOOR)
    verdict(f"2 [P2 {scheme} p={p}]", near(o, target), f"L2 {o:.3f} (target {target} ± {TOL})")


def test_c3_greville(verdict):
    st3 = study("p1-dirichlet", "gp", 3)
    st4 = study("p1-dirichlet", "gp", 4)
    o = {n: order(st3, n) for n in ("L2", "H1", "H2")}
    o4 = order(st4, "L2")
    ok = all(near(v, 2) for v in o.values()) and near(o4, 4)
    verdict("3 [P1 C-GP]", ok, f"p=3 {describe(**o)} (target 2); p=4 L2 {o4:.3f} (target 4)")


@pytest.mark.parametrize("p", [3, 4])
def test_c4_asp(verdict, p):
    st = study("p1-dirichlet", "asp", p)
    o = {n: order(st, n) for n in ("L2", "H1", "H2")}
    ok = near(o["L2"], p) and near(o["H1"], p) and near(o["H2"], p - 1)
    verdict(f"4 [P1 C-ASP p={p}]", ok, describe(**o) + f" (targets {p}/{p}/{p - 1})")


def test_c5_lssp(verdict):
    o3 = order(study("p1-dirichlet", "lssp", 3), "L2")
    o4 = order(study("p1-dirichlet", "lssp", 4), "L2")
    verdict("5 [P1 LS-SP]", near(o3, 4) and near(o4, 4), f"p=3 L2 {o3:.3f}, p=4 L2 {o4:.3f} (target 4)")


def test_c6_galerkin(verdict):
    o3 = order(study("p1-dirichlet", "galerkin", 3), "L2")
    o4 = order(study("p1-dirichlet", "galerkin", 4), "L2")
    verdict("6 [P1 Galerkin]", near(o3, 4) and near(o4, 5), f"p=3 L2 {o3:.3f} (4), p=4 L2 {o4:.3f} (5)")


@pytest.mark.parametrize("p", [3, 5])
def test_c7_perturbed_knots(verdict, p):
    st = study("p1-dirichlet", "csp", p, perturb=True)
    l2, h1 = order(st, "L2", FLOOR), order(st, "H1", FLOOR)
    ok = near(l2, p, 0.35) and near(h1, p)
    verdict(
        f"7 [P1 perturbed C-CSP p={p}, seed {PERTURB_SEED}]",
        ok,
        f"L2 {l2:.3f} (target {p} ± 0.35), H1 {h1:.3f} (target {p} ± {TOL})",
    )


@pytest.mark.parametrize("p", [3, 5])
def test_c8_advection_reaction(verdict, p):
    st = study("p3-advection-reaction", "csp", p)
    l2, h1 = order(st, "L2", FLOOR), order(st, "H1", FLOOR)
    verdict(f"8 [P3 C-CSP p={p}]", near(l2, p + 1) and near(h1, p), f"L2 {l2:.3f} ({p + 1}), H1 {h1:.3f} ({p})")


def test_c9_annulus(verdict):
    csp = study("p4-annulus", "csp", 3, MESH_2D)
    gal = study("p4-annulus", "galerkin", 3, MESH_2D)
    l2, h1, g2 = order(csp, "L2"), order(csp, "H1"), order(gal, "L2")
    ok = near(l2, 4) and near(h1, 3) and near(g2, 4)
    msg = f"C-CSP p=3 L2 {l2:.3f} (4), H1 {h1:.3f} (3); Galerkin p=3 L2 {g2:.3f} (4)"
    for p, meshes in ((5, MESH_2D), (7, MESH_2D[1:])):
        st = study("p4-annulus", "csp", p, meshes)
        e = st.errors("L2")
        o = order(st, "L2")
        ok = ok and bool(np.all(np.diff(e) < 0)) and o >= p - 1
        msg += f"; p={p} L2 {o:.3f} (>= {p - 1}, monotone {bool(np.all(np.diff(e) < 0))})"
    verdict("9 [P4 annulus]", ok, msg)


def test_c10_rhombus(verdict):
    o = order(study("p5-rhombus", "csp", 3, MESH_2D), "L2")
    verdict("10 [P5 rhombus C-CSP p=3]", near(o, 4, 0.35), f"L2 {o:.3f} (target 4 ± 0.35)")


@pytest.mark.parametrize(
    "problem,p", [("p1-dirichlet", 3), ("p1-dirichlet", 5), ("p1-dirichlet", 7), ("p3-advection-reaction", 3), ("p3-advection-reaction", 5)]
)
def test_c11_linf_matches_l2(verdict, problem, p):
    st = study(problem, "csp", p)
    l2, linf = order(st, "L2", FLOOR), order(st, "Linf", FLOOR)
    verdict(f"11 [{problem} C-CSP p={p}]", abs(l2 - linf) <= 0.3, f"Linf {linf:.3f} vs L2 {l2:.3f} (within 0.3)")


def test_c12_residual_superconvergence(verdict):
    mp = get_problem("p1-dirichlet")
    h, rms, glob = [], [], []
    for n in MESH_1D:
        sol = solve_problem(mp, "galerkin", 3, n)
        _, r, _ = residual_superconvergence(sol, mp, interior_sp(sol.space.kv))
        xs = np.linspace(0, 1, 200 * n + 1)
        h.append(1.0 / n)
        rms.append(r)
        glob.append(np.max(np.abs(mp.exact(xs, 2) - sol(xs, 2))))
    o_sp, o_glob = tail_order(h, rms), tail_order(h, glob)
    ok = o_sp >= 2.7 and near(o_glob, 2)
    verdict("12 [Galerkin residual at surrogate points]", ok, f"interior SP RMS order {o_sp:.3f} (>= 2.7), global {o_glob:.3f} (~2)")


def _in_space_exact(scheme, p, n_el, periodic):
    """Solve -u'' + u = f for u in the discrete space and return the max coefficient error."""
    from isocolloc.solver import Problem1D, assemble_collocation_1d, assemble_galerkin, solve_system

    rng = np.random.default_rng(n_el * 10 + p)
    space = make_periodic_uniform(n_el, p) if periodic else SplineSpace1D.open(make_open_uniform(n_el, p))
    c = rng.standard_normal(space.dim)
    if not periodic:
        c[0] = c[-1] = 0.0

    def f(x):
        B0 = space.basis_matrix(x, 0)
        B2 = space.basis_matrix(x, 2)
        return -(B2 @ c) + B0 @ c

    prob = Problem1D(f, a0=lambda x: np.ones_like(x), bc="periodic" if periodic else "dirichlet")
    if scheme == "galerkin":
        sys_ = assemble_galerkin(prob, space)
    else:
        sel = {"gp": select_gp, "asp": select_asp, "csp": select_csp, "lssp": select_lssp}[scheme]
        sys_ = assemble_collocation_1d(prob, space, sel(space))
    return np.max(np.abs(solve_system(sys_, space).coeffs - c))


def test_c13_property_suites(verdict):
    failures = []
    # partition of unity and derivative consistency
    for p in (1, 2, 3, 5, 7):
        kv = make_open_uniform(9, p)
        x = np.linspace(0, 1, 301)
        _, d = basis_ders(kv, x, 1)
        if np.max(np.abs(d[:, 0, :].sum(axis=1) - 1)) > 1e-13:
            failures.append(f"partition of unity p={p}")
        space = SplineSpace1D.open(kv)
        xs = np.linspace(0.01, 0.99, 50)
        fd = (space.basis_matrix(xs + 1e-6) - space.basis_matrix(xs - 1e-6)) / 2e-6
        if np.max(np.abs(fd - space.basis_matrix(xs, 1))) > 1e-5 * max(1, np.max(np.abs(fd))):
            failures.append(f"basis derivative p={p}")
    # in-space exactness for every scheme
    for scheme in ("galerkin", "gp", "asp", "csp", "lssp"):
        for p in (3, 5):
            for periodic in (False, True):
                n = 12
                err = _in_space_exact(scheme, p, n, periodic)
                if err > 1e-8:
                    failures.append(f"in-space {scheme} p={p} periodic={periodic}: {err:.2e}")
    # point-set invariants
    for p in (3, 5, 7):
        for n in range(4, 65):
            space = SplineSpace1D.open(make_open_uniform(n, p))
            unknowns = space.dim - 2
            for name, sel, square in (
                ("gp", select_gp, True),
                ("asp", select_asp, True),
                ("csp", select_csp, True),
                ("lssp", select_lssp, False),
            ):
                try:
                    pts = sel(space).points
                except ValueError:
                    if n < p - 2:  # fewer superconvergent points than unknowns
                        continue
                    failures.append(f"{name} p={p} n={n} raised")
                    continue
                if (square and pts.size != unknowns) or pts.size < unknowns:
                    failures.append(f"{name} p={p} n={n}: {pts.size} points for {unknowns} unknowns")
                if np.any(np.diff(pts) <= 1e-12) or pts.min() <= 0 or pts.max() >= 1:
                    failures.append(f"{name} p={p} n={n}: points not distinct and interior")
                symmetric = name != "csp" or n % 2 == 1
                if symmetric and not np.allclose(np.sort(1 - pts), pts, atol=1e-12):
                    failures.append(f"{name} p={p} n={n}: not symmetric")
            if n % 2 == 0 and 2 * ((p - 3) // 2) <= n // 2:
                cs = select_csp(space, symmetric_variant=True)
                if cs.n_equations != unknowns or not np.allclose(np.sort(1 - cs.points), cs.points, atol=1e-12):
                    failures.append(f"csp-sym p={p} n={n}")
    # manufactured problems
    for name, mp in REGISTRY.items():
        if check_manufactured(mp) >= 1e-5:
            failures.append(f"manufactured {name}")
    # determinism under a fixed seed
    from isocolloc.analysis import perturb_knots

    kv = make_open_uniform(32, 3)
    a = perturb_knots(kv, PerturbationSpec(7)).knots
    b = perturb_knots(kv, PerturbationSpec(7)).knots
    if not np.array_equal(a, b):
        failures.append("perturbation determinism")
    s1 = study("p1-dirichlet", "csp", 3, (8, 16), True).errors("L2")
    s2 = run_convergence(StudyConfig("p1-dirichlet", "csp", 3, [8, 16], seed=PERTURB_SEED, perturb=True)).errors("L2")
    if not np.array_equal(s1, s2):
        failures.append("study determinism")
    verdict("13 [property suites]", not failures, "; ".join(failures) or "all invariants hold")


def test_c14_comparison(verdict):
    gal = study("p1-dirichlet", "galerkin", 3).errors("L2")
    csp = study("p1-dirichlet", "csp", 3).errors("L2")
    ls = study("p1-dirichlet", "lssp", 3).errors("L2")
    r_csp, r_ls = csp / gal, ls / gal
    ok = bool(np.all(r_csp <= 20) and np.all(r_ls <= 1.2))
    verdict(
        "14 [comparison p=3]",
        ok,
        f"C-CSP/Galerkin max {r_csp.max():.2f} (<= 20); LS-SP/Galerkin max {r_ls.max():.3f} (<= 1.2)",
    )


def test_study_time_budget(verdict):
    for p in (3, 5, 7):
        study("p1-dirichlet", "csp", p)
    study("p4-annulus", "csp", 3, MESH_2D)
    slow = [
        f"{k[0]} {k[1]} p={k[2]}: {t:.1f}s"
        for k, t in _timings.items()
        if t > (BUDGET_2D if REGISTRY[k[0]].dim == 2 else BUDGET_1D)
    ]
    worst1 = max(t for k, t in _timings.items() if REGISTRY[k[0]].dim == 1)
    worst2 = max(t for k, t in _timings.items() if REGISTRY[k[0]].dim == 2)
    verdict("budget [study run time]", not slow, f"slowest 1D {worst1:.2f}s, slowest 2D {worst2:.2f}s; {slow or 'all within budget'}")
