"""Refinement studies: configuration, dispatch over schemes, CSV emission."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .analysis import (
    ConvergenceStudy,
    ErrorReport,
    PerturbationSpec,
    convergence_rates,
    error_norms,
    interior_sp,
    perturb_knots,
    residual_superconvergence,
)
from .point_selection import (
    SP_TABLE,
    select_asp,
    select_csp,
    select_gp,
    select_lssp,
    surrogate_sp_all,
    tensorize,
)
from .problems import REGISTRY, ManufacturedProblem, get_problem
from .quadrature import element_samples
from .solver import (
    DiscreteSolution,
    SingularSystemError,
    assemble_collocation_1d,
    assemble_collocation_2d,
    assemble_galerkin,
    solve_system,
)
from .spline_core import SplineSpace1D, TensorSpace, make_open_uniform, make_periodic_uniform

__all__ = [
    "STUDY_SCHEMES",
    "CSV_COLUMNS",
    "ConfigError",
    "LevelFailure",
    "StudyConfig",
    "load_config",
    "build_space",
    "solve_problem",
    "run_convergence",
    "run_compare",
    "run_residual",
    "write_convergence_csv",
    "write_compare_csv",
    "write_residual_csv",
]

log = logging.getLogger(__name__)

STUDY_SCHEMES = ("gp", "asp", "csp", "csp-sym", "lssp", "galerkin")
CSV_COLUMNS = ("n_el", "h", "dof", "L2", "H1", "H2", "Linf", "order_L2", "order_H1")
RESIDUAL_SAMPLES = 200
DEFAULT_MESHES = (8, 16, 32, 64, 128)


class ConfigError(ValueError):
    """Invalid or incompatible study parameters."""


class LevelFailure(RuntimeError):
    """A refinement level failed numerically; ``n_el`` names the level."""

    def __init__(self, n_el: int, cause: Exception):
        super().__init__(f"level n_el={n_el} failed: {cause}")
        self.n_el = n_el
        self.cause = cause


@dataclass
class StudyConfig:
    """Parameters of one study.

    ``schemes`` is used by comparison studies only; a convergence or residual
    study uses ``scheme``.
    """

    problem: str = "p1-dirichlet"
    scheme: str = "csp"
    degree: int = 3
    meshes: List[int] = field(default_factory=lambda: list(DEFAULT_MESHES))
    seed: int = 0
    perturb: bool = False
    out: Optional[str] = None
    schemes: List[str] = field(default_factory=list)

    def validate(self, command: str = "convergence") -> "StudyConfig":
        if self.problem not in REGISTRY:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(REGISTRY)}")
        mp = REGISTRY[self.problem]
        meshes = list(self.meshes)
        if not meshes or any(int(n) != n or n < 1 for n in meshes):
            raise ConfigError(f"meshes must be positive integers, got {self.meshes}")
        if any(b <= a for a, b in zip(meshes, meshes[1:])):
            raise ConfigError("meshes must be strictly increasing")
        if int(self.degree) != self.degree or self.degree < 1:
            raise ConfigError(f"degree must be a positive integer, got {self.degree}")
        if self.perturb and (mp.dim != 1 or mp.bc != "dirichlet"):
            raise ConfigError("knot perturbation applies to 1D Dirichlet problems only")
        if command == "residual":
            if mp.dim != 1:
                raise ConfigError("residual diagnostics are 1D only")
            if len(meshes) != 1:
                raise ConfigError("residual study takes exactly one mesh")
            return self
        schemes = self.compare_schemes() if command == "compare" else [self.scheme]
        for s in schemes:
            _check_scheme(s, self.degree, mp, meshes)
        return self

    def compare_schemes(self) -> List[str]:
        schemes = list(self.schemes) or [self.scheme]
        if "galerkin" not in schemes:
            schemes = ["galerkin"] + schemes
        return schemes


def _check_scheme(scheme: str, p: int, mp: ManufacturedProblem, meshes: Sequence[int]):
    if scheme not in STUDY_SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}; choose from {list(STUDY_SCHEMES)}")
    if scheme == "galerkin" or scheme == "gp":
        return
    if p not in SP_TABLE:
        raise ConfigError(f"scheme {scheme} needs a degree in 3..7, got {p}")
    if scheme in ("csp", "csp-sym") and p % 2 == 0:
        raise ConfigError(f"scheme {scheme} needs an odd degree, got {p}")
    if scheme == "csp" and mp.bc == "periodic" and any(n % 2 for n in meshes):
        raise ConfigError("periodic csp needs an even number of elements on every mesh")
    if scheme == "csp-sym":
        if mp.dim != 1 or mp.bc != "dirichlet":
            raise ConfigError("csp-sym is defined for 1D Dirichlet problems only")
        if any(n % 2 for n in meshes):
            raise ConfigError("csp-sym needs an even number of elements on every mesh")


def load_config(path, **overrides) -> StudyConfig:
    """Read a JSON config file; keyword arguments that are not ``None`` win."""
    data: Dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    data.pop("command", None)
    data.pop("description", None)
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = set(StudyConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return StudyConfig(**data)


def build_space(mp: ManufacturedProblem, p: int, n_el: int, perturb: Optional[PerturbationSpec] = None):
    """Discrete space of degree ``p`` on ``n_el`` elements (per direction in 2D)."""
    if mp.dim == 1 and mp.bc == "periodic":
        return make_periodic_uniform(n_el, p)
    kv = make_open_uniform(n_el, p)
    if perturb is not None:
        kv = perturb_knots(kv, perturb)
    space = SplineSpace1D.open(kv)
    if mp.dim == 2:
        return TensorSpace(space, space)
    return space


_SELECT = {
    "gp": select_gp,
    "asp": select_asp,
    "csp": select_csp,
    "csp-sym": lambda s: select_csp(s, symmetric_variant=True),
    "lssp": select_lssp,
}


def solve_problem(
    mp: ManufacturedProblem, scheme: str, p: int, n_el: int, perturb: Optional[PerturbationSpec] = None
) -> DiscreteSolution:
    """Discretize and solve one benchmark on one mesh."""
    space = build_space(mp, p, n_el, perturb)
    prob = mp.problem()
    if scheme == "galerkin":
        return solve_system(assemble_galerkin(prob, space), space, getattr(prob, "geometry", None))
    select = _SELECT[scheme]
    if mp.dim == 1:
        return solve_system(assemble_collocation_1d(prob, space, select(space)), space)
    if scheme == "csp-sym":
        raise ConfigError("csp-sym has no tensor-product form")
    cs = tensorize(select(space.space_x), select(space.space_y))
    return solve_system(assemble_collocation_2d(prob, space, cs), space, prob.geometry)


def _level(mp, scheme, p, n_el, perturb) -> ErrorReport:
    try:
        sol = solve_problem(mp, scheme, p, n_el, perturb)
    except SingularSystemError as exc:
        raise LevelFailure(n_el, exc) from exc
    except ValueError as exc:
        raise ConfigError(f"n_el={n_el}: {exc}") from exc
    return error_norms(sol, mp)


def run_convergence(cfg: StudyConfig) -> ConvergenceStudy:
    """Solve on every mesh of ``cfg`` and collect errors and orders."""
    cfg.validate("convergence")
    mp = get_problem(cfg.problem)
    spec = PerturbationSpec(cfg.seed) if cfg.perturb else None
    reports = []
    for n_el in cfg.meshes:
        reports.append(_level(mp, cfg.scheme, cfg.degree, n_el, spec))
        log.info("%s %s p=%d n_el=%d L2=%.3e", cfg.problem, cfg.scheme, cfg.degree, n_el, reports[-1].L2)
    if len(reports) == 1:
        return ConvergenceStudy(cfg.scheme, cfg.degree, cfg.problem, reports)
    return convergence_rates(reports, cfg.scheme, cfg.degree, cfg.problem)


def run_compare(cfg: StudyConfig) -> Dict[str, ConvergenceStudy]:
    """One convergence study per scheme on the same meshes, keyed by scheme."""
    cfg.validate("compare")
    return {s: run_convergence(replace(cfg, scheme=s, schemes=[])) for s in cfg.compare_schemes()}


@dataclass
class ResidualData:
    """Dense samples of ``D²(u - u_h)`` for a Galerkin solution plus surrogate points."""

    x: np.ndarray
    residual: np.ndarray
    sp_x: np.ndarray
    sp_residual: np.ndarray
    interior_rms: float


def run_residual(cfg: StudyConfig) -> ResidualData:
    cfg.validate("residual")
    mp = get_problem(cfg.problem)
    n_el = cfg.meshes[0]
    spec = PerturbationSpec(cfg.seed) if cfg.perturb else None
    try:
        sol = solve_problem(mp, "galerkin", cfg.degree, n_el, spec)
    except SingularSystemError as exc:
        raise LevelFailure(n_el, exc) from exc
    x = element_samples(sol.space.elements, RESIDUAL_SAMPLES).ravel()
    sp = surrogate_sp_all(sol.space) if cfg.degree in SP_TABLE else np.empty(0)
    if sp.size and not sol.space.periodic:
        _, rms, _ = residual_superconvergence(sol, mp, interior_sp(sol.space.kv))
    else:
        rms = float("nan")
    return ResidualData(
        x=x,
        residual=mp.exact(x, 2) - sol(x, 2),
        sp_x=sp,
        sp_residual=mp.exact(sp, 2) - sol(sp, 2) if sp.size else sp,
        interior_rms=rms,
    )


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def _writer(path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def convergence_rows(study: ConvergenceStudy) -> List[List[str]]:
    rows = []
    for i, r in enumerate(study.reports):
        o2 = study.orders.get("L2", [])[i - 1] if i else None
        o1 = study.orders.get("H1", [])[i - 1] if i else None
        rows.append([_fmt(v) for v in (r.n_el, r.h, r.dof, r.L2, r.H1, r.H2, r.Linf, o2, o1)])
    return rows


def write_convergence_csv(study: ConvergenceStudy, path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(CSV_COLUMNS)
        w.writerows(convergence_rows(study))


def write_compare_csv(studies: Dict[str, ConvergenceStudy], path) -> None:
    schemes = list(studies)
    first = studies[schemes[0]]
    fh, w = _writer(path)
    with fh:
        w.writerow(["n_el", "h", "dof"] + [f"L2_{s}" for s in schemes])
        for i, r in enumerate(first.reports):
            w.writerow([_fmt(r.n_el), _fmt(r.h), _fmt(r.dof)] + [_fmt(studies[s].reports[i].L2) for s in schemes])


def write_residual_csv(data: ResidualData, path) -> None:
    x = np.concatenate([data.x, data.sp_x])
    res = np.concatenate([data.residual, data.sp_residual])
    flag = np.concatenate([np.zeros(data.x.size, int), np.ones(data.sp_x.size, int)])
    order = np.argsort(x, kind="stable")
    fh, w = _writer(path)
    with fh:
        w.writerow(["x", "residual", "is_surrogate_point"])
        for k in order:
            w.writerow([_fmt(x[k]), _fmt(res[k]), str(flag[k])])
