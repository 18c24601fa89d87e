"""``iso-colloc`` command line: convergence, residual and comparison studies.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from .analysis import ROUNDOFF_FLOOR
from .study import (
    STUDY_SCHEMES,
    ConfigError,
    LevelFailure,
    load_config,
    run_compare,
    run_convergence,
    run_residual,
    write_compare_csv,
    write_convergence_csv,
    write_residual_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _meshes(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iso-colloc", description="Isogeometric collocation benchmark studies.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every refinement level")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (
        ("convergence", "errors and orders over a mesh sequence"),
        ("residual", "D2 residual of the Galerkin solution on one mesh"),
        ("compare", "L2 errors of several schemes on the same meshes"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON study file; flags override its values")
        p.add_argument("--problem")
        if name == "compare":
            p.add_argument("--scheme", dest="schemes", type=lambda s: s.split(","), help="comma-separated schemes")
        else:
            p.add_argument("--scheme", choices=STUDY_SCHEMES)
        p.add_argument("--degree", type=int)
        p.add_argument("--meshes", type=_meshes, help="e.g. 8,16,32,64")
        p.add_argument("--seed", type=int)
        p.add_argument("--perturb", action="store_true", default=None, help="randomly shift interior knots")
        p.add_argument("--out", help="CSV output path")
    return parser


def _summary(study) -> str:
    parts = [f"{study.problem} {study.scheme} p={study.degree}"]
    for norm in study.tail:
        try:
            parts.append(f"{norm} {study.tail_order(norm, floor=ROUNDOFF_FLOOR):.2f}")
        except ValueError:
            parts.append(f"{norm} n/a")
    return "  ".join(parts)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {k: getattr(args, k, None) for k in ("problem", "scheme", "schemes", "degree", "meshes", "seed", "perturb", "out")}
    try:
        if args.command == "residual" and args.meshes is None and args.config is None:
            overrides["meshes"] = [10]
        cfg = load_config(args.config, **overrides)
        if args.command == "convergence":
            study = run_convergence(cfg)
            if cfg.out:
                write_convergence_csv(study, cfg.out)
            print("tail orders: " + _summary(study))
        elif args.command == "compare":
            studies = run_compare(cfg)
            if cfg.out:
                write_compare_csv(studies, cfg.out)
            for study in studies.values():
                print("tail orders: " + _summary(study))
        else:
            data = run_residual(cfg)
            if cfg.out:
                write_residual_csv(data, cfg.out)
            print(
                f"{data.x.size} samples, {data.sp_x.size} surrogate points, "
                f"max |residual| {abs(data.residual).max():.3e}, interior RMS {data.interior_rms:.3e}"
            )
    except ConfigError as exc:
        print(f"iso-colloc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LevelFailure as exc:
        print(f"iso-colloc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
