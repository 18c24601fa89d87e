import csv
import json
from pathlib import Path

import pytest

from isocolloc import bench_cli as cli, study
from isocolloc.solver import SingularSystemError
from isocolloc.study import CSV_COLUMNS

STUDIES = Path(__file__).resolve().parents[1] / "studies"


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_convergence_csv(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code = cli.main(["convergence", "--problem", "p1-dirichlet", "--scheme", "csp", "--degree", "3", "--meshes", "8,16,32", "--out", str(out)])
    assert code == 0
    assert "tail orders" in capsys.readouterr().out
    raw = out.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    rows = read_csv(out)
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r[0] for r in rows[1:]] == ["8", "16", "32"]
    assert rows[1][-2:] == ["", ""]
    # full double precision survives the round trip
    l2 = rows[2][CSV_COLUMNS.index("L2")]
    assert len(l2.replace(".", "").split("e")[0].lstrip("0")) >= 15
    assert float(rows[2][CSV_COLUMNS.index("order_L2")]) == pytest.approx(4, abs=0.5)


@pytest.mark.parametrize(
    "argv",
    [
        ["convergence", "--problem", "p2-periodic", "--scheme", "csp", "--degree", "4"],
        ["convergence", "--problem", "p4-annulus", "--scheme", "csp-sym", "--degree", "3", "--meshes", "4,8"],
        ["convergence", "--problem", "p1-dirichlet", "--scheme", "csp", "--degree", "9"],
        ["convergence", "--problem", "nope", "--scheme", "gp", "--degree", "3"],
        ["convergence", "--problem", "p2-periodic", "--scheme", "gp", "--degree", "3", "--perturb"],
        ["residual", "--problem", "p1-dirichlet", "--degree", "3", "--meshes", "10,20"],
        ["convergence", "--scheme", "bogus"],
    ],
)
def test_config_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(cli.main(argv))
    assert exc.value.code == 2


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"problem": "p1-dirichlet", "colour": "red"}')
    assert cli.main(["convergence", "--config", str(cfg)]) == 2
    cfg.write_text("{not json")
    assert cli.main(["convergence", "--config", str(cfg)]) == 2


def test_singular_level_exits_3(monkeypatch, capsys):
    real = study.solve_problem

    def failing(mp, scheme, p, n_el, perturb=None):
        if n_el == 16:
            raise SingularSystemError("zero pivot", row=3)
        return real(mp, scheme, p, n_el, perturb)

    monkeypatch.setattr(study, "solve_problem", failing)
    code = cli.main(["convergence", "--problem", "p1-dirichlet", "--scheme", "gp", "--degree", "3", "--meshes", "8,16,32"])
    assert code == 3
    assert "n_el=16" in capsys.readouterr().err


def test_residual_output(tmp_path):
    out = tmp_path / "r.csv"
    assert cli.main(["residual", "--problem", "p1-dirichlet", "--degree", "3", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["x", "residual", "is_surrogate_point"]
    flags = [r[2] for r in rows[1:]]
    assert flags.count("0") == 2000 and flags.count("1") == 20
    xs = [float(r[0]) for r in rows[1:]]
    assert xs == sorted(xs)


def test_compare_includes_galerkin(tmp_path):
    out = tmp_path / "cmp.csv"
    argv = ["compare", "--problem", "p1-dirichlet", "--scheme", "gp,csp", "--degree", "3", "--meshes", "8,16", "--out", str(out)]
    assert cli.main(argv) == 0
    assert read_csv(out)[0] == ["n_el", "h", "dof", "L2_galerkin", "L2_gp", "L2_csp"]


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"command": "convergence", "problem": "p1-dirichlet", "scheme": "gp", "degree": 3, "meshes": [8, 16, 32, 64]}))
    out = tmp_path / "o.csv"
    assert cli.main(["convergence", "--config", str(cfg), "--meshes", "4,8", "--out", str(out)]) == 0
    assert [r[0] for r in read_csv(out)[1:]] == ["4", "8"]


FAST_STUDIES = ["dirichlet-csp-p3", "periodic-csp-p5", "compare-p3", "advection-csp-p3", "residual-galerkin-p3"]


@pytest.mark.parametrize("name", FAST_STUDIES)
def test_shipped_study_configs(name, tmp_path):
    cfg = json.loads((STUDIES / f"{name}.json").read_text())
    assert cfg["description"]
    argv = [cfg["command"], "--config", str(STUDIES / f"{name}.json"), "--out", str(tmp_path / "o.csv")]
    if cfg["command"] != "residual":
        argv += ["--meshes", "8,16,32"]
    assert cli.main(argv) == 0
    assert (tmp_path / "o.csv").stat().st_size > 0


def test_all_shipped_configs_validate():
    for path in sorted(STUDIES.glob("*.json")):
        cfg = json.loads(path.read_text())
        study.load_config(path).validate(cfg["command"])
