"""End-to-end tests of the command-line front end."""

import csv
import json

import numpy as np
import pytest

from singular_bsde import Field
from singular_bsde.cli import EXIT_DOMAIN, EXIT_OK, main


def _read_csv(path):
    with open(path) as fh:
        return list(csv.reader(row for row in fh if not row.startswith("#")))


def test_density_command(tmp_path):
    out = tmp_path / "dens"
    code = main(["density", "--x", "1.5", "--samples", "50",
                 "--horizon", "100.0", "--check-mass", "--plot",
                 "--out", str(out)])
    assert code == EXIT_OK
    rows = _read_csv(f"{out}_exit_density.csv")
    assert rows[0] == ["s", "f_tau", "exit_cdf"]
    assert len(rows) == 51
    svg = (tmp_path / "dens_exit_density.svg").read_text()
    assert svg.startswith("<svg")


def test_density_rejects_boundary_x(tmp_path):
    code = main(["density", "--x", "0.0", "--out", str(tmp_path / "d")])
    assert code == EXIT_DOMAIN


def test_solve_roundtrip_and_slice(tmp_path):
    out = tmp_path / "field.csv"
    code = main(["solve", "--n", "8", "--dx", "0.1", "--dt", "0.01",
                 "--slice", "x=1.5", "--out", str(out)])
    assert code == EXIT_OK
    field = Field.from_csv(out)
    assert field.values.shape == (31, 101)
    assert field.tag.startswith("un-n8")
    rows = _read_csv(str(tmp_path / "field_slice.csv"))
    assert rows[0] == ["t", "value", "y_t"]


def test_solve_deterministic_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["solve", "--ubar-n", "5", "--regime", "inside", "--q", "2",
            "--L", "2", "--dx", "0.1", "--dt", "0.01"]
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_simulate_stats_only(tmp_path, capsys):
    code = main(["simulate", "--stats-only", "--paths", "20000",
                 "--dt-sim", "0.01", "--seed", "3",
                 "--dx", "0.1", "--dt", "0.01"])
    assert code == EXIT_OK
    assert "exit fraction" in capsys.readouterr().out


def test_simulate_from_field(tmp_path):
    fld = tmp_path / "field.csv"
    assert main(["solve", "--n", "64", "--dx", "0.1", "--dt", "0.01",
                 "--out", str(fld)]) == EXIT_OK
    out = tmp_path / "sim"
    code = main(["simulate", "--from-field", str(fld), "--paths", "2",
                 "--dt-sim", "0.01", "--seed", "7", "--out", str(out)])
    assert code == EXIT_OK
    rows = _read_csv(f"{out}_path0.csv")
    assert rows[0] == ["k", "t", "w", "y", "z", "exited_flag"]
    assert len(rows) == 102
    # Y stays finite in the export even on exited paths
    ys = np.array([float(r[3]) for r in rows[1:]])
    assert np.all(np.isfinite(ys))


def test_config_file_seeding(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("samples = 10\nhorizon = 2.0\n")
    out = tmp_path / "d"
    code = main(["density", "--x", "1.0", "--config", str(cfg),
                 "--out", str(out)])
    assert code == EXIT_OK
    assert len(_read_csv(f"{out}_exit_density.csv")) == 11


def test_verify_monotone_suite(tmp_path, capsys):
    rep = tmp_path / "report.json"
    code = main(["verify", "--suite", "monotone", "--dx", "0.1",
                 "--dt", "0.01", "--out", str(rep)])
    assert code == EXIT_OK
    data = json.loads(rep.read_text())
    assert data["pass"] is True
    assert data["monotone"]["pass"] is True


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["density", "--x", "1.0", "--bogus"])
    assert exc.value.code == 2
