import json

import numpy as np
import pytest

from ymlab import io
from ymlab.cli import ConfigError, load_config, main
from ymlab.flow import constantPath


def test_field_blob_round_trip(tmp_path, grid8):
    rng = np.random.default_rng(0)
    for deg, dim in ((0, 1), (1, 1), (1, 3), (0, 3)):
        a = grid8.random(deg, dim, rng)
        io.write_field_blob(tmp_path / "f.bin", a, deg)
        b, d = io.read_field_blob(tmp_path / "f.bin")
        assert d == deg and np.array_equal(a, b)
        assert (tmp_path / "f.bin").stat().st_size == 16 + 8 * a.size


def test_blob_rejects_bad_magic(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(ValueError):
        io.read_field_blob(tmp_path / "x.bin")


def test_field_json_round_trip(grid8):
    a = grid8.random(1, 3, 1)
    assert np.array_equal(io.field_from_json(io.field_to_json(grid8, a, 1)), a)


def test_trajectory_round_trip(tmp_path, cos_cos_points, cos_cos):
    p = constantPath(cos_cos_points["sx"].cfg, 2.0, 5)
    man = io.save_trajectory(tmp_path, p, cos_cos)
    q = io.load_trajectory(man)
    assert np.array_equal(p.A, q.A) and np.array_equal(p.omega, q.omega) and np.array_equal(p.s, q.s)
    rows = (tmp_path / "trajectory_diagnostics.csv").read_text().splitlines()
    assert rows[0] == "s,action,energy_density_integral,residual" and len(rows) == 6


def test_report_schema(tmp_path):
    path = io.write_report(tmp_path / "r.json", {"x": np.float64(1.5), "v": np.arange(3), "bad": np.inf})
    d = io.load_report(path)
    assert d["x"] == 1.5 and d["v"] == [0, 1, 2] and d["bad"] == "inf"
    d["schema_version"] = "2.0"
    path.write_text(json.dumps(d))
    with pytest.raises(ValueError):
        io.load_report(path)


def test_config_errors_name_the_field(tmp_path):
    f = tmp_path / "c.ini"
    f.write_text("[grid]\nNx = 2\n")
    with pytest.raises(ConfigError, match="grid.Nx"):
        load_config(f)
    f.write_text("[grid]\nNz = 8\n")
    with pytest.raises(ConfigError, match="grid.Nz"):
        load_config(f)
    f.write_text("[solver]\nnewton_tol = abc\n")
    with pytest.raises(ConfigError, match="solver.newton_tol"):
        load_config(f)


def test_cli_usage_exit_code(tmp_path, capsys):
    f = tmp_path / "c.ini"
    f.write_text("[perturbation]\nkind = bogus\n")
    assert main(["critical", "--config", str(f), "--out-dir", str(tmp_path / "o")]) == 2
    assert "perturbation.kind" in capsys.readouterr().err
    assert main(["check", "--threads", "0", "--out-dir", str(tmp_path / "o")]) == 2


def test_cli_critical_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["critical", "--out-dir", str(tmp_path / d), "--seed", "3"]) == 0
    ra = (tmp_path / "a" / "report.json").read_bytes()
    assert ra == (tmp_path / "b" / "report.json").read_bytes()
    rep = io.load_report(tmp_path / "a" / "report.json")
    assert rep["status"] == "pass" and len(rep["results"]["catalog"]["points"]) == 4
    assert (tmp_path / "a" / "spectra.csv").exists()


def test_cli_fail_on_degenerate_model(tmp_path):
    f = tmp_path / "c.ini"
    f.write_text("[perturbation]\nkind = none\n[morse]\nn_starts = 4\n")
    assert main(["critical", "--config", str(f), "--out-dir", str(tmp_path / "o")]) == 1
    assert io.load_report(tmp_path / "o" / "report.json")["status"] == "fail"
