import csv
import io
import json

import numpy as np
import pytest

from darbouxlax.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_zs_report(capsys):
    code, out, _ = run(["verify-zs", "--seed", "7"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["report_version"] == 1 and rep["seed"] == 7 and rep["passed"]
    assert len(rep["checks"]) >= 6
    names = [c["name"] for c in rep["checks"]]
    assert names == sorted(names)
    assert set(rep["checks"][0]) == {"name", "residual", "tolerance", "comparison", "passed"}


def test_verify_deterministic(capsys):
    a = run(["verify-dt", "--seed", "3"], capsys)[1]
    b = run(["verify-dt", "--seed", "3"], capsys)[1]
    c = run(["verify-dt", "--seed", "4"], capsys)[1]
    assert a == b and a != c


def test_soliton_peak(capsys):
    code, out, err = run(["soliton", "--k", "2", "--a2", "1", "--alpha", "-0.75"], capsys)
    assert code == 0 and "soliton" in err
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["x", "t", "w"]
    assert abs(max(float(r["w"]) for r in rows) - 2.0) <= 1e-10


def test_soliton_files(tmp_path, capsys):
    data, report = tmp_path / "w.csv", tmp_path / "r.json"
    code, out, _ = run(["soliton", "--k", "1", "--output", str(data), "--report", str(report),
                        "--n-x", "11", "--n-t", "2"], capsys)
    assert code == 0 and out == ""
    assert len(data.read_text().splitlines()) == 1 + 11 * 2
    assert json.loads(report.read_text())["command"] == "soliton"


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"k": 2.0, "grid": {"n_x": 5, "n_t": 2}}))
    _, out, _ = run(["soliton", "--config", str(cfg)], capsys)
    assert len(out.splitlines()) == 1 + 5 * 2
    _, out, _ = run(["soliton", "--config", str(cfg), "--n-x", "3"], capsys)
    assert len(out.splitlines()) == 1 + 3 * 2


def test_tolerance_override_fails_suite(capsys):
    code, out, _ = run(["verify-dt", "--tol", "abelian=1e-300"], capsys)
    rep = json.loads(out)
    assert code == 1 and not rep["passed"]
    assert not next(c for c in rep["checks"] if c["name"] == "dt.abelian_b3")["passed"]


@pytest.mark.parametrize("argv", [
    ["verify-dt", "--tol", "nonsense=1"],
    ["verify-dt", "--tol", "bell=-1"],
    ["soliton", "--n-x", "1"],
    ["chain", "--depth", "9"],
    ["euler", "--format", "json"],
])
def test_usage_errors_write_nothing(argv, tmp_path, capsys):
    target = tmp_path / "out"
    code, out, err = run(argv + ["--output", str(target)], capsys)
    assert code == 2 and "usage error" in err
    assert not target.exists() and out == ""


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert run(["verify-dt", "--config", str(cfg)], capsys)[0] == 2


def test_unknown_command():
    with pytest.raises(SystemExit) as exc:
        main(["nope"])
    assert exc.value.code == 2


def test_chain_json(capsys):
    code, out, _ = run(["chain", "--depth", "2", "--n-x", "21", "--n-t", "2"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert [lv["level"] for lv in rep["levels"]] == [0, 1, 2]
    assert np.asarray(rep["levels"][2]["potential"]).shape == (21, 2)


def test_euler_csv(capsys):
    code, out, _ = run(["euler", "--dim", "2", "--y-end", "0.5", "--h", "0.01", "--every", "10"], capsys)
    rows = out.splitlines()
    assert code == 0
    assert rows[0].split(",")[:3] == ["y", "u00_re", "u00_im"] and rows[0].endswith("drift2")
    assert len(rows) == 1 + 6


def test_bdt_csv(capsys):
    code, out, _ = run(["bdt", "--t-end", "0.1", "--h-step", "0.001"], capsys)
    rows = out.splitlines()
    assert code == 0
    assert rows[0] == "t,spectral,evolution,idempotence,persistence"
    assert len(rows) == 1 + 101 - 4


def test_degenerate_exit_code(monkeypatch, capsys):
    # diagonal data with mismatched eigen-indices gives <chi|phi> = 0
    from darbouxlax import bdt

    def orthogonal_scene(rng, dim, h, lam, mu, nu):
        d = np.diag(np.arange(1.0, dim + 1))
        return bdt.BdtScene(d, 0.5 * d[::-1, ::-1], h, lam, mu, nu, chi_index=0, phi_index=1)

    monkeypatch.setattr(bdt, "random_scene", orthogonal_scene)
    code, out, err = run(["bdt", "--t-end", "0.01", "--h-step", "0.001"], capsys)
    assert code == 3 and "degeneracy" in err and "t=0" in err
    assert out == ""
