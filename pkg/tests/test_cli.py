import csv
import io
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from tightperm.cli import main


@pytest.fixture(scope="module")
def schema():
    text = resources.files("tightperm").joinpath("schema/result.schema.json").read_text()
    return json.loads(text)


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    out = {}
    for name, args in {
        "blocked": ["blocked-channel", "--n", "24", "--width", "8", "--slab-phi", "60", "--slab-thickness", "4"],
        "channel": ["channel", "--n", "16", "--width", "4"],
        "solid": ["homogeneous", "--n", "4", "--phi", "100"],
        "slab": ["blocked-channel", "--n", "12", "--width", "4", "--slab-phi", "100"],
        "sphere": ["sphere", "--n", "40", "--diameter", "0.6"],
        "small_sphere": ["sphere", "--n", "12", "--diameter", "0.6"],
    }.items():
        path = d / f"{name}.raw"
        assert main(["generate", *args, "--out", str(path)]) == 0
        out[name] = str(path)
    return out


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_info_category_rows(files, capsys):
    code, out, _ = run(capsys, "info", files["blocked"], "--direction", "z")
    assert code == 0
    assert "Stokes: No, Stokes-Brinkman: Yes" in out
    assert "category A" in out
    _, out, _ = run(capsys, "info", files["channel"])
    assert "z: Stokes: Yes" in out
    _, out, _ = run(capsys, "info", files["solid"])
    assert "total 0.00 %" in out
    assert "NonPercolating" in out


def test_classify_json(files, capsys):
    code, out, _ = run(capsys, "classify", files["blocked"])
    rec = json.loads(out)
    assert code == 0 and rec["category"] == "A"
    assert out.endswith("\n")


def test_solve_sphere_table_value(files, capsys, schema):
    code, out, _ = run(capsys, "solve", files["sphere"], "--model", "stokes", "--bc", "periodic", "--rtol", "1e-3")
    assert code == 0
    rec = json.loads(out)
    jsonschema.validate(rec, schema)
    assert rec["k_hat"] == pytest.approx(4.44e-2, rel=0.03)
    assert rec["model"] == "stokes"


def test_forced_darcy_without_kstokes(files, capsys):
    code, _, err = run(capsys, "solve", files["channel"], "--model", "darcy")
    assert code == 2
    assert "K_stokes" in err


def test_auto_blocked_with_cross_check(files, capsys, schema):
    code, out, _ = run(capsys, "solve", files["blocked"], "--cross-check")
    rec = json.loads(out)
    assert code == 0
    assert rec["model"] == "darcy" and rec["category"] == "A"
    assert "stokes_brinkman_check" in rec
    jsonschema.validate(rec, schema)


def test_auto_nonpercolating_record(files, capsys, schema):
    code, out, _ = run(capsys, "solve", files["slab"])
    rec = json.loads(out)
    assert code == 0 and rec["k_hat"] == 0 and rec["category"] == "NonPercolating"
    jsonschema.validate(rec, schema)


def test_forced_nonpercolating_exit(files, capsys):
    code, _, _ = run(capsys, "solve", files["slab"], "--model", "stokes")
    assert code == 3


def test_nonconvergence_exit(files, capsys):
    code, _, err = run(
        capsys, "solve", files["small_sphere"], "--model", "stokes", "--bc", "periodic",
        "--rtol", "1e-10", "--maxit-outer", "2",
    )
    assert code == 4
    assert "did not converge" in err


def test_bad_config_exit(files, capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("rtol = 5\n")
    assert run(capsys, "solve", files["channel"], "--config", str(cfg))[0] == 2
    cfg.write_text("colour = blue\n")
    assert run(capsys, "solve", files["channel"], "--config", str(cfg))[0] == 2
    assert run(capsys, "solve", str(tmp_path / "missing.raw"), "--dims", "2", "2", "2")[0] == 2


def test_config_file_and_override(files, capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# settings\ninput = {files['blocked']}\nmodel = darcy\nk_stokes = 1e7\nrtol = 1e-6\n")
    code, out, _ = run(capsys, "solve", "--config", str(cfg))
    assert code == 0
    rec = json.loads(out)
    assert rec["model"] == "darcy" and rec["rtol_S"] == 1e-6
    code, out, _ = run(capsys, "solve", "--config", str(cfg), "--model", "stokes-brinkman")
    assert json.loads(out)["model"] == "stokes_brinkman"


def test_deterministic_json(files, capsys):
    args = ("solve", files["blocked"], "--model", "stokes-brinkman", "--deterministic", "--rtol", "1e-6")
    recs = []
    for _ in range(2):
        rec = json.loads(run(capsys, *args)[1])
        rec.pop("wall_time_s")
        recs.append(json.dumps(rec, sort_keys=True))
    assert recs[0] == recs[1]


def _sweep(capsys, *argv):
    code, out, _ = run(capsys, "sweep", *argv)
    rows = list(csv.DictReader(io.StringIO(out)))
    return code, rows


def test_sweep_kstokes_plateau(files, capsys):
    code, rows = _sweep(capsys, files["blocked"], "--model", "darcy", "--param", "k_stokes",
                        "--values", "1e5", "1e7", "1e9")
    assert code == 0 and len(rows) == 3
    k = [float(r["k_mkDa"]) for r in rows]
    assert abs(k[2] - k[1]) / k[2] < 0.01
    assert all(r["status"] == "ok" for r in rows)


def test_sweep_rtol_stabilises(files, capsys):
    code, rows = _sweep(capsys, files["blocked"], "--model", "stokes-brinkman", "--param", "rtol",
                        "--values", "1e-6", "1e-7", "1e-8", "1e-9")
    k = [float(r["k_mkDa"]) for r in rows]
    diffs = [abs(b - a) for a, b in zip(k, k[1:])]
    assert all(d2 <= d1 + 1e-12 * k[-1] for d1, d2 in zip(diffs, diffs[1:]))
    assert f"{k[-2]:.3g}" == f"{k[-1]:.3g}"


def test_sweep_empty_and_failures(files, capsys):
    code, rows = _sweep(capsys, files["blocked"], "--param", "rtol")
    assert code == 0 and rows == []
    code, rows = _sweep(capsys, files["channel"], "--model", "darcy", "--param", "rtol", "--values", "1e-6", "1e-7")
    assert code == 0 and len(rows) == 2
    assert all(r["status"].startswith("error") for r in rows)


def test_export_commands(files, capsys, tmp_path):
    vtk = tmp_path / "f.vtk"
    mats = tmp_path / "mats"
    code, _, _ = run(capsys, "solve", files["channel"], "--rtol", "1e-6",
                     "--export-fields", str(vtk), "--export-matrices", str(mats))
    assert code == 0
    assert vtk.read_text().startswith("# vtk DataFile")
    assert (mats / "A.mtx").exists() and (mats / "B.mtx").exists()
    vtk2 = tmp_path / "g.vtk"
    assert run(capsys, "export", files["channel"], "--vtk", str(vtk2), "--rtol", "1e-6")[0] == 0
    assert "DIMENSIONS 16 16 16" in vtk2.read_text()
    assert run(capsys, "export", files["slab"], "--vtk", str(vtk2))[0] == 3


def test_generate_writes_sidecar(files):
    from pathlib import Path

    meta = Path(files["sphere"]).with_suffix(".meta").read_text()
    assert "nx=40" in meta and "L_meters" in meta


def test_generate_spec_error(tmp_path, capsys):
    code = main(["generate", "sphere", "--n", "8", "--diameter", "1.5", "--out", str(tmp_path / "x.raw")])
    assert code == 2


def test_module_entry_point(files):
    proc = subprocess.run(
        [sys.executable, "-m", "tightperm", "classify", files["channel"]],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["category"] == "B"
