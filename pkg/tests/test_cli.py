import json
import subprocess
import sys

import pytest

from km2d.cli import main

TORUS_ARGS = ["verify-torus", "--rep", "so3-adjoint", "--sectors", "NS,NS",
              "--cutoff-m", "9/2", "--cutoff-p", "9/2", "--window", "1,1,2",
              "--tol", "1e-9", "--max-mode", "1"]


def run_cli(args, capsys=None):
    code = main(args)
    return code


def test_verify_torus_passes(tmp_path):
    out = tmp_path / "r.json"
    code = main(TORUS_ARGS + ["--output", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["pass"] is True
    assert payload["charges"]["c_measured"] == 1.5
    assert payload["charges"]["k_measured"] == 1.0


def test_json_reports_are_byte_identical(tmp_path):
    f1, f2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(TORUS_ARGS + ["--output", str(f1)]) == 0
    assert main(TORUS_ARGS + ["--output", str(f2)]) == 0
    assert f1.read_bytes() == f2.read_bytes()


def test_structure_constants_csv(tmp_path):
    out = tmp_path / "sc.csv"
    assert main(["structure-constants", "--lmax", "4",
                 "--output", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "l1,m1,l2,m2,l3,m3,value"
    golden = [ln for ln in lines if ln.startswith("1,0,1,0,2,0,0.894427")]
    assert golden, "expected the 2/sqrt(5) row"


def test_half_integer_flag_forms(tmp_path):
    # decimal and fraction forms are equivalent
    base = ["car-check", "--geometry", "torus", "--sectors", "NS,NS", "--d",
            "1", "--cutoff-m"]
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(base + ["1.5", "--cutoff-p", "3/2", "--output", str(out1)]) == 0
    assert main(base + ["3/2", "--cutoff-p", "1.5", "--output", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_parity_inconsistent_cutoff_rejected(capsys):
    code = main(["verify-torus", "--sectors", "NS,NS", "--cutoff-m", "2",
                 "--cutoff-p", "9/2"])
    assert code == 1
    assert "parity" in capsys.readouterr().err


def test_unknown_flag_exits_one():
    with pytest.raises(SystemExit) as exc:
        main(["verify-torus", "--frobnicate"])
    assert exc.value.code == 1


def test_usage_error_exits_one():
    with pytest.raises(SystemExit) as exc:
        main(["verify-torus", "--cutoff-m", "nonsense"])
    assert exc.value.code == 1


def test_d_mismatch_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["verify-torus", "--rep", "so3-adjoint", "--d", "4"])
    assert exc.value.code == 1


def test_regularization_table(capsys):
    assert main(["regularization"]) == 0
    out = capsys.readouterr().out
    assert "torus NS" in out and "torus R" in out
    lines = [ln for ln in out.splitlines() if ln.startswith("torus")]
    for ln in lines:
        assert ln.split()[-1] == "1"


def test_regularization_raw_scan(capsys):
    assert main(["regularization", "--raw-scan"]) == 0
    out = capsys.readouterr().out
    assert "raw central" in out


def test_regularization_sphere_ns_unresolved(capsys):
    code = main(["regularization", "--include-sphere-ns"])
    assert code == 3
    assert "unresolved" in capsys.readouterr().out


def test_sphere_ns_verification_exits_three(capsys):
    code = main(["verify-sphere", "--sectors", "NS", "--cutoff-l", "3/2",
                 "--lmax", "2", "--max-l", "0", "--window", "1/2,1/2,2"])
    assert code == 3


def test_window_violation_exits_one(capsys):
    code = main(["verify-torus", "--sectors", "NS,NS", "--cutoff-m", "5/2",
                 "--cutoff-p", "5/2", "--window", "1,1,2", "--max-mode", "2"])
    assert code == 1
    assert "window" in capsys.readouterr().err.lower()


def test_sphere_verification_passes(tmp_path):
    out = tmp_path / "s.json"
    code = main(["verify-sphere", "--sectors", "R", "--cutoff-l", "4",
                 "--window", "1,1,2", "--output", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["pass"] is True


def test_sphere_abstract_command(tmp_path):
    out = tmp_path / "j.json"
    code = main(["sphere-abstract", "--lmax", "4", "--l-probe", "1",
                 "--output", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["max_jacobi_residual"] <= 1e-10


def test_car_check_command(tmp_path):
    out = tmp_path / "c.json"
    code = main(["car-check", "--geometry", "sphere", "--sectors", "R",
                 "--d", "2", "--cutoff-l", "1", "--output", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["max_residual"] == 0.0


def test_config_file_merged_under_flags(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("cutoff-m=9/2\ncutoff-p=9/2\nmax-mode=1\nsectors=NS,NS\n")
    out = tmp_path / "r.json"
    # explicit flag overrides the config value
    code = main(["verify-torus", "--config", str(cfg), "--max-mode", "1",
                 "--output", str(out)])
    assert code == 0
    ref = tmp_path / "ref.json"
    assert main(TORUS_ARGS + ["--output", str(ref)]) == 0
    assert out.read_bytes() == ref.read_bytes()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "km2d.cli", "regularization"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "torus NS" in proc.stdout


def test_check_failure_exits_two(tmp_path):
    # an impossible central tolerance forces a clean check failure
    out = tmp_path / "fail.json"
    code = main(["verify-sphere", "--sectors", "R", "--cutoff-l", "4",
                 "--window", "1,1,2", "--central-tol", "1e-17",
                 "--output", str(out)])
    assert code == 2
    assert json.loads(out.read_text())["pass"] is False


def test_threads_env_is_deterministic(tmp_path, monkeypatch):
    f1, f2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(TORUS_ARGS + ["--output", str(f1)]) == 0
    monkeypatch.setenv("KM2D_THREADS", "4")
    assert main(TORUS_ARGS + ["--output", str(f2)]) == 0
    assert f1.read_bytes() == f2.read_bytes()
