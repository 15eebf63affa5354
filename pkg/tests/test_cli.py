from lcemul.cli import main
from lcemul.diagnostics import read_diagnostics
from lcemul.io import read_snapshot


SMALL_RUN = """
[grid]
nx = 24
ny = 24
lx = 2.0
ly = 2.0

[physics]
eps = 0.1
alpha = 10.0
beta = 1.0
kappa = 0.1
phi_cr = 0.5

[numerics]
dt = 5e-4
max_steps = 12

[initial]
preset = drop_benchmark
width = 0.08

[output]
dir = PLACEHOLDER
image_fields = phi,d
"""


def write_cfg(tmp_path, outdir, name="small.cfg"):
    path = tmp_path / name
    path.write_text(SMALL_RUN.replace("PLACEHOLDER", str(outdir)))
    return str(path)


def test_run_produces_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--config", write_cfg(tmp_path, out), "--snapshot-every", "5"])
    assert rc == 0
    assert (out / "diagnostics.csv").exists()
    assert (out / "final.bin").exists()
    assert (out / "final_phi.ppm").exists()
    assert (out / "final_d.ppm").exists()
    assert (out / "snapshot_00000005.bin").exists()
    assert (out / "snapshot_00000010.bin").exists()
    rows = read_diagnostics(out / "diagnostics.csv")
    assert len(rows) == 12
    assert "stopped after 12 steps" in capsys.readouterr().out


def test_run_then_restart_from_snapshot(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", write_cfg(tmp_path, out)]) == 0
    restart_cfg = tmp_path / "restart.cfg"
    restart_cfg.write_text(
        SMALL_RUN.replace("PLACEHOLDER", str(tmp_path / "out2"))
        .replace("preset = drop_benchmark", "preset = from_snapshot")
        .replace("width = 0.08", f"path = {out / 'final.bin'}")
    )
    assert main(["run", "--config", str(restart_cfg)]) == 0
    rows = read_diagnostics(tmp_path / "out2" / "diagnostics.csv")
    first = read_snapshot(out / "final.bin")
    assert rows[0].t > first.t


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["landscape", "--config", "drop_benchmark", "--region", "bad"]) == 1
    capsys.readouterr()


def test_solver_failure_exits_2(tmp_path, capsys):
    cfg = tmp_path / "stuck.cfg"
    cfg.write_text(
        SMALL_RUN.replace("PLACEHOLDER", str(tmp_path / "out"))
        .replace("max_steps = 12", "max_steps = 2\nnewton_tol = 0.0\nnewton_max_iters = 1")
    )
    assert main(["run", "--config", str(cfg)]) == 2
    assert "solver failure" in capsys.readouterr().err


def test_landscape_outputs(tmp_path, capsys):
    rc = main(["landscape", "--config", "drop_benchmark",
               "--region", "0.5,1.0,0.0,2.0", "--out", str(tmp_path), "--samples", "9"])
    assert rc == 0
    assert (tmp_path / "landscape.csv").exists()
    pts = (tmp_path / "stationary_points.csv").read_text().splitlines()
    assert pts[0] == "s,w,value,kind,on_boundary"
    assert any("min" in line for line in pts[1:])
    capsys.readouterr()


def test_check_reports_condition(capsys):
    rc = main(["check", "--config", "drop_benchmark", "--c-gn", "0.2", "--c-lady", "1.0"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "branch A holds" in out
    assert "grid measure" in out or "|Omega|" in out


def test_verify_subcommand_oracle(capsys, tmp_path):
    rc = main(["verify", "--oracle", "--out", str(tmp_path / "oracles.csv")])
    assert rc == 0
    assert (tmp_path / "oracles.csv").exists()
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_verify_failure_exits_3(monkeypatch, capsys):
    from lcemul.verify import OracleResult

    def rigged(which="all"):
        return [OracleResult("rigged", 1.0, 0.0, 0.1, False, "forced failure")]

    monkeypatch.setattr("lcemul.verify.default_suite", rigged)
    assert main(["verify", "--oracle"]) == 3
    capsys.readouterr()


def test_render_roundtrip(tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", "--config", write_cfg(tmp_path, out)])
    img = tmp_path / "phi.ppm"
    rc = main(["render", "--snapshot", str(out / "final.bin"),
               "--field", "phi", "--out", str(img), "--palette", "coolwarm"])
    assert rc == 0
    assert img.read_bytes().startswith(b"P6")
    capsys.readouterr()


def test_sim_threads_env_cap(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SIM_THREADS", "2")
    rc = main(["verify", "--oracle"])
    assert rc == 0
    monkeypatch.setenv("SIM_THREADS", "zebra")
    assert main(["verify", "--oracle"]) == 1
    capsys.readouterr()


def test_sim_threads_runs_groups_in_pool(monkeypatch, capsys):
    # --all with SIM_THREADS > 1 fans the four oracle groups out to workers
    from lcemul.verify import OracleResult

    seen = []

    def stub(which="all"):
        seen.append(which)
        return [OracleResult(f"stub_{which}", 0.0, 0.0, 1.0, True, "")]

    monkeypatch.setattr("lcemul.verify.default_suite", stub)
    monkeypatch.setenv("SIM_THREADS", "3")
    assert main(["verify", "--all"]) == 0
    assert sorted(seen) == ["gradient", "oracle", "order", "stress"]
    out = capsys.readouterr().out
    assert "4/4 checks passed" in out
