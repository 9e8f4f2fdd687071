import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from landaukit import cli
from landaukit.simulator import SeedSpec

FREE = """
[model]
dimension = 1
[simulate]
mode = free
N_z = 32
N_v = 64
dt = 0.1
T_end = 2
[seed.a]
k_center = 0.5
eta_width = 1.5
"""


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_empty_config_reports_missing_model(tmp_path, capsys):
    code = cli.main(["stability", "--config", str(write(tmp_path, "")), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "missing section: model" in capsys.readouterr().err
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert m["status"] == "validation_error"


def test_unknown_key_is_named(tmp_path, capsys):
    code = cli.main(["simulate", "--config", str(write(tmp_path, "[model]\nbogus = 1\n")), "--out", str(tmp_path)])
    assert code == 2
    assert "bogus" in capsys.readouterr().err


def test_unknown_section_and_bad_value(tmp_path):
    assert cli.main(["simulate", "--config", str(write(tmp_path, "[model]\n[extra]\n")), "--out", str(tmp_path)]) == 2
    assert cli.main(["simulate", "--config", str(write(tmp_path, "[model]\ndimension = two\n")),
                     "--out", str(tmp_path)]) == 2


def test_free_simulation_writes_seed_samples(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["simulate", "--config", str(write(tmp_path, FREE)), "--out", str(out)]) == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["status"] == "ok" and "density.csv" in m["artifacts"]
    assert m["config"]["simulate"]["N_v"] == 64 and m["config"]["model"]["potential"] == "screened"
    raw = (out / "density.csv").read_bytes()
    assert b"\r\n" not in raw
    seed = SeedSpec.gaussian((0.5,), eta_width=1.5)
    kmin = 2 * math.pi / (4 * math.pi)
    rows = list(csv.DictReader(raw.decode().splitlines()))
    checked = 0
    for r in rows:
        t, m_ = float(r["t"]), int(r["k"])
        k = m_ * kmin
        expected = 1e-3 * seed(np.array([[k]]), np.array([[k * t]]), kmin)[0]
        got = complex(float(r["re_rho"]), float(r["im_rho"]))
        assert abs(got - expected) < 1e-14
        checked += 1
    assert checked == len(rows) > 0
    assert not list(out.glob(".tmp*"))


def test_single_thread_runs_are_byte_identical(tmp_path):
    cfg = write(tmp_path, FREE.replace("mode = free", "mode = nonlinear").replace("dt = 0.1", "dt = 0.05")
                .replace("T_end = 2", "T_end = 0.5"))
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(b)]) == 0
    for name in ("density.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_numerical_failure_exits_three(tmp_path):
    cfg = write(tmp_path, FREE.replace("mode = free", "mode = nonlinear").replace("dt = 0.1", "dt = 2.0"))
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert m["status"] == "numerical_error" and "StepError" in m["error"]


def test_stability_report(tmp_path):
    cfg = write(tmp_path, "[model]\nalpha = 1\n[stability]\nkmags = 1\nn_band = 12\n")
    out = tmp_path / "o"
    assert cli.main(["stability", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "stability.json").read_text())
    assert rep["kappa"] > 0 and not rep["unstable"]


def test_volterra_report(tmp_path):
    cfg = write(tmp_path, "[model]\n[volterra]\nkmags = 1\ndt = 0.05\nt_star = 10\n")
    out = tmp_path / "o"
    assert cli.main(["volterra", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "volterra.json").read_text())
    assert rep["stable"] and rep["route_agreement"]["1.0"] < 1e-5
    assert (out / "phi.csv").read_text().startswith("kmag,forcing,t,re_phi,im_phi,weighted_abs_phi\n")


def test_strict_regime(tmp_path):
    cfg = write(tmp_path, "[echo]\nbeta = 3\n")
    assert cli.main(["echo-kernel", "--config", str(cfg), "--out", str(tmp_path / "o"), "--strict-regime"]) == 2
    cfg = write(tmp_path, "[model]\n[volterra]\ns = 3\n")
    assert cli.main(["volterra", "--config", str(cfg), "--out", str(tmp_path / "v"), "--strict-regime"]) == 2


def test_echo_kernel_small_probe_set(tmp_path):
    cfg = write(tmp_path, "[echo]\nbeta = 12\ntimes = 5, 10\nkmags = 1\ntaus = 0\noracle = false\n"
                          "lattice_time = 10\nlattice_radius = 4\n")
    out = tmp_path / "o"
    assert cli.main(["echo-kernel", "--config", str(cfg), "--out", str(out)]) == 0
    v = json.loads((out / "echo_verdict.json").read_text())
    assert {"beta", "zeta", "stabilized"} <= set(v)
    assert v["beta"] == 12.0 and v["zeta"] == 0.9
    assert len((out / "echo_ratios.csv").read_text().splitlines()) == 3


def test_diagnose_reads_simulation(tmp_path):
    sim_cfg = write(tmp_path, FREE.replace("mode = free", "mode = nonlinear").replace("dt = 0.1", "dt = 0.01")
                    .replace("T_end = 2", "T_end = 1\nsnapshot_every = 10"), "s.ini")
    run = tmp_path / "run"
    assert cli.main(["simulate", "--config", str(sim_cfg), "--out", str(run)]) == 0
    dcfg = write(tmp_path, f"[diagnose]\nrun_dir = {run}\n", "d.ini")
    out = tmp_path / "d"
    assert cli.main(["diagnose", "--config", str(dcfg), "--out", str(out)]) == 0
    rep = json.loads((out / "diagnostics.json").read_text())
    assert set(rep["bootstrap"]["values"]) == {"hi_localized", "density_l2", "lo_localized",
                                               "density_chemin_lerner", "low_linfty"}
    assert "mode_fits" in rep


def test_diagnose_rejects_missing_run(tmp_path):
    dcfg = write(tmp_path, f"[diagnose]\nrun_dir = {tmp_path / 'nothing'}\n")
    assert cli.main(["diagnose", "--config", str(dcfg), "--out", str(tmp_path / "o")]) == 2


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "landaukit", "stability", "--config", str(write(tmp_path, "")),
                        "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert p.returncode == 2 and "missing section: model" in p.stderr
