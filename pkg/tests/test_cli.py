import json
import subprocess
import sys

import numpy as np
import pytest

from nlkg_lab.cli import main
from nlkg_lab.config import PRESETS, config_hash, load_config
from nlkg_lab.errors import ConfigurationError

SMALL = ["--set", "grid.L=20", "--set", "grid.N=256"]


def _run(tmp_path, *args):
    out = tmp_path / "out"
    code = main(list(args) + ["--out", str(out)])
    rep = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, rep, out


def test_spectrum_free(tmp_path):
    code, rep, out = _run(tmp_path, "spectrum", "--preset", "free", *SMALL)
    assert code == 0
    assert rep["spectrum"]["n_bound"] == 0
    assert "no bound states" in rep["note"]
    assert "no bound states" in (out / "report.txt").read_text()


def test_spectrum_single_mode(tmp_path):
    code, rep, _ = _run(tmp_path, "spectrum", "--preset", "pt-single", *SMALL)
    assert code == 0
    assert rep["spectrum"]["omega"][0] == pytest.approx(0.75, abs=2e-3)
    assert rep["resonance"]["N"] == 1
    assert rep["multi_indices"]["M_hat"] == [[2]]
    assert rep["config_sha256"] == config_hash(rep["config"])


def test_resonant_config_exits_2(tmp_path, capsys):
    code, _, _ = _run(tmp_path, "spectrum", "--preset", "resonant")
    assert code == 2
    assert "H3" in capsys.readouterr().err


def test_config_errors_exit_4(tmp_path):
    assert _run(tmp_path, "spectrum", "--set", "m=-1")[0] == 4
    assert _run(tmp_path, "spectrum", "--set", "grid.N=4")[0] == 4
    assert _run(tmp_path, "spectrum", "--set", "potential.depth=-x")[0] == 4
    with pytest.raises(ConfigurationError):
        load_config(None, "no-such-preset")


def test_domain_error_exit_4(tmp_path):
    assert _run(tmp_path, "spectrum", "--set", "m=0.9", *SMALL)[0] == 4


def test_fgr_zero_beta_is_degenerate(tmp_path, capsys):
    code, rep, _ = _run(tmp_path, "fgr", "--preset", "zero-beta", *SMALL)
    assert code == 2
    assert "degenerate" in capsys.readouterr().err


def test_fgr_slow_mode_report(tmp_path):
    code, rep, _ = _run(tmp_path, "fgr", "--preset", "pt-slow")
    assert code == 0
    f = rep["fgr"]
    assert f["H7"] is True
    assert f["gamma_mu"]["[3]"] > 0
    assert f["gamma_mu_distorted"]["[3]"] == pytest.approx(f["gamma_mu"]["[3]"], rel=0.02)
    assert not f["flagged_energies"]


def test_fgr_scan_writes_csv(tmp_path):
    code, rep, out = _run(tmp_path, "fgr", "--preset", "pt-slow",
                          "--set", "fgr.scan={values: [-1.0, 0.0, 1.0, 2.0], mu: [3]}")
    assert code == 0
    rows = (out / "genericity_scan.csv").read_text().splitlines()
    assert rows[0] == "beta4,gamma_mu,fit_residual" and len(rows) == 5
    assert rep["genericity_scan"]["relative_residual"] < 1e-6


def test_evolve_reduced_closed_form(tmp_path):
    code, rep, out = _run(tmp_path, "evolve", "--preset", "reduced-single")
    assert code == 0
    assert rep["reduced"]["relative_error"] < 1e-6
    assert (out / "reduced.csv").exists()


def test_evolve_pde_zero_beta(tmp_path):
    code, rep, out = _run(tmp_path, "evolve", "--preset", "zero-beta", *SMALL,
                          "--set", "dynamics.mode=pde", "--set", "dynamics.T=5")
    assert code == 0
    assert rep["pde"]["energy_drift_relative"] < 1e-12
    assert (out / "pde_series.csv").exists() and (out / "energy.png").exists()


def test_evolve_both_reports_comparison(tmp_path):
    code, rep, _ = _run(tmp_path, "evolve", "--preset", "pt-slow", "--set", "dynamics.T=20",
                        "--set", "dynamics.sample_dt=0.5")
    assert code == 0
    cmp_ = rep["comparison"]
    for key in ("pde_exponent", "reduced_exponent", "divergence_time", "transfer_ratio"):
        assert key in cmp_


def test_reproducible_csv(tmp_path):
    args = ["evolve", "--preset", "pt-single", *SMALL, "--set", "dynamics.mode=pde", "--set", "dynamics.T=3",
            "--set", "dynamics.random_phase=true", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "pde_series.csv").read_bytes()
    b = (tmp_path / "b" / "pde_series.csv").read_bytes()
    assert a == b
    assert main(args[:-1] + ["8", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "pde_series.csv").read_bytes() != a


def test_cache_reuse(tmp_path, monkeypatch):
    monkeypatch.setenv("NLKG_LAB_CACHE", str(tmp_path / "cache"))
    assert main(["spectrum", "--preset", "pt-single", *SMALL, "--out", str(tmp_path / "a")]) == 0
    files = list((tmp_path / "cache").glob("spectrum_*.npz"))
    assert len(files) == 1
    stamp = files[0].stat().st_mtime_ns
    assert main(["spectrum", "--preset", "pt-single", *SMALL, "--out", str(tmp_path / "b")]) == 0
    assert files[0].stat().st_mtime_ns == stamp
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    assert np.allclose(ra["spectrum"]["omega"], rb["spectrum"]["omega"], rtol=0, atol=1e-12)


def test_sweep(tmp_path):
    code = main(["sweep", "--preset", "pt-single", *SMALL, "--param", "potential.depth",
                 "--values", "2.0,6.0", "--out", str(tmp_path / "sw")])
    rep = json.loads((tmp_path / "sw" / "report.json").read_text())
    runs = rep["sweep"]["runs"]
    assert len(runs) == 2 and code == max(r["exit_code"] for r in runs)
    assert (tmp_path / "sw" / "run_000" / "report.json").exists()


def test_yaml_config_file(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("potential: {preset: poschl_teller, depth: 2.0}\nm: 1.25\ngrid: {L: 20.0, N: 256}\n")
    code = main(["spectrum", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 0


def test_presets_validate():
    for name in PRESETS:
        load_config(None, name)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nlkg_lab.cli", "spectrum", "--preset", "free", *SMALL,
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
