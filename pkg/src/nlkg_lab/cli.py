"""Command-line front end: ``nlkg-lab {spectrum,fgr,evolve,sweep}``.

Each command resolves a configuration (defaults, ``--preset``, file,
``--set`` overrides), runs its part of the pipeline and writes
``report.json`` / ``report.txt`` plus CSV series and PNG figures into the
output directory.  Exit codes: 0 success, 2 hypothesis violation, 3
numerical resolution or instability, 4 configuration or domain error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .cache import cached_spectrum
from .config import PRESETS, config_hash, load_config, set_dotted
from .dynamics import (ReducedModel, Scenario, compare_pde_vs_reduced, integrate_reduced, run_pde,
                       single_mode_decay)
from .errors import DegenerateNonlinearity, HypothesisViolation, LabError
from .grid_spectral import Grid1D, Potential
from .hamiltonian_jets import Nonlinearity
from .normalform import leading_coupling_check, normalize_from_spectrum
from .report import write_report
from .resonance import check_H4_H5, enumerate_M, minimal_resonant
from .scattering_fgr import fgr_matrix, genericity_scan, model_coefficients

log = logging.getLogger("nlkg_lab")


# ---------------------------------------------------------------------------
# pipeline pieces
# ---------------------------------------------------------------------------
def build_nonlinearity(cfg) -> Nonlinearity:
    sec = cfg["nonlinearity"]
    if "derivatives" in sec:
        return Nonlinearity({int(k): float(v) for k, v in sec["derivatives"].items()},
                            allow_cubic=bool(sec.get("allow_cubic", False)), name="taylor")
    name = sec["preset"]
    if name == "power":
        return Nonlinearity.power(int(sec.get("p", 4)), float(sec.get("coefficient", 1.0)))
    if name == "zero":
        return Nonlinearity.zero()
    from .errors import ConfigurationError

    raise ConfigurationError(f"unknown nonlinearity preset {name!r}; use 'power', 'zero' or 'derivatives'")


def build_spectrum(cfg):
    grid = Grid1D(float(cfg["grid"]["L"]), int(cfg["grid"]["N"]))
    params = {k: v for k, v in cfg["potential"].items() if k != "preset"}
    pot = Potential.preset(grid, cfg["potential"]["preset"], **params)
    return cached_spectrum(grid, pot, float(cfg["m"]), cfg["tolerances"].get("tol_edge"))


def _header(cfg, command):
    return {"command": command, "version": __version__, "config_sha256": config_hash(cfg), "config": cfg}


def _spectral_section(cfg, S):
    sec = {"spectrum": S.summary()}
    if S.n == 0:
        sec["note"] = "no bound states; trivial scattering regime"
        return sec, None
    if not S.h2_holds:
        raise HypothesisViolation("H2 fails: an eigenvalue of -Lap + V lies at the threshold 0", "H2")
    tol = float(cfg["tolerances"]["tol_res"])
    rep = check_H4_H5(S.omega, S.m, tol=tol)
    sec["resonance"] = rep.as_dict()
    rep.raise_if_violated()
    sets = enumerate_M(S.omega, S.m, tol=tol)
    sec["multi_indices"] = sets.as_dict()
    return sec, sets


def cmd_spectrum(cfg, out: Path) -> dict:
    from .plotting import plot_spectrum

    S = build_spectrum(cfg)
    data = _header(cfg, "spectrum")
    try:
        sec, _ = _spectral_section(cfg, S)
        data.update(sec)
    except HypothesisViolation as exc:
        data["violation"] = {"hypothesis": exc.hypothesis, "witness": exc.witness, "message": str(exc)}
        write_report(out, data)
        raise
    out.mkdir(parents=True, exist_ok=True)
    plot_spectrum(S, out / "spectrum.png")
    data["files"] = ["report.json", "report.txt", "spectrum.png"]
    return write_report(out, data)


def _fgr_stage(cfg, S, sets, nl, data, out: Path):
    r = cfg["normal_form"].get("r")
    D = cfg["normal_form"].get("D_jet")
    nf = normalize_from_spectrum(S, nl, sets, r=r, D_jet=D)
    mu = minimal_resonant(sets)
    data["normal_form"] = nf.summary()
    data["normal_form"]["coupling_norms"] = {str(list(m)): float(np.linalg.norm(nf.coupling(m))) for m in sets.M}
    if not nl.is_zero():
        chk = leading_coupling_check(S, nf, nl, mu=mu)
        data["leading_coupling"] = {k: v for k, v in chk.items() if k != "shape"}
    fgr = fgr_matrix(S, nf, sets, rtol_methods=float(cfg["tolerances"]["fgr_methods"]),
                     rtol_agree=float(cfg["tolerances"]["density_agreement"]))
    data["fgr"] = fgr.as_dict()
    scan_cfg = cfg["fgr"].get("scan")
    if scan_cfg:
        from .plotting import plot_scan

        base = nl if not scan_cfg.get("allow_cubic") else Nonlinearity(nl.derivs, allow_cubic=True)
        scan = genericity_scan(S, sets, base, [float(v) for v in scan_cfg["values"]], mu=scan_cfg.get("mu"), r=r)
        scan.to_csv(out / "genericity_scan.csv")
        plot_scan(scan, out / "genericity_scan.png")
        data["genericity_scan"] = scan.as_dict()
    return nf, fgr


def cmd_fgr(cfg, out: Path) -> dict:
    S = build_spectrum(cfg)
    nl = build_nonlinearity(cfg)
    data = _header(cfg, "fgr")
    out.mkdir(parents=True, exist_ok=True)
    sec, sets = _spectral_section(cfg, S)
    data.update(sec)
    if sets is None:
        return write_report(out, data)
    nf, fgr = _fgr_stage(cfg, S, sets, nl, data, out)
    data["verdict"] = {"H7": fgr.H7, "H7_prime": fgr.H7_prime, "H7_double_prime": fgr.H7_double_prime}
    write_report(out, data)
    if nl.is_zero():
        raise DegenerateNonlinearity("beta = 0: every coupling vanishes, Gamma = 0 and H7 fails", "H7")
    if not fgr.H7:
        raise HypothesisViolation(f"H7 fails: Gamma matrices {fgr.min_eigs} not positive definite", "H7")
    return data


def _xi0(cfg, n):
    d = cfg["dynamics"]
    amp = np.zeros(n, dtype=complex)
    a = list(d.get("amplitudes") or [1.0])
    amp[:min(n, len(a))] = a[:n]
    if d.get("random_phase"):
        rng = np.random.default_rng(int(cfg["seed"]))
        amp = amp * np.exp(2j * np.pi * rng.random(n))
    return float(d["eps"]) * amp


def _write_series(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{x:.15g}" for x in row])


def cmd_evolve(cfg, out: Path) -> dict:
    from .plotting import plot_energy

    d = cfg["dynamics"]
    data = _header(cfg, "evolve")
    out.mkdir(parents=True, exist_ok=True)
    files = ["report.json", "report.txt"]
    rm = d.get("reduced_model")
    if d["mode"] == "reduced" and rm:
        # stand-alone single-mode model
        model = ReducedModel.single_mode(float(rm.get("omega", 0.5)), int(rm["p"]), float(rm["gamma"]))
        y0 = float(rm.get("y0", 1.0))
        T = float(d["T"])
        ts = np.linspace(0.0, T, 101)
        sol = integrate_reduced(model, [np.sqrt(y0)], T, t_eval=ts)
        y = np.abs(sol.y[0]) ** 2
        exact = single_mode_decay(y0, float(rm["gamma"]), int(rm["p"]), ts)
        _write_series(out / "reduced.csv", ["t", "abs_eta_sq", "closed_form"], zip(ts, y, exact))
        data["reduced"] = {"final_abs_eta_sq": float(y[-1]), "closed_form": float(exact[-1]),
                           "relative_error": float(abs(y[-1] - exact[-1]) / exact[-1])}
        data["files"] = files + ["reduced.csv"]
        return write_report(out, data)

    S = build_spectrum(cfg)
    nl = build_nonlinearity(cfg)
    sec, sets = _spectral_section(cfg, S)
    data.update(sec)
    if sets is None:
        data["note"] = "no discrete modes to evolve"
        return write_report(out, data)
    xi0 = _xi0(cfg, S.n)
    T, dt = float(d["T"]), float(d["dt"])
    sponge = d.get("sponge")
    if sponge == "auto":
        sponge = 1.0 if T > S.grid.half_width else None
    elif sponge is False:
        sponge = None
    nf = normalize_from_spectrum(S, nl, sets, r=cfg["normal_form"].get("r"), D_jet=cfg["normal_form"].get("D_jet"))
    mc = model_coefficients(S, nf, sets, with_Y=False)
    model = ReducedModel.from_normal_form(nf, mc, float(cfg["tolerances"]["tol_res"]))
    if d["mode"] in ("pde", "both"):
        if d["mode"] == "both":
            sc = Scenario(S, nl, model, list(sets.M_hat), xi0, T, dt, float(d["sample_dt"]), sponge)
            cmp_ = compare_pde_vs_reduced(sc)
            diag = cmp_["_diag"]
            data["comparison"] = cmp_
            red = cmp_["_reduced_H0L"]
            series = {"PDE sum omega |xi|^2": diag.H0L, "reduced H_0L": red}
        else:
            diag, *_ = run_pde(S, nl, xi0, T, dt, float(d["sample_dt"]), sponge, list(sets.M_hat), model)
            series = {"PDE sum omega |xi|^2": diag.H0L}
        diag.to_csv(out / "pde_series.csv")
        H = np.array(diag.H)
        data["pde"] = {"energy_drift_relative": float(np.max(np.abs(H - H[0])) / abs(H[0])) if H[0] else 0.0,
                       "sponge": sponge,
                       "l2_xi_mu": {str(list(m)): diag.l2_norm(m) for m in sets.M_hat}}
        plot_energy(diag.t, series, out / "energy.png", loglog=True)
        files += ["pde_series.csv", "energy.png"]
    else:
        ts = np.arange(0.0, T + 1e-12, float(d["sample_dt"]))
        sol = integrate_reduced(model, xi0, T, t_eval=ts)
        H0 = [model.H0L(e) for e in sol.y.T]
        _write_series(out / "reduced.csv", ["t", "H0L"], zip(ts, H0))
        data["reduced"] = {"H0L_initial": H0[0], "H0L_final": H0[-1]}
        files += ["reduced.csv"]
    data["files"] = files
    return write_report(out, data)


COMMANDS = {"spectrum": cmd_spectrum, "fgr": cmd_fgr, "evolve": cmd_evolve}


def _sweep_job(args):
    command, cfg, out = args
    try:
        COMMANDS[command](cfg, Path(out))
        return out, 0, ""
    except LabError as exc:
        return out, exc.exit_code, str(exc)


def cmd_sweep(cfg, out: Path, param: str, values, command: str, jobs: int = 1) -> dict:
    """Run ``command`` for each value of the dotted ``param``, one subdirectory per run."""
    tasks = []
    for i, v in enumerate(values):
        c = set_dotted(cfg, param, v)
        c["output"]["dir"] = str(out / f"run_{i:03d}")
        tasks.append((command, c, c["output"]["dir"]))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_job, tasks))
    else:
        results = [_sweep_job(t) for t in tasks]
    data = _header(cfg, "sweep")
    data["sweep"] = {"param": param, "command": command,
                     "runs": [{"value": v, "dir": o, "exit_code": code, "error": msg}
                              for v, (o, code, msg) in zip(values, results)]}
    return write_report(out, data)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------
def _parse_set(items):
    over = {}
    for item in items or []:
        if "=" not in item:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        over = set_dotted(over, key.strip(), yaml.safe_load(raw))
    return over


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlkg-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", nargs="?", help="YAML configuration file")
    common.add_argument("--preset", choices=sorted(PRESETS), help="named configuration preset")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="random seed (overrides seed)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a dotted config key")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="bound states, resonances, multi-index sets")
    sub.add_parser("fgr", parents=[common], help="normal form, FGR matrices and H7 verdicts")
    sub.add_parser("evolve", parents=[common], help="PDE and/or reduced-model evolution")
    sw = sub.add_parser("sweep", parents=[common], help="run a command over values of one config key")
    sw.add_argument("--param", required=True, help="dotted key, e.g. potential.depth")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--run", default="spectrum", choices=sorted(COMMANDS))
    sw.add_argument("--jobs", type=int, default=1)
    return p


def main(argv: Optional[list] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        over = _parse_set(args.set)
        if args.seed is not None:
            over["seed"] = args.seed
        if args.out:
            over = set_dotted(over, "output.dir", args.out)
        cfg = load_config(args.config, args.preset, over)
        out = Path(cfg["output"]["dir"])
        if args.command == "sweep":
            vals = [yaml.safe_load(v) for v in args.values.split(",")]
            data = cmd_sweep(cfg, out, args.param, vals, args.run, args.jobs)
            codes = [r["exit_code"] for r in data["sweep"]["runs"]]
            print(f"sweep: {len(codes)} runs, {sum(c == 0 for c in codes)} succeeded; report in {out}")
            return max(codes) if codes else 0
        COMMANDS[args.command](cfg, out)
        print(f"{args.command}: report written to {out}")
        return 0
    except DegenerateNonlinearity as exc:
        print(f"error: degenerate nonlinearity: {exc}", file=sys.stderr)
        return exc.exit_code
    except HypothesisViolation as exc:
        print(f"error: hypothesis {exc.hypothesis} violated: {exc}", file=sys.stderr)
        return exc.exit_code
    except LabError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
