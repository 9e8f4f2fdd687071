"""Command-line front end: stability, volterra, echo-kernel, simulate, diagnose.

Each run reads an INI configuration, writes its artifacts atomically into
--out, and always leaves a manifest.json echoing the resolved configuration.
Exit status: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import HypothesisError, NumericalError, RegimeWarning, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


# ---------------------------------------------------------------------------
# configuration schema

def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in text.replace(";", ",").split(",") if x.strip())


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t
    return parse


SCHEMA = {
    "model": {
        "equilibrium": (_choice("maxwellian", "table"), "maxwellian"),
        "dimension": (int, 3),
        "temperature": (float, 1.0),
        "mass": (float, 1.0),
        "table": (str, ""),
        "decay_exponent": (float, 0.0),
        "potential": (_choice("screened", "zero"), "screened"),
        "alpha": (float, 1.0),
        "scale": (float, 1.0),
    },
    "run": {
        "seed": (int, 0),
        "version_tag": (str, ""),
    },
    "stability": {
        "kmags": (_floats, (0.25, 1.0, 4.0)),
        "n_band": (int, 48),
        "agreement_tol": (float, 1e-6),
        "strict": (_bool, False),
    },
    "volterra": {
        "kmags": (_floats, (0.25, 1.0, 4.0)),
        "dt": (float, 0.01),
        "t_star": (float, 40.0),
        "family": (_choice("a_bump", "gaussian"), "a_bump"),
        "alpha": (float, 0.0),
        "s": (float, 4.0),
        "compare_frequency": (_bool, True),
    },
    "echo": {
        "beta": (float, 12.0),
        "zeta": (float, 0.9),
        "dimension": (int, 3),
        "prefactor": (float, 1.0),
        "times": (_floats, (10.0, 20.0, 40.0, 80.0)),
        "kmags": (_floats, (0.25, 1.0, 4.0, 16.0)),
        "taus": (_floats, (0.0, 1.0, 5.0)),
        "oracle": (_bool, True),
        "lattice_time": (float, 40.0),
        "lattice_radius": (int, 12),
    },
    "simulate": {
        "L_box": (float, 4 * math.pi),
        "N_z": (int, 32),
        "N_v": (int, 256),
        "v_max": (float, 10.0),
        "dt": (float, 0.05),
        "T_end": (float, 20.0),
        "epsilon": (float, 1e-3),
        "mode": (_choice("nonlinear", "linearized", "free"), "nonlinear"),
        "record_every": (int, 1),
        "snapshot_every": (int, 0),
    },
    "seed": {
        "amplitude": (float, 1.0),
        "k_center": (_floats, (0.5,)),
        "eta_center": (_floats, ()),
        "eta_width": (float, 1.0),
        "k_width": (float, 0.0),
        "shape": (_choice("gaussian", "sech"), "gaussian"),
        "phase": (float, 0.0),
    },
    "diagnose": {
        "run_dir": (str, ""),
        "bootstrap": (_bool, True),
        "sigma1": (float, 11.0),
        "sigma2": (float, 17.0),
        "sigma3": (float, 23.0),
        "sigma4": (float, 29.0),
        "sigma_bar": (float, 35.0),
        "M": (int, 2),
        "delta": (float, 0.1),
        "K": (_floats, (1.0, 1.0, 1.0, 1.0, 1.0)),
        "dispersive_alpha": (float, 0.0),
        "dispersive_gamma": (float, 0.0),
        "decay_mode": (_ints, (1,)),
    },
}

REQUIRED = {
    "stability": ("model",),
    "volterra": ("model",),
    "echo-kernel": (),
    "simulate": ("model",),
    "diagnose": ("diagnose",),
}


def _section_kind(name):
    return "seed" if name == "seed" or name.startswith("seed.") else name


def load_config(path) -> dict:
    """Parse and type-check an INI file; unknown sections or keys are errors."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ValidationError(f"malformed config: {exc}") from exc
    resolved = {}
    for name in parser.sections():
        kind = _section_kind(name)
        if kind not in SCHEMA:
            raise ValidationError(f"unknown section: {name}")
        schema = SCHEMA[kind]
        values = {}
        for key, raw in parser.items(name):
            if key not in schema:
                raise ValidationError(f"unknown key in [{name}]: {key}")
            conv = schema[key][0]
            try:
                values[key] = conv(raw)
            except ValueError as exc:
                raise ValidationError(f"bad value for [{name}] {key}: {exc}") from exc
        resolved[name] = values
    return resolved


def _section(cfg, name, kind=None):
    schema = SCHEMA[kind or name]
    given = cfg.get(name, {})
    return {k: given.get(k, default) for k, (conv, default) in schema.items()}


def _require(cfg, command):
    for name in REQUIRED[command]:
        if name not in cfg:
            raise ValidationError(f"missing section: {name}")


# ---------------------------------------------------------------------------
# output helpers

def _write_atomic(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    _write_atomic(path, buf.getvalue().encode("utf-8"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _write_json(path: Path, obj):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
    _write_atomic(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# model construction

def _build_model(cfg, dimension=None):
    from .model import Equilibrium, Potential, load_radial_table

    m = _section(cfg, "model")
    d = dimension or m["dimension"]
    if m["equilibrium"] == "maxwellian":
        eq = Equilibrium.maxwellian(d, m["temperature"], m["mass"])
    else:
        if not m["table"]:
            raise ValidationError("[model] table is required for a tabulated equilibrium")
        r, f = load_radial_table(m["table"])
        eq = Equilibrium.from_table(r, f, dimension=d, decay_exponent=m["decay_exponent"])
    pot = Potential.screened(m["alpha"], m["scale"]) if m["potential"] == "screened" else Potential.zero()
    return eq, pot


# ---------------------------------------------------------------------------
# subcommands

def cmd_stability(cfg, out: Path, threads: int, strict: bool):
    from .dispersion import DispersionGrid, stability_margin

    _require(cfg, "stability")
    eq, pot = _build_model(cfg)
    st = _section(cfg, "stability")
    grid = DispersionGrid.standard(kmags=st["kmags"], n_band=st["n_band"])
    rep = stability_margin(eq, pot, grid, agreement_tol=st["agreement_tol"], strict=st["strict"] or strict,
                           threads=threads)
    _write_json(out / "stability.json", rep.to_dict())
    _write_csv(out / "stability_rows.csv", ["omega", "kmag", "zone", "abs_L_minus_1", "re_L", "im_L", "discrepancy"],
               rep.rows)
    return ["stability.json", "stability_rows.csv"], {"kappa": rep.kappa, "unstable": rep.unstable}


def cmd_volterra(cfg, out: Path, threads: int, strict: bool):
    from . import volterra as vt

    _require(cfg, "volterra")
    eq, pot = _build_model(cfg)
    v = _section(cfg, "volterra")
    if strict and not v["s"] > 4:
        raise HypothesisError(f"strict regime: need s > 4, got s={v['s']}")
    study = vt.damping_study(eq, pot, v["family"], v["alpha"], v["s"], v["kmags"], t_star=v["t_star"], dt=v["dt"],
                             threads=threads)
    fam = vt.forcing_family(v["family"])
    rows, series = [], []
    agreement = {}
    for km in v["kmags"]:
        worst = 0.0
        for H in fam:
            prob = vt.VolterraProblem.build(eq, pot, km, H, v["dt"], v["t_star"], alpha=v["alpha"], s=v["s"])
            a = vt.solve_time(prob).phi
            wabs = prob.weight() * np.abs(a)
            series.extend([km, H.label, t, z.real, z.imag, w] for t, z, w in zip(prob.times, a, wabs))
            if v["compare_frequency"]:
                b = vt.solve_frequency(prob).phi
                worst = max(worst, float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300)))
        row = [km, study.per_k[float(km)], study.per_k_doubled[float(km)]]
        if v["compare_frequency"]:
            agreement[float(km)] = worst
            row.append(worst)
        rows.append(row)
    header = ["kmag", "ratio_T", "ratio_2T"] + (["time_vs_frequency"] if v["compare_frequency"] else [])
    _write_csv(out / "damping.csv", header, rows)
    _write_csv(out / "phi.csv", ["kmag", "forcing", "t", "re_phi", "im_phi", "weighted_abs_phi"], series)
    report = {"alpha": v["alpha"], "s": v["s"], "t_star": v["t_star"], "damping_constant": study.value,
              "doubled": study.doubled_value, "drift": study.drift, "stable": study.stable,
              "cld_ratio_per_k": study.per_k, "route_agreement": agreement}
    _write_json(out / "volterra.json", report)
    return ["damping.csv", "phi.csv", "volterra.json"], {"stable": study.stable}


def cmd_echo(cfg, out: Path, threads: int, strict: bool):
    from . import echo

    e = _section(cfg, "echo")
    if strict and not (e["beta"] > 10 and 0.8 < e["zeta"] < 1):
        raise HypothesisError(f"strict regime: need beta > 10 and zeta in (4/5, 1); got beta={e['beta']}, zeta={e['zeta']}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        params = echo.EchoParams(e["beta"], e["zeta"], dimension=e["dimension"], horizon=max(e["times"]),
                                 prefactor=e["prefactor"], enforce_regime=False)
    verdict = echo.regime_study(params, times=e["times"], kmags=e["kmags"], taus=e["taus"],
                                with_oracle=e["oracle"], threads=threads)
    rows = []
    for dec, orc in verdict.rows + verdict.columns:
        probe = ";".join(_fmt(x) for x in dec.probe)
        oracle = orc.total if orc is not None else math.nan
        rows.append([dec.mode, probe, dec.early, dec.resonant, dec.nonresonant, dec.total, oracle,
                     dec.resonant_share])
    _write_csv(out / "echo_probes.csv",
               ["mode", "probe", "early", "resonant", "nonresonant", "decomposed", "oracle", "resonant_share"], rows)
    ratio_rows = [[T, rs, cs] for T, rs, cs in zip(verdict.horizons, verdict.row_sups, verdict.column_sups)]
    _write_csv(out / "echo_ratios.csv", ["horizon", "row_running_sup", "column_sup"], ratio_rows)
    lat = echo.lattice_row_sum(e["lattice_time"], np.eye(e["dimension"])[0], params, radius=e["lattice_radius"])
    cont = echo.row_sum(e["lattice_time"], 1.0, params)
    summary = verdict.to_dict()
    summary.update({
        "in_regime": params.in_regime,
        "b": params.b,
        "probe_set": {"times": e["times"], "kmags": e["kmags"], "taus": e["taus"]},
        "lattice": {"time": e["lattice_time"], "radius": e["lattice_radius"], "total": lat.total,
                    "resonant_share": lat.resonant_share, "tail_bound": lat.tail_bound,
                    "continuum_resonant_share": cont.resonant_share},
    })
    _write_json(out / "echo_verdict.json", summary)
    return ["echo_probes.csv", "echo_ratios.csv", "echo_verdict.json"], {"stabilized": verdict.stabilized}


def _seed_from_config(cfg, d):
    from .simulator import SeedComponent, SeedSpec

    comps = []
    for name in sorted(n for n in cfg if _section_kind(n) == "seed"):
        s = _section(cfg, name, "seed")
        kc = tuple(s["k_center"])
        ec = tuple(s["eta_center"]) or (0.0,) * len(kc)
        if len(kc) != d or len(ec) != d:
            raise ValidationError(f"[{name}] centers must have {d} components")
        comps.append(SeedComponent(s["amplitude"], kc, ec, s["eta_width"], s["k_width"], s["shape"], s["phase"]))
    if not comps:
        raise ValidationError("missing section: seed")
    return SeedSpec(tuple(comps))


def _sim_config(cfg):
    from .simulator import SimConfig

    m = _section(cfg, "model")
    d = m["dimension"]
    eq, pot = _build_model(cfg, d)
    s = _section(cfg, "simulate")
    return SimConfig(dimension=d, L_box=s["L_box"], N_z=s["N_z"], N_v=s["N_v"], v_max=s["v_max"], dt=s["dt"],
                     T_end=s["T_end"], epsilon=s["epsilon"], mode=s["mode"], potential=pot, equilibrium=eq,
                     seed=_seed_from_config(cfg, d), record_every=s["record_every"],
                     keep_states_every=s["snapshot_every"]), s


def _density_rows(hist, sim):
    g = sim.grid
    idx = np.argwhere(g.kmask)
    rows = []
    for t, rho, F in zip(hist.times, hist.rho_hat, hist.force_hat):
        for ix in idx:
            ix = tuple(ix)
            m = [int(round(g.k[ix][a] / (2 * math.pi / sim.cfg.L_box))) for a in range(g.d)]
            rows.append([t, ";".join(str(x) for x in m), rho[ix].real, rho[ix].imag, float(np.linalg.norm(F[ix]))])
    return rows


def cmd_simulate(cfg, out: Path, threads: int, strict: bool):
    from .simulator import Simulator, write_snapshot

    _require(cfg, "simulate")
    if "simulate" not in cfg:
        raise ValidationError("missing section: simulate")
    sc, s = _sim_config(cfg)
    sim = Simulator(sc)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        final, hist = sim.run()
    artifacts = ["density.csv"]
    _write_csv(out / "density.csv", ["t", "k", "re_rho", "im_rho", "abs_force"], _density_rows(hist, sim))
    for i, st in enumerate(hist.states):
        name = f"snap_{i:05d}.bin"
        write_snapshot(out / name, st, sc)
        artifacts.append(name)
    meta = sc.metadata()
    meta["mass_drift"] = abs(final.mass - complex(sim.initial_state().mass))
    meta["reality_defect"] = final.reality_defect()
    meta["warnings"] = [str(w.message) for w in caught]
    return artifacts, meta


def cmd_diagnose(cfg, out: Path, threads: int, strict: bool):
    from . import diagnostics as dg
    from .simulator import DensityHistory, Simulator, read_snapshot

    _require(cfg, "diagnose")
    dcfg = _section(cfg, "diagnose")
    run_dir = Path(dcfg["run_dir"])
    try:
        manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read run manifest in {run_dir}: {exc}") from exc
    if manifest.get("subcommand") != "simulate" or manifest.get("status") != "ok":
        raise ValidationError("diagnose needs the manifest of a successful simulate run")
    sc, _ = _sim_config(manifest["config"])
    sim = Simulator(sc)
    hist = DensityHistory(kgrid=sim.grid.k)
    L = sc.L_box
    with open(run_dir / "density.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    by_time = {}
    for r in rows:
        t = float(r["t"])
        if t not in by_time:
            by_time[t] = np.zeros(sim.grid.kmag.shape, dtype=complex)
        m = tuple(int(x) for x in r["k"].split(";"))
        by_time[t][hist.mode_index(m)] = complex(float(r["re_rho"]), float(r["im_rho"]))
    for t in sorted(by_time):
        hist.times.append(t)
        hist.rho_hat.append(by_time[t])
    states = [read_snapshot(run_dir / a)[0] for a in manifest.get("artifacts", []) if a.startswith("snap_")]
    report = {"run_dir": str(run_dir)}
    if dcfg["bootstrap"]:
        spec = dg.BootstrapSpec(dcfg["sigma1"], dcfg["sigma2"], dcfg["sigma3"], dcfg["sigma4"], dcfg["sigma_bar"],
                                dcfg["M"], dcfg["delta"], tuple(dcfg["K"]), sc.epsilon)
        report["bootstrap"] = dg.bootstrap_norms(hist, states, spec, sim).to_dict()
    dk = 2 * math.pi / L
    times, integral = dg.dispersive_integral(hist, dcfg["dispersive_alpha"], dcfg["dispersive_gamma"], dk, sc.dimension)
    fit = dg.dispersive_decay_check(hist, dcfg["dispersive_alpha"], dcfg["dispersive_gamma"], dcfg["sigma1"], dk=dk,
                                    dimension=sc.dimension)
    report["dispersive_fit"] = vars(fit)
    _, series = hist.series(dcfg["decay_mode"])
    mag = np.abs(series)
    floor = 1e-12 * float(mag.max()) if mag.size and mag.max() > 0 else 0.0
    keep = mag > floor
    report["mode_fits"] = {
        "mode": list(dcfg["decay_mode"]),
        "power": vars(dg.decay_fit((np.asarray(times)[keep], mag[keep]), "power", against="bracket")),
        "exponential": vars(dg.decay_fit((np.asarray(times)[keep], mag[keep]), "exponential")),
    }
    _write_json(out / "diagnostics.json", report)
    _write_csv(out / "decay.csv", ["t", "dispersive_integral", "abs_rho_mode"],
               [[t, v, a] for t, v, a in zip(times, integral, mag)])
    return ["diagnostics.json", "decay.csv"], {}


COMMANDS = {
    "stability": cmd_stability,
    "volterra": cmd_volterra,
    "echo-kernel": cmd_echo,
    "simulate": cmd_simulate,
    "diagnose": cmd_diagnose,
}


def build_parser():
    p = argparse.ArgumentParser(prog="landaukit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="INI configuration file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (1 gives byte-identical output)")
        sp.add_argument("--strict-regime", action="store_true",
                        help="treat beta <= 10, zeta outside (4/5,1) and s <= 4 as errors")
    return p


def run(command, config_path, out_dir, *, threads=1, strict_regime=False) -> int:
    out = Path(out_dir)
    manifest = {
        "tool": "landaukit",
        "version": __version__,
        "subcommand": command,
        "config_path": str(config_path),
        "threads": threads,
        "strict_regime": strict_regime,
    }
    status = EXIT_OK
    try:
        if threads < 1:
            raise ValidationError("--threads must be >= 1")
        cfg = load_config(config_path)
        if command != "echo-kernel" and command != "diagnose" and "model" not in cfg:
            raise ValidationError("missing section: model")
        if command == "echo-kernel" and "echo" not in cfg:
            raise ValidationError("missing section: echo")
        manifest["config"] = {name: _section(cfg, name, _section_kind(name)) for name in cfg}
        manifest["version_tag"] = _section(cfg, "run")["version_tag"]
        artifacts, meta = COMMANDS[command](cfg, out, threads, strict_regime)
        manifest.update(status="ok", artifacts=artifacts, metadata=meta)
    except ValidationError as exc:
        status = EXIT_VALIDATION
        manifest.update(status="validation_error", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
    except NumericalError as exc:
        status = EXIT_NUMERICAL
        manifest.update(status="numerical_error", error=f"{type(exc).__name__}: {exc}")
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
    try:
        _write_json(out / "manifest.json", manifest)
    except OSError as exc:
        print(f"error: cannot write manifest: {exc}", file=sys.stderr)
        status = status or EXIT_VALIDATION
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.out, threads=args.threads, strict_regime=args.strict_regime)


if __name__ == "__main__":
    sys.exit(main())
