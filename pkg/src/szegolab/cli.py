"""Command line entry point: ``szegolab <subcommand> --config run.yaml --out dir``."""

import argparse
import csv
import json
import math
import os
import subprocess
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .analysis import DEFAULT_FLOOR, NoBlowupTrend, TailNotResolved, blowup_extrapolate, growth_rate_fit, late_window, tail_fits
from .config import ConfigError, load_config
from .flow import Termination, integrate
from .lax import k_spectrum, lax_residual
from .manifold import (
    ManifoldState,
    Regime,
    blowup_family,
    category,
    closed_form,
    integrate_reduced,
    omega,
    potential_of,
    reduced_charges,
)
from .state import ChargeSet, ModeState, charges, fmt

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_DIAGNOSTIC = 4


class DiagnosticFailure(RuntimeError):
    pass


def version_string():
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        rev = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--abbrev=12"],
            cwd=here, capture_output=True, text=True, timeout=5, check=True,
        ).stdout.strip()
        return f"{__version__}+g{rev}" if rev else __version__
    except (OSError, subprocess.SubprocessError):
        return __version__


def _csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, (str, int)) and not isinstance(v, bool) else fmt(v) for v in r])


def _json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not serializable: {type(o)}")


def _manifest(cfg, args, command, **extra):
    doc = {
        "command": command,
        "version": version_string(),
        "config": cfg.raw,
        "kernel": cfg.kernel.to_dict(),
        "controls": cfg.controls.to_dict(),
        "nmax": cfg.nmax,
        "seed": args.seed,
        "threads": args.threads,
    }
    doc.update(extra)
    return doc


def _potential_report(cfg):
    ms = cfg.initial.manifold_state() if cfg.initial is not None else None
    beta = cfg.kernel.manifold_beta
    if ms is None or beta is None:
        return None
    N, E, S, H = reduced_charges(beta, ms)
    report = {"beta": beta, "b": ms.b, "a": ms.a, "p": ms.p, "N": N, "E": E, "S": S, "H": H}
    try:
        pot = potential_of(beta, ms)
        report["coefficients"] = list(pot.coeffs)
        report["roots"] = [complex(r) for r in pot.roots]
        report["regime"] = pot.regime.value
        report["category"] = category(pot, ms.x).value
        if pot.regime == Regime.INFINITE_TIME_BLOWUP:
            form = closed_form(pot, ms.x)
            report["closed_form"] = form.kind
            report["omega" if form.kind == "cosh" else "c_tilde"] = form.rate
    except ValueError as exc:
        report["regime"] = Regime.INVALID.value
        report["reason"] = str(exc)
    return report


# -- subcommands --------------------------------------------------------------


def write_trajectory(out, cfg, traj):
    s_list = cfg.controls.s_list
    ch_header = ChargeSet.header(s_list)
    _csv(os.path.join(out, "charges.csv"), ["t"] + ch_header,
         ([t] + c.as_row(s_list) for t, c in zip(traj.times, traj.charges)))
    mode_cols = [f"abs_a{n}" for n in cfg.diagnostics.modes]
    sob_cols = [f"H^{s:g}" for s in s_list]
    rows = []
    for t, a, c in zip(traj.times, traj.states, traj.charges):
        rows.append([t] + [abs(a[n]) for n in cfg.diagnostics.modes] + [c.sobolev[s] for s in s_list] + [c.tail_mass])
    _csv(os.path.join(out, "trajectory.csv"), ["t"] + mode_cols + sob_cols + ["tail_mass"], rows)
    if cfg.diagnostics.store_states:
        rows = ([t, n, z.real, z.imag] for t, a in zip(traj.times, traj.states) for n, z in enumerate(a))
        _csv(os.path.join(out, "states.csv"), ["t", "n", "re", "im"], rows)


def read_states(path):
    """Checkpoint times and amplitude matrix from a ``states.csv``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    times = []
    for r in rows:
        t = float(r["t"])
        if not times or times[-1] != t:
            times.append(t)
    nmax = len(rows) // len(times)
    states = np.zeros((len(times), nmax), dtype=complex)
    for i, r in enumerate(rows):
        states[i // nmax, int(r["n"])] = complex(float(r["re"]), float(r["im"]))
    return np.array(times), states


def read_charges(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def cmd_simulate(cfg, args):
    traj = integrate(cfg.kernel, cfg.initial_state(), cfg.controls)
    write_trajectory(args.out, cfg, traj)
    extra = {"termination": traj.termination.value, "stats": traj.stats, "t_final": float(traj.times[-1])}
    report = _potential_report(cfg)
    if report is not None:
        extra["veff"] = report
    _json(os.path.join(args.out, "manifest.json"), _manifest(cfg, args, "simulate", **extra))
    if traj.termination == Termination.STEP_UNDERFLOW:
        print(f"step underflow at t={traj.times[-1]!r}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_manifold(cfg, args):
    ms = cfg.initial.manifold_state()
    beta = cfg.kernel.manifold_beta
    if ms is None or beta is None:
        raise ConfigError("initial", "manifold runs need an l1, blowup_family or stationary initial condition and a Szego/Truncated/Beta kernel")
    report = _potential_report(cfg)
    t_end = cfg.manifold["t_end"] or cfg.controls.t_end
    dt = cfg.manifold["checkpoint_dt"] or cfg.controls.checkpoint_dt
    red = integrate_reduced(beta, ms, t_end, dt, stop_on_x=cfg.controls.stop_on_x)
    try:
        form = closed_form(potential_of(beta, ms), ms.x, direction=1 if red.xdot()[0] >= 0 else -1)
        x_an = form(red.times)
    except ValueError:
        x_an = np.full(red.times.size, math.nan)
    ch = red.charges()
    rows = ([t, x, xa, *c] for t, x, xa, c in zip(red.times, red.x, x_an, ch))
    _csv(os.path.join(args.out, "manifold.csv"), ["t", "x", "x_analytic", "N", "E", "S", "H"], rows)
    _json(os.path.join(args.out, "manifest.json"), _manifest(cfg, args, "manifold", veff=report, termination=red.reason))
    if red.reason == "underflow":
        return EXIT_NUMERICAL
    return EXIT_OK


def sweep_cell(beta, x0, lam, b):
    """Phase-diagram label of one (beta, x0) cell on the blow-up family."""
    try:
        p = math.sqrt(x0)
        if beta <= 0:
            # no blow-up family: take the stationary-type data a = 0
            ms = ManifoldState(b, 0.0, p)
        else:
            ms = ManifoldState(b, blowup_family(beta, b, p, lam), p)
        pot = potential_of(beta, ms)
        return category(pot, x0).value, ""
    except ValueError as exc:
        return "Invalid", str(exc)


def _sweep_task(args):
    return sweep_cell(*args)


def sweep_phase_diagram(beta_grid, x0_grid, lam=0.0, b=1.0, threads=1):
    cells = [(float(beta), float(x0), float(lam), complex(b)) for beta in beta_grid for x0 in x0_grid]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            labels = list(pool.map(_sweep_task, cells, chunksize=max(1, len(cells) // (4 * threads))))
    else:
        labels = [_sweep_task(c) for c in cells]
    return [(c[0], c[1], lab, why) for c, (lab, why) in zip(cells, labels)]


def cmd_sweep(cfg, args):
    if cfg.sweep is None:
        raise ConfigError("sweep", "required for the sweep subcommand")
    sw = cfg.sweep
    table = sweep_phase_diagram(sw.beta_grid, sw.x0_grid, sw.lam, sw.b, args.threads)
    _csv(os.path.join(args.out, "phase.csv"), ["beta", "x0", "category", "reason"], table)
    counts = {}
    for *_, lab, _why in table:
        counts[lab] = counts.get(lab, 0) + 1
    _json(os.path.join(args.out, "manifest.json"), _manifest(cfg, args, "sweep", counts=dict(sorted(counts.items()))))
    return EXIT_OK


def cmd_lax_check(cfg, args):
    traj = integrate(cfg.kernel, cfg.initial_state(), cfg.controls)
    lx = cfg.lax
    ref = k_spectrum(traj.states[0], 5)
    rows = []
    for i in range(0, len(traj.times), lx["every"]):
        a = traj.states[i]
        res = lax_residual(cfg.kernel, a, lx["probe_count"], pair=lx["pair"], seed=args.seed)
        sv = k_spectrum(a, 5)
        drift = float(np.max(np.abs(sv - ref)) / ref[0]) if ref[0] > 0 else 0.0
        rows.append([traj.times[i], res, drift, traj.charges[i].tail_mass, *sv])
    header = ["t", "lax_residual", "k_spectrum_drift", "tail_mass"] + [f"sigma{k + 1}" for k in range(len(ref))]
    _csv(os.path.join(args.out, "lax.csv"), header, rows)
    _json(os.path.join(args.out, "manifest.json"), _manifest(cfg, args, "lax-check", termination=traj.termination.value))
    return EXIT_OK


def _input_states(args):
    path = args.input
    if path is None:
        raise ConfigError("--input", "tail-fit and rates need --input <simulate output dir>")
    if os.path.isdir(path):
        path = os.path.join(path, "states.csv")
    if not os.path.exists(path):
        raise ConfigError("--input", f"no states file at {path}")
    return read_states(path)


def cmd_tail_fit(cfg, args):
    times, states = _input_states(args)
    floor = cfg.diagnostics.floor if cfg is not None else DEFAULT_FLOOR
    ts, fits = tail_fits(times, states, floor)
    rows = [[t, f.c, f.gamma, f.rho, f.window[0], f.window[1], f.rms_log_residual] for t, f in zip(ts, fits)]
    _csv(os.path.join(args.out, "tailfit.csv"), ["t", "c", "gamma", "rho", "n_lo", "n_hi", "rms_log_residual"], rows)
    if not fits:
        raise DiagnosticFailure("tail not resolved at any checkpoint")
    doc = {"command": "tail-fit", "version": version_string(), "input": os.path.abspath(args.input), "fits": len(fits)}
    try:
        est = blowup_extrapolate(ts, [f.rho for f in fits])
        doc["t_star"] = est.t_star
        doc["t_star_bracket"] = list(est.bracket)
    except NoBlowupTrend as exc:
        doc["t_star"] = None
        doc["reason"] = str(exc)
    _json(os.path.join(args.out, "blowup.json"), doc)
    return EXIT_OK


class _StoredTrajectory:
    def __init__(self, times, states, s_list):
        from .state import sobolev_norm

        self.times = times
        self.states = states
        self._sob = {float(s): np.array([sobolev_norm(a, s) for a in states]) for s in s_list}

    def column(self, name):
        return self._sob[float(name[2:])]


def cmd_rates(cfg, args):
    times, states = _input_states(args)
    s_list = [s for s in (cfg.controls.s_list if cfg is not None else (1.0, 2.0)) if s > 0.5]
    tr = _StoredTrajectory(times, states, s_list)
    window = late_window(times)
    rows = []
    for s in s_list:
        try:
            rows.append([s, growth_rate_fit(tr, s, window), growth_rate_fit(tr, s, window, log_log=True), window[0], window[1]])
        except ValueError as exc:
            raise DiagnosticFailure(str(exc)) from None
    _csv(os.path.join(args.out, "rates.csv"), ["s", "exp_rate", "power_exponent", "t_lo", "t_hi"], rows)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "manifold": cmd_manifold,
    "sweep": cmd_sweep,
    "lax-check": cmd_lax_check,
    "tail-fit": cmd_tail_fit,
    "rates": cmd_rates,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="szegolab", description="Resonant Szego-type flows: simulation and diagnostics.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name not in ("tail-fit", "rates"), help="YAML run configuration")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
        sp.add_argument("--seed", type=int, default=0, help="seed for probe vectors")
        if name in ("tail-fit", "rates"):
            sp.add_argument("--input", help="simulate output directory or states.csv")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if not 0 <= args.seed < 2**64:
        print("config error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        need_initial = args.command in ("simulate", "manifold", "lax-check")
        cfg = load_config(args.config, need_initial=need_initial) if args.config else None
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DiagnosticFailure, TailNotResolved, NoBlowupTrend) as exc:
        print(f"diagnostic failure: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTIC


if __name__ == "__main__":
    sys.exit(main())
