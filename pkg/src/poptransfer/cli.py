"""Command-line entry point.

Exit codes: 0 on success, 1 for configuration or I/O errors, 2 for
numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config, load_schedule
from .controls import ControlSchedule
from .experiments import SweepSpec, raman_baseline, run_sweep, scan_total_time
from .lindblad import ground_state, propagate_schedule
from .optimize import optimize_ansatz, optimize_polynomial
from .policy import load_checkpoint, save_checkpoint, train
from .protocols import resolve_protocol

log = logging.getLogger("poptransfer")

COMMANDS = ("simulate", "train", "optimize-poly", "optimize-ansatz", "sweep", "scan-time",
            "raman-scan", "checkpoint-info")


def _fmt(v) -> str:
    return f"{float(v):.12g}"


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _protocol(args, cfg: RunConfig, T: float) -> ControlSchedule:
    ref = args.protocol if args.protocol is not None else cfg.protocol
    if ref is None:
        ref = "protocol1"
    if isinstance(ref, ControlSchedule):
        return ref
    if Path(ref).suffix == ".json" or Path(ref).exists():
        return load_schedule(ref)
    try:
        return resolve_protocol(ref, T)[0]
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None


def _out(args, cfg: RunConfig, default: str) -> Path:
    return Path(args.out or cfg.output.get("path") or default)


def _cmd_simulate(args, cfg):
    T = cfg.system.T
    sched = _protocol(args, cfg, T)
    traj = propagate_schedule(ground_state(cfg.system.dim), sched, T, cfg.system.all_channels(),
                              cfg.system.n_samples, cfg.system.hamiltonian)
    pops = traj.populations
    rho_ss = pops[:, 3] if pops.shape[1] == 4 else np.zeros(len(pops))
    rows = zip(traj.times, pops[:, 0], pops[:, 1], pops[:, 2], rho_ss, traj.controls[:, 0], traj.controls[:, 1])
    out = _out(args, cfg, "trajectory.csv")
    _write_rows(out, ["t", "rho_gg", "rho_ee", "rho_ff", "rho_ss", "delta_p", "delta"], rows)
    print(f"rho_ff(T) = {traj.final_target:.6f}  max rho_ee = {traj.max_excited:.6f}  -> {out}")


def _cmd_train(args, cfg):
    tc = cfg.train
    res = train(tc, progress=_progress if args.verbose else None)
    out = _out(args, cfg, "learning_curve.csv")
    _write_rows(out, ["epoch", "mean_reward", "max_reward", "baseline", "greedy_reward"], res.curve.rows())
    ckpt = Path(cfg.output.get("checkpoint") or out.with_suffix(".json"))
    save_checkpoint(ckpt, res, tc)
    sink_free = propagate_schedule(ground_state(), res.best_schedule, tc.T).final_target
    print(f"best greedy reward {res.best_reward:.6f} (epoch {res.best_epoch}), "
          f"sink-free rho_ff {sink_free:.6f}  -> {out}, {ckpt}")


def _progress(epoch, curve):
    if epoch % 10 == 0:
        log.info("epoch %d  mean %.5f  greedy %.5f", epoch, curve.mean_reward[-1], curve.greedy_reward[-1])


def _write_result(path, res, T):
    doc = {"T": T, "score": res.score, "params": np.asarray(res.params).tolist(),
           "run_scores": res.run_scores, "n_evals": res.n_evals, "schedule": res.schedule.to_dict()}
    Path(path).write_text(json.dumps(doc, indent=2))


def _cmd_optimize_poly(args, cfg):
    oc = cfg.optimize
    res = optimize_polynomial(cfg.system.T, oc.order, oc.n_runs, oc.powell, oc.sink, cfg.system.hamiltonian)
    out = _out(args, cfg, "optimize_poly.json")
    _write_result(out, res, cfg.system.T)
    print(f"best rho_ff(T) = {res.score:.6f}  -> {out}")


def _cmd_optimize_ansatz(args, cfg):
    oc = cfg.optimize
    family = oc.family if oc.family != "polynomial" else "ansatz1"
    res = optimize_ansatz(cfg.system.T, family, oc.powell, oc.sink, cfg.system.hamiltonian)
    out = _out(args, cfg, "optimize_ansatz.json")
    _write_result(out, res, cfg.system.T)
    print(f"best rho_ff(T) = {res.score:.6f}  params = {np.round(res.params, 4).tolist()}  -> {out}")


def _cmd_sweep(args, cfg):
    if cfg.sweep is None:
        raise ConfigError("the sweep command needs a 'sweep' section in the config")
    sw = cfg.sweep
    T = cfg.system.T
    proto = None if sw.scenario == "raman_baseline" else _protocol(args, cfg, T)
    include_sink = sw.include_sink if args.sink is None else args.sink
    spec = SweepSpec(proto, T, sw.scenario, sw.axes, include_sink, sw.level, sw.n_samples,
                     cfg.system.hamiltonian)
    res = run_sweep(spec)
    out = _out(args, cfg, "sweep.csv")
    res.write_csv(out)
    print(f"{sw.scenario}: {res.final_rho_ff.size} points  -> {out}")


def _cmd_scan_time(args, cfg):
    proto = _protocol(args, cfg, cfg.system.T)
    grid = None
    if cfg.sweep is not None and cfg.sweep.axes:
        grid = cfg.sweep.axes[0].values()
    res = scan_total_time(proto, grid, include_sink=bool(args.sink), n_samples=cfg.system.n_samples)
    out = _out(args, cfg, "time_scan.csv")
    res.write_csv(out)
    print(f"scanned {len(res.coords[0])} durations  -> {out}")


def _cmd_raman(args, cfg):
    grid = None
    if cfg.sweep is not None and cfg.sweep.axes:
        grid = cfg.sweep.axes[0].values()
    include_sink = True if args.sink is None else args.sink
    res = raman_baseline(cfg.system.T, grid, include_sink=include_sink)
    out = _out(args, cfg, "raman.csv")
    res.write_csv(out)
    best = float(res.extras["max_rho_ff"].max())
    print(f"best constant-detuning peak {best:.6f}  protocol 1 reference {res.meta['reference']:.6f}  -> {out}")


def _cmd_checkpoint_info(args, cfg):
    ck = load_checkpoint(args.path)
    net = ck["network"]
    info = {
        "epoch": ck["epoch"],
        "seed": ck["seed"],
        "best_reward": ck["best_reward"],
        "n_units": net.n_units,
        "n_parameters": int(net.flat().size),
        "sigma": list(net.sigma),
        "config": ck["config"].to_dict(),
    }
    print(json.dumps(info, indent=2))


HANDLERS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "optimize-poly": _cmd_optimize_poly,
    "optimize-ansatz": _cmd_optimize_ansatz,
    "sweep": _cmd_sweep,
    "scan-time": _cmd_scan_time,
    "raman-scan": _cmd_raman,
    "checkpoint-info": _cmd_checkpoint_info,
}


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poptransfer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "checkpoint-info":
            p.add_argument("path")
            continue
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output file")
        p.add_argument("--seed", type=int)
        p.add_argument("--protocol", help="built-in name or schedule JSON path")
        p.add_argument("--sink", type=_on_off, default=None, help="on|off")
        p.add_argument("--T", type=float, dest="T", help="total time in units of 1/Omega_0")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "T", None) is not None:
        if not args.T > 0:
            raise ConfigError("--T must be positive")
        cfg.system.T = args.T
        cfg.train = dataclasses.replace(cfg.train, T=args.T, sink_rate=None)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.train = dataclasses.replace(cfg.train, seed=args.seed)
        cfg.optimize.powell = dataclasses.replace(cfg.optimize.powell, seed=args.seed)
    if getattr(args, "sink", None) is not None:
        cfg.system.sink = args.sink
        cfg.optimize.sink = args.sink
    return cfg


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(message)s")
    try:
        cfg = _resolve_config(args)
        HANDLERS[args.command](args, cfg)
    except (ConfigError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FloatingPointError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())
