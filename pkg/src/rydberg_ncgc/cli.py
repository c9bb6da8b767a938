"""Command-line front end.

Each subcommand runs one experiment from a config file plus flag
overrides and writes its dataset (CSV with a JSON sidecar, or JSON).
Exit codes: 0 success, 2 config error, 3 numerical failure, 1 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import EXPERIMENTS, ConfigError, RunConfig, load_config
from .evolve import ConvergenceError, check_convergence
from .model import mhz
from .pulses import Protocol, perturb

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rydberg-ncgc", description="Rydberg blockade controlled-phase gate simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="INI or JSON config file")
        p.add_argument("--protocol", choices=[x.value for x in Protocol])
        p.add_argument("--out", type=Path, help="output file (stdout when omitted)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--mode", choices=("reduced", "full", "open"))
        p.add_argument("--threads", type=int)
        if name == "qft-timing":
            p.add_argument("--n", type=int, help="register size; omit for the sweep over the configured range")
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    run = {"experiment": args.command}
    for key in ("protocol", "format", "seed", "trials", "mode", "threads"):
        value = getattr(args, key)
        if value is not None:
            run[key] = value
    if args.out is not None:
        run["out"] = str(args.out)
    return cfg.replace("run", **run)


def _sidecar(cfg: RunConfig, extra: dict) -> dict:
    return {"config": cfg.to_dict(), **extra}


def _emit(cfg: RunConfig, csv_text: str | None, payload: dict, summary: dict | None = None) -> dict:
    """Write outputs per the config and return the stdout summary."""
    out = cfg.run.out
    if cfg.run.format == "csv" and csv_text is not None:
        if out:
            csv_path, json_path = ex.write_outputs(out, csv_text, _sidecar(cfg, payload))
            return {"csv": str(csv_path), "sidecar": str(json_path), **(summary or {})}
        sys.stdout.write(csv_text)
        return {}
    doc = json.dumps(_sidecar(cfg, payload), indent=2, sort_keys=True, default=ex._json_default) + "\n"
    if out:
        Path(out).write_text(doc)
        return {"json": out, **(summary or {})}
    sys.stdout.write(doc)
    return {}


def cmd_waveform(cfg: RunConfig, args) -> dict:
    params = cfg.physical_params()
    schedule = cfg.settings().schedule(cfg.protocol, params)
    spec = cfg.perturbation_spec()
    if not spec.is_null:
        schedule = perturb(schedule, spec)
    rows = schedule.sample(step=1.0)
    rows[:, 1:3] /= mhz(1.0)
    header = ["t_ns", "omega_2pi_mhz", "delta_2pi_mhz", "phi_rad"]
    payload = {"experiment": "waveform", "schedule": dict(schedule.meta)}
    if cfg.run.format == "json":
        payload["columns"] = {h: rows[:, i].tolist() for i, h in enumerate(header)}
    return _emit(cfg, ex.format_csv(header, rows.tolist()), payload, {"samples": len(rows)})


def cmd_gate(cfg: RunConfig, args) -> dict:
    params, settings, opts = cfg.physical_params(), cfg.settings(), cfg.options()
    schedule = settings.schedule(cfg.protocol, params)
    spec = cfg.perturbation_spec()
    if not spec.is_null:
        schedule = perturb(schedule, spec)
    # refuse to report a fidelity the step size cannot support
    estimate = check_convergence(params, schedule, cfg.mode, opts)
    res = ex.run_gate(cfg.protocol, params, spec, cfg.mode, opts, settings)
    body = res.to_json()
    body["meta"]["error_estimate"] = estimate
    header = ["fidelity", "fidelity_raw", "phi_01", "phi_10", "phi_11", "leakage"]
    csv_text = ex.format_csv(header, [[body[h] for h in header]])
    payload = {"experiment": "gate", "result": body, "seeds": [[cfg.run.seed, 0]]}
    summary = {k: body[k] for k in header}
    if cfg.run.format == "json" and not cfg.run.out:
        sys.stdout.write(json.dumps(body, indent=2, sort_keys=True, default=ex._json_default) + "\n")
        return {}
    return _emit(cfg, csv_text, payload, summary)


def _report(cfg: RunConfig, report: ex.SweepReport) -> dict:
    payload = report.to_json()
    return _emit(cfg, report.to_csv(), payload, {"experiment": report.experiment, **report.summary})


def cmd_sweep_systematic(cfg, args):
    s = cfg.sweep
    return _report(
        cfg,
        ex.systematic_sweep(
            s.protocols, s.axis, s.grid, cfg.physical_params(), cfg.mode, cfg.options(), cfg.settings(), cfg.run.threads
        ),
    )


def cmd_sweep_noise(cfg, args):
    s, p = cfg.sweep, cfg.perturbation
    return _report(
        cfg,
        ex.noise_monte_carlo(
            cfg.protocol,
            s.rabi_amps,
            s.detuning_amps,
            cfg.run.trials,
            cfg.run.seed,
            cfg.physical_params(),
            cfg.mode,
            cfg.options(),
            cfg.settings(),
            p.noise_segment,
            p.symmetric,
            cfg.run.threads,
        ),
    )


def cmd_sweep_blockade(cfg, args):
    s = cfg.sweep
    protocols = [p for p in s.protocols if p != "rm"]
    return _report(
        cfg,
        ex.blockade_sweep(
            protocols,
            [mhz(v) for v in s.v_grid],
            s.durations,
            cfg.physical_params(),
            cfg.options(),
            cfg.settings(),
            cfg.run.threads,
        ),
    )


def cmd_sweep_decoherence(cfg, args):
    s = cfg.sweep
    return _report(
        cfg,
        ex.decoherence_scan(
            s.t_grid or None,
            tuple(s.rates),
            cfg.physical_params(),
            cfg.options(),
            cfg.settings(),
            s.convention,
            threads=cfg.run.threads,
        ),
    )


def cmd_qft_timing(cfg, args):
    s = cfg.sweep
    t_gate = Fraction(s.t_gate).limit_denominator(10**9)
    if getattr(args, "n", None) is not None:
        results = {
            conv.value: ex.qft_timing(ex.QftTimingModel(args.n, t_gate, conv)).to_json() for conv in ex.QftConvention
        }
        primary = results[s.qft_convention]
        body = {
            "n_qubits": args.n,
            "cyclic_total_ns": primary["cyclic_total_ns"],
            "ncgc_total_ns": primary["ncgc_total_ns"],
            "convention": s.qft_convention,
            "conventions": results,
        }
        header = ["n_qubits", "cyclic", "ncgc_proportional", "ncgc_paper_text"]
        row = [args.n, primary["cyclic_total_ns"]] + [results[c.value]["ncgc_total_ns"] for c in ex.QftConvention]
        if cfg.run.format == "json" and not cfg.run.out:
            sys.stdout.write(json.dumps(body, indent=2, sort_keys=True) + "\n")
            return {}
        return _emit(cfg, ex.format_csv(header, [row]), {"experiment": "qft-timing", "result": body}, body)
    return _report(cfg, ex.qft_report(s.n_values, t_gate))


COMMANDS = {
    "waveform": cmd_waveform,
    "gate": cmd_gate,
    "sweep-systematic": cmd_sweep_systematic,
    "sweep-noise": cmd_sweep_noise,
    "sweep-blockade": cmd_sweep_blockade,
    "sweep-decoherence": cmd_sweep_decoherence,
    "qft-timing": cmd_qft_timing,
}


def _fail(code: int, exc: BaseException) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("key", "line"):
        if getattr(exc, attr, None) is not None:
            err[attr] = getattr(exc, attr)
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, e)
    except OSError as e:
        return _fail(EXIT_IO, e)
    try:
        summary = COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, e)
    except (ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as e:
        return _fail(EXIT_NUMERICAL, e)
    except ValueError as e:
        return _fail(EXIT_CONFIG, e)
    except OSError as e:
        return _fail(EXIT_IO, e)
    if summary:
        sys.stdout.write(json.dumps(summary, sort_keys=True, default=ex._json_default) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
