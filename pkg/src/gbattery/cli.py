"""Command-line surface: subcommands, CSV artifacts, run manifest.

Subcommands
-----------
model-inspect   derived model quantities (renormalization frequency,
                tail rescale factor, recurrence estimate, mode range)
cycle           one cycle; writes a single-row sweep.csv
sweep           the configured grid; writes sweep.csv
charge-trace    battery CM along one charging stroke; writes trace.csv
oracle          continuum stationary moments; writes oracle.csv
audit           one cycle with the first/second-law and identity
                residuals printed

Every run writes `run_manifest.json` capturing the configuration echo,
derived quantities, per-cell status, package version, and wall-clock
time.  CSV content is deterministic: identical inputs produce identical
bytes (floats carry 17 significant digits; no timestamps).  The GB_LOG
environment variable sets the logging level and never affects numerics.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, emit_config, parse_config
from .cycles import BIPARTITE, CycleConfig, CycleEngine, SweepCell, sweep
from .extraction import apply_local_battery, theta_transform
from .model import Protocol, build_bath
from .oracle import OracleConfig, stationary_moments

log = logging.getLogger("gbattery")

SWEEP_COLUMNS = [
    "scenario", "t_d", "theta", "W_d", "W_c", "ergotropy", "W_diss", "Q",
    "Sigma", "eta", "I_td", "dE_B_disc", "dE_B_charge", "first_law_residual",
    "second_law_value", "interaction_identity_residual", "flags",
]
TRACE_COLUMNS = ["t", "sigma_S_11", "sigma_S_22", "sigma_S_12", "mf_q2_ref", "mf_p2_ref"]
ORACLE_COLUMNS = ["m0", "omega0", "gamma", "omega_d", "beta", "q2", "p2", "q2_error", "p2_error"]


def _fmt(value: float | None) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return f"{value:.17g}"


def _write_csv(path: Path, columns: list[str], rows: list[list[str]]) -> None:
    lines = [",".join(columns)]
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sweep_rows(cells: list[SweepCell]) -> list[list[str]]:
    rows = []
    for cell in cells:
        cfg = cell.config
        if cell.report is None:
            row = [cfg.scenario, _fmt(cfg.t_d), _fmt(cfg.theta)]
            row += ["nan"] * (len(SWEEP_COLUMNS) - 4)
            row.append(f"error:{cell.error}".replace(",", ";"))
            rows.append(row)
            continue
        rep = cell.report
        theta = rep.theta if rep.scenario == BIPARTITE else float("nan")
        rows.append([
            rep.scenario,
            _fmt(rep.t_d),
            _fmt(theta),
            _fmt(rep.w_disconnect),
            _fmt(rep.w_connect),
            _fmt(rep.ergotropy),
            _fmt(rep.w_dissipated),
            _fmt(rep.heat),
            _fmt(rep.entropy_production),
            _fmt(rep.efficiency),
            _fmt(rep.mutual_information),
            _fmt(rep.de_bath_disconnect),
            _fmt(rep.de_bath_charge),
            _fmt(rep.first_law_residual),
            _fmt(rep.second_law_value),
            _fmt(rep.interaction_identity_residual),
            ";".join(rep.flags),
        ])
    return rows


def _manifest(cfg: RunConfig, command: str, cells: list[SweepCell] | None,
              started: float) -> dict:
    bath = build_bath(cfg.model)
    manifest = {
        "tool": "gbattery",
        "version": __version__,
        "command": command,
        "config": json.loads(emit_config(cfg)),
        "derived": {
            "omega_r_sq": bath.omega_r_sq,
            "delta_rescale": bath.delta_rescale,
            "recurrence_estimate": bath.recurrence_estimate,
            "omega_min": float(bath.omegas[0]),
            "omega_max": float(bath.omegas[-1]),
        },
        "cells": [],
        "wall_clock_s": time.time() - started,
    }
    if cells is not None:
        for cell in cells:
            manifest["cells"].append({
                "scenario": cell.config.scenario,
                "t_d": cell.config.t_d,
                "theta": cell.config.theta,
                "status": "ok" if cell.report is not None else "error",
                "error": cell.error,
                "flags": list(cell.report.flags) if cell.report else [],
            })
    return manifest


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _load_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        text = Path(args.config).read_text(encoding="utf-8")
    else:
        text = ""
    cfg = parse_config(text)
    if args.out is not None:
        cfg = RunConfig(**{**cfg.__dict__, "output_dir": args.out})
    return cfg


def _cmd_model_inspect(cfg: RunConfig, args: argparse.Namespace) -> int:
    started = time.time()
    bath = build_bath(cfg.model)
    engine = CycleEngine(cfg.model, bath, cfg.stepper, cfg.protocol_exponent)
    freqs = engine.flow.frequencies
    print(f"omega_r_sq          = {bath.omega_r_sq:.6f}")
    print(f"delta_rescale       = {bath.delta_rescale:.6f}")
    print(f"recurrence_estimate = {bath.recurrence_estimate:.6g}")
    print(f"bath_band           = [{bath.omegas[0]:.6g}, {bath.omegas[-1]:.6g}]")
    print(f"normal_mode_range   = [{freqs[0]:.6g}, {freqs[-1]:.6g}]")
    print(f"thermal_energy      = {engine.e_th_full:.10g}")
    out_dir = Path(cfg.output_dir)
    _write_manifest(out_dir, _manifest(cfg, "model-inspect", None, started))
    return 0


def _cell_config(cfg: RunConfig, args: argparse.Namespace) -> "CycleConfig":
    cell = cfg.cycle_config(args.scenario, args.td, args.theta)
    if getattr(args, "t_charge", None) is not None:
        cell = replace(cell, t_charge=args.t_charge)
    return cell


def _cmd_cycle(cfg: RunConfig, args: argparse.Namespace) -> int:
    started = time.time()
    cells = sweep(cfg.model, [_cell_config(cfg, args)], cfg.stepper, jobs=1,
                  protocol_exponent=cfg.protocol_exponent)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "sweep.csv", SWEEP_COLUMNS, _sweep_rows(cells))
    _write_manifest(out_dir, _manifest(cfg, "cycle", cells, started))
    for line in _sweep_rows(cells):
        print(",".join(line))
    return 0 if all(c.report is not None for c in cells) else 1


def _cmd_sweep(cfg: RunConfig, args: argparse.Namespace) -> int:
    started = time.time()
    cells = sweep(cfg.model, cfg.sweep_cells(), cfg.stepper, jobs=args.jobs,
                  protocol_exponent=cfg.protocol_exponent)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "sweep.csv", SWEEP_COLUMNS, _sweep_rows(cells))
    _write_manifest(out_dir, _manifest(cfg, "sweep", cells, started))
    failures = [c for c in cells if c.report is None]
    for cell in failures:
        log.error("cell (%s, t_d=%g, theta=%g) failed: %s",
                  cell.config.scenario, cell.config.t_d, cell.config.theta, cell.error)
    print(f"sweep: {len(cells) - len(failures)}/{len(cells)} cells ok -> {out_dir / 'sweep.csv'}")
    return 0 if not failures else 1


def _cmd_charge_trace(cfg: RunConfig, args: argparse.Namespace) -> int:
    started = time.time()
    engine = CycleEngine(cfg.model, stepper=cfg.stepper,
                         protocol_exponent=cfg.protocol_exponent)
    cell_cfg = _cell_config(cfg, args)

    if args.td == 0.0:
        initial = engine.quench_extracted_state(args.theta)
    else:
        _, sigma_td, _ = engine.disconnect(Protocol(args.td, cfg.protocol_exponent))
        extraction = engine.extract_battery(sigma_td)
        local = theta_transform(args.theta, cfg.model.m0, cfg.model.omega0) @ extraction.transform
        initial = apply_local_battery(sigma_td, local)

    moments = stationary_moments(cfg.model)
    trace = engine.charging_trace(cell_cfg, initial, continuum=moments)
    rows = []
    for i, t in enumerate(trace.times):
        block = trace.blocks[i]
        rows.append([
            _fmt(float(t)), _fmt(block[0, 0]), _fmt(block[1, 1]), _fmt(block[0, 1]),
            _fmt(moments.q2), _fmt(moments.p2),
        ])
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "trace.csv", TRACE_COLUMNS, rows)
    _write_manifest(out_dir, _manifest(cfg, "charge-trace", None, started))
    print(f"trace: late window vs discrete mean-force CM: {trace.late_vs_discrete:.4%}")
    print(f"trace: late window vs continuum mean-force CM: {trace.late_vs_continuum:.4%}")
    return 0


def _cmd_oracle(cfg: RunConfig, args: argparse.Namespace) -> int:
    started = time.time()
    moments = stationary_moments(cfg.model, OracleConfig())
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = cfg.model
    rows = [[
        _fmt(spec.m0), _fmt(spec.omega0), _fmt(spec.gamma), _fmt(spec.omega_d),
        _fmt(spec.beta), _fmt(moments.q2), _fmt(moments.p2),
        _fmt(moments.q2_error), _fmt(moments.p2_error),
    ]]
    _write_csv(out_dir / "oracle.csv", ORACLE_COLUMNS, rows)
    _write_manifest(out_dir, _manifest(cfg, "oracle", None, started))
    print(f"oracle: q2={moments.q2:.10g} (err {moments.q2_error:.2e}), "
          f"p2={moments.p2:.10g} (err {moments.p2_error:.2e})")
    return 0


def _cmd_audit(cfg: RunConfig, args: argparse.Namespace) -> int:
    started = time.time()
    cells = sweep(cfg.model, [_cell_config(cfg, args)],
                  cfg.stepper, jobs=1, protocol_exponent=cfg.protocol_exponent)
    cell = cells[0]
    if cell.report is None:
        print(f"audit failed: {cell.error}", file=sys.stderr)
        return 1
    rep = cell.report
    sigma_check = abs(rep.entropy_production - rep.second_law_value)
    print(f"W_diss                    = {rep.w_dissipated:.10g}")
    print(f"dE_bath(cycle)            = {rep.de_bath_disconnect + rep.de_bath_charge:.10g}")
    print(f"first_law_residual        = {rep.first_law_residual:.4e}")
    print(f"Sigma = -beta Q           = {rep.entropy_production:.10g}")
    print(f"relative entropy route    = {rep.second_law_value:.10g}")
    print(f"second_law_gap            = {sigma_check:.4e}")
    print(f"interaction_identity_res  = {rep.interaction_identity_residual:.4e}")
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "sweep.csv", SWEEP_COLUMNS, _sweep_rows(cells))
    _write_manifest(out_dir, _manifest(cfg, "audit", cells, started))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gbattery",
        description="Finite-time charge-discharge cycles of a Caldeira-Leggett quantum battery",
    )
    parser.add_argument("--config", help="path to the JSON configuration", default=None)
    parser.add_argument("--out", help="output directory (overrides config)", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("model-inspect", help="print derived model quantities")

    for name in ("cycle", "audit"):
        cmd = sub.add_parser(name, help=f"run one cycle ({name})")
        cmd.add_argument("--scenario", choices=["tripartite", "bipartite"], default="tripartite")
        cmd.add_argument("--td", type=float, required=True)
        cmd.add_argument("--theta", type=float, default=0.0)
        cmd.add_argument("--t-charge", dest="t_charge", type=float, default=None)

    cmd = sub.add_parser("sweep", help="run the configured sweep grid")
    cmd.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    cmd = sub.add_parser("charge-trace", help="battery CM along a charging stroke")
    cmd.add_argument("--scenario", choices=["tripartite", "bipartite"], default="bipartite")
    cmd.add_argument("--td", type=float, default=0.0)
    cmd.add_argument("--theta", type=float, default=0.0)
    cmd.add_argument("--t-charge", dest="t_charge", type=float, default=None)

    sub.add_parser("oracle", help="continuum stationary moments")
    return parser


_COMMANDS = {
    "model-inspect": _cmd_model_inspect,
    "cycle": _cmd_cycle,
    "sweep": _cmd_sweep,
    "charge-trace": _cmd_charge_trace,
    "oracle": _cmd_oracle,
    "audit": _cmd_audit,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("GB_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](cfg, args)
    except Exception as exc:  # surface failures with a clean exit code
        log.exception("command failed")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
