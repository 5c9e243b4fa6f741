"""Command-line entry point ``rydberg-arp``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import yaml

from ..integrate import IntegrationError
from ..optimizer import OptimizerError
from ..pulse import write_schedule_csv
from . import experiments as ex
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .decomposition import DecompositionError
from .records import RecordWriter

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("rydberg_arp")


def _gate_summary(res) -> dict:
    return res.to_dict()


def cmd_simulate(cfg: ExperimentConfig, rec: RecordWriter, args) -> None:
    res = ex.run_gate(cfg)
    rec.result("gate", _gate_summary(res))
    rec.result("gate_kind", cfg.gate)
    rec.result("model", cfg.model)
    rec.result("peak_omega_mhz", cfg.schedule.peak_omega())
    if "trace" in res.traces:
        rec.trace("trace_superposition.csv", res.traces["trace"])
    print(f"F = {res.fidelity:.6f}  phi* = {res.phi:.6f} rad")


def _write_optimized(rec: RecordWriter, opt: ex.OptimizedGate) -> None:
    rec.result("optimization", opt.report.to_dict())
    rec.result("gate", _gate_summary(opt.result))
    rec.result("total_time_us", opt.config.params.duration)
    opt.report.write_history_csv(rec.add("history.csv"))
    path = rec.add("optimized_config.yaml")
    path.write_text(yaml.safe_dump(opt.config.raw, sort_keys=False))
    if "trace" in opt.result.traces:
        rec.trace("trace_superposition.csv", opt.result.traces["trace"])
    print(f"best objective {opt.report.best_objective:.6g} after {opt.report.n_evals} evaluations; "
          f"F = {opt.result.fidelity:.6f}")


def cmd_optimize_analytic(cfg, rec, args) -> None:
    _write_optimized(rec, ex.optimize_analytic_gate(cfg))


def cmd_optimize_dcrab(cfg, rec, args) -> None:
    _write_optimized(rec, ex.optimize_dcrab_gate(cfg))


def cmd_optimize_cz(cfg, rec, args) -> None:
    opt = ex.run_cz_optimization(cfg)
    _write_optimized(rec, opt)
    dec = ex.run_decomposition(opt.result)
    rec.result("decomposition", {"fidelity": dec.fidelity, "f2q_power_6": dec.heuristic})


def cmd_sweep_robustness(cfg, rec, args) -> None:
    table = ex.robustness_sweep(cfg, args.threads)
    rec.table("sweep_robustness.csv", table.columns, table.rows)
    f = table.column("fidelity")
    rec.result("robustness", {"min_fidelity": f.min(), "max_fidelity": f.max(), "n_points": len(f)})
    print(f"F in [{f.min():.6f}, {f.max():.6f}] over {len(f)} points")


def cmd_sweep_blockade(cfg, rec, args) -> None:
    table = ex.blockade_sweep(cfg, args.threads)
    rec.table("sweep_blockade.csv", table.columns, table.rows)
    rec.result("blockade", [dict(zip(table.columns, r)) for r in table.rows])
    for r in table.rows:
        print(f"d = {r[0]:.3g} um  V = {r[1]:.4g} MHz  F = {r[2]:.6f}")


def cmd_noise_mc(cfg, rec, args) -> None:
    summary, shots = ex.noise_monte_carlo(cfg, args.threads)
    rec.table("mc_summary.csv", summary.columns, summary.rows)
    rec.table("mc_shots.csv", shots.columns, shots.rows)
    rec.result("noise", [dict(zip(summary.columns, r)) for r in summary.rows])
    for r in summary.rows:
        print(f"fwhm = {r[0]:g} Hz  <F> = {r[1]:.6f}  sigma = {r[2]:.2e}")


def cmd_decompose(cfg, rec, args) -> None:
    if cfg.gate != "CZ":
        raise ConfigError("decompose needs a CZ configuration")
    cz = ex.run_gate(cfg, traces=False)
    dec = ex.run_decomposition(cz)
    rec.result("cz", _gate_summary(cz))
    rec.result("decomposition", {
        "fidelity": dec.fidelity,
        "fidelity_ideal_cz": dec.fidelity_ideal,
        "identity_max_deviation": dec.identity_deviation,
        "f2q": dec.cz_fidelity,
        "f2q_power_6": dec.heuristic,
    })
    print(f"F2Q = {dec.cz_fidelity:.6f}  CCZ circuit F = {dec.fidelity:.6f}  (F2Q^6 = {dec.heuristic:.6f})")


def cmd_export_schedule(cfg, rec, args) -> None:
    write_schedule_csv(rec.add("schedule.csv"), cfg.scheme, cfg.schedule, cfg.trace_samples)
    rec.result("duration_us", cfg.params.duration)
    rec.result("peak_omega_mhz", cfg.schedule.peak_omega())


COMMANDS = {
    "simulate": (cmd_simulate, "evolve all inputs of the configured gate and report the fidelity"),
    "optimize-analytic": (cmd_optimize_analytic, "optimise the analytic ARP parameters"),
    "optimize-dcrab": (cmd_optimize_dcrab, "dCRAB envelope search on the configured pulses"),
    "sweep-robustness": (cmd_sweep_robustness, "fidelity over intensity and detuning offsets"),
    "sweep-blockade": (cmd_sweep_blockade, "fidelity versus interatomic distance"),
    "noise-mc": (cmd_noise_mc, "laser phase-noise Monte Carlo"),
    "optimize-cz": (cmd_optimize_cz, "optimise the two-qubit CZ pulses"),
    "decompose": (cmd_decompose, "CCZ from six simulated CZ gates"),
    "export-schedule": (cmd_export_schedule, "write the control schedule to schedule.csv"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rydberg-arp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config", required=True, help="YAML file or packaged config name (fig2, fig3, ...)")
        s.add_argument("--seed", type=int, default=None, help="override the configured RNG seed")
        s.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default: ${ex.THREADS_ENV} or 1)")
        s.add_argument("--out", default=None, help="output directory (default: runs/<command>)")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads is not None:
        os.environ[ex.THREADS_ENV] = str(args.threads)
    fn, _ = COMMANDS[args.command]
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = parse_config({**cfg.raw, "seed": args.seed})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or Path("runs") / args.command)
    rec = RecordWriter(out, args.command, cfg, cfg.seed)
    try:
        fn(cfg, rec, args)
    except (ConfigError, DecompositionError) as exc:
        rec.close("config_error")
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, OptimizerError, FloatingPointError, ArithmeticError, ValueError) as exc:
        rec.close("numeric_failure")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    path = rec.close()
    print(f"record written to {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
