"""Command-line driver: simulate, verify, converge, sweep.

All output files are plain delimited text with floats printed at full
round-trip precision (17 significant digits), so identical configs
produce byte-identical artifacts.

Exit codes: 0 success, 1 property violation (verify), 2 invalid
config, 3 numerical failure (blow-up or non-convergent slab), 4 output
IO failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib as tomli  # python >= 3.11
except ModuleNotFoundError:
    import tomli

from .analysis import (convergence_study, sample_cancellation,
                       sample_growth_envelope, sample_lipschitz,
                       sample_quasi_positivity, sample_shift_equivalence,
                       sample_truncation, verify_run)
from .config import (ConfigError, RunSetup, build_setup, emit_toml,
                     load_config, resolved_config)
from .solver import BlowUpError, PicardNonConvergence, run_picard, run_splitting


def _fmt(value) -> str:
    return f"{float(value):.17g}"


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _diagnostics_text(traj) -> str:
    lines = ["t_day,total_N,L2,H1,min_conc,bottom_export"]
    for row in zip(traj.diag_t, traj.total_n, traj.l2, traj.h1,
                   traj.min_conc, traj.bottom_export):
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _snapshot_text(state, grid) -> str:
    lines = ["depth_m,N,P,Z,D"]
    for i, x in enumerate(grid.cell_centers):
        lines.append(",".join(_fmt(v) for v in
                              (x, state.N[i], state.P[i], state.Z[i], state.D[i])))
    return "\n".join(lines) + "\n"


def _write_run_artifacts(setup: RunSetup, traj, report) -> None:
    out = setup.out_dir
    _write_text(out / "resolved_config.toml", emit_toml(resolved_config(setup)))
    _write_text(out / "diagnostics.csv", _diagnostics_text(traj))
    index = ["index,t_day,file"]
    for i, (t, state) in enumerate(zip(traj.snapshot_times, traj.snapshots)):
        name = f"snapshot_{i:05d}.csv"
        _write_text(out / "snapshots" / name, _snapshot_text(state, setup.grid))
        index.append(f"{i},{_fmt(t)},{name}")
    _write_text(out / "snapshots" / "index.csv", "\n".join(index) + "\n")
    _write_text(out / "report.txt", report.to_text())
    rows = "\n".join(f"{k},{v}" for k, v in report.to_rows())
    _write_text(out / "report.csv", "key,value\n" + rows + "\n")


def _run(setup: RunSetup):
    runner = run_picard if setup.solver.mode == "picard" else run_splitting
    return runner(setup.initial, setup.grid, setup.params, setup.optics,
                  setup.mixing, setup.irradiance, setup.solver)


def cmd_simulate(setup: RunSetup) -> int:
    traj = _run(setup)
    report = verify_run(traj, setup.params, setup.optics, setup.mixing,
                        setup.irradiance, n_samples=setup.verify_samples,
                        seed=setup.seed)
    _write_run_artifacts(setup, traj, report)
    print(f"completed {setup.solver.mode} run: {setup.solver.n_steps} steps, "
          f"t_end = {setup.solver.t_end} day, lambda = {setup.solver.lam}")
    print(f"total_N: initial = {_fmt(traj.total_n[0])}, "
          f"final = {_fmt(traj.total_n[-1])}, "
          f"exported = {_fmt(traj.cumulative_export[-1])}")
    print(f"artifacts in {setup.out_dir}")
    return 0


def cmd_verify(setup: RunSetup) -> int:
    rng = np.random.default_rng(setup.seed)
    n = setup.verify_samples
    lip_violations, lip_worst = sample_lipschitz(
        setup.params, setup.optics, setup.irradiance.sup, setup.grid.length,
        setup.solver.lam, rng, n)
    checks = [
        ("reaction_cancellation_max",
         sample_cancellation(setup.params, rng, n), lambda v: v <= 1e-12),
        ("growth_envelope_violations",
         sample_growth_envelope(setup.params, rng, n), lambda v: v == 0),
        ("quasi_positivity_min",
         sample_quasi_positivity(setup.params, rng, n), lambda v: v >= 0.0),
        ("truncation_violations",
         sample_truncation(rng, n), lambda v: v == 0),
        ("shift_equivalence_max",
         sample_shift_equivalence(setup.params, rng, n), lambda v: v <= 1e-12),
        ("lipschitz_violations", lip_violations, lambda v: v == 0),
        ("lipschitz_worst_ratio", lip_worst, lambda v: v <= 1.0 + 1e-12),
    ]
    lines = []
    all_ok = True
    for name, value, good in checks:
        ok = bool(good(value))
        all_ok &= ok
        lines.append(f"{'PASS' if ok else 'FAIL'} {name} = {value}")
    text = "\n".join(lines) + f"\nsamples = {n}\nseed = {setup.seed}\n"
    print(text, end="")
    _write_text(setup.out_dir / "verify_report.txt", text)
    return 0 if all_ok else 1


def cmd_converge(setup: RunSetup) -> int:
    result = convergence_study("both", cell_counts=setup.converge_cells,
                               dts=setup.converge_dts)
    text = result.to_text()
    print(text, end="")
    _write_text(setup.out_dir / "convergence.txt", text)
    return 0


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def cmd_sweep(raw: dict, base_dir: Path, args) -> int:
    sweep = raw.get("sweep")
    if not isinstance(sweep, dict) or "runs" not in sweep:
        raise ConfigError("sweep mode needs a [sweep] table with [[sweep.runs]] entries")
    extra = sorted(set(sweep) - {"runs"})
    if extra:
        raise ConfigError(f"unknown key(s) {extra} in [sweep]")
    runs = sweep["runs"]
    if not isinstance(runs, list) or not runs:
        raise ConfigError("[[sweep.runs]] must contain at least one run")
    base = {k: v for k, v in raw.items() if k != "sweep"}
    names = []
    setups = []
    for i, entry in enumerate(runs):
        if not isinstance(entry, dict) or not isinstance(entry.get("name"), str) \
                or not entry["name"]:
            raise ConfigError(f"sweep.runs[{i}] needs a nonempty string 'name'")
        name = entry["name"]
        if name in names or Path(name).name != name:
            raise ConfigError(f"sweep run name {name!r} must be unique and "
                              f"contain no path separators")
        names.append(name)
        merged = _deep_merge(base, {k: v for k, v in entry.items() if k != "name"})
        setup = build_setup(merged, base_dir, out_override=None,
                            seed_override=args.seed, mode_override=args.mode,
                            truncation_override=args.truncation_n)
        root = Path(args.out) if args.out is not None else setup.out_dir
        setups.append(dataclasses.replace(setup, out_dir=root / name))
    status = 0
    for name, setup in zip(names, setups):
        print(f"--- sweep run {name} ---")
        code = cmd_simulate(setup)
        status = max(status, code)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="npzdcol",
        description="One-dimensional four-pool plankton column simulator "
                    "with built-in estimate verification.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("simulate", "run one simulation and write its artifacts"),
            ("verify", "run the sampled property suite (no long simulation)"),
            ("converge", "run the space/time refinement study"),
            ("sweep", "run every [[sweep.runs]] entry of the config")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for sampling-based checks")
        p.add_argument("--mode", choices=("splitting", "picard"), default=None,
                       help="solver mode override")
        p.add_argument("--truncation-n", dest="truncation_n", type=int,
                       default=None, help="source truncation level override")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config)
    except (OSError, tomli.TOMLDecodeError) as exc:
        print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
        return 2
    base_dir = Path(args.config).resolve().parent
    try:
        if args.command == "sweep":
            return cmd_sweep(raw, base_dir, args)
        setup = build_setup(raw, base_dir, out_override=args.out,
                            seed_override=args.seed, mode_override=args.mode,
                            truncation_override=args.truncation_n)
        if args.command == "simulate":
            return cmd_simulate(setup)
        if args.command == "verify":
            return cmd_verify(setup)
        return cmd_converge(setup)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    except (BlowUpError, PicardNonConvergence) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # run-time invariant trips (stability gate, bad overrides) are
        # configuration problems from the user's point of view
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
