"""Command-line front end.

Subcommands: pack, compare, sweep, validate, min-dm. All numeric output is in
SI units (joules, seconds, mm^2). Exit codes: 0 success, 2 packing
infeasible, 3 validation failure, 1 any other error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .architecture import ArchitectureError, load_architecture
from .baselines import STRATEGIES, run_strategy
from .costmodel import (
    CostModelError,
    compare_mappings,
    estimate_cost,
    pareto_front,
    report_layer_csv_rows,
    report_to_json,
    sweep,
)
from .packing import (
    FoldStep,
    PackConfig,
    PackingError,
    allocation_to_json,
    min_dm_for_fit,
    parse_allocation,
    validate_allocation,
)
from .workload import WorkloadError, load_workload

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_INVALID = 3

SWEEP_CSV_HEADER = "dh,dm,strategy,area_mm2,energy_J,delay_s,edp_Js,fit"


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (WorkloadError, ArchitectureError, CostModelError, PackingError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imcpack",
        description="Pack DNN weights into in-memory-computing arrays and estimate energy/latency/EDP/area.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_arch=True):
        p.add_argument("--workload", required=True, help="workload file or bundled name")
        if with_arch:
            p.add_argument("--arch", required=True, help="architecture file or bundled name")
            p.add_argument("--dh", type=int, default=None, help="override the macro count Dh")
            p.add_argument("--dm", type=int, default=None, help="override the cell depth Dm")
        p.add_argument("--dm-ceiling", type=int, default=PackConfig.dm_ceiling, help="cap for min-Dm searches")

    p_pack = sub.add_parser("pack", help="map a workload and write allocation + cost reports")
    common(p_pack)
    p_pack.add_argument("--strategy", default="packed", choices=STRATEGIES + ("all",))
    p_pack.add_argument("--mode", default="steady", choices=("steady", "cold"))
    p_pack.add_argument("--out-dir", default=".", help="directory for allocation/report files")
    p_pack.add_argument("--verbose", action="store_true", help="print the fold trace even on success")
    p_pack.set_defaults(func=cmd_pack)

    p_cmp = sub.add_parser("compare", help="compare packed vs stacked vs flattened")
    common(p_cmp)
    p_cmp.add_argument("--mode", default="steady", choices=("steady", "cold"))
    p_cmp.add_argument("--csv", default=None, help="also write the comparison table as CSV")
    p_cmp.set_defaults(func=cmd_compare)

    p_sweep = sub.add_parser("sweep", help="evaluate a Dh x Dm cross product per strategy")
    common(p_sweep)
    p_sweep.add_argument("--dh-values", required=True, help="comma-separated Dh list, e.g. 1,2,4")
    p_sweep.add_argument("--dm-values", required=True, help="comma-separated Dm list, e.g. 1,4,16")
    p_sweep.add_argument("--strategies", default=",".join(STRATEGIES))
    p_sweep.add_argument("--mode", default="steady", choices=("steady", "cold"))
    p_sweep.add_argument("--out", required=True, help="output CSV path")
    p_sweep.add_argument("--pareto", action="store_true", help="keep only (area, EDP) non-dominated rows")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="check an allocation export against its workload and architecture")
    common(p_val)
    p_val.add_argument("--allocation", required=True, help="allocation JSON written by 'pack'")
    p_val.set_defaults(func=cmd_validate)

    p_min = sub.add_parser("min-dm", help="smallest Dm at which a strategy fits the workload")
    common(p_min)
    p_min.add_argument("--strategy", default="packed", choices=STRATEGIES)
    p_min.set_defaults(func=cmd_min_dm)

    return parser


def _load_inputs(args):
    workload = load_workload(args.workload)
    arch, cost = load_architecture(args.arch)
    if getattr(args, "dh", None):
        arch = replace(arch, Dh=args.dh)
    if getattr(args, "dm", None):
        arch = replace(arch, Dm=args.dm)
    config = PackConfig(dm_ceiling=args.dm_ceiling)
    return workload, arch, cost, config


def _print_fold_trace(trace):
    for event in trace:
        if isinstance(event, FoldStep):
            print(
                f"  fold: layer '{event.layer_id}' {event.tag}-factor {event.prime} "
                f"({event.source} -> tm), Tm now {event.new_tm}"
            )
        else:
            print(f"  exhausted: layer '{event.layer_id}': {event.reason}")


def cmd_pack(args) -> int:
    workload, arch, cost, config = _load_inputs(args)
    strategies = STRATEGIES if args.strategy == "all" else (args.strategy,)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    status = EXIT_OK
    for strategy in strategies:
        outcome = run_strategy(workload, arch, strategy, config)
        report = estimate_cost(workload, outcome.allocation, arch, cost, args.mode)
        alloc_path = out_dir / f"allocation_{workload.name}_{strategy}.json"
        report_path = out_dir / f"report_{workload.name}_{strategy}.json"
        csv_path = out_dir / f"report_{workload.name}_{strategy}.csv"
        alloc_path.write_text(allocation_to_json(outcome.allocation, arch))
        report_path.write_text(report_to_json(report))
        csv_path.write_text("\n".join(report_layer_csv_rows(report)) + "\n")

        fit = "fits on chip" if outcome.feasible else "does NOT fit"
        print(f"[{strategy}] workload '{workload.name}' on {arch.name or 'custom'} "
              f"({arch.Di}x{arch.Do}, Dh={arch.Dh}, Dm={arch.Dm}): {fit}")
        print(f"  energy  {report.energy_total_J:.6e} J")
        print(f"  delay   {report.delay_total_s:.6e} s")
        print(f"  EDP     {report.edp_Js:.6e} Js")
        print(f"  area    {report.area.total_imc_area_mm2:.6f} mm^2")
        print(f"  util    {report.utilization:.4f}")
        print(f"  files   {alloc_path} {report_path} {csv_path}")
        if not outcome.feasible:
            print("  fold trace:")
            _print_fold_trace(outcome.fold_trace)
            status = EXIT_INFEASIBLE
        elif args.verbose and outcome.fold_trace:
            print("  fold trace:")
            _print_fold_trace(outcome.fold_trace)

    if len(strategies) > 1:
        _print_comparison(compare_mappings(workload, arch, cost, args.mode, config))
    return status


def _print_comparison(rows):
    print()
    header = f"{'strategy':<10} {'fit':<5} {'min_dm':>6} {'energy_J':>12} {'delay_s':>12} {'edp_Js':>12} {'util':>6} {'area_mm2':>9} {'folds':>5}"
    print(header)
    print("-" * len(header))
    for r in rows:
        min_dm = str(r.min_dm) if r.min_dm is not None else ">cap"
        print(
            f"{r.strategy:<10} {str(r.fit):<5} {min_dm:>6} {r.energy_J:>12.4e} "
            f"{r.delay_s:>12.4e} {r.edp_Js:>12.4e} {r.utilization:>6.3f} {r.area_mm2:>9.5f} {r.folds:>5}"
        )


def cmd_compare(args) -> int:
    workload, arch, cost, config = _load_inputs(args)
    rows = compare_mappings(workload, arch, cost, args.mode, config)
    _print_comparison(rows)
    if args.csv:
        lines = ["strategy,fit,min_dm,energy_J,delay_s,edp_Js,edp_cold_Js,edp_steady_Js,utilization,area_mm2,folds"]
        for r in rows:
            min_dm = r.min_dm if r.min_dm is not None else ""
            lines.append(
                f"{r.strategy},{r.fit},{min_dm},{r.energy_J!r},{r.delay_s!r},{r.edp_Js!r},"
                f"{r.edp_cold_Js!r},{r.edp_steady_Js!r},{r.utilization!r},{r.area_mm2!r},{r.folds}"
            )
        Path(args.csv).write_text("\n".join(lines) + "\n")
        print(f"\nwrote {args.csv}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    workload, arch, cost, config = _load_inputs(args)
    dh_values = [int(v) for v in args.dh_values.split(",") if v]
    dm_values = [int(v) for v in args.dm_values.split(",") if v]
    strategies = tuple(s for s in args.strategies.split(",") if s)
    for s in strategies:
        if s not in STRATEGIES:
            raise ValueError(f"unknown strategy {s!r} in --strategies")

    points = sweep(workload, arch, cost, dh_values, dm_values, strategies, args.mode, config)
    if args.pareto:
        points = pareto_front(points)

    lines = [SWEEP_CSV_HEADER]
    for p in points:
        lines.append(
            f"{p.dh},{p.dm},{p.strategy},{p.area_mm2!r},{p.energy_J!r},{p.delay_s!r},{p.edp_Js!r},{p.fit}"
        )
    Path(args.out).write_text("\n".join(lines) + "\n")
    n_fail = sum(1 for p in points if not p.fit)
    print(f"wrote {len(points)} rows to {args.out} ({n_fail} non-fitting points)")
    return EXIT_OK


def cmd_validate(args) -> int:
    workload, arch, _, _ = _load_inputs(args)
    alloc = parse_allocation(Path(args.allocation).read_text())
    violations = validate_allocation(alloc, workload, arch)
    if violations:
        for v in violations:
            print(f"INVALID: {v}")
        return EXIT_INVALID
    print(f"allocation '{args.allocation}' is valid ({len(alloc.entries)} entries, "
          f"fit_on_chip={alloc.fit_on_chip})")
    return EXIT_OK


def cmd_min_dm(args) -> int:
    workload, arch, _, config = _load_inputs(args)
    try:
        dm = min_dm_for_fit(workload, arch, args.strategy, config)
    except PackingError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(dm)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
