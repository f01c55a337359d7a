"""Command-line entrypoint."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from classifier import DEFAULT_K_RANGE, f_curve, make_model, maximize_f, objective_f, parse_grid, sweep_shared_t
from config import JsonConfigStore
from data_pipeline import (
    compare_models,
    cross_validate,
    cv_report_rows,
    kfold_split,
    prepare_dataset,
)
from diagnostics import export_diagnostic_snapshot
from errors import EXIT_OK, EXIT_TOPOLOGY, PqmError, UsageError, exit_code_for
from interfaces import ConfigStore, ReportSink
from models import BitPattern, CsvSchema, RunConfig
from nisq_compile import (
    check_topology,
    compile_reduced,
    emit_qasm,
    load_coupling_graph,
    parse_mapping,
    reduced_p0,
    reproduce_reference_table,
    sweep_reference_inputs,
)
from pqm_core import (
    load_memory_file,
    prepare_memory_state,
    retrieve_exact,
    retrieve_sampled,
    storage_auxiliary_state,
)
from reports import FileReportSink, MarkdownRunHistory, rows_to_csv_text

log = logging.getLogger("pqm")

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _configure_logging(verbose: bool, log_file: Path | None) -> None:
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(str(log_file), encoding="utf-8"))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        datefmt="%H:%M:%S",
        handlers=handlers,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pqm", description="Probabilistic quantum memory toolkit.")
    parser.add_argument("--config", type=Path, default=None, help="Path to config.json")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    parser.add_argument("--log-file", type=Path, default=None, help="Also write logs to this file")
    parser.add_argument("--history-dir", type=Path, default=None, help="Append a markdown entry per run here")
    parser.add_argument("--snapshot", action="store_true", help="Export a diagnostics snapshot of --log-file")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=Path, default=None, help="Write the output here as well as stdout")
        p.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")

    p = sub.add_parser("retrieve", help="Retrieve one input against a memory file")
    p.add_argument("--memory", type=Path, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--shots", type=int, default=None, help="Sample this many shots instead of exact output")
    p.add_argument("--storage", action="store_true", help="Prepare the memory with the storage circuit")
    common(p)

    p = sub.add_parser("store", help="Run the storage circuit for a memory file")
    p.add_argument("--memory", type=Path, required=True)
    common(p)

    p = sub.add_parser("bench", help="k-fold benchmark of a classifier on a CSV dataset")
    _dataset_args(p)
    p.add_argument("--model", choices=("qwc", "pqwc", "knn"), default="qwc")
    p.add_argument("--compare", choices=("qwc", "pqwc", "knn"), default=None, help="Second model for a Wilcoxon test")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--k-max", type=int, default=DEFAULT_K_RANGE[1])
    common(p)

    p = sub.add_parser("sweep", help="Fold-averaged accuracy with one shared t per grid point")
    _dataset_args(p)
    common(p)

    p = sub.add_parser(
        "compile",
        help="Emit the reduced retrieval circuit as OpenQASM",
        description="Compilation is deterministic, so there is no --seed.",
    )
    p.add_argument("--memory", type=Path, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--coupling", type=Path, default=None)
    p.add_argument("--mapping", default=None, help="Physical qubit per logical qubit, m first then c")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument(
        "--format", dest="fmt", choices=("qasm", "json"), default="qasm",
        help="qasm prints the circuit text; json adds gate counts and the topology report",
    )

    p = sub.add_parser("table4", help="Reproduce the small-memory reference table")
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--all-inputs", action="store_true", help="Run every input against each memory, not just 0...0")
    common(p)

    p = sub.add_parser("ft", help="Two-distance objective curve and its maximizer")
    p.add_argument("--d-near", type=int, default=1)
    p.add_argument("--d-far", type=int, default=3)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--resolution", type=int, default=10_000)
    common(p)
    return parser


def _dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--label-column", default="-1", help="Label column index or header name")
    p.add_argument("--header", action="store_true", help="First CSV row is a header")
    p.add_argument("--missing", default="?", help="Missing-value marker")
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--grid", default=None, help='Comma list of t values or "uniform:N"')


def _schema(args: argparse.Namespace) -> CsvSchema:
    label: int | str = args.label_column
    try:
        label = int(args.label_column)
    except ValueError:
        pass
    return CsvSchema(label_column=label, header=args.header, missing_marker=args.missing)


def _run_config(args: argparse.Namespace, store: ConfigStore) -> RunConfig:
    seed = args.seed if getattr(args, "seed", None) is not None else store.get_seed()
    shots = getattr(args, "shots", None)
    folds = getattr(args, "folds", None)
    grid_text = getattr(args, "grid", None) or store.get_grid()
    return RunConfig(
        command=args.command,
        seed=seed,
        shots=shots if shots is not None else store.get_shots(),
        folds=folds if folds is not None else store.get_folds(),
        grid=parse_grid(grid_text),
        t=getattr(args, "t", 1.0),
        dataset=str(args.dataset) if getattr(args, "dataset", None) else None,
        memory=str(args.memory) if getattr(args, "memory", None) else None,
        input=getattr(args, "input", None),
        model=getattr(args, "model", None),
        coupling=str(args.coupling) if getattr(args, "coupling", None) else None,
        mapping=getattr(args, "mapping", None),
        out=str(args.out) if getattr(args, "out", None) else None,
        fmt=getattr(args, "fmt", "json"),
    )


def _emit(args: argparse.Namespace, payload: dict[str, Any], rows: list[dict[str, Any]] | None = None) -> str:
    """Print in the chosen format; with --out, write it there and the other format beside it."""
    as_csv = getattr(args, "fmt", "json") == "csv" and rows is not None
    if as_csv:
        text = rows_to_csv_text(rows)
    else:
        text = json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    args.output_text = text
    out = getattr(args, "out", None)
    if out is None:
        return text
    sink: ReportSink = FileReportSink()
    companion = out.with_suffix(".json" if as_csv else ".csv")
    if as_csv:
        sink.write_csv(out, rows)
    else:
        sink.write_json(out, payload)
    if rows is not None and companion != out:
        if as_csv:
            sink.write_json(companion, payload)
        else:
            sink.write_csv(companion, rows)
    return text


def _parse_input(text: str) -> BitPattern:
    return BitPattern.from_string(text)


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------


def cmd_retrieve(args: argparse.Namespace, cfg: RunConfig) -> int:
    memory = load_memory_file(args.memory)
    pattern = _parse_input(args.input)
    if args.shots is not None:
        outcome = retrieve_sampled(memory, pattern, args.t, args.shots, cfg.seed)
        mode = "shots"
    else:
        outcome = retrieve_exact(memory, pattern, args.t, use_storage_circuit=args.storage)
        mode = "exact"
    payload = {"mode": mode, "outcome": outcome.to_dict(), "config": cfg.to_dict()}
    _emit(args, payload, [{"p0": outcome.p0, "p1": outcome.p1}])
    return EXIT_OK


def cmd_store(args: argparse.Namespace, cfg: RunConfig) -> int:
    memory = load_memory_file(args.memory)
    amplitudes = prepare_memory_state(memory, use_storage_circuit=True)
    p_value, u_value = storage_auxiliary_state(memory)
    width = memory.n
    nonzero = {
        format(i, f"0{width}b"): float(np.real(a))
        for i, a in enumerate(amplitudes)
        if abs(a) > 1e-12
    }
    payload = {
        "amplitudes": nonzero,
        "auxiliary": {"p": p_value, "u": u_value},
        "config": cfg.to_dict(),
    }
    _emit(args, payload, [{"pattern": k, "amplitude": v} for k, v in nonzero.items()])
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, cfg: RunConfig) -> int:
    data = prepare_dataset(args.dataset, _schema(args))
    name = args.dataset.stem
    k_range = (DEFAULT_K_RANGE[0], args.k_max)
    report = cross_validate(data, lambda: make_model(args.model, cfg.grid, k_range), cfg.folds, cfg.seed, name)
    payload: dict[str, Any] = {**report.to_dict(), "config": cfg.to_dict()}
    rows = cv_report_rows(report)
    if args.compare:
        other = cross_validate(data, lambda: make_model(args.compare, cfg.grid, k_range), cfg.folds, cfg.seed, name)
        result = compare_models(report, other, args.alpha)
        payload["comparison"] = {
            "model": other.model,
            "per_fold": list(other.per_fold),
            "mean": other.mean,
            "std": other.std,
            "wilcoxon": {"statistic": result.statistic, "p_value": result.p_value, "reject": result.reject},
        }
        rows += cv_report_rows(other)
    _emit(args, payload, rows)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, cfg: RunConfig) -> int:
    data = prepare_dataset(args.dataset, _schema(args))
    totals: dict[float, list[float]] = {t: [] for t in cfg.grid}
    for fold in kfold_split(data, cfg.folds, cfg.seed):
        curve = sweep_shared_t(data.subset(fold.train), data.subset(fold.test), cfg.grid)
        for t, acc in curve:
            totals[t].append(acc)
    rows = [{"t": t, "mean_accuracy": float(np.mean(accs))} for t, accs in totals.items()]
    _emit(args, {"dataset": args.dataset.stem, "curve": rows, "config": cfg.to_dict()}, rows)
    return EXIT_OK


def cmd_compile(args: argparse.Namespace, cfg: RunConfig) -> int:
    memory = load_memory_file(args.memory)
    reduced = compile_reduced(memory, _parse_input(args.input), args.t)
    qasm = emit_qasm(reduced.circuit)
    exit_code = EXIT_OK
    report = None
    if args.coupling is not None:
        graph = load_coupling_graph(args.coupling)
        mapping = parse_mapping(args.mapping) if args.mapping else tuple(range(reduced.circuit.num_qubits))
        report = check_topology(reduced.circuit, graph, mapping)
        for issue in report.advisories:
            sys.stderr.write(f"advisory: gate {issue.gate_index}: {issue.message}\n")
        for issue in report.violations:
            sys.stderr.write(f"violation: gate {issue.gate_index}: {issue.message}\n")
        if report.violations:
            exit_code = EXIT_TOPOLOGY
    if args.fmt == "json":
        payload: dict[str, Any] = {
            "qasm": qasm,
            "num_qubits": reduced.circuit.num_qubits,
            "gates": len(reduced.circuit),
            "p0": reduced_p0(reduced),
            "config": cfg.to_dict(),
        }
        if report is not None:
            payload["violations"] = [issue.to_dict() for issue in report.violations]
            payload["advisories"] = [issue.to_dict() for issue in report.advisories]
        text = json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    else:
        text = qasm
    sys.stdout.write(text)
    args.output_text = text
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text, encoding="utf-8")
    return exit_code


def cmd_table4(args: argparse.Namespace, cfg: RunConfig) -> int:
    if args.all_inputs:
        table = sweep_reference_inputs(cfg.shots, cfg.seed)
    else:
        table = reproduce_reference_table(cfg.shots, cfg.seed)
    _emit(args, {**table, "config": cfg.to_dict()}, table["rows"])  # type: ignore[arg-type]
    return EXIT_OK


def cmd_ft(args: argparse.Namespace, cfg: RunConfig) -> int:
    curve = f_curve(args.d_near, args.d_far, args.n, args.points)
    t_star = maximize_f(args.d_near, args.d_far, args.n, args.resolution)
    payload = {
        "t_star": t_star,
        "f_star": objective_f(t_star, args.d_near, args.d_far, args.n),
        "f_at_1": objective_f(1.0, args.d_near, args.d_far, args.n),
        "curve": [{"t": t, "f": v} for t, v in curve],
        "config": cfg.to_dict(),
    }
    _emit(args, payload, payload["curve"])  # type: ignore[arg-type]
    return EXIT_OK


COMMANDS = {
    "retrieve": cmd_retrieve,
    "store": cmd_store,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
    "compile": cmd_compile,
    "table4": cmd_table4,
    "ft": cmd_ft,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return exit_code_for(exc)
    if not args.command:
        parser.print_usage(sys.stderr)
        return exit_code_for(UsageError("no command given"))

    _configure_logging(args.verbose, args.log_file)
    store = JsonConfigStore(args.config)
    cfg: RunConfig | None = None
    try:
        cfg = _run_config(args, store)
        log.debug("run config: %s", cfg.to_dict())
        code = COMMANDS[args.command](args, cfg)
    except (PqmError, OSError) as exc:
        log.error("%s failed: %s", args.command, exc)
        sys.stderr.write(f"error: {exc}\n")
        code = exit_code_for(exc)

    if args.history_dir is not None:
        MarkdownRunHistory(args.history_dir).append_record(
            command=args.command,
            config=cfg.to_dict() if cfg else {"command": args.command},
            summary=getattr(args, "output_text", "")[:2000],
            exit_code=code,
        )
    if args.snapshot and args.log_file is not None:
        path = export_diagnostic_snapshot(args.log_file, reason=args.command, run_config=cfg.to_dict() if cfg else None)
        log.info("diagnostics snapshot: %s", path)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
