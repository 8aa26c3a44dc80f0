"""Command-line driver: ``run``, ``sweep``, ``enumerate``, ``analyze``, ``fit``.

Exit codes: 0 success, 1 invalid input, 2 coefficient mismatch against the
embedded reference tables.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .analysis import (
    DISTILLATION_REFERENCE,
    corr_csv,
    def_and_correlation,
    def_csv,
    fit_error_per_round,
    post_select,
    DetectionStats,
    InsufficientShotsError,
)
from .circuit import GATE_SETS, MAGIC_TYPES, parse_circuit
from .detectors.matching import MatchingDecoder
from .experiment import (
    NAMED_STATES,
    ConfigError,
    ExperimentConfig,
    build_setup,
    error_per_round,
    first_order_prediction,
    iter_bits,
    simulate,
    summary_report,
)
from .faultenum import coefficient_table
from .stabsim.records import read_records, write_records

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_MISMATCH = 2

log = logging.getLogger("magicprep")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _words(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


# flags whose dest is also the config key
_CONFIG_FLAGS = (
    "distance", "gate_set", "state", "theta", "phi", "p1", "p2", "p_init", "p_meas", "p_uniform",
    "rounds", "basis", "post_selection", "shots", "seed", "batch_size", "workers",
    "extra_qubits", "ideal_readout", "decode",
)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--distance", type=int, default=S)
    p.add_argument("--gate-set", dest="gate_set", choices=GATE_SETS, default=S)
    p.add_argument("--state", choices=sorted(NAMED_STATES), default=S, help="named target state")
    p.add_argument("--theta", type=float, default=S, help="polar angle (radians); needs --phi")
    p.add_argument("--phi", type=float, default=S, help="azimuthal angle (radians)")
    p.add_argument("--p1", type=float, default=S)
    p.add_argument("--p2", type=float, default=S)
    p.add_argument("--p-init", dest="p_init", type=float, default=S)
    p.add_argument("--p-meas", dest="p_meas", type=float, default=S)
    p.add_argument("--p-uniform", dest="p_uniform", type=float, default=S, help="one rate for every channel")
    p.add_argument("--rounds", type=int, default=S, help="extraction rounds including the preparation round")
    p.add_argument("--basis", choices=("X", "Y", "Z"), default=S)
    p.add_argument("--post-selection", dest="post_selection", choices=("PREP_ROUND", "TWO_ROUNDS"), default=S)
    p.add_argument("--shots", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=S)
    p.add_argument("--workers", type=int, default=S, help="worker processes for sampling")
    p.add_argument("--no-extra-qubits", dest="extra_qubits", action="store_false", default=S)
    p.add_argument("--ideal-readout", dest="ideal_readout", action="store_true", default=S)
    p.add_argument("--decode", action="store_true", default=S, help="also score matching-decoded observables")


def load_config(args: argparse.Namespace, **overrides: Any) -> ExperimentConfig:
    raw: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be a JSON object")
    for key in _CONFIG_FLAGS:
        if hasattr(args, key):
            raw[key] = getattr(args, key)
    # explicit angles replace the default named state
    if ("theta" in raw or "phi" in raw) and "state" not in raw:
        raw["state"] = None
    raw.update(overrides)
    return ExperimentConfig.from_dict(raw)


def _emit(doc: Any, path: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------- commands


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    circuit = None
    if args.circuit_file:
        try:
            circuit = parse_circuit(Path(args.circuit_file).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"circuit_file: {exc}") from exc
        if int(circuit.metadata.get("distance", -1)) != cfg.distance:
            raise ConfigError("circuit_file: circuit distance differs from the config distance")
    if not cfg.samplable and circuit is None:
        print(
            f"notice: state angles {cfg.angles} are not stabilizer angles; reporting the exact first-order prediction instead of sampling",
            file=sys.stderr,
        )
        _emit({"config": cfg.to_dict(), "first_order": first_order_prediction(cfg)}, args.report)
        return EXIT_OK
    setup = build_setup(cfg, circuit)
    if args.emit_circuit:
        Path(args.emit_circuit).write_text(setup.circuit.to_text())
    result = simulate(cfg, circuit, keep_bits=bool(args.record))
    report = summary_report(cfg, setup, result)
    if args.record:
        header = {
            "config": cfg.to_dict(),
            "num_measurements": setup.circuit.num_measurements,
            "circuit": setup.circuit.to_text(),
        }
        write_records(args.record, header, iter_bits(result))
        report["record_file"] = str(args.record)
    if args.csv_dir:
        _write_def_corr(setup, result.stats, args.csv_dir, report)
    _emit(report, args.report)
    return EXIT_OK


def _write_def_corr(setup, stats: DetectionStats, csv_dir: str, report: dict) -> None:
    try:
        dm, cm = def_and_correlation(stats, setup.model)
    except InsufficientShotsError as exc:
        report["def_corr"] = {"skipped": str(exc)}
        return
    out = Path(csv_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = [s.name for s in setup.layout.stabilizers]
    (out / "def.csv").write_text(def_csv(dm, names))
    (out / "corr.csv").write_text(corr_csv(cm))
    report["def_corr"] = {
        "def_csv": str(out / "def.csv"),
        "corr_csv": str(out / "corr.csv"),
        "corr_estimator": cm.estimator,
        "final_column": "reconstructed from the data readout against the last round",
    }


def cmd_sweep(args: argparse.Namespace) -> int:
    if not args.distances or not args.error_rates:
        raise ConfigError("sweep: distances and error_rates must be nonempty")
    base = load_config(args)
    cells = []
    grid: dict[str, np.ndarray] = {
        k: np.full((len(args.distances), len(args.error_rates)), np.nan)
        for k in ("eps_raw", "eps_det", "ratio", "retained_fraction")
    }
    for i, d in enumerate(args.distances):
        for j, p in enumerate(args.error_rates):
            cfg = ExperimentConfig.from_dict({**base.to_dict(), "distance": d, "noise": {"p_uniform": p}})
            res = simulate(cfg).post
            cell = {"distance": d, "error_rate": p, **res.to_dict()}
            cells.append(cell)
            for k in grid:
                v = cell.get(k)
                grid[k][i, j] = math.nan if v is None else v
    report = {
        "config": base.to_dict(),
        "distances": list(args.distances),
        "error_rates": list(args.error_rates),
        "cells": cells,
        "distillation_reference": DISTILLATION_REFERENCE,
    }
    if args.csv_dir:
        out = Path(args.csv_dir)
        out.mkdir(parents=True, exist_ok=True)
        for k, m in grid.items():
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["distance"] + [repr(p) for p in args.error_rates])
            for d, row in zip(args.distances, m):
                w.writerow([d] + ["" if not np.isfinite(v) else repr(float(v)) for v in row])
            (out / f"{k}.csv").write_text(buf.getvalue())
        report["csv"] = {k: str(out / f"{k}.csv") for k in grid}
    _emit(report, args.report)
    return EXIT_OK


def cmd_enumerate(args: argparse.Namespace) -> int:
    for g in args.gate_sets:
        if g not in GATE_SETS:
            raise ConfigError(f"gate_sets: unknown {g!r}")
    for t in args.types:
        if t not in MAGIC_TYPES:
            raise ConfigError(f"types: unknown {t!r}")
    for r in args.rounds:
        if r not in (1, 2):
            raise ConfigError("rounds: only 1 and 2 are tabulated")
    for d in args.distances:
        if d < 3 or d % 2 == 0:
            raise ConfigError(f"distances: {d} is not an odd integer >= 3")
    cells = coefficient_table(args.distances, args.gate_sets, args.types, args.rounds)
    rows = []
    ok = True
    for c in cells:
        row = c.report.to_dict(with_ledger=args.ledger)
        row["expected"] = {k: f"{v.numerator}/{v.denominator}" for k, v in c.expected.items()}
        row["matches"] = c.matches
        ok &= c.matches
        rows.append(row)
    _emit({"cells": rows, "all_match": ok}, args.report)
    if not ok:
        for row in rows:
            if not row["matches"]:
                print(
                    f"mismatch: d={row['distance']} {row['gate_set']} {row['magic_type']} rounds={row['post_rounds']}: "
                    f"got a={row['a']} b={row['b']} c={row['c']}, expected {row['expected']}",
                    file=sys.stderr,
                )
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        header, bits = read_records(args.record)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"record: {exc}") from exc
    if "config" not in header or "circuit" not in header:
        raise ConfigError("record: header lacks config or circuit")
    raw = dict(header["config"])
    for k in ("record_path", "report_path", "csv_dir"):
        raw.pop(k, None)
    if args.post_selection:
        raw["post_selection"] = args.post_selection
    if args.decode:
        raw["decode"] = True
    cfg = ExperimentConfig.from_dict(raw)
    circuit = parse_circuit(header["circuit"])
    setup = build_setup(cfg, circuit)
    if bits.shape[1] != setup.circuit.num_measurements:
        raise ConfigError("record: shot width does not match the circuit")
    post = post_select(bits, setup.model, setup.ideal, cfg.post_selection)
    report: dict[str, Any] = {"config": cfg.to_dict(), "shots": int(len(bits)), "post_selection": post.to_dict()}
    events = setup.model.detector_bits(bits)
    if cfg.decode:
        flips = MatchingDecoder().fit(setup.model).predict(events)
        report["decoded"] = post_select(bits, setup.model, setup.ideal, cfg.post_selection, predicted_flips=flips).to_dict()
    stats = DetectionStats().update(events)
    report["detection_event_fraction"] = {d.name: float(v) for d, v in zip(setup.model.detectors, stats.s1 / max(stats.n, 1))}
    if args.csv_dir:
        _write_def_corr(setup, stats, args.csv_dir, report)
    _emit(report, args.report)
    return EXIT_OK


def _read_series(path: str) -> tuple[list[float], list[float], list[float] | None]:
    ks, fs, ss = [], [], []
    with open(path) as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError:
                continue  # header line
            ks.append(vals[0])
            fs.append(vals[1])
            if len(vals) > 2:
                ss.append(vals[2])
    return ks, fs, (ss if len(ss) == len(ks) and ss else None)


def cmd_fit(args: argparse.Namespace) -> int:
    if args.series:
        try:
            ks, fs, ss = _read_series(args.series)
        except OSError as exc:
            raise ConfigError(f"series: {exc}") from exc
        res = fit_error_per_round(ks, fs, ss)
        _emit({"series": args.series, "fit": res.to_dict(), "model": "F(k) = (1 + (1 - 2 eps)^(k - k0)) / 2"}, args.report)
        return EXIT_OK
    base = load_config(args, decode=True)
    _emit(error_per_round(base, args.max_rounds), args.report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="magicprep", description="Logical state preparation on the rotated surface code.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="sample one configuration")
    _add_config_flags(r)
    r.add_argument("--record", help="write shot records here")
    r.add_argument("--report", help="write the JSON report here (default stdout)")
    r.add_argument("--csv-dir", dest="csv_dir", help="write DEF and correlation CSVs here")
    r.add_argument("--emit-circuit", dest="emit_circuit", help="write the circuit text here")
    r.add_argument("--circuit-file", dest="circuit_file", help="sample this circuit instead of building one")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="grid over distances and uniform error rates")
    _add_config_flags(s)
    s.add_argument("--distances", type=_ints, required=True)
    s.add_argument("--error-rates", dest="error_rates", type=_floats, required=True)
    s.add_argument("--report")
    s.add_argument("--csv-dir", dest="csv_dir")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("enumerate", help="exact first-order coefficients against the reference tables")
    e.add_argument("--distances", type=_ints, default=[3, 5, 7, 9])
    e.add_argument("--gate-sets", dest="gate_sets", type=_words, default=list(GATE_SETS))
    e.add_argument("--types", type=_words, default=list(MAGIC_TYPES))
    e.add_argument("--rounds", type=_ints, default=[1, 2])
    e.add_argument("--ledger", action="store_true", help="include the per-fault ledger")
    e.add_argument("--report")
    e.set_defaults(func=cmd_enumerate)

    a = sub.add_parser("analyze", help="re-analyse a record file")
    a.add_argument("record")
    a.add_argument("--post-selection", dest="post_selection", choices=("PREP_ROUND", "TWO_ROUNDS"))
    a.add_argument("--decode", action="store_true")
    a.add_argument("--report")
    a.add_argument("--csv-dir", dest="csv_dir")
    a.set_defaults(func=cmd_analyze)

    f = sub.add_parser("fit", help="fit the logical error per round")
    _add_config_flags(f)
    f.add_argument("--series", help="CSV of round,fidelity[,sigma]; skips simulation")
    f.add_argument("--max-rounds", dest="max_rounds", type=int, default=8)
    f.add_argument("--report")
    f.set_defaults(func=cmd_fit)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
