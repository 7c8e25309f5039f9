"""
Command-line entry point: enumerate, complexity, bounds, train, correlate, probe, plot and grid.

Every subcommand writes static files under ``--out`` (CSV through pandas, JSON
manifests, SVG charts) and prints a short summary to stdout.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from . import __version__
from .common.errors import LabError
from .common.utils import LoggerService, get_logger
from .datagen import PROJECTION_STREAM, Encoding, build_dataset, encode_objects
from .grammar_coding import ComplexityRow, complexity_table, ordering_violations
from .harness import (
    CorrelationMetric,
    ExperimentConfig,
    GridRow,
    RunResult,
    alignment_by_class,
    correlate_sweep,
    influence_probe,
    run_grid,
    run_sweep,
)
from .mapping_core import (
    AttributeSpace,
    Mapping,
    MappingKind,
    classify,
    compositional_degree,
    enumerate_mappings,
    gamma_grid,
    k_bound_bijection,
    k_bound_comp,
    partial_comp_bound,
)
from .metrics import LearningCurve, pearson
from .nn_engine import Activation, LossKind, OptimizerKind
from .svg_plot import PlotKind, PlotSeries, PlotSpec, emit_svg

logger = get_logger(__name__)

SEED_ENV = "COMP_BIAS_SEED"
PRNG_NAME = "numpy PCG64 via default_rng"

RUNS_CSV = "runs.csv"
CURVES_CSV = "curves.csv"
MANIFEST_JSON = "manifest.json"
COMPLEXITY_CSV = "complexity.csv"
GRID_CSV = "grid.csv"

COMPLEXITY_COLUMNS = ["mapping_id", "class", "image_size", "sequence", "sequence_length", "cl_bits", "huffman_bits"]
RUN_COLUMNS = ["mapping_id", "class", "image_size", "table", "cl_bits", "topsim", "convergence_time",
               "final_loss", "diverged", "epochs_completed", "input_digest", "run_seed"]
STRING_COLUMNS = {"class": str, "table": str, "input_digest": str, "run_seed": str, "sequence": str}


# ---------- tables ----------

def complexity_frame(rows: Sequence[ComplexityRow]) -> pd.DataFrame:
    frame = pd.DataFrame([r.model_dump(mode="json") for r in rows])
    return frame.rename(columns={"kind": "class"})[COMPLEXITY_COLUMNS]


def runs_frame(results: Sequence[RunResult]) -> pd.DataFrame:
    records = []
    for r in results:
        record = r.model_dump(mode="json", exclude={"curve"})
        record["class"] = record.pop("kind")
        record["run_seed"] = str(r.run_seed)
        records.append(record)
    return pd.DataFrame(records, columns=RUN_COLUMNS)


def curves_frame(results: Sequence[RunResult]) -> pd.DataFrame:
    records = [
        (r.mapping_id, epoch, loss)
        for r in results if r.curve is not None
        for epoch, loss in enumerate(r.curve.losses)
    ]
    return pd.DataFrame(records, columns=["mapping_id", "epoch", "loss"])


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip", dtype=STRING_COLUMNS)


def read_runs(directory: Path) -> List[RunResult]:
    """Results of a ``train`` output directory, with curves attached when curves.csv exists."""
    frame = read_csv(directory / RUNS_CSV)
    curves: Dict[int, List[float]] = {}
    curves_path = directory / CURVES_CSV
    if curves_path.exists():
        long = read_csv(curves_path).sort_values(["mapping_id", "epoch"], kind="stable")
        for mapping_id, group in long.groupby("mapping_id", sort=True):
            curves[int(mapping_id)] = group["loss"].tolist()

    results = []
    for record in frame.to_dict(orient="records"):
        mapping_id = int(record["mapping_id"])
        losses = curves.get(mapping_id)
        if curves_path.exists() and losses is None:
            losses = []
        results.append(RunResult(
            mapping_id=mapping_id,
            kind=record["class"],
            image_size=int(record["image_size"]),
            table=record["table"],
            cl_bits=float(record["cl_bits"]),
            topsim=float(record["topsim"]),
            convergence_time=float(record["convergence_time"]),
            final_loss=float(record["final_loss"]),
            diverged=bool(record["diverged"]),
            epochs_completed=int(record["epochs_completed"]),
            input_digest=record["input_digest"],
            run_seed=int(record["run_seed"]),
            curve=None if losses is None else LearningCurve(losses=losses),
        ))
    return results


def grid_frame(rows: Sequence[GridRow]) -> pd.DataFrame:
    return pd.DataFrame([{
        "encoding": r.encoding.value,
        "optimizer": r.optimizer.value,
        "loss": r.loss.value,
        "cl_rho": r.cl.rho,
        "cl_p": r.cl.p_analytic,
        "cl_p_permutation": r.cl.p_permutation,
        "topsim_rho": r.topsim.rho,
        "topsim_p": r.topsim.p_analytic,
        "topsim_p_permutation": r.topsim.p_permutation,
        "n": r.cl.n,
        "excluded": r.cl.excluded,
        "reference_cl_rho": r.reference_cl_rho,
        "reference_topsim_rho": r.reference_topsim_rho,
    } for r in rows])


def write_csv(frame: pd.DataFrame, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", na_rep="nan")
    logger.info("Wrote %s", path)


def alphabet(space: AttributeSpace) -> Dict[str, Dict[str, str]]:
    return {
        f"attribute_{a}": dict(zip(space.attribute_names[a], space.symbols[a]))
        for a in range(space.num_attributes)
    }


def manifest(config: Optional[ExperimentConfig], space: AttributeSpace, **extra) -> Dict:
    data = {
        "package": "compbias",
        "version": __version__,
        "prng": PRNG_NAME,
        "alphabet": alphabet(space),
    }
    if config is not None:
        data["config"] = config.model_dump(mode="json")
        data["seeds"] = {
            "init": config.seed,
            "projection": [config.seed, PROJECTION_STREAM],
            "per_run": "SeedSequence([seed, mapping_id])",
        }
    data.update(extra)
    return data


def write_manifest(data: Dict, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    logger.info("Wrote %s", path)


# ---------- configuration ----------

CONFIG_FLAGS = {
    "encoding": "encoding",
    "loss": "loss",
    "optimizer": "optimizer",
    "lr": "learning_rate",
    "weight_decay": "weight_decay",
    "epochs": "epochs",
    "seed": "seed",
    "image_size": "image_size",
    "projection_dim": "projection_dim",
    "activation": "activation",
    "hidden_width": "hidden_width",
}


def add_config_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("experiment")
    group.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    group.add_argument("--encoding", choices=[e.value for e in Encoding])
    group.add_argument("--loss", choices=[k.value for k in LossKind])
    group.add_argument("--optimizer", choices=[k.value for k in OptimizerKind])
    group.add_argument("--lr", type=float)
    group.add_argument("--weight-decay", type=float)
    group.add_argument("--epochs", type=int)
    group.add_argument("--seed", type=int)
    group.add_argument("--image-size", type=int)
    group.add_argument("--projection-dim", type=int)
    group.add_argument("--activation", choices=[a.value for a in Activation])
    group.add_argument("--hidden-width", type=int)


def load_config(args: argparse.Namespace, environ: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """JSON file, then the seed environment variable, then explicit flags."""
    environ = os.environ if environ is None else environ
    data: Dict = {}
    if args.config is not None:
        data.update(json.loads(Path(args.config).read_text()))
    if environ.get(SEED_ENV):
        try:
            data["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise LabError(f"{SEED_ENV} must be an integer, got {environ[SEED_ENV]!r}")
    for flag, field in CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[field] = value
    return ExperimentConfig(**data)


# ---------- subcommands ----------

def cmd_enumerate(args) -> int:
    space = _space(args)
    rows = []
    counts = {kind: 0 for kind in MappingKind}
    for mapping in enumerate_mappings(space, limit=args.limit):
        kind = classify(mapping).kind
        counts[kind] += 1
        rows.append({
            "mapping_id": mapping.mapping_id,
            "table": mapping.table_string(),
            "class": kind.value,
            "image_size": mapping.image_size,
            "compositional_degree": compositional_degree(mapping),
        })
    frame = pd.DataFrame(rows)
    if args.out:
        write_csv(frame, Path(args.out))
    else:
        print(frame.to_string(index=False))

    non_bijections = counts[MappingKind.NON_BIJECTION] + counts[MappingKind.FULLY_DEGENERATE]
    print(f"total: {len(rows)}  compositional: {counts[MappingKind.COMPOSITIONAL]}  "
          f"holistic: {counts[MappingKind.HOLISTIC]}  non-bijection: {non_bijections}  "
          f"(fully degenerate: {counts[MappingKind.FULLY_DEGENERATE]})")
    return 0


def cmd_complexity(args) -> int:
    space = _space(args)
    rows = complexity_table(space, enumerate_mappings(space, limit=args.limit))
    violations = ordering_violations(rows)
    frame = complexity_frame(rows)

    if args.out:
        out = Path(args.out)
        csv_path = out if out.suffix == ".csv" else out / COMPLEXITY_CSV
        write_csv(frame, csv_path)
        write_manifest(manifest(None, space, ordering_violations=len(violations)),
                       csv_path.with_name(csv_path.stem + "_" + MANIFEST_JSON))
    else:
        print(frame.to_string(index=False))

    by_class = frame.groupby("class")["cl_bits"].agg(["min", "max", "count"])
    print(by_class.to_string())
    return 0


def cmd_bounds(args) -> int:
    L, V = args.L, args.V
    print(f"L={L} V={V}  K(bijection) <= {k_bound_bijection(L, V):.4f} bits  "
          f"K(compositional) <= {k_bound_comp(L, V):.4f} bits")
    for k in range(L + 1):
        print(f"  k_shared={k}: {partial_comp_bound(L, V, k):.4f} bits")

    rows = gamma_grid(args.max_L, args.max_V)
    frame = pd.DataFrame([r._asdict() for r in rows])
    for r in rows:
        if not r.bound_holds:
            logger.info("gamma lower bound fails at L=%d V=%d (%.3f < %.3f)", r.L, r.V, r.gamma, r.lower_bound)
        if not r.regime_holds:
            logger.info("regime condition fails at L=%d V=%d", r.L, r.V)
    if args.out:
        write_csv(frame, Path(args.out))
    else:
        print(frame.to_string(index=False))
    return 0


def cmd_train(args) -> int:
    config = load_config(args)
    out = Path(args.out)
    space = AttributeSpace.toy256()
    results = run_sweep(config, workers=args.workers)

    write_csv(runs_frame(results), out / RUNS_CSV)
    write_csv(curves_frame(results), out / CURVES_CSV)
    write_manifest(manifest(config, space, runs=len(results),
                            diverged=[r.mapping_id for r in results if r.diverged]), out / MANIFEST_JSON)
    if args.dump_dataset:
        dump_dataset(config, out)

    for metric in CorrelationMetric:
        report = correlate_sweep(results, metric, seed=config.seed)
        print(f"{metric.value}: rho={report.rho:.4f} p={report.p_analytic:.3g} "
              f"p_perm={report.p_permutation:.3g} n={report.n} excluded={report.excluded}")
    return 0


def dump_dataset(config: ExperimentConfig, out: Path):
    """inputs.csv once (inputs do not depend on the mapping) and labels.csv for every mapping."""
    space = AttributeSpace.toy256()
    inputs = encode_objects(space, config.encoding, config.seed, config.projection_dim, config.image_size)
    frame = pd.DataFrame(inputs, columns=[f"x_{j}" for j in range(inputs.shape[1])])
    frame.insert(0, "object_index", range(space.num_objects))
    write_csv(frame, out / "inputs.csv")

    records = []
    for mapping in enumerate_mappings(space):
        dataset = build_dataset(mapping, config.encoding, config.seed, config.projection_dim, config.image_size)
        for index, labels in enumerate(dataset.labels):
            records.append([mapping.mapping_id, index] + [int(y) for y in labels])
    columns = ["mapping_id", "object_index"] + [f"y_{k}" for k in range(space.num_attributes)]
    write_csv(pd.DataFrame(records, columns=columns), out / "labels.csv")


def cmd_correlate(args) -> int:
    results = read_runs(Path(args.runs))
    metrics = list(CorrelationMetric) if args.metric == "both" else [CorrelationMetric(args.metric)]
    reports = [correlate_sweep(results, m, shuffles=args.shuffles, seed=args.seed) for m in metrics]
    frame = pd.DataFrame([r.model_dump(mode="json") for r in reports])
    if args.out:
        write_csv(frame, Path(args.out))
    print(frame.to_string(index=False))
    return 0


def cmd_probe(args) -> int:
    config = load_config(args)
    if args.mapping_id is not None:
        mapping = Mapping.from_id(AttributeSpace.toy256(), args.mapping_id)
        report = influence_probe(mapping, config, args.probe_example, args.step_lr)
        print(f"mapping {mapping.mapping_id} ({classify(mapping).kind.value}), probe example {report.probe_example}")
        for index, row in enumerate(report.deltas):
            print(f"  example {index}: " + "  ".join(f"{d:+.6f}" for d in row))
        print(f"alignment: {report.alignment_score:+.6f}")
        return 0

    summary = alignment_by_class(config, seeds=range(config.seed, config.seed + args.seeds), step_lr=args.step_lr)
    print(f"seeds: {len(summary.seeds)}  compositional: {summary.compositional:+.6f}  "
          f"holistic: {summary.holistic:+.6f}  difference: {summary.difference:+.6f}")
    return 0


def cmd_plot(args) -> int:
    runs_dir = Path(args.runs)
    out = Path(args.out) if args.out else runs_dir
    results = read_runs(runs_dir)
    usable = [r for r in results if not r.diverged]

    curves = [
        PlotSeries(mapping_id=r.mapping_id, kind=r.kind, xs=tuple(range(r.curve.epochs)), ys=tuple(r.curve.losses))
        for r in results if r.curve is not None and r.curve.epochs
    ]
    _write_svg(out / "curves.svg", emit_svg(
        PlotSpec(kind=PlotKind.CURVES, x_label="epoch", y_label="training loss", title="Learning curves"), curves))

    for metric, label in ((CorrelationMetric.CL, "coding length (bits)"), (CorrelationMetric.TOPSIM, "topsim")):
        series = [
            PlotSeries(mapping_id=r.mapping_id, kind=r.kind,
                       xs=(r.cl_bits if metric is CorrelationMetric.CL else r.topsim,), ys=(r.convergence_time,))
            for r in usable
        ]
        annotation = None
        if len(series) >= 3:
            rho, p = pearson([s.xs[0] for s in series], [s.ys[0] for s in series])
            annotation = f"Pearson rho = {rho:.4f}, p = {p:.3g}"
        spec = PlotSpec(kind=PlotKind.SCATTER, x_label=label, y_label="convergence time",
                        title=f"{label} vs convergence time")
        _write_svg(out / f"scatter_{metric.value}.svg", emit_svg(spec, series, annotation))
    return 0


def _write_svg(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info("Wrote %s", path)


def cmd_grid(args) -> int:
    config = load_config(args)
    out = Path(args.out)
    rows = run_grid(config, workers=args.workers)
    frame = grid_frame(rows)
    write_csv(frame, out / GRID_CSV)
    write_manifest(manifest(config, AttributeSpace.toy256(), settings=len(rows)), out / MANIFEST_JSON)
    print(frame.to_string(index=False))
    return 0


def _space(args) -> AttributeSpace:
    if args.L == 2 and args.V == 2:
        return AttributeSpace.toy256()
    return AttributeSpace.generic(args.L, args.V)


# ---------- parser ----------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="compbias", description="Simplicity bias lab for compositional mappings")
    parser.add_argument("--log-dir", help="also write daily log files here")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="list and classify every mapping")
    _add_space_flags(p)
    p.add_argument("--out", help="CSV file instead of printing")
    p.set_defaults(handler=cmd_enumerate)

    p = sub.add_parser("complexity", help="grammar coding length of every mapping")
    _add_space_flags(p)
    p.add_argument("--out", help="CSV file or output directory")
    p.set_defaults(handler=cmd_complexity)

    p = sub.add_parser("bounds", help="Kolmogorov complexity bounds and the gamma grid")
    p.add_argument("--L", type=int, default=2)
    p.add_argument("--V", type=int, default=2)
    p.add_argument("--max-L", type=int, default=6)
    p.add_argument("--max-V", type=int, default=6)
    p.add_argument("--out", help="CSV file for the gamma grid")
    p.set_defaults(handler=cmd_bounds)

    p = sub.add_parser("train", help="train one network per mapping")
    add_config_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump-dataset", action="store_true")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("correlate", help="correlate mapping metrics with convergence time")
    p.add_argument("--runs", required=True, help="directory written by train")
    p.add_argument("--metric", choices=["both"] + [m.value for m in CorrelationMetric], default="both")
    p.add_argument("--shuffles", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV file for the correlation table")
    p.set_defaults(handler=cmd_correlate)

    p = sub.add_parser("probe", help="one-step influence probe")
    add_config_flags(p)
    p.add_argument("--mapping-id", type=int)
    p.add_argument("--probe-example", type=int)
    p.add_argument("--step-lr", type=float, default=1e-3)
    p.add_argument("--seeds", type=int, default=10, help="seeds for the class comparison")
    p.set_defaults(handler=cmd_probe)

    p = sub.add_parser("plot", help="SVG learning curves and scatter plots")
    p.add_argument("--runs", required=True, help="directory written by train")
    p.add_argument("--out", help="output directory, defaults to --runs")
    p.set_defaults(handler=cmd_plot)

    p = sub.add_parser("grid", help="correlations for every MLP setting")
    add_config_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=cmd_grid)
    return parser


def _add_space_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--L", type=int, default=2, help="attributes")
    parser.add_argument("--V", type=int, default=2, help="values per attribute")
    parser.add_argument("--limit", type=int, default=10 ** 6, help="refuse to enumerate more mappings")


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.log_dir or args.verbose:
        LoggerService("compbias", log_directory=args.log_dir,
                      log_level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.handler(args)
    except LabError as exc:
        logger.error("%s: %s", type(exc).__name__, exc.detail)
        return exc.exit_code
    except ValidationError as exc:
        logger.error("Invalid configuration: %s", exc)
        return 1
    except (OSError, ValueError) as exc:
        logger.error("%s", exc)
        return 1
