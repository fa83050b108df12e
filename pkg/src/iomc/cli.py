"""Command-line entry point: ``iomc {stats,cluster,complete,simulate}``.

Every run writes its artifacts to a fresh timestamped directory under the
output root (``--out``, else ``$IOMC_OUTPUT_DIR``, else ``./runs``) together
with ``manifest.json``: input hashes, seed, configuration and version.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import secrets
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, ingest
from .clustering import (
    Direction,
    Linkage,
    country_series,
    cut,
    dissimilarity_matrix,
    hierarchical_cluster,
    select_num_clusters,
    wss_tss_trace,
)
from .completion import LAMBDA_PRESETS, CompletionConfig, SelectionMetric, complete_panel
from .errors import IOMCError
from .iomodel import BlockRef, IOTable, assemble_panel
from .synthetic import SyntheticConfig, experiment_pairs, run_cluster_count_simulation

logger = logging.getLogger("iomc")

OUTPUT_ENV = "IOMC_OUTPUT_DIR"


def _csv_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunDirectory:
    """Per-run output folder plus the manifest that describes it."""

    def __init__(self, root, subcommand: str, args: argparse.Namespace, inputs: Sequence[Path]):
        root = Path(root)
        stamp = _dt.datetime.now().strftime("%Y%m%dT%H%M%S")
        base = root / f"{subcommand}-{stamp}"
        path, n = base, 0
        root.mkdir(parents=True, exist_ok=True)
        while True:
            try:
                path.mkdir()
                break
            except FileExistsError:
                n += 1
                path = Path(f"{base}-{n}")
        self.path = path
        self.artifacts: list[str] = []
        self.manifest = {
            "subcommand": subcommand,
            "version": __version__,
            "created": _dt.datetime.now().isoformat(timespec="seconds"),
            "argv": list(sys.argv[1:]),
            "seed": args.seed,
            "threads": args.threads,
            "inputs": [{"path": str(p), "sha256": sha256_file(p)} for p in inputs],
            "config": {},
            "results": {},
        }

    def file(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.path / name

    def finish(self) -> Path:
        self.manifest["artifacts"] = self.artifacts
        out = self.path / "manifest.json"
        out.write_text(json.dumps(self.manifest, indent=2, sort_keys=True, default=_json_default))
        return out


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def schema_from_args(args) -> ingest.SchemaOptions:
    return ingest.SchemaOptions(
        layout=args.layout,
        delimiter=args.delimiter,
        decimal=args.decimal,
        row_code=args.row_code or None,
        drop_row_labels=frozenset(_csv_list(args.drop_rows)),
        drop_col_labels=frozenset(_csv_list(args.drop_cols)),
        final_labels=tuple(_csv_list(args.finals)),
    )


def load_tables(paths: Sequence[Path], opts: ingest.SchemaOptions,
                years: Sequence[int] | None = None) -> list[IOTable]:
    tables: dict[int, IOTable] = {}
    for p in paths:
        for t in ingest.read_tables(p, opts):
            if t.year in tables:
                raise IOMCError(f"year {t.year} appears in more than one input ({p})")
            tables[t.year] = t
    if years:
        missing = sorted(set(years) - set(tables))
        if missing:
            raise IOMCError(f"requested years not found in inputs: {missing}")
        tables = {y: t for y, t in tables.items() if y in set(years)}
    return [tables[y] for y in sorted(tables)]


# ---------------------------------------------------------------------------
# Subcommands


def cmd_stats(args, run: RunDirectory, opts) -> dict:
    rows = []
    for p in args.tables:
        for t in ingest.read_tables(p, opts):
            rows.append((t.year, str(p), t.t.shape[0], t.t.shape[1], ingest.sparsity_stats(t)))
    rows.sort()
    ingest.export_rows(run.file("sparsity.csv"),
                       ["year", "file", "rows", "cols", "zero_percent"], rows)
    for year, _, r, c, pct in rows:
        print(f"{year}\t{r}x{c}\t{pct:.3f}%")
    return {"sparsity": {str(y): pct for y, _, _, _, pct in rows}}


def cmd_cluster(args, run: RunDirectory, opts) -> dict:
    tables = load_tables(args.tables, opts, args.years)
    if len(tables) < 2:
        raise IOMCError("clustering needs at least two years of tables")
    countries = _csv_list(args.countries) if args.countries else None
    series = country_series(tables, args.reference, args.direction, countries)
    d = dissimilarity_matrix(series)
    dendro = hierarchical_cluster(d, args.linkage)
    if args.k == "auto":
        k = select_num_clusters(d, dendro, args.cutoff)
    else:
        k = int(args.k)
        if not 1 <= k <= d.size:
            raise IOMCError(f"k must lie in [1, {d.size}], got {k}")
    assignment = cut(dendro, k)
    run.file("dendrogram.txt").write_text(dendro.to_text())
    ingest.export_assignment(assignment, run.file("assignment.csv"))
    ingest.export_rows(run.file("wss_tss.csv"), ["k", "wss_tss"], wss_tss_trace(d, dendro))
    ingest.export_rows(run.file("aacd.csv"), ["country"] + list(d.labels),
                       ([c] + [float(x) for x in row] for c, row in zip(d.labels, d.d)))
    groups = {str(g): members for g, members in assignment.groups().items()}
    for g, members in groups.items():
        print(f"{g}\t{' '.join(members)}")
    return {"k": k, "years": [t.year for t in tables], "groups": groups}


def cmd_complete(args, run: RunDirectory, opts) -> dict:
    tables = load_tables(args.tables, opts, args.years)
    group = _csv_list(args.group)
    if len(set(group)) != len(group):
        raise IOMCError("group countries must be distinct")
    pairs = experiment_pairs(args.reference, group, args.direction)
    obscured = [BlockRef.parse(b) for b in args.obscure]
    config = CompletionConfig.preset(args.lambda_preset, epsilon=args.epsilon,
                                     max_iterations=args.max_iterations,
                                     selection_metric=args.metric, rng_seed=args.seed)
    run.manifest["config"]["completion"] = config.to_dict()
    panel, mask = assemble_panel(tables, pairs, obscured, rng_seed=args.seed,
                                 stacking=args.stacking)
    result = complete_panel(panel.m, mask, config, threads=args.threads)
    truth = np.where(np.isfinite(panel.m), panel.m, 0.0).clip(min=0.0)

    ingest.export_lambda_path(result, run.file("lambda_path.csv"))
    ingest.export_spectrum(truth, result.completed, run.file("spectrum.csv"))
    ingest.export_heatmap(truth, run.file("original.ppm"))
    ingest.export_mask(mask.train, run.file("mask.ppm"))
    ingest.export_heatmap(result.completed, run.file("completed.ppm"))
    ingest.export_heatmap(np.abs(result.completed - truth), run.file("abs_error.ppm"))
    for name in ("original", "completed", "abs_error"):
        run.artifacts.append(f"{name}.csv")

    out = {
        "best_lambda": result.best_lambda,
        "panel_shape": list(panel.m.shape),
        "obscured": [str(b) for b in obscured],
        "split_sizes": {s: int(getattr(mask, s).sum()) for s in ("train", "val", "test")},
        "baseline": {"lambda": result.baseline_record.lam,
                     "rmse_val": result.baseline_record.rmse_val,
                     "rmse_test": result.baseline_record.rmse_test,
                     "smape_val": result.baseline_record.smape_val,
                     "smape_test": result.baseline_record.smape_test},
        "best": result.metrics,
        "reduction": {f"{m}_{s}": result.reduction(s, m)
                      for m in ("rmse", "smape") for s in ("val", "test")},
    }
    print(f"lambda*={result.best_lambda:g}  "
          f"RMSE val {out['baseline']['rmse_val']:.4f} -> {result.metrics['val']['rmse']:.4f}  "
          f"test {out['baseline']['rmse_test']:.4f} -> {result.metrics['test']['rmse']:.4f}")
    return out


def cmd_simulate(args, run: RunDirectory, opts) -> dict:
    tables = load_tables(args.tables, opts, args.years)
    config = SyntheticConfig(alpha=args.alpha, beta=args.beta,
                             replications=args.replications, rng_seed=args.seed)
    run.manifest["config"]["synthetic"] = {"alpha": config.alpha, "beta": config.beta,
                                           "replications": config.replications,
                                           "cutoff": args.cutoff, "linkage": args.linkage}
    directions = ["input", "output"] if args.direction == "both" else [args.direction]
    out = {}
    for direction in directions:
        summary = run_cluster_count_simulation(tables, args.reference, direction, config,
                                               cutoff=args.cutoff, linkage=args.linkage,
                                               threads=args.threads)
        summary.to_csv(run.file(f"simulation_{direction}.csv"))
        out[direction] = summary.stats
        s = summary.stats
        print(f"{direction}\tmedian {s['median']:g}\tmean {s['mean']:.3f}\t"
              f"min {s['min']:g}\tmax {s['max']:g}")
    return out


COMMANDS = {"stats": cmd_stats, "cluster": cmd_cluster, "complete": cmd_complete,
            "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("tables", nargs="+", type=Path, help="table files (long or wide CSV)")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for all randomness (drawn and recorded when omitted)")
    common.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    common.add_argument("--out", type=Path, default=None,
                        help=f"output root (default ${OUTPUT_ENV} or ./runs)")
    common.add_argument("--log-level", default="WARNING")
    schema = common.add_argument_group("table schema")
    schema.add_argument("--layout", choices=("auto", "long", "wide"), default="auto")
    schema.add_argument("--delimiter", default=",")
    schema.add_argument("--decimal", default=".")
    schema.add_argument("--row-code", default="ROW",
                        help="rest-of-world code to drop (empty string keeps it)")
    schema.add_argument("--drop-rows", default="",
                        help="comma-separated value-added/tax row labels to drop")
    schema.add_argument("--drop-cols", default="", help="comma-separated column labels to drop")
    schema.add_argument("--finals", default="",
                        help="comma-separated final-demand labels (inferred when empty)")
    schema.add_argument("--years", type=lambda s: [int(x) for x in _csv_list(s)], default=None,
                        help="comma-separated years to use (default: all)")

    parser = argparse.ArgumentParser(prog="iomc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("stats", parents=[common], help="percentage of zero entries per year")

    p = sub.add_parser("cluster", parents=[common], help="AACD hierarchical clustering")
    p.add_argument("--reference", required=True)
    p.add_argument("--direction", choices=[d.value for d in Direction], default="input")
    p.add_argument("--linkage", choices=[x.value for x in Linkage], default="complete")
    p.add_argument("--k", default="auto", help="number of clusters or 'auto' (default)")
    p.add_argument("--cutoff", type=float, default=0.5, help="WSS/TSS cutoff for --k auto")
    p.add_argument("--countries", default=None, help="comma-separated subset to cluster")

    p = sub.add_parser("complete", parents=[common], help="complete a hidden block")
    p.add_argument("--reference", required=True)
    p.add_argument("--group", required=True, help="comma-separated partner countries")
    p.add_argument("--obscure", required=True, action="append",
                   help="block to hide, e.g. ITA/AUT,2014 (repeatable)")
    p.add_argument("--direction", choices=[d.value for d in Direction], default="input")
    p.add_argument("--stacking", choices=("horizontal", "vertical"), default="horizontal")
    p.add_argument("--lambda-preset", choices=sorted(LAMBDA_PRESETS), default="default")
    p.add_argument("--epsilon", type=float, default=1e-9)
    p.add_argument("--max-iterations", type=int, default=500)
    p.add_argument("--metric", choices=[m.value for m in SelectionMetric], default="rmse")

    p = sub.add_parser("simulate", parents=[common], help="cluster-count robustness replications")
    p.add_argument("--reference", required=True)
    p.add_argument("--direction", choices=["input", "output", "both"], default="both")
    p.add_argument("--replications", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=1.0, help="Gamma shape")
    p.add_argument("--beta", type=float, default=1.0, help="Gamma scale")
    p.add_argument("--cutoff", type=float, default=0.5)
    p.add_argument("--linkage", choices=[x.value for x in Linkage], default="complete")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    if args.seed is None:
        args.seed = secrets.randbelow(2**32)
        logger.info("drawn seed %d", args.seed)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        for p in args.tables:
            if not p.is_file():
                raise FileNotFoundError(f"input file not found: {p}")
        root = args.out or Path(os.environ.get(OUTPUT_ENV) or "runs")
        opts = schema_from_args(args)
        run = RunDirectory(root, args.command, args, args.tables)
        run.manifest["config"]["schema"] = {
            "layout": opts.layout, "delimiter": opts.delimiter, "decimal": opts.decimal,
            "row_code": opts.row_code, "drop_rows": sorted(opts.drop_row_labels),
            "drop_cols": sorted(opts.drop_col_labels), "finals": list(opts.final_labels),
            "years": args.years,
        }
        run.manifest["config"]["arguments"] = {
            k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
            if k not in ("tables", "out")
        }
        run.manifest["results"] = COMMANDS[args.command](args, run, opts)
        manifest = run.finish()
    except (IOMCError, OSError, ValueError, KeyError) as exc:
        print(f"iomc: error: {exc}", file=sys.stderr)
        return 1
    print(f"artifacts written to {manifest.parent}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
