"""Command-line front end: ``cluster``, ``simulate``, ``benchmark`` and ``plot``.

Settings resolve in order: built-in defaults, then a ``key = value``
config file (or a previous run's ``manifest.json``), then flags.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from pkcluster import __version__
from pkcluster._format import fmt_float
from pkcluster.curves import AlignedDataset, PkCurve, align_shared, load_csv, write_csv
from pkcluster.dissimilarity import MetricSpec, pairwise_matrix
from pkcluster.errors import (
    ConfigError,
    EmptyIntersection,
    MissingArtifact,
    ParseError,
    PkClusterError,
)
from pkcluster.evaluation import CviSweep, LabelCrossTab, binomial_enrichment, ch_sweep, crosstab
from pkcluster.hierarchy import LINKAGES, Dendrogram, Partition, agglomerate, cut, cut_height, export_dendrogram, from_json
from pkcluster.nca import cluster_summary, nca, summarize, write_nca_csv
from pkcluster.simulation import (
    BenchmarkConfig,
    read_key_values,
    run_benchmark,
    simulate_case_study,
    simulate_two_groups,
)

OUTPUT_ENV = "PKCLUSTER_OUTPUT_DIR"
DEFAULT_OUTPUT = "pkcluster_out"


@dataclass(frozen=True)
class RunConfig:
    input: str = ""
    metric: str = "euclidean"
    cort_k: float = 2.0
    cort_inner: str = "euclidean"
    dtw_open_end: bool = False
    linkage: str = "average"
    normalization: str = "dose_normalized"
    k_max: int = 8
    k: int | None = None
    label: str = "phenotype"
    highlight: str = ""
    output: str = ""
    plots: bool = False

    def __post_init__(self):
        if not self.input:
            raise ConfigError("an input file is required")
        if not self.output:
            raise ConfigError("an output directory is required")
        if self.k_max < 2:
            raise ConfigError(f"k_max must be at least 2, got {self.k_max}")
        if self.k is not None and self.k < 1:
            raise ConfigError(f"k must be positive, got {self.k}")
        if self.linkage not in LINKAGES:
            raise ConfigError(f"unknown linkage {self.linkage!r}")
        if self.normalization not in ("raw", "dose_normalized"):
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        if self.highlight and "=" not in self.highlight:
            raise ConfigError("highlight must look like label=value, e.g. phenotype=PM")
        self.metric_spec  # validates

    @property
    def metric_spec(self) -> MetricSpec:
        return MetricSpec(self.metric, self.cort_k, self.cort_inner, dtw_open_end=self.dtw_open_end)

    def to_items(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                v = ""
            elif isinstance(v, bool):
                v = str(v).lower()
            elif isinstance(v, float):
                v = fmt_float(v)
            out[f.name] = str(v)
        return out

    @classmethod
    def from_items(cls, items: dict[str, str]) -> RunConfig:
        kinds = {f.name: f.type for f in fields(cls)}
        unknown = set(items) - set(kinds)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        kw = {}
        for key, raw in items.items():
            kw[key] = _coerce(key, str(raw).strip(), kinds[key])
        return cls(**kw)


def _coerce(key: str, raw: str, kind: str):
    try:
        if kind == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off", ""):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "int | None":
            return int(raw) if raw else None
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot interpret {raw!r}") from None
    return raw


def read_config_file(path: str | Path) -> dict[str, str]:
    """Key/value settings from a config file or a run manifest."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".json":
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return {k: str(v) for k, v in doc.get("config", doc).items()}
    try:
        return read_key_values(path)
    except ParseError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# cluster
# ---------------------------------------------------------------------------


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _pct(x: float) -> str:
    return f"{x:.2f}%"


def write_crosstab_csv(
    path: Path, table: LabelCrossTab, stats: dict, total, label_name: str
) -> None:
    """Presentation table: counts (row %) per label value, then mean (sd) metrics."""
    k = table.k
    sizes = table.cluster_sizes()
    n = table.total
    rows = [["n_obs"] + [f"{s} ({_pct(100 * s / n)})" for s in sizes] + [str(n)]]
    for value in table.rows:
        counts = table.rows[value]
        pcts = table.percentages(value)
        rows.append(
            [f"{label_name}={value}"]
            + [f"{c} ({_pct(p)})" for c, p in zip(counts, pcts)]
            + [f"{sum(counts)} (100%)"]
        )
    rows.append(
        ["auc_last_mean_sd"]
        + [f"{stats[c].auc_mean:.2f} ({stats[c].auc_sd:.2f})" for c in range(1, k + 1)]
        + [f"{total.auc_mean:.2f} ({total.auc_sd:.2f})"]
    )
    rows.append(
        ["c_max_mean_sd"]
        + [f"{stats[c].cmax_mean:.2f} ({stats[c].cmax_sd:.2f})" for c in range(1, k + 1)]
        + [f"{total.cmax_mean:.2f} ({total.cmax_sd:.2f})"]
    )
    _write_rows(path, ["row"] + [f"cluster_{c}" for c in range(1, k + 1)] + ["total"], rows)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_cluster(config: RunConfig, now: _dt.datetime | None = None) -> dict:
    """Run the whole workflow and write the artifact bundle.

    Returns the manifest dictionary.
    """
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    curves = load_csv(config.input)
    spec = config.metric_spec

    try:
        dataset: AlignedDataset | None = align_shared(curves, config.normalization)
    except EmptyIntersection:
        if spec.requires_equal_length:
            raise
        dataset = None

    if spec.requires_equal_length:
        matrix = pairwise_matrix(dataset, spec)
    else:
        matrix = pairwise_matrix(curves, spec, config.normalization)
    tree = agglomerate(matrix, config.linkage)

    sweep: CviSweep | None = None
    if dataset is not None and len(curves) >= 3:
        sweep = ch_sweep(dataset, tree, min(config.k_max, len(curves)))
    if config.k is not None:
        k, k_source = config.k, "override"
    elif sweep is not None:
        k, k_source = sweep.argmax_k, "ch_argmax"
    else:
        raise ConfigError(
            "cluster count cannot be chosen automatically for these curves; pass --k"
        )
    partition = cut(tree, k)

    labels = {cv.id: cv.labels.get(config.label, "") for cv in curves}
    highlight_ids: list[str] = []
    if config.highlight:
        hl_key, hl_value = config.highlight.split("=", 1)
        highlight_ids = [cv.id for cv in curves if cv.labels.get(hl_key) == hl_value]

    matrix.to_csv(out / "distances.csv")
    export_dendrogram(tree, out, "dendrogram", cut_at=cut_height(tree, k), highlight=highlight_ids)
    _write_rows(
        out / "ch_sweep.csv",
        ["k", "ch_score"],
        [[kv, fmt_float(s)] for kv, s in (sweep.rows() if sweep else [])],
    )
    _write_rows(out / "partition.csv", ["curve_id", "cluster"], list(partition.assignment.items()))

    normalized = config.normalization == "dose_normalized"
    write_nca_csv(out / "nca.csv", partition, curves, normalized)
    stats = cluster_summary(partition, curves, normalized)
    total = summarize([nca(cv, normalized) for cv in curves])
    _write_rows(
        out / "cluster_summary.csv",
        ["cluster", "n", "auc_last_mean", "auc_last_sd", "c_max_mean", "c_max_sd"],
        [
            [name, s.n, fmt_float(s.auc_mean), fmt_float(s.auc_sd), fmt_float(s.cmax_mean), fmt_float(s.cmax_sd)]
            for name, s in list(stats.items()) + [("total", total)]
        ],
    )
    table = crosstab(partition, labels)
    write_crosstab_csv(out / "crosstab.csv", table, stats, total, config.label)
    enrich_rows = []
    for value in table.rows:
        for c in range(1, k + 1):
            null_p = table.cluster_sizes()[c - 1] / table.total
            p = binomial_enrichment(table, value, c) if 0 < null_p < 1 else 1.0
            enrich_rows.append(
                [value, c, table.rows[value][c - 1], table.row_total(value), fmt_float(null_p), fmt_float(p)]
            )
    _write_rows(
        out / "enrichment.csv",
        ["label_value", "cluster", "observed", "label_total", "null_p", "p_value"],
        enrich_rows,
    )

    artifacts = [
        "distances.csv", "dendrogram.nwk", "dendrogram.json", "dendrogram.svg", "ch_sweep.csv",
        "partition.csv", "nca.csv", "cluster_summary.csv", "crosstab.csv", "enrichment.csv",
    ]
    if config.plots:
        from pkcluster.plotting import plot_run

        figs = plot_run(dataset, tree, partition, out / "figures", sweep, labels, config.label, highlight_ids)
        artifacts += [str(p.relative_to(out)) for p in figs.values()]

    manifest = {
        "tool": "pkcluster",
        "version": __version__,
        "numpy_version": np.__version__,
        "created": (now or _dt.datetime.now(_dt.timezone.utc)).isoformat(timespec="seconds"),
        "config": config.to_items(),
        "n_curves": len(curves),
        "shared_times": [str(t) for t in dataset.shared_times] if dataset else [],
        "chosen_k": k,
        "k_source": k_source,
        "artifacts": {name: _sha256(out / name) for name in artifacts},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    return manifest


# ---------------------------------------------------------------------------
# simulate / benchmark
# ---------------------------------------------------------------------------


def cmd_simulate(config: BenchmarkConfig, output: str | Path, scenario: str = "two-group") -> list[PkCurve]:
    """Write a synthetic curve file with a ``label_truth`` column."""
    if scenario == "two-group":
        curves = simulate_two_groups(config, replicate=0)
    elif scenario == "case-study":
        curves = simulate_case_study(seed=config.seed, sigma=config.sigma)
    else:
        raise ConfigError(f"unknown scenario {scenario!r}")
    write_csv(curves, output)
    return curves


def cmd_benchmark(config: BenchmarkConfig, outdir: str | Path | None = None, progress=None):
    report = run_benchmark(config, progress)
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        report.to_csv(outdir / "benchmark.csv")
        (outdir / "benchmark_summary.txt").write_text(report.summary(), encoding="utf-8")
    return report


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------


def _read_partition(path: Path) -> Partition:
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assignment = {r["curve_id"]: int(r["cluster"]) for r in rows}
    return Partition(assignment, max(assignment.values()))


def _read_sweep(path: Path) -> CviSweep | None:
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return None
    return CviSweep(tuple(int(r["k"]) for r in rows), tuple(float(r["ch_score"]) for r in rows))


def cmd_plot(run_dir: str | Path, input_path: str | None = None, outdir: str | Path | None = None) -> dict:
    """Figures for a finished ``cluster`` run."""
    from pkcluster.plotting import plot_run

    run_dir = Path(run_dir)
    needed = ["manifest.json", "partition.csv", "dendrogram.json", "ch_sweep.csv"]
    for name in needed:
        if not (run_dir / name).exists():
            raise MissingArtifact(f"{run_dir / name} not found; run `pkcluster cluster` first")
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    cfg = manifest["config"]
    source = input_path or cfg["input"]
    if not Path(source).exists():
        raise MissingArtifact(f"input curves {source} not found; pass --input")
    curves = load_csv(source)
    partition = _read_partition(run_dir / "partition.csv")
    tree: Dendrogram = from_json((run_dir / "dendrogram.json").read_text(encoding="utf-8"))
    try:
        dataset = align_shared(curves, cfg.get("normalization", "dose_normalized"))
    except EmptyIntersection:
        dataset = None
    label = cfg.get("label", "phenotype")
    labels = {cv.id: cv.labels.get(label, "") for cv in curves}
    highlight_ids = []
    if cfg.get("highlight"):
        key, value = cfg["highlight"].split("=", 1)
        highlight_ids = [cv.id for cv in curves if cv.labels.get(key) == value]
    return plot_run(
        dataset, tree, partition, Path(outdir) if outdir else run_dir / "figures",
        _read_sweep(run_dir / "ch_sweep.csv"),
        labels if any(labels.values()) else None, label, highlight_ids,
    )


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pkcluster", description="Cluster concentration-time curves by similarity.")
    p.add_argument("--version", action="version", version=f"pkcluster {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("cluster", help="cluster a curve file and write the report bundle")
    c.add_argument("input", nargs="?", help="long-format curve CSV")
    c.add_argument("--config", help="key = value file, or a previous run's manifest.json")
    c.add_argument("-o", "--output", help=f"output directory (default ${OUTPUT_ENV} or {DEFAULT_OUTPUT})")
    c.add_argument("--metric", choices=("euclidean", "correlation", "cort", "dtw", "frechet"))
    c.add_argument("--cort-k", type=float, dest="cort_k")
    c.add_argument("--cort-inner", choices=("euclidean", "dtw", "frechet"), dest="cort_inner")
    c.add_argument("--dtw-open-end", action="store_const", const=True, dest="dtw_open_end")
    c.add_argument("--linkage", choices=LINKAGES)
    c.add_argument("--normalization", choices=("raw", "dose_normalized"))
    c.add_argument("--k-max", type=int, dest="k_max")
    c.add_argument("--k", type=int, help="use this many clusters instead of the CH maximum")
    c.add_argument("--label", help="label column (without the label_ prefix) to cross-tabulate")
    c.add_argument("--highlight", help="mark leaves with this label on the dendrogram, e.g. phenotype=PM")
    c.add_argument("--plots", action="store_const", const=True, help="also render SVG figures")

    s = sub.add_parser("simulate", help="write a synthetic curve file")
    _benchmark_flags(s)
    s.add_argument("--scenario", choices=("two-group", "case-study"), default="two-group")
    s.add_argument("-o", "--output", required=True, help="CSV file to write")

    b = sub.add_parser("benchmark", help="replicate simulate-cluster-score study")
    _benchmark_flags(b)
    b.add_argument("-o", "--output", help="directory for benchmark.csv and the summary")

    pl = sub.add_parser("plot", help="render figures for a finished cluster run")
    pl.add_argument("run_dir", help="output directory of a cluster run")
    pl.add_argument("--input", help="curve CSV (default: the one recorded in the manifest)")
    pl.add_argument("-o", "--output", help="figure directory (default RUN_DIR/figures)")
    return p


def _benchmark_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value benchmark config file")
    p.add_argument("--params-a", dest="params_a", help="clearance,volume,ka[,dose] of group A")
    p.add_argument("--params-b", dest="params_b", help="clearance,volume,ka[,dose] of group B")
    p.add_argument("--sigma")
    p.add_argument("--n-per-group", dest="n_per_group")
    p.add_argument("--n-replicates", "--replicates", dest="n_replicates")
    p.add_argument("--grid", help="comma-separated sample times in hours")
    p.add_argument("--metric")
    p.add_argument("--linkage")
    p.add_argument("--seed")


def _benchmark_config(args) -> BenchmarkConfig:
    items = read_config_file(args.config) if args.config else {}
    for key in ("params_a", "params_b", "sigma", "n_per_group", "n_replicates", "grid", "metric", "linkage", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            items[key] = v
    return BenchmarkConfig.from_items(items)


def _as_item(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def _run_config(args) -> RunConfig:
    items = read_config_file(args.config) if args.config else {}
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            items[f.name] = _as_item(v)
    if not items.get("output"):
        items["output"] = os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT)
    return RunConfig.from_items(items)


def _report_error(exc: PkClusterError) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
    print(json.dumps(payload), file=sys.stderr)
    return exc.exit_code


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "cluster":
            manifest = cmd_cluster(_run_config(args))
            print(
                f"{manifest['n_curves']} curves -> {manifest['chosen_k']} clusters "
                f"({manifest['k_source']}); artifacts in {manifest['config']['output']}"
            )
        elif args.command == "simulate":
            curves = cmd_simulate(_benchmark_config(args), args.output, args.scenario)
            print(f"wrote {len(curves)} curves to {args.output}")
        elif args.command == "benchmark":
            report = cmd_benchmark(_benchmark_config(args), args.output)
            print(report.summary(), end="")
        elif args.command == "plot":
            figs = cmd_plot(args.run_dir, args.input, args.output)
            for path in figs.values():
                print(path)
    except PkClusterError as exc:
        return _report_error(exc)
    except OSError as exc:
        return _report_error(ParseError(str(exc)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
