"""Non-compartmental summaries: AUC to the last sample, Cmax and Tmax."""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pkcluster._format import fmt_float
from pkcluster.curves import PkCurve
from pkcluster.errors import IdMismatch
from pkcluster.hierarchy import Partition


def trapezoid(t, c) -> float:
    t = np.asarray(t, dtype=float)
    c = np.asarray(c, dtype=float)
    return float(np.sum(np.diff(t) * (c[1:] + c[:-1]) / 2))


def auc_last(curve: PkCurve, normalized: bool = False) -> float:
    """Linear-trapezoidal area from the first to the last observation."""
    auc = trapezoid(curve.t, curve.c)
    return auc / curve.dose if normalized else auc


def cmax_tmax(curve: PkCurve, normalized: bool = False) -> tuple[float, float]:
    """Peak concentration and the earliest time it is observed."""
    c = curve.c
    i = int(np.argmax(c))  # first occurrence on ties
    cmax = float(c[i])
    return (cmax / curve.dose if normalized else cmax), float(curve.times[i])


@dataclass(frozen=True)
class NcaSummary:
    curve_id: str
    auc_last: float
    c_max: float
    t_max: float
    dose: float
    normalized: bool


def nca(curve: PkCurve, normalized: bool = False) -> NcaSummary:
    cmax, tmax = cmax_tmax(curve, normalized)
    return NcaSummary(curve.id, auc_last(curve, normalized), cmax, tmax, curve.dose, normalized)


@dataclass(frozen=True)
class ClusterStats:
    n: int
    auc_mean: float
    auc_sd: float
    cmax_mean: float
    cmax_sd: float


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1))


def summarize(summaries: Sequence[NcaSummary]) -> ClusterStats:
    """Mean and sample sd (0 for a single curve) of AUC_last and Cmax."""
    auc_m, auc_s = _mean_sd([s.auc_last for s in summaries])
    c_m, c_s = _mean_sd([s.c_max for s in summaries])
    return ClusterStats(len(summaries), auc_m, auc_s, c_m, c_s)


def cluster_summary(
    partition: Partition, curves: Sequence[PkCurve], normalized: bool = True
) -> dict[int, ClusterStats]:
    """Per-cluster :class:`ClusterStats`, keyed ``1..k``."""
    by_id = {cv.id: cv for cv in curves}
    missing = [cid for cid in partition.ids if cid not in by_id]
    if missing:
        raise IdMismatch(f"no curve for partition id(s): {', '.join(missing[:5])}")
    return {
        c: summarize([nca(by_id[cid], normalized) for cid in members])
        for c, members in partition.clusters().items()
    }


def write_nca_csv(
    path: str | Path, partition: Partition, curves: Sequence[PkCurve], normalized: bool = True
) -> None:
    """One row per curve: ``curve_id,cluster,auc_last,c_max,t_max,dose,normalized``."""
    by_id = {cv.id: cv for cv in curves}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["curve_id", "cluster", "auc_last", "c_max", "t_max", "dose", "normalized"])
        for cid, c in partition.assignment.items():
            s = nca(by_id[cid], normalized)
            w.writerow(
                [cid, c, fmt_float(s.auc_last), fmt_float(s.c_max), fmt_float(s.t_max),
                 fmt_float(s.dose), str(normalized).lower()]
            )
