"""Dissimilarity measures between short time series.

Five measures are provided: Euclidean, Pearson-correlation based, CORT
(temporal-correlation-adjusted), dynamic time warping and the discrete
Frechet distance. The last two accept series of different lengths; the
others require equal-length inputs, i.e. curves aligned on shared times.

Series are compared on their values as given. No z-normalization is
applied: for dose-normalized concentration curves the relative magnitude
is the signal, and z-normalizing a curve and a tenfold copy of it would
make them identical.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pkcluster._format import fmt_float
from pkcluster.curves import AlignedDataset, PkCurve
from pkcluster.errors import (
    ConfigError,
    DegenerateVector,
    EmptyInput,
    InputError,
    InvalidMatrix,
    LengthMismatch,
    ParseError,
    PkClusterError,
)

METRICS = ("euclidean", "correlation", "cort", "dtw", "frechet")
EQUAL_LENGTH_METRICS = ("euclidean", "correlation", "cort")

# |1 - COR| below this many ulps is rounding noise, not signal.
_CORR_SNAP = 16 * np.finfo(float).eps


@dataclass(frozen=True)
class MetricSpec:
    """Which dissimilarity to use and its tuning knobs.

    ``cort_k`` is the steepness of the CORT modulation and ``cort_inner``
    the raw distance it scales. ``dtw_open_end`` lets the second series
    end early (the first is always consumed in full).
    """

    kind: str = "euclidean"
    cort_k: float = 2.0
    cort_inner: str = "euclidean"
    dtw_step: str = "symmetric_sum"
    dtw_open_end: bool = False

    def __post_init__(self):
        if self.kind not in METRICS:
            raise ConfigError(f"unknown metric {self.kind!r}; choose from {METRICS}")
        if not (self.cort_k >= 0 and math.isfinite(self.cort_k)):
            raise ConfigError(f"cort_k must be a nonnegative number, got {self.cort_k!r}")
        if self.cort_inner not in ("euclidean", "dtw", "frechet"):
            raise ConfigError(f"cort_inner must be euclidean, dtw or frechet, got {self.cort_inner!r}")
        if self.dtw_step != "symmetric_sum":
            raise ConfigError(f"unsupported dtw_step {self.dtw_step!r}")

    @property
    def requires_equal_length(self) -> bool:
        return self.kind in EQUAL_LENGTH_METRICS

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "cort_k": self.cort_k,
            "cort_inner": self.cort_inner,
            "dtw_step": self.dtw_step,
            "dtw_open_end": self.dtw_open_end,
        }


def _as_series(x, name: str = "x") -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {a.shape}")
    if a.size == 0:
        raise EmptyInput(f"{name} is empty")
    return a


def _same_length(x: np.ndarray, y: np.ndarray, minimum: int = 1) -> None:
    if x.size != y.size:
        raise LengthMismatch(f"series lengths differ: {x.size} vs {y.size}")
    if x.size < minimum:
        raise LengthMismatch(f"series need at least {minimum} values, got {x.size}")


def d_euclidean(x, y) -> float:
    """L2 distance between two equal-length series."""
    x, y = _as_series(x, "x"), _as_series(y, "y")
    _same_length(x, y)
    return float(np.sqrt(np.sum((x - y) ** 2)))


def pearson(x, y) -> float:
    """Pearson correlation, snapped to +-1 inside the rounding band."""
    x, y = _as_series(x, "x"), _as_series(y, "y")
    _same_length(x, y, 2)
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.dot(xc, xc)
    sy = np.dot(yc, yc)
    if sx == 0 or sy == 0:
        raise DegenerateVector("correlation undefined for a constant series")
    r = float(np.dot(xc, yc) / np.sqrt(sx * sy))
    return _snap_unit(r)


def _snap_unit(r: float) -> float:
    if r >= 1 - _CORR_SNAP:
        return 1.0
    if r <= -1 + _CORR_SNAP:
        return -1.0
    return r


def d_correlation(x, y) -> float:
    """``sqrt(2 (1 - COR(x, y)))``; zero for any positive affine copy."""
    return math.sqrt(2.0 * (1.0 - pearson(x, y)))


def cort_coefficient(x, y) -> float:
    """Correlation of first differences (temporal correlation) in [-1, 1]."""
    x, y = _as_series(x, "x"), _as_series(y, "y")
    _same_length(x, y, 2)
    dx = np.diff(x)
    dy = np.diff(y)
    sx = np.dot(dx, dx)
    sy = np.dot(dy, dy)
    if sx == 0 or sy == 0:
        raise DegenerateVector("temporal correlation undefined when all increments are zero")
    return _snap_unit(float(np.dot(dx, dy) / np.sqrt(sx * sy)))


def cort_modulation(u: float, k: float) -> float:
    """Adaptive factor ``2 / (1 + exp(k u))``; 1 at k=0, below 1 for u > 0."""
    return 2.0 / (1.0 + math.exp(k * u))


def d_cort(x, y, spec: MetricSpec | None = None) -> float:
    """Raw distance scaled by how much the two series move together."""
    spec = spec or MetricSpec(kind="cort")
    x, y = _as_series(x, "x"), _as_series(y, "y")
    _same_length(x, y, 2)
    if np.array_equal(x, y):
        return 0.0
    u = cort_coefficient(x, y)
    if spec.cort_inner == "euclidean":
        inner = d_euclidean(x, y)
    elif spec.cort_inner == "dtw":
        inner = d_dtw(x, y, spec).distance
    else:
        inner = d_frechet(x, y)
    return cort_modulation(u, spec.cort_k) * inner


@dataclass(frozen=True)
class DtwResult:
    distance: float
    path: tuple[tuple[int, int], ...] = field(repr=False)

    def __float__(self) -> float:
        return self.distance


def _dtw_cost(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    n, m = x.size, y.size
    local = np.abs(x[:, None] - y[None, :])
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    # Row-wise recursion; the left neighbour dependency keeps the inner loop scalar.
    for i in range(1, n + 1):
        prev = acc[i - 1]
        row = acc[i]
        li = local[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if row[j - 1] < best:
                best = row[j - 1]
            row[j] = li[j - 1] + best
    return acc


def d_dtw(x, y, spec: MetricSpec | None = None, *, with_path: bool = True) -> DtwResult:
    """Dynamic time warping with unit step weights and no normalization.

    The local cost is ``|x_i - y_j|``; admissible steps are (1,0), (0,1)
    and (1,1). The path starts at the first pair and ends at the last
    pair, unless ``spec.dtw_open_end`` in which case it may end at any
    ``(N, j)``.

    Returns
    -------
    DtwResult
        ``distance`` and one optimal path as 0-based ``(i, j)`` pairs.
        Backtracking prefers the diagonal step on ties.
    """
    x, y = _as_series(x, "x"), _as_series(y, "y")
    open_end = bool(spec and spec.dtw_open_end)
    acc = _dtw_cost(x, y)
    n, m = x.size, y.size
    if open_end:
        end_j = int(np.argmin(acc[n, 1:])) + 1
    else:
        end_j = m
    dist = float(acc[n, end_j])
    if not with_path:
        return DtwResult(dist, ())
    path = [(n - 1, end_j - 1)]
    i, j = n, end_j
    while (i, j) != (1, 1):
        candidates = ((acc[i - 1, j - 1], i - 1, j - 1), (acc[i - 1, j], i - 1, j), (acc[i, j - 1], i, j - 1))
        _, i, j = min(candidates, key=lambda c: c[0])
        path.append((i - 1, j - 1))
    path.reverse()
    return DtwResult(dist, tuple(path))


def d_frechet(x, y) -> float:
    """Discrete Frechet distance between the value sequences."""
    x, y = _as_series(x, "x"), _as_series(y, "y")
    n, m = x.size, y.size
    local = np.abs(x[:, None] - y[None, :])
    ca = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            d = local[i, j]
            if i == 0 and j == 0:
                ca[i, j] = d
            elif i == 0:
                ca[i, j] = max(d, ca[0, j - 1])
            elif j == 0:
                ca[i, j] = max(d, ca[i - 1, 0])
            else:
                ca[i, j] = max(d, min(ca[i - 1, j], ca[i, j - 1], ca[i - 1, j - 1]))
    return float(ca[n - 1, m - 1])


def distance(x, y, spec: MetricSpec) -> float:
    """Dispatch to the measure named by ``spec.kind``."""
    if spec.kind == "euclidean":
        return d_euclidean(x, y)
    if spec.kind == "correlation":
        return d_correlation(x, y)
    if spec.kind == "cort":
        return d_cort(x, y, spec)
    if spec.kind == "dtw":
        return d_dtw(x, y, spec, with_path=False).distance
    return d_frechet(x, y)


# ---------------------------------------------------------------------------
# Pairwise matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DissimilarityMatrix:
    """Symmetric pairwise dissimilarities with zero diagonal."""

    ids: tuple[str, ...]
    values: np.ndarray
    metric: MetricSpec = MetricSpec()

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        check_matrix(v, len(self.ids))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.ids)

    def permuted(self, order: Sequence[int]) -> DissimilarityMatrix:
        order = list(order)
        return DissimilarityMatrix(
            tuple(self.ids[i] for i in order), self.values[np.ix_(order, order)], self.metric
        )

    def to_csv(self, path: str | Path) -> None:
        """Square CSV; first row and column carry the curve ids."""
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([""] + list(self.ids))
            for cid, row in zip(self.ids, self.values):
                w.writerow([cid] + [fmt_float(v) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path, metric: MetricSpec = MetricSpec()) -> DissimilarityMatrix:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ParseError("empty matrix file", path=str(path))
        ids = rows[0][1:]
        vals = []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != len(ids) + 1:
                raise ParseError(f"expected {len(ids) + 1} fields", lineno, str(path))
            try:
                vals.append([float(v) for v in row[1:]])
            except ValueError:
                raise ParseError("non-numeric entry", lineno, str(path)) from None
        return cls(tuple(ids), np.array(vals).reshape(len(ids), len(ids)), metric)


def check_matrix(v: np.ndarray, n: int | None = None) -> None:
    """Raise :class:`InvalidMatrix` unless ``v`` is a valid distance matrix."""
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise InvalidMatrix(f"matrix must be square, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise InvalidMatrix(f"matrix is {v.shape[0]}x{v.shape[0]} but {n} ids were given")
    if not np.all(np.isfinite(v)):
        raise InvalidMatrix("matrix contains NaN or infinite entries")
    if np.any(v < 0):
        raise InvalidMatrix("matrix contains negative entries")
    if np.any(np.diag(v) != 0):
        raise InvalidMatrix("matrix diagonal must be zero")
    if not np.array_equal(v, v.T):
        raise InvalidMatrix("matrix is not symmetric")


def pairwise_matrix(
    data: AlignedDataset | Sequence[PkCurve],
    spec: MetricSpec = MetricSpec(),
    normalization: str = "raw",
) -> DissimilarityMatrix:
    """All pairwise dissimilarities under ``spec``.

    ``data`` is either an aligned dataset or, for DTW and Frechet only, a
    list of curves on arbitrary grids (``normalization`` then selects raw
    or dose-normalized concentrations). Only the upper triangle is
    evaluated and mirrored.
    """
    if isinstance(data, AlignedDataset):
        ids = data.curve_ids
        series = list(data.matrix)
    else:
        if spec.requires_equal_length:
            lengths = {len(cv) for cv in data}
            if len(lengths) > 1:
                raise LengthMismatch(
                    f"{spec.kind} needs curves on a common grid; align them first"
                )
        ids = tuple(cv.id for cv in data)
        series = [cv.values(normalization) for cv in data]
    n = len(ids)
    if n == 0:
        raise EmptyInput("no curves")
    values = np.zeros((n, n))
    if spec.kind == "euclidean" and isinstance(data, AlignedDataset):
        mat = data.matrix
        for i in range(n - 1):
            values[i, i + 1:] = np.sqrt(np.sum((mat[i + 1:] - mat[i]) ** 2, axis=1))
    else:
        for i in range(n - 1):
            for j in range(i + 1, n):
                try:
                    values[i, j] = distance(series[i], series[j], spec)
                except PkClusterError as exc:
                    raise type(exc)(f"pair ({ids[i]!r}, {ids[j]!r}): {exc}") from exc
    values = values + values.T
    return DissimilarityMatrix(ids, values, spec)
