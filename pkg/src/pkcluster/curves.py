"""Concentration-time curves, CSV ingestion and shared-timepoint alignment.

Sample times are held as :class:`decimal.Decimal` so that grids read from
different files intersect on their nominal protocol values; concentrations
are ordinary floats.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from pkcluster._format import fmt_float, fmt_time
from pkcluster.errors import (
    ConfigError,
    EmptyInput,
    EmptyIntersection,
    LengthMismatch,
    NegativeConcentration,
    NonFiniteValue,
    NonIncreasingTimes,
    NonPositiveDose,
    ParseError,
)

NORMALIZATIONS = ("raw", "dose_normalized")


def as_decimal(value: object) -> Decimal:
    """Convert a time value to an exact decimal.

    Floats go through their shortest ``repr`` so ``0.05`` stays ``0.05``.
    """
    if isinstance(value, Decimal):
        d = value
    elif isinstance(value, bool):
        raise TypeError("boolean is not a time value")
    elif isinstance(value, int):
        d = Decimal(value)
    elif isinstance(value, float):
        d = Decimal(repr(value))
    elif isinstance(value, str):
        d = Decimal(value.strip())
    else:
        d = Decimal(repr(float(value)))  # numpy scalars
    return d


@dataclass(frozen=True)
class PkCurve:
    """One subject-occasion's sampled concentration-time series.

    Construction validates every invariant; an invalid record raises one
    of the :class:`~pkcluster.errors.CurveValidationError` subclasses.
    """

    id: str
    times: tuple[Decimal, ...]
    concentrations: tuple[float, ...]
    dose: float
    labels: Mapping[str, str] = field(default_factory=dict)
    subject_id: str | None = None
    occasion: str = "1"

    def __post_init__(self):
        cid = str(self.id)
        object.__setattr__(self, "id", cid)
        times = list(self.times)
        concs = list(self.concentrations)
        if len(times) != len(concs):
            raise LengthMismatch(
                f"{len(times)} times but {len(concs)} concentrations", cid
            )
        if len(times) < 2:
            raise LengthMismatch("a curve needs at least 2 samples", cid)

        dec_times = []
        for i, t in enumerate(times):
            try:
                d = as_decimal(t)
            except (InvalidOperation, TypeError, ValueError) as exc:
                raise NonFiniteValue(f"time {t!r} is not a number", cid, i) from exc
            if not d.is_finite():
                raise NonFiniteValue(f"time {t!r} is not finite", cid, i)
            if dec_times and d <= dec_times[-1]:
                raise NonIncreasingTimes(
                    f"time {fmt_time(d)} does not exceed previous time "
                    f"{fmt_time(dec_times[-1])}",
                    cid,
                    i,
                )
            dec_times.append(d)

        float_concs = []
        for i, c in enumerate(concs):
            c = float(c)
            if not math.isfinite(c):
                raise NonFiniteValue(f"concentration {c!r} is not finite", cid, i)
            if c < 0:
                raise NegativeConcentration(f"concentration {c!r} is negative", cid, i)
            float_concs.append(c)

        dose = float(self.dose)
        if not math.isfinite(dose) or dose <= 0:
            raise NonPositiveDose(f"dose {dose!r} must be positive", cid)

        object.__setattr__(self, "times", tuple(dec_times))
        object.__setattr__(self, "concentrations", tuple(float_concs))
        object.__setattr__(self, "dose", dose)
        object.__setattr__(self, "labels", {str(k): str(v) for k, v in dict(self.labels).items()})
        if self.subject_id is None:
            object.__setattr__(self, "subject_id", cid)
        object.__setattr__(self, "occasion", str(self.occasion))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t(self) -> np.ndarray:
        """Sample times as a float array (hours)."""
        return np.array([float(x) for x in self.times])

    @property
    def c(self) -> np.ndarray:
        return np.array(self.concentrations)

    def values(self, normalization: str = "raw") -> np.ndarray:
        _check_normalization(normalization)
        if normalization == "dose_normalized":
            return self.c / self.dose
        return self.c


def validate_curve(raw: Mapping) -> PkCurve:
    """Build a :class:`PkCurve` from a loose record.

    ``raw`` needs ``id``, ``times``, ``concentrations`` and ``dose``;
    ``labels``, ``subject_id`` and ``occasion`` are optional.
    """
    return PkCurve(
        id=raw["id"],
        times=tuple(raw["times"]),
        concentrations=tuple(raw["concentrations"]),
        dose=raw["dose"],
        labels=raw.get("labels") or {},
        subject_id=raw.get("subject_id"),
        occasion=raw.get("occasion", "1"),
    )


def restrict_to_times(curve: PkCurve, times: Iterable) -> PkCurve:
    """Return ``curve`` keeping only the samples at ``times``."""
    keep = {as_decimal(t) for t in times}
    idx = [i for i, t in enumerate(curve.times) if t in keep]
    return PkCurve(
        id=curve.id,
        times=tuple(curve.times[i] for i in idx),
        concentrations=tuple(curve.concentrations[i] for i in idx),
        dose=curve.dose,
        labels=curve.labels,
        subject_id=curve.subject_id,
        occasion=curve.occasion,
    )


def _check_normalization(normalization: str) -> None:
    if normalization not in NORMALIZATIONS:
        raise ConfigError(
            f"normalization must be one of {NORMALIZATIONS}, got {normalization!r}"
        )


@dataclass(frozen=True)
class AlignedDataset:
    """Curves restricted to a common time grid, one row per curve."""

    curve_ids: tuple[str, ...]
    shared_times: tuple[Decimal, ...]
    matrix: np.ndarray
    normalization: str = "dose_normalized"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape != (len(self.curve_ids), len(self.shared_times)):
            raise LengthMismatch(
                f"matrix shape {m.shape} does not match "
                f"{len(self.curve_ids)} curves x {len(self.shared_times)} times"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "curve_ids", tuple(self.curve_ids))
        object.__setattr__(self, "shared_times", tuple(self.shared_times))

    def __len__(self) -> int:
        return len(self.curve_ids)

    @property
    def t(self) -> np.ndarray:
        return np.array([float(x) for x in self.shared_times])

    def row(self, curve_id: str) -> np.ndarray:
        return self.matrix[self.curve_ids.index(curve_id)]

    def subset(self, ids: Sequence[str]) -> AlignedDataset:
        pos = {cid: i for i, cid in enumerate(self.curve_ids)}
        return AlignedDataset(
            tuple(ids), self.shared_times, self.matrix[[pos[i] for i in ids]], self.normalization
        )


def align_shared(
    curves: Sequence[PkCurve], normalization: str = "dose_normalized"
) -> AlignedDataset:
    """Restrict curves to the sample times every one of them shares.

    Raises :class:`EmptyIntersection` when fewer than two times are
    shared; equal-length measures are not applicable to such data.
    """
    _check_normalization(normalization)
    if not curves:
        raise EmptyInput("no curves to align")
    shared = set(curves[0].times)
    for cv in curves[1:]:
        shared &= set(cv.times)
    if len(shared) < 2:
        raise EmptyIntersection(
            f"curves share {len(shared)} sample time(s); at least 2 are needed "
            "(mismatched grids would require interpolation)"
        )
    shared_times = tuple(sorted(shared))
    rows = []
    for cv in curves:
        where = {t: i for i, t in enumerate(cv.times)}
        vals = cv.values(normalization)
        rows.append([vals[where[t]] for t in shared_times])
    return AlignedDataset(
        curve_ids=tuple(cv.id for cv in curves),
        shared_times=shared_times,
        matrix=np.array(rows, dtype=float),
        normalization=normalization,
    )


# ---------------------------------------------------------------------------
# CSV input / output
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CsvSchema:
    """Column names of the long-format curve file."""

    subject_id: str = "subject_id"
    occasion: str = "occasion"
    time: str = "time_hr"
    concentration: str = "conc_ng_ml"
    dose: str = "dose_mg"
    label_prefix: str = "label_"


def curve_id_for(subject_id: str, occasion: str) -> str:
    return f"{subject_id}_{occasion}"


def load_csv(path: str | Path, schema: CsvSchema = CsvSchema()) -> list[PkCurve]:
    """Read a long-format file into one curve per (subject, occasion).

    Rows may appear in any order; each group is sorted by time. Dose and
    labels must be constant within a group.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open: {exc.strerror}", path=str(path)) from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty; a header row is required", 1, str(path)) from None
        header = [h.strip() for h in header]
        required = [schema.subject_id, schema.time, schema.concentration, schema.dose]
        missing = [c for c in required if c not in header]
        if missing:
            raise ParseError(f"missing required column(s): {', '.join(missing)}", 1, str(path))
        col = {name: i for i, name in enumerate(header)}
        label_cols = [h for h in header if h.startswith(schema.label_prefix)]

        groups: dict[tuple[str, str], dict] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, found {len(row)}", lineno, str(path)
                )
            subject = row[col[schema.subject_id]].strip()
            if not subject:
                raise ParseError("empty subject_id", lineno, str(path))
            occasion = row[col[schema.occasion]].strip() if schema.occasion in col else "1"
            time = _parse_decimal(row[col[schema.time]], schema.time, lineno, path)
            conc = _parse_float(row[col[schema.concentration]], schema.concentration, lineno, path)
            dose = _parse_float(row[col[schema.dose]], schema.dose, lineno, path)
            labels = {
                h[len(schema.label_prefix):]: row[col[h]].strip()
                for h in label_cols
                if row[col[h]].strip()
            }
            key = (subject, occasion or "1")
            g = groups.get(key)
            if g is None:
                groups[key] = g = {"dose": dose, "labels": labels, "samples": [], "line": lineno}
            else:
                if dose != g["dose"]:
                    raise ParseError(
                        f"dose {dose!r} differs from {g['dose']!r} given earlier "
                        f"for subject {subject!r} occasion {occasion!r}",
                        lineno,
                        str(path),
                    )
                if labels != g["labels"]:
                    raise ParseError(
                        f"labels differ within subject {subject!r} occasion {occasion!r}",
                        lineno,
                        str(path),
                    )
            g["samples"].append((time, conc))

    if not groups:
        raise ParseError("no data rows", path=str(path))
    curves = []
    for (subject, occasion), g in groups.items():
        samples = sorted(g["samples"], key=lambda s: s[0])
        curves.append(
            PkCurve(
                id=curve_id_for(subject, occasion),
                times=tuple(s[0] for s in samples),
                concentrations=tuple(s[1] for s in samples),
                dose=g["dose"],
                labels=g["labels"],
                subject_id=subject,
                occasion=occasion,
            )
        )
    return curves


def _parse_decimal(text: str, column: str, lineno: int, path: Path) -> Decimal:
    try:
        d = Decimal(text.strip())
    except InvalidOperation:
        raise ParseError(f"{column}: {text!r} is not a number", lineno, str(path)) from None
    if not d.is_finite():
        raise ParseError(f"{column}: {text!r} is not finite", lineno, str(path))
    return d


def _parse_float(text: str, column: str, lineno: int, path: Path) -> float:
    try:
        x = float(text.strip())
    except ValueError:
        raise ParseError(f"{column}: {text!r} is not a number", lineno, str(path)) from None
    if not math.isfinite(x):
        raise ParseError(f"{column}: {text!r} is not finite", lineno, str(path))
    return x


def write_csv(curves: Sequence[PkCurve], path: str | Path, schema: CsvSchema = CsvSchema()) -> None:
    """Write curves in the long format read by :func:`load_csv`."""
    label_keys = sorted({k for cv in curves for k in cv.labels})
    header = [schema.subject_id, schema.occasion, schema.time, schema.concentration, schema.dose]
    header += [schema.label_prefix + k for k in label_keys]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for cv in curves:
            labels = [cv.labels.get(k, "") for k in label_keys]
            for t, c in zip(cv.times, cv.concentrations):
                w.writerow(
                    [cv.subject_id, cv.occasion, fmt_time(t), fmt_float(c), fmt_float(cv.dose)]
                    + labels
                )
