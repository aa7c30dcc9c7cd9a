"""One-compartment oral-absorption model and replicate benchmark studies.

Random streams come from NumPy's PCG64 bit generator seeded through
``SeedSequence(seed, spawn_key=...)``; every simulated curve gets its own
spawn key, so results do not depend on evaluation order.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pkcluster._format import fmt_float
from pkcluster.curves import PkCurve, align_shared, as_decimal, curve_id_for
from pkcluster.dissimilarity import MetricSpec, pairwise_matrix
from pkcluster.errors import ConfigError, DegenerateRates, ParseError
from pkcluster.evaluation import match_accuracy, rand_index
from pkcluster.hierarchy import LINKAGES, Partition, agglomerate, cut

PRNG_NAME = "numpy PCG64 via SeedSequence(seed, spawn_key)"


@dataclass(frozen=True)
class PkModelParams:
    """Dose (mg), clearance (L/h), central volume (L), absorption rate (1/h)."""

    clearance: float
    volume: float
    ka: float
    dose: float = 100.0

    def __post_init__(self):
        for name in ("clearance", "volume", "ka", "dose"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if self.ka == self.k_el:
            raise DegenerateRates("absorption and elimination rates coincide")

    @property
    def k_el(self) -> float:
        return self.clearance / self.volume

    @property
    def half_life(self) -> float:
        return math.log(2) / self.k_el

    def to_text(self) -> str:
        return ",".join(fmt_float(v) for v in (self.clearance, self.volume, self.ka, self.dose))

    @classmethod
    def from_text(cls, text: str) -> PkModelParams:
        """Parse ``"clearance,volume,ka[,dose]"``."""
        try:
            parts = [float(p) for p in text.split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse model parameters {text!r}") from None
        if len(parts) not in (3, 4):
            raise ConfigError(f"expected clearance,volume,ka[,dose], got {text!r}")
        return cls(*parts)


# the two reference curves: equal exposure, Cmax of 0.5 and 1
PARAMS_C1 = PkModelParams(clearance=66.65, volume=189.84, ka=30.36, dose=100.0)
PARAMS_C2 = PkModelParams(clearance=66.67, volume=93.42, ka=43.90, dose=100.0)


def concentration(params: PkModelParams, t):
    """``D ka / (V (ka - kel)) * (exp(-kel t) - exp(-ka t))``; accepts arrays."""
    t = np.asarray(t, dtype=float)
    ka, kel = params.ka, params.k_el
    if ka == kel:
        raise DegenerateRates("absorption and elimination rates coincide")
    scale = params.dose * ka / (params.volume * (ka - kel))
    out = scale * (np.exp(-kel * t) - np.exp(-ka * t)) + 0.0  # no -0.0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AnalyticMetrics:
    t_max: float
    c_max: float
    auc_inf: float


def analytic_metrics(params: PkModelParams) -> AnalyticMetrics:
    ka, kel = params.ka, params.k_el
    t_max = math.log(ka / kel) / (ka - kel)
    return AnalyticMetrics(t_max, concentration(params, t_max), params.dose / params.clearance)


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative lognormal error: ``C(t) * exp(eps)``, ``eps ~ N(0, sigma^2)``."""

    sigma: float = 0.1
    seed: int = 20240101
    kind: str = "multiplicative_lognormal"

    def __post_init__(self):
        if self.kind != "multiplicative_lognormal":
            raise ConfigError(f"unsupported noise kind {self.kind!r}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ConfigError(f"sigma must be nonnegative, got {self.sigma!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")


def rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def default_grid(*params: PkModelParams, n_points: int = 15) -> tuple[float, ...]:
    """Log-spaced times from 0.05 h to five half-lives of the slowest curve."""
    slowest = max(p.half_life for p in params)
    grid = np.geomspace(0.05, 5 * slowest, n_points)
    # round so that the grid survives a text round trip unchanged
    return tuple(float(f"{g:.6g}") for g in grid)


def simulate_group(
    params: PkModelParams,
    noise: NoiseSpec,
    n_curves: int,
    time_grid: Sequence[float],
    group: str = "A",
    stream: Sequence[int] = (0,),
    scale: float = 1.0,
) -> list[PkCurve]:
    """Noisy replicates of one model curve.

    Curve ``i`` draws its errors from the stream ``(seed, *stream, i)``.
    Each curve is labelled ``truth=<group>``. ``scale`` converts model
    output units (mg/L by default) if needed.
    """
    if n_curves < 1:
        raise ConfigError(f"n_curves must be at least 1, got {n_curves}")
    times = tuple(as_decimal(t) for t in time_grid)
    mean = scale * np.asarray(concentration(params, [float(t) for t in times]))
    curves = []
    for i in range(n_curves):
        if noise.sigma > 0:
            eps = rng_for(noise.seed, *stream, i).normal(0.0, noise.sigma, len(times))
            conc = mean * np.exp(eps)
        else:
            conc = mean.copy()
        subject = f"{group}{i + 1:03d}"
        curves.append(
            PkCurve(
                id=curve_id_for(subject, "1"),
                times=times,
                concentrations=tuple(conc),
                dose=params.dose,
                labels={"truth": group},
                subject_id=subject,
                occasion="1",
            )
        )
    return curves


# ---------------------------------------------------------------------------
# Replicate benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkConfig:
    params_a: PkModelParams = PARAMS_C1
    params_b: PkModelParams = PARAMS_C2
    sigma: float = 0.1
    n_per_group: int = 100
    n_replicates: int = 1000
    grid: tuple[float, ...] | None = None
    metric: str = "euclidean"
    linkage: str = "average"
    seed: int = 20240101
    k: int = 2

    def __post_init__(self):
        NoiseSpec(self.sigma, self.seed)
        MetricSpec(self.metric)
        if self.linkage not in LINKAGES:
            raise ConfigError(f"unknown linkage {self.linkage!r}")
        if self.n_per_group < 1 or self.n_replicates < 1:
            raise ConfigError("n_per_group and n_replicates must be at least 1")
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))

    @property
    def time_grid(self) -> tuple[float, ...]:
        return self.grid if self.grid is not None else default_grid(self.params_a, self.params_b)

    def to_items(self) -> dict[str, str]:
        return {
            "params_a": self.params_a.to_text(),
            "params_b": self.params_b.to_text(),
            "sigma": fmt_float(self.sigma),
            "n_per_group": str(self.n_per_group),
            "n_replicates": str(self.n_replicates),
            "grid": ",".join(fmt_float(g) for g in self.time_grid),
            "metric": self.metric,
            "linkage": self.linkage,
            "seed": str(self.seed),
        }

    @classmethod
    def from_items(cls, items: Mapping[str, str]) -> BenchmarkConfig:
        known = {"params_a", "params_b", "sigma", "n_per_group", "n_replicates", "grid",
                 "metric", "linkage", "seed"}
        unknown = set(items) - known
        if unknown:
            raise ConfigError(f"unknown benchmark key(s): {', '.join(sorted(unknown))}")
        kw: dict = {}
        try:
            for key, value in items.items():
                value = value.strip()
                if key in ("params_a", "params_b"):
                    kw[key] = PkModelParams.from_text(value)
                elif key == "sigma":
                    kw[key] = float(value)
                elif key in ("n_per_group", "n_replicates", "seed"):
                    kw[key] = int(value)
                elif key == "grid":
                    kw[key] = None if value in ("", "default") else tuple(
                        float(g) for g in value.split(",")
                    )
                else:
                    kw[key] = value
        except ValueError as exc:
            raise ConfigError(f"bad benchmark config value: {exc}") from None
        return cls(**kw)


def read_key_values(path: str | Path) -> dict[str, str]:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key = value", lineno, str(path))
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def simulate_two_groups(config: BenchmarkConfig, replicate: int = 0) -> list[PkCurve]:
    noise = NoiseSpec(config.sigma, config.seed)
    grid = config.time_grid
    return simulate_group(
        config.params_a, noise, config.n_per_group, grid, "A", (replicate, 0)
    ) + simulate_group(config.params_b, noise, config.n_per_group, grid, "B", (replicate, 1))


@dataclass
class BenchmarkReport:
    config: BenchmarkConfig
    accuracy: list[float] = field(default_factory=list)
    rand: list[float] = field(default_factory=list)

    @staticmethod
    def _mean_sd(v: list[float]) -> tuple[float, float]:
        a = np.asarray(v)
        return float(a.mean()), (float(a.std(ddof=1)) if a.size > 1 else 0.0)

    @property
    def accuracy_stats(self) -> tuple[float, float]:
        return self._mean_sd(self.accuracy)

    @property
    def rand_stats(self) -> tuple[float, float]:
        return self._mean_sd(self.rand)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replicate", "accuracy", "rand_index"])
            for i, (a, r) in enumerate(zip(self.accuracy, self.rand)):
                w.writerow([i, fmt_float(a), fmt_float(r)])

    def summary(self) -> str:
        am, asd = self.accuracy_stats
        rm, rsd = self.rand_stats
        lines = [f"{k} = {v}" for k, v in self.config.to_items().items()]
        lines += [
            f"prng = {PRNG_NAME}",
            f"replicates_run = {len(self.accuracy)}",
            f"accuracy_mean = {fmt_float(am)}",
            f"accuracy_sd = {fmt_float(asd)}",
            f"rand_mean = {fmt_float(rm)}",
            f"rand_sd = {fmt_float(rsd)}",
        ]
        return "\n".join(lines) + "\n"


def run_replicate(config: BenchmarkConfig, replicate: int) -> tuple[float, float]:
    curves = simulate_two_groups(config, replicate)
    spec = MetricSpec(config.metric)
    if spec.requires_equal_length:
        data = align_shared(curves, "raw")
    else:
        data = curves
    tree = agglomerate(pairwise_matrix(data, spec), config.linkage)
    predicted = cut(tree, config.k)
    truth = Partition.from_labels([c.id for c in curves], [c.labels["truth"] for c in curves])
    return match_accuracy(predicted, truth), rand_index(predicted, truth)


def run_benchmark(config: BenchmarkConfig, progress=None) -> BenchmarkReport:
    """Simulate, cluster and score ``config.n_replicates`` independent studies."""
    report = BenchmarkReport(config)
    for r in range(config.n_replicates):
        acc, ri = run_replicate(config, r)
        report.accuracy.append(acc)
        report.rand.append(ri)
        if progress is not None:
            progress(r + 1, config.n_replicates)
    return report


# ---------------------------------------------------------------------------
# Synthetic stand-in for a clinical study
# ---------------------------------------------------------------------------

CASE_STUDY_GROUPS = (
    # (size, clearance L/h, volume L, ka 1/h, phenotype mix); exposures 1:3:5:7
    (120, 60.0, 300.0, 1.5, {"EM": 0.5, "RM": 0.3, "IM": 0.12, "UM": 0.08}),
    (70, 20.0, 100.0, 1.5, {"IM": 0.45, "EM": 0.3, "RM": 0.1, "UM": 0.08, "PM": 0.07}),
    (35, 12.0, 60.0, 1.5, {"EM": 0.4, "RM": 0.3, "IM": 0.2, "PM": 0.1}),
    (25, 60.0 / 7, 300.0 / 7, 1.5, {"EM": 0.4, "RM": 0.4, "IM": 0.2}),
)
CASE_STUDY_GRIDS = ((0, 1, 2, 4, 6, 8), (0, 1, 2, 4, 6, 8, 12), (0, 0.5, 1, 2, 4, 6, 8, 24))
CASE_STUDY_DOSES = (25.0, 50.0, 100.0)


def simulate_case_study(seed: int = 7, sigma: float = 0.05) -> list[PkCurve]:
    """250 curves in four groups on partly overlapping sampling grids.

    The curves share exactly the times 0, 1, 2, 4, 6 and 8 h. Doses vary
    across subjects, so only dose-normalized curves group cleanly.
    Concentrations are in ng/mL. Labels: ``truth`` (group 1-4) and a
    ``phenotype`` drawn from a group-specific mix.
    """
    curves = []
    subject = 0
    for g, (size, cl, vc, ka, mix) in enumerate(CASE_STUDY_GROUPS, start=1):
        names = list(mix)
        probs = np.array([mix[k] for k in names])
        probs = probs / probs.sum()
        for i in range(size):
            rng = rng_for(seed, g, i)
            dose = CASE_STUDY_DOSES[int(rng.integers(len(CASE_STUDY_DOSES)))]
            grid = CASE_STUDY_GRIDS[int(rng.integers(len(CASE_STUDY_GRIDS)))]
            params = PkModelParams(cl, vc, ka, dose)
            t = np.asarray(grid, dtype=float)
            mean = 1000.0 * np.asarray(concentration(params, t))
            conc = mean * np.exp(rng.normal(0.0, sigma, t.size))
            phenotype = names[int(rng.choice(len(names), p=probs))]
            subject += 1
            sid = f"S{subject:03d}"
            curves.append(
                PkCurve(
                    id=curve_id_for(sid, "1"),
                    times=tuple(as_decimal(x) for x in grid),
                    concentrations=tuple(conc),
                    dose=dose,
                    labels={"truth": str(g), "phenotype": phenotype},
                    subject_id=sid,
                    occasion="1",
                )
            )
    return curves

