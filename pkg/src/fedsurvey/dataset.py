"""Multi-site tabular data: schema, ingestion, folds, balancing, synthesis."""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BoundsViolation,
    EmptyAfterFiltering,
    InvalidConfig,
    InvalidSpec,
    MissingColumn,
    OneClassOnly,
    SiteTooSmall,
)
from .rng import stream

log = logging.getLogger(__name__)

FEATURE_KINDS = ("continuous", "ordinal", "binary", "nominal")
TASKS = ("regression", "classification")
MISSING_TOKENS = frozenset({"", "NA"})

# Region sizes of the national cohort; default site layout for synthetic runs.
TABLE1_SITES = (("1", 2415), ("2", 1550), ("3", 2530), ("4", 2220), ("5", 933))


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str = "continuous"
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.name:
            raise InvalidSpec("feature name must be non-empty")
        if self.kind not in FEATURE_KINDS:
            raise InvalidSpec(f"{self.name}: unknown feature kind {self.kind!r}")
        if self.bounds is not None:
            lo, hi = self.bounds
            if not lo < hi:
                raise InvalidSpec(f"{self.name}: bounds must satisfy min < max, got {self.bounds}")
            object.__setattr__(self, "bounds", (float(lo), float(hi)))

    def admits(self, value: float) -> bool:
        if self.kind == "binary" and value not in (0.0, 1.0):
            return False
        if self.bounds is not None:
            return self.bounds[0] <= value <= self.bounds[1]
        return True


@dataclass(frozen=True)
class Schema:
    features: tuple[FeatureSpec, ...]
    target: FeatureSpec
    task: str = "regression"

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise InvalidSpec("schema needs at least one feature")
        names = [f.name for f in self.features] + [self.target.name]
        if len(set(names)) != len(names):
            raise InvalidSpec("feature and target names must be unique")
        if self.task not in TASKS:
            raise InvalidSpec(f"unknown task {self.task!r}")
        if self.task == "classification" and self.target.kind != "binary":
            raise InvalidSpec("classification target must be binary")

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]


@dataclass(frozen=True, eq=False)
class SiteTable:
    """Rows of one site: feature matrix ``X`` (n x m) and target ``y``."""

    site_id: str
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, order="C")
        y = np.array(self.y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError(f"site {self.site_id!r}: X must be n x m and y length n")
        if X.shape[0] < 1:
            raise ValueError(f"site {self.site_id!r} is empty")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError(f"site {self.site_id!r} contains non-finite values")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "site_id", str(self.site_id))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def take(self, indices) -> SiteTable:
        indices = np.asarray(indices, dtype=np.int64)
        return SiteTable(self.site_id, self.X[indices], self.y[indices])


class SiteTables(list):
    """List of SiteTable that also remembers how many rows ingestion dropped."""

    def __init__(self, tables=(), dropped: int = 0):
        super().__init__(tables)
        self.dropped = dropped


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: dict[str, np.ndarray]

    def test_indices(self, site_id: str, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment[site_id] == fold)

    def train_indices(self, site_id: str, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment[site_id] != fold)

    def split(self, table: SiteTable, fold: int) -> tuple[SiteTable, SiteTable]:
        return (table.take(self.train_indices(table.site_id, fold)),
                table.take(self.test_indices(table.site_id, fold)))


@dataclass(frozen=True)
class BalancedSet:
    indices: np.ndarray
    provenance: str
    seed: int

    def __len__(self):
        return len(self.indices)


def load_csv(path, schema: Schema, site_column: str) -> SiteTables:
    """Read a CSV into per-site tables, keeping complete cases only.

    Rows with an empty, ``NA`` or unparseable cell in any used column are
    dropped; the count is logged and stored on the result's ``dropped``.
    Sites keep their first-appearance order and their file row order.
    """
    columns = schema.feature_names + [schema.target.name]
    specs = list(schema.features) + [schema.target]
    per_site: dict[str, list[list[float]]] = {}
    seen_sites: list[str] = []
    dropped = 0
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(site_column) from None
        header = [h.strip() for h in header]
        for name in [site_column] + columns:
            if name not in header:
                raise MissingColumn(name)
        site_pos = header.index(site_column)
        positions = [header.index(c) for c in columns]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            site = row[site_pos].strip() if site_pos < len(row) else ""
            if site not in MISSING_TOKENS and site not in per_site:
                per_site[site] = []
                seen_sites.append(site)
            values = _parse_row(row, positions)
            if values is None or site in MISSING_TOKENS:
                dropped += 1
                continue
            for spec, value in zip(specs, values):
                if not spec.admits(value):
                    raise BoundsViolation(lineno, spec.name, value)
            per_site[site].append(values)
    if dropped:
        log.info("dropped %d incomplete rows from %s", dropped, path)
    tables = SiteTables(dropped=dropped)
    m = schema.n_features
    for site in seen_sites:
        rows = per_site[site]
        if not rows:
            raise EmptyAfterFiltering(site)
        data = np.asarray(rows, dtype=np.float64)
        tables.append(SiteTable(site, data[:, :m], data[:, m]))
    return tables


def _parse_row(row: list[str], positions: list[int]) -> list[float] | None:
    values = []
    for pos in positions:
        if pos >= len(row):
            return None
        cell = row[pos].strip()
        if cell in MISSING_TOKENS:
            return None
        try:
            value = float(cell)
        except ValueError:
            return None
        if not math.isfinite(value):
            return None
        values.append(value)
    return values


def write_csv(path, tables: Sequence[SiteTable], schema: Schema, site_column: str = "site") -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([site_column] + schema.feature_names + [schema.target.name])
        for table in tables:
            for xrow, yval in zip(table.X, table.y):
                writer.writerow([table.site_id] + [repr(float(v)) for v in xrow] + [_fmt_target(yval, schema)])


def _fmt_target(value: float, schema: Schema) -> str:
    if schema.target.kind == "binary":
        return str(int(value))
    return repr(float(value))


def make_fold_plan(sites: Sequence[SiteTable], k: int, seed: int) -> FoldPlan:
    """Unstratified k-fold assignment, shuffled per site from its own stream."""
    if k < 2:
        raise InvalidConfig(f"k must be >= 2, got {k}")
    assignment = {}
    for table in sites:
        if table.n < k:
            raise SiteTooSmall(table.site_id, table.n, k)
        perm = stream(seed, "folds", table.site_id).permutation(table.n)
        folds = np.empty(table.n, dtype=np.int64)
        folds[perm] = np.arange(table.n) % k
        folds.flags.writeable = False
        assignment[table.site_id] = folds
    return FoldPlan(k, assignment)


def _class_indices(y: np.ndarray, site=None) -> tuple[np.ndarray, np.ndarray]:
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise OneClassOnly(site)
    return pos, neg


def supersample_balance(table: SiteTable, seed: int) -> BalancedSet:
    """Balance a binary training set by resampling the smaller class.

    Every original row is kept; ``max - min`` extra rows are drawn uniformly
    with replacement from the smaller class.
    """
    pos, neg = _class_indices(table.y, table.site_id)
    smaller, larger = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    extra = len(larger) - len(smaller)
    draws = stream(seed, "supersample", table.site_id).choice(smaller, size=extra, replace=True) if extra else \
        np.empty(0, dtype=np.int64)
    indices = np.sort(np.concatenate([np.arange(table.n), draws]))
    return BalancedSet(indices, "supersampled", seed)


class BalanceWarning(UserWarning):
    pass


def balanced_test_subsets(y: np.ndarray, count: int = 4, seed: int = 0) -> list[BalancedSet]:
    """Balanced evaluation subsets with mutually exclusive larger-class rows.

    Each subset holds every smaller-class row plus an equally sized slice of
    a shuffled larger class. If the larger class cannot fill ``count``
    disjoint slices, fewer subsets are returned and a BalanceWarning issued.
    """
    y = np.asarray(y)
    pos, neg = _class_indices(y)
    smaller, larger = (pos, neg) if len(pos) <= len(neg) else (neg, pos)
    s = len(smaller)
    attainable = min(count, len(larger) // s)
    if attainable < count:
        warnings.warn(f"larger class has {len(larger)} rows; only {attainable} of {count} disjoint "
                      f"balanced subsets of size {2 * s} are possible", BalanceWarning, stacklevel=2)
    shuffled = stream(seed, "test-subsets").permutation(larger)
    subsets = []
    for j in range(attainable):
        rows = np.sort(np.concatenate([smaller, shuffled[j * s:(j + 1) * s]]))
        subsets.append(BalancedSet(rows, "subsampled", seed))
    return subsets


def subsample_training(tables: Sequence[SiteTable], fraction: float, seed: int) -> list[SiteTable]:
    """Keep ``ceil(fraction * n)`` training rows per site, drawn without replacement."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return list(tables)
    out = []
    for table in tables:
        keep = math.ceil(fraction * table.n - 1e-9)
        if keep < 2:
            raise SiteTooSmall(table.site_id, keep, 2)
        rows = np.sort(stream(seed, "subsample", table.site_id).choice(table.n, size=keep, replace=False))
        out.append(table.take(rows))
    return out


@dataclass(frozen=True)
class SiteSpec:
    site_id: str
    n: int
    mean_shift: tuple[float, ...] = ()
    target_shift: float = 0.0


@dataclass(frozen=True)
class SynthSpec:
    sites: tuple[SiteSpec, ...]
    schema: Schema
    noise_sd: float = 1.4
    seed: int = 0
    class_threshold: float = 0.0
    coefficients: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))


def synthetic_schema(n_features: int = 51, task: str = "regression") -> Schema:
    width = len(str(n_features))
    features = tuple(FeatureSpec(f"x{i:0{width}d}") for i in range(n_features))
    target = FeatureSpec("target", "binary") if task == "classification" else FeatureSpec("target")
    return Schema(features, target, task)


def synthetic_coefficients(schema: Schema, seed: int) -> np.ndarray:
    beta = stream(seed, "synthetic-coefficients").normal(size=schema.n_features)
    return beta / np.linalg.norm(beta)


def generate_synthetic(spec: SynthSpec) -> list[SiteTable]:
    """Draw heterogeneous multi-site data from a shared linear model.

    Features are unit normals offset by each site's ``mean_shift``; the
    latent score is ``X @ beta + target_shift + noise``. Regression targets
    are the latent score, classification targets its indicator above
    ``class_threshold``.
    """
    schema = spec.schema
    m = schema.n_features
    if spec.noise_sd <= 0:
        raise InvalidSpec("noise_sd must be positive")
    if not spec.sites:
        raise InvalidSpec("at least one site is required")
    if len({s.site_id for s in spec.sites}) != len(spec.sites):
        raise InvalidSpec("site ids must be unique")
    if spec.coefficients is not None:
        beta = np.asarray(spec.coefficients, dtype=np.float64)
        if beta.shape != (m,):
            raise InvalidSpec(f"expected {m} coefficients, got {beta.shape}")
    else:
        beta = synthetic_coefficients(schema, spec.seed)
    tables = []
    for site in spec.sites:
        if site.n < 10:
            raise InvalidSpec(f"site {site.site_id!r}: n must be >= 10")
        shift = np.zeros(m)
        if len(site.mean_shift) > m:
            raise InvalidSpec(f"site {site.site_id!r}: {len(site.mean_shift)} shifts for {m} features")
        shift[:len(site.mean_shift)] = site.mean_shift
        rng = stream(spec.seed, "synthetic", site.site_id)
        X = rng.standard_normal((site.n, m)) + shift
        latent = X @ beta + site.target_shift + spec.noise_sd * rng.standard_normal(site.n)
        if schema.task == "classification":
            y = (latent > spec.class_threshold).astype(np.float64)
        else:
            y = latent
        tables.append(SiteTable(site.site_id, X, y))
    return tables


def default_synth_spec(task: str = "regression", seed: int = 42, n_features: int = 51,
                       heterogeneous: bool = True) -> SynthSpec:
    """Five sites sized like the national cohort, with mild site heterogeneity.

    Classification targets threshold the latent score high enough that about
    one row in six is positive, so four disjoint balanced test subsets fit.
    """
    target_shifts = (0.0, 0.25, -0.2, 0.15, -0.45) if heterogeneous else (0.0,) * 5
    sites = []
    for (site_id, n), t_shift in zip(TABLE1_SITES, target_shifts):
        shift: tuple[float, ...] = ()
        if heterogeneous and site_id == "5":
            shift = (0.5, 0.3, -0.3)
        sites.append(SiteSpec(site_id, n, shift, t_shift))
    threshold = 1.75 if task == "classification" else 0.0
    return SynthSpec(tuple(sites), synthetic_schema(n_features, task), noise_sd=1.4, seed=seed,
                     class_threshold=threshold)
