"""Flow-feature datasets: CSV ingestion, synthetic generation, scaling, splitting
and IID partitioning across simulated clients.

A :class:`Dataset` holds its records as a dense ``(n, d)`` float matrix plus an
integer label vector; :class:`FeatureRecord` is the per-row view.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

# Class names of the Moore traffic corpus used as the default whitelist.
MOORE_CLASSES = (
    "WWW",
    "MAIL",
    "FTP-DATA",
    "FTP-CONTROL",
    "DATABASE",
    "SERVICES",
    "ATTACK",
)


class DataError(ValueError):
    """Raised for malformed input files or invalid dataset arguments."""


class EmptyDatasetError(DataError):
    pass


class FeatureRecord(NamedTuple):
    features: np.ndarray
    label: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Fixed-width numeric feature vectors with dense class labels.

    Attributes:
        X: ``(n, d)`` float64 feature matrix.
        y: ``(n,)`` int64 labels in ``[0, n_classes)``.
        n_classes: class count ``L``. May exceed ``max(y) + 1`` for views
            (client shards, test splits) of a larger dataset.
        class_names: optional display names, one per class.
        feature_names: optional column names, one per feature.
    """

    X: np.ndarray
    y: np.ndarray
    n_classes: int
    class_names: tuple[str, ...] | None = None
    feature_names: tuple[str, ...] | None = None
    _bounds: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.int64)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataError(f"labels shape {y.shape} does not match {X.shape[0]} records")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain NaN or Inf")
        if self.n_classes < 1:
            raise DataError("n_classes must be >= 1")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise DataError(f"labels must lie in [0, {self.n_classes})")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.X.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield FeatureRecord(self.X[i], int(self.y[i]))

    def __getitem__(self, i) -> FeatureRecord:
        return FeatureRecord(self.X[i], int(self.y[i]))

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def feature_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-dimension ``(min, max)`` over the records."""
        if self._bounds is not None:
            return self._bounds
        if len(self) == 0:
            lo = hi = np.zeros(self.d)
        else:
            lo, hi = self.X.min(axis=0), self.X.max(axis=0)
        return lo, hi

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return self.replace(X=self.X[idx], y=self.y[idx])

    def replace(self, **changes) -> "Dataset":
        kw = dict(
            X=self.X,
            y=self.y,
            n_classes=self.n_classes,
            class_names=self.class_names,
            feature_names=self.feature_names,
        )
        kw.update(changes)
        return Dataset(**kw)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    def to_csv(self, path, header: bool = True) -> None:
        """Write features followed by a ``label`` column (class names if known)."""
        names = self.feature_names or tuple(f"f{j}" for j in range(self.d))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if header:
                w.writerow([*names, "label"])
            for x, lab in zip(self.X, self.y):
                tag = self.class_names[lab] if self.class_names else str(int(lab))
                w.writerow([repr(float(v)) for v in x] + [tag])


def concat(parts: Sequence[Dataset]) -> Dataset:
    if not parts:
        raise EmptyDatasetError("nothing to concatenate")
    first = parts[0]
    return first.replace(
        X=np.concatenate([p.X for p in parts]), y=np.concatenate([p.y for p in parts])
    )


def load_csv(
    path,
    label_column: str | int = -1,
    class_whitelist: Sequence[str] | None = None,
    header: bool = True,
) -> Dataset:
    """Read a flow-feature CSV.

    Args:
        path: CSV file with ``,`` delimiter and ``.`` decimal point.
        label_column: column name (needs ``header``) or zero-based index;
            negative indices count from the end.
        class_whitelist: keep only rows whose label is listed. Labels are
            re-indexed densely in whitelist order; without a whitelist, in
            sorted order of the label strings.
        header: whether the first row holds column names.

    Raises:
        DataError: ragged rows, unknown label column, or a non-numeric
            feature cell (the message names row and column).
        EmptyDatasetError: no rows survive filtering.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise EmptyDatasetError(f"{path}: no rows")

    names = None
    first_line = 1
    if header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_line = 2
    width = len(names) if names else len(rows[0]) if rows else 0
    if width < 2:
        raise DataError(f"{path}: need at least one feature column and a label column")

    if isinstance(label_column, str):
        if names is None:
            raise DataError("label column by name requires a header row")
        if label_column not in names:
            raise DataError(f"{path}: label column {label_column!r} not found")
        lab_idx = names.index(label_column)
    else:
        lab_idx = int(label_column)
        if not -width <= lab_idx < width:
            raise DataError(f"{path}: label column index {lab_idx} out of range")
        lab_idx %= width
    feat_cols = [j for j in range(width) if j != lab_idx]

    allowed = list(class_whitelist) if class_whitelist is not None else None
    feats, labels = [], []
    for i, row in enumerate(rows):
        line = first_line + i
        if len(row) != width:
            raise DataError(f"{path}: row {line} has {len(row)} columns, expected {width}")
        lab = row[lab_idx].strip()
        if allowed is not None and lab not in allowed:
            continue
        vec = []
        for j in feat_cols:
            try:
                v = float(row[j])
            except ValueError:
                col = names[j] if names else j
                raise DataError(
                    f"{path}: row {line}, column {col!r}: non-numeric value {row[j]!r}"
                ) from None
            if not np.isfinite(v):
                col = names[j] if names else j
                raise DataError(f"{path}: row {line}, column {col!r}: non-finite value")
            vec.append(v)
        feats.append(vec)
        labels.append(lab)

    if not feats:
        raise EmptyDatasetError(f"{path}: no records after class filtering")
    if allowed is not None:
        present = set(labels)
        order = [c for c in allowed if c in present]
    else:
        order = sorted(set(labels))
    index = {c: k for k, c in enumerate(order)}
    return Dataset(
        X=np.array(feats, dtype=np.float64),
        y=np.array([index[c] for c in labels], dtype=np.int64),
        n_classes=len(order),
        class_names=tuple(order),
        feature_names=tuple(names[j] for j in feat_cols) if names else None,
    )


def synthesize(d: int, n_classes: int, n_per_class: int, separation: float, seed: int) -> Dataset:
    """Class-conditional Gaussian clusters with unit-variance noise.

    Class means are drawn from ``N(0, (4 separation^2 / d) I)``, so each mean
    has norm close to ``2 * separation`` and two means lie about
    ``2 * sqrt(2) * separation`` apart whatever ``d`` is. ``separation = 0``
    makes the classes indistinguishable. Rows are shuffled with the same
    generator, so equal arguments give identical datasets.
    """
    if d < 1:
        raise DataError("d must be >= 1")
    if n_classes < 2:
        raise DataError("need at least 2 classes")
    if n_per_class < 1:
        raise DataError("n_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    means = (2.0 * separation / np.sqrt(d)) * rng.standard_normal((n_classes, d))
    y = np.repeat(np.arange(n_classes), n_per_class)
    X = means[y] + rng.standard_normal((y.size, d))
    order = rng.permutation(y.size)
    return Dataset(X=X[order], y=y[order], n_classes=n_classes)


@dataclass(frozen=True, eq=False)
class MinMaxScaler:
    """Per-dimension affine map onto ``[0, 1]``; constant dimensions map to 0."""

    lo: np.ndarray
    hi: np.ndarray

    @property
    def scale(self) -> np.ndarray:
        span = self.hi - self.lo
        return np.where(span > 0, span, 1.0)

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = (X - self.lo) / self.scale
        return np.where(self.hi > self.lo, out, 0.0)

    def inverse(self, X):
        X = np.asarray(X, dtype=np.float64)
        return np.where(self.hi > self.lo, X * self.scale + self.lo, self.lo)


def normalize(ds: Dataset, bounds=None) -> tuple[Dataset, MinMaxScaler]:
    """Min-max scale ``ds`` with its own feature bounds (or the given ones)."""
    lo, hi = bounds if bounds is not None else ds.feature_bounds
    scaler = MinMaxScaler(np.array(lo, dtype=np.float64), np.array(hi, dtype=np.float64))
    return ds.replace(X=scaler.transform(ds.X)), scaler


def split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified train/test split.

    The test set gets ``round(n * test_fraction)`` records, apportioned to
    classes by largest remainder, so each class is within one record of its
    proportional share. A class never gives up its last training record.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0, 1), got {test_fraction}")
    counts = ds.class_counts()
    quota = counts * test_fraction
    per_class = np.floor(quota).astype(np.int64)
    short = int(round(len(ds) * test_fraction)) - int(per_class.sum())
    # largest fractional part first, ties to the lower class index
    for c in sorted(range(ds.n_classes), key=lambda c: (-(quota[c] - per_class[c]), c)):
        if short <= 0:
            break
        if per_class[c] + 1 < counts[c]:
            per_class[c] += 1
            short -= 1

    rng = np.random.default_rng(seed)
    train_idx, test_idx = [np.zeros(0, np.int64)], [np.zeros(0, np.int64)]
    for c in range(ds.n_classes):
        idx = np.flatnonzero(ds.y == c)
        if idx.size == 0:
            continue
        idx = idx[rng.permutation(idx.size)]
        n_test = int(per_class[c])
        test_idx.append(idx[:n_test])
        train_idx.append(idx[n_test:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return ds.subset(train_idx), ds.subset(test_idx)


@dataclass(frozen=True, eq=False)
class ClientPartition:
    client_datasets: tuple[Dataset, ...]
    partition_seed: int
    indices: tuple[np.ndarray, ...] = field(repr=False, default=())

    def __len__(self):
        return len(self.client_datasets)

    def __getitem__(self, i) -> Dataset:
        return self.client_datasets[i]


def partition_iid(train: Dataset, n_clients: int, seed: int) -> ClientPartition:
    """Deal records to clients round-robin, class by class, after a seeded shuffle.

    The deal continues across class boundaries, so client sizes differ by at
    most one and every client receives each class in near-equal share.
    """
    if n_clients < 1:
        raise DataError("n_clients must be >= 1")
    if n_clients > len(train):
        raise DataError(f"n_clients={n_clients} exceeds record count {len(train)}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(train))
    # stable sort by label keeps the shuffled order within each class
    order = perm[np.argsort(train.y[perm], kind="stable")]
    buckets = [order[i::n_clients] for i in range(n_clients)]
    indices = tuple(np.sort(b) for b in buckets)
    return ClientPartition(
        client_datasets=tuple(train.subset(ix) for ix in indices),
        partition_seed=seed,
        indices=indices,
    )
