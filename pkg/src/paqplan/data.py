"""Dataset representation, loaders, deterministic splits, and synthesis.

Feature matrices are dense row-major float64 arrays with binary {0,1}
labels. Datasets carry a list of contiguous row partitions so gradient
work can be sharded, plus a scan counter that training code ticks once
per full pass so budget accounting can be audited externally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    """Malformed data file; carries the 1-based offending line number."""

    def __init__(self, message: str, path: str | Path, line_no: int):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class DatasetTooSmallError(ValueError):
    pass


@dataclass
class ScanCounter:
    """Observational tally of training-data passes.

    ``passes`` counts full scans of the matrix; ``model_iterations`` counts
    scans weighted by the number of models sharing each pass, which is the
    unit the planner budgets in.
    """

    passes: int = 0
    model_iterations: int = 0

    def record(self, models: int = 1) -> None:
        self.passes += 1
        self.model_iterations += models


@dataclass(eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    partitions: list[tuple[int, int]] = field(default_factory=list)
    scans: ScanCounter = field(default_factory=ScanCounter)

    def __post_init__(self) -> None:
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y)
        if self.X.ndim != 2:
            raise ValueError("X must be a 2-D matrix")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("y length must equal the number of rows in X")
        if not self.partitions:
            self.partitions = [(0, self.n)]
        self._check_partitions()

    def _check_partitions(self) -> None:
        pos = 0
        for lo, hi in self.partitions:
            if lo != pos or hi < lo:
                raise ValueError("partitions must be disjoint, ordered, and cover all rows")
            pos = hi
        if pos != self.n:
            raise ValueError("partitions must cover [0, n)")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def notify_scan(self, models: int = 1) -> None:
        self.scans.record(models)

    def with_partitions(self, count: int) -> "Dataset":
        """Same rows, re-cut into ``count`` contiguous partitions."""
        if not 1 <= count <= max(self.n, 1):
            raise ValueError("partition count must be in [1, n]")
        edges = np.linspace(0, self.n, count + 1).astype(int)
        parts = [(int(edges[i]), int(edges[i + 1])) for i in range(count)]
        return Dataset(self.X, self.y, partitions=parts, scans=self.scans)

    def shards(self) -> list["Dataset"]:
        """One Dataset view per partition; shards share the parent arrays."""
        return [Dataset(self.X[lo:hi], self.y[lo:hi]) for lo, hi in self.partitions]

    def head(self, rows: int) -> "Dataset":
        rows = min(rows, self.n)
        return Dataset(self.X[:rows], self.y[:rows])


@dataclass(eq=False)
class DataSplit:
    train: Dataset
    validation: Dataset
    test: Dataset


def split(
    ds: Dataset,
    ratios: tuple[float, float, float] = (0.7, 0.2, 0.1),
    seed: int = 0,
) -> DataSplit:
    """Seeded shuffle then train/validation/test partition.

    Sizes are floored from the validation and test ratios; remainder rows go
    to the training partition. Identical seeds yield identical splits.
    """
    if abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be non-negative and sum to 1")
    if ds.n < 10:
        raise DatasetTooSmallError(f"need at least 10 rows to split, got {ds.n}")
    n_val = int(ds.n * ratios[1])
    n_test = int(ds.n * ratios[2])
    n_train = ds.n - n_val - n_test
    perm = np.random.default_rng(seed).permutation(ds.n)
    idx_train = perm[:n_train]
    idx_val = perm[n_train:n_train + n_val]
    idx_test = perm[n_train + n_val:]
    return DataSplit(
        train=Dataset(ds.X[idx_train], ds.y[idx_train]),
        validation=Dataset(ds.X[idx_val], ds.y[idx_val]),
        test=Dataset(ds.X[idx_test], ds.y[idx_test]),
    )


def synth(n: int, d: int, seed: int = 0, noise_rate: float = 0.0) -> Dataset:
    """Gaussian rows labeled by a hidden random hyperplane through the origin.

    Each label is flipped independently with probability ``noise_rate``, so
    at noise 0 the data is linearly separable by construction.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if not 0.0 <= noise_rate < 0.5:
        raise ValueError("noise_rate must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    w = rng.standard_normal(d)
    y = (X @ w >= 0.0).astype(np.int64)
    if noise_rate > 0.0:
        flips = rng.random(n) < noise_rate
        y = np.where(flips, 1 - y, y)
    return Dataset(X, y)


def downsample(ds: Dataset, proportion: float, seed: int = 0) -> Dataset:
    """Seeded uniform row subsample without replacement, original order kept."""
    if proportion <= 0.0 or proportion > 1.0:
        raise ValueError("proportion must lie in (0, 1]")
    m = int(round(ds.n * proportion))
    if m < 1:
        raise ValueError("proportion yields an empty subsample")
    if m == ds.n:
        return Dataset(ds.X, ds.y)
    idx = np.sort(np.random.default_rng(seed).choice(ds.n, size=m, replace=False))
    return Dataset(ds.X[idx], ds.y[idx])


def _coerce_label(raw: float, path: str | Path, line_no: int) -> int:
    if raw == -1.0:
        return 0
    if raw in (0.0, 1.0):
        return int(raw)
    raise ParseError(f"label must be -1, 0, or 1, got {raw!r}", path, line_no)


def load_csv(path: str | Path) -> Dataset:
    """Comma-delimited doubles, final column is the {0,1} label (-1 maps to 0)."""
    rows: list[list[float]] = []
    labels: list[int] = []
    width: int | None = None
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) < 2:
                raise ParseError("need at least one feature and a label", path, line_no)
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise ParseError(
                    f"expected {width} columns, got {len(fields)}", path, line_no)
            try:
                values = [float(f) for f in fields]
            except ValueError as exc:
                raise ParseError(str(exc), path, line_no) from exc
            rows.append(values[:-1])
            labels.append(_coerce_label(values[-1], path, line_no))
    if not rows:
        raise ParseError("file contains no data rows", path, 1)
    return Dataset(np.array(rows), np.array(labels))


def write_csv(ds: Dataset, path: str | Path) -> None:
    with open(path, "w") as fh:
        for i in range(ds.n):
            cells = [repr(float(v)) for v in ds.X[i]]
            cells.append(str(int(ds.y[i])))
            fh.write(",".join(cells) + "\n")


def load_libsvm(path: str | Path) -> Dataset:
    """Standard ``label idx:value`` text format with 1-based indices.

    Absent indices are zero-filled; width is the maximum index seen.
    """
    parsed: list[tuple[int, list[tuple[int, float]]]] = []
    width = 0
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            try:
                label = _coerce_label(float(tokens[0]), path, line_no)
            except ValueError as exc:
                raise ParseError(f"bad label {tokens[0]!r}", path, line_no) from exc
            entries: list[tuple[int, float]] = []
            for tok in tokens[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError as exc:
                    raise ParseError(f"bad index:value pair {tok!r}", path, line_no) from exc
                if idx < 1:
                    raise ParseError(f"indices are 1-based, got {idx}", path, line_no)
                entries.append((idx - 1, val))
                width = max(width, idx)
            parsed.append((label, entries))
    if not parsed:
        raise ParseError("file contains no data rows", path, 1)
    X = np.zeros((len(parsed), width))
    y = np.zeros(len(parsed), dtype=np.int64)
    for i, (label, entries) in enumerate(parsed):
        y[i] = label
        for j, val in entries:
            X[i, j] = val
    return Dataset(X, y)


def write_libsvm(ds: Dataset, path: str | Path) -> None:
    with open(path, "w") as fh:
        for i in range(ds.n):
            parts = [str(int(ds.y[i]))]
            parts.extend(
                f"{j + 1}:{repr(float(v))}" for j, v in enumerate(ds.X[i]) if v != 0.0)
            fh.write(" ".join(parts) + "\n")


def load_any(path: str | Path) -> Dataset:
    """Pick a loader from the file extension (.csv vs .libsvm/.svm/.txt)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return load_csv(path)
    return load_libsvm(path)
