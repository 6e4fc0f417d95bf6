"""Sample matrices: CSV I/O, synthetic generators and salt-and-pepper corruption.

Samples are stored column-wise, ``X.shape == (d, n)``.  All randomness goes
through :func:`make_rng`, a numpy ``Generator`` over PCG64, whose bit stream
is stable across platforms for a given seed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class LabeledDataset:
    X: np.ndarray
    labels: np.ndarray
    n_classes: int = field(default=-1)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        check_samples(X)
        if labels.shape != (X.shape[1],):
            raise DatasetError(
                f"labels length {labels.shape} does not match n={X.shape[1]}")
        if labels.min() < 0:
            raise DatasetError("labels must be nonnegative")
        c = int(labels.max()) + 1 if self.n_classes < 0 else int(self.n_classes)
        missing = np.setdiff1d(np.arange(c), labels)
        if missing.size or labels.max() >= c:
            raise DatasetError(f"labels must cover every class in [0, {c})")
        X.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "n_classes", c)

    @property
    def n_samples(self) -> int:
        return self.X.shape[1]

    @property
    def dim(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class NoiseSpec:
    level: float
    low_value: float = 0.0
    high_value: float = 255.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.level <= 1.0:
            raise DatasetError(f"noise level must be in [0, 1], got {self.level}")
        if self.seed < 0:
            raise DatasetError("seed must be unsigned")


def check_samples(X: np.ndarray) -> np.ndarray:
    """Validate a d x n sample matrix and return it as a float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DatasetError(f"sample matrix must be 2-D, got shape {X.shape}")
    if X.shape[1] < 2:
        raise DatasetError("too few samples")
    if X.shape[0] < 1:
        raise DatasetError("sample dimension must be at least 1")
    if not np.all(np.isfinite(X)):
        raise DatasetError("sample matrix contains non-finite entries")
    return X


def load_dense_matrix(path, has_labels: bool = False):
    """Read one-sample-per-row CSV (no header) into a d x n matrix.

    With ``has_labels`` the last column is parsed as an integer label and a
    :class:`LabeledDataset` is returned; otherwise the bare matrix.
    """
    path = Path(path)
    rows = []
    width = None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
                if has_labels and width < 2:
                    raise DatasetError(
                        f"{path}:{lineno}: need at least one feature and a label column")
            elif len(row) != width:
                raise DatasetError(
                    f"{path}:{lineno}: expected {width} fields, found {len(row)}")
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: non-numeric field ({exc})") from None
            if not all(np.isfinite(values)):
                raise DatasetError(f"{path}:{lineno}: non-finite value")
            rows.append(values)
    if len(rows) < 2:
        raise DatasetError("too few samples")
    table = np.asarray(rows, dtype=float)
    if not has_labels:
        return table.T.copy()
    raw = table[:, -1]
    labels = raw.astype(np.int64)
    if not np.array_equal(labels, raw):
        raise DatasetError(f"{path}: label column must hold integers")
    return LabeledDataset(table[:, :-1].T.copy(), labels)


def save_dense_matrix(path, X: np.ndarray, labels=None) -> None:
    """Write the inverse of :func:`load_dense_matrix`."""
    X = check_samples(X)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        for i in range(X.shape[1]):
            row = [repr(float(v)) for v in X[:, i]]
            if labels is not None:
                row.append(str(int(labels[i])))
            writer.writerow(row)


def _blob_means(k: int, d: int, separation: float) -> np.ndarray:
    # Axis j % d at scale sep/sqrt(2) + sep * (j // d): points on different
    # axes sit >= sep apart, points on the same axis differ by a multiple of sep.
    means = np.zeros((d, k))
    for j in range(k):
        means[j % d, j] = separation / np.sqrt(2.0) + separation * (j // d)
    return means


def _random_orthonormal(rng: np.random.Generator, d: int, r: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((d, r)))
    return Q * np.sign(np.diag(R))


def generate_blobs(k: int, n_per: int, d: int, separation: float, spread: float,
                   seed: int) -> LabeledDataset:
    """Isotropic Gaussian clusters whose means are pairwise >= ``separation`` apart.

    Means are placed on scaled coordinate axes and then rotated by a random
    orthogonal matrix drawn from ``seed``; rotation preserves distances.
    """
    if k < 2 or n_per < 1 or d < 1:
        raise DatasetError("generate_blobs needs k >= 2, n_per >= 1, d >= 1")
    if not (separation > 0 and spread > 0):
        raise DatasetError("separation and spread must be positive")
    rng = make_rng(seed)
    means = _random_orthonormal(rng, d, d) @ _blob_means(k, d, separation)
    labels = np.repeat(np.arange(k), n_per)
    X = means[:, labels] + spread * rng.standard_normal((d, k * n_per))
    return LabeledDataset(X, labels, k)


def generate_union_of_subspaces(k: int, sub_dim: int, d: int, n_per: int,
                                noise_sigma: float, seed: int,
                                return_bases: bool = False):
    """Unit-norm samples drawn from ``k`` random ``sub_dim``-dimensional subspaces.

    With ``return_bases`` a list of the d x sub_dim orthonormal bases is
    returned alongside the dataset.
    """
    if not (1 <= sub_dim < d) or k < 2 or n_per < sub_dim + 1:
        raise DatasetError(
            "generate_union_of_subspaces needs 1 <= sub_dim < d, k >= 2, n_per >= sub_dim + 1")
    if noise_sigma < 0:
        raise DatasetError("noise_sigma must be nonnegative")
    rng = make_rng(seed)
    bases = []
    blocks = []
    for _ in range(k):
        U = _random_orthonormal(rng, d, sub_dim)
        blocks.append(U @ rng.standard_normal((sub_dim, n_per)))
        bases.append(U)
    X = np.hstack(blocks)
    if noise_sigma > 0:
        X = X + noise_sigma * rng.standard_normal(X.shape)
    X = X / np.linalg.norm(X, axis=0, keepdims=True)
    ds = LabeledDataset(X, np.repeat(np.arange(k), n_per), k)
    return (ds, bases) if return_bases else ds


def inject_salt_pepper(X: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Overwrite exactly ``round(level * d)`` coordinates of every column.

    Positions are drawn without replacement per column; each corrupted
    entry becomes ``low_value`` or ``high_value`` with probability 1/2.
    """
    X = check_samples(X)
    d, n = X.shape
    count = int(round(spec.level * d))
    out = X.copy()
    if count == 0:
        return out
    rng = make_rng(spec.seed)
    for i in range(n):
        rows = rng.choice(d, size=count, replace=False)
        salt = rng.random(count) < 0.5
        out[rows, i] = np.where(salt, spec.high_value, spec.low_value)
    return out
