"""Two-moons domain-shift datasets and their CSV representation."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass
class LabeledDataset:
    X: np.ndarray
    labels: np.ndarray
    n_classes: int = 2

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {self.X.shape}")
        if self.labels.shape != (self.X.shape[0],):
            raise ValueError(f"expected {self.X.shape[0]} labels, got {self.labels.shape}")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("X contains non-finite values")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self):
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def equals(self, other: "LabeledDataset") -> bool:
        return (self.n_classes == other.n_classes and np.array_equal(self.X, other.X)
                and np.array_equal(self.labels, other.labels))


def gen_moons(n: int, noise_std: float, seed: int) -> LabeledDataset:
    """Two interleaving half circles with isotropic Gaussian noise.

    Class 0 holds ceil(n/2) points evenly spaced on the upper unit arc
    ``(cos t, sin t)``, class 1 holds floor(n/2) points on the reflected arc
    ``(1 - cos t, 0.5 - sin t)``, ``t`` in ``[0, pi]``.
    """
    if n < 2:
        raise ValueError(f"need at least 2 points, got n={n}")
    if noise_std < 0:
        raise ValueError(f"noise_std must be non-negative, got {noise_std}")
    n_upper = (n + 1) // 2
    n_lower = n // 2
    t_up = np.linspace(0.0, np.pi, n_upper)
    t_lo = np.linspace(0.0, np.pi, n_lower)
    upper = np.column_stack([np.cos(t_up), np.sin(t_up)])
    lower = np.column_stack([1.0 - np.cos(t_lo), 0.5 - np.sin(t_lo)])
    X = np.vstack([upper, lower])
    if noise_std > 0:
        X = X + np.random.default_rng(seed).normal(scale=noise_std, size=X.shape)
    labels = np.concatenate([np.zeros(n_upper, dtype=np.int64), np.ones(n_lower, dtype=np.int64)])
    return LabeledDataset(X, labels, 2)


def rotate_about_mean(ds: LabeledDataset, degrees: float, center=None) -> LabeledDataset:
    """Rotate every point counter-clockwise about the dataset mean (or ``center``)."""
    if ds.dim != 2:
        raise ValueError(f"rotation needs 2-D inputs, got d={ds.dim}")
    if degrees == 0:
        # (X - c) + c is not bit-exact
        return LabeledDataset(ds.X.copy(), ds.labels.copy(), ds.n_classes)
    c = ds.X.mean(axis=0) if center is None else np.asarray(center, dtype=np.float64)
    theta = np.deg2rad(degrees)
    rot = np.array([[np.cos(theta), -np.sin(theta)],
                    [np.sin(theta), np.cos(theta)]])
    X = (ds.X - c) @ rot.T + c
    return LabeledDataset(X, ds.labels.copy(), ds.n_classes)


def make_shift_pair(n: int, noise_std: float, degrees: float, seed_s: int, seed_t: int):
    if seed_s == seed_t:
        raise ValueError("source and target must use distinct seeds")
    source = gen_moons(n, noise_std, seed_s)
    target = rotate_about_mean(gen_moons(n, noise_std, seed_t), degrees)
    return source, target


def save_csv(ds: LabeledDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j}" for j in range(ds.dim)] + ["label"])
        for row, label in zip(ds.X, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def load_csv(path, n_classes: int = 2) -> LabeledDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    d = len(header) - 1
    if d < 1 or header[-1] != "label" or header[:-1] != [f"x{j}" for j in range(d)]:
        raise ValueError(f"{path}: bad header {header!r}")
    X = np.empty((len(rows) - 1, d))
    labels = np.empty(len(rows) - 1, dtype=np.int64)
    for i, row in enumerate(rows[1:]):
        lineno = i + 2
        if len(row) != d + 1:
            raise ValueError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
        try:
            X[i] = [float(v) for v in row[:-1]]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        try:
            labels[i] = int(row[-1])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: label {row[-1]!r} is not an integer") from None
        if not 0 <= labels[i] < n_classes:
            raise ValueError(f"{path}:{lineno}: label {labels[i]} outside [0, {n_classes})")
    return LabeledDataset(X, labels, n_classes)
