"""Missingness mechanisms and the masked-dataset container.

A masked dataset stores, per row, only the observed values together with the
missing pattern and the label; masked entries are never materialized, so no
downstream code can silently read them. Imputers that need a full matrix
build one explicitly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core_math import DimMismatchError, Pattern, sigmoid

_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class Mcar:
    """Each coordinate missing independently with probability eta_j, independent of (X, Y)."""

    eta: tuple[float, ...] | float

    def eta_vector(self, d: int) -> np.ndarray:
        eta = np.broadcast_to(np.asarray(self.eta, dtype=float), (d,)).copy()
        if np.any((eta < 0) | (eta > 1)):
            raise ValueError("MCAR rates must lie in [0, 1]")
        return eta

    def draw_mask(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n, d = X.shape
        return rng.random((n, d)) < self.eta_vector(d)


@dataclass(frozen=True)
class SelfMaskMnar:
    """Coordinate j missing with probability sigmoid(intercept_j + x_j): self-masking."""

    intercepts: tuple[float, ...] | float = 0.0

    def intercept_vector(self, d: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.intercepts, dtype=float), (d,)).copy()

    def draw_mask(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n, d = X.shape
        probs = sigmoid(self.intercept_vector(d)[None, :] + X)
        return rng.random((n, d)) < probs


@dataclass(frozen=True)
class MarExample:
    """Two-dimensional MAR mechanism: coordinate 2 is masked exactly when x_1 > 0."""

    def draw_mask(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if X.shape[1] != 2:
            raise DimMismatchError("the MAR example mechanism requires d = 2")
        mask = np.zeros_like(X, dtype=bool)
        mask[:, 1] = X[:, 0] > 0
        return mask


@dataclass(frozen=True)
class UniformS:
    """Pattern uniform over all subsets with exactly s missing coordinates."""

    s: int

    def draw_mask(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n, d = X.shape
        if not 0 <= self.s <= d:
            raise ValueError(f"s must lie in [0, {d}], got {self.s}")
        if self.s == 0:
            return np.zeros((n, d), dtype=bool)
        # the s smallest of d iid uniforms form a uniform random s-subset
        order_keys = rng.random((n, d))
        kth = np.partition(order_keys, self.s - 1, axis=1)[:, self.s - 1 : self.s]
        return order_keys <= kth


MechanismSpec = Mcar | SelfMaskMnar | MarExample | UniformS


class MaskedDataset:
    """Labeled sample with per-row observed values and missing patterns.

    Rows are grouped by pattern internally so that training and prediction
    can run vectorized per group; `rows()` exposes the row-level view.
    """

    def __init__(self, d: int, labels: np.ndarray, pattern_bits: np.ndarray, groups: dict):
        self.d = int(d)
        self.labels = labels
        self.pattern_bits = pattern_bits
        self._groups = groups

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @classmethod
    def from_dense(cls, X: np.ndarray, missing: np.ndarray, y: np.ndarray) -> "MaskedDataset":
        """Build from a dense matrix and a boolean mask (True = missing)."""
        X = np.asarray(X, dtype=float)
        missing = np.asarray(missing, dtype=bool)
        y = np.asarray(y)
        if X.shape != missing.shape or X.shape[0] != y.shape[0]:
            raise DimMismatchError(
                f"inconsistent shapes: X {X.shape}, mask {missing.shape}, y {y.shape}"
            )
        labels = y.astype(np.int8)
        if not np.all(np.isin(labels, (-1, 1))):
            raise ValueError("labels must be -1 or +1")
        n, d = X.shape
        weights = (1 << np.arange(d, dtype=np.uint64))
        bits = (missing.astype(np.uint64) * weights).sum(axis=1)
        groups: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for b in np.unique(bits):
            b_int = int(b)
            idx = np.nonzero(bits == b)[0]
            obs = Pattern(b_int, d).obs_indices()
            vals = X[np.ix_(idx, np.array(obs, dtype=int))] if obs else np.empty((len(idx), 0))
            groups[b_int] = (idx, np.ascontiguousarray(vals))
        return cls(d, labels, bits, groups)

    @classmethod
    def from_rows(cls, d: int, rows) -> "MaskedDataset":
        """Build from (Pattern, observed-values, label) triples."""
        X = np.zeros((len(rows), d))
        missing = np.zeros((len(rows), d), dtype=bool)
        y = np.empty(len(rows), dtype=np.int8)
        for i, (p, vals, label) in enumerate(rows):
            if p.dim != d:
                raise DimMismatchError(f"row {i}: pattern dim {p.dim} != {d}")
            obs = p.obs_indices()
            vals = np.asarray(vals, dtype=float)
            if vals.shape[0] != len(obs):
                raise DimMismatchError(
                    f"row {i}: {vals.shape[0]} values for {len(obs)} observed coordinates"
                )
            X[i, list(obs)] = vals
            missing[i] = p.indicators().astype(bool)
            y[i] = label
        return cls.from_dense(X, missing, y)

    def group_items(self):
        """Yield (Pattern, row_indices, observed-value block, labels) per pattern."""
        for bits in sorted(self._groups):
            idx, vals = self._groups[bits]
            yield Pattern(bits, self.d), idx, vals, self.labels[idx]

    def rows(self):
        for pattern, idx, vals, labels in self.group_items():
            for r in range(len(idx)):
                yield pattern, vals[r], int(labels[r])

    def pattern_histogram(self, by_class: bool = False):
        """Counts per pattern; with by_class=True, a {label: count} dict per pattern."""
        out = {}
        for pattern, idx, _, labels in self.group_items():
            if by_class:
                out[pattern] = {
                    1: int(np.sum(labels == 1)),
                    -1: int(np.sum(labels == -1)),
                }
            else:
                out[pattern] = len(idx)
        return out

    def dense_observed(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, missing-mask) with masked entries zero-filled; for imputers only."""
        X = np.zeros((self.n, self.d))
        missing = np.zeros((self.n, self.d), dtype=bool)
        for pattern, idx, vals, _ in self.group_items():
            obs = np.array(pattern.obs_indices(), dtype=int)
            if obs.size:
                X[np.ix_(idx, obs)] = vals
            mis = np.array(pattern.mis_indices(), dtype=int)
            if mis.size:
                missing[np.ix_(idx, mis)] = True
        return X, missing

    def to_csv(self, path) -> None:
        """CSV with one x<j> column per coordinate (empty cell = missing) and a y column."""
        X, missing = self.dense_observed()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{j + 1}" for j in range(self.d)] + ["y"])
            for i in range(self.n):
                row = [
                    "" if missing[i, j] else _FLOAT_FMT % X[i, j] for j in range(self.d)
                ]
                row.append(str(int(self.labels[i])))
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "MaskedDataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[-1] != "y":
                raise ValueError("expected a trailing 'y' column")
            d = len(header) - 1
            xs, masks, ys = [], [], []
            for row in reader:
                vals = [float(c) if c != "" else 0.0 for c in row[:d]]
                masks.append([c == "" for c in row[:d]])
                xs.append(vals)
                ys.append(int(row[d]))
        return cls.from_dense(np.array(xs), np.array(masks, dtype=bool), np.array(ys))


def apply_mechanism(
    X: np.ndarray, y: np.ndarray, spec: MechanismSpec, rng: np.random.Generator
) -> MaskedDataset:
    """Mask a complete dataset according to the mechanism."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimMismatchError(f"X shape {X.shape} inconsistent with y shape {y.shape}")
    return MaskedDataset.from_dense(X, spec.draw_mask(X, rng), y)


def pattern_histogram(ds: MaskedDataset, by_class: bool = False):
    return ds.pattern_histogram(by_class=by_class)
