"""Shared numeric primitives.

Missing-pattern bit algebra, positive-definite linear algebra on observed
sub-blocks, the standard Gaussian cdf, and the seeded-randomness contract
used by every Monte Carlo routine in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

MAX_DIM = 63
PATTERN_ENUMERATION_LIMIT = 20

_MASK64 = (1 << 64) - 1


class AllMissingError(ValueError):
    """Raised when an operation needs at least one observed coordinate."""


class NotPdError(ValueError):
    """Raised when a matrix is not symmetric positive definite."""


class DimMismatchError(ValueError):
    """Raised when array dimensions are inconsistent."""


class DimensionTooLargeError(ValueError):
    """Raised when an exact pattern enumeration is requested above the cap."""


@dataclass(frozen=True)
class Pattern:
    """Missing pattern over ``dim`` coordinates, bit ``j`` set iff coordinate j is missing."""

    bits: int
    dim: int

    def __post_init__(self) -> None:
        if not 1 <= self.dim <= MAX_DIM:
            raise ValueError(f"pattern dimension must be in [1, {MAX_DIM}], got {self.dim}")
        if not 0 <= self.bits < (1 << self.dim):
            raise ValueError(f"pattern bits {self.bits} out of range for dim {self.dim}")

    @classmethod
    def from_indicators(cls, indicators) -> "Pattern":
        """Build from a 0/1 sequence, one entry per coordinate (1 = missing)."""
        ind = [int(bool(v)) for v in indicators]
        bits = 0
        for j, v in enumerate(ind):
            if v:
                bits |= 1 << j
        return cls(bits, len(ind))

    @classmethod
    def all_observed(cls, dim: int) -> "Pattern":
        return cls(0, dim)

    @classmethod
    def all_missing(cls, dim: int) -> "Pattern":
        return cls((1 << dim) - 1, dim)

    @property
    def n_missing(self) -> int:
        return self.bits.bit_count()

    @property
    def n_observed(self) -> int:
        return self.dim - self.n_missing

    def is_all_missing(self) -> bool:
        return self.bits == (1 << self.dim) - 1

    def is_all_observed(self) -> bool:
        return self.bits == 0

    def obs_indices(self) -> tuple[int, ...]:
        return tuple(j for j in range(self.dim) if not (self.bits >> j) & 1)

    def mis_indices(self) -> tuple[int, ...]:
        return tuple(j for j in range(self.dim) if (self.bits >> j) & 1)

    def indicators(self) -> np.ndarray:
        """0/1 vector of length dim, 1 where missing."""
        return np.array([(self.bits >> j) & 1 for j in range(self.dim)], dtype=np.int8)

    def __str__(self) -> str:
        return "".join(str((self.bits >> j) & 1) for j in range(self.dim))


def all_patterns(dim: int):
    """Iterate every pattern of the given dimension; refuses dim above the enumeration cap."""
    if dim > PATTERN_ENUMERATION_LIMIT:
        raise DimensionTooLargeError(
            f"exact enumeration over 2^{dim} patterns exceeds the cap of "
            f"2^{PATTERN_ENUMERATION_LIMIT}"
        )
    for bits in range(1 << dim):
        yield Pattern(bits, dim)


class SpdMatrix:
    """Symmetric positive definite matrix, validated at construction.

    Symmetry is checked to 1e-12 relative to the largest entry and the
    Cholesky factorization must succeed with all pivots above
    1e-12 * trace / d.  Near-singular inputs are rejected rather than
    regularized; callers that want a ridge must add it explicitly.
    """

    __slots__ = ("entries", "_chol")

    def __init__(self, entries) -> None:
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimMismatchError(f"expected a square matrix, got shape {a.shape}")
        if a.size == 0:
            # degenerate 0-dimensional block (all-missing pattern), trivially SPD
            a.setflags(write=False)
            self.entries = a
            self._chol = a
            return
        if not np.all(np.isfinite(a)):
            raise NotPdError("matrix has non-finite entries")
        scale = np.max(np.abs(a)) if a.size else 0.0
        if np.max(np.abs(a - a.T)) > 1e-12 * max(scale, 1e-300):
            raise NotPdError("matrix is not symmetric")
        a = (a + a.T) / 2.0
        try:
            chol = np.linalg.cholesky(a)
        except np.linalg.LinAlgError as exc:
            raise NotPdError("Cholesky factorization failed") from exc
        d = a.shape[0]
        pivot_floor = 1e-12 * np.trace(a) / d
        if np.min(np.diag(chol)) ** 2 <= pivot_floor:
            raise NotPdError("matrix is numerically singular (tiny Cholesky pivot)")
        a.setflags(write=False)
        self.entries = a
        self._chol = chol

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def cholesky(self) -> np.ndarray:
        """Lower-triangular factor L with L L^T = entries."""
        return self._chol

    def solve(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.dim:
            raise DimMismatchError(f"vector of length {v.shape[0]} vs matrix dim {self.dim}")
        return cho_solve((self._chol, True), v)

    def inv_quad(self, v: np.ndarray) -> float:
        """v^T A^{-1} v, nonnegative for any v."""
        v = np.asarray(v, dtype=float)
        return float(v @ self.solve(v))

    def __repr__(self) -> str:
        return f"SpdMatrix(dim={self.dim})"


def submatrix(sigma: SpdMatrix, p: Pattern) -> SpdMatrix:
    """Principal submatrix over the observed coordinates of ``p``."""
    if p.dim != sigma.dim:
        raise DimMismatchError(f"pattern dim {p.dim} vs matrix dim {sigma.dim}")
    obs = p.obs_indices()
    if not obs:
        raise AllMissingError("pattern has no observed coordinate")
    idx = np.array(obs)
    return SpdMatrix(sigma.entries[np.ix_(idx, idx)])


def spd_solve(sigma: SpdMatrix, v: np.ndarray) -> np.ndarray:
    """Solve sigma @ x = v through the cached Cholesky factor."""
    return sigma.solve(v)


def sigmoid(t: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, elementwise."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def std_normal_cdf(x: float) -> float:
    """Standard Gaussian cdf, erfc based, absolute error below 1e-12."""
    if not math.isfinite(x):
        raise ValueError(f"expected a finite argument, got {x}")
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def std_normal_cdf_vec(x: np.ndarray) -> np.ndarray:
    """Vectorized companion of :func:`std_normal_cdf`."""
    from scipy.special import ndtr

    return ndtr(np.asarray(x, dtype=float))


def eigen_extremes(sigma: SpdMatrix) -> tuple[float, float]:
    """(smallest, largest) eigenvalue via a full symmetric eigensolve."""
    vals = np.linalg.eigvalsh(sigma.entries)
    return float(vals[0]), float(vals[-1])


def toeplitz_correlation(d: int, rho: float) -> SpdMatrix:
    """Correlation matrix with entries rho^|i-j|."""
    idx = np.arange(d)
    return SpdMatrix(rho ** np.abs(idx[:, None] - idx[None, :]))


def identity_spd(d: int) -> SpdMatrix:
    return SpdMatrix(np.eye(d))


def _path_entropy(part) -> int:
    if isinstance(part, str):
        return int.from_bytes(part.encode("utf8"), "big")
    return int(part) & _MASK64


def make_rng(seed: int) -> np.random.Generator:
    """Root generator for a 64-bit seed; equal seeds give bitwise-equal streams."""
    return np.random.default_rng(np.random.SeedSequence(int(seed) & _MASK64))

def substream(seed: int, *path) -> np.random.Generator:
    """Independent generator for (seed, path).

    Every Monte Carlo replicate derives its own stream from the replicate
    index so that results do not depend on scheduling or chunk order.
    Path elements may be ints or short strings.
    """
    entropy = [int(seed) & _MASK64] + [_path_entropy(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))
