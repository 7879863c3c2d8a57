"""Ball-geometry separability under coordinate deletion.

Exact disjointness of two ell^p balls, the (alpha, sqrt(alpha)) sandwich on
the probability that MCAR projection keeps Euclidean balls disjoint, Monte
Carlo estimates of that probability, and the asymptotic limit for uniform
s-missing patterns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SeparabilityResult:
    mc_estimate: float
    ci_halfwidth: float
    lower_bound: float
    upper_bound: float
    replications: int


def _norm(v: np.ndarray, p) -> float:
    return float(np.linalg.norm(np.asarray(v, dtype=float), ord=p))


def balls_disjoint(c1, c2, r1: float, r2: float, p) -> bool:
    """True iff the balls of radii r1, r2 around c1, c2 are disjoint in ell^p.

    Disjointness is strict: touching balls count as intersecting.
    """
    if r1 < 0 or r2 < 0:
        raise ValueError("radii must be nonnegative")
    if not (p == math.inf or p >= 1):
        raise ValueError("norm order must be >= 1 or inf")
    return r1 + r2 < _norm(np.asarray(c1, float) - np.asarray(c2, float), p)


def separability_bounds(c1, c2, eta) -> tuple[float, float]:
    """(alpha, sqrt(alpha)) sandwich for the post-projection disjointness probability."""
    diff = np.asarray(c1, dtype=float) - np.asarray(c2, dtype=float)
    if not np.any(diff):
        raise ValueError("centroids must differ")
    eta = np.broadcast_to(np.asarray(eta, dtype=float), diff.shape)
    if np.any((eta < 0) | (eta > 1)):
        raise ValueError("missingness rates must lie in [0, 1]")
    alpha = float(((1.0 - eta) * diff**2).sum() / (diff**2).sum())
    return alpha, math.sqrt(alpha)


def mc_separability(
    c1, c2, eta, reps: int, rng: np.random.Generator, chunk: int = 1 << 18
) -> SeparabilityResult:
    """Monte Carlo estimate of P(projected balls stay disjoint).

    Per replicate: radii R1, R2 iid U(0, ||c1-c2||_2 / 2) and an MCAR mask;
    success means R1 + R2 < || (1-M) o (c1-c2) ||_2.
    """
    if reps < 1000:
        raise ValueError("use at least 1000 replications")
    diff = np.asarray(c1, dtype=float) - np.asarray(c2, dtype=float)
    d = diff.shape[0]
    eta_vec = np.broadcast_to(np.asarray(eta, dtype=float), (d,))
    half = np.linalg.norm(diff) / 2.0
    alpha, sqrt_alpha = separability_bounds(c1, c2, eta_vec)
    successes = 0
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        radii = rng.uniform(0.0, half, size=(m, 2)).sum(axis=1)
        observed = rng.random((m, d)) >= eta_vec[None, :]
        proj = np.sqrt((observed * diff[None, :] ** 2).sum(axis=1))
        successes += int((radii < proj).sum())
        done += m
    est = successes / reps
    ci = 1.96 * math.sqrt(est * (1.0 - est) / reps)
    return SeparabilityResult(est, ci, alpha, sqrt_alpha, reps)


def asymptotic_separability(rho: float, p) -> float:
    """High-dimension limit (1 - rho)^(1/p) of the disjointness probability.

    At p = inf the limit is 1 for any rho < 1 (and 0 at rho = 1).
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    if not (p == math.inf or p >= 1):
        raise ValueError("norm order must be >= 1 or inf")
    if p == math.inf:
        return 1.0 if rho < 1.0 else 0.0
    return float((1.0 - rho) ** (1.0 / p))


def mc_asymptotic_check(
    d: int,
    s: int,
    p,
    centroid_law: str,
    reps: int,
    rng: np.random.Generator,
    chunk: int = 2048,
) -> tuple[float, float, float]:
    """Empirical disjointness probability for equal radii and uniform s-missing patterns.

    Centroid-difference coordinates are iid under the chosen law: 'gaussian'
    draws standard normals, 'uniform' draws the difference of two U(0, 1).
    Returns (estimate, ci_halfwidth, limit).
    """
    if not 0 <= s <= d:
        raise ValueError("s must lie in [0, d]")
    if centroid_law not in ("gaussian", "uniform"):
        raise ValueError(f"unknown centroid law {centroid_law!r}")
    successes = 0
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        if centroid_law == "gaussian":
            diff = rng.standard_normal((m, d))
        else:
            diff = rng.random((m, d)) - rng.random((m, d))
        full = np.linalg.norm(diff, ord=p, axis=1)
        radius = rng.random(m) * full / 2.0
        if s > 0:
            keys = rng.random((m, d))
            kth = np.partition(keys, s - 1, axis=1)[:, s - 1 : s]
            observed = keys > kth
        else:
            observed = np.ones((m, d), dtype=bool)
        proj = np.linalg.norm(np.where(observed, diff, 0.0), ord=p, axis=1)
        successes += int((2.0 * radius < proj).sum())
        done += m
    est = successes / reps
    ci = 1.96 * math.sqrt(max(est * (1.0 - est), 1e-12) / reps)
    return est, ci, asymptotic_separability(s / d, p)
