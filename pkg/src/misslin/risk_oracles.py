"""Exact risks, finite-sample bounds, and Monte Carlo risk estimation.

Closed-form Bayes risks for Gaussian class conditionals with and without
missing coordinates, conditional misclassification probabilities of plug-in
rules, the package's three misclassification bounds (bias, estimation, and
their sum) plus the thresholded-MNAR bound, and a seeded Monte Carlo risk
estimator with binomial confidence intervals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core_math import (
    DimensionTooLargeError,
    PATTERN_ENUMERATION_LIMIT,
    Pattern,
    eigen_extremes,
    std_normal_cdf,
    submatrix,
    substream,
)
from .generators import GpmmModel, LdaModel
from .missingness import MaskedDataset


@dataclass(frozen=True)
class RiskReport:
    """Point estimate with a 95% binomial interval and optional references."""

    risk_estimate: float
    ci_halfwidth: float
    n_test: int
    bayes_risk: float | None = None
    excess: float | None = None
    bound_values: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.risk_estimate <= 1.0:
            raise ValueError("risk must lie in [0, 1]")


@dataclass(frozen=True)
class BoundInputs:
    """Scalar inputs shared by the bias and estimation bounds.

    mu is the common per-coordinate magnitude of the class-mean gap;
    mu_inf_norm is the largest absolute coordinate across both class means
    (it controls the empty-cell term of the estimation bound).
    """

    d: int
    n: int
    eta: float
    mu: float
    lambda_min: float
    lambda_max: float
    mu_inf_norm: float
    kappa: float

    def __post_init__(self):
        if not 0.0 < self.lambda_min <= self.lambda_max:
            raise ValueError("need 0 < lambda_min <= lambda_max")
        if self.kappa < 1.0:
            raise ValueError("kappa is at least 1 by definition")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")

    @property
    def snr(self) -> float:
        return self.mu / math.sqrt(self.lambda_max)

    @property
    def epsilon(self) -> float:
        """eta + exp(-snr^2 / 8) (1 - eta), strictly below 1 for positive snr."""
        return self.eta + math.exp(-(self.snr**2) / 8.0) * (1.0 - self.eta)

    @classmethod
    def from_lda_model(cls, model: LdaModel, eta: float, n: int) -> "BoundInputs":
        gap = np.abs(model.mean_gap())
        if np.max(gap) - np.min(gap) > 1e-9 * max(np.max(gap), 1e-300):
            raise ValueError("bound inputs require a constant-magnitude mean gap")
        lo, hi = eigen_extremes(model.sigma)
        kappa = float(np.max(np.diag(model.sigma.entries)) / lo)
        mu_inf = float(max(np.max(np.abs(model.mu_pos)), np.max(np.abs(model.mu_neg))))
        return cls(model.d, n, eta, float(gap[0]), lo, hi, mu_inf, kappa)


def mahalanobis_gap(model: LdaModel, pattern: Pattern) -> float:
    """||Sigma_obs^{-1/2} (mu_pos - mu_neg)_obs||."""
    obs = np.array(pattern.obs_indices(), dtype=int)
    if obs.size == 0:
        return 0.0
    sub = submatrix(model.sigma, pattern)
    return math.sqrt(max(sub.inv_quad(model.mean_gap()[obs]), 0.0))


def _two_sided_risk(gamma: float, pi_pos: float) -> float:
    """pi_neg Phi(-a-b) + pi_pos Phi(a-b) with a = log(pi_neg/pi_pos)/gamma, b = gamma/2."""
    pi_neg = 1.0 - pi_pos
    if gamma <= 0.0:
        return min(pi_pos, pi_neg)
    a = math.log(pi_neg / pi_pos) / gamma
    b = gamma / 2.0
    return pi_neg * std_normal_cdf(-a - b) + pi_pos * std_normal_cdf(a - b)


def bayes_risk_complete(model: LdaModel) -> float:
    """Minimal misclassification probability on fully observed inputs.

    Equals Phi(-gamma/2) for balanced classes, with gamma the Mahalanobis
    gap between the class means. Coinciding means give min(pi_pos, pi_neg),
    the risk of always predicting the majority class.
    """
    gap = model.mean_gap()
    if not np.any(gap):
        return min(model.pi_pos, model.pi_neg)
    gamma = math.sqrt(max(model.sigma.inv_quad(gap), 0.0))
    return _two_sided_risk(gamma, model.pi_pos)


def _eta_vector(eta, d: int) -> np.ndarray:
    out = np.broadcast_to(np.asarray(eta, dtype=float), (d,)).copy()
    if np.any((out < 0) | (out > 1)):
        raise ValueError("missingness rates must lie in [0, 1]")
    return out


def bayes_risk_missing_mcar(model: LdaModel, eta) -> float:
    """Exact optimal risk under MCAR masking, by enumeration over all patterns.

    Each pattern contributes its probability times the per-pattern two-sided
    error; the all-missing pattern contributes min(pi_pos, pi_neg). The
    enumeration refuses dimensions above the 2^20 cap.
    """
    d = model.d
    if d > PATTERN_ENUMERATION_LIMIT:
        raise DimensionTooLargeError(
            f"exact enumeration needs d <= {PATTERN_ENUMERATION_LIMIT}, got {d}"
        )
    eta_vec = _eta_vector(eta, d)
    total = 0.0
    for bits in range(1 << d):
        p = Pattern(bits, d)
        ind = p.indicators().astype(bool)
        p_m = float(np.prod(np.where(ind, eta_vec, 1.0 - eta_vec)))
        if p_m == 0.0:
            continue
        if p.is_all_missing():
            total += p_m * min(model.pi_pos, model.pi_neg)
            continue
        total += p_m * _two_sided_risk(mahalanobis_gap(model, p), model.pi_pos)
    return total


def bayes_risk_missing_mcar_sampled(
    model: LdaModel, eta, n_patterns: int, seed: int
) -> tuple[float, float]:
    """Pattern-sampled alternative to the exact enumeration for large d.

    Draws patterns from the MCAR law and averages the per-pattern optimal
    error; returns (estimate, 95% ci halfwidth). Any dimension accepted.
    """
    if n_patterns < 100:
        raise ValueError("use at least 100 sampled patterns")
    d = model.d
    eta_vec = _eta_vector(eta, d)
    rng = substream(seed, "risk-patterns")
    cache: dict[int, float] = {}
    values = np.empty(n_patterns)
    weights = (1 << np.arange(d, dtype=np.uint64))
    masks = rng.random((n_patterns, d)) < eta_vec[None, :]
    bits_arr = (masks.astype(np.uint64) * weights).sum(axis=1)
    for i, bits in enumerate(bits_arr):
        bits = int(bits)
        if bits not in cache:
            p = Pattern(bits, d)
            if p.is_all_missing():
                cache[bits] = min(model.pi_pos, model.pi_neg)
            else:
                cache[bits] = _two_sided_risk(mahalanobis_gap(model, p), model.pi_pos)
        values[i] = cache[bits]
    est = float(values.mean())
    ci = 1.96 * float(values.std(ddof=1)) / math.sqrt(n_patterns)
    return est, ci


def exact_bias(model: LdaModel, eta) -> float:
    """Bayes risk inflation caused by masking: risk with missing minus complete."""
    return bayes_risk_missing_mcar(model, eta) - bayes_risk_complete(model)


def _stable_power_gap(eps: float, eta: float, k: int) -> float:
    """eps^k - eta^k without cancellation (0 <= eta <= eps <= 1)."""
    if k == 0:
        return 0.0
    if eta == 0.0:
        return eps**k
    if eps == 0.0:
        return 0.0
    return (eta**k) * math.expm1(k * math.log(eps / eta))


def bias_bound(b: BoundInputs) -> float:
    """Closed-form upper bound on the masking bias of the optimal rule.

    eta^d / 2 + (mu eta / (2 sqrt(2 pi))) sqrt(d / lambda_min)
    (epsilon^{d-1} - eta^{d-1}), evaluated in cancellation-safe form.
    """
    lead = b.eta**b.d / 2.0
    slope = b.mu * b.eta / (2.0 * math.sqrt(2.0 * math.pi))
    scale = math.sqrt(b.d / b.lambda_min)
    return lead + slope * scale * _stable_power_gap(b.epsilon, b.eta, b.d - 1)


def estimation_bound(b: BoundInputs) -> float:
    """Bound on the excess risk of pooled-mean plug-in LDA with known covariance.

    (2/sqrt(2 pi)) (((1+eta)/2)^n mu_inf^2 d (1-eta) / lambda_min + 4 kappa d / n)^(1/2).
    """
    empty_cell = ((1.0 + b.eta) / 2.0) ** b.n
    inner = (
        empty_cell * b.mu_inf_norm**2 * b.d * (1.0 - b.eta) / b.lambda_min
        + 4.0 * b.kappa * b.d / b.n
    )
    return 2.0 / math.sqrt(2.0 * math.pi) * math.sqrt(inner)


def estimation_bound_asymptotic(b: BoundInputs) -> float:
    """Large-n shape of the estimation bound (up to a universal constant)."""
    return math.sqrt(b.kappa * b.d / b.n)


def combined_bound(b: BoundInputs) -> float:
    """Excess over the complete-data optimum: estimation plus bias terms."""
    return estimation_bound(b) + bias_bound(b)


@dataclass(frozen=True)
class MnarPatternTerms:
    p_m: float
    mu_norm_pos: float
    mu_norm_neg: float
    lambda_min: float
    capped_term: float          # (4/sqrt(2 pi) + 8 mu / (sqrt(pi) sqrt(lmin))) * min(tau, p_m)
    vanishing_term: float       # sqrt(2) mu / sqrt(pi lmin) * p_m (1-p_m)^(n/2), frequent only


@dataclass(frozen=True)
class MnarBoundResult:
    total: float
    pattern_complexity: float   # sum over patterns of min(tau, p_m)
    per_pattern: dict

    def __float__(self) -> float:
        return self.total


def mnar_bound(model: GpmmModel, tau: float, n: int) -> MnarBoundResult:
    """Excess-risk bound for thresholded per-pattern means with known covariances.

    The per-pattern mean norm is taken as max_k ||mu_{m,k}|| (the per-class
    norms are reported so other readings are one line away). Patterns absent
    from the model have zero probability and contribute nothing.
    """
    if tau < math.sqrt(model.d / n):
        warnings.warn(
            f"tau={tau:.4g} below sqrt(d/n)={math.sqrt(model.d / n):.4g}; "
            "the bound is stated for tau at or above that level",
            UserWarning,
            stacklevel=2,
        )
    total = 0.0
    complexity = 0.0
    per_pattern = {}
    for pattern, comp in model.components.items():
        p_m = comp.p_m
        lo = eigen_extremes(comp.sigma)[0] if comp.sigma.dim > 0 else 1.0
        norm_pos = float(np.linalg.norm(comp.mu_pos))
        norm_neg = float(np.linalg.norm(comp.mu_neg))
        mu_norm = max(norm_pos, norm_neg)
        capped = (
            4.0 / math.sqrt(2.0 * math.pi) + 8.0 / math.sqrt(math.pi) * mu_norm / math.sqrt(lo)
        ) * min(tau, p_m)
        vanishing = 0.0
        if p_m >= tau:
            vanishing = (
                math.sqrt(2.0) * mu_norm / math.sqrt(math.pi * lo) * p_m * (1.0 - p_m) ** (n / 2.0)
            )
        total += capped + vanishing
        complexity += min(tau, p_m)
        per_pattern[pattern] = MnarPatternTerms(p_m, norm_pos, norm_neg, lo, capped, vanishing)
    return MnarBoundResult(total, complexity, per_pattern)


def conditional_misclass_prob(
    mu_hat_pos: np.ndarray, mu_hat_neg: np.ndarray, model: LdaModel, pattern: Pattern
) -> tuple[float, float]:
    """(P(predict +1 | Y=-1), P(predict -1 | Y=+1)) of the plug-in rule with known covariance.

    Closed Gaussian forms conditioned on the trained means. A zero trained
    gap (constant +1 prediction by sign(0)) returns the (0.5, 0.5)
    convention for the degenerate direction.
    """
    obs = np.array(pattern.obs_indices(), dtype=int)
    if obs.size == 0:
        return 0.5, 0.5
    sub = submatrix(model.sigma, pattern)
    gap_hat = np.asarray(mu_hat_pos, dtype=float)[obs] - np.asarray(mu_hat_neg, dtype=float)[obs]
    denom_sq = sub.inv_quad(gap_hat)
    if denom_sq <= 0.0:
        return 0.5, 0.5
    denom = math.sqrt(denom_sq)
    mid_hat = (np.asarray(mu_hat_pos, dtype=float)[obs] + np.asarray(mu_hat_neg, dtype=float)[obs]) / 2.0
    solve_gap = sub.solve(gap_hat)
    num_neg = float(solve_gap @ (model.mu_neg[obs] - mid_hat))
    num_pos = float(solve_gap @ (model.mu_pos[obs] - mid_hat))
    return std_normal_cdf(num_neg / denom), std_normal_cdf(-num_pos / denom)


def monte_carlo_risk(
    classifier,
    source,
    n_test: int,
    seed: int,
    chunk: int = 1 << 17,
    bayes_risk: float | None = None,
    bound_values: dict | None = None,
) -> RiskReport:
    """Estimate P(Y != h(Z)) on fresh draws from `source(n, rng) -> MaskedDataset`.

    Draws are sharded into chunks with independent substreams keyed by the
    chunk index, so the estimate is reproducible and independent of chunk
    scheduling; error counts merge by exact addition.
    """
    if n_test < 100:
        raise ValueError("use at least 100 test draws")
    errors = 0
    done = 0
    shard = 0
    while done < n_test:
        m = min(chunk, n_test - done)
        ds = source(m, substream(seed, "mc-risk", shard))
        errors += int(np.sum(classifier.predict(ds) != ds.labels))
        done += m
        shard += 1
    risk = errors / n_test
    ci = 1.96 * math.sqrt(risk * (1.0 - risk) / n_test)
    excess = None if bayes_risk is None else risk - bayes_risk
    return RiskReport(risk, ci, n_test, bayes_risk, excess, dict(bound_values or {}))


def masked_lda_source(model: LdaModel, mechanism):
    """Data source drawing from the model and masking with the mechanism."""
    from .generators import sample_lda
    from .missingness import apply_mechanism

    def draw(n: int, rng: np.random.Generator) -> MaskedDataset:
        X, y = sample_lda(model, n, rng)
        return apply_mechanism(X, y, mechanism, rng)

    return draw


def masked_logistic_source(model, mechanism):
    from .generators import sample_logistic
    from .missingness import apply_mechanism

    def draw(n: int, rng: np.random.Generator) -> MaskedDataset:
        X, y = sample_logistic(model, n, rng)
        return apply_mechanism(X, y, mechanism, rng)

    return draw


def gpmm_source(model: GpmmModel):
    from .generators import sample_gpmm

    def draw(n: int, rng: np.random.Generator) -> MaskedDataset:
        return sample_gpmm(model, n, rng)

    return draw
