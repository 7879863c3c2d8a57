"""Classifiers for masked inputs.

Every classifier exposes the same predict-on-masked-sample interface.
Pattern-by-pattern classifiers store one linear rule per missing pattern and
structurally cannot read masked coordinates: per-pattern weights have length
|obs(m)| and are applied to the observed block only. Impute-then-predict
classifiers fill a test row with frozen constants (or one frozen regression
pass) before applying a single linear rule.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core_math import NotPdError, Pattern, SpdMatrix, sigmoid, submatrix
from .generators import GpmmModel, LdaModel, LogisticModel
from .missingness import MaskedDataset, Mcar, SelfMaskMnar


class DegenerateCovarianceWarning(UserWarning):
    """Estimated covariance failed the SPD check; a diagonal fallback is used."""


class UnknownPatternWarning(UserWarning):
    """A prediction-time pattern was absent from the model; fallback label used."""


def _majority_label(labels: np.ndarray) -> int:
    # tie goes to +1
    return 1 if np.sum(labels == 1) >= np.sum(labels == -1) else -1


def _sign_pm1(scores: np.ndarray) -> np.ndarray:
    # sign(0) = +1 throughout the package
    return np.where(scores >= 0.0, 1, -1).astype(np.int8)


class MaskedClassifier:
    """Interface: batch prediction on a MaskedDataset plus single-row prediction."""

    def predict(self, ds: MaskedDataset) -> np.ndarray:
        out = np.empty(ds.n, dtype=np.int8)
        for pattern, idx, vals, _ in ds.group_items():
            out[idx] = self._predict_group(pattern, vals)
        return out

    def predict_row(self, pattern: Pattern, x_obs) -> int:
        vals = np.asarray(x_obs, dtype=float).reshape(1, -1)
        return int(self._predict_group(pattern, vals)[0])

    def _predict_group(self, pattern: Pattern, vals: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class PbpLinearClassifier(MaskedClassifier):
    """One linear rule (w_m, b_m) per missing pattern, with a fallback label.

    Rules can be stored eagerly (trained classifiers) or produced lazily from
    a callable and cached, so that models over 2^d patterns only materialize
    the patterns actually met.
    """

    def __init__(self, d: int, fallback_label: int = 1, rule=None):
        self.d = int(d)
        self.fallback_label = int(fallback_label)
        self._rule = rule
        self._table: dict[int, tuple[np.ndarray, float] | None] = {}
        self.diagnostics: dict[int, str] = {}

    def set_weights(self, pattern: Pattern, w, b: float, note: str | None = None) -> None:
        w = np.asarray(w, dtype=float)
        if w.shape != (pattern.n_observed,):
            raise ValueError(
                f"pattern {pattern} observes {pattern.n_observed} coordinates, "
                f"got weights of length {w.shape}"
            )
        self._table[pattern.bits] = (w, float(b))
        if note:
            self.diagnostics[pattern.bits] = note

    def weights_for(self, pattern: Pattern):
        """(w_m, b_m) for the pattern, or None when untrained (fallback applies)."""
        if pattern.bits in self._table:
            return self._table[pattern.bits]
        if self._rule is not None:
            wb = self._rule(pattern)
            if wb is not None:
                w, b = wb
                wb = (np.asarray(w, dtype=float), float(b))
            self._table[pattern.bits] = wb
            return wb
        return None

    def trained_patterns(self) -> list[Pattern]:
        return [Pattern(bits, self.d) for bits, wb in sorted(self._table.items()) if wb]

    def _predict_group(self, pattern: Pattern, vals: np.ndarray) -> np.ndarray:
        wb = self.weights_for(pattern)
        if wb is None:
            return np.full(vals.shape[0], self.fallback_label, dtype=np.int8)
        w, b = wb
        return _sign_pm1(vals @ w + b)


# ---------------------------------------------------------------------------
# Oracle (population-parameter) classifiers
# ---------------------------------------------------------------------------


def bayes_pbp_lda(model: LdaModel) -> PbpLinearClassifier:
    """Optimal pattern-by-pattern rule for Gaussian class conditionals under MCAR.

    For pattern m the rule is sign(gap_obs' S_obs^{-1} (x - mid_obs) - log(pi_neg/pi_pos));
    the log term vanishes for balanced classes. The all-missing pattern
    predicts the prior majority, +1 on ties by the sign(0) convention.
    """
    gap = model.mean_gap()
    mid = model.midpoint()
    offset = math.log(model.pi_neg / model.pi_pos)
    fallback = 1 if model.pi_pos >= model.pi_neg else -1

    def rule(pattern: Pattern):
        if pattern.is_all_missing():
            return None
        obs = np.array(pattern.obs_indices(), dtype=int)
        sub = submatrix(model.sigma, pattern)
        w = sub.solve(gap[obs])
        b = -float(w @ mid[obs]) - offset
        return w, b

    return PbpLinearClassifier(model.d, fallback_label=fallback, rule=rule)


class GpmmBayesClassifier(PbpLinearClassifier):
    """Per-pattern Gaussian rule with the log prior-ratio offset.

    Patterns absent from the model fall back to the fallback label; such
    events are counted and surfaced once as a warning.
    """

    def __init__(self, model: GpmmModel, fallback_label: int = 1):
        super().__init__(model.d, fallback_label=fallback_label)
        self.unknown_pattern_count = 0
        self._warned = False
        for pattern, comp in model.components.items():
            gap = comp.mu_pos - comp.mu_neg
            mid = (comp.mu_pos + comp.mu_neg) / 2.0
            if pattern.n_observed == 0:
                # no observed coordinate: decide on the prior ratio alone
                b = -math.log(comp.pi_neg / comp.pi_pos) if comp.pi_pos > 0 and comp.pi_neg > 0 else 0.0
                self.set_weights(pattern, np.empty(0), b)
                continue
            w = comp.sigma.solve(gap)
            b = -float(w @ mid) - math.log(comp.pi_neg / comp.pi_pos)
            self.set_weights(pattern, w, b)

    def _predict_group(self, pattern: Pattern, vals: np.ndarray) -> np.ndarray:
        if pattern.bits not in self._table:
            self.unknown_pattern_count += vals.shape[0]
            if not self._warned:
                warnings.warn(
                    f"pattern {pattern} absent from the mixture model; "
                    f"predicting the fallback label",
                    UnknownPatternWarning,
                    stacklevel=2,
                )
                self._warned = True
        return super()._predict_group(pattern, vals)


def bayes_mnar(model: GpmmModel) -> GpmmBayesClassifier:
    return GpmmBayesClassifier(model)


# ---------------------------------------------------------------------------
# Perceptron
# ---------------------------------------------------------------------------


@dataclass
class PerceptronFit:
    w: np.ndarray
    b: float
    converged: bool
    n_updates: int
    epochs_run: int


def train_perceptron(X, y, max_epochs: int = 1000) -> PerceptronFit:
    """Rosenblatt updates in cyclic order, unit learning rate.

    Converged means a full pass over the data with zero mistakes was
    observed; otherwise the last iterate is returned with the flag down.
    """
    if max_epochs < 1:
        raise ValueError("max_epochs must be >= 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    rows = X.tolist()
    labels = y.tolist()
    w = [0.0] * d
    b = 0.0
    n_updates = 0
    epochs_run = 0
    converged = False
    for _ in range(max_epochs):
        # a clean full pass makes no update, so checking margins up front is
        # exactly the convergence test and costs one vectorized product
        if np.all(y * (X @ np.asarray(w) + b) > 0.0):
            converged = True
            break
        epochs_run += 1
        for i in range(n):
            xi = rows[i]
            s = b
            for j in range(d):
                s += w[j] * xi[j]
            yi = labels[i]
            if yi * s <= 0.0:
                for j in range(d):
                    w[j] += yi * xi[j]
                b += yi
                n_updates += 1
    if not converged:
        converged = bool(np.all(y * (X @ np.asarray(w) + b) > 0.0))
    return PerceptronFit(np.asarray(w), b, converged, n_updates, epochs_run)


# ---------------------------------------------------------------------------
# Logistic regression (Newton with step halving)
# ---------------------------------------------------------------------------

PARAM_CLIP = 30.0


@dataclass
class LogisticFit:
    beta0: float
    beta: np.ndarray
    converged: bool
    n_iter: int
    standard_errors: np.ndarray | None = None  # (se_beta0, se_beta...), plug-in


def train_logistic(
    X, y, max_iter: int = 100, tol: float = 1e-8, ridge: float = 0.0
) -> LogisticFit:
    """Minimize mean log(1 + exp(-y (b0 + b.x))) + ridge * ||b||^2.

    Newton steps with step halving; stops when the gradient inf-norm falls
    below tol. On separable data with ridge = 0 the parameters are clipped
    to +/- 30 and the non-converged flag is returned.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if ridge == 0.0 and (np.all(y == 1) or np.all(y == -1)):
        raise ValueError("constant labels require ridge > 0")
    Xa = np.hstack([np.ones((n, 1)), X])
    pen = np.zeros(d + 1)
    pen[1:] = 2.0 * ridge

    def objective(theta):
        m = y * (Xa @ theta)
        return float(np.mean(np.logaddexp(0.0, -m)) + ridge * np.sum(theta[1:] ** 2))

    theta = np.zeros(d + 1)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        z = Xa @ theta
        s = sigmoid(-y * z)
        grad = -(Xa.T @ (y * s)) / n + pen * theta
        if np.max(np.abs(grad)) <= tol:
            converged = True
            break
        p = sigmoid(z)
        wdiag = p * (1.0 - p) / n
        H = Xa.T @ (Xa * wdiag[:, None]) + np.diag(pen)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        cur = objective(theta)
        t = 1.0
        cand = theta
        for _ in range(60):
            cand = np.clip(theta - t * step, -PARAM_CLIP, PARAM_CLIP)
            if objective(cand) <= cur + 1e-15:
                break
            t /= 2.0
        theta = cand
    if not converged:
        z = Xa @ theta
        s = sigmoid(-y * z)
        grad = -(Xa.T @ (y * s)) / n + pen * theta
        converged = bool(np.max(np.abs(grad)) <= tol)
    if converged and ridge == 0.0 and np.all(y * (Xa @ theta) > 0.0):
        # strictly separated data: the unpenalized optimum sits at infinity,
        # so a gradient below tol only reflects the flat tail of the loss
        converged = False
    p = sigmoid(Xa @ theta)
    info = Xa.T @ (Xa * (p * (1.0 - p))[:, None])
    try:
        se = np.sqrt(np.maximum(np.diag(np.linalg.inv(info)), 0.0))
    except np.linalg.LinAlgError:
        se = None
    return LogisticFit(float(theta[0]), theta[1:].copy(), converged, it, se)


# ---------------------------------------------------------------------------
# Pattern-by-pattern trained classifiers
# ---------------------------------------------------------------------------


def train_pbp_logistic(ds: MaskedDataset, **opts) -> PbpLinearClassifier:
    """One logistic fit per observed pattern on that pattern's rows.

    Patterns carrying a single class get a constant rule at the majority
    label of the pattern; unseen patterns fall back to the training majority.
    """
    clf = PbpLinearClassifier(ds.d, fallback_label=_majority_label(ds.labels))
    for pattern, _, vals, labels in ds.group_items():
        if np.all(labels == 1) or np.all(labels == -1) or pattern.n_observed == 0:
            clf.set_weights(
                pattern,
                np.zeros(pattern.n_observed),
                float(_majority_label(labels)),
                note="single-class",
            )
            continue
        fit = train_logistic(vals, labels, **opts)
        clf.set_weights(pattern, fit.beta, fit.beta0)
        self_note = "converged" if fit.converged else "not-converged"
        clf.diagnostics[pattern.bits] = self_note
    return clf


def train_pbp_perceptron(ds: MaskedDataset, max_epochs: int = 1000) -> PbpLinearClassifier:
    """One perceptron per observed pattern; single-class patterns get a constant rule."""
    clf = PbpLinearClassifier(ds.d, fallback_label=_majority_label(ds.labels))
    for pattern, _, vals, labels in ds.group_items():
        if np.all(labels == 1) or np.all(labels == -1) or pattern.n_observed == 0:
            clf.set_weights(
                pattern,
                np.zeros(pattern.n_observed),
                float(_majority_label(labels)),
                note="single-class",
            )
            continue
        fit = train_perceptron(vals, labels, max_epochs=max_epochs)
        clf.set_weights(pattern, fit.w, fit.b)
        clf.diagnostics[pattern.bits] = "converged" if fit.converged else "not-converged"
    return clf


@dataclass(frozen=True)
class PooledMeanEstimates:
    """Per-coordinate class means pooled over all rows observing the coordinate.

    Coordinates never observed within a class keep the value 0 (the 0/0 = 0
    convention), with a zero count recorded.
    """

    mu_pos: np.ndarray
    mu_neg: np.ndarray
    count_pos: np.ndarray
    count_neg: np.ndarray


def pooled_mean_estimates(ds: MaskedDataset) -> PooledMeanEstimates:
    d = ds.d
    sums = {1: np.zeros(d), -1: np.zeros(d)}
    counts = {1: np.zeros(d), -1: np.zeros(d)}
    for pattern, _, vals, labels in ds.group_items():
        obs = np.array(pattern.obs_indices(), dtype=int)
        if obs.size == 0:
            continue
        for k in (1, -1):
            block = vals[labels == k]
            if block.shape[0]:
                sums[k][obs] += block.sum(axis=0)
                counts[k][obs] += block.shape[0]
    mu = {
        k: np.divide(sums[k], counts[k], out=np.zeros(d), where=counts[k] > 0)
        for k in (1, -1)
    }
    return PooledMeanEstimates(mu[1], mu[-1], counts[1], counts[-1])


def pooled_covariance(ds: MaskedDataset, est: PooledMeanEstimates) -> np.ndarray:
    """Entrywise pairwise-complete covariance, centered by class-specific means."""
    d = ds.d
    s = np.zeros((d, d))
    c = np.zeros((d, d))
    for pattern, _, vals, labels in ds.group_items():
        obs = np.array(pattern.obs_indices(), dtype=int)
        if obs.size == 0:
            continue
        sel = np.ix_(obs, obs)
        for k, mu in ((1, est.mu_pos), (-1, est.mu_neg)):
            block = vals[labels == k]
            if block.shape[0]:
                v = block - mu[obs]
                s[sel] += v.T @ v
                c[sel] += block.shape[0]
    cov = np.divide(s, c, out=np.zeros((d, d)), where=c > 0)
    return (cov + cov.T) / 2.0


def train_lda_mcar(ds: MaskedDataset, sigma: SpdMatrix | None = None) -> PbpLinearClassifier:
    """Plug-in LDA with per-coordinate means pooled across patterns.

    With a known covariance the per-pattern rule inverts its observed
    sub-block; with sigma=None an entrywise pairwise-complete estimate is
    used (diagonal fallback under a DegenerateCovarianceWarning if the SPD
    check fails). Pattern weights are materialized lazily at predict time.
    """
    est = pooled_mean_estimates(ds)
    gap = est.mu_pos - est.mu_neg
    mid = (est.mu_pos + est.mu_neg) / 2.0
    if sigma is not None:
        cov = sigma.entries
    else:
        cov = pooled_covariance(ds, est)
        try:
            SpdMatrix(cov)
        except NotPdError:
            warnings.warn(
                "pairwise-complete covariance estimate failed the SPD check; "
                "falling back to its diagonal",
                DegenerateCovarianceWarning,
                stacklevel=2,
            )
            cov = np.diag(np.diag(cov))

    def rule(pattern: Pattern):
        if pattern.n_observed == 0:
            # the plug-in formula degenerates to sign(0) = +1 here
            return np.empty(0), 0.0
        obs = np.array(pattern.obs_indices(), dtype=int)
        try:
            sub = SpdMatrix(cov[np.ix_(obs, obs)])
        except NotPdError:
            return None
        w = sub.solve(gap[obs])
        return w, -float(w @ mid[obs])

    clf = PbpLinearClassifier(ds.d, fallback_label=_majority_label(ds.labels), rule=rule)
    clf.mean_estimates = est
    return clf


def train_lda_patternwise(ds: MaskedDataset, min_per_class: int = 2) -> PbpLinearClassifier:
    """Classic LDA fit separately on each pattern's own rows.

    Patterns with fewer than min_per_class samples in either class stay
    untrained (fallback). The within-pattern covariance needs at least
    |obs| + 2 rows; below that the shared pairwise-complete estimate,
    restricted to the observed block, is used instead.
    """
    clf = PbpLinearClassifier(ds.d, fallback_label=_majority_label(ds.labels))
    shared_cov = None
    est = None
    for pattern, _, vals, labels in ds.group_items():
        n_pos = int(np.sum(labels == 1))
        n_neg = int(np.sum(labels == -1))
        if min(n_pos, n_neg) < min_per_class:
            clf.diagnostics[pattern.bits] = "insufficient-samples"
            continue
        if pattern.n_observed == 0:
            # nothing to observe: decide on the pattern's empirical prior
            clf.set_weights(pattern, np.empty(0), math.log(n_pos / n_neg))
            continue
        mu_p = vals[labels == 1].mean(axis=0)
        mu_n = vals[labels == -1].mean(axis=0)
        n_m, k_obs = vals.shape
        if n_m >= k_obs + 2:
            vc = vals.astype(float).copy()
            vc[labels == 1] -= mu_p
            vc[labels == -1] -= mu_n
            cov_m = (vc.T @ vc) / (n_m - 2)
        else:
            if shared_cov is None:
                est = pooled_mean_estimates(ds)
                shared_cov = pooled_covariance(ds, est)
            obs = np.array(pattern.obs_indices(), dtype=int)
            cov_m = shared_cov[np.ix_(obs, obs)]
            clf.diagnostics[pattern.bits] = "shared-covariance"
        try:
            sub = SpdMatrix(cov_m)
        except NotPdError:
            try:
                sub = SpdMatrix(np.diag(np.diag(cov_m)))
                clf.diagnostics[pattern.bits] = "diagonal-covariance"
            except NotPdError:
                clf.diagnostics[pattern.bits] = "degenerate-covariance"
                continue
        w = sub.solve(mu_p - mu_n)
        b = -float(w @ ((mu_p + mu_n) / 2.0)) + math.log(n_pos / n_neg)
        clf.set_weights(pattern, w, b)
    return clf


def _resolve_pattern_sigma(sigmas, pattern: Pattern) -> SpdMatrix | None:
    if isinstance(sigmas, SpdMatrix):
        if pattern.n_observed == 0:
            return None
        return submatrix(sigmas, pattern)
    if callable(sigmas):
        return sigmas(pattern)
    return sigmas.get(pattern)


def train_lda_mnar_thresholded(
    ds: MaskedDataset, sigmas, tau: float | None = None
) -> PbpLinearClassifier:
    """Per-pattern means, zeroed for rare (pattern, class) cells, with known covariances.

    A cell is kept only when its count exceeds tau * n (tau defaults to
    sqrt(d/n)). Patterns thresholded in both classes give the zero rule,
    hence the +1 prediction of sign(0). `sigmas` may be a full SpdMatrix
    (observed sub-blocks are taken), a {Pattern: SpdMatrix} map, or a
    callable; patterns it cannot cover fall back.
    """
    n, d = ds.n, ds.d
    if tau is None:
        tau = math.sqrt(d / n)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    means: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for pattern, _, vals, labels in ds.group_items():
        k_obs = pattern.n_observed
        mu = {}
        for k in (1, -1):
            block = vals[labels == k]
            if block.shape[0] > tau * n and k_obs > 0:
                mu[k] = block.mean(axis=0)
            else:
                mu[k] = np.zeros(k_obs)
        means[pattern.bits] = (mu[1], mu[-1])

    def rule(pattern: Pattern):
        sub = _resolve_pattern_sigma(sigmas, pattern)
        if pattern.n_observed == 0:
            return np.empty(0), 0.0
        if sub is None:
            return None
        mu_p, mu_n = means.get(pattern.bits, (np.zeros(pattern.n_observed),) * 2)
        gap = mu_p - mu_n
        if not np.any(gap):
            return np.zeros(pattern.n_observed), 0.0
        w = sub.solve(gap)
        return w, -float(w @ ((mu_p + mu_n) / 2.0))

    clf = PbpLinearClassifier(d, fallback_label=1, rule=rule)
    clf.tau = tau
    clf.pattern_means = means
    return clf


# ---------------------------------------------------------------------------
# Impute-then-predict classifiers
# ---------------------------------------------------------------------------


class ImputedLinearClassifier(MaskedClassifier):
    """Constant-fill imputation followed by a single linear rule.

    Prediction is sign(b + sum_j w_j * (x_j if observed else constants_j)).
    """

    def __init__(self, constants, w, b: float):
        self.constants = np.asarray(constants, dtype=float)
        self.w = np.asarray(w, dtype=float)
        self.b = float(b)
        if self.constants.shape != self.w.shape:
            raise ValueError("constants and weights must have equal length")

    @property
    def d(self) -> int:
        return self.w.shape[0]

    def _predict_group(self, pattern: Pattern, vals: np.ndarray) -> np.ndarray:
        obs = np.array(pattern.obs_indices(), dtype=int)
        mis = np.array(pattern.mis_indices(), dtype=int)
        scores = np.full(vals.shape[0], self.b)
        if obs.size:
            scores += vals @ self.w[obs]
        if mis.size:
            scores += float(self.w[mis] @ self.constants[mis])
        return _sign_pm1(scores)

    def to_pbp(self) -> PbpLinearClassifier:
        """Equivalent pattern-by-pattern form: b_m = b + sum_{j missing} w_j alpha_j."""

        def rule(pattern: Pattern):
            obs = np.array(pattern.obs_indices(), dtype=int)
            mis = np.array(pattern.mis_indices(), dtype=int)
            b = self.b + (float(self.w[mis] @ self.constants[mis]) if mis.size else 0.0)
            return self.w[obs], b

        return PbpLinearClassifier(self.d, fallback_label=1, rule=rule)


class IceImputedClassifier(MaskedClassifier):
    """Chained-equations fill (frozen means + one regression pass) before a linear rule."""

    def __init__(self, column_means, coefs, w, b: float):
        self.column_means = np.asarray(column_means, dtype=float)
        self.coefs = coefs  # per column: (intercept, full-length weights, zero at own column)
        self.w = np.asarray(w, dtype=float)
        self.b = float(b)

    @property
    def d(self) -> int:
        return self.w.shape[0]

    def _fill_group(self, pattern: Pattern, vals: np.ndarray) -> np.ndarray:
        full = np.tile(self.column_means, (vals.shape[0], 1))
        obs = np.array(pattern.obs_indices(), dtype=int)
        if obs.size:
            full[:, obs] = vals
        for j in pattern.mis_indices():
            intercept, weights = self.coefs[j]
            full[:, j] = intercept + full @ weights
        return full

    def _predict_group(self, pattern: Pattern, vals: np.ndarray) -> np.ndarray:
        return _sign_pm1(self._fill_group(pattern, vals) @ self.w + self.b)


def ice_complete(ds: MaskedDataset, iters: int = 10, ridge: float = 1e-6):
    """Deterministic chained-equations completion.

    Missing entries start at observed column means; then for a fixed number
    of rounds each column is regressed (ridge least squares, intercept
    unpenalized) on all others over the rows observing it, and its missing
    entries are refilled with fitted values. No posterior draws are taken:
    this is a conditional-mean simplification of chained equations.

    Returns (completed matrix, column means, per-column frozen coefficients).
    """
    X, missing = ds.dense_observed()
    n, d = X.shape
    observed = ~missing
    means = np.array(
        [X[observed[:, j], j].mean() if observed[:, j].any() else 0.0 for j in range(d)]
    )
    filled = np.where(missing, means[None, :], X)
    coefs = [(float(means[j]), np.zeros(d)) for j in range(d)]
    for _ in range(max(iters, 0)):
        for j in range(d):
            rows = observed[:, j]
            if rows.sum() < 2:
                continue
            others = [c for c in range(d) if c != j]
            a = np.hstack([np.ones((int(rows.sum()), 1)), filled[np.ix_(np.nonzero(rows)[0], others)]])
            target = X[rows, j]
            gram = a.T @ a
            gram[1:, 1:] += ridge * np.eye(d - 1)
            theta = np.linalg.solve(gram, a.T @ target)
            weights = np.zeros(d)
            weights[others] = theta[1:]
            coefs[j] = (float(theta[0]), weights)
            mrows = missing[:, j]
            if mrows.any():
                filled[mrows, j] = theta[0] + filled[mrows] @ weights
    return filled, means, coefs


def _fit_linear_base(base: str, X: np.ndarray, labels: np.ndarray, **opts):
    """Train the base learner on a completed matrix; returns (w, b)."""
    if base == "logistic":
        fit = train_logistic(X, labels, **opts)
        return fit.beta, fit.beta0
    if base == "perceptron":
        fit = train_perceptron(X, labels, **opts)
        return fit.w, fit.b
    if base == "lda":
        pos = X[labels == 1]
        neg = X[labels == -1]
        if len(pos) == 0 or len(neg) == 0:
            return np.zeros(X.shape[1]), float(_majority_label(labels))
        mu_p, mu_n = pos.mean(axis=0), neg.mean(axis=0)
        centered = X.astype(float).copy()
        centered[labels == 1] -= mu_p
        centered[labels == -1] -= mu_n
        cov = (centered.T @ centered) / max(len(X) - 2, 1)
        try:
            w = SpdMatrix(cov).solve(mu_p - mu_n)
        except NotPdError:
            w = np.linalg.lstsq(cov, mu_p - mu_n, rcond=None)[0]
        b = -float(w @ ((mu_p + mu_n) / 2.0)) + math.log(len(pos) / len(neg))
        return w, b
    raise KeyError(f"unknown base learner {base!r}")


def impute_then_train(ds: MaskedDataset, imputer="zero", base: str = "logistic", **opts):
    """Materialize a completed matrix, train the base learner, freeze the filler.

    imputer: "zero", ("constant", alpha), "ice" or ("ice", iters).
    base: "logistic", "perceptron" or "lda"; extra options go to the trainer.
    """
    d = ds.d
    if imputer == "zero":
        imputer = ("constant", np.zeros(d))
    if imputer == "ice":
        imputer = ("ice", 10)
    kind = imputer[0]
    if kind == "constant":
        alpha = np.broadcast_to(np.asarray(imputer[1], dtype=float), (d,)).copy()
        X, missing = ds.dense_observed()
        completed = np.where(missing, alpha[None, :], X)
        w, b = _fit_linear_base(base, completed, ds.labels, **opts)
        return ImputedLinearClassifier(alpha, w, b)
    if kind == "ice":
        completed, means, coefs = ice_complete(ds, iters=imputer[1])
        w, b = _fit_linear_base(base, completed, ds.labels, **opts)
        return IceImputedClassifier(means, coefs, w, b)
    raise KeyError(f"unknown imputer {imputer!r}")


def optimal_imputation_constants(model: LdaModel) -> np.ndarray:
    """Midpoint constants (mu_pos + mu_neg) / 2, the optimal fill when the covariance is diagonal.

    For a non-diagonal covariance no constant fill recovers the optimal
    pattern-by-pattern rule; a note is emitted in that case and the midpoint
    is still returned.
    """
    if not model.balanced:
        raise ValueError("optimal constant imputation is defined for balanced models")
    off = model.sigma.entries - np.diag(np.diag(model.sigma.entries))
    if np.max(np.abs(off)) > 1e-12 * max(np.max(np.abs(model.sigma.entries)), 1e-300):
        warnings.warn(
            "covariance is not diagonal: constant imputation is not optimal "
            "for this model (midpoint constants returned anyway)",
            UserWarning,
            stacklevel=2,
        )
    return model.midpoint()


def population_imputed_lda(model: LdaModel) -> ImputedLinearClassifier:
    """Midpoint-imputation classifier at population parameters.

    Uses the complete-data direction w = Sigma^{-1} (mu_pos - mu_neg) with
    the midpoint fill; coincides with the optimal pattern-by-pattern rule
    exactly when the covariance is diagonal.
    """
    if not model.balanced:
        raise ValueError("defined for balanced models")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        alpha = optimal_imputation_constants(model)
    w = model.sigma.solve(model.mean_gap())
    return ImputedLinearClassifier(alpha, w, -float(w @ model.midpoint()))


# ---------------------------------------------------------------------------
# Numeric-integration oracle for logistic data (used as a Bayes reference)
# ---------------------------------------------------------------------------

GH_NODES_PER_DIM = 32
GH_MAX_DIMS = 3
QMC_LOG2_POINTS = 14
_QMC_SEED = 1315423911  # fixed: the oracle must be a deterministic function


class LogisticMaskedOracle(MaskedClassifier):
    """sign E[Y | X_obs, M] for logistic labels on Gaussian inputs.

    The expectation integrates the label posterior over the Gaussian
    conditional of the missing block: a tensor Gauss-Hermite grid (32 nodes
    per missing coordinate) up to 3 missing coordinates, a scrambled Sobol
    rule with 2^14 points beyond. Under self-masking MNAR the integrand is
    reweighted by the masking probability of the missing block; for MCAR
    mechanisms no weight is needed.
    """

    def __init__(self, model: LogisticModel, mechanism=None, row_chunk: int = 512):
        self.model = model
        self.row_chunk = int(row_chunk)
        if mechanism is None or isinstance(mechanism, Mcar):
            self.mask_intercepts = None
        elif isinstance(mechanism, SelfMaskMnar):
            self.mask_intercepts = mechanism.intercept_vector(model.d)
        else:
            raise TypeError(
                f"no oracle for mechanism {type(mechanism).__name__}; "
                "use MCAR-type or self-masking mechanisms"
            )

    def _nodes(self, k: int):
        if k <= GH_MAX_DIMS:
            nodes, weights = np.polynomial.hermite.hermgauss(GH_NODES_PER_DIM)
            grids = np.meshgrid(*([nodes] * k), indexing="ij")
            z = math.sqrt(2.0) * np.stack([g.ravel() for g in grids], axis=1)
            wgrids = np.meshgrid(*([weights] * k), indexing="ij")
            wts = np.ones(z.shape[0])
            for g in wgrids:
                wts *= g.ravel()
            wts /= math.pi ** (k / 2.0)
            return z, wts
        from scipy.special import ndtri
        from scipy.stats import qmc

        sampler = qmc.Sobol(d=k, scramble=True, seed=_QMC_SEED)
        u = sampler.random(2**QMC_LOG2_POINTS)
        z = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
        wts = np.full(z.shape[0], 1.0 / z.shape[0])
        return z, wts

    def _predict_group(self, pattern: Pattern, vals: np.ndarray) -> np.ndarray:
        beta = self.model.beta
        obs = np.array(pattern.obs_indices(), dtype=int)
        mis = np.array(pattern.mis_indices(), dtype=int)
        base = np.full(vals.shape[0], self.model.beta0)
        if obs.size:
            base = base + vals @ beta[obs]
        if mis.size == 0:
            return _sign_pm1(base)
        sigma = self.model.sigma_x.entries
        smm = sigma[np.ix_(mis, mis)]
        if obs.size:
            soo = sigma[np.ix_(obs, obs)]
            smo = sigma[np.ix_(mis, obs)]
            reg = np.linalg.solve(soo, smo.T).T
            mu_c = vals @ reg.T
            cond_cov = smm - reg @ smo.T
        else:
            mu_c = np.zeros((vals.shape[0], mis.size))
            cond_cov = smm
        cond_cov = (cond_cov + cond_cov.T) / 2.0
        try:
            lc = np.linalg.cholesky(cond_cov)
        except np.linalg.LinAlgError:
            vals_, vecs = np.linalg.eigh(cond_cov)
            lc = vecs @ np.diag(np.sqrt(np.maximum(vals_, 0.0)))
        z, wts = self._nodes(mis.size)
        offsets = z @ lc.T
        off_lin = offsets @ beta[mis]
        base = np.asarray(base, dtype=float)
        mu_lin = mu_c @ beta[mis]
        n = vals.shape[0]
        out = np.empty(n, dtype=np.int8)
        for start in range(0, n, self.row_chunk):
            stop = min(start + self.row_chunk, n)
            arg = (base[start:stop] + mu_lin[start:stop])[:, None] + off_lin[None, :]
            sval = np.tanh(arg / 2.0)  # 2 sigmoid(t) - 1
            if self.mask_intercepts is None:
                expect = sval @ wts
            else:
                g = np.ones_like(sval)
                for col, j in enumerate(mis):
                    g *= sigmoid(
                        self.mask_intercepts[j]
                        + mu_c[start:stop, col, None]
                        + offsets[None, :, col]
                    )
                num = (sval * g) @ wts
                den = g @ wts
                expect = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
            out[start:stop] = _sign_pm1(expect)
        return out


def logistic_oracle(model: LogisticModel, mechanism=None) -> LogisticMaskedOracle:
    return LogisticMaskedOracle(model, mechanism)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

CLASSIFIER_IDS = (
    "bayes-pbp-lda",
    "bayes-mnar",
    "lda-mcar",
    "pbp-lda",
    "pbp-lda-mnar",
    "pbp-logreg",
    "0imp-logreg",
    "ice-logreg",
    "pbp-perceptron",
    "0imp-perceptron",
    "ice-perceptron",
    "0imp-lda",
    "ice-lda",
    "opt-imp-lda",
)


@dataclass
class TrainContext:
    """Model knowledge available to classifier constructors.

    known_sigma feeds the known-covariance LDA variants (for logistic
    scenarios the input covariance plays that role); oracle ids require the
    corresponding model.
    """

    lda_model: LdaModel | None = None
    gpmm_model: GpmmModel | None = None
    known_sigma: SpdMatrix | None = None
    perceptron_epochs: int = 100
    logistic_opts: dict = field(default_factory=dict)
    mnar_tau: float | None = None

    def resolve_sigma(self) -> SpdMatrix | None:
        if self.known_sigma is not None:
            return self.known_sigma
        if self.lda_model is not None:
            return self.lda_model.sigma
        return None


def make_classifier(classifier_id: str, ds: MaskedDataset, ctx: TrainContext | None = None):
    """Build or train the classifier selected by its string id."""
    ctx = ctx or TrainContext()
    cid = classifier_id
    if cid == "bayes-pbp-lda":
        if ctx.lda_model is None:
            raise ValueError("bayes-pbp-lda requires the generating LdaModel")
        return bayes_pbp_lda(ctx.lda_model)
    if cid == "bayes-mnar":
        if ctx.gpmm_model is None:
            raise ValueError("bayes-mnar requires the generating GpmmModel")
        return bayes_mnar(ctx.gpmm_model)
    if cid == "lda-mcar":
        return train_lda_mcar(ds, sigma=ctx.resolve_sigma())
    if cid == "pbp-lda":
        return train_lda_patternwise(ds)
    if cid == "pbp-lda-mnar":
        sigma = ctx.resolve_sigma()
        if sigma is None:
            raise ValueError("pbp-lda-mnar requires a known covariance")
        return train_lda_mnar_thresholded(ds, sigma, tau=ctx.mnar_tau)
    if cid == "pbp-logreg":
        return train_pbp_logistic(ds, **ctx.logistic_opts)
    if cid == "pbp-perceptron":
        return train_pbp_perceptron(ds, max_epochs=ctx.perceptron_epochs)
    if cid.startswith(("0imp-", "ice-")):
        imputer = "zero" if cid.startswith("0imp-") else "ice"
        base = cid.split("-", 1)[1]
        base = {"logreg": "logistic"}.get(base, base)
        if base == "logistic":
            opts = dict(ctx.logistic_opts)
        elif base == "perceptron":
            opts = {"max_epochs": ctx.perceptron_epochs}
        else:
            opts = {}
        return impute_then_train(ds, imputer, base, **opts)
    if cid == "opt-imp-lda":
        if ctx.lda_model is None:
            raise ValueError("opt-imp-lda requires the generating LdaModel")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            alpha = optimal_imputation_constants(ctx.lda_model)
        return impute_then_train(ds, ("constant", alpha), "lda")
    raise KeyError(f"unknown classifier id {classifier_id!r}; known: {', '.join(CLASSIFIER_IDS)}")
