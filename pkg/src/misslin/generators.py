"""Synthetic data generators for every distributional setting in the package.

Covers Gaussian class-conditional (LDA) data, logistic-model labels,
per-pattern Gaussian mixtures with informative missingness, two-ball
geometries for separability experiments, and the named model presets used
by the simulation harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_math import Pattern, SpdMatrix, make_rng, sigmoid
from .missingness import MaskedDataset


@dataclass(frozen=True)
class LdaModel:
    """Gaussian class conditionals with shared covariance and class-1 prior pi_pos."""

    mu_pos: np.ndarray
    mu_neg: np.ndarray
    sigma: SpdMatrix
    pi_pos: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "mu_pos", np.asarray(self.mu_pos, dtype=float))
        object.__setattr__(self, "mu_neg", np.asarray(self.mu_neg, dtype=float))
        d = self.sigma.dim
        if self.mu_pos.shape != (d,) or self.mu_neg.shape != (d,):
            raise ValueError("class means must match the covariance dimension")
        if not 0.0 < self.pi_pos < 1.0:
            raise ValueError(f"pi_pos must lie strictly in (0, 1), got {self.pi_pos}")

    @property
    def d(self) -> int:
        return self.sigma.dim

    @property
    def pi_neg(self) -> float:
        return 1.0 - self.pi_pos

    @property
    def balanced(self) -> bool:
        return self.pi_pos == 0.5

    def mean_gap(self) -> np.ndarray:
        return self.mu_pos - self.mu_neg

    def midpoint(self) -> np.ndarray:
        return (self.mu_pos + self.mu_neg) / 2.0


@dataclass(frozen=True)
class LogisticModel:
    """P(Y=1|X) = sigmoid(beta0 + beta.X) with X ~ N(0, sigma_x)."""

    beta0: float
    beta: np.ndarray
    sigma_x: SpdMatrix

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        if self.beta.shape != (self.sigma_x.dim,):
            raise ValueError("beta must match the covariance dimension")
        if not np.all(np.isfinite(self.beta)) or not math.isfinite(self.beta0):
            raise ValueError("coefficients must be finite")

    @property
    def d(self) -> int:
        return self.sigma_x.dim


@dataclass(frozen=True)
class GpmmComponent:
    """Per-pattern Gaussian parameters over the observed coordinates."""

    mu_pos: np.ndarray
    mu_neg: np.ndarray
    sigma: SpdMatrix
    pi_pos: float
    pi_neg: float

    def __post_init__(self):
        object.__setattr__(self, "mu_pos", np.asarray(self.mu_pos, dtype=float))
        object.__setattr__(self, "mu_neg", np.asarray(self.mu_neg, dtype=float))
        k = self.sigma.dim
        if self.mu_pos.shape != (k,) or self.mu_neg.shape != (k,):
            raise ValueError("component means must match the component covariance")
        if self.pi_pos < 0 or self.pi_neg < 0:
            raise ValueError("joint pattern/class probabilities must be nonnegative")

    @property
    def p_m(self) -> float:
        return self.pi_pos + self.pi_neg


class GpmmModel:
    """Per-pattern Gaussian mixture; zero-probability patterns are simply absent."""

    def __init__(self, d: int, components: dict[Pattern, GpmmComponent]):
        self.d = int(d)
        comps = {}
        for p, comp in components.items():
            if p.dim != d:
                raise ValueError(f"pattern {p} has dim {p.dim}, expected {d}")
            if p.n_observed != comp.sigma.dim:
                raise ValueError(
                    f"pattern {p} observes {p.n_observed} coordinates but the "
                    f"component covariance has dim {comp.sigma.dim}"
                )
            if comp.p_m > 0:
                comps[p] = comp
        total = sum(c.p_m for c in comps.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"pattern/class probabilities sum to {total}, expected 1")
        self.components = comps

    @property
    def pattern_balanced(self) -> bool:
        return all(abs(c.pi_pos - c.pi_neg) <= 1e-12 for c in self.components.values())

    def p_m(self, pattern: Pattern) -> float:
        comp = self.components.get(pattern)
        return comp.p_m if comp is not None else 0.0


@dataclass(frozen=True)
class BallConfig:
    """Two ell^p balls with fixed centroids and uniformly drawn radii.

    radius_mode 'uniform-paired' draws R1, R2 iid U(0, ||c1-c2||_2 / 2);
    'uniform-equal' draws a single R ~ U(0, ||c1-c2||_p / 2) shared by both.
    """

    c1: np.ndarray
    c2: np.ndarray
    norm_p: float = 2
    radius_mode: str = "uniform-paired"

    def __post_init__(self):
        object.__setattr__(self, "c1", np.asarray(self.c1, dtype=float))
        object.__setattr__(self, "c2", np.asarray(self.c2, dtype=float))
        if self.c1.shape != self.c2.shape or self.c1.ndim != 1:
            raise ValueError("centroids must be vectors of equal length")
        if np.array_equal(self.c1, self.c2):
            raise ValueError("centroids must differ")
        if self.radius_mode not in ("uniform-paired", "uniform-equal"):
            raise ValueError(f"unknown radius_mode {self.radius_mode!r}")
        if not (self.norm_p == math.inf or self.norm_p >= 1):
            raise ValueError("norm order must be >= 1 or inf")


def sample_lda(model: LdaModel, n: int, rng: np.random.Generator):
    """Draw (X, Y) with Y in {-1,+1} and X | Y ~ N(mu_Y, Sigma) via the Cholesky factor."""
    if n < 1:
        raise ValueError("n must be >= 1")
    y = np.where(rng.random(n) < model.pi_pos, 1, -1).astype(np.int8)
    z = rng.standard_normal((n, model.d))
    x = z @ model.sigma.cholesky().T
    x += np.where(y[:, None] == 1, model.mu_pos[None, :], model.mu_neg[None, :])
    return x, y


def sample_logistic(model: LogisticModel, n: int, rng: np.random.Generator):
    """Draw X ~ N(0, Sigma_x) and Y from the logistic conditional."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z = rng.standard_normal((n, model.d))
    x = z @ model.sigma_x.cholesky().T
    p = sigmoid(model.beta0 + x @ model.beta)
    y = np.where(rng.random(n) < p, 1, -1).astype(np.int8)
    return x, y


def sample_gpmm(model: GpmmModel, n: int, rng: np.random.Generator) -> MaskedDataset:
    """Draw (pattern, class) from the joint probabilities, then the observed coordinates."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cells = []
    probs = []
    for p, comp in model.components.items():
        cells.append((p, 1, comp))
        probs.append(comp.pi_pos)
        cells.append((p, -1, comp))
        probs.append(comp.pi_neg)
    probs = np.asarray(probs)
    probs = probs / probs.sum()
    assignment = rng.choice(len(cells), size=n, p=probs)
    X = np.zeros((n, model.d))
    missing = np.zeros((n, model.d), dtype=bool)
    y = np.empty(n, dtype=np.int8)
    for c, (p, label, comp) in enumerate(cells):
        idx = np.nonzero(assignment == c)[0]
        if idx.size == 0:
            continue
        y[idx] = label
        mis = np.array(p.mis_indices(), dtype=int)
        if mis.size:
            missing[np.ix_(idx, mis)] = True
        obs = np.array(p.obs_indices(), dtype=int)
        if obs.size:
            mu = comp.mu_pos if label == 1 else comp.mu_neg
            z = rng.standard_normal((idx.size, obs.size))
            X[np.ix_(idx, obs)] = mu[None, :] + z @ comp.sigma.cholesky().T
    return MaskedDataset.from_dense(X, missing, y)


def _sample_in_ball(center: np.ndarray, radius: float, p, n: int, rng: np.random.Generator):
    """Uniform draws in an ell^p ball by rejection from the bounding hypercube.

    Acceptance decays quickly with dimension for small p (about 0.25% for the
    Euclidean ball at d=10), which is still fine at the experiment scales
    used here; callers wanting high-dimensional balls should sample smarter.
    """
    d = center.shape[0]
    out = np.empty((n, d))
    got = 0
    while got < n:
        block = max(n - got, 64) * 4
        cand = rng.uniform(-radius, radius, size=(block, d))
        norms = np.linalg.norm(cand, ord=p, axis=1) if d > 1 else np.abs(cand[:, 0])
        keep = cand[norms <= radius]
        take = min(len(keep), n - got)
        out[got : got + take] = keep[:take]
        got += take
    return out + center[None, :]


@dataclass(frozen=True)
class TwoBallSample:
    X: np.ndarray
    y: np.ndarray
    r1: float
    r2: float


def sample_two_balls(cfg: BallConfig, n_per_class: int, rng: np.random.Generator) -> TwoBallSample:
    """Label +1 points uniform in ball 1, label -1 points uniform in ball 2."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if cfg.radius_mode == "uniform-paired":
        half = np.linalg.norm(cfg.c1 - cfg.c2) / 2.0
        r1, r2 = rng.uniform(0.0, half, size=2)
    else:
        half = np.linalg.norm(cfg.c1 - cfg.c2, ord=cfg.norm_p) / 2.0
        r1 = r2 = float(rng.uniform(0.0, half))
    x1 = _sample_in_ball(cfg.c1, r1, cfg.norm_p, n_per_class, rng)
    x2 = _sample_in_ball(cfg.c2, r2, cfg.norm_p, n_per_class, rng)
    X = np.vstack([x1, x2])
    y = np.concatenate([np.ones(n_per_class, dtype=np.int8), -np.ones(n_per_class, dtype=np.int8)])
    return TwoBallSample(X, y, float(r1), float(r2))


@dataclass(frozen=True)
class CounterexampleData:
    """Two points differing in a single coordinate that is masked for both.

    The complete points are linearly separable; the masked inputs coincide
    while carrying opposite labels, so no per-pattern separator exists.
    """

    X: np.ndarray
    y: np.ndarray
    masked: MaskedDataset
    pattern: Pattern


def perceptron_counterexample() -> CounterexampleData:
    X = np.array([[1.0, 1.0], [1.0, -1.0]])
    y = np.array([1, -1], dtype=np.int8)
    missing = np.array([[False, True], [False, True]])
    masked = MaskedDataset.from_dense(X, missing, y)
    return CounterexampleData(X, y, masked, Pattern.from_indicators([0, 1]))


# ---------------------------------------------------------------------------
# Named model presets (CLI: --preset fig1-lda / fig1-logistic)
# ---------------------------------------------------------------------------

PRESET_NAMES = ("fig1-lda", "fig1-logistic")


def lda_preset(d: int, sigma: SpdMatrix, model_seed: int) -> LdaModel:
    """Balanced Gaussian model with mu_neg ~ N(0, 25 I) and mu_pos = mu_neg + 1.5 * Rademacher."""
    rng = make_rng(model_seed)
    mu0 = 5.0 * rng.standard_normal(d)
    eps = np.where(rng.random(d) < 0.5, 1.0, -1.0)
    return LdaModel(mu_pos=mu0 + 1.5 * eps, mu_neg=mu0, sigma=sigma, pi_pos=0.5)


def logistic_preset(d: int, sigma: SpdMatrix, model_seed: int) -> LogisticModel:
    """Standard-normal coefficient vector; the intercept is fixed at zero."""
    rng = make_rng(model_seed)
    return LogisticModel(beta0=0.0, beta=rng.standard_normal(d), sigma_x=sigma)


def make_model_preset(name: str, d: int, sigma: SpdMatrix, model_seed: int):
    if name == "fig1-lda":
        return lda_preset(d, sigma, model_seed)
    if name == "fig1-logistic":
        return logistic_preset(d, sigma, model_seed)
    raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")


def _gauss_hermite_mean(f, mean: float, std: float, n_nodes: int = 64) -> float:
    """E[f(Z)] for Z ~ N(mean, std^2) by Gauss-Hermite quadrature."""
    nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
    z = mean + math.sqrt(2.0) * std * nodes
    return float(weights @ f(z) / math.sqrt(math.pi))


def marginal_missing_rate(intercept: float, means: np.ndarray, var: float, mix: np.ndarray) -> float:
    """P(coordinate masked) under self-masking for a Gaussian-mixture marginal."""
    std = math.sqrt(var)
    return float(
        sum(
            w * _gauss_hermite_mean(lambda z: sigmoid(intercept + z), m, std)
            for m, w in zip(means, mix)
        )
    )


def calibrate_selfmask_intercept(
    target_eta: float, means: np.ndarray, var: float, mix: np.ndarray
) -> float:
    """Intercept b with E[sigmoid(b + X_j)] = target_eta, found by bisection.

    The displayed self-masking form has no intercept; this optional
    calibration is our own addition for matching a requested marginal rate.
    """
    if not 0.0 < target_eta < 1.0:
        raise ValueError("target rate must lie strictly in (0, 1)")
    lo, hi = -60.0, 60.0
    for _ in range(200):
        mid = (lo + hi) / 2.0
        if marginal_missing_rate(mid, means, var, mix) < target_eta:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def calibrated_selfmask_intercepts(model, target_eta: float) -> np.ndarray:
    """Per-coordinate intercepts matching the target marginal missing rate.

    For an LdaModel the marginal of X_j is an equal-variance two-component
    mixture; for a LogisticModel it is a centered Gaussian.
    """
    if isinstance(model, LdaModel):
        d = model.d
        out = np.empty(d)
        for j in range(d):
            out[j] = calibrate_selfmask_intercept(
                target_eta,
                np.array([model.mu_pos[j], model.mu_neg[j]]),
                float(model.sigma.entries[j, j]),
                np.array([model.pi_pos, model.pi_neg]),
            )
        return out
    if isinstance(model, LogisticModel):
        d = model.d
        out = np.empty(d)
        for j in range(d):
            out[j] = calibrate_selfmask_intercept(
                target_eta,
                np.array([0.0]),
                float(model.sigma_x.entries[j, j]),
                np.array([1.0]),
            )
        return out
    raise TypeError(f"unsupported model type {type(model)!r}")
