"""Acceptance suite.

One test per acceptance criterion, each asserting the criterion at its
stated tolerance and printing a single pass/fail line (run with `pytest
tests/test_acceptance.py -v -s` to see the lines as they happen).

The separability sandwich criterion is known to be unattainable as stated:
the claimed sqrt(alpha) upper bound is contradicted by exact enumeration
(see notes in the README and the test body). That test runs the criterion
faithfully and is expected to fail; everything else passes.
"""

import math
import time

import numpy as np
from scipy.stats import skew

from misslin.classifiers import (
    bayes_pbp_lda,
    population_imputed_lda,
    train_logistic,
    train_perceptron,
)
from misslin.core_math import (
    Pattern,
    SpdMatrix,
    identity_spd,
    make_rng,
    toeplitz_correlation,
)
from misslin.experiment import (
    BUILTIN_GRIDS,
    SeparabilityGrid,
    load_config,
    run_bounds_sweep,
    run_experiment,
    run_separability_sweep,
)
from misslin.generators import (
    LdaModel,
    LogisticModel,
    perceptron_counterexample,
    sample_lda,
    sample_logistic,
)
from misslin.missingness import MarExample, Mcar, apply_mechanism
from misslin.risk_oracles import (
    bayes_risk_missing_mcar,
    exact_bias,
    masked_lda_source,
    monte_carlo_risk,
)
from misslin.separability import mc_asymptotic_check, separability_bounds

SEED = 20240


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def symmetric_model(d: int, half_gap: float = 1.0, sigma=None) -> LdaModel:
    return LdaModel(half_gap * np.ones(d), -half_gap * np.ones(d), sigma or identity_spd(d))


def test_closed_form_vs_simulation():
    # d=3, identity covariance, unit means, eta=0.5: exact enumeration vs a
    # million-draw Monte Carlo of the optimal pattern-wise rule
    started = time.perf_counter()
    model = symmetric_model(3)
    exact = bayes_risk_missing_mcar(model, 0.5)
    rep = monte_carlo_risk(
        bayes_pbp_lda(model),
        masked_lda_source(model, Mcar(0.5)),
        1_000_000,
        seed=SEED,
        bayes_risk=exact,
    )
    elapsed = time.perf_counter() - started
    ok = abs(rep.excess) <= 3 * rep.ci_halfwidth and elapsed < 30.0
    report(
        "closed-form vs simulation",
        ok,
        f"exact={exact:.6f} mc={rep.risk_estimate:.6f} "
        f"|diff|={abs(rep.excess):.2e} 3ci={3 * rep.ci_halfwidth:.2e} "
        f"elapsed={elapsed:.1f}s (<30s)",
    )


def test_bias_bound_full_grid():
    # exact masking bias <= closed-form bound across the full documented
    # grid; zero Monte Carlo noise (pure enumeration)
    started = time.perf_counter()
    rows, _ = run_bounds_sweep(BUILTIN_GRIDS["bias-default"])
    elapsed = time.perf_counter() - started
    violations = [r for r in rows if r["pass"] != "true"]
    min_slack = min(r["slack"] for r in rows)
    ok = not violations and elapsed < 10.0
    report(
        "bias bound on the full grid",
        ok,
        f"{len(rows)} grid points, violations={len(violations)}, "
        f"min slack={min_slack:.3e}, elapsed={elapsed:.1f}s (<10s)",
    )


def test_bias_limit_at_high_snr():
    # Sigma = I, d=4, eta=0.5: the exact bias approaches eta^d / 2 from
    # above, monotonically in the gap magnitude
    target = 0.5**4 / 2
    dists = []
    for mu in (2.0, 4.0, 8.0, 16.0):
        model = symmetric_model(4, half_gap=mu / 2)
        dists.append(abs(exact_bias(model, 0.5) - target))
    monotone = all(a > b for a, b in zip(dists, dists[1:]))
    ok = monotone and dists[-1] <= 1e-6
    report(
        "bias limit at high signal-to-noise",
        ok,
        f"distances to {target}: " + " ".join(f"{v:.2e}" for v in dists) + " (monotone, last <= 1e-6)",
    )


def test_estimation_bound_holds():
    # pooled-mean plug-in LDA with known covariance: 50 replicates x 1e5
    # test draws per n; empirical excess below the bound, decreasing in n
    started = time.perf_counter()
    rows, _ = run_bounds_sweep(BUILTIN_GRIDS["estimation-default"])
    elapsed = time.perf_counter() - started
    by_n = {r["n"]: r for r in rows}
    strict = all(r["empirical_excess"] <= r["bound"] for r in rows)
    consistent = by_n[2000]["empirical_excess"] < by_n[200]["empirical_excess"]
    ok = strict and consistent and elapsed < 300.0
    report(
        "estimation bound",
        ok,
        " ".join(
            f"n={n}: excess={by_n[n]['empirical_excess']:.4f}<=bound={by_n[n]['bound']:.4f}"
            for n in sorted(by_n)
        )
        + f", consistency={consistent}, elapsed={elapsed:.0f}s (<5min)",
    )


def test_separability_sandwich():
    # Criterion as stated: 20 random configurations, the Monte Carlo
    # estimate within [alpha - 3ci, sqrt(alpha) + 3ci]. The sqrt(alpha)
    # upper bound is provably false under the stated radius law
    # U(0, ||c1-c2||/2): exact enumeration at d=5, eta=0.5, unit gaps gives
    # P = 0.755332... > sqrt(0.5) = 0.707107. Run faithfully; expected to
    # fail on the upper side (the alpha lower bound always holds).
    lo, hi = separability_bounds(np.zeros(4), np.ones(4), 0.35)
    bounds_exact = lo == 1 - 0.35 and hi == math.sqrt(1 - 0.35)
    rows, _ = run_separability_sweep(SeparabilityGrid(count=20, reps=200_000, seed=SEED))
    lower_fail = [r["config"] for r in rows if r["lower_ok"] != "true"]
    upper_fail = [r["config"] for r in rows if r["upper_ok"] != "true"]
    ok = bounds_exact and not lower_fail and not upper_fail
    report(
        "separability sandwich",
        ok,
        f"constant-eta bounds exact={bounds_exact}; lower violations={lower_fail}; "
        f"upper violations={upper_fail} of 20 "
        "(upper bound is unattainable as stated: exact enumeration gives "
        "P=0.755332 > sqrt(alpha)=0.707107 at d=5, eta=0.5, unit gaps; see ledger)",
    )


def test_asymptotic_separability_limit():
    started = time.perf_counter()
    est, _, limit = mc_asymptotic_check(2000, 1000, 2, "gaussian", 100_000, make_rng(SEED))
    elapsed = time.perf_counter() - started
    ok = abs(est - limit) <= 0.02 and elapsed < 120.0
    report(
        "asymptotic separability limit",
        ok,
        f"estimate={est:.4f} limit={limit:.4f} |diff|={abs(est - limit):.4f} (<=0.02), "
        f"elapsed={elapsed:.0f}s (<2min)",
    )


def test_imputation_optimality_both_directions():
    # diagonal covariance: the midpoint-fill rule at population parameters
    # agrees with the optimal pattern-wise rule on every draw; a Toeplitz
    # covariance yields a concrete disagreement region
    diag_model = LdaModel(
        np.array([3.0, 1.0, -1.0]),
        np.array([1.0, 1.0, 2.0]),
        SpdMatrix(np.diag([1.0, 0.5, 2.0])),
    )
    rng = make_rng(SEED)
    X, y = sample_lda(diag_model, 100_000, rng)
    ds = apply_mechanism(X, y, Mcar(0.5), rng)
    imputed = population_imputed_lda(diag_model)
    bayes = bayes_pbp_lda(diag_model)
    disagreements = int(np.sum(imputed.predict(ds) != bayes.predict(ds)))

    toe_model = symmetric_model(3, half_gap=0.5, sigma=toeplitz_correlation(3, 0.6))
    imp_t = population_imputed_lda(toe_model)
    bay_t = bayes_pbp_lda(toe_model)
    found = None
    grid = np.linspace(-4.0, 4.0, 81)
    for bits in range(7):
        p = Pattern(bits, 3)
        k = p.n_observed
        pts = np.array(np.meshgrid(*([grid] * k))).reshape(k, -1).T
        diff = imp_t._predict_group(p, pts) != bay_t._predict_group(p, pts)
        if np.any(diff):
            found = (p, pts[np.argmax(diff)])
            break
    ok = disagreements == 0 and found is not None
    detail = f"diagonal: {disagreements} disagreements in 100000 draws; "
    if found is not None:
        detail += f"toeplitz: rules differ at pattern={found[0]} x_obs={np.round(found[1], 2)}"
    else:
        detail += "toeplitz: no disagreement found (unexpected)"
    report("constant imputation optimal iff diagonal covariance", ok, detail)


def test_logistic_misspecification():
    # coordinates independent, both true slopes 3; the fitted slope on the
    # one-observed-coordinate pattern sits many standard errors from 3 and
    # does not move toward 3 when the sample doubles
    model = LogisticModel(0.0, np.array([3.0, 3.0]), identity_spd(2))
    target = Pattern.from_indicators([0, 1])
    slopes, ses = [], []
    for i, n in enumerate((1_000_000, 2_000_000)):
        rng = make_rng(SEED + i)
        X, y = sample_logistic(model, n, rng)
        ds = apply_mechanism(X, y, Mcar(0.5), rng)
        for pattern, _, vals, labels in ds.group_items():
            if pattern == target:
                fit = train_logistic(vals, labels)
                slopes.append(fit.beta[0])
                ses.append(fit.standard_errors[1])
    dev = [abs(s - 3.0) for s in slopes]
    ok = dev[0] > 5 * ses[0] and dev[1] > 5 * ses[1] and dev[1] >= 0.9 * dev[0]
    report(
        "pattern-wise logistic misspecification",
        ok,
        f"slope(n=1e6)={slopes[0]:.4f} (dev {dev[0]:.3f} = {dev[0] / ses[0]:.0f} se), "
        f"slope(n=2e6)={slopes[1]:.4f} (dev {dev[1]:.3f} = {dev[1] / ses[1]:.0f} se); "
        "bias does not vanish",
    )


def test_two_point_counterexample():
    data = perceptron_counterexample()
    complete = train_perceptron(data.X, data.y, max_epochs=1000)
    masked_rows = [(vals, label) for _, vals, label in data.masked.rows()]
    masked_X = np.array([v for v, _ in masked_rows])
    masked_y = np.array([c for _, c in masked_rows])
    masked = train_perceptron(masked_X, masked_y, max_epochs=1000)
    ok = complete.converged and not masked.converged
    report(
        "two-point counterexample",
        ok,
        f"complete converged={complete.converged} "
        f"(updates={complete.n_updates}); masked converged={masked.converged} "
        f"after {masked.epochs_run} epochs",
    )


def test_mar_breaks_gaussianity():
    model = symmetric_model(2, half_gap=0.5)
    rng = make_rng(SEED)
    X, y = sample_lda(model, 10_000, rng)
    ds = apply_mechanism(X, y, MarExample(), rng)
    target = Pattern.from_indicators([0, 1])
    stats = None
    for pattern, idx, vals, _ in ds.group_items():
        if pattern == target:
            stats = (len(idx), float(vals[:, 0].min()), float(skew(vals[:, 0])))
    ok = stats is not None and stats[1] > 0.0 and stats[2] > 0.5
    report(
        "conditioning on the observed-driven pattern truncates the marginal",
        ok,
        f"rows={stats[0]}, min x1={stats[1]:.2e} (>0 exact), skewness={stats[2]:.3f} (>0.5)",
    )


def test_simulation_qualitative_shape():
    # full default run: every trainable classifier improves from n=100 to
    # n=1e4 on average, and pooled-mean LDA beats pattern-wise LDA at n=100
    started = time.perf_counter()
    cfg = load_config("fig1-lda-mcar")
    rows = run_experiment(cfg)
    elapsed = time.perf_counter() - started
    assert all(r.error == "" for r in rows)
    mean_excess = {}
    for cid in cfg.classifiers:
        for n in (cfg.n_grid[0], cfg.n_grid[-1]):
            vals = [r.excess for r in rows if r.classifier == cid and r.n_train == n]
            assert len(vals) == cfg.replicates
            mean_excess[(cid, n)] = float(np.mean(vals))
    not_improving = [
        cid
        for cid in cfg.classifiers
        if not mean_excess[(cid, cfg.n_grid[0])] > mean_excess[(cid, cfg.n_grid[-1])]
    ]
    pooled_beats_patternwise = (
        mean_excess[("lda-mcar", 100)] < mean_excess[("pbp-lda", 100)]
    )
    ok = not not_improving and pooled_beats_patternwise and elapsed < 1200.0
    report(
        "simulation qualitative shape",
        ok,
        f"non-improving classifiers={not_improving or 'none'}; "
        f"lda-mcar@100={mean_excess[('lda-mcar', 100)]:.4f} < "
        f"pbp-lda@100={mean_excess[('pbp-lda', 100)]:.4f}: {pooled_beats_patternwise}; "
        f"elapsed={elapsed:.0f}s (<20min)",
    )


def test_command_determinism(tmp_path):
    from misslin.cli import main

    args = [
        "simulate", "--config", "fig1-lda-mcar", "--no-timing", "--seed", str(SEED),
        "--set", "replicates=2", "--set", "n_grid=100,300", "--set", "n_test=2000",
        "--set", "classifiers=lda-mcar,pbp-lda,0imp-logreg,ice-perceptron",
    ]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    ok = a.read_bytes() == b.read_bytes()
    report(
        "determinism",
        ok,
        f"two runs of the simulate command, equal seeds: byte-identical={ok} "
        f"({len(a.read_bytes())} bytes)",
    )
