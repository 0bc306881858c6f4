"""Exit criteria on Zachary's karate club, one test per criterion (or sub-check).

Each test records a PASS/FAIL line shown in the terminal summary.
"""

import numpy as np
import pytest
from scipy import stats

import test_properties
from conftest import ACCEPTANCE_LINES
from graphsee.enf import (
    XiScore,
    classify,
    embed,
    fit_psi,
    fit_xi,
    misclassified,
    sbs_enf_replicates,
    trw_enf_replicates,
)
from graphsee.graph import Variant, eigensystem, normalized_laplacian
from graphsee.sampling import WalkConfig, run_sbs, run_trw, srs_inclusion_weights, stationary_distribution
from graphsee.see import combine_replicates, sbs_variance_approx
from graphsee.snle import SnleConfig, class_gap, rank_sweep, snle_expected, snle_full, snle_sample

SBS_REPLICATES = 10_000
VARIANCE_REPLICATES = 100_000
SNLE_REPLICATES = 10_000


def check(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  [{criterion}] {detail}")
    assert passed, detail


@pytest.fixture(scope="module")
def spectrum(karate):
    return eigensystem(normalized_laplacian(karate[0]))


@pytest.fixture(scope="module")
def sbs5(karate):
    g, y = karate
    return sbs_enf_replicates(g, y, 5, SBS_REPLICATES, rng_seed=20_000)


def test_c1_spectral(karate, spectrum):
    g, y = karate
    lam0 = spectrum.fiedler_value
    z0 = spectrum.fiedler_vector
    # orientation of the published layout: nodes 9 and 10 sit at +0.0528 and +0.0556
    if z0[8] < 0:
        z0 = -z0
    split = (z0 > 0.054).astype(int)
    errors = int(min(np.sum(split != y), np.sum(split != 1 - y)))
    passed = (
        abs(lam0 - 0.132) <= 5e-4
        and abs(z0[8] - 0.0528) <= 1e-3
        and abs(z0[9] - 0.0556) <= 1e-3
        and errors == 0
    )
    check(
        "1 spectral",
        passed,
        f"lambda0={lam0:.5f}, z0[9]={z0[8]:.4f}, z0[10]={z0[9]:.4f}, threshold split errors={errors}",
    )


def test_c2_enf_graph_fit(karate):
    xi0 = fit_xi(*karate)
    check("2 ENF xi0", abs(xi0 - 0.955) <= 0.01, f"xi0={xi0:.4f} with y in {{0,1}}, 1 = instructor's faction")


def test_c3_classifier(karate):
    g, y = karate
    x = embed(g, y, fit_xi(g, y))
    pl, pt = fit_psi(x, y, "logistic"), fit_psi(x, y, "tanh")
    ok_l = np.all(np.abs(pl - [-4.631, 15.747]) <= 0.01 * np.abs([-4.631, 15.747]))
    ok_t = np.all(np.abs(pt - [-2.315, 7.874]) <= 0.01 * np.abs([-2.315, 7.874]))
    half = np.abs(pt - pl / 2).max()
    missed = misclassified(classify(x, pl, "logistic"), y)
    check(
        "3 classifier",
        bool(ok_l and ok_t and half <= 1e-6 and missed == (2, 2)),
        f"logistic psi0={np.round(pl, 3).tolist()}, tanh psi0={np.round(pt, 3).tolist()}, "
        f"|tanh - logistic/2|={half:.1e}, misclassified (ones, zeros)={missed}",
    )


def test_c4_sbs_score_unbiased(sbs5):
    rs = combine_replicates(sbs5.score_at_xi0)
    mean, se = rs.combined[0], rs.standard_errors()[0]
    check("4a SBS score", abs(mean) <= 3 * se, f"mean weighted score at xi0={mean:.4f}, 3 SE={3 * se:.4f}")


def test_c4_sbs_xi_hat_unbiased(karate, sbs5):
    xi0 = fit_xi(*karate)
    rs = combine_replicates(sbs5.xi_hat[~np.isnan(sbs5.xi_hat)])
    mean, se = rs.combined[0], rs.standard_errors()[0]
    check(
        "4b SBS xi_hat",
        abs(mean - xi0) <= 3 * se,
        f"mean xi_hat={mean:.4f} vs xi0={xi0:.4f}, 3 SE={3 * se:.4f} ({sbs5.xi_failures} undefined replicates)",
    )


def test_c4_trw_unbiased(karate):
    # 10^4 extracted states in 20 independent walks; the walks give independent replicates
    g, y = karate
    xi0 = fit_xi(g, y)
    reps = trw_enf_replicates(g, y, WalkConfig(r=2, n_states=500, rng_seed=30_000), walks=20)
    score = combine_replicates(reps.score_at_xi0)
    xi = combine_replicates(reps.xi_hat)
    s_mean, s_se = score.combined[0], score.standard_errors()[0]
    x_mean, x_se = xi.combined[0], xi.standard_errors()[0]
    check(
        "4c TRW",
        abs(s_mean) <= 3 * s_se and abs(x_mean - xi0) <= 3 * x_se,
        f"mean score={s_mean:.2e} (3 SE {3 * s_se:.2e}); combined xi_hat={x_mean:.4f} (3 SE {3 * x_se:.4f})",
    )


def test_c5_trw_stationarity(karate):
    g = karate[0]
    tr = run_trw(g, WalkConfig(r=2, n_states=100_000, rng_seed=50_000), start=0)
    expected = stationary_distribution(g, 2) * 100_000
    result = stats.chisquare(tr.visit_counts, expected)
    check("5 TRW stationarity", result.pvalue > 1e-3, f"chi2={result.statistic:.1f}, p={result.pvalue:.3f}")


def test_c6_snle_full(karate, spectrum):
    g, y = karate
    x0 = snle_full(g, y, SnleConfig(0.1, 0.0, Variant.PLAIN))
    corr = abs(np.corrcoef(x0, spectrum.fiedler_vector)[0, 1])
    ranks = {
        gamma: [r.rank for r in rank_sweep(g, y, [0.1, 0.15], gamma, Variant.PLAIN, spectrum)]
        for gamma in (1e-3, 1e-4)
    }
    passed = corr > 0.99 and all(r == [33, 33] for r in ranks.values())
    check("6 SNLE full", passed, f"|corr(x0, z0)|={corr:.5f}; ranks at lambda 0.1, 0.15: {ranks}")


def test_c7_snle_sample(karate):
    g, y = karate
    census = max(
        np.abs(
            snle_sample(g, run_sbs(g, range(34), 1), y, srs_inclusion_weights(g, 34), SnleConfig(0.1, gamma, v))
            - snle_full(g, y, SnleConfig(0.1, gamma, v))
        ).max()
        for gamma in (0.1, 1.0)
        for v in Variant
    )
    details = [f"census max diff={census:.1e}"]
    passed = census <= 1e-10
    for gamma in (0.1, 1.0):
        cfg = SnleConfig(0.1, gamma, Variant.LOOPED)
        ee = snle_expected(g, y, cfg, 1, SNLE_REPLICATES, rng_seed=70_000)
        gap_e = class_gap(ee.mean, y) if ee.missing.size == 0 else -np.inf
        gap_0 = class_gap(snle_full(g, y, cfg), y)
        passed &= gap_e > 0 and gap_e >= gap_0
        details.append(f"gamma={gamma}: gap E(x_hat)={gap_e:.4f} vs gap x0={gap_0:.4f}")
    check("7 SNLE sample", bool(passed), "; ".join(details))


def test_c8_combine_replicates():
    two = combine_replicates([0.0, 2.0])
    three = combine_replicates([1.0, 2.0, 6.0])
    passed = (
        two.combined[0] == 1.0
        and two.variance[0, 0] == 1.0
        and three.combined[0] == 3.0
        and three.variance[0, 0] == 14 / 6
    )
    check("8a combine", passed, f"{{0,2}} -> {two.variance[0, 0]}, {{1,2,6}} -> {three.variance[0, 0]:.6f}")


def test_c8_sandwich_variance(karate):
    g, y = karate
    xi0 = fit_xi(g, y)
    approx = sbs_variance_approx(srs_inclusion_weights(g, 5), XiScore(g, y), xi0)[0, 0]
    reps = sbs_enf_replicates(g, y, 5, VARIANCE_REPLICATES, rng_seed=80_000)
    empirical = np.nanvar(reps.xi_hat, ddof=1)
    rel = abs(approx - empirical) / empirical
    check(
        "8b sandwich",
        rel <= 0.10,
        f"linearised variance={approx:.4f}, Monte Carlo variance={empirical:.4f}, rel diff={rel:.1%}",
    )


def test_c9_property_suite():
    properties = [getattr(test_properties, n) for n in dir(test_properties) if n.startswith("test_")]
    failed = []
    for prop in properties:
        try:
            prop()
        except Exception as exc:  # noqa: BLE001
            failed.append(f"{prop.__name__}: {type(exc).__name__}")
    check("9 properties", not failed, f"{len(properties) - len(failed)}/{len(properties)} properties hold on 100 graphs each" + (f"; {failed}" if failed else ""))
