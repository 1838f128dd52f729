import json
import math
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aflbt import _kernels
from aflbt.btcore import (
    ColumnMismatch,
    Design,
    DimensionMismatch,
    DisconnectedComparisonGraph,
    EmptyDesign,
    FitResult,
    InvalidSE,
    SingularInformation,
    aic,
    fit_contest,
    fit_covariate,
    fit_logistic,
    fit_standard,
    log_likelihood,
    predict_game,
    predict_prob,
    score,
    wald_inference,
    wald_pvalues,
)
from aflbt.synth import finite_difference_gradient, random_pair_counts


def one_col(X, y, w=None):
    X = np.asarray(X, dtype=float).reshape(len(y), -1)
    return Design(tuple(f"x{j}" for j in range(X.shape[1])), X, np.asarray(y, dtype=float), w)


def _fit(columns, beta, ll=-10.0):
    beta = np.asarray(beta, dtype=float)
    return FitResult(tuple(columns), beta, np.ones_like(beta), ll, 2 * len(beta) - 2 * ll, 5, True, False)


def test_loglik_at_zero():
    d = one_col(np.ones(7), [1, 0, 1, 1, 0, 0, 1])
    assert log_likelihood([0.0], d) == pytest.approx(7 * math.log(0.5), abs=1e-12)


def test_loglik_single_row():
    assert log_likelihood([math.log(3)], one_col([1.0], [1])) == pytest.approx(math.log(0.75), abs=1e-12)


def test_loglik_matches_naive_oracle():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(15, 3))
    y = (rng.random(15) < 0.5).astype(float)
    w = rng.integers(1, 4, 15).astype(float)
    beta = rng.normal(size=3)
    naive = 0.0
    for xi, yi, wi in zip(X, y, w):
        p = 1 / (1 + math.exp(-float(xi @ beta)))
        naive += wi * (yi * math.log(p) + (1 - yi) * math.log(1 - p))
    assert log_likelihood(beta, Design(("a", "b", "c"), X, y, w)) == pytest.approx(naive, abs=1e-12)


def test_wrong_beta_shape():
    with pytest.raises(DimensionMismatch):
        log_likelihood([0.0, 1.0], one_col([1.0], [1]))


def test_logit_three_quarters():
    fit = fit_logistic(one_col([1, 1, 1, 1], [1, 1, 1, 0]))
    assert fit.beta[0] == pytest.approx(math.log(3), abs=1e-8)
    assert fit.converged and not fit.separation_flag
    assert fit.iterations < 15


def test_balanced_data_gives_zero():
    fit = fit_logistic(one_col([1, 1, -1, -1], [1, 0, 1, 0]))
    assert abs(fit.beta[0]) < 1e-12


def test_all_successes_flag_separation():
    fit = fit_logistic(one_col([1, 2, 1, 3], [1, 1, 1, 1]))
    assert fit.separation_flag


def test_one_game_design_separates():
    fit = fit_covariate(one_col([[1.0, 3.0]], [1]))
    assert fit.separation_flag


def test_zero_column_is_singular():
    X = np.column_stack([[1.0, -1.0, 2.0, 0.5], np.zeros(4)])
    with pytest.raises(SingularInformation):
        fit_logistic(one_col(X, [1, 0, 1, 0]))


def test_two_team_closed_form():
    assert fit_standard({("A", "B"): (3, 1)}, "B").coef("A") == pytest.approx(math.log(3), abs=1e-8)


def test_symmetric_round_robin_all_zero():
    teams = "ABCD"
    counts = {(h, a): (1, 1) for h in teams for a in teams if h != a}
    fit = fit_standard(counts, "A")
    assert np.max(np.abs(fit.beta)) < 1e-10
    contest = fit_contest({(h, a): (3, 1) for h in teams for a in teams if h != a}, "A")
    assert contest.coef("AT_HOME") == pytest.approx(math.log(3), abs=1e-8)
    assert max(abs(contest.coef(t)) for t in "BCD") < 1e-10


def test_empty_contest():
    with pytest.raises(EmptyDesign):
        fit_contest({}, "A")


def test_disconnected_graph_warns():
    with pytest.warns(DisconnectedComparisonGraph):
        fit = fit_standard({("A", "B"): (2, 1), ("C", "D"): (1, 2)}, "A")
    assert fit.separation_flag


@pytest.mark.parametrize("beta,expected", [
    ({"B": 0.0}, 0.5),
    ({"B": -math.log(2)}, 2 / 3),
])
def test_predict_strength_fits(beta, expected):
    fit = FitResult(("B",), np.array([beta["B"]]), np.ones(1), -1.0, 4.0, 1, True, False, "A", ("A", "B"))
    assert predict_game(fit, "A", "B") == pytest.approx(expected, abs=1e-12)


def test_predict_home_effect_only():
    fit = _fit(["AT_HOME"], [0.29])
    assert predict_prob(fit, {"AT_HOME": 1.0}) == pytest.approx(1 / (1 + math.exp(-0.29)), abs=1e-15)
    assert round(predict_prob(fit, [1.0]), 3) == 0.572


def test_predict_column_mismatch():
    with pytest.raises(ColumnMismatch):
        predict_prob(_fit(["a", "b"], [1, 2]), {"a": 1.0})


def test_predict_extreme_eta_is_finite():
    fit = _fit(["a"], [1.0])
    assert predict_prob(fit, [-1000.0]) == 0.0
    assert predict_prob(fit, [1000.0]) == 1.0


@pytest.mark.parametrize("beta,se,p", [
    (0.0, 1.0, 1.0),
    (1.959964, 1.0, 0.05),
    (1.0, 2.0, 2 * (1 - NormalDist().cdf(0.5))),
])
def test_wald_pvalues(beta, se, p):
    _, pv = wald_pvalues([beta], [se])
    assert pv[0] == pytest.approx(p, abs=1e-4)


def test_wald_frozen_value():
    z, p = wald_pvalues([1.0], [2.0])
    assert z[0] == 0.5
    assert p[0] == pytest.approx(0.6170750774519738, abs=1e-12)


def test_wald_rejects_separated_fit():
    fit = fit_logistic(one_col([1, 1], [1, 1]))
    with pytest.raises(InvalidSE):
        wald_inference(fit)


def test_aic_values():
    assert aic(_fit(["a", "b"], [0, 0], ll=-10.0)) == 24
    assert aic(_fit(["a"], [0], ll=0.0)) == 2


def test_grouped_loglik_constant():
    # binomial coefficient C(4, 3) enters the likelihood
    fit = fit_standard({("A", "B"): (3, 1)}, "B")
    assert fit.log_likelihood == pytest.approx(math.log(4) + 3 * math.log(0.75) + math.log(0.25), abs=1e-10)


def test_json_schema():
    d = json.loads(fit_standard(random_pair_counts("ABC", 1), "A").to_json())
    assert list(d) == ["columns", "beta", "se", "z", "p", "loglik", "aic", "converged", "separation",
                       "reference_team"]


def test_gradient_zero_at_mle():
    d = one_col([1, 1, 1, 1, -1], [1, 1, 1, 0, 0])
    fit = fit_logistic(d)
    assert np.max(np.abs(finite_difference_gradient(fit.beta, d))) < 1e-4


def test_one_row_gradient_by_hand():
    d = one_col([[2.0, -1.0]], [1])
    beta = np.array([0.3, 0.2])
    s = 1 / (1 + math.exp(-(0.6 - 0.2)))
    np.testing.assert_allclose(score(beta, d), (1 - s) * np.array([2.0, -1.0]), atol=1e-12)
    np.testing.assert_allclose(finite_difference_gradient(beta, d), score(beta, d), atol=1e-6)


def test_finite_difference_second_order():
    rng = np.random.default_rng(5)
    d = one_col(rng.normal(size=(20, 2)), (rng.random(20) < 0.5).astype(float))
    beta = np.array([0.7, -0.4])
    exact = score(beta, d)
    e1 = np.max(np.abs(finite_difference_gradient(beta, d, h=1e-2) - exact))
    e2 = np.max(np.abs(finite_difference_gradient(beta, d, h=5e-3) - exact))
    assert 3.0 < e1 / e2 < 5.0


@given(st.integers(0, 10_000), st.sampled_from("ABCDE"))
def test_reference_translation(seed, ref):
    counts = random_pair_counts("ABCDE", seed)
    base, other = fit_standard(counts, "A"), fit_standard(counts, ref)
    shift = {t: base.strengths()[t] - other.strengths()[t] for t in "ABCDE"}
    assert max(shift.values()) - min(shift.values()) < 1e-8
    for h in "ABCDE":
        for a in "ABCDE":
            if h != a:
                assert abs(predict_game(base, h, a) - predict_game(other, h, a)) < 1e-8


@given(st.floats(-5, 5), st.floats(0.01, 2))
def test_predict_monotone_in_strength_gap(gap, step):
    lo = _fit(["x"], [gap])
    hi = _fit(["x"], [gap + step])
    assert predict_prob(hi, [1.0]) > predict_prob(lo, [1.0]) or predict_prob(lo, [1.0]) == 1.0


@given(st.integers(0, 10_000))
def test_aic_bit_exact(seed):
    fit = fit_contest(random_pair_counts("ABCD", seed), "B")
    assert fit.aic == 2 * fit.p - 2 * fit.log_likelihood


def test_screening_kernel_matches_full_fit():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(80, 3))
    y = (rng.random(80) < 1 / (1 + np.exp(-X[:, 0]))).astype(float)
    beta, info, _, _, conv = _kernels.univariate_newton(X, y, np.ones(80), 50, 1e-10, 30)
    for j in range(3):
        fit = fit_logistic(one_col(X[:, j], y))
        assert conv[j]
        assert beta[j] == pytest.approx(fit.beta[0], abs=1e-8)
        assert 1 / math.sqrt(info[j]) == pytest.approx(fit.se[0], rel=1e-6)
