import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_spec, random_params, simulate
from poclm.datasets import school_spec
from poclm.model import (
    Constraint,
    DesignData,
    Direction,
    LikelihoodUnderflowError,
    ModelSpec,
    ParameterVector,
    PredictorSpec,
    category_probabilities,
    check_membership,
    classify_block,
    encode_design,
    fisher_information,
    hessian,
    log_likelihood,
    score,
)


def sig(x):
    return 1.0 / (1.0 + math.exp(-x))


# --- encoding ---------------------------------------------------------------

def test_baseline_category_codes_to_zeros():
    spec = make_spec(k=2, n_levels=3)
    d = encode_design({"response": [1], "op1": ["1"]}, spec)
    assert d.X.tolist() == [[0.0, 0.0]]
    assert d.y.tolist() == [[1.0, 0.0]]


def test_one_hot_for_third_level():
    spec = make_spec(k=2, n_levels=3)
    d = encode_design({"response": [2], "op1": ["3"]}, spec)
    assert d.X.tolist() == [[0.0, 1.0]]


def test_school_table_shape(school_data):
    spec = school_data.spec
    assert school_data.n == 5333
    assert spec.predictor("perf2016").n_params == 3
    assert spec.predictor("funding").n_params == 2
    assert spec.predictor("regisRat").n_params == 1
    assert spec.p == 3 + 6


def test_parameter_layout_puts_ordinal_first():
    spec = ModelSpec(3, (PredictorSpec.numeric("x"), PredictorSpec.nominal("c", "abc"),
                         PredictorSpec.ordinal("o", "LMH")))
    assert spec.parameter_names() == ["alpha1", "alpha2", "o[M]", "o[H]", "c[b]", "c[c]", "x"]


def test_level_order_follows_declaration():
    spec = ModelSpec(2, (PredictorSpec.ordinal("o", ["low", "high"]),))
    d = encode_design({"response": [1, 2], "o": ["high", "low"]}, spec)
    assert d.X[:, 0].tolist() == [1.0, 0.0]


@pytest.mark.parametrize("table, msg", [
    ({"response": [], "op1": []}, "empty"),
    ({"response": [1], "op1": ["9"]}, "unknown category"),
    ({"response": [4], "op1": ["1"]}, "outside"),
    ({"response": [1]}, "op1"),
])
def test_encode_rejects_bad_tables(table, msg):
    with pytest.raises((ValueError, KeyError), match=msg):
        encode_design(table, make_spec(k=3))


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(1)
    with pytest.raises(ValueError):
        PredictorSpec.ordinal("o", ["a"])
    with pytest.raises(ValueError):
        PredictorSpec.ordinal("o", ["a", "a"])
    with pytest.raises(ValueError):
        ModelSpec(2, (PredictorSpec.numeric("x"), PredictorSpec.numeric("x")))


# --- probabilities and likelihood -------------------------------------------

def test_symmetric_binary_probabilities():
    spec = ModelSpec(2)
    pi = category_probabilities(ParameterVector(spec, [0.0]), spec, np.zeros((1, 0)))
    assert pi[0] == pytest.approx([0.5, 0.5])


def test_four_category_probabilities_at_zero_slopes():
    spec = ModelSpec(4)
    pi = category_probabilities(ParameterVector(spec, [-2.0, 2.0, 5.5]), spec, np.zeros((1, 0)))[0]
    expected = [0.1192029, 0.7615942, 0.9959299 - 0.8807971, 0.0040701]
    assert pi == pytest.approx(expected, abs=1e-7)
    assert pi == pytest.approx([sig(-2), sig(2) - sig(-2), sig(5.5) - sig(2), 1 - sig(5.5)], abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 6))
def test_probabilities_sum_to_one(seed, k):
    rng = np.random.default_rng(seed)
    spec = make_spec(k=k, n_ordinal=2, n_levels=4, numeric=True)
    params = random_params(rng, spec, scale=3.0)
    X = simulate(rng, params, 30).X
    pi = category_probabilities(params, spec, X)
    assert np.all(pi >= 0)
    np.testing.assert_allclose(pi.sum(axis=1), 1.0, atol=1e-12)


def test_single_observation_loglik():
    spec = ModelSpec(2)
    d = DesignData(spec, [1], np.zeros((1, 0)))
    assert log_likelihood(ParameterVector(spec, [0.0]), d) == pytest.approx(-0.693147, abs=1e-6)


def test_loglik_is_additive_over_identical_rows():
    spec = make_spec(k=3)
    rng = np.random.default_rng(3)
    params = random_params(rng, spec)
    one = DesignData(spec, [2], [[0.0, 1.0]])
    many = DesignData(spec, [2] * 7, [[0.0, 1.0]] * 7)
    assert log_likelihood(params, many) == pytest.approx(7 * log_likelihood(params, one), rel=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_loglik_matches_product_of_probabilities(seed):
    rng = np.random.default_rng(seed)
    spec = make_spec(k=3)
    params = random_params(rng, spec)
    data = simulate(rng, params, 20)
    oracle = 0.0
    a = params.alpha
    for z, x in zip(data.z, data.X):
        eta = x @ params.beta
        cum = [0.0] + [sig(aj + eta) for aj in a] + [1.0]
        oracle += math.log(cum[z] - cum[z - 1])
    assert log_likelihood(params, data) == pytest.approx(oracle, abs=1e-10)


def test_extreme_parameters_stay_finite_or_raise():
    spec = ModelSpec(3, (PredictorSpec.numeric("x"),))
    data = DesignData(spec, [1, 3], [[40.0], [-40.0]])
    ll = log_likelihood(ParameterVector(spec, [-1.0, 1.0, -1.0]), data)
    assert np.isfinite(ll) and ll < -70
    with pytest.raises(LikelihoodUnderflowError):
        log_likelihood(ParameterVector(spec, [-1.0, 1.0, -30.0]), data)


def test_unordered_intercepts_rejected():
    spec = ModelSpec(3)
    data = DesignData(spec, [1], np.zeros((1, 0)))
    with pytest.raises(ValueError):
        log_likelihood(ParameterVector(spec, [1.0, 0.0]), data)


# --- derivatives --------------------------------------------------------------

def central_difference(f, x, rel=1e-6):
    g = np.zeros_like(x)
    for j in range(x.size):
        h = rel * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.sampled_from([3, 4]), t=st.sampled_from([1, 2]),
       n=st.sampled_from([20, 100]))
def test_score_matches_finite_differences(seed, k, t, n):
    rng = np.random.default_rng(seed)
    spec = make_spec(k=k, n_ordinal=t, numeric=True)
    params = random_params(rng, spec)
    data = simulate(rng, params, n)
    g = score(params, data)
    fd = central_difference(lambda v: log_likelihood(v, data), params.values.copy())
    assert np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(fd))) < 1e-6


def test_score_zero_for_constant_zero_covariates():
    spec = make_spec(k=3, numeric=True)
    rng = np.random.default_rng(0)
    data = DesignData(spec, rng.integers(1, 4, 40), np.zeros((40, spec.q)))
    g = score(ParameterVector(spec, [-0.4, 0.9, 0.3, -0.2, 1.0]), data)
    assert np.all(g[spec.n_alpha:] == 0.0)


@pytest.mark.parametrize("seed", range(4))
def test_hessian_matches_finite_differences_of_score(seed):
    rng = np.random.default_rng(seed)
    spec = make_spec(k=4, n_ordinal=2, numeric=True)
    params = random_params(rng, spec)
    data = simulate(rng, params, 80)
    H = hessian(params, data)
    v = params.values.copy()
    fd = np.column_stack([central_difference(lambda w: score(w, data)[i], v) for i in range(v.size)]).T
    np.testing.assert_allclose(H, fd, rtol=1e-5, atol=1e-5)
    assert np.all(np.linalg.eigvalsh(H) <= 1e-9)


# --- Fisher information -------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_fisher_symmetric(seed):
    rng = np.random.default_rng(seed)
    spec = make_spec(k=4, n_ordinal=2, numeric=True)
    params = random_params(rng, spec)
    F = fisher_information(params, simulate(rng, params, 25))
    assert np.max(np.abs(F - F.T)) < 1e-10


def test_fisher_bernoulli_case():
    spec = ModelSpec(2)
    F = fisher_information(ParameterVector(spec, [0.0]), DesignData(spec, [1], np.zeros((1, 0))))
    assert F.shape == (1, 1) and F[0, 0] == pytest.approx(0.25, abs=1e-15)


def test_fisher_equals_score_covariance():
    rng = np.random.default_rng(12)
    spec = ModelSpec(3, (PredictorSpec.ordinal("o", "abc"), PredictorSpec.numeric("x")))
    params = ParameterVector(spec, [-0.5, 1.0, 0.4, 0.9, -0.3])
    X = simulate(rng, params, 30).X
    F = fisher_information(params, DesignData(spec, np.ones(30, dtype=int), X))
    eta = params.alpha[None, :] + (X @ params.beta)[:, None]
    cum = 1.0 / (1.0 + np.exp(-eta))
    scores = []
    for _ in range(10_000):
        z = 1 + np.sum(rng.random(30)[:, None] > cum, axis=1)
        scores.append(score(params, DesignData(spec, z, X)))
    S = np.cov(np.array(scores), rowvar=False)
    big = np.abs(F) > 0.1 * np.max(np.abs(np.diag(F)))
    np.testing.assert_allclose(S[big], F[big], rtol=0.05)
    np.testing.assert_allclose(S[~big], F[~big], atol=0.05 * np.max(np.abs(np.diag(F))))


def test_fisher_close_to_negative_hessian_at_large_n():
    rng = np.random.default_rng(1)
    spec = make_spec(k=3, n_ordinal=1, numeric=True)
    params = random_params(rng, spec)
    data = simulate(rng, params, 20_000)
    F = fisher_information(params, data)
    np.testing.assert_allclose(-hessian(params, data), F, rtol=0.05, atol=0.02 * F.max())


# --- constraint sets -----------------------------------------------------------

@pytest.mark.parametrize("block, cls", [
    ((0.7, 1.4), "iso"),
    ((-0.2, -0.2), "anti"),
    ((0.3, -0.1), "neither"),
    ((0.0, 0.0), "both"),
    ((0.00609, -0.73117), "neither"),
])
def test_classify_block(block, cls):
    assert classify_block(block) == cls


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6))
def test_sorted_blocks_are_monotone(values):
    b = np.sort(np.abs(values))
    assert classify_block(b) in ("iso", "both")
    assert classify_block(-b) in ("anti", "both")


def test_check_membership_regimes():
    spec = ModelSpec(3, (PredictorSpec.ordinal("a", "xyz"), PredictorSpec.ordinal("b", "xyz", "isotonic"),
                         PredictorSpec.ordinal("c", "xyz", "unconstrained")))
    v = ParameterVector.from_blocks(spec, [0, 1], {"a": [-1, -2], "b": [0.5, 0.5], "c": [1, -1]})
    assert check_membership(v, spec)
    assert not check_membership(v, spec, directions={"a": "iso", "b": "iso"})
    assert check_membership(v, spec, directions={"a": "anti", "b": "iso"})
    bad = ParameterVector.from_blocks(spec, [0, 1], {"a": [-1, -2], "b": [-0.5, 0.5]})
    assert not check_membership(bad, spec)
    assert check_membership(bad, spec, kind="unconstrained")
    unordered = ParameterVector.from_blocks(spec, [1, 0])
    assert not check_membership(unordered, spec, kind="unconstrained")
    with pytest.raises(ValueError):
        check_membership(v, spec, directions={"a": "iso"})


def test_direction_helpers():
    assert Direction.ISO.opposite is Direction.ANTI
    assert Direction.ANTI.sign == -1.0
    spec = school_spec(Constraint.ANTITONIC)
    assert spec.predictor("funding").allowed_directions == (Direction.ANTI,)
