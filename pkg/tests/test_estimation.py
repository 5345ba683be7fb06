import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_spec, random_params, simulate
from oracles import grid_max, ordered_model_umle, slsqp_constrained
from poclm.estimation import (
    EmptyCategoryError,
    FitOptions,
    InfeasibleError,
    Kind,
    Target,
    fit_constrained,
    fit_direction_constrained,
    fit_partially_constrained,
    fit_sign_pattern,
    fit_unconstrained,
    initial_values,
    profile_nuisance,
    project_block,
)
from poclm.model import (
    Constraint,
    DesignData,
    Direction,
    ModelSpec,
    ParameterVector,
    PredictorSpec,
    check_membership,
    classify_block,
    encode_design,
    score,
)
from poclm.simulation import boundary_truth, generate_dataset


def boundary_data(seed, n=300, degree="small"):
    """A draw from the boundary truth; redraws (deterministically) if a category is empty."""
    truth = boundary_truth(degree)
    for attempt in range(20):
        data = encode_design(generate_dataset(truth, n, (seed, attempt)), truth.spec)
        if np.all(data.response_counts() > 0):
            return data
    raise RuntimeError("no draw with every response category present")


# --- UMLE ---------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(4))
def test_umle_matches_ordered_model(seed):
    rng = np.random.default_rng(seed)
    spec = make_spec(k=4, n_ordinal=2, numeric=True)
    data = simulate(rng, random_params(rng, spec), 400)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ref, ref_ll = ordered_model_umle(data)
    fit = fit_unconstrained(data)
    assert fit.converged and fit.kind is Kind.UMLE
    assert fit.loglik >= ref_ll - 1e-9
    np.testing.assert_allclose(fit.gamma, ref, atol=1e-5)
    assert np.max(np.abs(score(fit.gamma, data))) < 1e-6


def test_binary_intercept_only_is_sample_logit():
    spec = ModelSpec(2)
    z = np.array([1] * 13 + [2] * 27)
    fit = fit_unconstrained(DesignData(spec, z, np.zeros((40, 0))))
    assert fit.gamma[0] == pytest.approx(np.log(13 / 27), abs=1e-9)


def test_school_umle_matches_oracle(school_data, school_fits, real_school):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ref, _ = ordered_model_umle(school_data)
    np.testing.assert_allclose(school_fits.umle.gamma, ref, atol=1e-4)
    if real_school:
        published = [-0.62759, 1.83259, 5.87701, -1.23255, -3.20697, -5.81422, 0.00609, -0.73117, -0.34234]
        np.testing.assert_allclose(school_fits.umle.gamma, published, atol=1e-3)


def test_recovery_at_moderate_n():
    spec = ModelSpec(4, (PredictorSpec.ordinal("op1", "123"), PredictorSpec.ordinal("op2", "1234"),
                         PredictorSpec.nominal("nom", "12345"), PredictorSpec.numeric("x")))
    truth = ParameterVector.from_blocks(spec, [-2.0, 2.0, 5.5], {"nom": [0.7, 1.4, -0.3, -1.2], "x": [0.3]})
    seeds = 60
    inside = np.zeros(spec.p)
    for seed in range(seeds):
        rng = np.random.default_rng(1000 + seed)
        n = 3000
        table = {"op1": rng.choice(list("123"), n), "op2": rng.choice(list("1234"), n),
                 "nom": rng.choice(list("12345"), n, p=[0.2, 0.2, 0.3, 0.1, 0.2]),
                 "x": rng.normal(1.0, 2.0, n), "response": np.ones(n, dtype=int)}
        X = encode_design(table, spec).X
        eta = truth.alpha[None, :] + (X @ truth.beta)[:, None]
        z = 1 + np.sum(rng.random(n)[:, None] > 1 / (1 + np.exp(-eta)), axis=1)
        fit = fit_unconstrained(DesignData(spec, z, X))
        inside += np.abs(fit.gamma - truth.values) <= 3 * fit.se
    assert np.all(inside >= 0.95 * seeds), inside


def test_empty_category_is_reported():
    spec = make_spec(k=3)
    with pytest.raises(EmptyCategoryError):
        fit_unconstrained(DesignData(spec, [1, 1, 3], [[0, 0], [1, 0], [0, 1]]))


def test_quasi_separation_flagged():
    spec = ModelSpec(2, (PredictorSpec.numeric("x"),))
    data = DesignData(spec, [1, 1, 1, 2, 2, 2], [[-3], [-2], [-1], [1], [2], [3]])
    fit = fit_unconstrained(data)
    assert fit.quasi_separated


def test_initial_values_are_empirical_logits():
    spec = ModelSpec(3)
    g = initial_values(DesignData(spec, [1, 2, 2, 3], np.zeros((4, 0))))
    assert g == pytest.approx([np.log(1 / 3), np.log(3)])


# --- DMLE / CMLE / PMLE -----------------------------------------------------------

def test_dmle_equals_umle_when_directions_hold():
    data = boundary_data(2, n=2000, degree="large")
    umle = fit_unconstrained(data)
    assert classify_block(umle.block("op1")) == "iso"
    assert classify_block(umle.block("op2")) == "anti"
    directions = {"op1": "iso", "op2": "anti"}
    dmle = fit_direction_constrained(data, None, directions)
    np.testing.assert_allclose(dmle.gamma, umle.gamma, atol=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_dmle_matches_dense_grid(seed):
    rng = np.random.default_rng(seed)
    spec = make_spec(k=3)
    data = simulate(rng, ParameterVector(spec, [-0.5, 0.8, 0.4, -0.3]), 30)
    for d in ("iso", "anti"):
        fit = fit_direction_constrained(data, None, {"op1": d})
        ref, _ = grid_max(data, d)
        assert fit.loglik >= ref - 1e-9
        assert fit.loglik - ref < 1e-3


def test_dmle_matches_slsqp_oracle():
    data = boundary_data(7, n=250)
    for directions in ({"op1": "iso", "op2": "iso"}, {"op1": "anti", "op2": "iso"}):
        fit = fit_direction_constrained(data, None, directions)
        _, ref = slsqp_constrained(data, directions, start=fit.gamma * 0.5 + np.r_[[-1, 0, 1], [0] * 5] * 0.5)
        assert fit.loglik >= ref - 1e-7
        assert check_membership(fit.gamma, data.spec, directions=directions)


def test_cmle_equals_umle_inside_constrained_set():
    data = boundary_data(2, n=2000, degree="large")
    umle = fit_unconstrained(data)
    assert check_membership(umle.gamma, data.spec)
    cmle = fit_constrained(data, umle=umle)
    assert cmle.loglik == umle.loglik
    np.testing.assert_array_equal(cmle.gamma, umle.gamma)


def test_tie_between_directions_prefers_isotonic():
    # every level has the same response distribution: the best block is zero,
    # which lies in both the isotonic and the antitonic cone
    spec = ModelSpec(3, (PredictorSpec.ordinal("op1", "abc"),))
    z, X = [], []
    for x in ([0, 0], [1, 0], [0, 1]):
        for j, m in enumerate((2, 3, 2)):
            z += [j + 1] * m
            X += [x] * m
    data = DesignData(spec, z, X)
    umle = fit_unconstrained(data)
    np.testing.assert_allclose(umle.block("op1"), 0.0, atol=1e-7)
    cmle = fit_constrained(data, umle=umle)
    assert cmle.tie
    assert cmle.directions["op1"] is Direction.ISO
    np.testing.assert_allclose(cmle.block("op1"), 0.0, atol=1e-7)


@pytest.mark.parametrize("seed", range(30))
def test_cmle_nesting(seed):
    data = boundary_data(seed, n=200)
    umle = fit_unconstrained(data)
    cmle = fit_constrained(data, umle=umle)
    assert cmle.loglik <= umle.loglik + 1e-8
    feasible = bool(check_membership(umle.gamma, data.spec))
    assert (abs(cmle.loglik - umle.loglik) <= 1e-8) == feasible
    assert check_membership(cmle.gamma, data.spec)
    for combo in [("iso", "iso"), ("iso", "anti"), ("anti", "iso"), ("anti", "anti")]:
        d = fit_direction_constrained(data, None, dict(zip(("op1", "op2"), combo)), umle=umle)
        assert d.loglik <= cmle.loglik + 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_cmle_matches_slsqp_oracle(seed):
    data = boundary_data(100 + seed, n=150)
    cmle = fit_constrained(data)
    _, ref = slsqp_constrained(data)
    assert cmle.loglik >= ref - 1e-6


def test_pmle_degenerate_cases():
    data = boundary_data(11, n=300)
    umle = fit_unconstrained(data)
    both = {"op1": "anti", "op2": "anti"}
    np.testing.assert_allclose(fit_partially_constrained(data, None, both, umle=umle).gamma,
                               fit_direction_constrained(data, None, both, umle=umle).gamma, atol=1e-10)
    np.testing.assert_allclose(fit_partially_constrained(data, None, {}, umle=umle).gamma,
                               fit_constrained(data, umle=umle).gamma, atol=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_pmle_nested_in_cmle(seed):
    data = boundary_data(200 + seed, n=200)
    umle = fit_unconstrained(data)
    cmle = fit_constrained(data, umle=umle)
    for d in ("iso", "anti"):
        pmle = fit_partially_constrained(data, None, {"op1": d}, umle=umle)
        assert pmle.loglik <= cmle.loglik + 1e-8
        if cmle.directions["op1"].value == d or classify_block(cmle.block("op1")) == "both":
            assert pmle.loglik == pytest.approx(cmle.loglik, abs=1e-7)


def test_fixed_direction_regimes_respected():
    data = boundary_data(5, n=400)
    spec = data.spec.with_constraints({"op2": Constraint.ISOTONIC, "op1": Constraint.UNCONSTRAINED})
    fit = fit_constrained(DesignData(spec, data.z, data.X))
    assert classify_block(fit.block("op2")) in ("iso", "both")
    assert list(fit.directions) == ["op2"]


def test_reversing_levels_flips_direction():
    data = boundary_data(21, n=600, degree="medium")
    spec = data.spec
    rev = ModelSpec(spec.k, (PredictorSpec.ordinal("op1", "123"), PredictorSpec.ordinal("op2", "4321")))
    table = generate_dataset(boundary_truth("medium"), 600, 21)
    rdata = encode_design(table, rev)
    a = fit_constrained(data)
    b = fit_constrained(rdata)
    assert a.loglik == pytest.approx(b.loglik, abs=1e-7)
    assert a.directions["op2"] is Direction.ANTI and b.directions["op2"] is Direction.ISO


def test_active_flags_mark_boundary():
    data = boundary_data(2, n=300)
    cmle = fit_constrained(data)
    for name, flags in cmle.active.items():
        d = np.diff(np.concatenate(([0.0], cmle.block(name))))
        assert flags == tuple(bool(x == 0.0) for x in d)


def test_project_block():
    np.testing.assert_allclose(project_block([0.3, -0.1], Direction.ISO), [0.1, 0.1])
    np.testing.assert_allclose(project_block([0.3, -0.1], Direction.ANTI), [0.0, -0.1])
    np.testing.assert_allclose(project_block([-1.0, -2.0], Direction.ISO), [0.0, 0.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-4, 4), min_size=1, max_size=6), st.sampled_from(list(Direction)))
def test_projection_is_monotone_and_idempotent(values, d):
    p = project_block(values, d)
    assert classify_block(p) in (d.value, "both")
    np.testing.assert_allclose(project_block(p, d), p, atol=1e-12)


# --- profiling --------------------------------------------------------------

def test_profile_at_umle_block_recovers_umle():
    data = boundary_data(4, n=300)
    umle = fit_unconstrained(data)
    t = Target.block(data.spec, "op2")
    res = profile_nuisance(data, t, umle.block("op2"))
    assert res.loglik == pytest.approx(umle.loglik, abs=1e-8)


def test_constrained_profile_at_cmle_block(school_data, school_fits):
    t = Target.block(school_data.spec, "funding")
    res = profile_nuisance(school_data, t, school_fits.cmle.block("funding"), "constrained")
    assert res.loglik == pytest.approx(school_fits.cmle.loglik, abs=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_constrained_profile_never_exceeds_unconstrained(seed):
    data = boundary_data(300 + seed, n=200)
    rng = np.random.default_rng(seed)
    t = Target.block(data.spec, "op1")
    value = -np.sort(np.abs(rng.normal(0, 0.3, 2)))
    u = profile_nuisance(data, t, value)
    c = profile_nuisance(data, t, value, "constrained")
    assert c.loglik <= u.loglik + 1e-9
    assert check_membership(c.params, data.spec)
    assert np.allclose(c.params[data.spec.block("op1")], value)


def test_profile_with_contrast_target_matches_oracle():
    from scipy import optimize

    data = boundary_data(8, n=300)
    spec = data.spec
    t = Target.contrast(spec, "op2", [{"4": 1, "3": -1}])
    fit = fit_unconstrained(data)
    res = profile_nuisance(data, t, [-0.2], start=fit.gamma)
    C = t.C
    cons = {"type": "eq", "fun": lambda g: C @ g[spec.n_alpha:] + 0.2}
    from oracles import _loglik

    ref = optimize.minimize(lambda g: -_loglik(g, data), fit.gamma, constraints=[cons], method="SLSQP",
                            options={"ftol": 1e-13, "maxiter": 500})
    assert res.loglik == pytest.approx(-ref.fun, abs=1e-7)


def test_constrained_profile_rejects_non_monotone_value():
    data = boundary_data(4, n=200)
    t = Target.block(data.spec, "op1")
    with pytest.raises(InfeasibleError):
        profile_nuisance(data, t, [0.5, -0.5], "constrained")


def test_sign_pattern_fit():
    data = boundary_data(9, n=300)
    res = fit_sign_pattern(data, {"op2": np.array([0.0, 1.0, -1.0])})
    d = np.diff(np.concatenate(([0.0], res.params[data.spec.block("op2")])))
    assert d[1] >= -1e-12 and d[2] <= 1e-12


def test_fit_options_validation():
    with pytest.raises(ValueError):
        FitOptions(gtol=0)
    with pytest.raises(ValueError):
        FitOptions(max_iter=0)


def test_non_convergence_is_flagged():
    data = boundary_data(4, n=300)
    fit = fit_unconstrained(data, opts=FitOptions(max_iter=1))
    assert not fit.converged and fit.message
