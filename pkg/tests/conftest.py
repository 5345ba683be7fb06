import os

import numpy as np
import pytest

from poclm.datasets import load_school, school_spec
from poclm.inference import Fits
from poclm.model import DesignData, ModelSpec, ParameterVector, PredictorSpec, encode_design


def make_spec(k=3, n_ordinal=1, n_levels=3, numeric=False, constraint="either"):
    preds = [PredictorSpec.ordinal(f"op{s + 1}", [str(h) for h in range(1, n_levels + 1)], constraint)
             for s in range(n_ordinal)]
    if numeric:
        preds.append(PredictorSpec.numeric("x"))
    return ModelSpec(k, tuple(preds))


def random_params(rng, spec, scale=1.0):
    alpha = np.sort(rng.normal(0.0, 1.5, spec.n_alpha))
    alpha += 0.3 * np.arange(spec.n_alpha)
    beta = rng.normal(0.0, scale, spec.q)
    return ParameterVector(spec, np.concatenate([alpha, beta]))


def simulate(rng, params, n):
    """Design and responses drawn from ``params`` (uniform categories, standard normal numerics)."""
    spec = params.spec
    table = {}
    for p in spec.predictors:
        if p.levels is None:
            table[p.name] = rng.normal(size=n)
        else:
            table[p.name] = np.asarray(p.levels, dtype=object)[rng.integers(len(p.levels), size=n)]
    table[spec.response] = np.ones(n, dtype=int)
    X = encode_design(table, spec).X
    eta = params.alpha[None, :] + (X @ params.beta)[:, None]
    cum = 1.0 / (1.0 + np.exp(-eta))
    z = 1 + np.sum(rng.random(n)[:, None] > cum, axis=1)
    return DesignData(spec, z, X)


@pytest.fixture(scope="session")
def school_table():
    path = os.environ.get("POCLM_SCHOOL_CSV")
    return load_school(path)


@pytest.fixture(scope="session")
def school_data(school_table):
    return encode_design(school_table, school_spec())


@pytest.fixture(scope="session")
def school_fits(school_data):
    return Fits.compute(school_data)


@pytest.fixture(scope="session")
def real_school():
    """True when the prepared real CSV was supplied, so published values apply."""
    return bool(os.environ.get("POCLM_SCHOOL_CSV"))


@pytest.fixture(scope="session")
def funding_grid(school_fits):
    """The default 61 x 61 funding grid at 0.95 with two degrees of freedom."""
    from poclm.estimation import Target
    from poclm.inference import RegionSpec, cr_grid

    region = RegionSpec(Target.block(school_fits.spec, "funding"), "acr", 0.95, 2)
    return cr_grid(region, school_fits)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
