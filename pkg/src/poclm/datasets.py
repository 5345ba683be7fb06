"""School performance data: model declaration, loader and a synthetic stand-in.

The real data (5,333 Chilean schools, performance category in 2019 against
the 2016 category, funding type and the 2019/2016 enrolment ratio) must be
downloaded and prepared by the user.  The package ships a synthetic table
with the same columns, levels and size, drawn from a cumulative logit model
whose parameters equal published unconstrained estimates for the real data.
Covariate distributions of the synthetic table are guesses.
"""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

import numpy as np

from .model import Constraint, ModelSpec, ParameterVector, PredictorSpec, category_probabilities, encode_design

__all__ = [
    "PERFORMANCE_LEVELS",
    "FUNDING_LEVELS",
    "SYNTHETIC_SEED",
    "school_spec",
    "school_truth",
    "make_synthetic_school",
    "load_school",
    "read_csv",
    "bundled_path",
]

PERFORMANCE_LEVELS = ("Insufficient", "Medium-Low", "Medium", "High")
FUNDING_LEVELS = ("Public", "Mixed", "Private")
N_SCHOOLS = 5333
SYNTHETIC_SEED = 16

_ALPHA = (-0.62759, 1.83259, 5.87701)
_PERF = (-1.23255, -3.20697, -5.81422)
_FUNDING = (0.00609, -0.73117)
_RATIO = -0.34234
_PERF_PROBS = (0.2, 0.35, 0.3, 0.15)
_FUNDING_PROBS = (0.4, 0.52, 0.08)


def school_spec(constraint: Constraint | str = Constraint.EITHER) -> ModelSpec:
    """perf2019 ~ perf2016 + funding + regisRat, both ordinal predictors under ``constraint``."""
    return ModelSpec(
        4,
        (
            PredictorSpec.ordinal("perf2016", PERFORMANCE_LEVELS, Constraint(constraint)),
            PredictorSpec.ordinal("funding", FUNDING_LEVELS, Constraint(constraint)),
            PredictorSpec.numeric("regisRat"),
        ),
        response="perf2019",
        response_levels=PERFORMANCE_LEVELS,
    )


def school_truth() -> ParameterVector:
    spec = school_spec()
    return ParameterVector.from_blocks(spec, _ALPHA, {"perf2016": _PERF, "funding": _FUNDING, "regisRat": [_RATIO]})


def make_synthetic_school(seed: int = SYNTHETIC_SEED, n: int = N_SCHOOLS) -> dict:
    """Draw the synthetic school table (columns as in the real data, labels as strings)."""
    rng = np.random.default_rng(seed)
    spec = school_spec()
    table = {
        "perf2016": np.asarray(PERFORMANCE_LEVELS, dtype=object)[rng.choice(4, size=n, p=_PERF_PROBS)],
        "funding": np.asarray(FUNDING_LEVELS, dtype=object)[rng.choice(3, size=n, p=_FUNDING_PROBS)],
        "regisRat": np.round(rng.lognormal(0.0, 0.25, size=n), 5),
    }
    table["perf2019"] = np.array([PERFORMANCE_LEVELS[0]] * n, dtype=object)
    X = encode_design(table, spec).X
    cum = np.cumsum(category_probabilities(school_truth(), spec, X), axis=1)
    z = np.sum(rng.random(n)[:, None] > cum[:, :-1], axis=1)
    table["perf2019"] = np.asarray(PERFORMANCE_LEVELS, dtype=object)[z]
    return table


def read_csv(path) -> dict:
    """Read a headed CSV into a column mapping of strings (UTF-8, quoted fields allowed)."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise ValueError(f"{path}: duplicate column names")
        cols = {h: [] for h in header}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: line {lineno} has {len(row)} fields, expected {len(header)}")
            for h, v in zip(header, row):
                cols[h].append(v.strip())
    if not cols or not next(iter(cols.values())):
        raise ValueError(f"{path}: no data rows")
    return cols


def write_csv(table: dict, path) -> None:
    names = list(table)
    n = len(table[names[0]])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(n):
            w.writerow([table[c][i] for c in names])


def bundled_path(name: str) -> Path:
    """Path of a file shipped in the package's ``data`` directory."""
    return Path(str(resources.files("poclm") / "data" / name))


def load_school(path=None) -> dict:
    """The prepared real CSV at ``path``, or the bundled synthetic table when ``path`` is None."""
    table = read_csv(bundled_path("school_synthetic.csv") if path is None else path)
    if "regisRat" in table:
        table["regisRat"] = [float(v) for v in table["regisRat"]]
    return table
