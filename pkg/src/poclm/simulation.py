"""Simulated data from known truths and Monte Carlo coverage / rejection experiments.

Each replicate draws from its own generator,
``SeedSequence(seed, spawn_key=(n, replicate))``, so any single replicate can
be regenerated in isolation and results do not depend on execution order.
Replicates with an empty response category or a failed fit are excluded and
counted, never retried.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .estimation import FitOptions, Target
from .inference import (
    KINDS,
    Fits,
    RegionSpec,
    cr_membership,
    test_direction,
    test_monotonicity,
    test_no_effect,
)
from .model import (
    Constraint,
    DesignData,
    ModelSpec,
    ParameterVector,
    PredictorSpec,
    Role,
    category_probabilities,
    encode_design,
)

__all__ = [
    "TruthSpec",
    "Hypothesis",
    "ExperimentConfig",
    "ExperimentReport",
    "LADDER_RANGES",
    "LADDER_OFFSET",
    "ladder",
    "four_ordinal_truth",
    "boundary_truth",
    "generate_dataset",
    "replicate_seed",
    "coverage_experiment",
    "rejection_experiment",
]

ALPHA = (-2.0, 2.0, 5.5)
NOMINAL_BETA = (0.7, 1.4, -0.3, -1.2)
NOMINAL_PROBS = (0.2, 0.2, 0.3, 0.1, 0.2)
NUMERIC_BETA = 0.3
NUMERIC_LAW = (1.0, 4.0)

# spread beta_4 - beta_2 of a four-level ordinal predictor; adjacent steps are half of it
LADDER_RANGES = {"small": 0.5, "medium": 1.5, "large": 3.0}
# distance of the first non-baseline coefficient from zero
LADDER_OFFSET = 1.5


@dataclass(frozen=True)
class TruthSpec:
    """A data-generating model: parameters plus covariate laws.

    ``level_probs`` gives a probability vector over the levels of every
    categorical predictor; ``numeric_laws`` a ``(mean, variance)`` pair for
    every numeric one.
    """

    params: ParameterVector
    level_probs: Mapping[str, Sequence[float]]
    numeric_laws: Mapping[str, tuple] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        spec = self.spec
        probs = {}
        for p in spec.predictors:
            if p.role is Role.NUMERIC:
                if p.name not in self.numeric_laws:
                    raise ValueError(f"no distribution given for numeric predictor {p.name!r}")
                mean, var = self.numeric_laws[p.name]
                if var < 0:
                    raise ValueError(f"negative variance for {p.name!r}")
                continue
            if p.name not in self.level_probs:
                raise ValueError(f"no level distribution given for {p.name!r}")
            pr = np.asarray(self.level_probs[p.name], dtype=float)
            if pr.shape != (len(p.levels),) or np.any(pr < 0) or abs(pr.sum() - 1.0) > 1e-9:
                raise ValueError(f"level distribution of {p.name!r} must be a probability vector over its levels")
            probs[p.name] = tuple(float(x) for x in pr)
        if np.any(np.diff(self.params.alpha) <= 0):
            raise ValueError("true intercepts must be strictly increasing")
        object.__setattr__(self, "level_probs", probs)
        object.__setattr__(self, "numeric_laws",
                           {k: (float(v[0]), float(v[1])) for k, v in self.numeric_laws.items()})

    @property
    def spec(self) -> ModelSpec:
        return self.params.spec

    def to_dict(self) -> dict:
        preds = []
        for p in self.spec.predictors:
            d = {"name": p.name, "role": p.role.value, "beta": [float(x) for x in self.params.block(p.name)]}
            if p.role is Role.NUMERIC:
                d["mean"], d["variance"] = self.numeric_laws[p.name]
            else:
                d["levels"] = list(p.levels)
                d["probs"] = list(self.level_probs[p.name])
            if p.role is Role.ORDINAL:
                d["constraint"] = p.constraint.value
            preds.append(d)
        return {"label": self.label, "k": self.spec.k, "alpha": [float(a) for a in self.params.alpha],
                "predictors": preds}

    @classmethod
    def from_dict(cls, d: Mapping) -> "TruthSpec":
        if "preset" in d:
            preset = d["preset"]
            degree = d.get("degree", "small")
            if preset == "four_ordinal":
                return four_ordinal_truth(degree)
            if preset == "boundary":
                return boundary_truth(degree)
            raise ValueError(f"unknown truth preset {preset!r}")
        preds, blocks, probs, laws = [], {}, {}, {}
        for item in d["predictors"]:
            name, role = str(item["name"]), Role(item["role"])
            if role is Role.NUMERIC:
                preds.append(PredictorSpec.numeric(name))
                laws[name] = (item.get("mean", 0.0), item.get("variance", 1.0))
            else:
                levels = [str(x) for x in item["levels"]]
                if role is Role.ORDINAL:
                    preds.append(PredictorSpec.ordinal(name, levels, Constraint(item.get("constraint", "either"))))
                else:
                    preds.append(PredictorSpec.nominal(name, levels))
                probs[name] = item.get("probs", [1.0 / len(levels)] * len(levels))
            blocks[name] = item["beta"]
        spec = ModelSpec(int(d["k"]), tuple(preds))
        params = ParameterVector.from_blocks(spec, d["alpha"], blocks)
        return cls(params, probs, laws, str(d.get("label", "")))


def ladder(n_levels: int, degree: str = "small", sign: float = 1.0, offset: float = LADDER_OFFSET) -> np.ndarray:
    """Monotone coefficient block ``beta_2..beta_p`` for an ordinal predictor.

    ``beta_h = sign * (offset + step * (h - 2))``: the first non-baseline
    category sits ``offset`` away from zero and every further adjacent pair
    is ``step`` apart, with ``step = LADDER_RANGES[degree] / 2`` so that a
    four-level predictor spans exactly the tabulated range.
    """
    if degree not in LADDER_RANGES:
        raise ValueError(f"degree must be one of {sorted(LADDER_RANGES)}")
    r = n_levels - 1
    if r < 1:
        raise ValueError("an ordinal predictor needs at least two levels")
    return sign * (offset + 0.5 * LADDER_RANGES[degree] * np.arange(r))


def _levels(m: int) -> list[str]:
    return [str(h) for h in range(1, m + 1)]


def four_ordinal_truth(degree: str = "medium") -> TruthSpec:
    """Four ordinal predictors (3, 4, 5, 6 levels), a 5-level nominal and a numeric predictor.

    Ordinal directions alternate: op1 and op3 isotonic, op2 and op4
    antitonic.  Ordinal levels are uniformly distributed.
    """
    sizes = (3, 4, 5, 6)
    preds = [PredictorSpec.ordinal(f"op{s + 1}", _levels(m)) for s, m in enumerate(sizes)]
    preds += [PredictorSpec.nominal("nom", _levels(5)), PredictorSpec.numeric("x")]
    spec = ModelSpec(4, tuple(preds))
    blocks = {f"op{s + 1}": ladder(m, degree, 1.0 if s % 2 == 0 else -1.0) for s, m in enumerate(sizes)}
    blocks["nom"] = NOMINAL_BETA
    blocks["x"] = [NUMERIC_BETA]
    params = ParameterVector.from_blocks(spec, ALPHA, blocks)
    probs = {f"op{s + 1}": [1.0 / m] * m for s, m in enumerate(sizes)}
    probs["nom"] = NOMINAL_PROBS
    return TruthSpec(params, probs, {"x": NUMERIC_LAW}, f"four_ordinal/{degree}")


def boundary_truth(degree: str = "small") -> TruthSpec:
    """Two ordinal predictors: op1 (3 levels) with all coefficients zero, op2 (4 levels) antitonic."""
    spec = ModelSpec(4, (PredictorSpec.ordinal("op1", _levels(3)), PredictorSpec.ordinal("op2", _levels(4))))
    params = ParameterVector.from_blocks(spec, ALPHA, {"op1": [0.0, 0.0], "op2": ladder(4, degree, -1.0)})
    return TruthSpec(params, {"op1": [1 / 3] * 3, "op2": [0.25] * 4}, {}, f"boundary/{degree}")


def replicate_seed(seed: int, n: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(n, rep))


def generate_dataset(truth: TruthSpec, n: int, seed) -> dict:
    """Draw ``n`` observations; returns a column mapping ready for ``encode_design``.

    ``seed`` may be an integer, a ``SeedSequence`` or a ``Generator``.
    Categorical columns hold level labels, the response holds integers 1..k.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    spec = truth.spec
    table = {}
    for p in spec.predictors:
        if p.role is Role.NUMERIC:
            mean, var = truth.numeric_laws[p.name]
            table[p.name] = rng.normal(mean, np.sqrt(var), size=n)
        else:
            idx = rng.choice(len(p.levels), size=n, p=truth.level_probs[p.name])
            table[p.name] = np.asarray(p.levels, dtype=object)[idx]
    data = encode_design({**table, spec.response: np.ones(n, dtype=int)}, spec) if n else None
    if n:
        probs = category_probabilities(truth.params, spec, data.X)
        cum = np.cumsum(probs, axis=1)
        u = rng.random(n)
        z = 1 + np.sum(u[:, None] > cum[:, :-1], axis=1)
    else:
        z = np.zeros(0, dtype=int)
    table[spec.response] = z
    return table


@dataclass(frozen=True)
class Hypothesis:
    """One entry of a rejection experiment: ``first`` (no effect), ``second`` (monotone) or ``third`` (direction)."""

    variable: str
    test: str
    direction: str | None = None

    def __post_init__(self):
        if self.test not in ("first", "second", "third"):
            raise ValueError("hypothesis test must be 'first', 'second' or 'third'")
        if (self.test == "third") != (self.direction is not None):
            raise ValueError("a direction is required for, and only for, the 'third' hypothesis")

    @property
    def label(self) -> str:
        return self.test if self.direction is None else f"{self.test}:{self.direction}"


def default_hypotheses(spec: ModelSpec) -> tuple:
    out = []
    for p in spec.ordinal:
        out += [Hypothesis(p.name, "first"), Hypothesis(p.name, "second"),
                Hypothesis(p.name, "third", "iso"), Hypothesis(p.name, "third", "anti")]
    return tuple(out)


@dataclass(frozen=True)
class ExperimentConfig:
    truth: TruthSpec
    sample_sizes: tuple
    replicates: int
    level: float = 0.95
    kinds: tuple = ("uccr", "ccr", "acr")
    df: int | None = None
    mixture: bool = False
    seed: int = 0
    hypotheses: tuple = ()
    name: str = "experiment"
    fit_options: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not self.sample_sizes or any(int(n) != n or n < 1 for n in self.sample_sizes):
            raise ValueError("sample sizes must be positive integers")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie strictly between 0 and 1")
        kinds = tuple(k.lower() for k in self.kinds)
        if not kinds or any(k not in KINDS for k in kinds):
            raise ValueError(f"kinds must be drawn from {KINDS}")
        if self.df is not None and (int(self.df) != self.df or self.df < 1):
            raise ValueError("degrees of freedom must be a positive integer")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        hyps = tuple(h if isinstance(h, Hypothesis) else Hypothesis(**h) for h in self.hypotheses)
        names = {p.name for p in self.truth.spec.ordinal}
        for h in hyps:
            if h.variable not in names:
                raise ValueError(f"hypothesis refers to {h.variable!r}, not an ordinal predictor of the truth")
        object.__setattr__(self, "hypotheses", hyps or default_hypotheses(self.truth.spec))

    def to_dict(self) -> dict:
        return {
            "name": self.name, "seed": self.seed, "sample_sizes": list(self.sample_sizes),
            "replicates": self.replicates, "level": self.level, "kinds": list(self.kinds),
            "df": self.df, "mixture": self.mixture, "truth": self.truth.to_dict(),
            "hypotheses": [{"variable": h.variable, "test": h.test, "direction": h.direction}
                           for h in self.hypotheses],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        known = {"name", "seed", "sample_sizes", "replicates", "level", "kinds", "df", "mixture",
                 "truth", "hypotheses", "experiment"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment settings {sorted(unknown)}")
        if "truth" not in d:
            raise ValueError("experiment config needs a 'truth' section")
        hyps = []
        for h in d.get("hypotheses") or ():
            hyps.append(Hypothesis(str(h["variable"]), str(h["test"]), h.get("direction")))
        return cls(
            truth=TruthSpec.from_dict(d["truth"]),
            sample_sizes=tuple(d.get("sample_sizes", (100,))),
            replicates=int(d.get("replicates", 100)),
            level=float(d.get("level", 0.95)),
            kinds=tuple(d.get("kinds", ("uccr", "ccr", "acr"))),
            df=d.get("df"),
            mixture=bool(d.get("mixture", False)),
            seed=int(d.get("seed", 0)),
            hypotheses=tuple(hyps),
            name=str(d.get("name", "experiment")),
        )


@dataclass(frozen=True)
class ExperimentReport:
    """Aggregated experiment output.

    Coverage rows are keyed by ``(n, kind, split)`` with split ``same``,
    ``different`` or ``total`` (UMLE equal to CMLE or not); rejection rows by
    ``(n, variable, hypothesis, kind)``.  Percentages come with Monte Carlo
    standard errors ``100 * sqrt(p (1 - p) / m)``.
    """

    experiment: str
    config: ExperimentConfig
    rows: tuple
    diagnostics: Mapping[int, Mapping[str, int]]

    def cell(self, n: int, kind: str, split: str = "total", variable: str | None = None,
             hypothesis: str | None = None) -> dict:
        for r in self.rows:
            if r["n"] != n or r["kind"] != kind:
                continue
            if self.experiment == "coverage" and r["split"] == split:
                return r
            if self.experiment == "rejection" and r["variable"] == variable and r["hypothesis"] == hypothesis:
                return r
        raise KeyError((n, kind, split, variable, hypothesis))

    def percent(self, *args, **kwargs) -> float:
        return self.cell(*args, **kwargs)["percent"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.experiment == "coverage":
            cols = ["n", "kind", "split", "cases", "hits", "percent", "mcse"]
        else:
            cols = ["n", "variable", "hypothesis", "kind", "cases", "hits", "percent", "mcse"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (_pct(r[k]) if k in ("percent", "mcse") else r[k]) for k in cols})
        return buf.getvalue()

    def diagnostics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "replicates", "used", "empty_category", "non_converged"])
        for n in self.config.sample_sizes:
            d = self.diagnostics[n]
            w.writerow([n, self.config.replicates, d["used"], d["empty_category"], d["non_converged"]])
        return buf.getvalue()

    def to_text(self) -> str:
        sizes = self.config.sample_sizes
        kinds = self.config.kinds if self.experiment == "coverage" else _test_kinds(self.config)
        width = 9
        head = f"{'n':<26}|" + "|".join(f"{str(n):^{width * len(kinds)}}" for n in sizes)
        sub = f"{'':<26}|" + "|".join("".join(f"{k.upper():>{width}}" for k in kinds) for _ in sizes)
        lines = [f"{self.experiment} percentages: {self.config.name} ({self.config.truth.label}), "
                 f"level {self.config.level}, {self.config.replicates} replicates, seed {self.config.seed}",
                 head, sub, "-" * len(sub)]
        if self.experiment == "coverage":
            for split, title in (("same", "Same MLE"), ("different", "Different MLE"), ("total", "Total")):
                cells = []
                for n in sizes:
                    if split == "same":
                        r = self.cell(n, kinds[0], "same")
                        txt = f"{_pct(r['percent'])} ({r['cases']} cases)" if r["cases"] else f"- ({r['cases']} cases)"
                        cells.append(f"{txt:^{width * len(kinds)}}")
                    else:
                        cells.append("".join(f"{_pct(self.percent(n, k, split)):>{width}}" for k in kinds))
                lines.append(f"{title:<26}|" + "|".join(cells))
        else:
            for h in self.config.hypotheses:
                label = f"{h.variable} {h.label}"
                cells = ["".join(f"{_pct(self.percent(n, k, variable=h.variable, hypothesis=h.label)):>{width}}"
                                 for k in kinds) for n in sizes]
                lines.append(f"{label:<26}|" + "|".join(cells))
        lines.append("-" * len(sub))
        lines.append("excluded replicates (empty category / non-converged): " + ", ".join(
            f"n={n}: {self.diagnostics[n]['empty_category']}/{self.diagnostics[n]['non_converged']}"
            for n in sizes))
        return "\n".join(lines) + "\n"


def _pct(x) -> str:
    return "-" if x is None or (isinstance(x, float) and np.isnan(x)) else f"{x:.1f}"


def _rate(hits: int, cases: int):
    if cases == 0:
        return float("nan"), float("nan")
    p = hits / cases
    return 100.0 * p, 100.0 * np.sqrt(p * (1.0 - p) / cases)


def _test_kinds(config: ExperimentConfig) -> tuple:
    kinds = tuple(k for k in config.kinds if k in ("uccr", "ccr", "acr"))
    return kinds or ("uccr", "ccr")


def _replicate(config: ExperimentConfig, n: int, rep: int):
    """Fits for one replicate, or the reason it is excluded."""
    truth = config.truth
    rng = np.random.default_rng(replicate_seed(config.seed, n, rep))
    table = generate_dataset(truth, n, rng)
    data = encode_design(table, truth.spec)
    if np.any(data.response_counts() == 0):
        return None, "empty_category"
    try:
        fits = Fits.compute(data, config.fit_options)
    except (ValueError, FloatingPointError, RuntimeError):
        return None, "non_converged"
    if not fits.converged or fits.umle.quasi_separated or fits.cmle.quasi_separated:
        return None, "non_converged"
    return fits, None


def coverage_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Coverage of the full true parameter vector by each requested region kind."""
    truth = config.truth
    target = Target.full_vector(truth.spec)
    region = RegionSpec(target, "acr", config.level, config.df, mixture=config.mixture)
    rows, diags = [], {}
    for n in config.sample_sizes:
        diag = {"used": 0, "empty_category": 0, "non_converged": 0}
        hits = {(k, s): 0 for k in config.kinds for s in ("same", "different")}
        cases = {"same": 0, "different": 0}
        for rep in range(config.replicates):
            fits, why = _replicate(config, n, rep)
            if fits is None:
                diag[why] += 1
                continue
            diag["used"] += 1
            split = "same" if fits.same_mle else "different"
            cases[split] += 1
            pt = cr_membership(truth.params.values, region, fits)
            for k in config.kinds:
                hits[(k, split)] += int(pt.flag(k))
        diags[n] = diag
        for k in config.kinds:
            for split in ("same", "different", "total"):
                if split == "total":
                    h = hits[(k, "same")] + hits[(k, "different")]
                    c = cases["same"] + cases["different"]
                else:
                    h, c = hits[(k, split)], cases[split]
                pct, se = _rate(h, c)
                rows.append({"n": n, "kind": k, "split": split, "cases": c, "hits": h,
                             "percent": pct, "mcse": se})
    return ExperimentReport("coverage", config, tuple(rows), diags)


def _decide(fits: Fits, h: Hypothesis, kind: str, config: ExperimentConfig) -> bool:
    if h.test == "first":
        res = test_no_effect(fits, h.variable, config.level, kind, mixture=config.mixture)
    elif h.test == "second":
        res = test_monotonicity(fits, h.variable, config.level, kind)
    else:
        res = test_direction(fits, h.variable, h.direction, config.level, kind, mixture=config.mixture)
    return res.reject


def rejection_experiment(config: ExperimentConfig, hypotheses: Sequence[Hypothesis] | None = None) -> ExperimentReport:
    """Rejection percentages of the hypothesis tests, per region kind used for the decision.

    Degrees of freedom default to each tested predictor's number of free
    coefficients.
    """
    hyps = tuple(hypotheses) if hypotheses is not None else config.hypotheses
    if hypotheses is not None:
        config = ExperimentConfig(**{**config.__dict__, "hypotheses": hyps})
    kinds = _test_kinds(config)
    rows, diags = [], {}
    for n in config.sample_sizes:
        diag = {"used": 0, "empty_category": 0, "non_converged": 0}
        hits = {(h.variable, h.label, k): 0 for h in hyps for k in kinds}
        for rep in range(config.replicates):
            fits, why = _replicate(config, n, rep)
            if fits is None:
                diag[why] += 1
                continue
            diag["used"] += 1
            for h in hyps:
                for k in kinds:
                    hits[(h.variable, h.label, k)] += int(_decide(fits, h, k, config))
        diags[n] = diag
        for h in hyps:
            for k in kinds:
                c = diag["used"]
                hh = hits[(h.variable, h.label, k)]
                pct, se = _rate(hh, c)
                rows.append({"n": n, "variable": h.variable, "hypothesis": h.label, "kind": k,
                             "cases": c, "hits": hh, "percent": pct, "mcse": se})
    return ExperimentReport("rejection", config, tuple(rows), diags)
