"""Run configuration files and report formatting for the command line tool.

A run config is YAML::

    data: schools.csv            # relative paths resolve against the config file
    columns:
      perf2019: {role: response, levels: [Insufficient, Medium-Low, Medium, High]}
      perf2016: {role: ordinal, levels: [Insufficient, Medium-Low, Medium, High], constraint: either}
      funding:  {role: ordinal, levels: [Public, Mixed, Private], constraint: either}
      regisRat: {role: numeric}
    inference: {level: 0.95, df: null, kind: null, mixture: false, grid_points: 61, grid_width: 4}
    region: {variable: funding}
    test: {variable: funding, hypothesis: no-effect}
    output: results
    seed: 0

Ordinal level order is taken from the declaration, never sorted.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import yaml

from .datasets import bundled_path, read_csv
from .estimation import FitOptions, FitResult
from .inference import KINDS, wald_ci
from .model import Constraint, DesignData, ModelSpec, PredictorSpec, Role, encode_design

__all__ = [
    "ConfigError",
    "DataError",
    "RunConfig",
    "load_yaml",
    "resolve_config_path",
    "load_data",
    "fit_report",
    "estimates_csv",
    "read_estimates",
]

HYPOTHESES = ("no-effect", "monotonicity", "non-monotonicity", "direction")


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


def resolve_config_path(path: str) -> Path:
    """A filesystem path, or the name of a config bundled with the package."""
    p = Path(path)
    if p.exists():
        return p
    for candidate in (path, f"{path}.yaml"):
        b = bundled_path(candidate)
        if b.exists():
            return b
    raise ConfigError(f"config file {path!r} not found")


def load_yaml(path) -> dict:
    p = resolve_config_path(str(path))
    try:
        with open(p, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as err:
        raise ConfigError(f"{p}: invalid YAML ({err})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: expected a mapping at top level")
    doc.setdefault("_base", str(p.parent))
    return doc


@dataclass(frozen=True)
class RunConfig:
    spec: ModelSpec
    data: Path | None
    level: float = 0.95
    df: int | None = None
    kind: str | None = None
    mixture: bool = False
    grid_points: int = 61
    grid_width: float = 4.0
    grid: tuple | None = None
    region: Mapping = field(default_factory=dict)
    test: Mapping = field(default_factory=dict)
    output: Path = Path("poclm_out")
    seed: int = 0
    fit_options: FitOptions = field(default_factory=FitOptions)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "RunConfig":
        base = Path(doc.get("_base", "."))
        known = {"_base", "data", "columns", "inference", "region", "test", "output", "seed", "fit"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        spec = _spec_from_columns(doc.get("columns"))
        inf = doc.get("inference") or {}
        if not isinstance(inf, Mapping):
            raise ConfigError("'inference' must be a mapping")
        unknown = set(inf) - {"level", "df", "kind", "mixture", "grid_points", "grid_width", "grid"}
        if unknown:
            raise ConfigError(f"unknown inference settings {sorted(unknown)}")
        data = doc.get("data")
        fit = doc.get("fit") or {}
        try:
            opts = FitOptions(**fit)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"invalid fit settings: {err}") from None
        cfg = cls(
            spec=spec,
            data=None if data is None else (base / str(data)),
            level=float(inf.get("level", 0.95)),
            df=inf.get("df"),
            kind=None if inf.get("kind") is None else str(inf["kind"]).lower(),
            mixture=bool(inf.get("mixture", False)),
            grid_points=int(inf.get("grid_points", 61)),
            grid_width=float(inf.get("grid_width", 4.0)),
            grid=None if inf.get("grid") is None else tuple(tuple(map(float, g)) for g in inf["grid"]),
            region=dict(doc.get("region") or {}),
            test=dict(doc.get("test") or {}),
            output=Path(str(doc.get("output", "poclm_out"))),
            seed=int(doc.get("seed", 0)),
            fit_options=opts,
        )
        cfg.validate()
        return cfg

    def validate(self):
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie strictly between 0 and 1")
        if self.df is not None and (int(self.df) != self.df or self.df < 1):
            raise ConfigError("df must be a positive integer")
        if self.kind is not None and self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}")
        names = {p.name for p in self.spec.predictors}
        for section in (self.region, self.test):
            var = section.get("variable")
            if var is not None and var not in names:
                raise ConfigError(f"variable {var!r} is not a declared predictor")
        hyp = self.test.get("hypothesis")
        if hyp is not None and hyp not in HYPOTHESES:
            raise ConfigError(f"hypothesis must be one of {HYPOTHESES}")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")


def _spec_from_columns(columns) -> ModelSpec:
    if not isinstance(columns, Mapping) or not columns:
        raise ConfigError("config needs a 'columns' mapping")
    response, levels, preds = None, None, []
    for name, decl in columns.items():
        name = str(name)
        if isinstance(decl, str):
            decl = {"role": decl}
        if not isinstance(decl, Mapping) or "role" not in decl:
            raise ConfigError(f"column {name!r} needs a role")
        role = str(decl["role"]).lower()
        lv = decl.get("levels")
        lv = None if lv is None else tuple(str(x) for x in lv)
        try:
            if role == "response":
                if response is not None:
                    raise ConfigError("exactly one response column is allowed")
                if not lv or len(lv) < 2:
                    raise ConfigError("the response needs at least two declared levels")
                response, levels = name, lv
            elif role == "ordinal":
                if not lv:
                    raise ConfigError(f"ordinal column {name!r} needs its ordered levels")
                preds.append(PredictorSpec.ordinal(name, lv, Constraint(str(decl.get("constraint", "either")).lower())))
            elif role == "nominal":
                if not lv:
                    raise ConfigError(f"nominal column {name!r} needs its levels")
                preds.append(PredictorSpec.nominal(name, lv))
            elif role == "numeric":
                preds.append(PredictorSpec.numeric(name))
            else:
                raise ConfigError(f"unknown role {role!r} for column {name!r}")
        except ConfigError:
            raise
        except ValueError as err:
            raise ConfigError(f"column {name!r}: {err}") from None
    if response is None:
        raise ConfigError("exactly one response column is required")
    try:
        return ModelSpec(len(levels), tuple(preds), response=response, response_levels=levels)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def load_data(path, spec: ModelSpec) -> DesignData:
    """Read and encode a CSV.  Missing declared columns are config errors, bad contents data errors."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file {str(path)!r} not found")
    try:
        table = read_csv(path)
    except ValueError as err:
        raise DataError(str(err)) from None
    missing = [c for c in [spec.response, *(p.name for p in spec.predictors)] if c not in table]
    if missing:
        raise ConfigError(f"declared columns {missing} are not in {path.name}")
    try:
        return encode_design(table, spec)
    except (ValueError, KeyError) as err:
        raise DataError(f"{path.name}: {err}") from None


def _num(x: float) -> str:
    return f"{x + 0.0:.5f}"


def fit_report(umle: FitResult, cmle: FitResult, level: float) -> str:
    """Side-by-side UMLE / CMLE table with fit diagnostics and Wald intervals."""
    spec = umle.spec
    names = spec.parameter_names()
    lines = []
    w = max(len(n) for n in names) + 2
    lines.append(f"{'parameter':<{w}}{'UMLE':>12}{'CMLE':>12}")
    lines.append("-" * (w + 24))
    for j, name in enumerate(names):
        lines.append(f"{name:<{w}}{_num(umle.gamma[j]):>12}{_num(cmle.gamma[j]):>12}")
        if j == spec.n_alpha - 1:
            lines.append("")
    lines.append("-" * (w + 24))
    lines.append(f"{'log-likelihood':<{w}}{_num(umle.loglik):>12}{_num(cmle.loglik):>12}")
    lines.append(f"{'converged':<{w}}{str(umle.converged):>12}{str(cmle.converged):>12}")
    lines.append(f"{'iterations':<{w}}{umle.iterations:>12}{cmle.iterations:>12}")
    lines.append(f"{'quasi-separated':<{w}}{str(umle.quasi_separated):>12}{str(cmle.quasi_separated):>12}")
    lines.append("")
    if cmle.directions:
        lines.append("CMLE monotonicity directions and active constraints (beta_2 vs 0, then adjacent pairs):")
        for name, d in cmle.directions.items():
            flags = ", ".join("active" if a else "inactive" for a in cmle.active.get(name, ()))
            lines.append(f"  {name}: {d.value}; {flags}")
        if cmle.tie:
            lines.append("  note: more than one direction assignment attains the maximum; isotonic preferred")
        lines.append("")
    lines.append(f"Wald {100 * level:g}% intervals around the UMLE:")
    try:
        for j, name in enumerate(names):
            lo, hi = wald_ci(j, level, umle)
            lines.append(f"  {name:<{w}}[{_num(lo)}, {_num(hi)}]")
    except np.linalg.LinAlgError as err:
        lines.append(f"  unavailable: {err}")
    if not (umle.converged and cmle.converged):
        lines.append("")
        lines.append("WARNING: at least one fit did not converge: " + "; ".join(
            f"{r.kind.value}: {r.message}" for r in (umle, cmle) if not r.converged))
    return "\n".join(lines) + "\n"


def estimates_csv(umle: FitResult, cmle: FitResult, level: float) -> str:
    spec = umle.spec
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["parameter", "umle", "cmle", "se_umle", "ci_lower", "ci_upper"])
    try:
        se = umle.se
        cis = [wald_ci(j, level, umle) for j in range(spec.p)]
    except np.linalg.LinAlgError:
        se = np.full(spec.p, np.nan)
        cis = [(np.nan, np.nan)] * spec.p
    for j, name in enumerate(spec.parameter_names()):
        wr.writerow([name, repr(float(umle.gamma[j]) + 0.0), repr(float(cmle.gamma[j]) + 0.0),
                     repr(float(se[j])), repr(float(cis[j][0])), repr(float(cis[j][1]))])
    return buf.getvalue()


def read_estimates(path, spec: ModelSpec, column: str = "umle") -> np.ndarray:
    """Parameter vector from an estimates CSV written by ``estimates_csv``."""
    table = read_csv(path)
    names = table.get("parameter")
    if names is None or column not in table:
        raise ConfigError(f"{path}: not an estimates file")
    lookup = dict(zip(names, table[column]))
    try:
        return np.array([float(lookup[n]) for n in spec.parameter_names()])
    except KeyError as err:
        raise ConfigError(f"{path}: missing parameter {err.args[0]!r}") from None
