"""Likelihood-ratio and Wald inference, profile confidence regions and the hypothesis tests.

Four region kinds are supported for a target (a coefficient block, contrasts
within a block, or the whole parameter vector):

* ``ucr``: profile likelihood region around the UMLE, nuisance parameters
  profiled without constraints;
* ``uccr``: the part of the UCR that satisfies the monotonicity constraints;
* ``ccr``: region around the CMLE, nuisance parameters profiled under the
  monotonicity constraints, defined only at monotone candidates;
* ``acr``: union of UCCR and CCR.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import optimize, special, stats

from .estimation import (
    ConvergenceError,
    FitOptions,
    FitResult,
    InfeasibleError,
    Target,
    fit_constrained,
    fit_partially_constrained,
    fit_sign_pattern,
    fit_unconstrained,
    profile_nuisance,
)
from .model import (
    Constraint,
    DesignData,
    Direction,
    ModelSpec,
    ParameterVector,
    Role,
    check_membership,
    classify_block,
    log_likelihood,
)

__all__ = [
    "chi2_quantile",
    "mixture_quantile",
    "LinearHypothesis",
    "lr_statistic",
    "wald_statistic",
    "wald_ci",
    "Fits",
    "RegionSpec",
    "PointMembership",
    "RegionGrid",
    "cr_membership",
    "cr_grid",
    "HypothesisDecision",
    "test_no_effect",
    "test_monotonicity",
    "test_non_monotonicity",
    "test_direction",
    "CaseResult",
    "classify_case",
    "KINDS",
]

log = logging.getLogger(__name__)

KINDS = ("ucr", "uccr", "ccr", "acr")
_KIND_ALIASES = {"umle": "uccr", "cmle": "ccr"}
SAME_TOL = 1e-8
NEG_TOL = 1e-8
NO_P_VALUE = "decision-only (no valid p-value)"


# ---------------------------------------------------------------------------
# quantiles
# ---------------------------------------------------------------------------

def _check_quantile_args(r, prob):
    if isinstance(r, bool) or int(r) != r or r < 1:
        raise ValueError("degrees of freedom must be a positive integer")
    if not 0.0 < prob < 1.0:
        raise ValueError("probability must lie strictly between 0 and 1")


def chi2_quantile(r: int, prob: float) -> float:
    """Quantile of the chi-squared distribution with ``r`` degrees of freedom.

    Inverts the regularized lower incomplete gamma function,
    ``F(x) = P(r/2, x/2)``.
    """
    _check_quantile_args(r, prob)
    return float(2.0 * special.gammaincinv(r / 2.0, prob))


def mixture_quantile(r: int, prob: float) -> float:
    """Quantile of the equal mixture of chi-squared with ``r`` and ``r - 1`` degrees of freedom.

    Zero degrees of freedom is the point mass at zero, so for ``r = 1`` every
    ``prob <= 0.5`` gives 0.
    """
    _check_quantile_args(r, prob)
    if r == 1:
        return 0.0 if prob <= 0.5 else chi2_quantile(1, 2.0 * prob - 1.0)

    def excess(x):
        return 0.5 * special.gammainc(r / 2.0, x / 2.0) + 0.5 * special.gammainc((r - 1) / 2.0, x / 2.0) - prob

    lo, hi = chi2_quantile(r - 1, prob), chi2_quantile(r, prob)
    return float(optimize.brentq(excess, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps))


def _thresholds(df: int, level: float, mixture: bool):
    q = chi2_quantile(df, level)
    return q, (mixture_quantile(df, level) if mixture else q)


# ---------------------------------------------------------------------------
# classical statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearHypothesis:
    """Null hypothesis ``C gamma = xi`` on the full parameter vector."""

    C: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if xi.shape != (C.shape[0],):
            raise ValueError("xi needs one entry per row of C")
        if C.shape[0] > C.shape[1] or np.linalg.matrix_rank(C) < C.shape[0]:
            raise ValueError("C must have full row rank")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "xi", xi)

    @property
    def r(self) -> int:
        return self.C.shape[0]

    @classmethod
    def block_zero(cls, spec: ModelSpec, name: str) -> "LinearHypothesis":
        sl = spec.block(name)
        C = np.zeros((sl.stop - sl.start, spec.p))
        C[:, sl] = np.eye(sl.stop - sl.start)
        return cls(C, np.zeros(C.shape[0]))


def lr_statistic(full: FitResult, null: FitResult) -> float:
    """Likelihood ratio statistic ``2 [l(full) - l(null)]``, clipped at zero within tolerance."""
    stat = 2.0 * (full.loglik - null.loglik)
    if stat < 0:
        if stat < -max(NEG_TOL, 1e-12 * abs(full.loglik)):
            raise ValueError(
                f"negative likelihood ratio {stat:.3g}: the null fit is better than the full fit, "
                "so either the models are not nested or a fit did not converge"
            )
        stat = 0.0
    return stat


def _covariance(fit: FitResult) -> np.ndarray:
    F = fit.fisher
    if not np.all(np.isfinite(F)):
        raise np.linalg.LinAlgError("Fisher information is not finite")
    cond = np.linalg.cond(F)
    if not np.isfinite(cond) or cond > 1e13:
        raise np.linalg.LinAlgError(f"Fisher information is singular (condition number {cond:.3g})")
    return np.linalg.inv(F)


def wald_statistic(hyp: LinearHypothesis, fit: FitResult) -> float:
    """Wald statistic ``(C g - xi)' [C F^-1 C']^-1 (C g - xi)`` at the fitted value."""
    if hyp.C.shape[1] != fit.spec.p:
        raise ValueError("hypothesis has the wrong number of columns")
    cov = _covariance(fit)
    d = hyp.C @ fit.gamma - hyp.xi
    V = hyp.C @ cov @ hyp.C.T
    return float(max(d @ np.linalg.solve(V, d), 0.0))


def wald_ci(j, level: float, fit: FitResult) -> tuple[float, float]:
    """Symmetric normal-theory interval for coordinate ``j`` (index or parameter name)."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie strictly between 0 and 1")
    if isinstance(j, str):
        j = fit.spec.parameter_names().index(j)
    cov = _covariance(fit)
    se = math.sqrt(cov[j, j])
    z = stats.norm.ppf(0.5 + level / 2.0)
    est = float(fit.gamma[j])
    return est - z * se, est + z * se


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Fits:
    """The data together with the UMLE and CMLE they produce."""

    data: DesignData
    umle: FitResult
    cmle: FitResult
    opts: FitOptions = field(default_factory=FitOptions)

    @classmethod
    def compute(cls, data: DesignData, opts: FitOptions | None = None) -> "Fits":
        opts = opts or FitOptions()
        umle = fit_unconstrained(data, opts=opts)
        return cls(data, umle, fit_constrained(data, opts=opts, umle=umle), opts)

    @property
    def spec(self) -> ModelSpec:
        return self.data.spec

    @property
    def same_mle(self) -> bool:
        return bool(np.max(np.abs(self.umle.gamma - self.cmle.gamma)) <= SAME_TOL)

    @property
    def converged(self) -> bool:
        return self.umle.converged and self.cmle.converged


def default_df(target: Target) -> int:
    """Free parameters of the targeted block(s); a contrast uses its predictor's whole block."""
    spec = target.spec
    if target.full:
        return spec.p
    if target.is_block_selection:
        return sum(spec.predictor(n).n_params for n in target.blocks)
    return spec.predictor(target.predictor).n_params


@dataclass(frozen=True)
class RegionSpec:
    """What to evaluate: target, region kind, level, degrees of freedom and grid.

    ``grid`` holds one ``(lower, upper, step)`` triple per target dimension;
    when omitted, each axis spans the estimate plus or minus ``width`` standard
    errors in ``n_points`` points.
    """

    target: Target
    kind: str = "acr"
    level: float = 0.95
    df: int | None = None
    grid: Sequence | None = None
    mixture: bool = False
    n_points: int = 61
    width: float = 4.0
    max_points: int = 10**6

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind.lower(), self.kind.lower())
        if kind not in KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie strictly between 0 and 1")
        if self.df is not None and (int(self.df) != self.df or self.df < 1):
            raise ValueError("degrees of freedom must be a positive integer")
        if self.grid is not None:
            if len(self.grid) != self.target.r:
                raise ValueError("grid needs one (lower, upper, step) triple per target dimension")
            for lo, hi, step in self.grid:
                if step <= 0 or hi < lo:
                    raise ValueError("grid steps must be positive and bounds ordered")
        if self.n_points < 1:
            raise ValueError("n_points must be positive")

    @property
    def dof(self) -> int:
        return int(self.df) if self.df is not None else default_df(self.target)

    def thresholds(self) -> tuple[float, float]:
        return _thresholds(self.dof, self.level, self.mixture)


@dataclass(frozen=True)
class PointMembership:
    """Profiled statistics and region flags at one candidate value.

    ``lr_monotone`` profiles with the target block restricted to be monotone
    and everything else free; for a plain block target it equals
    ``lr_unconstrained`` at monotone candidates and is infinite otherwise.
    ``lr_constrained`` is NaN where the candidate is not monotone.
    """

    value: np.ndarray
    lr_unconstrained: float
    lr_monotone: float
    lr_constrained: float
    monotone: bool
    direction_class: str
    indeterminate: bool
    ucr: bool = False
    uccr: bool = False
    ccr: bool = False
    acr: bool = False
    unconstrained_params: np.ndarray | None = None
    constrained_params: np.ndarray | None = None

    def flag(self, kind: str) -> bool:
        return bool(getattr(self, _KIND_ALIASES.get(kind.lower(), kind.lower())))

    def with_thresholds(self, q: float, qc: float) -> "PointMembership":
        if self.indeterminate:
            return replace(self, ucr=False, uccr=False, ccr=False, acr=False)
        ucr = self.lr_unconstrained <= q
        uccr = ucr and self.monotone and self.lr_monotone <= q
        ccr = self.monotone and bool(self.lr_constrained <= qc)
        return replace(self, ucr=ucr, uccr=uccr, ccr=ccr, acr=uccr or ccr)


def _clip(stat: float, ll: float) -> tuple[float, bool]:
    """Clip tiny negative statistics; report whether the value was suspicious."""
    if stat >= 0:
        return stat, False
    return 0.0, stat < -max(NEG_TOL, 1e-10 * abs(ll))


def _monotone_names(target: Target) -> list[str]:
    spec = target.spec
    if target.full:
        return [p.name for p in spec.constrained]
    names = list(target.blocks) if target.is_block_selection else [target.predictor]
    return [n for n in names if spec.predictor(n).is_constrained]


def _block_monotone(spec: ModelSpec, name: str, block) -> bool:
    cls = classify_block(block)
    return any(cls in ("both", d.value) for d in spec.predictor(name).allowed_directions)


def _class_of(target: Target, gamma) -> str:
    if target.full or target.predictor is None or gamma is None:
        return ""
    spec = target.spec
    if spec.predictor(target.predictor).role is not Role.ORDINAL:
        return ""
    return classify_block(np.asarray(gamma)[spec.block(target.predictor)])


def _evaluate(fits: Fits, target: Target, value, start_u=None, start_c=None) -> PointMembership:
    spec = target.spec
    data = fits.data
    value = np.atleast_1d(np.asarray(value, dtype=float))
    lu, lc = fits.umle.loglik, fits.cmle.loglik
    if target.full:
        try:
            ll = log_likelihood(value, data)
        except (ValueError, FloatingPointError):
            ll = -np.inf
        mono = bool(check_membership(value, spec))
        su, bad_u = _clip(2 * (lu - ll), lu)
        sc, bad_c = _clip(2 * (lc - ll), lc) if mono else (np.nan, False)
        return PointMembership(value, su, su if mono else np.inf, sc, mono,
                               _class_of(target, value), bad_u or bad_c, unconstrained_params=value)

    opts = fits.opts
    start_u = fits.umle.gamma if start_u is None else start_u
    start_c = fits.cmle.gamma if start_c is None else start_c
    try:
        pu = profile_nuisance(data, target, value, "unconstrained", start_u, opts)
    except (ConvergenceError, FloatingPointError):
        return PointMembership(value, np.nan, np.nan, np.nan, False, "", True)
    indeterminate = not pu.converged
    su, bad = _clip(2 * (lu - pu.loglik), lu)
    indeterminate |= bad
    cls = _class_of(target, pu.params)
    need = _monotone_names(target)
    pc_params = None
    if check_membership(pu.params, spec):
        # the unconstrained profile is feasible, so it also solves the constrained problems
        mono, sm, pc, pc_params = True, su, pu, pu.params
    elif not need:
        mono, sm, pc = True, su, None
    elif target.is_block_selection:
        mono = all(_block_monotone(spec, n, pu.params[spec.block(n)]) for n in need)
        sm, pc = (su if mono else np.inf), None
    else:
        try:
            pm = profile_nuisance(data, target, value, "monotone-target", start_u, opts)
            mono = True
            sm, bad = _clip(2 * (lu - pm.loglik), lu)
            sm = max(sm, su)
            indeterminate |= bad or not pm.converged
        except InfeasibleError:
            mono, sm = False, np.inf
        except ConvergenceError:
            mono, sm, indeterminate = False, np.nan, True
        pc = None
    sc = np.nan
    if mono:
        if pc is None:
            try:
                pc = profile_nuisance(data, target, value, "constrained", start_c, opts)
                indeterminate |= not pc.converged
            except InfeasibleError:
                pc = None
            except ConvergenceError:
                pc, indeterminate = None, True
        if pc is not None:
            sc, bad = _clip(2 * (lc - pc.loglik), lc)
            indeterminate |= bad
            pc_params = pc.params
        elif not indeterminate:
            sc = np.inf
    return PointMembership(value, su, sm, sc, mono, cls, bool(indeterminate),
                           unconstrained_params=pu.params, constrained_params=pc_params)


def cr_membership(value, region: RegionSpec, fits: Fits) -> PointMembership:
    """Statistics and membership flags for one candidate value of the target."""
    if region.target.spec != fits.spec:
        raise ValueError("region and fits refer to different models")
    q, qc = region.thresholds()
    return _evaluate(fits, region.target, value).with_thresholds(q, qc)


def _target_se(target: Target, fit: FitResult) -> np.ndarray:
    try:
        cov = _covariance(fit)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(fit.fisher)
    if target.full:
        V = cov
    else:
        k1 = target.spec.n_alpha
        V = target.C @ cov[k1:, k1:] @ target.C.T
    return np.sqrt(np.maximum(np.diag(V), 1e-12))


def default_axes(region: RegionSpec, fits: Fits) -> list[np.ndarray]:
    """Estimate plus or minus ``width`` SEs, widened to cover the CMLE's neighbourhood too."""
    t = region.target
    cu, cc = t.value(fits.umle.gamma), t.value(fits.cmle.gamma)
    se = _target_se(t, fits.umle)
    lo = np.minimum(cu, cc) - region.width * se
    hi = np.maximum(cu, cc) + region.width * se
    return [np.linspace(a, b, region.n_points) for a, b in zip(lo, hi)]


@dataclass(frozen=True)
class RegionGrid:
    """Region flags over a rectangular grid of target values (row-major over axes)."""

    region: RegionSpec
    axes: tuple
    points: tuple

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points])

    def _col(self, name) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])

    @property
    def lr_unconstrained(self) -> np.ndarray:
        return self._col("lr_unconstrained")

    @property
    def lr_constrained(self) -> np.ndarray:
        return self._col("lr_constrained")

    @property
    def indeterminate(self) -> np.ndarray:
        return self._col("indeterminate").astype(bool)

    @property
    def direction_class(self) -> np.ndarray:
        return self._col("direction_class")

    def members(self, kind: str) -> np.ndarray:
        return np.array([p.flag(kind) for p in self.points], dtype=bool)

    def counts(self) -> dict:
        out = {k: int(self.members(k).sum()) for k in KINDS}
        out["points"] = len(self.points)
        out["indeterminate"] = int(self.indeterminate.sum())
        return out

    def at_level(self, level: float, mixture: bool | None = None) -> "RegionGrid":
        """Same grid and statistics with flags recomputed for another level."""
        region = replace(self.region, level=level,
                         mixture=self.region.mixture if mixture is None else mixture)
        q, qc = region.thresholds()
        return RegionGrid(region, self.axes, tuple(p.with_thresholds(q, qc) for p in self.points))

    def to_csv(self, dest=None) -> str:
        """Write the grid as CSV; returns the text and also writes it to ``dest`` if given."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axis1", "axis2", "lr_unconstrained", "lr_constrained", "ucr", "uccr",
                    "ccr", "acr", "direction_class", "indeterminate"])
        for p in self.points:
            v = p.value
            w.writerow([
                _fmt(v[0]), _fmt(v[1]) if v.size > 1 else "",
                _fmt(p.lr_unconstrained), _fmt(p.lr_constrained),
                int(p.ucr), int(p.uccr), int(p.ccr), int(p.acr),
                p.direction_class, int(p.indeterminate),
            ])
        text = buf.getvalue()
        if dest is not None:
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.10g}"


def cr_grid(region: RegionSpec, fits: Fits) -> RegionGrid:
    """Evaluate every grid point of a one- or two-dimensional target."""
    t = region.target
    if t.r > 2:
        raise ValueError("grids need a one- or two-dimensional target; use contrasts for larger blocks")
    if region.target.spec != fits.spec:
        raise ValueError("region and fits refer to different models")
    if region.grid is None:
        axes = default_axes(region, fits)
    else:
        axes = [lo + step * np.arange(int(math.floor((hi - lo) / step + 1e-9)) + 1)
                for lo, hi, step in region.grid]
    size = int(np.prod([len(a) for a in axes]))
    if size > region.max_points:
        raise ValueError(f"grid has {size} points, above the cap of {region.max_points}")
    q, qc = region.thresholds()
    points = []
    start_u, start_c = fits.umle.gamma, fits.cmle.gamma
    for combo in itertools.product(*axes):
        pt = _evaluate(fits, t, np.array(combo), start_u, start_c)
        if not pt.indeterminate and pt.unconstrained_params is not None:
            start_u = pt.unconstrained_params
        if not pt.indeterminate and pt.constrained_params is not None:
            start_c = pt.constrained_params
        points.append(pt.with_thresholds(q, qc))
    return RegionGrid(region, tuple(np.asarray(a) for a in axes), tuple(points))


# ---------------------------------------------------------------------------
# tests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisDecision:
    hypothesis: str
    variable: str
    reject: bool
    statistic: float
    threshold: float
    df: int
    kind: str
    level: float
    p_value: float | None = None
    direction: str | None = None
    note: str = ""

    @property
    def decision(self) -> str:
        return "REJECT" if self.reject else "FAIL TO REJECT"


def _kind(kind: str) -> str:
    k = _KIND_ALIASES.get(kind.lower(), kind.lower())
    if k not in KINDS:
        raise ValueError(f"unknown region kind {kind!r}")
    return k


def _stat_for(pt: PointMembership, kind: str) -> float:
    if kind in ("ucr", "uccr"):
        return pt.lr_unconstrained if kind == "ucr" else pt.lr_monotone
    if kind == "ccr":
        return pt.lr_constrained
    # acr: the smaller of the two routes to membership
    return float(np.nanmin([pt.lr_monotone, pt.lr_constrained]))


def test_no_effect(fits: Fits, variable: str, level: float = 0.95, kind: str = "uccr",
                   df: int | None = None, mixture: bool = False) -> HypothesisDecision:
    """Likelihood ratio test of a zero coefficient block.

    ``kind="UMLE"`` (alias of ``uccr``) compares against the UMLE with
    unconstrained profiling; ``kind="CMLE"`` (alias of ``ccr``) against the
    CMLE with constrained profiling.  The zero block is monotone, so the
    decision is membership of zero in the corresponding region.
    """
    k = _kind(kind)
    target = Target.block(fits.spec, variable)
    region = RegionSpec(target, k, level, df, mixture=mixture)
    pt = cr_membership(np.zeros(target.r), region, fits)
    stat = _stat_for(pt, k)
    q, qc = region.thresholds()
    thr = qc if k == "ccr" else q
    p = float(stats.chi2.sf(stat, region.dof)) if np.isfinite(stat) else None
    note = "indeterminate profile" if pt.indeterminate else ""
    return HypothesisDecision("no-effect", variable, not pt.flag(k), float(stat), thr, region.dof, k,
                              level, p, None, note)


def _promoted(spec: ModelSpec, variable: str) -> ModelSpec:
    pred = spec.predictor(variable)
    if pred.role is not Role.ORDINAL:
        raise ValueError(f"{variable!r} is not an ordinal predictor")
    if not pred.is_constrained:
        return spec.with_constraints({variable: Constraint.EITHER})
    return spec


def test_monotonicity(fits: Fits, variable: str, level: float = 0.95, kind: str = "uccr",
                      df: int | None = None) -> HypothesisDecision:
    """Test the null that ``variable`` is monotone (in a direction its regime allows).

    Rejects when no monotone candidate lies in the UCR, i.e. when the best
    fit with this block monotone and all other blocks free fails the UCR
    inequality.  A CCR or ACR contains the CMLE, so those kinds never reject.
    No p-value is reported.
    """
    k = _kind(kind)
    spec = _promoted(fits.spec, variable)
    r = spec.predictor(variable).n_params
    dof = int(df) if df is not None else r
    q = chi2_quantile(dof, level)
    if k in ("ccr", "acr"):
        return HypothesisDecision("monotonicity", variable, False, 0.0, q, dof, k, level, None, None,
                                  NO_P_VALUE + "; region contains the CMLE")
    only = spec.with_constraints({p.name: Constraint.UNCONSTRAINED for p in spec.constrained
                                  if p.name != variable})
    data = DesignData(only, fits.data.z, fits.data.X)
    umle = replace(fits.umle, params=ParameterVector(only, fits.umle.gamma))
    best = fit_constrained(data, only, fits.opts, umle=umle)
    stat, _ = _clip(2 * (fits.umle.loglik - best.loglik), fits.umle.loglik)
    return HypothesisDecision("monotonicity", variable, bool(stat > q), float(stat), q, dof, k, level,
                              None, best.directions.get(variable, Direction.ISO).value, NO_P_VALUE)


def test_non_monotonicity(fits: Fits, variable: str, level: float = 0.95,
                          df: int | None = None) -> HypothesisDecision:
    """Reverse test: rejects the null of a non-monotone block when no such block lies in the UCR.

    The closure of the non-monotone set is the union over ordered pairs of
    increments ``(i, j)`` of ``{d_i <= 0, d_j >= 0}``; the likelihood is
    maximized on each piece with all other blocks free.
    """
    spec = fits.spec
    pred = spec.predictor(variable)
    if pred.role is not Role.ORDINAL:
        raise ValueError(f"{variable!r} is not an ordinal predictor")
    r = pred.n_params
    dof = int(df) if df is not None else r
    q = chi2_quantile(dof, level)
    lu = fits.umle.loglik
    if classify_block(fits.umle.block(variable)) == "neither":
        stat = 0.0
    elif r < 2:
        stat = np.inf
    else:
        free = spec.with_constraints({p.name: Constraint.UNCONSTRAINED for p in spec.constrained})
        data = DesignData(free, fits.data.z, fits.data.X)
        best = -np.inf
        for i, j in itertools.permutations(range(r), 2):
            codes = np.zeros(r)
            codes[i], codes[j] = -1.0, 1.0
            res = fit_sign_pattern(data, {variable: codes}, fits.umle.gamma, fits.opts)
            best = max(best, res.loglik)
        stat, _ = _clip(2 * (lu - best), lu)
    return HypothesisDecision("non-monotonicity", variable, bool(stat > q), float(stat), q, dof, "ucr",
                              level, None, None, NO_P_VALUE)


def test_direction(fits: Fits, variable: str, direction, level: float = 0.95, kind: str = "ccr",
                   df: int | None = None, mixture: bool = False) -> HypothesisDecision:
    """Test the null that ``variable`` acts in the given monotone direction.

    Fits the PMLE with that direction fixed and rejects iff its block lies
    outside the chosen region.
    """
    k = _kind(kind)
    direction = Direction(direction)
    pmle = fit_partially_constrained(fits.data, fits.spec, {variable: direction}, fits.opts,
                                     umle=fits.umle)
    target = Target.block(fits.spec, variable)
    region = RegionSpec(target, k, level, df, mixture=mixture)
    pt = cr_membership(pmle.block(variable), region, fits)
    q, qc = region.thresholds()
    note = NO_P_VALUE + ("; indeterminate profile" if pt.indeterminate else "")
    return HypothesisDecision("direction", variable, not pt.flag(k), float(_stat_for(pt, k)),
                              qc if k == "ccr" else q, region.dof, k, level, None, direction.value, note)


for _f in (test_no_effect, test_monotonicity, test_non_monotonicity, test_direction):
    _f.__test__ = False


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CaseResult:
    case: int
    same_mle: bool
    low_confidence: bool
    indeterminate_share: float


def classify_case(fits: Fits, grid: RegionGrid) -> CaseResult:
    """Which of the six UMLE/CMLE/region configurations holds for the grid's predictor.

    1: same MLE, all UCR members share its direction; 2: same MLE, some
    members non-monotone; 3: same MLE, some members of the opposite
    direction; 4: different MLEs, monotone and other members present;
    5: different MLEs, no monotone member; 6: different MLEs although the
    UMLE block is itself monotone (the difference comes from other blocks).
    """
    name = grid.region.target.predictor
    if name is None or fits.spec.predictor(name).role is not Role.ORDINAL:
        raise ValueError("case classification needs a grid over one ordinal predictor")
    ind = grid.indeterminate
    share = float(ind.mean()) if ind.size else 0.0
    low = share > 0.01
    members = grid.members("ucr") & ~ind
    classes = grid.direction_class[members]
    same = fits.same_mle
    if not same:
        if classify_block(fits.umle.block(name)) != "neither":
            return CaseResult(6, same, low, share)
        if not np.any(grid.members("uccr") & ~ind):
            return CaseResult(5, same, low, share)
        return CaseResult(4, same, low, share)
    own = classify_block(fits.cmle.block(name))
    if own == "both":
        own = "iso"
    opposite = "anti" if own == "iso" else "iso"
    if np.any(classes == opposite):
        return CaseResult(3, same, low, share)
    if np.any(classes == "neither"):
        return CaseResult(2, same, low, share)
    return CaseResult(1, same, low, share)
