"""Maximum likelihood under the unconstrained, monotone and direction-fixed parameter sets.

All fitters share one optimizer.  Intercepts are reparametrized as

    alpha_1 = u_0,   alpha_j = alpha_{j-1} + gap + exp(u_{j-1}),

so their strict ordering never has to be enforced explicitly.  A monotone
block is written as the signed cumulative sum of nonnegative increments, so
the isotonic/antitonic cone becomes a box ``v >= 0``; equality at the boundary
is exact.  The resulting bound-constrained problem is solved with a projected
Newton method (exact Hessian, Fisher scoring as fallback).

The non-convex "either direction" set is handled by enumerating direction
assignments, one bound-constrained problem each.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg, optimize

from .model import (
    UNDERFLOW,
    Constraint,
    DesignData,
    Direction,
    ModelSpec,
    ParameterVector,
    Role,
    _hessian_from,
    _Pieces,
    _score_from,
    check_membership,
    classify_block,
    fisher_information,
    log_likelihood,
)

__all__ = [
    "Kind",
    "FitOptions",
    "FitResult",
    "Target",
    "ProfileResult",
    "ConvergenceError",
    "EmptyCategoryError",
    "InfeasibleError",
    "initial_values",
    "fit_unconstrained",
    "fit_direction_constrained",
    "fit_constrained",
    "fit_partially_constrained",
    "profile_nuisance",
    "project_block",
    "fit_sign_pattern",
]

log = logging.getLogger(__name__)

TIE_TOL = 1e-8
# Newton steps longer than this mean the optimum has not been reached
STEP_TOL = 1e-3


class Kind(str, Enum):
    UMLE = "UMLE"
    CMLE = "CMLE"
    DMLE = "DMLE"
    PMLE = "PMLE"


class ConvergenceError(RuntimeError):
    pass


class EmptyCategoryError(ValueError):
    """A response category has no observations; merge or drop it before fitting."""


class InfeasibleError(ValueError):
    """A fixed parameter value is outside the requested constraint set."""


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 200
    gtol: float = 1e-7
    ftol: float = 1e-14
    param_cap: float = 30.0
    alpha_gap: float = 1e-8
    init: np.ndarray | None = None
    init_constrained: np.ndarray | None = None
    max_enumerated: int = 12

    def __post_init__(self):
        if min(self.gtol, self.ftol, self.param_cap, self.alpha_gap) <= 0:
            raise ValueError("tolerances, cap and alpha gap must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass(frozen=True)
class FitResult:
    """Outcome of one fitter.

    ``directions`` holds the monotonicity direction used for every
    constrained ordinal predictor; ``active`` flags, per constrained block,
    which of the inequalities ``beta_2 >= 0, beta_3 >= beta_2, ...`` (or their
    antitonic mirror images) hold with equality.
    """

    kind: Kind
    params: ParameterVector
    loglik: float
    converged: bool
    iterations: int
    fisher: np.ndarray
    directions: dict = field(default_factory=dict)
    active: dict = field(default_factory=dict)
    quasi_separated: bool = False
    tie: bool = False
    grad_norm: float = np.nan
    candidates: dict = field(default_factory=dict)
    message: str = ""

    @property
    def spec(self) -> ModelSpec:
        return self.params.spec

    @property
    def gamma(self) -> np.ndarray:
        return self.params.values

    def block(self, name: str) -> np.ndarray:
        return self.params.block(name)

    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.fisher)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance()))


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def project_block(block, direction: Direction) -> np.ndarray:
    """Euclidean projection of a coefficient block onto the monotone cone of ``direction``."""
    b = direction.sign * np.asarray(block, dtype=float)
    fitted = optimize.isotonic_regression(b, increasing=True).x
    return direction.sign * np.maximum(fitted, 0.0)


def _check_categories(data: DesignData):
    counts = data.response_counts()
    if data.n == 0:
        raise ValueError("empty dataset")
    empty = [j + 1 for j in range(data.spec.k) if counts[j] == 0]
    if empty:
        raise EmptyCategoryError(
            f"response categories {empty} have no observations; merge or drop them before fitting"
        )


def initial_values(data: DesignData) -> np.ndarray:
    """Intercepts from empirical cumulative response proportions, slopes zero."""
    _check_categories(data)
    cum = np.cumsum(data.response_counts())[:-1] / data.n
    g = np.zeros(data.spec.p)
    g[: data.spec.n_alpha] = np.log(cum / (1.0 - cum))
    return g


def _active_flags(beta_block, direction: Direction) -> tuple:
    d = np.diff(np.concatenate(([0.0], beta_block)))
    return tuple(bool(x == 0.0) for x in d)


# ---------------------------------------------------------------------------
# targets of profiling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Target:
    """Linear function of the slope coefficients held fixed while profiling.

    ``C`` has one row per fixed quantity and one column per slope
    coefficient.  ``blocks`` lists predictors whose whole block is fixed when
    the target is a plain block selection; it is empty for general contrasts.
    ``full`` marks the whole parameter vector (intercepts included), for
    which there is nothing left to profile.
    """

    spec: ModelSpec
    C: np.ndarray
    labels: tuple
    blocks: tuple = ()
    predictor: str | None = None
    full: bool = False

    @property
    def r(self) -> int:
        return self.spec.p if self.full else self.C.shape[0]

    @classmethod
    def block(cls, spec: ModelSpec, *names: str) -> "Target":
        rows = []
        labels = []
        all_names = spec.parameter_names()
        for name in names:
            sl = spec.beta_block(name)
            for j in range(sl.start, sl.stop):
                row = np.zeros(spec.q)
                row[j] = 1.0
                rows.append(row)
                labels.append(all_names[spec.n_alpha + j])
        return cls(spec, np.array(rows), tuple(labels), tuple(names),
                   names[0] if len(names) == 1 else None)

    @classmethod
    def contrast(cls, spec: ModelSpec, name: str, rows: Sequence) -> "Target":
        """Contrasts within one predictor's block.

        Each row is either a coefficient vector over the non-baseline levels
        or a mapping ``level -> coefficient`` (the baseline level may appear
        but contributes nothing, its coefficient being zero).
        """
        pred = spec.predictor(name)
        if pred.role is Role.NUMERIC:
            raise ValueError("contrasts need a categorical predictor")
        sl = spec.beta_block(name)
        C = np.zeros((len(rows), spec.q))
        labels = []
        for i, row in enumerate(rows):
            if isinstance(row, Mapping):
                vec = np.zeros(pred.n_params)
                for lev, coef in row.items():
                    if lev not in pred.levels:
                        raise ValueError(f"unknown level {lev!r} of {name!r}")
                    h = pred.levels.index(lev)
                    if h > 0:
                        vec[h - 1] += coef
                parts = [f"{c:+g}*{lev}" for lev, c in row.items()]
                labels.append(f"{name}:" + "".join(parts))
            else:
                vec = np.asarray(row, dtype=float)
                if vec.shape != (pred.n_params,):
                    raise ValueError(f"contrast rows for {name!r} need {pred.n_params} entries")
                labels.append(f"{name}:{list(vec)}")
            C[i, sl] = vec
        if np.linalg.matrix_rank(C) < C.shape[0]:
            raise ValueError("contrast rows must be linearly independent")
        return cls(spec, C, tuple(labels), (), name)

    @classmethod
    def full_vector(cls, spec: ModelSpec) -> "Target":
        return cls(spec, np.eye(spec.q), tuple(spec.parameter_names()), (), None, True)

    def value(self, gamma) -> np.ndarray:
        g = np.asarray(gamma, dtype=float)
        if self.full:
            return g.copy()
        return self.C @ g[self.spec.n_alpha:]

    @property
    def is_block_selection(self) -> bool:
        return bool(self.blocks)


# ---------------------------------------------------------------------------
# the reparametrized subproblem
# ---------------------------------------------------------------------------

class _Layout:
    """Map from optimizer coordinates u = (intercept part, v) to the parameter vector.

    Slopes of unstructured coordinates are ``b0 + Mg @ v[gen_cols]``.  A block
    with sign restrictions is ``cumsum(signs * increments)``: each increment
    is either pinned or an entry of ``v``, bounded below by zero where the
    pattern restricts its sign.  ``M`` is the constant Jacobian d beta / d v.
    """

    def __init__(self, spec: ModelSpec, patterns: Mapping[str, object], pins: Mapping[str, np.ndarray]):
        self.spec = spec
        gen_coords = []
        gen_cols = []
        # [slice in beta, signs, bounded, fixed increments, var positions, v columns]
        self.inc = []
        self.b0 = np.zeros(spec.q)
        col = 0
        for p in spec.predictors:
            sl = spec.beta_block(p.name)
            r = sl.stop - sl.start
            if p.name in pins:
                self.b0[sl] = pins[p.name]
                continue
            if p.name in patterns:
                codes = _pattern_codes(patterns[p.name], r)
                signs = np.where(codes < 0, -1.0, 1.0)
                cols = list(range(col, col + r))
                col += r
                self.inc.append([sl, signs, codes != 0, np.zeros(r), np.arange(r), cols])
            else:
                for j in range(sl.start, sl.stop):
                    gen_coords.append(j)
                    gen_cols.append(col)
                    col += 1
        self.m = col
        self.gen_coords = np.array(gen_coords, dtype=np.intp)
        self.gen_cols = np.array(gen_cols, dtype=np.intp)
        self.Mg = np.eye(len(gen_cols))
        self.eq = None  # residual equalities A v = rhs, handed to SLSQP
        self._rebuild()

    def _rebuild(self):
        M = np.zeros((self.spec.q, self.m))
        bounded = np.zeros(self.m, dtype=bool)
        if self.gen_cols.size:
            M[np.ix_(self.gen_coords, self.gen_cols)] = self.Mg
        for sl, signs, bnd, _, pos, cols in self.inc:
            r = sl.stop - sl.start
            for pp, c in zip(pos, cols):
                M[sl.start + pp:sl.stop, c] = signs[pp]
                bounded[c] = bnd[pp]
        self.M = M
        self.bounded = bounded

    def beta(self, v) -> np.ndarray:
        beta = self.b0.copy()
        if self.gen_cols.size:
            beta[self.gen_coords] += self.Mg @ v[self.gen_cols]
        for sl, signs, _, fixed, pos, cols in self.inc:
            inc = fixed.copy()
            inc[pos] = v[cols]
            beta[sl] = np.cumsum(signs * inc)
        return beta

    def start_v(self, beta_guess) -> np.ndarray:
        v = np.zeros(self.m)
        if self.gen_cols.size:
            rhs = (beta_guess - self.b0)[self.gen_coords]
            v[self.gen_cols] = np.linalg.lstsq(self.Mg, rhs, rcond=None)[0]
        for sl, signs, bnd, _, pos, cols in self.inc:
            blk = beta_guess[sl]
            if np.all(bnd) and np.all(signs == signs[0]):
                blk = project_block(blk, Direction.ISO if signs[0] > 0 else Direction.ANTI)
            inc = signs * np.diff(np.concatenate(([0.0], blk)))
            inc = np.where(bnd, np.maximum(inc, 0.0), inc)
            v[cols] = inc[pos]
        return v

    # -- equality constraints -------------------------------------------------

    def impose(self, C: np.ndarray, c: np.ndarray):
        """Restrict to C beta = c.  Raises InfeasibleError if that contradicts the bounds."""
        A = C @ self.M
        rhs = c - C @ self.beta(np.zeros(self.m))
        tol = 1e-12 * max(1.0, float(np.max(np.abs(c), initial=0.0)))
        pins = {}
        leftover = []
        for i in range(A.shape[0]):
            nz = np.nonzero(np.abs(A[i]) > 1e-14)[0]
            if nz.size == 0:
                if abs(rhs[i]) > 1e-9 * max(1.0, abs(c[i])):
                    raise InfeasibleError("constraint cannot be met")
                continue
            if nz.size == 1:
                j = int(nz[0])
                val = rhs[i] / A[i, j]
                if j in pins and abs(pins[j] - val) > 1e-9 * max(1.0, abs(val)):
                    raise InfeasibleError("inconsistent constraints")
                pins[j] = val
            else:
                leftover.append(i)
        for j, val in pins.items():
            if self.bounded[j]:
                if val < -tol:
                    raise InfeasibleError("fixed value violates a sign restriction")
                pins[j] = max(val, 0.0)
        if pins:
            self._pin_columns(pins)
        if leftover:
            A = C[leftover] @ self.M
            rhs = c[leftover] - C[leftover] @ self.beta(np.zeros(self.m))
            involved = np.nonzero(np.any(np.abs(A) > 1e-14, axis=0))[0]
            if set(involved.tolist()) <= set(self.gen_cols.tolist()):
                self._nullspace(A, rhs, involved)
            else:
                self.eq = (A, rhs)

    def _pin_columns(self, pins):
        keep = [j for j in range(self.m) if j not in pins]
        remap = {old: new for new, old in enumerate(keep)}
        gen_keep, new_gen_cols = [], []
        for idx, cidx in enumerate(self.gen_cols):
            if cidx in pins:
                self.b0[self.gen_coords] += self.Mg[:, idx] * pins[cidx]
            else:
                gen_keep.append(idx)
                new_gen_cols.append(remap[cidx])
        self.Mg = self.Mg[:, gen_keep]
        self.gen_cols = np.array(new_gen_cols, dtype=np.intp)
        for entry in self.inc:
            _, _, _, fixed, pos, cols = entry
            new_pos, new_cols = [], []
            for pp, cc in zip(pos, cols):
                if cc in pins:
                    fixed[pp] = pins[cc]
                else:
                    new_pos.append(pp)
                    new_cols.append(remap[cc])
            entry[4] = np.array(new_pos, dtype=np.intp)
            entry[5] = new_cols
        self.m = len(keep)
        self._rebuild()

    def _nullspace(self, A, rhs, involved):
        # v_J = v_p + N w over unstructured columns J
        AJ = A[:, involved]
        vp = np.linalg.lstsq(AJ, rhs, rcond=None)[0]
        if np.max(np.abs(AJ @ vp - rhs), initial=0.0) > 1e-8 * max(1.0, float(np.max(np.abs(rhs)))):
            raise InfeasibleError("linear constraints are inconsistent")
        N = linalg.null_space(AJ)
        pos = [int(np.nonzero(self.gen_cols == j)[0][0]) for j in involved]
        others = [i for i in range(self.gen_cols.size) if i not in pos]
        self.b0[self.gen_coords] += self.Mg[:, pos] @ vp
        self.Mg = np.hstack([self.Mg[:, others], self.Mg[:, pos] @ N])
        inc_cols = sorted(c for e in self.inc for c in e[5])
        n_gen = len(others) + N.shape[1]
        renum = {c: n_gen + i for i, c in enumerate(inc_cols)}
        for e in self.inc:
            e[5] = [renum[c] for c in e[5]]
        self.gen_cols = np.arange(n_gen, dtype=np.intp)
        self.m = n_gen + len(inc_cols)
        self._rebuild()


def _pattern_codes(pattern, r: int) -> np.ndarray:
    """Per-increment sign codes: +1 nonnegative, -1 nonpositive, 0 free."""
    if isinstance(pattern, (Direction, str)):
        return np.full(r, Direction(pattern).sign)
    codes = np.asarray(pattern, dtype=float)
    if codes.shape != (r,) or not np.all(np.isin(codes, (-1.0, 0.0, 1.0))):
        raise ValueError("sign pattern needs one code in {-1, 0, 1} per increment")
    return codes


class _Objective:
    """Log-likelihood, gradient and Hessian in optimizer coordinates."""

    def __init__(self, data: DesignData, layout: _Layout, gap: float):
        self.data = data
        self.layout = layout
        self.gap = gap
        self.k1 = data.spec.n_alpha

    def gamma(self, u) -> np.ndarray:
        k1 = self.k1
        alpha = np.empty(k1)
        alpha[0] = u[0]
        with np.errstate(over="ignore"):
            for j in range(1, k1):
                alpha[j] = alpha[j - 1] + self.gap + np.exp(u[j])
        return np.concatenate([alpha, self.layout.beta(u[k1:])])

    def u_from(self, gamma) -> np.ndarray:
        k1 = self.k1
        alpha = gamma[:k1]
        t = np.empty(k1)
        t[0] = alpha[0]
        gaps = np.diff(alpha) - self.gap
        t[1:] = np.log(np.maximum(gaps, 1e-12))
        return np.concatenate([t, self.layout.start_v(gamma[k1:])])

    def loglik(self, u) -> float:
        g = self.gamma(u)
        if not np.all(np.isfinite(g)):
            return -np.inf
        try:
            pc = _Pieces(g, self.data)
        except ValueError:
            return -np.inf
        if pc.logp.size and np.min(pc.logp) < np.log(UNDERFLOW):
            return -np.inf
        return pc.loglik()

    def full(self, u):
        """(loglik, gradient, Hessian, Hessian without the reparametrization curvature)."""
        k1 = self.k1
        g = self.gamma(u)
        try:
            pc = _Pieces(g, self.data)
        except ValueError:
            return -np.inf, None, None, None
        if pc.logp.size and np.min(pc.logp) < np.log(UNDERFLOW):
            return -np.inf, None, None, None
        s = _score_from(pc, self.data)
        H = _hessian_from(pc, self.data)
        J = np.zeros((k1, k1))
        J[:, 0] = 1.0
        e = np.exp(u[1:k1])
        for j in range(1, k1):
            J[j:, j] = e[j - 1]
        M = self.layout.M
        grad = np.concatenate([J.T @ s[:k1], M.T @ s[k1:]])
        Haa = J.T @ H[:k1, :k1] @ J
        Hab = J.T @ H[:k1, k1:] @ M
        Hbb = M.T @ H[k1:, k1:] @ M
        Hgn = np.block([[Haa, Hab], [Hab.T, Hbb]])
        curv = np.zeros(k1 + self.layout.m)
        tail = np.cumsum(s[:k1][::-1])[::-1]
        curv[1:k1] = e * tail[1:]
        return pc.loglik(), grad, Hgn + np.diag(curv), Hgn


def _solve_ascent(H, Hgn, g):
    """Newton direction for maximization, falling back to Gauss-Newton and ridge."""
    for A in (-H, -Hgn):
        try:
            cf = linalg.cho_factor(A, check_finite=False)
            return linalg.cho_solve(cf, g, check_finite=False)
        except (linalg.LinAlgError, ValueError):
            continue
    A = -Hgn
    tau = 1e-8 * max(1.0, np.trace(np.abs(A)) / max(1, A.shape[0]))
    for _ in range(40):
        try:
            cf = linalg.cho_factor(A + tau * np.eye(A.shape[0]), check_finite=False)
            return linalg.cho_solve(cf, g, check_finite=False)
        except (linalg.LinAlgError, ValueError):
            tau *= 10.0
    return g / max(1.0, np.max(np.abs(g)))


@dataclass
class _RawFit:
    gamma: np.ndarray
    loglik: float
    converged: bool
    iterations: int
    grad_norm: float
    quasi_separated: bool = False
    message: str = ""


def _diverging(obj, u, g, H, Hgn, bounded) -> bool:
    active = bounded & (u <= 0.0) & (g < 0.0)
    idx = np.nonzero(~active)[0]
    if idx.size == 0:
        return False
    d = _solve_ascent(H[np.ix_(idx, idx)], Hgn[np.ix_(idx, idx)], g[idx])
    return bool(np.max(np.abs(d), initial=0.0) > STEP_TOL)


def _newton(obj: _Objective, u0: np.ndarray, opts: FitOptions) -> _RawFit:
    k1 = obj.k1
    bounded = np.concatenate([np.zeros(k1, dtype=bool), obj.layout.bounded])
    u = u0.copy()
    u[bounded] = np.maximum(u[bounded], 0.0)
    ll, g, H, Hgn = obj.full(u)
    if not np.isfinite(ll):
        raise ConvergenceError("log-likelihood is not finite at the starting values")
    it = 0
    pg_norm = np.inf
    message = "iteration limit reached"
    converged = False
    quasi_sep = False
    for it in range(1, opts.max_iter + 1):
        at_bound = bounded & (u <= 0.0) & (g < 0.0)
        pg = np.where(at_bound, 0.0, g)
        pg_norm = float(np.max(np.abs(pg), initial=0.0))
        gamma = obj.gamma(u)
        if np.max(np.abs(gamma)) > opts.param_cap:
            quasi_sep, message = True, "parameter magnitude cap exceeded (quasi-separation)"
            break
        # active set with a shrinking threshold
        proj = u + g
        proj[bounded] = np.maximum(proj[bounded], 0.0)
        eps = min(1e-6, float(np.linalg.norm(u - proj)))
        active = bounded & (u <= eps) & (g < 0.0)
        free = ~active
        d = np.zeros_like(u)
        if np.any(free):
            idx = np.nonzero(free)[0]
            d[idx] = _solve_ascent(H[np.ix_(idx, idx)], Hgn[np.ix_(idx, idx)], g[idx])
        # a small gradient alone is not enough: along a separating direction
        # it decays geometrically while the Newton step stays of order one
        if pg_norm <= opts.gtol and np.max(np.abs(d), initial=0.0) <= STEP_TOL:
            converged, message = True, "gradient tolerance reached"
            it -= 1
            break
        t = 1.0
        accepted = False
        while t > 1e-12:
            un = u + t * d
            un[active] = 0.0
            un[bounded] = np.maximum(un[bounded], 0.0)
            lln = obj.loglik(un)
            pred = float(g @ (un - u))
            if np.isfinite(lln) and lln >= ll + 1e-4 * max(pred, 0.0) and lln >= ll:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if pg_norm <= 1e-4 * max(1.0, abs(ll)) ** 0.5:
                converged, message = True, "no further ascent at machine precision"
            else:
                message = "line search failed"
            break
        change = lln - ll
        u = un
        ll, g, H, Hgn = obj.full(u)
        if change <= opts.ftol * max(1.0, abs(ll)):
            at_bound = bounded & (u <= 0.0) & (g < 0.0)
            pg_norm = float(np.max(np.abs(np.where(at_bound, 0.0, g)), initial=0.0))
            if pg_norm <= max(opts.gtol, 1e-6 * max(1.0, abs(ll)) ** 0.5) and not _diverging(obj, u, g, H, Hgn, bounded):
                converged, message = True, "log-likelihood change below tolerance"
                break
    return _RawFit(obj.gamma(u), ll, converged, it, pg_norm, quasi_sep, message)


def _slsqp(obj: _Objective, u0: np.ndarray, opts: FitOptions) -> _RawFit:
    k1 = obj.k1
    A, rhs = obj.layout.eq
    m = obj.layout.m
    scale = max(1.0, float(obj.data.n))
    bounds = [(None, None)] * k1 + [(0.0, None) if b else (None, None) for b in obj.layout.bounded]

    def fun(u):
        val = obj.loglik(u)
        return 1e30 if not np.isfinite(val) else -val / scale

    def jac(u):
        ll, g, _, _ = obj.full(u)
        return np.zeros_like(u) if g is None else -g / scale

    Afull = np.hstack([np.zeros((A.shape[0], k1)), A])
    cons = [{"type": "eq", "fun": lambda u: A @ u[k1:] - rhs, "jac": lambda u: Afull}]
    u0 = u0.copy()
    u0[k1:][obj.layout.bounded] = np.maximum(u0[k1:][obj.layout.bounded], 0.0)
    res = optimize.minimize(fun, u0, jac=jac, bounds=bounds, constraints=cons, method="SLSQP",
                            options={"maxiter": max(opts.max_iter, 500), "ftol": 1e-15})
    u = res.x
    if obj.layout.bounded.any():
        u[k1:][obj.layout.bounded] = np.maximum(u[k1:][obj.layout.bounded], 0.0)
    ll = obj.loglik(u)
    feas = np.max(np.abs(A @ u[k1:] - rhs), initial=0.0) <= 1e-6 * max(1.0, np.max(np.abs(rhs)))
    del m
    return _RawFit(obj.gamma(u), ll, bool(res.success and feas), int(res.nit), np.nan, False, res.message)


def _solve(data: DesignData, directions, pins, start_gamma, opts: FitOptions, equality=None) -> _RawFit:
    layout = _Layout(data.spec, directions, pins)
    if equality is not None:
        layout.impose(*equality)
    obj = _Objective(data, layout, opts.alpha_gap)
    u0 = obj.u_from(np.asarray(start_gamma, dtype=float))
    if not np.isfinite(obj.loglik(u0)):
        u0 = obj.u_from(initial_values(data))
    if layout.eq is not None:
        return _slsqp(obj, u0, opts)
    return _newton(obj, u0, opts)


def _result(kind, data, raw: _RawFit, directions=None, tie=False, candidates=None) -> FitResult:
    spec = data.spec
    params = ParameterVector(spec, raw.gamma)
    try:
        F = fisher_information(raw.gamma, data)
    except ValueError:
        F = np.full((spec.p, spec.p), np.nan)
    directions = dict(directions or {})
    active = {name: _active_flags(params.block(name), d) for name, d in directions.items()}
    return FitResult(kind, params, float(raw.loglik), raw.converged, raw.iterations, F,
                     directions, active, raw.quasi_separated, tie, raw.grad_norm,
                     dict(candidates or {}), raw.message)


# ---------------------------------------------------------------------------
# public fitters
# ---------------------------------------------------------------------------

def fit_unconstrained(data: DesignData, spec: ModelSpec | None = None, opts: FitOptions | None = None) -> FitResult:
    """UMLE: maximize the log-likelihood with only the intercept ordering imposed."""
    spec = spec or data.spec
    opts = opts or FitOptions()
    _check_categories(data)
    start = initial_values(data) if opts.init is None else np.asarray(opts.init, dtype=float)
    raw = _solve(data, {}, {}, start, opts)
    res = _result(Kind.UMLE, data, raw)
    s = _score_gamma(res.gamma, data)
    return replace(res, grad_norm=float(np.max(np.abs(s), initial=0.0)) if s is not None else np.nan)


def _score_gamma(gamma, data):
    try:
        from .model import score

        return score(gamma, data)
    except (ValueError, FloatingPointError):
        return None


def _assignments(spec: ModelSpec, fixed: Mapping[str, Direction]):
    names = [p.name for p in spec.constrained]
    choices = []
    for p in spec.constrained:
        if p.name in fixed:
            choices.append((Direction(fixed[p.name]),))
        else:
            choices.append(p.allowed_directions)
    return names, choices


def _classes_to_directions(spec, gamma, fixed):
    out = {}
    tie = False
    for p in spec.constrained:
        if p.name in fixed:
            out[p.name] = Direction(fixed[p.name])
            continue
        cls = classify_block(gamma[spec.block(p.name)])
        if cls == "both":
            out[p.name] = p.allowed_directions[0]
            tie = tie or len(p.allowed_directions) > 1
        else:
            out[p.name] = Direction(cls)
    return out, tie


def _constrained_start(opts, spec, dirs, fallback):
    """The user's constrained start when it satisfies this direction assignment."""
    g = opts.init_constrained
    if g is None:
        return fallback
    g = np.asarray(g, dtype=float)
    if g.shape == (spec.p,) and check_membership(g, spec, directions=dirs):
        return g
    return fallback


def _enumerate(kind, data, spec, fixed, opts, umle):
    names, choices = _assignments(spec, fixed)
    t = sum(len(c) > 1 for c in choices)
    if t > opts.max_enumerated:
        raise ValueError(f"{t} free monotonicity directions exceed the enumeration cap {opts.max_enumerated}")
    _check_categories(data)
    if umle is None:
        umle = fit_unconstrained(data, spec, opts)
    if umle.converged and check_membership(umle.gamma, spec, kind="constrained"):
        # the unconstrained maximizer is feasible, hence also the constrained one
        dirs, tie = _classes_to_directions(spec, umle.gamma, fixed)
        if all(dirs[n] in c for n, c in zip(names, choices)):
            cand = {tuple(d.value for d in dirs.values()): umle.loglik}
            return replace(umle, kind=kind, directions=dirs, tie=tie,
                           active={n: _active_flags(umle.block(n), d) for n, d in dirs.items()},
                           candidates=cand)
    start = umle.gamma if np.all(np.isfinite(umle.gamma)) else initial_values(data)
    best = None
    cands = {}
    fits = []
    for combo in itertools.product(*choices):
        dirs = dict(zip(names, combo))
        raw = _solve(data, dirs, {}, _constrained_start(opts, spec, dirs, start), opts)
        cands[tuple(d.value for d in combo)] = raw.loglik
        fits.append((dirs, raw))
    lls = np.array([raw.loglik for _, raw in fits])
    top = float(np.max(lls))
    winners = [i for i, v in enumerate(lls) if v >= top - TIE_TOL]
    dirs, raw = fits[winners[0]]
    tie = len(winners) > 1
    if not all(r.converged for _, r in fits):
        bad = [tuple(d.value for d in dd.values()) for dd, r in fits if not r.converged]
        raw = replace(raw, converged=False, message=f"subproblems {bad} did not converge; " + raw.message)
    return _result(kind, data, raw, dirs, tie, cands)


def fit_direction_constrained(data: DesignData, spec: ModelSpec | None, directions: Mapping[str, Direction | str],
                              opts: FitOptions | None = None, umle: FitResult | None = None) -> FitResult:
    """DMLE: every constrained ordinal predictor has a prescribed direction."""
    spec = spec or data.spec
    opts = opts or FitOptions()
    directions = {k: Direction(v) for k, v in directions.items()}
    missing = {p.name for p in spec.constrained} - set(directions)
    if missing:
        raise ValueError(f"no direction given for {sorted(missing)}")
    sub = spec.with_constraints({n: Constraint.ISOTONIC if d is Direction.ISO else Constraint.ANTITONIC
                                 for n, d in directions.items()})
    res = _enumerate(Kind.DMLE, _respec(data, sub), sub, directions, opts, _respec_fit(umle, sub))
    return _restore(res, spec)


def fit_constrained(data: DesignData, spec: ModelSpec | None = None, opts: FitOptions | None = None,
                    umle: FitResult | None = None) -> FitResult:
    """CMLE: each constrained ordinal predictor monotone in a direction its regime allows."""
    spec = spec or data.spec
    opts = opts or FitOptions()
    return _restore(_enumerate(Kind.CMLE, _respec(data, spec), spec, {}, opts, _respec_fit(umle, spec)), spec)


def fit_partially_constrained(data: DesignData, spec: ModelSpec | None, fixed: Mapping[str, Direction | str],
                              opts: FitOptions | None = None, umle: FitResult | None = None) -> FitResult:
    """PMLE: some directions prescribed, the remaining constrained ones enumerated."""
    spec = spec or data.spec
    opts = opts or FitOptions()
    fixed = {k: Direction(v) for k, v in fixed.items()}
    sub = spec.with_constraints({n: Constraint.ISOTONIC if d is Direction.ISO else Constraint.ANTITONIC
                                 for n, d in fixed.items()})
    res = _enumerate(Kind.PMLE, _respec(data, sub), sub, fixed, opts, _respec_fit(umle, sub))
    return _restore(res, spec)


def _respec(data: DesignData, spec: ModelSpec) -> DesignData:
    if data.spec is spec:
        return data
    if data.spec.p != spec.p or data.spec.k != spec.k:
        raise ValueError("data were encoded for a different model")
    return DesignData(spec, data.z, data.X)


def _respec_fit(res: FitResult | None, spec: ModelSpec):
    if res is None or res.spec is spec:
        return res
    return replace(res, params=ParameterVector(spec, res.gamma))


def _restore(res: FitResult, spec: ModelSpec) -> FitResult:
    return replace(res, params=ParameterVector(spec, res.gamma))


# ---------------------------------------------------------------------------
# profiling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProfileResult:
    loglik: float
    params: np.ndarray
    converged: bool
    directions: dict = field(default_factory=dict)


def profile_nuisance(
    data: DesignData,
    target: Target,
    value,
    mode: str = "unconstrained",
    start=None,
    opts: FitOptions | None = None,
) -> ProfileResult:
    """Maximize the log-likelihood with ``target`` held at ``value``.

    ``mode="unconstrained"`` profiles over the whole unconstrained parameter
    space.  ``mode="constrained"`` keeps every constrained ordinal block
    monotone (directions enumerated), including a fixed block, which must
    itself be monotone.  ``mode="monotone-target"`` constrains only the
    target predictor's block and leaves the other blocks free.
    """
    spec = target.spec
    opts = opts or FitOptions()
    value = np.atleast_1d(np.asarray(value, dtype=float))
    if value.shape != (target.r,):
        raise ValueError(f"target value needs {target.r} entries")
    if target.full:
        ll = log_likelihood(value, _respec(data, spec))
        if mode != "unconstrained" and not check_membership(value, spec):
            raise InfeasibleError("parameter vector is outside the constrained set")
        return ProfileResult(ll, value.copy(), True)
    data = _respec(data, spec)
    start = initial_values(data) if start is None else np.asarray(start, dtype=float).copy()

    if mode == "unconstrained":
        constrained = []
    elif mode == "constrained":
        constrained = list(spec.constrained)
    elif mode == "monotone-target":
        if target.predictor is None:
            raise ValueError("monotone-target profiling needs a single-predictor target")
        pred = spec.predictor(target.predictor)
        if pred.role is not Role.ORDINAL:
            raise ValueError("monotone-target profiling needs an ordinal predictor")
        constrained = [replace(pred, constraint=Constraint.EITHER) if not pred.is_constrained else pred]
    else:
        raise ValueError(f"unknown profiling mode {mode!r}")

    pins = {}
    equality = None
    if target.is_block_selection:
        pos = 0
        for name in target.blocks:
            sl = spec.beta_block(name)
            r = sl.stop - sl.start
            pins[name] = value[pos:pos + r]
            pos += r
            start[spec.block(name)] = pins[name]
    else:
        equality = (target.C, value)

    names, choices = [], []
    for p in constrained:
        if p.name in pins:
            cls = classify_block(pins[p.name])
            if not any(cls in ("both", d.value) for d in p.allowed_directions):
                raise InfeasibleError(f"fixed block of {p.name!r} is not monotone")
            continue
        names.append(p.name)
        choices.append(p.allowed_directions)

    best = None
    for combo in itertools.product(*choices):
        dirs = dict(zip(names, combo))
        try:
            raw = _solve(data, dirs, pins, start, opts, equality)
        except InfeasibleError:
            continue
        if best is None or raw.loglik > best[0].loglik + TIE_TOL:
            best = (raw, dirs)
    if best is None:
        raise InfeasibleError("no constrained parameter vector meets the target value")
    raw, dirs = best
    return ProfileResult(float(raw.loglik), raw.gamma, raw.converged, dirs)


def fit_sign_pattern(
    data: DesignData,
    patterns: Mapping[str, object],
    start=None,
    opts: FitOptions | None = None,
) -> ProfileResult:
    """Maximize with per-increment sign restrictions on selected blocks.

    ``patterns`` maps a predictor name to a direction or to one code per
    increment ``beta_h - beta_{h-1}`` (with ``beta_1 = 0``): +1 nonnegative,
    -1 nonpositive, 0 free.
    """
    opts = opts or FitOptions()
    start = initial_values(data) if start is None else np.asarray(start, dtype=float)
    raw = _solve(data, dict(patterns), {}, start, opts)
    return ProfileResult(float(raw.loglik), raw.gamma, raw.converged, dict(patterns))
