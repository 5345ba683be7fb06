"""Data model and likelihood machinery for the proportional odds cumulative logit model.

The model is

    logit P(z_i <= j | x_i) = alpha_j + x_i' beta,    j = 1, ..., k-1,

with strictly increasing intercepts.  Ordinal and nominal predictors enter
through dummy columns against their first category; numeric predictors enter
as-is.  Parameter vectors are flat arrays laid out as

    (alpha_1..alpha_{k-1}, ordinal blocks in declaration order,
     nominal blocks in declaration order, numeric coefficients)

and every function in this module accepts either such an array or a
:class:`ParameterVector`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "Role",
    "Constraint",
    "Direction",
    "PredictorSpec",
    "ModelSpec",
    "DesignData",
    "ParameterVector",
    "MembershipReport",
    "LikelihoodUnderflowError",
    "encode_design",
    "category_probabilities",
    "log_likelihood",
    "score",
    "hessian",
    "fisher_information",
    "classify_block",
    "check_membership",
]

# pi_{z_i} below this is reported instead of being folded into -inf
UNDERFLOW = 1e-300


class Role(str, Enum):
    ORDINAL = "ordinal"
    NOMINAL = "nominal"
    NUMERIC = "numeric"


class Constraint(str, Enum):
    """Constraint regime of an ordinal predictor."""

    UNCONSTRAINED = "unconstrained"
    EITHER = "either"
    ISOTONIC = "isotonic"
    ANTITONIC = "antitonic"


class Direction(str, Enum):
    ISO = "iso"
    ANTI = "anti"

    @property
    def sign(self) -> float:
        return 1.0 if self is Direction.ISO else -1.0

    @property
    def opposite(self) -> "Direction":
        return Direction.ANTI if self is Direction.ISO else Direction.ISO


class LikelihoodUnderflowError(FloatingPointError):
    """Raised when the probability of an observed response underflows."""


@dataclass(frozen=True)
class PredictorSpec:
    """One predictor column.

    ``levels`` is the ordered tuple of category labels for ordinal predictors
    and the (unordered) tuple of levels for nominal ones; the first entry is
    the baseline.  Numeric predictors have no levels.
    """

    name: str
    role: Role
    levels: tuple | None = None
    constraint: Constraint = Constraint.EITHER

    def __post_init__(self):
        role = Role(self.role)
        object.__setattr__(self, "role", role)
        object.__setattr__(self, "constraint", Constraint(self.constraint))
        if role is Role.NUMERIC:
            if self.levels is not None:
                raise ValueError(f"numeric predictor {self.name!r} cannot have levels")
            return
        if self.levels is None or len(self.levels) < 2:
            raise ValueError(f"predictor {self.name!r} needs at least two categories")
        levels = tuple(self.levels)
        if len(set(levels)) != len(levels):
            raise ValueError(f"predictor {self.name!r} has duplicated levels")
        object.__setattr__(self, "levels", levels)

    @property
    def n_params(self) -> int:
        return 1 if self.role is Role.NUMERIC else len(self.levels) - 1

    @property
    def is_constrained(self) -> bool:
        return self.role is Role.ORDINAL and self.constraint is not Constraint.UNCONSTRAINED

    @property
    def allowed_directions(self) -> tuple[Direction, ...]:
        """Directions a constrained ordinal block may take."""
        if not self.is_constrained:
            return ()
        if self.constraint is Constraint.ISOTONIC:
            return (Direction.ISO,)
        if self.constraint is Constraint.ANTITONIC:
            return (Direction.ANTI,)
        return (Direction.ISO, Direction.ANTI)

    @classmethod
    def ordinal(cls, name, levels, constraint=Constraint.EITHER):
        return cls(name, Role.ORDINAL, tuple(levels), Constraint(constraint))

    @classmethod
    def nominal(cls, name, levels):
        return cls(name, Role.NOMINAL, tuple(levels), Constraint.UNCONSTRAINED)

    @classmethod
    def numeric(cls, name):
        return cls(name, Role.NUMERIC, None, Constraint.UNCONSTRAINED)


@dataclass(frozen=True)
class ModelSpec:
    """Response category count plus the predictor list.

    Predictors are stored in parameter order (ordinal, then nominal, then
    numeric, each group in declaration order), whatever order they were
    passed in.
    """

    k: int
    predictors: tuple[PredictorSpec, ...] = ()
    response: str = "response"
    response_levels: tuple | None = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("the response needs at least two categories")
        if self.response_levels is not None:
            levels = tuple(self.response_levels)
            if len(levels) != self.k:
                raise ValueError("response_levels must have exactly k entries")
            object.__setattr__(self, "response_levels", levels)
        preds = tuple(self.predictors)
        names = [p.name for p in preds]
        if len(set(names)) != len(names):
            raise ValueError("predictor names must be unique")
        if self.response in names:
            raise ValueError("the response cannot also be a predictor")
        order = {Role.ORDINAL: 0, Role.NOMINAL: 1, Role.NUMERIC: 2}
        preds = tuple(sorted(preds, key=lambda p: order[p.role]))  # stable
        object.__setattr__(self, "predictors", preds)
        slices = {}
        start = self.k - 1
        for p in preds:
            slices[p.name] = slice(start, start + p.n_params)
            start += p.n_params
        object.__setattr__(self, "_slices", slices)

    @property
    def n_alpha(self) -> int:
        return self.k - 1

    @property
    def p(self) -> int:
        """Total parameter dimension."""
        return self.k - 1 + sum(pr.n_params for pr in self.predictors)

    @property
    def q(self) -> int:
        """Number of slope coefficients (columns of the design matrix)."""
        return self.p - self.n_alpha

    def predictor(self, name: str) -> PredictorSpec:
        for p in self.predictors:
            if p.name == name:
                return p
        raise KeyError(f"unknown predictor {name!r}")

    def block(self, name: str) -> slice:
        """Slice of the full parameter vector holding ``name``'s coefficients."""
        self.predictor(name)
        return self._slices[name]

    def beta_block(self, name: str) -> slice:
        """Slice of the slope vector (alpha removed) holding ``name``'s coefficients."""
        sl = self.block(name)
        return slice(sl.start - self.n_alpha, sl.stop - self.n_alpha)

    @property
    def ordinal(self) -> tuple[PredictorSpec, ...]:
        return tuple(p for p in self.predictors if p.role is Role.ORDINAL)

    @property
    def constrained(self) -> tuple[PredictorSpec, ...]:
        return tuple(p for p in self.predictors if p.is_constrained)

    def with_constraints(self, regimes: Mapping[str, Constraint | str]) -> "ModelSpec":
        """Copy of this ModelSpec with some ordinal predictors' regimes replaced."""
        preds = []
        for p in self.predictors:
            if p.name in regimes:
                if p.role is not Role.ORDINAL:
                    raise ValueError(f"{p.name!r} is not an ordinal predictor")
                p = replace(p, constraint=Constraint(regimes[p.name]))
            preds.append(p)
        unknown = set(regimes) - {p.name for p in self.predictors}
        if unknown:
            raise KeyError(f"unknown predictors {sorted(unknown)}")
        return replace(self, predictors=tuple(preds))

    def parameter_names(self) -> list[str]:
        names = [f"alpha{j}" for j in range(1, self.k)]
        for p in self.predictors:
            if p.role is Role.NUMERIC:
                names.append(p.name)
            else:
                names.extend(f"{p.name}[{lev}]" for lev in p.levels[1:])
        return names


@dataclass(frozen=True)
class ParameterVector:
    """Flat parameter vector tied to its model spec."""

    spec: ModelSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.spec.p,):
            raise ValueError(f"expected {self.spec.p} parameters, got shape {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def alpha(self) -> np.ndarray:
        return self.values[: self.spec.n_alpha]

    @property
    def beta(self) -> np.ndarray:
        return self.values[self.spec.n_alpha:]

    def block(self, name: str) -> np.ndarray:
        return self.values[self.spec.block(name)]

    @property
    def beta_ord(self) -> dict[str, np.ndarray]:
        return {p.name: self.block(p.name) for p in self.spec.ordinal}

    @property
    def beta_nonord(self) -> np.ndarray:
        cols = [self.block(p.name) for p in self.spec.predictors if p.role is not Role.ORDINAL]
        return np.concatenate(cols) if cols else np.empty(0)

    @classmethod
    def from_blocks(cls, spec: ModelSpec, alpha, blocks: Mapping[str, Sequence[float]] | None = None):
        """Build from intercepts and a name -> coefficients mapping (missing blocks are zero)."""
        v = np.zeros(spec.p)
        v[: spec.n_alpha] = alpha
        for name, vals in (blocks or {}).items():
            sl = spec.block(name)
            vals = np.atleast_1d(np.asarray(vals, dtype=float))
            if vals.shape[0] != sl.stop - sl.start:
                raise ValueError(f"block {name!r} needs {sl.stop - sl.start} values")
            v[sl] = vals
        return cls(spec, v)


@dataclass(frozen=True)
class DesignData:
    """Encoded observations: responses ``z`` in 1..k and the slope design ``X``."""

    spec: ModelSpec
    z: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.intp)
        X = np.asarray(self.X, dtype=float)
        if z.ndim != 1 or X.ndim != 2 or X.shape[0] != z.shape[0]:
            raise ValueError("z must be (n,) and X must be (n, q)")
        if X.shape[1] != self.spec.q:
            raise ValueError(f"X has {X.shape[1]} columns, spec expects {self.spec.q}")
        if z.size and (z.min() < 1 or z.max() > self.spec.k):
            raise ValueError("responses must lie in 1..k")
        z.flags.writeable = False
        X.flags.writeable = False
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def y(self) -> np.ndarray:
        """Response indicator matrix, ``y[i, j] = 1(z_i = j + 1)``."""
        out = np.zeros((self.n, self.spec.k))
        out[np.arange(self.n), self.z - 1] = 1.0
        return out

    def response_counts(self) -> np.ndarray:
        return np.bincount(self.z - 1, minlength=self.spec.k)

    def subset(self, idx) -> "DesignData":
        return DesignData(self.spec, self.z[idx], self.X[idx])


def _column(table, name):
    try:
        col = table[name]
    except (KeyError, IndexError):
        raise KeyError(f"column {name!r} not found in table") from None
    return list(col)


def encode_design(table, spec: ModelSpec) -> DesignData:
    """Dummy-code a raw table.

    ``table`` is any mapping (dict of sequences, pandas DataFrame, ...) from
    column name to values.  Ordinal/nominal values must be declared levels,
    numeric values finite reals; responses are either labels from
    ``spec.response_levels`` or integers 1..k.
    """
    resp = _column(table, spec.response)
    n = len(resp)
    if n == 0:
        raise ValueError("empty dataset")
    if spec.response_levels is not None:
        lookup = {lev: j + 1 for j, lev in enumerate(spec.response_levels)}
        try:
            z = np.array([lookup[v] for v in resp], dtype=np.intp)
        except KeyError as err:
            raise ValueError(f"unknown response label {err.args[0]!r}") from None
    else:
        try:
            z = np.array([int(v) for v in resp], dtype=np.intp)
        except (TypeError, ValueError):
            raise ValueError("responses must be integers 1..k when no labels are declared") from None
        if z.min() < 1 or z.max() > spec.k:
            raise ValueError(f"response outside 1..{spec.k}")

    X = np.zeros((n, spec.q))
    for p in spec.predictors:
        vals = _column(table, p.name)
        if len(vals) != n:
            raise ValueError(f"column {p.name!r} has the wrong length")
        cols = spec.beta_block(p.name)
        if p.role is Role.NUMERIC:
            try:
                x = np.array(vals, dtype=float)
            except (TypeError, ValueError):
                raise ValueError(f"non-numeric value in column {p.name!r}") from None
            if not np.all(np.isfinite(x)):
                raise ValueError(f"non-finite value in column {p.name!r}")
            X[:, cols.start] = x
        else:
            lookup = {lev: h for h, lev in enumerate(p.levels)}
            try:
                h = np.array([lookup[v] for v in vals], dtype=np.intp)
            except KeyError as err:
                raise ValueError(f"unknown category {err.args[0]!r} in column {p.name!r}") from None
            rows = np.nonzero(h > 0)[0]
            X[rows, cols.start + h[rows] - 1] = 1.0
    return DesignData(spec, z, X)


# ---------------------------------------------------------------------------
# likelihood pieces
# ---------------------------------------------------------------------------

def _gamma(params, spec: ModelSpec) -> np.ndarray:
    g = params.values if isinstance(params, ParameterVector) else np.asarray(params, dtype=float)
    if g.shape != (spec.p,):
        raise ValueError(f"expected {spec.p} parameters, got shape {g.shape}")
    return g


def _log_sigmoid(x):
    with np.errstate(over="ignore", invalid="ignore"):
        return np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x):
    with np.errstate(over="ignore"):
        return 0.5 * (1.0 + np.tanh(0.5 * x))


def _log_interval(a, b):
    """log(sigmoid(a) - sigmoid(b)) for b < a, stable for any magnitudes.

    Uses sigmoid(a) - sigmoid(b) = sigmoid(a) * sigmoid(-b) * (1 - exp(b - a)).
    """
    with np.errstate(invalid="ignore", divide="ignore"):
        return _log_sigmoid(a) + _log_sigmoid(-b) + np.log(-np.expm1(b - a))


class _Pieces:
    """Per-observation quantities at a parameter value, shared by l, score and Hessian."""

    __slots__ = ("a", "b", "logp", "da", "db", "xb")

    def __init__(self, gamma, data: DesignData):
        spec = data.spec
        alpha = gamma[: spec.n_alpha]
        if np.any(np.diff(alpha) <= 0):
            raise ValueError("intercepts must be strictly increasing")
        self.xb = data.X @ gamma[spec.n_alpha:]
        ext = np.concatenate(([-np.inf], alpha, [np.inf]))
        # a = eta at the upper cut of the observed category, b at the lower cut
        self.a = ext[data.z] + self.xb
        self.b = ext[data.z - 1] + self.xb
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            ls_a = _log_sigmoid(self.a)
            ls_mb = _log_sigmoid(-self.b)
            log_gap = np.log(-np.expm1(self.b - self.a))
            self.logp = ls_a + ls_mb + log_gap
            # log sigmoid(-x) = log sigmoid(x) - x; the infinite cut points need the limits
            ls_ma = np.where(np.isposinf(self.a), -np.inf, ls_a - self.a)
            ls_b = np.where(np.isneginf(self.b), -np.inf, ls_mb + self.b)
            self.da = np.exp(ls_ma - ls_mb - log_gap)
            self.db = -np.exp(ls_b - ls_a - log_gap)

    def loglik(self) -> float:
        return float(np.sum(self.logp))


def _pieces(params, data: DesignData, check_underflow: bool = True) -> _Pieces:
    pc = _Pieces(_gamma(params, data.spec), data)
    if check_underflow and pc.logp.size and np.min(pc.logp) < np.log(UNDERFLOW):
        i = int(np.argmin(pc.logp))
        raise LikelihoodUnderflowError(
            f"probability of the observed response underflows at observation {i}"
        )
    return pc


def linear_predictors(params, spec: ModelSpec, x) -> np.ndarray:
    """eta_j = alpha_j + x' beta for each row of ``x``; shape (m, k-1)."""
    g = _gamma(params, spec)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return g[: spec.n_alpha][None, :] + (x @ g[spec.n_alpha:])[:, None]


def category_probabilities(params, spec: ModelSpec, x) -> np.ndarray:
    """Category probabilities pi_j(x) for one design row (shape (k,)) or many (shape (m, k))."""
    single = np.ndim(x) == 1
    eta = linear_predictors(params, spec, x)
    if np.any(np.diff(eta, axis=1) <= 0):
        raise ValueError("intercepts must be strictly increasing")
    m = eta.shape[0]
    upper = np.hstack([eta, np.full((m, 1), np.inf)])
    lower = np.hstack([np.full((m, 1), -np.inf), eta])
    pi = np.exp(_log_interval(upper, lower))
    return pi[0] if single else pi


def log_likelihood(params, data: DesignData) -> float:
    """Sum over observations of log pi_{z_i}(x_i)."""
    return _pieces(params, data).loglik()


def score(params, data: DesignData) -> np.ndarray:
    """Analytic gradient of the log-likelihood in the raw parameter coordinates."""
    return _score_from(_pieces(params, data), data)


def _score_from(pc: _Pieces, data: DesignData) -> np.ndarray:
    spec = data.spec
    k1 = spec.n_alpha
    z = data.z
    g_alpha = np.zeros(k1)
    up = z < spec.k
    lo = z > 1
    np.add.at(g_alpha, z[up] - 1, pc.da[up])
    np.add.at(g_alpha, z[lo] - 2, pc.db[lo])
    g_beta = data.X.T @ (np.where(up, pc.da, 0.0) + np.where(lo, pc.db, 0.0))
    return np.concatenate([g_alpha, g_beta])


def _alpha_indicators(data: DesignData):
    """One-hot matrices picking alpha at the upper and lower cut of each observation."""
    k1 = data.spec.n_alpha
    n = data.n
    z = data.z
    A = np.zeros((n, k1))
    B = np.zeros((n, k1))
    up = np.nonzero(z < data.spec.k)[0]
    lo = np.nonzero(z > 1)[0]
    A[up, z[up] - 1] = 1.0
    B[lo, z[lo] - 2] = 1.0
    return A, B


def _hessian_from(pc: _Pieces, data: DesignData) -> np.ndarray:
    spec = data.spec
    z = data.z
    up = z < spec.k
    lo = z > 1
    da = np.where(up, pc.da, 0.0)
    db = np.where(lo, pc.db, 0.0)
    haa = np.where(up, da * (1.0 - 2.0 * _sigmoid(np.where(up, pc.a, 0.0))) - da**2, 0.0)
    hbb = np.where(lo, db * (1.0 - 2.0 * _sigmoid(np.where(lo, pc.b, 0.0))) - db**2, 0.0)
    hab = -da * db
    A, B = _alpha_indicators(data)
    X = data.X
    H_aa = (A.T * haa) @ A + (B.T * hbb) @ B + (A.T * hab) @ B + (B.T * hab) @ A
    H_ab = (A.T * (haa + hab)) @ X + (B.T * (hbb + hab)) @ X
    H_bb = (X.T * (haa + hbb + 2.0 * hab)) @ X
    return np.block([[H_aa, H_ab], [H_ab.T, H_bb]])


def hessian(params, data: DesignData) -> np.ndarray:
    """Observed Hessian of the log-likelihood (negative semi-definite)."""
    return _hessian_from(_pieces(params, data), data)


def fisher_information(params, data: DesignData) -> np.ndarray:
    """Expected information: covariance of the score under the model at ``params``.

    Computed as sum_i sum_j d_ij d_ij' / pi_ij with d_ij the derivative of
    pi_ij with respect to the parameters.
    """
    spec = data.spec
    g = _gamma(params, spec)
    k, k1 = spec.k, spec.n_alpha
    eta = linear_predictors(g, spec, data.X) if data.n else np.zeros((0, k1))
    if np.any(np.diff(eta, axis=1) <= 0):
        raise ValueError("intercepts must be strictly increasing")
    n = eta.shape[0]
    dens = _sigmoid(eta) * _sigmoid(-eta)
    fpad = np.hstack([np.zeros((n, 1)), dens, np.zeros((n, 1))])
    upper = np.hstack([eta, np.full((n, 1), np.inf)])
    lower = np.hstack([np.full((n, 1), -np.inf), eta])
    pi = np.maximum(np.exp(_log_interval(upper, lower)), UNDERFLOW)
    inv = 1.0 / pi
    # alpha part of d_ij: +f_j on alpha_j, -f_{j-1} on alpha_{j-1}
    D = np.zeros((n, k, k1))
    for j in range(k):
        if j < k1:
            D[:, j, j] = dens[:, j]
        if j >= 1:
            D[:, j, j - 1] = -dens[:, j - 1]
    dslope = fpad[:, 1:] - fpad[:, :-1]
    F_aa = np.einsum("nja,nj,njb->ab", D, inv, D)
    F_ab = np.einsum("nja,nj,np->ap", D, inv * dslope, data.X)
    F_bb = (data.X.T * np.sum(dslope**2 * inv, axis=1)) @ data.X
    F = np.block([[F_aa, F_ab], [F_ab.T, F_bb]])
    return 0.5 * (F + F.T)


# ---------------------------------------------------------------------------
# constraint sets
# ---------------------------------------------------------------------------

def classify_block(block, tol: float = 0.0) -> str:
    """Monotonicity class of a coefficient block (baseline 0 prepended).

    Returns ``"iso"``, ``"anti"``, ``"both"`` (flat, i.e. all zero) or
    ``"neither"``.  ``tol`` loosens each inequality by that amount.
    """
    d = np.diff(np.concatenate(([0.0], np.asarray(block, dtype=float))))
    iso = bool(np.all(d >= -tol))
    anti = bool(np.all(d <= tol))
    if iso and anti:
        return "both"
    if iso:
        return "iso"
    if anti:
        return "anti"
    return "neither"


def _satisfies(cls: str, direction: Direction) -> bool:
    return cls == "both" or cls == direction.value


@dataclass(frozen=True)
class MembershipReport:
    member: bool
    alpha_ordered: bool
    classes: dict = field(default_factory=dict)

    def __bool__(self):
        return self.member


def check_membership(
    params,
    spec: ModelSpec,
    kind: str = "constrained",
    directions: Mapping[str, Direction | str] | None = None,
    tol: float = 0.0,
) -> MembershipReport:
    """Check a parameter vector against one of the parameter sets.

    ``kind="unconstrained"`` tests only the strict intercept ordering.
    ``kind="constrained"`` additionally requires every constrained ordinal
    block to be monotone in a direction its regime allows.  Passing
    ``directions`` (name -> iso/anti for every constrained predictor) tests
    the set with those directions fixed instead.
    """
    g = _gamma(params, spec)
    alpha_ok = bool(np.all(np.diff(g[: spec.n_alpha]) > 0))
    classes = {p.name: classify_block(g[spec.block(p.name)], tol) for p in spec.ordinal}
    member = alpha_ok
    if directions is not None:
        directions = {name: Direction(d) for name, d in directions.items()}
        missing = {p.name for p in spec.constrained} - set(directions)
        if missing:
            raise ValueError(f"no direction given for {sorted(missing)}")
        for name, d in directions.items():
            if spec.predictor(name).role is not Role.ORDINAL:
                raise ValueError(f"{name!r} is not ordinal")
            member = member and _satisfies(classes[name], d)
    elif kind == "constrained":
        for p in spec.constrained:
            member = member and any(_satisfies(classes[p.name], d) for d in p.allowed_directions)
    elif kind != "unconstrained":
        raise ValueError(f"unknown parameter set {kind!r}")
    return MembershipReport(member, alpha_ok, classes)
