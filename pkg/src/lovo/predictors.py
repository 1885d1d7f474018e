"""Predicting the X-Y correlation from datasets that never observe the pair
jointly.

Every estimator here consumes second moments of the two marginal datasets
(one over {X} u Z, one over {Y} u Z) and emits either a correlation in
[-1, 1] or an explicit abstention with a reason. The moment layer lets the
same code run on finite samples and on analytic covariance matrices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .edge_rules import (
    AbstentionError,
    AdjustmentSet,
    AmbiguousReconstruction,
    EdgeDecision,
    InconsistentMarginals,
    MarginalPair,
    PreconditionError,
    Verdict,
    reconstruct_joint_directed,
    union_of_parents,
)
from .graph import Admg
from .scm import Dataset

DENOM_TOLERANCE = 1e-3
CONDITION_CAP = 1e6


@dataclass(frozen=True)
class Abstained:
    """Explicit refusal to emit a number; always carries a reason."""

    reason: str
    detail: str = ""

    def __post_init__(self):
        if not self.reason:
            raise ValueError("abstention requires a non-empty reason")


@dataclass(frozen=True)
class PredictionRecord:
    pair: tuple[str, str]
    method: str
    rho_lovo: float | Abstained
    rho_base: float | None = None
    rho_holdout: float | None = None
    adjustment: AdjustmentSet | None = None

    def __post_init__(self):
        for v in (self.rho_lovo, self.rho_base, self.rho_holdout):
            if isinstance(v, float) and not -1.0 <= v <= 1.0:
                raise ValueError(f"correlation {v} outside [-1, 1]")

    @property
    def abstained(self) -> bool:
        return isinstance(self.rho_lovo, Abstained)

    def with_scores(self, rho_base: float, rho_holdout: float) -> "PredictionRecord":
        return replace(self, rho_base=rho_base, rho_holdout=rho_holdout)

    def to_json(self) -> dict:
        if self.abstained:
            lovo = {"abstained": self.rho_lovo.reason, "detail": self.rho_lovo.detail}
        else:
            lovo = self.rho_lovo
        return {
            "pair": list(self.pair),
            "method": self.method,
            "rho_lovo": lovo,
            "rho_base": self.rho_base,
            "rho_holdout": self.rho_holdout,
            "adjustment": sorted(self.adjustment.members) if self.adjustment else None,
        }


def write_records_jsonl(records, path):
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json()) + "\n")


# ---------------------------------------------------------------------------
# Second-moment layer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Moments:
    """Column names plus their covariance matrix (sample or analytic)."""

    columns: tuple[str, ...]
    cov: np.ndarray

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "cov", cov)
        d = len(self.columns)
        if cov.shape != (d, d):
            raise ValueError("covariance shape does not match the columns")

    @classmethod
    def from_dataset(cls, ds: Dataset) -> "Moments":
        if ds.n < 3:
            raise ValueError("need at least 3 rows to estimate second moments")
        return cls(ds.columns, np.atleast_2d(np.cov(ds.values, rowvar=False, ddof=1)))

    @classmethod
    def from_covariance(cls, columns, cov, subset=None) -> "Moments":
        m = cls(tuple(columns), cov)
        return m.restrict(subset) if subset is not None else m

    def restrict(self, columns) -> "Moments":
        columns = tuple(columns)
        idx = [self.columns.index(c) for c in columns]
        return Moments(columns, self.cov[np.ix_(idx, idx)])

    def block(self, rows, cols) -> np.ndarray:
        ri = [self.columns.index(c) for c in rows]
        ci = [self.columns.index(c) for c in cols]
        return self.cov[np.ix_(ri, ci)]

    def covariance(self, a: str, b: str) -> float:
        return float(self.block([a], [b])[0, 0])

    def variance(self, c: str) -> float:
        return self.covariance(c, c)

    def sd(self, c: str) -> float:
        return float(np.sqrt(max(self.variance(c), 0.0)))


def _regress(m: Moments, target: str, regressors) -> np.ndarray:
    """OLS coefficients of ``target`` on ``regressors`` from second moments."""
    regressors = list(regressors)
    if not regressors:
        return np.zeros(0)
    a = m.block(regressors, regressors)
    b = m.block(regressors, [target])[:, 0]
    if np.linalg.cond(a) > 1e12:
        raise AbstentionError("SingularRegression", "rank-deficient adjustment regression")
    try:
        beta = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        raise AbstentionError("SingularRegression", "rank-deficient adjustment regression")
    if not np.all(np.isfinite(beta)):
        raise AbstentionError("SingularRegression", "non-finite regression coefficients")
    return beta


def _clip(rho: float) -> float:
    return float(np.clip(rho, -1.0, 1.0))


# ---------------------------------------------------------------------------
# Three-step predictor and baselines
# ---------------------------------------------------------------------------

def three_step_rho(mx: Moments, my: Moments, x: str, y: str, zs) -> float:
    """Fit E[Y|Z_S] on the Y-side moments, transfer the fitted map to the
    X-side moments, correlate: rho = beta' Cov_x(Z_S, X) / (sd_x(X) sd_y(Y))."""
    zs = sorted(zs)
    if x in zs or y in zs:
        raise PreconditionError("adjustment set must not contain X or Y")
    if not zs:
        return 0.0
    beta = _regress(my, y, zs)
    cov_xy = float(beta @ mx.block(zs, [x])[:, 0])
    denom = mx.sd(x) * my.sd(y)
    if denom <= 0:
        raise AbstentionError("SingularRegression", "degenerate variance")
    return _clip(cov_xy / denom)


def _split_roles(dx_cols, dy_cols) -> tuple[str, str, frozenset]:
    """Identify X (only in dx), Y (only in dy) and the shared Z."""
    only_x = set(dx_cols) - set(dy_cols)
    only_y = set(dy_cols) - set(dx_cols)
    if len(only_x) != 1 or len(only_y) != 1:
        raise PreconditionError(
            "datasets must differ in exactly one column each (the left-out pair)"
        )
    return only_x.pop(), only_y.pop(), frozenset(dx_cols) & frozenset(dy_cols)


def _predict(mx, my, x, y, adjustment: AdjustmentSet, method: str) -> PredictionRecord:
    try:
        rho = three_step_rho(mx, my, x, y, adjustment.members)
    except AbstentionError as err:
        rho = Abstained(err.reason, err.detail)
    return PredictionRecord((x, y), method, rho, adjustment=adjustment)


def three_step_parent_adjustment(
    dx: Dataset, dy: Dataset, zs: AdjustmentSet
) -> PredictionRecord:
    x, y, z = _split_roles(dx.columns, dy.columns)
    if not zs.members <= z:
        raise PreconditionError("adjustment set must be a subset of the shared columns")
    return _predict(
        Moments.from_dataset(dx), Moments.from_dataset(dy), x, y, zs, "ParentAdjustment"
    )


def maxent_baseline(dx: Dataset, dy: Dataset) -> PredictionRecord:
    x, y, z = _split_roles(dx.columns, dy.columns)
    return _predict(
        Moments.from_dataset(dx),
        Moments.from_dataset(dy),
        x,
        y,
        AdjustmentSet(z, "Full"),
        "MaxEnt",
    )


def random_adjustment_baseline(
    dx: Dataset, dy: Dataset, size: int, k_draws: int = 10, seed: int = 0
) -> PredictionRecord:
    x, y, z = _split_roles(dx.columns, dy.columns)
    zl = sorted(z)
    if size > len(zl) or size < 0:
        raise PreconditionError("subset size must lie in [0, |Z|]")
    mx, my = Moments.from_dataset(dx), Moments.from_dataset(dy)
    rng = np.random.default_rng(seed)
    rhos, drawn = [], set()
    for _ in range(k_draws):
        subset = [zl[i] for i in rng.choice(len(zl), size=size, replace=False)]
        drawn.update(subset)
        try:
            rhos.append(three_step_rho(mx, my, x, y, subset))
        except AbstentionError:
            continue
    adj = AdjustmentSet(frozenset(drawn), "Random")
    if not rhos:
        return PredictionRecord(
            (x, y), "RandomAdjustment",
            Abstained("SingularRegression", "every random subset was degenerate"),
            adjustment=adj,
        )
    return PredictionRecord(
        (x, y), "RandomAdjustment", _clip(float(np.mean(rhos))), adjustment=adj
    )


# ---------------------------------------------------------------------------
# LiNGAM-tailored predictor
# ---------------------------------------------------------------------------

def _ols_unconfounded(marginal: Admg, target: str, regressors) -> bool:
    """In the marginal graph, OLS of target on regressors recovers the
    marginalized structural coefficients iff no sibling of the target is an
    ancestor-or-self of any regressor (siblings mark correlated noise)."""
    for s in marginal.siblings(target):
        reach = marginal.descendants(s) | {s}
        if any(r in reach for r in regressors):
            return False
    return True


def _witness_route(m_u, m_v, g_u, g_v, u, v, joint: Admg) -> float | None:
    """Cross coefficient via parents of the cause that are not parents of the
    effect in the (uniquely reconstructed) joint: for such a witness w the
    marginal regression of v carries beta_w = lambda_vu * lambda_uw."""
    pu = sorted(g_u.parents(u))
    pa_v = joint.parents(v)
    witnesses = [p for p in pu if p not in pa_v]
    if not witnesses:
        return None
    regressors = sorted(g_v.parents(v))
    if not set(pa_v - {u}) <= set(regressors) or not set(pu) <= set(regressors):
        return None
    if not _ols_unconfounded(g_v, v, regressors):
        return None
    if not _ols_unconfounded(g_u, u, pu):
        return None
    beta = dict(zip(regressors, _regress(m_v, v, regressors)))
    alpha = dict(zip(pu, _regress(m_u, u, pu)))
    denom = sum(alpha[w] ** 2 for w in witnesses)
    if denom < DENOM_TOLERANCE**2:
        return None
    lam_vu = sum(beta[w] * alpha[w] for w in witnesses) / denom
    cov_uv = lam_vu * m_u.variance(u)
    for s in sorted(pa_v - {u}):
        lam_vs = beta[s] - lam_vu * alpha[s] if s in alpha else beta[s]
        cov_uv += lam_vs * m_u.covariance(u, s)
    return cov_uv


def _nonshared_child_route(m_u, m_v, g_u, g_v, u, v) -> float | None:
    """Cov(u, v) through a child c of the cause that is not a child (or
    ancestor) of the effect.

    Such a c keeps its exact joint parent set in the cause-side marginal, so
    regressing c on those parents there recovers its structural coefficients;
    the structural equation of c then expresses Cov(v, c) (observable on the
    effect side) in terms of Cov(u, v) and effect-side covariances.
    """
    cv = g_v.children(v)
    blocked = g_v.ancestors(v) | cv | {v}
    for c in sorted(g_u.children(u)):
        if c in blocked:
            continue
        pa_c = sorted(g_u.parents(c))
        lam = dict(zip(pa_c, _regress(m_u, c, pa_c)))
        if abs(lam[u]) < DENOM_TOLERANCE:
            continue
        rest = sum(lam[p] * m_v.covariance(v, p) for p in pa_c if p != u)
        return (m_v.covariance(v, c) - rest) / lam[u]
    return None


def _downstream_child_route(m_u, m_v, g_u, g_v, u, v) -> float | None:
    """Total-effect ratio through a descendant of the effect; valid when the
    cause is exogenous with the effect as its only child (so all influence
    flows through the effect)."""
    if g_u.parents(u) or g_v.parents(v) or g_v.bidirected:
        return None
    for c in sorted(g_v.descendants(v)):
        m_cv = m_v.covariance(v, c) / m_v.variance(v)
        if abs(m_cv) < DENOM_TOLERANCE:
            continue
        m_cu = m_u.covariance(u, c) / m_u.variance(u)
        return (m_cu / m_cv) * m_u.variance(u)
    return None


def lingam_rho(mx: Moments, my: Moments, mp: MarginalPair, decision: EdgeDecision) -> float:
    """Correlation implied by the fitted linear model; raises AbstentionError
    when no unbiased recovery route for the cross coefficient exists.

    Projection leaves two quantities exact in the marginals: the parents of
    the decided cause and the children of the decided effect. The recovery
    routes use only these (plus a joint reconstruction when it is unique),
    so the estimate is unbiased whenever a route applies.
    """
    if decision.verdict is Verdict.UNDECIDABLE:
        raise PreconditionError("the LiNGAM predictor needs a decided edge status")
    if decision.verdict is Verdict.ABSENT:
        zs = union_of_parents(mp, decision)  # may raise ConfoundedParent
        return three_step_rho(mx, my, mp.x, mp.y, zs.members)

    # Orient: u is the decided cause, v the effect.
    if decision.verdict is Verdict.X_TO_Y:
        u, v, m_u, m_v, g_u, g_v = mp.x, mp.y, mx, my, mp.gx, mp.gy
    else:
        u, v, m_u, m_v, g_u, g_v = mp.y, mp.x, my, mx, mp.gy, mp.gx

    cov_uv = None
    try:
        joint = reconstruct_joint_directed(mp, decision)
    except (AmbiguousReconstruction, InconsistentMarginals):
        joint = None
    if joint is not None:
        cov_uv = _witness_route(m_u, m_v, g_u, g_v, u, v, joint)
    if cov_uv is None:
        cov_uv = _nonshared_child_route(m_u, m_v, g_u, g_v, u, v)
    if cov_uv is None:
        cov_uv = _downstream_child_route(m_u, m_v, g_u, g_v, u, v)
    if cov_uv is None:
        # ch(u) = {v, c}, ch(v) = {c} with no outside parent witness: the
        # cross coefficient is not second-order identifiable.
        cv = g_v.children(v)
        if len(cv) == 1 and g_v.siblings(v) == cv and g_u.children(u) == cv:
            raise AbstentionError("TheoremException", "two-children configuration")
        raise AbstentionError("NoRecoveryRoute", "no parent witness or usable child")

    denom = m_u.sd(u) * m_v.sd(v)
    if denom <= 0:
        raise AbstentionError("SingularRegression", "degenerate variance")
    return _clip(cov_uv / denom)


def lingam_lovo(
    dx: Dataset, dy: Dataset, mp: MarginalPair, decision: EdgeDecision
) -> PredictionRecord:
    x, y, z = _split_roles(dx.columns, dy.columns)
    if {x, y} != {mp.x, mp.y} or z != mp.z:
        raise PreconditionError("datasets do not match the marginal pair")
    mx, my = Moments.from_dataset(dx), Moments.from_dataset(dy)
    if x != mp.x:
        mx, my = my, mx
    adj = AdjustmentSet(frozenset(), "Structural")
    if decision.verdict is Verdict.ABSENT:
        try:
            adj = union_of_parents(mp, decision)
        except AbstentionError as err:
            return PredictionRecord(
                (mp.x, mp.y), "Lingam", Abstained(err.reason, err.detail), adjustment=adj
            )
    try:
        rho = lingam_rho(mx, my, mp, decision)
    except AbstentionError as err:
        rho = Abstained(err.reason, err.detail)
    return PredictionRecord((mp.x, mp.y), "Lingam", rho, adjustment=adj)


# ---------------------------------------------------------------------------
# Trivariate predictors (single covariate Z)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrivariateStats:
    rho_xz: float
    rho_yz: float

    def __post_init__(self):
        for v in (self.rho_xz, self.rho_yz):
            if not -1.0 <= v <= 1.0:
                raise ValueError("correlations must lie in [-1, 1]")


_ROWS_PRODUCT = (1, 2, 3)      # Z between X and Y (chain/fork): rho_xz * rho_yz
_ROW_COLLIDER = 4              # X -> Z <- Y: independent pair
_ROWS_Y_MEDIATES = (5, 6, 7)   # X ... Y -> Z: rho_xz / rho_yz
_ROWS_X_MEDIATES = (9, 10, 11)  # Y ... X -> Z: rho_yz / rho_xz
_ROWS_UNIDENTIFIED = (8, 12)
ALL_ROWS = tuple(range(1, 13))


def _check_row(row: int):
    if row not in ALL_ROWS:
        raise PreconditionError(f"row must be in 1..12, got {row}")


def trivariate_linear(stats: TrivariateStats, row: int) -> float | Abstained:
    _check_row(row)
    if row in _ROWS_PRODUCT:
        return _clip(stats.rho_xz * stats.rho_yz)
    if row == _ROW_COLLIDER:
        return 0.0
    if row in _ROWS_UNIDENTIFIED:
        return Abstained("NotIdentified", "no trivariate formula for this structure")
    num, den = (
        (stats.rho_xz, stats.rho_yz) if row in _ROWS_Y_MEDIATES
        else (stats.rho_yz, stats.rho_xz)
    )
    if abs(den) < DENOM_TOLERANCE:
        return Abstained("DegenerateDenominator", f"|denominator| < {DENOM_TOLERANCE}")
    return _clip(num / den)


def check_necessary_conditions(stats: TrivariateStats, row: int) -> bool:
    _check_row(row)
    rxz, ryz = stats.rho_xz, stats.rho_yz
    if row == _ROW_COLLIDER and rxz**2 + ryz**2 > 1.0:
        return False
    if row in _ROWS_Y_MEDIATES and abs(rxz) > abs(ryz):
        return False
    if row in _ROWS_X_MEDIATES and abs(ryz) > abs(rxz):
        return False
    rho_xy = trivariate_linear(stats, row)
    if isinstance(rho_xy, Abstained):
        return True
    corr = np.array([[1.0, rho_xy, rxz], [rho_xy, 1.0, ryz], [rxz, ryz, 1.0]])
    return bool(np.linalg.eigvalsh(corr).min() >= -1e-9)


# ---------------------------------------------------------------------------
# Stochastic-matrix predictors (discrete trivariate case)
# ---------------------------------------------------------------------------

_STOCHASTIC_SLACK = 1e-6


@dataclass(frozen=True)
class StochasticMatrix:
    """Conditional distribution matrix: entry (i, j) = P(row_i | col_j)."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", entries)
        if entries.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError("entry shape does not match the labels")
        if np.any(entries < -1e-9):
            raise ValueError("negative conditional probability")
        if np.any(np.abs(entries.sum(axis=0) - 1.0) > 1e-9):
            raise ValueError("columns must sum to 1")


def trivariate_stochastic(
    a: StochasticMatrix, b: StochasticMatrix, row: int
) -> StochasticMatrix | Abstained:
    """Discrete analogue of the ratio predictors.

    Rows 5-7 (Y mediates towards Z): P(Y|X) = inverse(P(Z|Y)) . P(Z|X),
    with a = P(Z|Y), b = P(Z|X). Rows 9-11 mirror the composition:
    P(Y|X) = P(Y|Z) . inverse(P(X|Z)), with a = P(Y|Z), b = P(X|Z).
    """
    _check_row(row)
    if row in _ROWS_Y_MEDIATES:
        inv_side, keep = a, b
    elif row in _ROWS_X_MEDIATES:
        inv_side, keep = b, a
    else:
        raise PreconditionError("stochastic predictor applies to rows 5-7 and 9-11 only")
    m = inv_side.entries
    if m.shape[0] != m.shape[1]:
        return Abstained("IllConditioned", "conditional matrix not square")
    if np.linalg.cond(m) > CONDITION_CAP:
        return Abstained("IllConditioned", f"condition number exceeds {CONDITION_CAP:g}")
    if row in _ROWS_Y_MEDIATES:
        out = np.linalg.inv(m) @ keep.entries
        row_labels, col_labels = inv_side.col_labels, keep.col_labels
    else:
        out = keep.entries @ np.linalg.inv(m)
        row_labels, col_labels = keep.row_labels, inv_side.row_labels
    if np.any(out < -_STOCHASTIC_SLACK) or np.any(
        np.abs(out.sum(axis=0) - 1.0) > _STOCHASTIC_SLACK
    ):
        return Abstained("InfeasibleComposition", "result is not column-stochastic")
    out = np.clip(out, 0.0, None)
    out /= out.sum(axis=0, keepdims=True)
    return StochasticMatrix(row_labels, col_labels, out)
