"""Cross-validation over left-out variable pairs.

For each pair (X, Y): decide the edge status from the two marginal graphs,
predict the X-Y correlation from split data that never observes the pair
jointly, and score the prediction against a held-out third. Also houses the
graph-perturbation plumbing and the rank-correlation study linking
prediction error to graph accuracy.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import stdtr

from .edge_rules import (
    AbstentionError,
    EdgeDecision,
    MarginalPair,
    PreconditionError,
    Verdict,
    classify_edge_admg_no_confounded_links,
    classify_edge_dag,
    exclude_link_admg,
    union_of_parents,
)
from .graph import Admg, CycleError, GraphError, latent_project, shd
from .predictors import (
    Abstained,
    PredictionRecord,
    lingam_lovo,
    maxent_baseline,
    random_adjustment_baseline,
    three_step_parent_adjustment,
)
from .scm import Dataset

PREDICTORS = ("parent", "lingam")
BASELINES = ("maxent", "random")
RULES = ("dag", "admg", "no-confounded-links")


class AdapterError(Exception):
    """A marginal-graph provider failed for a pair; recorded as abstention."""


@dataclass(frozen=True)
class CrossValConfig:
    predictor: str = "parent"
    baseline: str = "maxent"
    rule: str = "dag"
    split: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    seed: int = 0
    pairs: tuple[tuple[str, str], ...] | None = None
    abstention_policy: str = "SkipPair"

    def __post_init__(self):
        if self.predictor not in PREDICTORS:
            raise PreconditionError(f"predictor must be one of {PREDICTORS}")
        if self.baseline not in BASELINES:
            raise PreconditionError(f"baseline must be one of {BASELINES}")
        if self.rule not in RULES:
            raise PreconditionError(f"rule must be one of {RULES}")
        if len(self.split) != 3 or any(f <= 0 for f in self.split):
            raise PreconditionError("split needs three positive fractions")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise PreconditionError("split fractions must sum to 1")
        if self.abstention_policy != "SkipPair":
            raise PreconditionError("only the SkipPair abstention policy is supported")

    def to_json(self) -> dict:
        return {
            "predictor": self.predictor,
            "baseline": self.baseline,
            "rule": self.rule,
            "split": list(self.split),
            "seed": self.seed,
            "pairs": [list(p) for p in self.pairs] if self.pairs else None,
            "abstention_policy": self.abstention_policy,
        }


@dataclass(frozen=True)
class CrossValReport:
    config: CrossValConfig
    records: tuple[PredictionRecord, ...]
    cv_lovo: float
    cv_base: float
    abstained_fraction: float
    pairs_used: int
    no_pairs: bool

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "records": [r.to_json() for r in self.records],
            "cv_lovo": self.cv_lovo,
            "cv_base": self.cv_base,
            "abstained_fraction": self.abstained_fraction,
            "pairs_used": self.pairs_used,
            "no_pairs": self.no_pairs,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True)
class AccuracyMetrics:
    false_absence_rate: float
    shd_sum: float

    def __post_init__(self):
        if not 0.0 <= self.false_absence_rate <= 1.0:
            raise ValueError("false_absence_rate must lie in [0, 1]")
        if self.shd_sum < 0:
            raise ValueError("shd_sum must be non-negative")


# ---------------------------------------------------------------------------
# Marginal-graph providers
# ---------------------------------------------------------------------------

class OracleProvider:
    """True marginal graphs by projecting the joint graph."""

    def __init__(self, joint: Admg):
        self.joint = joint

    def __call__(self, x: str, y: str) -> MarginalPair:
        return MarginalPair.from_joint(self.joint, x, y)


def decide_edge(mp: MarginalPair, rule: str) -> EdgeDecision:
    if rule == "dag":
        return classify_edge_dag(mp)
    if rule == "admg":
        return exclude_link_admg(mp)
    if rule == "no-confounded-links":
        return classify_edge_admg_no_confounded_links(mp)
    raise PreconditionError(f"unknown rule {rule!r}")


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

def split_three_ways(data: Dataset, fractions) -> tuple[Dataset, Dataset, Dataset]:
    """Contiguous thirds; the holdout part is never shown to a predictor."""
    n = data.n
    n1 = int(math.floor(fractions[0] * n))
    n2 = int(math.floor(fractions[1] * n))
    if min(n1, n2, n - n1 - n2) < 3:
        raise PreconditionError("each split part needs at least 3 rows")
    return data.rows(slice(0, n1)), data.rows(slice(n1, n1 + n2)), data.rows(slice(n1 + n2, n))


def _holdout_corr(holdout: Dataset, x: str, y: str) -> float:
    c = np.corrcoef(holdout.column(x), holdout.column(y))[0, 1]
    return float(np.clip(c, -1.0, 1.0))


def _predict_pair(
    dx: Dataset, dy: Dataset, mp: MarginalPair, decision: EdgeDecision, cfg: CrossValConfig, seed
) -> PredictionRecord | None:
    """Predictor record for a decided pair, or None when the decided status
    is outside the predictor's scope (parent adjustment needs Absent)."""
    if cfg.predictor == "parent":
        if decision.verdict is not Verdict.ABSENT:
            return None
        try:
            zs = union_of_parents(mp, decision)
        except AbstentionError as err:
            return PredictionRecord(
                (mp.x, mp.y), "ParentAdjustment", Abstained(err.reason, err.detail)
            )
        return three_step_parent_adjustment(dx, dy, zs)
    return lingam_lovo(dx, dy, mp, decision)


def _baseline_pair(
    dx: Dataset, dy: Dataset, record: PredictionRecord, cfg: CrossValConfig, seed: int
) -> PredictionRecord:
    if cfg.baseline == "maxent":
        return maxent_baseline(dx, dy)
    z = set(dx.columns) & set(dy.columns)
    size = len(record.adjustment.members) if record.adjustment else len(z)
    return random_adjustment_baseline(dx, dy, size=min(size, len(z)), seed=seed)


def run_crossval(joint_data: Dataset, provider, cfg: CrossValConfig) -> CrossValReport:
    columns = joint_data.columns
    part1, part2, holdout = split_three_ways(joint_data, cfg.split)
    pairs = cfg.pairs or tuple(itertools.combinations(sorted(columns), 2))

    records: list[PredictionRecord] = []
    for i, (a, b) in enumerate(pairs):
        chosen = None
        adapter_failed = None
        for x, y in ((a, b), (b, a)):
            try:
                mp = provider(x, y)
            except AdapterError as err:
                adapter_failed = str(err)
                continue
            decision = decide_edge(mp, cfg.rule)
            if decision.verdict is Verdict.UNDECIDABLE:
                continue
            chosen = (mp, decision)
            break
        if chosen is None:
            if adapter_failed is not None:
                records.append(
                    PredictionRecord(
                        (a, b), "ParentAdjustment" if cfg.predictor == "parent" else "Lingam",
                        Abstained("AdapterError", adapter_failed),
                    )
                )
            continue
        mp, decision = chosen
        z = sorted(set(columns) - {mp.x, mp.y})
        dx = part1.restrict([mp.x] + z)
        dy = part2.restrict([mp.y] + z)
        record = _predict_pair(dx, dy, mp, decision, cfg, seed=(cfg.seed, i))
        if record is None:
            continue
        base = _baseline_pair(dx, dy, record, cfg, seed=abs(hash((cfg.seed, i))) % 2**32)
        rho_base = base.rho_lovo
        if isinstance(rho_base, Abstained):
            record = PredictionRecord(
                record.pair, record.method,
                Abstained("SingularRegression", "baseline degenerate"),
                adjustment=record.adjustment,
            )
            rho_base = None
        rho_hat = _holdout_corr(holdout, mp.x, mp.y)
        records.append(
            PredictionRecord(
                record.pair, record.method, record.rho_lovo,
                rho_base=rho_base, rho_holdout=rho_hat, adjustment=record.adjustment,
            )
        )

    used = [r for r in records if not r.abstained]
    abstained = len(records) - len(used)
    if used:
        cv_lovo = float(np.mean([abs(r.rho_lovo - r.rho_holdout) for r in used]))
        cv_base = float(np.mean([abs(r.rho_base - r.rho_holdout) for r in used]))
    else:
        cv_lovo = cv_base = float("nan")
    return CrossValReport(
        config=cfg,
        records=tuple(records),
        cv_lovo=cv_lovo,
        cv_base=cv_base,
        abstained_fraction=abstained / len(records) if records else 0.0,
        pairs_used=len(used),
        no_pairs=not used,
    )


# ---------------------------------------------------------------------------
# Graph perturbation and accuracy accounting
# ---------------------------------------------------------------------------

_EDIT_KINDS = ("add_dir", "remove_dir", "reverse_dir", "add_bi", "remove_bi")


def perturb_graph(g: Admg, flips: int, seed: int) -> Admg:
    """Random atomic edits (add/remove/reverse directed, add/remove
    bidirected); cycle-creating draws are rejected and redrawn."""
    if flips < 0:
        raise PreconditionError("flips must be non-negative")
    rng = np.random.default_rng(seed)
    nodes = g.nodes
    if len(nodes) < 2:
        return g
    current = g
    for _ in range(flips):
        for _attempt in range(1000):
            kind = _EDIT_KINDS[rng.integers(len(_EDIT_KINDS))]
            i, j = rng.choice(len(nodes), size=2, replace=False)
            a, b = nodes[i], nodes[j]
            try:
                nxt = _apply_edit(current, kind, a, b)
            except (GraphError, CycleError):
                continue
            if nxt is not None:
                current = nxt
                break
        else:  # pragma: no cover - only reachable on pathological graphs
            raise PreconditionError("no applicable edit found")
    return current


def _apply_edit(g: Admg, kind: str, a: str, b: str) -> Admg | None:
    directed, bidirected = set(g.directed), set(g.bidirected)
    if kind == "add_dir":
        if g.has_directed(a, b) or g.has_directed(b, a):
            return None
        directed.add((a, b))
    elif kind == "remove_dir":
        if not g.has_directed(a, b):
            return None
        directed.remove((a, b))
    elif kind == "reverse_dir":
        if not g.has_directed(a, b):
            return None
        directed.remove((a, b))
        directed.add((b, a))
    elif kind == "add_bi":
        if g.has_bidirected(a, b):
            return None
        bidirected.add((a, b))
    else:
        if not g.has_bidirected(a, b):
            return None
        bidirected.discard((a, b) if a <= b else (b, a))
    return Admg.create(g.nodes, directed, bidirected)


def provider_accuracy(true_joint: Admg, provider, rule: str = "dag", pairs=None) -> AccuracyMetrics:
    """How wrong the provided marginal graphs are, relative to the truth:
    fraction of Absent verdicts on truly linked pairs, and the mean summed
    marginal-graph distance."""
    nodes = sorted(true_joint.nodes)
    pairs = pairs or tuple(itertools.combinations(nodes, 2))
    absent_claims = 0
    false_absent = 0
    shd_total = 0.0
    counted = 0
    for x, y in pairs:
        try:
            mp = provider(x, y)
        except AdapterError:
            continue
        counted += 1
        true_mp = MarginalPair.from_joint(true_joint, x, y)
        shd_total += shd(mp.gx, true_mp.gx) + shd(mp.gy, true_mp.gy)
        if decide_edge(mp, rule).verdict is Verdict.ABSENT:
            absent_claims += 1
            if true_joint.adjacent(x, y):
                false_absent += 1
    far = false_absent / absent_claims if absent_claims else 0.0
    return AccuracyMetrics(far, shd_total / counted if counted else 0.0)


# ---------------------------------------------------------------------------
# Rank correlation
# ---------------------------------------------------------------------------

def _average_ranks(xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    order = np.argsort(xs, kind="mergesort")
    ranks = np.empty(len(xs))
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs, ys) -> tuple[float, float] | Abstained:
    """Rank correlation with average ranks and the large-sample t p-value."""
    xs, ys = list(xs), list(ys)
    if len(xs) != len(ys):
        raise PreconditionError("inputs must have equal length")
    n = len(xs)
    if n < 3:
        raise PreconditionError("need at least 3 observations")
    rx, ry = _average_ranks(xs), _average_ranks(ys)
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        return Abstained("Undefined", "constant input")
    rho = float(np.corrcoef(rx, ry)[0, 1])
    if abs(rho) >= 1.0 - 1e-12:
        return float(np.sign(rho)), 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return rho, p


@dataclass(frozen=True)
class StudySummary:
    rows: tuple[dict, ...]  # replication, cv_lovo, cv_base, false_absence_rate, shd_sum
    rho_far: float | Abstained
    p_far: float | None
    rho_shd: float | Abstained
    p_shd: float | None

    def save_csv(self, path):
        cols = ["replication", "cv_lovo", "cv_base", "false_absence_rate", "shd_sum"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            writer.writeheader()
            writer.writerows(self.rows)


def correlate_error_with_accuracy(reports) -> StudySummary:
    """Spearman correlation of the cross-validation error with the two
    graph-accuracy metrics across replications."""
    reports = list(reports)
    if len(reports) < 10:
        raise PreconditionError("need at least 10 (report, accuracy) pairs")
    rows = []
    for i, (rep, acc) in enumerate(reports):
        rows.append(
            {
                "replication": i,
                "cv_lovo": rep.cv_lovo,
                "cv_base": rep.cv_base,
                "false_absence_rate": acc.false_absence_rate,
                "shd_sum": acc.shd_sum,
            }
        )
    usable = [r for r in rows if not math.isnan(r["cv_lovo"])]
    cvs = [r["cv_lovo"] for r in usable]
    fars = [r["false_absence_rate"] for r in usable]
    shds = [r["shd_sum"] for r in usable]
    res_far = spearman(cvs, fars) if len(usable) >= 3 else Abstained("Undefined", "too few")
    res_shd = spearman(cvs, shds) if len(usable) >= 3 else Abstained("Undefined", "too few")
    rho_far, p_far = (res_far, None) if isinstance(res_far, Abstained) else res_far
    rho_shd, p_shd = (res_shd, None) if isinstance(res_shd, Abstained) else res_shd
    return StudySummary(tuple(rows), rho_far, p_far, rho_shd, p_shd)
