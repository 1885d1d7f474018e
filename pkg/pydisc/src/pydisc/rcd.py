"""Simplified Repetitive Causal Discovery (RCD).

Repeatedly establishes ancestor relations between variable pairs after
removing the influence of their common known ancestors: a pair is oriented
when the regression residual is independent of the regressor in exactly one
direction (linear non-Gaussian identification). Pairs that stay dependent
without any ancestral relation are reported as confounded (bidirected).

The output follows the ADMG convention that forbids a directed and a
bidirected edge between the same pair ("no-confounded-links").
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import stats


def _standardize(u: np.ndarray) -> np.ndarray:
    s = u.std()
    if s < 1e-12:
        raise ValueError("degenerate (constant) variable")
    return (u - u.mean()) / s


def _residual(y: np.ndarray, design_cols: list[np.ndarray]) -> np.ndarray:
    if not design_cols:
        return y - y.mean()
    design = np.column_stack(design_cols + [np.ones(len(y))])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    return y - design @ coef


def _corr_pvalue(u: np.ndarray, v: np.ndarray) -> float:
    """Two-sided p-value for zero correlation via the Fisher transform."""
    n = len(u)
    su, sv = u.std(), v.std()
    if su < 1e-12 or sv < 1e-12:
        return 1.0
    r = float(np.clip(np.mean((u - u.mean()) * (v - v.mean())) / (su * sv), -0.999999, 0.999999))
    z = np.arctanh(r) * np.sqrt(max(n - 3, 1))
    return float(2.0 * stats.norm.sf(abs(z)))


def _independent(u: np.ndarray, v: np.ndarray, alpha: float) -> bool:
    """Moment-based independence test for linear non-Gaussian residuals.

    The linear correlation of (u, v) is zero by construction after OLS, so
    dependence shows up in cross-moments of nonlinear transforms.
    """
    u = _standardize(u)
    v = _standardize(v)
    transforms = [(u * u, v), (u, v * v), (u * u, v * v), (u**3, v)]
    pvals = [_corr_pvalue(f, g) for f, g in transforms]
    # Bonferroni over the four moment tests.
    return min(pvals) * len(pvals) > alpha


def rcd(data: np.ndarray, columns: list[str], alpha: float = 0.01) -> dict:
    """Learn an ADMG (no-confounded-links convention) from the data matrix."""
    if data.ndim != 2 or data.shape[1] != len(columns):
        raise ValueError("data shape does not match the column names")
    if data.shape[0] < data.shape[1] + 3:
        raise ValueError("not enough rows to fit the model")
    d = len(columns)
    x = np.column_stack([_standardize(data[:, k]) for k in range(d)])
    ancestors: list[set[int]] = [set() for _ in range(d)]

    def add_ancestor(a: int, b: int) -> bool:
        """Record a as an ancestor of b (with transitive closure)."""
        new = ({a} | ancestors[a]) - ancestors[b]
        if b in new:  # would create a cycle; treat the pair as unresolved
            return False
        if not new:
            return False
        ancestors[b] |= new
        for k in range(d):
            if b in ancestors[k]:
                if k in new:
                    return False
                ancestors[k] |= new
        return True

    changed = True
    while changed:
        changed = False
        for i, j in itertools.combinations(range(d), 2):
            if i in ancestors[j] or j in ancestors[i]:
                continue
            common = sorted(ancestors[i] & ancestors[j])
            yi = _residual(x[:, i], [x[:, c] for c in common])
            yj = _residual(x[:, j], [x[:, c] for c in common])
            if _corr_pvalue(yi, yj) > alpha:
                continue  # no (remaining) dependence between the pair
            rij = _residual(yj, [yi])  # residual of j given i
            rji = _residual(yi, [yj])
            i_causes_j = _independent(yi, rij, alpha)
            j_causes_i = _independent(yj, rji, alpha)
            if i_causes_j and not j_causes_i:
                changed |= add_ancestor(i, j)
            elif j_causes_i and not i_causes_j:
                changed |= add_ancestor(j, i)
            # both or neither: direction unresolved for now

    directed: set[tuple[int, int]] = set()
    bidirected: set[tuple[int, int]] = set()
    for j in range(d):
        for i in sorted(ancestors[j]):
            # i is a parent iff its effect survives adjusting for the
            # other ancestors of j.
            others = [x[:, k] for k in sorted(ancestors[j] - {i})]
            ri = _residual(x[:, i], others)
            rj = _residual(x[:, j], others)
            if _corr_pvalue(ri, rj) < alpha:
                directed.add((i, j))
    for i, j in itertools.combinations(range(d), 2):
        if i in ancestors[j] or j in ancestors[i]:
            continue
        pool = [x[:, k] for k in sorted((ancestors[i] | ancestors[j]) - {i, j})]
        ri = _residual(x[:, i], pool)
        rj = _residual(x[:, j], pool)
        if _corr_pvalue(ri, rj) < alpha:
            bidirected.add((i, j))

    return {
        "nodes": list(columns),
        "directed": sorted([columns[a], columns[b]] for a, b in directed),
        "bidirected": sorted([columns[a], columns[b]] for a, b in bidirected),
        "convention": "no-confounded-links",
    }
