"""Linear additive noise models on DAGs.

A structure matrix (row = child, column = parent) together with independent
centered non-Gaussian noise defines the data-generating process; everything
needed downstream (simulation, population covariance, total causal effects)
is derived from it analytically or by sampling.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .graph import Admg, graph_from_json, graph_to_json


class ScmError(ValueError):
    pass


class DegenerateStructureError(ScmError):
    """Faithfulness could not be reached within the resampling cap."""


FAITHFULNESS_TOLERANCE = 1e-6
RESAMPLE_CAP = 100


@dataclass(frozen=True)
class NoiseSpec:
    """Centered non-Gaussian noise: 'uniform' on [-halfwidth, halfwidth]
    or 'shifted_exponential' with the given rate, shifted to mean zero."""

    dist: str = "uniform"
    param: float = 1.0

    def __post_init__(self):
        if self.dist not in ("uniform", "shifted_exponential"):
            raise ScmError(f"unknown noise distribution {self.dist!r}")
        if self.param <= 0:
            raise ScmError("noise parameter must be positive")

    @property
    def variance(self) -> float:
        if self.dist == "uniform":
            return self.param**2 / 3.0
        return 1.0 / self.param**2

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.dist == "uniform":
            return rng.uniform(-self.param, self.param, size=n)
        return rng.exponential(1.0 / self.param, size=n) - 1.0 / self.param

    def to_json(self) -> dict:
        if self.dist == "uniform":
            return {"dist": "uniform", "halfwidth": self.param}
        return {"dist": "shifted_exponential", "rate": self.param}

    @classmethod
    def from_json(cls, obj: dict) -> "NoiseSpec":
        if obj.get("dist") == "uniform":
            return cls("uniform", obj["halfwidth"])
        if obj.get("dist") == "shifted_exponential":
            return cls("shifted_exponential", obj["rate"])
        raise ScmError(f"unknown noise spec {obj!r}")


@dataclass(frozen=True)
class Dataset:
    """Column-named sample matrix. Standardization is always explicit."""

    columns: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2 or vals.shape[1] != len(self.columns):
            raise ScmError("values must be an n x d matrix matching the columns")
        if vals.shape[0] < 1:
            raise ScmError("dataset needs at least one row")
        if len(set(self.columns)) != len(self.columns):
            raise ScmError("duplicate column names")
        if not np.all(np.isfinite(vals)):
            raise ScmError("dataset contains missing or non-finite values")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def restrict(self, columns) -> "Dataset":
        columns = tuple(columns)
        idx = [self.columns.index(c) for c in columns]
        return Dataset(columns, self.values[:, idx])

    def rows(self, sl) -> "Dataset":
        return Dataset(self.columns, self.values[sl])

    def standardized(self) -> "Dataset":
        v = self.values
        sd = v.std(axis=0, ddof=1)
        return Dataset(self.columns, (v - v.mean(axis=0)) / sd)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.columns)
            writer.writerows(self.values.tolist())

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header:
                raise ScmError("empty CSV")
            rows = [[float(v) for v in row] for row in reader if row]
        if not rows:
            raise ScmError("CSV has no data rows")
        return cls(tuple(header), np.array(rows, dtype=float))


@dataclass(frozen=True)
class ScmGenConfig:
    coeff_low: float = 0.5
    coeff_high: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.coeff_low <= self.coeff_high):
            raise ScmError("need 0 < coeff_low <= coeff_high")


@dataclass(frozen=True)
class LinearScm:
    graph: Admg
    lam: np.ndarray  # lam[i, j]: coefficient of parent j in child i's equation
    noise: tuple[NoiseSpec, ...]

    def __post_init__(self):
        if not self.graph.is_dag:
            raise ScmError("linear SCM requires a DAG")
        lam = np.asarray(self.lam, dtype=float)
        object.__setattr__(self, "lam", lam)
        d = len(self.graph.nodes)
        if lam.shape != (d, d):
            raise ScmError("structure matrix shape does not match the graph")
        if len(self.noise) != d:
            raise ScmError("need one noise spec per node")
        idx = {n: i for i, n in enumerate(self.graph.nodes)}
        mask = np.zeros((d, d), dtype=bool)
        for p, c in self.graph.directed:
            mask[idx[c], idx[p]] = True
        if np.any(lam[~mask] != 0.0):
            raise ScmError("structure matrix has entries off the graph's edges")

    @property
    def node_index(self) -> dict:
        return {n: i for i, n in enumerate(self.graph.nodes)}

    def to_json(self) -> dict:
        return {
            "graph": graph_to_json(self.graph),
            "lambda": self.lam.tolist(),
            "noise": [ns.to_json() for ns in self.noise],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LinearScm":
        return cls(
            graph_from_json(obj["graph"]),
            np.array(obj["lambda"], dtype=float),
            tuple(NoiseSpec.from_json(ns) for ns in obj["noise"]),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "LinearScm":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def sample_structure(
    g: Admg,
    cfg: ScmGenConfig,
    noise: NoiseSpec | None = None,
    faithfulness_tolerance: float = FAITHFULNESS_TOLERANCE,
) -> LinearScm:
    """Coefficients uniform on [-high,-low] u [low,high]; the whole matrix is
    resampled until every edge's total effect clears the tolerance."""
    if not g.is_dag:
        raise ScmError("structure sampling requires a DAG")
    rng = np.random.default_rng(cfg.seed)
    noise = noise or NoiseSpec("uniform", 1.0)
    d = len(g.nodes)
    idx = {n: i for i, n in enumerate(g.nodes)}
    edges = sorted(g.directed)
    for _ in range(RESAMPLE_CAP):
        lam = np.zeros((d, d))
        for p, c in edges:
            mag = rng.uniform(cfg.coeff_low, cfg.coeff_high)
            sign = 1.0 if rng.random() < 0.5 else -1.0
            lam[idx[c], idx[p]] = sign * mag
        scm = LinearScm(g, lam, tuple(noise for _ in range(d)))
        m = total_effects(scm)
        if all(abs(m[idx[c], idx[p]]) > faithfulness_tolerance for p, c in edges):
            return scm
    raise DegenerateStructureError("faithfulness tolerance never satisfied")


def simulate(scm: LinearScm, n: int, seed: int) -> Dataset:
    """Draw n i.i.d. rows of W = (I - Lambda)^{-1} N."""
    if n < 1:
        raise ScmError("need n >= 1")
    rng = np.random.default_rng(seed)
    d = len(scm.graph.nodes)
    noise = np.column_stack([ns.draw(rng, n) for ns in scm.noise])
    eye = np.eye(d)
    w = np.linalg.solve(eye - scm.lam, noise.T).T
    return Dataset(scm.graph.nodes, w)


def total_effects(scm: LinearScm) -> np.ndarray:
    """Mixing matrix (I - Lambda)^{-1}: entry (i, j) sums coefficient
    products over directed paths j -> i; diagonal is 1 by convention."""
    d = len(scm.graph.nodes)
    return np.linalg.inv(np.eye(d) - scm.lam)


def analytic_covariance(scm: LinearScm) -> np.ndarray:
    m = total_effects(scm)
    omega = np.array([ns.variance for ns in scm.noise])
    return m @ np.diag(omega) @ m.T


def analytic_correlation(scm: LinearScm) -> np.ndarray:
    cov = analytic_covariance(scm)
    sd = np.sqrt(np.diag(cov))
    return cov / np.outer(sd, sd)


# ---------------------------------------------------------------------------
# Ambiguity witness (same marginals, different joints)
# ---------------------------------------------------------------------------

COUPLINGS = ("independent", "comonotone", "antimonotone")


def ambiguity_witness(
    coupling: str,
    n: int,
    seed: int,
    slope_x: float = 1.0,
    slope_y: float = 1.0,
    noise_scale: float = 0.5,
    z_constant: bool = False,
) -> Dataset:
    """Joint samples over (X, Z, Y) whose (X, Z) and (Y, Z) marginals do not
    depend on the coupling of the two uniform noise terms.

    X and Y are conditional-quantile transforms of uniform noises N_X, N_Y
    given Z; the coupling sets N_Y = N_X (comonotone), N_Y = 1 - N_X
    (antimonotone) or draws them independently. Identical seeds reuse the
    same (Z, N_X) stream across couplings.
    """
    if coupling not in COUPLINGS:
        raise ScmError(f"coupling must be one of {COUPLINGS}")
    rng = np.random.default_rng(seed)
    z = np.zeros(n) if z_constant else rng.uniform(-1.0, 1.0, size=n)
    nx = rng.uniform(size=n)
    if coupling == "comonotone":
        ny = nx
    elif coupling == "antimonotone":
        ny = 1.0 - nx
    else:
        ny = rng.uniform(size=n)
    # Gaussian conditional quantiles: linear in ndtri(noise)
    eps = 1e-12
    x = slope_x * z + noise_scale * ndtri(np.clip(nx, eps, 1 - eps))
    y = slope_y * z + noise_scale * ndtri(np.clip(ny, eps, 1 - eps))
    return Dataset(("X", "Z", "Y"), np.column_stack([x, z, y]))
