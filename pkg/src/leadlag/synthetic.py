"""Lagged latent-factor benchmark generators with known ground truth.

Every setting drives p observed series from one (or K) i.i.d. latent
series through a per-series transform applied at a per-series lag, plus
independent Gaussian noise.  Two series belong to the same ground-truth
cluster exactly when they load on the same factor at the same lag, and i
leads j exactly when they share a factor and l_i < l_j.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from math import factorial
from pathlib import Path

import numpy as np
from numpy.polynomial import hermite_e, legendre

from .panel import PanelKind, TimeSeriesPanel
from .seeding import derive_rng

SIGMA_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 2.0, 3.0, 4.0)

DEFAULT_T = 250
DEFAULT_P = 100


class Setting(Enum):
    LINEAR = "linear"
    COSINE = "cosine"
    LEGENDRE = "legendre"
    HERMITE = "hermite"
    HETEROGENEOUS = "heterogeneous"


@dataclass(frozen=True)
class SyntheticSpec:
    """Full description of one synthetic panel draw."""

    setting: Setting
    T: int
    p: int
    sigma: float
    lag_assignment: tuple[int, ...]
    factor_assignment: tuple[int, ...] | None = None
    K: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        setting = Setting(self.setting)
        lags = tuple(int(l) for l in self.lag_assignment)
        object.__setattr__(self, "setting", setting)
        object.__setattr__(self, "lag_assignment", lags)
        if self.T < 1 or self.p < 1:
            raise ValueError("T and p must be positive")
        if self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        if len(lags) != self.p:
            raise ValueError("one lag per series required")
        if min(lags) < 0:
            raise ValueError("lags must be nonnegative")
        if setting is Setting.COSINE and min(lags) < 1:
            raise ValueError("cosine lags must be >= 1")
        if setting in (Setting.LEGENDRE, Setting.HERMITE) and min(lags) < 2:
            raise ValueError("legendre/hermite lags must be >= 2")
        if setting is Setting.HETEROGENEOUS:
            if self.K is None or self.K < 1:
                raise ValueError("heterogeneous setting needs a positive factor count K")
            if self.factor_assignment is None:
                raise ValueError("heterogeneous setting needs a factor assignment")
            factors = tuple(int(f) for f in self.factor_assignment)
            if len(factors) != self.p:
                raise ValueError("one factor per series required")
            if min(factors) < 0 or max(factors) >= self.K:
                raise ValueError("factors must lie in {0..K-1}")
            object.__setattr__(self, "factor_assignment", factors)
        elif self.factor_assignment is not None or self.K is not None:
            raise ValueError("factor_assignment/K apply to the heterogeneous setting only")


@dataclass(frozen=True)
class GroundTruth:
    """Cluster labels and the signed lead matrix implied by the lags."""

    labels: np.ndarray
    edge_direction: np.ndarray
    lag_assignment: tuple[int, ...]
    factor_assignment: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=int).copy()
        edges = np.asarray(self.edge_direction, dtype=int).copy()
        if labels.ndim != 1:
            raise ValueError("labels must be a vector")
        p = labels.size
        if edges.shape != (p, p):
            raise ValueError("edge_direction must be p x p")
        if not np.isin(edges, (-1, 0, 1)).all():
            raise ValueError("edge_direction entries must be -1, 0 or +1")
        if (edges + edges.T).any():
            raise ValueError("edge_direction must be sign-antisymmetric")
        labels.setflags(write=False)
        edges.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "edge_direction", edges)
        object.__setattr__(self, "lag_assignment", tuple(int(l) for l in self.lag_assignment))
        if self.factor_assignment is not None:
            object.__setattr__(
                self, "factor_assignment", tuple(int(f) for f in self.factor_assignment)
            )

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1


def ground_truth_for(
    lags: tuple[int, ...], factors: tuple[int, ...] | None = None
) -> GroundTruth:
    """Truth implied by lag/factor assignments.

    Labels enumerate the distinct (factor, lag) pairs in sorted order; i
    leads j exactly when both load on the same factor and l_i < l_j.
    """
    lags = tuple(int(l) for l in lags)
    p = len(lags)
    fac = tuple(int(f) for f in factors) if factors is not None else (0,) * p
    keys = sorted(set(zip(fac, lags)))
    index = {key: c for c, key in enumerate(keys)}
    labels = np.array([index[(f, l)] for f, l in zip(fac, lags)], dtype=int)
    lag_arr = np.asarray(lags)
    fac_arr = np.asarray(fac)
    same_factor = fac_arr[:, None] == fac_arr[None, :]
    edges = np.where(
        same_factor, np.sign(lag_arr[None, :] - lag_arr[:, None]).astype(int), 0
    )
    return GroundTruth(labels, edges, lags, factors if factors is not None else None)


def default_spec(
    setting: Setting | str,
    sigma: float,
    T: int = DEFAULT_T,
    p: int = DEFAULT_P,
    seed: int = 0,
) -> SyntheticSpec:
    """Benchmark configuration: blocks of equal-lag series.

    For the single-factor settings series i (1-based) gets lag
    floor((i-1)/10) plus the setting's offset (cosine +1, polynomial +2),
    giving 10 equal clusters at p=100.  The heterogeneous setting splits
    the panel between K=2 factors with lag floor((i-1)/5) within each
    half, giving 20 clusters of 5.
    """
    setting = Setting(setting)
    idx = np.arange(1, p + 1)
    if setting is Setting.HETEROGENEOUS:
        half = p // 2
        factors = tuple(int(f) for f in (idx - 1) // max(half, 1))
        lags = tuple(
            int((i - 1) // 5) if i <= half else int((i - half - 1) // 5) for i in idx
        )
        return SyntheticSpec(setting, T, p, float(sigma), lags, factors, K=2, seed=seed)
    offset = {Setting.LINEAR: 0, Setting.COSINE: 1, Setting.LEGENDRE: 2, Setting.HERMITE: 2}
    lags = tuple(int((i - 1) // 10 + offset[setting]) for i in idx)
    return SyntheticSpec(setting, T, p, float(sigma), lags, seed=seed)


def legendre_poly(m: int, x: np.ndarray | float) -> np.ndarray | float:
    """Legendre polynomial P_m evaluated pointwise."""
    if m < 0:
        raise ValueError("degree must be nonnegative")
    basis = np.zeros(m + 1)
    basis[m] = 1.0
    return legendre.legval(x, basis)


def hermite_poly(m: int, x: np.ndarray | float) -> np.ndarray | float:
    """Probabilists' Hermite polynomial He_m evaluated pointwise."""
    if m < 0:
        raise ValueError("degree must be nonnegative")
    basis = np.zeros(m + 1)
    basis[m] = 1.0
    return hermite_e.hermeval(x, basis)


def _lagged(z: np.ndarray, lag: int) -> np.ndarray:
    """z_{t-lag} for t = 1..T with z_s = 0 for s <= 0."""
    T = z.shape[0]
    if lag == 0:
        return z
    out = np.zeros_like(z)
    if lag < T:
        out[lag:] = z[: T - lag]
    return out


def generate(spec: SyntheticSpec) -> tuple[TimeSeriesPanel, GroundTruth]:
    """Draw one panel; bit-identical for a fixed spec."""
    rng = derive_rng(spec.seed)
    T, p = spec.T, spec.p
    setting = spec.setting
    if setting is Setting.LINEAR:
        z = rng.standard_normal(T)
    elif setting is Setting.COSINE:
        z = rng.uniform(-np.pi, np.pi, T)
    elif setting is Setting.LEGENDRE:
        z = rng.uniform(-1.0, 1.0, T)
    elif setting is Setting.HERMITE:
        z = rng.standard_normal(T)
    else:
        z = rng.standard_normal((T, spec.K))
    noise = rng.normal(0.0, spec.sigma, (T, p))

    values = np.empty((T, p))
    for i, lag in enumerate(spec.lag_assignment):
        if setting is Setting.HETEROGENEOUS:
            shifted = _lagged(z[:, spec.factor_assignment[i]], lag)
            values[:, i] = shifted
        else:
            shifted = _lagged(z, lag)
            if setting is Setting.LINEAR:
                values[:, i] = shifted
            elif setting is Setting.COSINE:
                values[:, i] = np.cos(lag * shifted) / np.sqrt(np.pi)
            elif setting is Setting.LEGENDRE:
                values[:, i] = legendre_poly(lag + 1, shifted)
            else:
                values[:, i] = hermite_poly(lag + 1, shifted) / np.sqrt(factorial(lag))
    values += noise

    ids = tuple(f"s{i:03d}" for i in range(1, p + 1))
    panel = TimeSeriesPanel(np.arange(1, T + 1), ids, values, PanelKind.DIFFERENCES)
    truth = ground_truth_for(spec.lag_assignment, spec.factor_assignment)
    return panel, truth


def truth_json(truth: GroundTruth, series_ids: tuple[str, ...]) -> dict:
    """JSON-ready sidecar from which the truth can be rebuilt exactly."""
    if len(series_ids) != truth.labels.size:
        raise ValueError("one series id per node required")
    payload = {
        "series_ids": list(series_ids),
        "labels": [int(l) for l in truth.labels],
        "lags": list(truth.lag_assignment),
    }
    if truth.factor_assignment is not None:
        payload["factors"] = list(truth.factor_assignment)
    return payload


def save_truth(truth: GroundTruth, series_ids: tuple[str, ...], path: str | Path) -> None:
    Path(path).write_text(json.dumps(truth_json(truth, series_ids), indent=2, sort_keys=True) + "\n")


def load_truth(path: str | Path) -> tuple[GroundTruth, tuple[str, ...]]:
    payload = json.loads(Path(path).read_text())
    lags = tuple(int(l) for l in payload["lags"])
    factors = tuple(int(f) for f in payload["factors"]) if "factors" in payload else None
    truth = ground_truth_for(lags, factors)
    stored = [int(l) for l in payload["labels"]]
    if stored != [int(l) for l in truth.labels]:
        raise ValueError("stored labels disagree with the lag/factor assignments")
    return truth, tuple(str(s) for s in payload["series_ids"])
