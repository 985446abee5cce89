"""Pairwise lead-lag scores and the skew-symmetric score matrix.

Two families of metrics are implemented.  Cross-correlation functionals
evaluate a correlation measure between one series shifted back by ``l`` steps
and another, either at lag 1 only (``ccf(1) - ccf(-1)``) or aggregated over a
lag window (a signed normalized area under the absolute cross-correlation
curve).  The signature metric is the antisymmetric part of the discrete
second-order iterated integrals of a pair of level paths, a Levy-area style
statistic that is positive when the first path tends to move before the
second.

Four correlation measures are supported: Pearson, Kendall tau-b, distance
correlation (direct O(n^2) pairwise-distance form; n is a few hundred per
window so the quadratic cost is acceptable), and plug-in mutual information
on equal-frequency marginal bins.

``leadlag_matrix`` assembles the full p x p score matrix.  For every metric
it computes one orientation per pair and negates, so S + S^T is exactly zero.
Panel-level fast paths (shared lag slices, cached distance statistics, batch
matrix products) produce the same numbers as the per-pair functions up to
floating-point reassociation.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .panel import PanelKind, TimeSeriesPanel, normalize_series, to_cumulative_levels


class CorrelationVariant(enum.Enum):
    PEARSON = "pearson"
    KENDALL = "kendall"
    DISTANCE = "dcor"
    MUTUAL_INFORMATION = "mi"


@dataclass(frozen=True)
class CorrelationKind:
    """A correlation measure plus its estimator settings.

    ``mi_bins`` is the number of equal-frequency bins per marginal used by
    the mutual-information estimator; ignored by the other variants.
    """

    variant: CorrelationVariant
    mi_bins: int = 8

    def __post_init__(self) -> None:
        if self.mi_bins < 2:
            raise ValueError("mi_bins must be at least 2")

    @classmethod
    def parse(cls, name: str, mi_bins: int = 8) -> "CorrelationKind":
        try:
            return cls(CorrelationVariant(name), mi_bins=mi_bins)
        except ValueError:
            valid = [v.value for v in CorrelationVariant]
            raise ValueError(f"unknown correlation {name!r}; expected one of {valid}")

    @property
    def label(self) -> str:
        return self.variant.value


class Functional(enum.Enum):
    CCF_LAG1 = "ccf-lag1"
    CCF_AUC = "ccf-auc"
    SIGNATURE = "signature"


@dataclass(frozen=True)
class LeadLagMetricSpec:
    """Choice of functional, correlation measure and lag window."""

    functional: Functional
    correlation: CorrelationKind | None = None
    max_lag: int | None = None

    def __post_init__(self) -> None:
        if self.functional is Functional.SIGNATURE:
            if self.correlation is not None:
                raise ValueError("the signature metric takes no correlation measure")
            if self.max_lag is not None:
                raise ValueError("the signature metric takes no lag window")
        else:
            if self.correlation is None:
                object.__setattr__(
                    self, "correlation", CorrelationKind(CorrelationVariant.PEARSON)
                )
            if self.functional is Functional.CCF_AUC:
                lag = 5 if self.max_lag is None else self.max_lag
                if lag < 1:
                    raise ValueError("max_lag must be a positive integer")
                object.__setattr__(self, "max_lag", lag)
            elif self.max_lag is not None:
                raise ValueError("max_lag applies to the ccf-auc functional only")

    @property
    def label(self) -> str:
        if self.functional is Functional.SIGNATURE:
            return "signature"
        return f"{self.functional.value}/{self.correlation.label}"


def parse_metric_label(
    label: str, max_lag: int | None = None, mi_bins: int = 8
) -> LeadLagMetricSpec:
    """Parse ``functional[/correlation]`` labels such as ``ccf-auc/dcor``."""
    head, sep, tail = label.partition("/")
    try:
        functional = Functional(head)
    except ValueError:
        valid = [f.value for f in Functional]
        raise ValueError(f"unknown functional {head!r}; expected one of {valid}")
    if functional is Functional.SIGNATURE:
        if sep:
            raise ValueError("the signature metric takes no correlation measure")
        return LeadLagMetricSpec(functional)
    correlation = CorrelationKind.parse(tail, mi_bins=mi_bins) if sep else None
    return LeadLagMetricSpec(functional, correlation, max_lag)


@dataclass(frozen=True)
class LeadLagMatrix:
    """Skew-symmetric pairwise score matrix over named series."""

    scores: np.ndarray
    series_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=float)
        ids = tuple(str(s) for s in self.series_ids)
        if scores.ndim != 2 or scores.shape[0] != scores.shape[1]:
            raise ValueError("scores must be a square matrix")
        if scores.shape[0] != len(ids):
            raise ValueError("one series id per row required")
        if len(set(ids)) != len(ids):
            raise ValueError("series ids must be unique")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        if np.abs(scores + scores.T).max(initial=0.0) != 0.0:
            raise ValueError("scores must be exactly skew-symmetric")
        scores = scores.copy()
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "series_ids", ids)

    @property
    def n_series(self) -> int:
        return self.scores.shape[0]

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["series", *self.series_ids])
            for i, sid in enumerate(self.series_ids):
                writer.writerow([sid] + [repr(float(v)) for v in self.scores[i]])

    @classmethod
    def from_csv(cls, path: str | Path) -> "LeadLagMatrix":
        with Path(path).open("r", newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][:1] != ["series"]:
            raise ValueError(f"{path}: expected a score-matrix CSV with a 'series' header")
        ids = tuple(rows[0][1:])
        if len(rows) - 1 != len(ids):
            raise ValueError(f"{path}: expected {len(ids)} rows, found {len(rows) - 1}")
        scores = np.empty((len(ids), len(ids)))
        for i, row in enumerate(rows[1:]):
            if row[0] != ids[i]:
                raise ValueError(f"{path}: row order does not match header order")
            scores[i] = [float(v) for v in row[1:]]
        return cls(scores, ids)

    def positive_edges(self) -> list[dict]:
        """Directed edge list ``{src, dst, weight}`` for strictly positive scores."""
        edges = []
        for i, j in zip(*np.nonzero(self.scores > 0.0)):
            edges.append(
                {
                    "src": self.series_ids[i],
                    "dst": self.series_ids[j],
                    "weight": float(self.scores[i, j]),
                }
            )
        edges.sort(key=lambda e: (e["src"], e["dst"]))
        return edges

    def save_edge_list(self, path: str | Path) -> None:
        with Path(path).open("w") as fh:
            json.dump(self.positive_edges(), fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# per-pair correlation measures


def sample_correlation(x: np.ndarray, y: np.ndarray, kind: CorrelationKind) -> float:
    """Correlation of two aligned samples under the chosen measure.

    Degenerate (zero-variance) inputs return 0 for every variant.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("inputs must be one-dimensional")
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 3:
        raise ValueError("need at least 3 observations")
    if _constant(x) or _constant(y):
        return 0.0
    if kind.variant is CorrelationVariant.PEARSON:
        return _pearson(x, y)
    if kind.variant is CorrelationVariant.KENDALL:
        return _kendall(x, y)
    if kind.variant is CorrelationVariant.DISTANCE:
        return _distance_correlation(x, y)
    return _mutual_information(x, y, kind.mi_bins)


def _constant(x: np.ndarray) -> bool:
    return bool(np.ptp(x) == 0.0)


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc)) * math.sqrt(float(yc @ yc))
    if denom == 0.0:
        return 0.0
    return float(np.clip((xc @ yc) / denom, -1.0, 1.0))


def _kendall(x: np.ndarray, y: np.ndarray) -> float:
    # tau-b: tie-corrected, O(n log n) internally
    tau = stats.kendalltau(x, y).statistic
    return 0.0 if np.isnan(tau) else float(tau)


def _distance_stats(a: np.ndarray, b: np.ndarray) -> float:
    """Squared distance covariance from raw distance matrices ``a`` and ``b``.

    Equals the mean elementwise product of the double-centered matrices; the
    expanded form avoids materializing the centered copies.
    """
    n = a.shape[0]
    s1 = float(np.einsum("ij,ij->", a, b)) / (n * n)
    ra = a.sum(axis=1)
    rb = b.sum(axis=1)
    s2 = float(ra @ rb) / (n**3)
    s3 = float(ra.sum()) * float(rb.sum()) / (n**4)
    return s1 - 2.0 * s2 + s3


def _distance_correlation(x: np.ndarray, y: np.ndarray) -> float:
    ax = np.abs(x[:, None] - x[None, :])
    ay = np.abs(y[:, None] - y[None, :])
    dcov2 = _distance_stats(ax, ay)
    dvarx = _distance_stats(ax, ax)
    dvary = _distance_stats(ay, ay)
    if dvarx <= 0.0 or dvary <= 0.0:
        return 0.0
    r2 = max(dcov2, 0.0) / math.sqrt(dvarx * dvary)
    return float(min(math.sqrt(max(r2, 0.0)), 1.0))


def _quantile_bins(x: np.ndarray, bins: int) -> np.ndarray:
    """Equal-frequency bin labels via ordinal ranks.

    Strictly monotone transforms of ``x`` leave the labels unchanged because
    the stable sort order is preserved.
    """
    n = x.shape[0]
    order = np.argsort(x, kind="stable")
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(n)
    return (ranks * bins) // n


def _mutual_information(x: np.ndarray, y: np.ndarray, bins: int) -> float:
    n = x.shape[0]
    bx = _quantile_bins(x, bins)
    by = _quantile_bins(y, bins)
    counts = np.bincount(bx * bins + by, minlength=bins * bins).astype(float)
    joint = counts.reshape(bins, bins) / n
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    nz = joint > 0.0
    ratio = joint[nz] / (px[:, None] * py[None, :])[nz]
    return float(np.sum(joint[nz] * np.log(ratio)))


# ---------------------------------------------------------------------------
# per-pair lead-lag functionals


def ccf(yi: np.ndarray, yj: np.ndarray, lag: int, kind: CorrelationKind) -> float:
    """Cross-correlation ``corr({yi[t - lag]}, {yj[t]})`` on the maximal overlap."""
    yi = np.asarray(yi, dtype=float)
    yj = np.asarray(yj, dtype=float)
    if yi.shape != yj.shape or yi.ndim != 1:
        raise ValueError("series must be one-dimensional and equally long")
    n = yi.shape[0]
    if abs(lag) >= n:
        raise ValueError(f"|lag| = {abs(lag)} must be smaller than the length {n}")
    if n - abs(lag) < 3:
        raise ValueError("insufficient overlap: need at least 3 aligned observations")
    if lag >= 0:
        a, b = yi[: n - lag], yj[lag:]
    else:
        a, b = yi[-lag:], yj[: n + lag]
    return sample_correlation(a, b, kind)


def ccf_lag1(yi: np.ndarray, yj: np.ndarray, kind: CorrelationKind) -> float:
    """Lag-1 asymmetry ``ccf(1) - ccf(-1)``; positive when i tends to lead j."""
    return ccf(yi, yj, 1, kind) - ccf(yi, yj, -1, kind)


def _signed_auc(i_fwd: float, i_rev: float) -> float:
    total = i_fwd + i_rev
    if total <= 0.0 or i_fwd == i_rev:
        return 0.0
    sign = 1.0 if i_fwd > i_rev else -1.0
    return sign * max(i_fwd, i_rev) / total


def ccf_auc(yi: np.ndarray, yj: np.ndarray, kind: CorrelationKind, max_lag: int) -> float:
    """Signed normalized area under |ccf| over lags 1..max_lag.

    With I(i, j) the sum of |ccf| of i shifted back against j, the score is
    ``sign(I(i,j) - I(j,i)) * max(I(i,j), I(j,i)) / (I(i,j) + I(j,i))``,
    0 when both sums vanish or tie.  Values lie in [-1, 1] and a magnitude
    above 0.5 is guaranteed whenever the score is nonzero.
    """
    if max_lag < 1:
        raise ValueError("max_lag must be a positive integer")
    i_fwd = sum(abs(ccf(yi, yj, lag, kind)) for lag in range(1, max_lag + 1))
    i_rev = sum(abs(ccf(yj, yi, lag, kind)) for lag in range(1, max_lag + 1))
    return _signed_auc(i_fwd, i_rev)


def signature_leadlag(xi: np.ndarray, xj: np.ndarray) -> float:
    """Antisymmetric second-order iterated-integral statistic of two paths.

    Streaming O(n) form of the double sum over increment pairs
    ``sum_{s<t} dxi[s] dxj[t] - dxj[s] dxi[t]``.  Inputs are level paths;
    comparable scale across series (normalized levels) is assumed.
    """
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    if xi.shape != xj.shape or xi.ndim != 1:
        raise ValueError("paths must be one-dimensional and equally long")
    if xi.shape[0] < 2:
        raise ValueError("need at least 2 observations")
    dxi = np.diff(xi)
    dxj = np.diff(xj)
    cum_i = np.cumsum(dxi)
    cum_j = np.cumsum(dxj)
    return float(cum_i[:-1] @ dxj[1:] - cum_j[:-1] @ dxi[1:])


# ---------------------------------------------------------------------------
# panel-level matrix assembly


def prepare_panel(panel: TimeSeriesPanel, spec: LeadLagMetricSpec) -> TimeSeriesPanel:
    """Put a differences panel in the form the chosen metric expects.

    The signature functional runs on normalized cumulative levels; the
    cross-correlation functionals consume the differences directly.
    """
    if spec.functional is Functional.SIGNATURE:
        if panel.kind is PanelKind.DIFFERENCES:
            panel = to_cumulative_levels(panel)
        return normalize_series(panel)
    return panel


def leadlag_matrix(panel: TimeSeriesPanel, spec: LeadLagMetricSpec) -> LeadLagMatrix:
    """Pairwise score matrix for every ordered pair of panel series.

    Cross-correlation functionals require a DIFFERENCES panel; the signature
    metric requires a LEVELS panel (normalize it first so path scales are
    comparable).
    """
    if spec.functional is Functional.SIGNATURE:
        if panel.kind is not PanelKind.LEVELS:
            raise ValueError("the signature metric requires a LEVELS panel")
        scores = _signature_matrix(panel.values)
        return LeadLagMatrix(scores, panel.series_ids)

    if panel.kind is not PanelKind.DIFFERENCES:
        raise ValueError("cross-correlation functionals require a DIFFERENCES panel")
    max_lag = 1 if spec.functional is Functional.CCF_LAG1 else spec.max_lag
    n = panel.n_rows
    if n - max_lag < 3:
        raise ValueError(
            f"panel too short: {n} rows leave fewer than 3 aligned observations "
            f"at lag {max_lag}"
        )
    lagged = [_ccf_matrix_at_lag(panel.values, lag, spec.correlation)
              for lag in range(1, max_lag + 1)]

    p = panel.n_series
    upper = np.zeros((p, p))
    iu, ju = np.triu_indices(p, k=1)
    if spec.functional is Functional.CCF_LAG1:
        c1 = lagged[0]
        upper[iu, ju] = c1[iu, ju] - c1[ju, iu]
    else:
        strength = np.zeros((p, p))
        for c in lagged:
            strength += np.abs(c)
        fwd = strength[iu, ju]
        rev = strength[ju, iu]
        total = fwd + rev
        with np.errstate(invalid="ignore", divide="ignore"):
            score = np.sign(fwd - rev) * np.maximum(fwd, rev) / total
        score[(total <= 0.0) | (fwd == rev)] = 0.0
        upper[iu, ju] = score
    return LeadLagMatrix(upper - upper.T, panel.series_ids)


def _signature_matrix(values: np.ndarray) -> np.ndarray:
    if values.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    rel = values - values[0]
    inc = np.diff(values, axis=0)
    m = rel[1:-1].T @ inc[1:]
    return m - m.T


def _ccf_matrix_at_lag(values: np.ndarray, lag: int, kind: CorrelationKind) -> np.ndarray:
    """Matrix C with ``C[i, j] = ccf(series i, series j, lag)`` for all pairs."""
    head = values[: values.shape[0] - lag]
    tail = values[lag:]
    if kind.variant is CorrelationVariant.PEARSON:
        return _pearson_cross(head, tail)
    if kind.variant is CorrelationVariant.KENDALL:
        return _kendall_cross(head, tail)
    if kind.variant is CorrelationVariant.DISTANCE:
        return _distance_cross(head, tail)
    return _mutual_information_cross(head, tail, kind.mi_bins)


def _pearson_cross(head: np.ndarray, tail: np.ndarray) -> np.ndarray:
    def standardize(m: np.ndarray) -> np.ndarray:
        c = m - m.mean(axis=0)
        norm = np.sqrt(np.einsum("ti,ti->i", c, c))
        nz = norm > 0.0
        c[:, nz] /= norm[nz]
        c[:, ~nz] = 0.0
        return c

    out = standardize(head).T @ standardize(tail)
    return np.clip(out, -1.0, 1.0)


def _kendall_cross(head: np.ndarray, tail: np.ndarray) -> np.ndarray:
    p = head.shape[1]
    out = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            tau = stats.kendalltau(head[:, i], tail[:, j]).statistic
            out[i, j] = 0.0 if np.isnan(tau) else tau
    return out


def _distance_cross(head: np.ndarray, tail: np.ndarray) -> np.ndarray:
    """All-pairs distance correlation between head and tail windows.

    The cross term sum_{st} a_st b_st over every (i, j) pair is a single
    matrix product of flattened distance matrices, which keeps the direct
    O(n^2) estimator affordable at panel scale.
    """
    m, p = head.shape
    flat_h, rows_h = _distance_flat(head)
    flat_t, rows_t = _distance_flat(tail)
    tot_h = rows_h.sum(axis=1)
    tot_t = rows_t.sum(axis=1)

    def dvar(flat: np.ndarray, rows: np.ndarray, tot: np.ndarray) -> np.ndarray:
        s1 = np.einsum("ik,ik->i", flat, flat) / (m * m)
        s2 = np.einsum("ik,ik->i", rows, rows) / (m**3)
        s3 = (tot / (m * m)) ** 2
        return s1 - 2.0 * s2 + s3

    dv_h = dvar(flat_h, rows_h, tot_h)
    dv_t = dvar(flat_t, rows_t, tot_t)

    s1 = (flat_h @ flat_t.T) / (m * m)
    s2 = (rows_h @ rows_t.T) / (m**3)
    s3 = np.outer(tot_h, tot_t) / (m**4)
    dcov2 = np.maximum(s1 - 2.0 * s2 + s3, 0.0)

    denom = np.sqrt(np.outer(dv_h, dv_t))
    out = np.zeros((p, p))
    valid = (dv_h[:, None] > 0.0) & (dv_t[None, :] > 0.0)
    out[valid] = np.sqrt(dcov2[valid] / denom[valid])
    return np.minimum(out, 1.0)


def _distance_flat(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m, p = mat.shape
    flat = np.empty((p, m * m))
    rows = np.empty((p, m))
    for i in range(p):
        d = np.abs(mat[:, i][:, None] - mat[:, i][None, :])
        flat[i] = d.ravel()
        rows[i] = d.sum(axis=1)
    return flat, rows


def _mutual_information_cross(head: np.ndarray, tail: np.ndarray, bins: int) -> np.ndarray:
    """All-pairs plug-in mutual information via one-hot count products."""
    m, p = head.shape

    def one_hot(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        labels = np.empty((p, m), dtype=np.int64)
        degenerate = np.zeros(p, dtype=bool)
        for i in range(p):
            col = mat[:, i]
            degenerate[i] = np.ptp(col) == 0.0
            labels[i] = _quantile_bins(col, bins)
        hot = np.zeros((p, bins, m))
        rows = np.repeat(np.arange(p), m)
        hot[rows, labels.ravel(), np.tile(np.arange(m), p)] = 1.0
        return hot, degenerate

    hot_h, bad_h = one_hot(head)
    hot_t, bad_t = one_hot(tail)
    counts = (
        hot_h.reshape(p * bins, m) @ hot_t.reshape(p * bins, m).T
    ).reshape(p, bins, p, bins)
    joint = counts.transpose(0, 2, 1, 3) / m  # (i, j, a, b)
    px = joint.sum(axis=3)  # (i, j, a)
    py = joint.sum(axis=2)  # (i, j, b)
    marg = px[:, :, :, None] * py[:, :, None, :]
    out = np.zeros((p, p, bins, bins))
    nz = joint > 0.0
    out[nz] = joint[nz] * np.log(joint[nz] / marg[nz])
    mi = out.sum(axis=(2, 3))
    mi[bad_h, :] = 0.0
    mi[:, bad_t] = 0.0
    return mi
