"""Panel ingestion and transforms.

A panel is a dense (T, p) matrix of float values observed on a strictly
increasing time index, tagged as either price-like ``LEVELS`` or return-like
``DIFFERENCES``.  CSV ingestion handles ragged histories: series with too few
observations are dropped, rows before the first date on which every retained
series is observed are truncated, and remaining interior or trailing gaps are
forward-filled.  Panels are immutable once constructed.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd


class PanelKind(enum.Enum):
    LEVELS = "levels"
    DIFFERENCES = "differences"


@dataclass(frozen=True)
class PanelSchema:
    """Column mapping and filtering rules for CSV ingestion.

    ``timestamp_column`` names the time column (defaults to the first column).
    ``series_columns`` restricts ingestion to a subset of value columns.
    A series is kept only if it has at least ``min_obs`` non-missing rows;
    when ``min_obs`` is None the threshold is ``min_obs_fraction`` of T.
    """

    timestamp_column: str | None = None
    series_columns: tuple[str, ...] | None = None
    min_obs: int | None = None
    min_obs_fraction: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.min_obs_fraction <= 1.0:
            raise ValueError("min_obs_fraction must lie in [0, 1]")
        if self.min_obs is not None and self.min_obs < 0:
            raise ValueError("min_obs must be non-negative")

    def required_rows(self, n_rows: int) -> int:
        if self.min_obs is not None:
            return self.min_obs
        return int(math.ceil(self.min_obs_fraction * n_rows))


@dataclass(frozen=True)
class TimeSeriesPanel:
    """Immutable dense panel of T rows by p series."""

    timestamps: np.ndarray
    series_ids: tuple[str, ...]
    values: np.ndarray
    kind: PanelKind

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        timestamps = np.asarray(self.timestamps)
        ids = tuple(str(s) for s in self.series_ids)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d array")
        if values.shape != (len(timestamps), len(ids)):
            raise ValueError(
                f"shape mismatch: values {values.shape}, "
                f"{len(timestamps)} timestamps, {len(ids)} series"
            )
        if len(set(ids)) != len(ids):
            raise ValueError("series ids must be unique")
        if len(timestamps) > 1 and not np.all(timestamps[1:] > timestamps[:-1]):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("panel values must be finite with no missing entries")
        values = values.copy()
        values.setflags(write=False)
        timestamps = timestamps.copy()
        timestamps.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "series_ids", ids)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]

    def select(self, series_ids: list[str]) -> "TimeSeriesPanel":
        """Sub-panel restricted to ``series_ids`` in the given order."""
        index = {s: j for j, s in enumerate(self.series_ids)}
        missing = [s for s in series_ids if s not in index]
        if missing:
            raise KeyError(f"unknown series ids: {missing}")
        cols = [index[s] for s in series_ids]
        return TimeSeriesPanel(
            self.timestamps, tuple(series_ids), self.values[:, cols], self.kind
        )

    def window(self, start: int, stop: int) -> "TimeSeriesPanel":
        """Sub-panel of rows ``start:stop``."""
        return TimeSeriesPanel(
            self.timestamps[start:stop],
            self.series_ids,
            self.values[start:stop],
            self.kind,
        )

    def to_csv(self, path: str | Path) -> None:
        """Write the panel in the canonical CSV format.

        Float cells use the shortest round-trip decimal representation, so
        write -> read -> write is byte-identical.
        """
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", *self.series_ids])
            stamps = _format_timestamps(self.timestamps)
            for t, stamp in enumerate(stamps):
                writer.writerow([stamp] + [repr(float(v)) for v in self.values[t]])

    @classmethod
    def from_csv(cls, path: str | Path, kind: PanelKind) -> "TimeSeriesPanel":
        """Strict reader for panels previously written by :meth:`to_csv`.

        Unlike :func:`load_panel` this performs no gap handling; missing
        cells are an error.
        """
        timestamps, ids, values = _read_panel_csv(path)
        if np.isnan(values).any():
            raise ValueError(f"{path}: missing values not allowed in strict panel read")
        return cls(timestamps, ids, values, kind)


def load_panel(path: str | Path, schema: PanelSchema | None = None) -> TimeSeriesPanel:
    """Ingest a raw CSV of levels into a validated panel.

    Applies, in order: drop series below the minimum-observation threshold
    (with a warning naming them), truncate leading rows until every retained
    series is observed, forward-fill interior and trailing gaps.
    """
    schema = schema or PanelSchema()
    timestamps, ids, values = _read_panel_csv(path, schema)
    n_rows = len(timestamps)
    if n_rows == 0:
        raise ValueError(f"{path}: no data rows")

    observed = ~np.isnan(values)
    keep = observed.sum(axis=0) >= schema.required_rows(n_rows)
    if not keep.any():
        raise ValueError(f"{path}: every series falls below the observation minimum")
    dropped = [s for s, k in zip(ids, keep) if not k]
    if dropped:
        warnings.warn(
            f"dropped {len(dropped)} series below the observation minimum: "
            + ", ".join(dropped),
            stacklevel=2,
        )
    ids = tuple(s for s, k in zip(ids, keep) if k)
    values = values[:, keep]
    observed = observed[:, keep]

    if (~observed).all(axis=0).any():
        raise ValueError(f"{path}: all-missing series survived filtering")

    full_rows = observed.all(axis=1)
    if not full_rows.any():
        raise ValueError(f"{path}: no row observes every retained series")
    start = int(np.argmax(full_rows))
    timestamps = timestamps[start:]
    values = values[start:]

    values = _forward_fill(values)
    return TimeSeriesPanel(timestamps, ids, values, PanelKind.LEVELS)


def to_log_returns(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """Log-return transform ``ln(level[t+1]) - ln(level[t])``.

    The output has one fewer row and carries the timestamps of the
    later observation in each consecutive pair.
    """
    if panel.kind is not PanelKind.LEVELS:
        raise ValueError("log returns are defined for LEVELS panels only")
    if panel.n_rows < 2:
        raise ValueError("need at least two rows to form returns")
    bad = panel.values <= 0.0
    if bad.any():
        t, j = np.argwhere(bad)[0]
        raise ValueError(
            f"non-positive level for series {panel.series_ids[j]!r} "
            f"at timestamp {panel.timestamps[t]}"
        )
    logs = np.log(panel.values)
    return TimeSeriesPanel(
        panel.timestamps[1:], panel.series_ids, np.diff(logs, axis=0),
        PanelKind.DIFFERENCES,
    )


def normalize_series(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """Scale every series to sample mean 0 and sample standard deviation 1."""
    if panel.n_rows < 2:
        raise ValueError("need at least two rows to normalize")
    mean = panel.values.mean(axis=0)
    sd = panel.values.std(axis=0, ddof=1)
    degenerate = np.flatnonzero(sd == 0.0)
    if degenerate.size:
        names = [panel.series_ids[j] for j in degenerate[:5]]
        raise ValueError(f"zero-variance series cannot be normalized: {names}")
    return TimeSeriesPanel(
        panel.timestamps, panel.series_ids, (panel.values - mean) / sd, panel.kind
    )


def to_cumulative_levels(panel: TimeSeriesPanel, initial: float = 0.0) -> TimeSeriesPanel:
    """Cumulate a DIFFERENCES panel into synthetic level paths.

    Row 0 holds ``initial`` everywhere; row t is ``initial`` plus the sum of
    the first t difference rows.  Timestamps gain a leading synthetic origin
    one step before the first difference.
    """
    if panel.kind is not PanelKind.DIFFERENCES:
        raise ValueError("cumulation is defined for DIFFERENCES panels only")
    levels = np.vstack(
        [np.full(panel.n_series, initial), initial + np.cumsum(panel.values, axis=0)]
    )
    stamps = panel.timestamps
    if np.issubdtype(stamps.dtype, np.integer):
        origin = stamps[0] - (stamps[1] - stamps[0] if len(stamps) > 1 else 1)
    else:
        step = stamps[1] - stamps[0] if len(stamps) > 1 else np.timedelta64(1, "D")
        origin = stamps[0] - step
    return TimeSeriesPanel(
        np.concatenate([[origin], stamps]), panel.series_ids, levels, PanelKind.LEVELS
    )


def _forward_fill(values: np.ndarray) -> np.ndarray:
    out = values.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        mask = np.isnan(col)
        if mask.any():
            idx = np.where(mask, 0, np.arange(len(col)))
            np.maximum.accumulate(idx, out=idx)
            col[mask] = col[idx[mask]]
    return out


def _read_panel_csv(
    path: str | Path, schema: PanelSchema | None = None
) -> tuple[np.ndarray, tuple[str, ...], np.ndarray]:
    path = Path(path)
    try:
        with path.open("r", newline="") as fh:
            header = next(csv.reader(fh), None)
    except OSError as exc:
        raise ValueError(f"cannot read panel file {path}: {exc}") from exc
    if header is None or len(header) < 2:
        raise ValueError(f"{path}: header row with a timestamp and one series required")
    if len(set(header)) != len(header):
        raise ValueError(f"{path}: duplicate column names in header")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except Exception as exc:  # malformed CSV
        raise ValueError(f"cannot parse panel file {path}: {exc}") from exc

    ts_col = header[0]
    value_cols = list(header[1:])
    if schema is not None:
        if schema.timestamp_column is not None:
            if schema.timestamp_column not in header:
                raise ValueError(f"{path}: no timestamp column {schema.timestamp_column!r}")
            ts_col = schema.timestamp_column
            value_cols = [c for c in header if c != ts_col]
        if schema.series_columns is not None:
            missing = [c for c in schema.series_columns if c not in value_cols]
            if missing:
                raise ValueError(f"{path}: unknown series columns {missing}")
            value_cols = list(schema.series_columns)

    timestamps = _parse_timestamps(frame[ts_col].tolist(), path)
    if len(timestamps) > 1 and not np.all(timestamps[1:] > timestamps[:-1]):
        raise ValueError(f"{path}: timestamps must be strictly increasing")

    values = np.empty((len(frame), len(value_cols)))
    for j, col in enumerate(value_cols):
        raw = frame[col].to_numpy()
        empty = raw == ""
        parsed = np.full(len(raw), np.nan)
        if (~empty).any():
            try:
                parsed[~empty] = raw[~empty].astype(float)
            except ValueError as exc:
                raise ValueError(f"{path}: non-numeric value in column {col!r}") from exc
        values[:, j] = parsed
    return timestamps, tuple(value_cols), values


def _parse_timestamps(raw: list[str], path: Path) -> np.ndarray:
    try:
        return np.asarray([int(s) for s in raw], dtype=np.int64)
    except ValueError:
        pass
    try:
        stamps = pd.to_datetime(raw, format="ISO8601")
    except ValueError as exc:
        raise ValueError(
            f"{path}: timestamps must be integers or ISO-8601 dates"
        ) from exc
    return stamps.to_numpy()


def _format_timestamps(stamps: np.ndarray) -> list[str]:
    if np.issubdtype(stamps.dtype, np.integer):
        return [str(int(t)) for t in stamps]
    as_dates = stamps.astype("datetime64[D]")
    if np.all(as_dates.astype("datetime64[ns]") == stamps.astype("datetime64[ns]")):
        return [np.datetime_as_string(t, unit="D") for t in as_dates]
    return [np.datetime_as_string(t, unit="s") for t in stamps.astype("datetime64[s]")]
