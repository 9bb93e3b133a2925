"""Series ingestion and export: single-column CSV and raw float64."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, DataError, DegenerateInputError
from .simulate import SeriesGrid

__all__ = ["ingest_series", "export_series"]

FORMATS = ("csv", "raw")


def ingest_series(path: str, fmt: str = "csv", delta: float | None = None,
                  rate: float | None = None, standardize: bool = False) -> SeriesGrid:
    """Read a series from disk.

    `fmt` is 'csv' (one float per line) or 'raw' (little-endian float64).
    The grid step comes from `delta` or a sampling `rate` in Hz.  With
    `standardize` the series is shifted/scaled to zero mean, unit variance.
    """
    if fmt not in FORMATS:
        raise ConfigurationError(f"unknown series format {fmt!r} (use csv or raw)")
    if delta is None:
        if rate is None:
            raise ConfigurationError("provide either delta or a sampling rate")
        if not rate > 0:
            raise ConfigurationError(f"sampling rate must be positive, got {rate}")
        delta = 1.0 / rate
    if fmt == "csv":
        values = []
        try:
            with open(path, "r", encoding="utf-8") as fh:
                for ln, raw in enumerate(fh, 1):
                    text = raw.strip()
                    if not text:
                        continue
                    try:
                        values.append(float(text))
                    except ValueError as exc:
                        raise DataError(f"{path}:{ln}: not a number: {text!r}") from exc
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        arr = np.asarray(values, dtype=float)
    else:
        try:
            arr = np.fromfile(path, dtype="<f8")
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
    if arr.size == 0:
        raise DataError(f"{path}: empty series")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise DataError(f"{path}: non-finite value at index {int(bad[0])}")
    if standardize:
        sd = float(arr.std())
        if sd == 0.0:
            raise DegenerateInputError(f"{path}: zero variance, cannot standardize")
        arr = (arr - arr.mean()) / sd
    return SeriesGrid(arr, float(delta), meta={"provenance": "ingested", "path": path,
                                               "format": fmt, "standardized": bool(standardize)})


def export_series(series: SeriesGrid, path: str, fmt: str = "csv") -> None:
    """Write a series; round-trips byte-exactly through ingest_series."""
    if fmt not in FORMATS:
        raise ConfigurationError(f"unknown series format {fmt!r} (use csv or raw)")
    if fmt == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            for v in series.values:
                fh.write(repr(float(v)))
                fh.write("\n")
    else:
        series.values.astype("<f8").tofile(path)
