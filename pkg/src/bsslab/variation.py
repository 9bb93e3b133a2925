"""Power variations of k-th order differences, plain and gapped.

Increments follow the index conventions of the underlying theory exactly:
plain variations sum |D_{i,k,v}|^p for i = v*k .. N-1 (0-based, end-aligned
windows), gapped variations take every u-th increment,

    v=1:  i = floor(k/u)+1 .. floor((N-1)/u),      windows end at i*u,
    v=2:  i = floor(k/u)+1 .. floor((N-1)/u) - 1,  windows end at i*u + floor(u/2),

and any shifted window that would overrun the final observation is dropped
(and counted in the result).  Normalization multiplies by delta (plain) or
u*delta (gapped) times tau^-p, with tau injected by the caller.

Accumulation is exact: terms are summed with Shewchuk's algorithm (one
correctly-rounded result independent of chunking), so streaming and one-shot
evaluations agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .simulate import SeriesGrid

__all__ = [
    "FilterSpec",
    "PowerVariationResult",
    "ExactSum",
    "PowerVariationStream",
    "diff_filter",
    "power_variation",
    "normalized_pv",
    "gapped_pv",
    "min_gap",
]


def min_gap(k: int) -> int:
    """Smallest admissible gap for order k: ceil((4k+2)/3)."""
    return -((4 * k + 2) // -3)


@dataclass(frozen=True)
class FilterSpec:
    """Difference order, frequency multiplier, and optional gap size."""

    k: int
    v: int = 1
    gap: Optional[int] = None

    def __post_init__(self):
        if not (isinstance(self.k, (int, np.integer)) and self.k >= 1):
            raise DomainError(f"difference order must be a positive integer, got {self.k}")
        if self.v not in (1, 2):
            raise DomainError(f"frequency multiplier must be 1 or 2, got {self.v}")
        if self.gap is not None and self.gap < min_gap(self.k):
            raise DomainError(
                f"gap {self.gap} below the admissible minimum {min_gap(self.k)} "
                f"for k={self.k}"
            )


@dataclass
class PowerVariationResult:
    """Raw and (optionally) normalized power variation with its inputs echoed."""

    raw: float
    count: int
    p: float
    filter: FilterSpec
    delta: float
    normalized: Optional[float] = None
    tau_used: Optional[float] = None
    dropped_windows: int = 0


class ExactSum:
    """Streaming exact accumulator (Shewchuk partials).

    The running sum is held as non-overlapping partials, so the final
    rounded value is independent of how the input was chunked and equals
    math.fsum over the concatenated terms.
    """

    def __init__(self):
        self._partials: list[float] = []

    def add(self, values) -> None:
        partials = self._partials
        for x in values:
            x = float(x)
            i = 0
            for y in partials:
                if abs(x) < abs(y):
                    x, y = y, x
                hi = x + y
                lo = y - (hi - x)
                if lo:
                    partials[i] = lo
                    i += 1
                x = hi
            partials[i:] = [x]

    @property
    def value(self) -> float:
        return math.fsum(self._partials)


def _binomial_weights(k: int) -> list[float]:
    return [(-1.0) ** j * math.comb(k, j) for j in range(k + 1)]


def diff_filter(series: SeriesGrid, k: int, v: int = 1) -> np.ndarray:
    """k-th order differences at frequency v*delta, end index i = v*k .. N-1."""
    FilterSpec(k, v)
    x = series.values
    n = x.size
    if n <= v * k:
        raise DomainError(f"series of length {n} too short for k={k}, v={v}")
    w = _binomial_weights(k)
    # fixed j-order accumulation keeps results bit-identical to a scalar loop
    d = w[0] * x[v * k :]
    for j in range(1, k + 1):
        d = d + w[j] * x[v * k - v * j : n - v * j]
    return d


def _abs_power_terms(d: np.ndarray, p: float) -> np.ndarray:
    return np.abs(d) ** p


def power_variation(series: SeriesGrid, p: float, k: int, v: int = 1) -> PowerVariationResult:
    """Raw variation V = sum |D_{i,k,v}|^p, exact single-rounding accumulation."""
    if not p > 0:
        raise DomainError(f"power must be positive, got {p}")
    d = diff_filter(series, k, v)
    terms = _abs_power_terms(d, p)
    raw = math.fsum(terms.tolist())
    return PowerVariationResult(
        raw=raw, count=int(d.size), p=p, filter=FilterSpec(k, v), delta=series.delta
    )


class PowerVariationStream:
    """Chunked raw power variation, bit-identical to `power_variation`.

    Feed the series in arbitrary chunks; the accumulator keeps exact
    partials, so the final value does not depend on the chunk boundaries.
    """

    def __init__(self, p: float, k: int, v: int = 1):
        if not p > 0:
            raise DomainError(f"power must be positive, got {p}")
        self.p = p
        self.spec = FilterSpec(k, v)
        self._window = k * v
        self._buf = np.empty(0)
        self._acc = ExactSum()
        self._count = 0
        self._weights = _binomial_weights(k)

    def update(self, chunk) -> None:
        chunk = np.asarray(chunk, dtype=float)
        buf = np.concatenate([self._buf, chunk])
        vk, v = self._window, self.spec.v
        if buf.size > vk:
            start = max(vk, buf.size - chunk.size)
            w = self._weights
            d = w[0] * buf[start:]
            for j in range(1, self.spec.k + 1):
                d = d + w[j] * buf[start - v * j : buf.size - v * j]
            self._acc.add(_abs_power_terms(d, self.p).tolist())
            self._count += d.size
        self._buf = buf[-vk:] if buf.size >= vk else buf

    def result(self, delta: float) -> PowerVariationResult:
        if self._count == 0:
            raise DomainError("stream has seen too few observations")
        return PowerVariationResult(
            raw=self._acc.value, count=self._count, p=self.p,
            filter=self.spec, delta=delta,
        )


def normalized_pv(series: SeriesGrid, p: float, k: int, v: int,
                  tau: float) -> PowerVariationResult:
    """Normalized variation: delta * tau^-p * V."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    res = power_variation(series, p, k, v)
    res.tau_used = tau
    res.normalized = series.delta * tau ** (-p) * res.raw
    return res


def gapped_pv(series: SeriesGrid, p: float, k: int, u: int, v: int,
              tau: Optional[float] = None) -> PowerVariationResult:
    """Gapped variation over every u-th increment (v=2 shifted by floor(u/2))."""
    if not p > 0:
        raise DomainError(f"power must be positive, got {p}")
    fspec = FilterSpec(k, v, gap=int(u))
    x = series.values
    n_last = x.size - 1  # index of the final observation
    i_lo = k // u + 1
    i_hi = n_last // u - (1 if v == 2 else 0)
    if i_hi < i_lo:
        need = (i_lo + (1 if v == 2 else 0)) * u + 1
        raise DomainError(
            f"series of length {x.size} too short for gapped variation "
            f"(u={u}, v={v}); need at least {need} observations"
        )
    ends = np.arange(i_lo, i_hi + 1) * u
    if v == 2:
        ends = ends + u // 2
    dropped = int(np.count_nonzero(ends > n_last))
    ends = ends[ends <= n_last]
    w = _binomial_weights(k)
    d = w[0] * x[ends]
    for j in range(1, k + 1):
        d = d + w[j] * x[ends - v * j]
    raw = math.fsum(_abs_power_terms(d, p).tolist())
    res = PowerVariationResult(
        raw=raw, count=int(d.size), p=p, filter=fspec, delta=series.delta,
        dropped_windows=dropped,
    )
    if tau is not None:
        if not tau > 0:
            raise DomainError(f"tau must be positive, got {tau}")
        res.tau_used = tau
        res.normalized = u * series.delta * tau ** (-p) * raw
    return res
