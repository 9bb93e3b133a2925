"""Welch spectral estimation and the gamma-kernel spectral-density fit.

The model density (one-sided, f in cycles per time unit) is

    S(f) = const * (1 + (2 pi f / lam)^2)^(-(1 + alpha)),

the Fourier pair of the gamma-kernel autocovariance; for f >> lam/2pi it
decays like f^(-2(1+alpha)), which is Kolmogorov's 5/3 law at alpha = -1/6.
The fit is ordinary least squares in log-log coordinates: a coarse grid over
(alpha, lam) with the intercept profiled out in closed form, refined by
Gauss-Newton on (alpha, log lam, intercept).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError
from .simulate import SeriesGrid

__all__ = ["PsdEstimate", "SpectrumFit", "welch_psd", "fit_spectrum"]


@dataclass
class PsdEstimate:
    """One-sided power spectral density from Welch averaging."""

    freqs: np.ndarray
    density: np.ndarray
    segment_len: int
    overlap_fraction: float
    taper: str
    n_segments: int
    delta: float

    @property
    def bin_width(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


@dataclass
class SpectrumFit:
    """Least-squares fit of the model density in double-log coordinates."""

    alpha: float
    lam: float
    log_const: float
    f_min: float
    f_max: float
    residual: float
    n_bins: int
    converged: bool
    n_iter: int
    warnings: list[str] = field(default_factory=list)


def welch_psd(series: SeriesGrid, segment_len: int, overlap_fraction: float = 0.5,
              taper: str = "hann") -> PsdEstimate:
    """Averaged tapered periodograms over overlapping segments.

    One-sided density normalized by the taper power (sum of squared window),
    so that sum(density) * bin_width matches the series variance (Parseval).
    The FFT length is the next power of two at or above `segment_len`.
    """
    x = series.values
    n = x.size
    if segment_len < 8:
        raise DomainError(f"segment length {segment_len} too short")
    if segment_len > n:
        raise DomainError(f"segment length {segment_len} exceeds series length {n}")
    if not 0.0 <= overlap_fraction <= 0.9:
        raise DomainError(f"overlap fraction must lie in [0, 0.9], got {overlap_fraction}")
    if taper == "hann":
        window = np.hanning(segment_len)
    elif taper == "none":
        window = np.ones(segment_len)
    else:
        raise DomainError(f"unknown taper {taper!r} (use 'hann' or 'none')")

    step = max(1, int(round(segment_len * (1.0 - overlap_fraction))))
    starts = range(0, n - segment_len + 1, step)
    n_segments = len(starts)
    if n_segments < 2:
        raise DomainError(
            f"only {n_segments} segment(s); need >= 2 "
            f"(series {n}, segment {segment_len}, overlap {overlap_fraction})"
        )

    nfft = 1 << (segment_len - 1).bit_length()
    x = x - x.mean()
    scale = 2.0 * series.delta / float(np.sum(window**2))
    acc = np.zeros(nfft // 2 + 1)
    for s in starts:
        seg = window * x[s : s + segment_len]
        acc += np.abs(np.fft.rfft(seg, nfft)) ** 2
    density = acc * (scale / n_segments)
    density[0] *= 0.5
    density[-1] *= 0.5  # DC and Nyquist are not doubled
    freqs = np.fft.rfftfreq(nfft, d=series.delta)
    return PsdEstimate(
        freqs=freqs, density=density, segment_len=segment_len,
        overlap_fraction=overlap_fraction, taper=taper,
        n_segments=n_segments, delta=series.delta,
    )


def _log_model(freqs: np.ndarray, alpha: float, log_lam: float) -> np.ndarray:
    x2 = (2.0 * math.pi * freqs) ** 2 * math.exp(-2.0 * log_lam)
    return -(1.0 + alpha) * np.log1p(x2)


def fit_spectrum(psd: PsdEstimate, f_min: float | None = None,
                 f_max: float | None = None, max_iter: int = 200) -> SpectrumFit:
    """Fit (alpha, lam, log_const) to the PSD between f_min and f_max.

    `f_min` defaults to the fourth positive frequency bin (the lowest bins
    are leakage-dominated); a coarse (alpha, lam) grid with the intercept
    profiled out seeds a Gauss-Newton refinement to relative tolerance 1e-6.
    """
    if f_min is None:
        f_min = float(psd.freqs[min(4, psd.freqs.size - 1)])
    if f_max is None:
        f_max = float(psd.freqs[-1])
    mask = (psd.freqs >= f_min) & (psd.freqs <= f_max) & (psd.density > 0) \
        & (psd.freqs > 0)
    if int(mask.sum()) < 20:
        raise DomainError(
            f"only {int(mask.sum())} usable bins in [{f_min}, {f_max}]; need >= 20"
        )
    f = psd.freqs[mask]
    y = np.log(psd.density[mask])

    # coarse grid, intercept profiled: logc = mean(y - base)
    alphas = np.linspace(-0.49, 0.49, 29)
    lams = 2.0 * math.pi * np.geomspace(max(f[0] / 30.0, 1e-12), f[-1] * 2.0, 41)
    best = (np.inf, 0.0, 0.0)
    for a in alphas:
        for lam in lams:
            base = _log_model(f, a, math.log(lam))
            resid = y - base
            logc = float(resid.mean())
            sse = float(np.sum((resid - logc) ** 2))
            if sse < best[0]:
                best = (sse, a, math.log(lam))
    _, a, ll = best
    base = _log_model(f, a, ll)
    logc = float((y - base).mean())

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        base = _log_model(f, a, ll)
        r = y - base - logc
        x2 = (2.0 * math.pi * f) ** 2 * math.exp(-2.0 * ll)
        w = x2 / (1.0 + x2)
        jac = np.column_stack([
            -np.log1p(x2),              # d model / d alpha
            2.0 * (1.0 + a) * w,        # d model / d log lam
            np.ones_like(f),            # d model / d log_const
        ])
        step, *_ = np.linalg.lstsq(jac, r, rcond=None)
        a += step[0]
        ll += step[1]
        logc += step[2]
        if abs(step[0]) <= 1e-6 * max(1.0, abs(a)) and abs(step[1]) <= 1e-6 * max(1.0, abs(ll)):
            converged = True
            break
    if not converged:
        raise NumericError(
            f"spectrum fit did not converge in {max_iter} iterations; "
            f"best grid point alpha={best[1]:.4f}, lam={math.exp(best[2]):.4g}"
        )
    base = _log_model(f, a, ll)
    resid = y - base - logc
    warnings = []
    if not -0.5 < a < 0.5:
        warnings.append(f"fitted alpha {a:.4f} outside (-1/2, 1/2)")
    return SpectrumFit(
        alpha=float(a), lam=float(math.exp(ll)), log_const=float(logc),
        f_min=float(f_min), f_max=float(f_max),
        residual=float(np.sqrt(np.mean(resid**2))), n_bins=int(f.size),
        converged=converged, n_iter=it, warnings=warnings,
    )
