"""Path simulation: fBm, the Gaussian core, intermittency, and the full process.

The two stationary Gaussian inputs (fractional Gaussian noise and the core
with the gamma-kernel autocovariance) are sampled *exactly* by circulant
embedding.  The full process with stochastic sigma is a truncated stochastic
convolution on an oversampled grid,

    X_t ~= sum_j  b_j * sigma(s_j) * dW_j,

where the cell nearest t carries the exact L2 average of the kernel over the
cell (the kernel may blow up there) and every other cell uses the midpoint
value; the kernel is truncated at `burn_in`, whose default leaves less than
1e-6 of the squared-kernel mass outside.

All samplers are deterministic functions of (parameters, seed).  Seeds are
expanded into independent streams with a counter-based Philox generator keyed
by (seed, component, replication) paths, so parallel Monte Carlo never shares
generator state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.signal import fftconvolve, lfilter

from .errors import ConfigurationError, DataError, DomainError, NumericError
from .kernel import (
    KernelSpec,
    autocovariance_grid,
    find_burn_in,
    kernel_l2_interval,
    kernel_tail_mass,
    table_for,
)

__all__ = [
    "SeriesGrid",
    "SigmaModel",
    "rng_stream",
    "simulate_fbm",
    "simulate_gaussian_core",
    "simulate_sigma",
    "simulate_bss",
    "GaussianCoreSampler",
    "FgnSampler",
    "bss_filter_variance",
]

# component codes for rng_stream paths
RNG_NOISE = 0
RNG_SIGMA = 1


@dataclass
class SeriesGrid:
    """Equispaced observations with their grid step and provenance tag."""

    values: np.ndarray
    delta: float
    origin: float = 0.0
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 1:
            raise DataError("series must be a nonempty 1-d array")
        if not self.delta > 0:
            raise DataError(f"grid step must be positive, got {self.delta}")
        if not np.all(np.isfinite(self.values)):
            bad = int(np.flatnonzero(~np.isfinite(self.values))[0])
            raise DataError(f"non-finite value at index {bad}")

    def __len__(self) -> int:
        return self.values.size

    @property
    def duration(self) -> float:
        return (len(self) - 1) * self.delta


def rng_stream(seed: int, *path: int) -> np.random.Generator:
    """Independent counter-based stream for (seed, *path)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(x) for x in path))
    return np.random.Generator(np.random.Philox(ss))


# -- circulant embedding -------------------------------------------------------


class _CirculantSampler:
    """Exact sampler for a stationary Gaussian sequence.

    `cov_fn(m)` must return the autocovariance at lags 0..m-1.  If the
    circulant extension of the requested size has negative eigenvalues the
    embedding is doubled, up to a cap.
    """

    def __init__(self, cov_fn, n: int, max_doublings: int = 5):
        if n < 1:
            raise DomainError("need at least one sample point")
        m = max(n, 2)
        for _ in range(max_doublings + 1):
            cov = np.asarray(cov_fn(m + 1), dtype=float)
            row = np.concatenate([cov[: m + 1], cov[m - 1 : 0 : -1]])  # size 2m
            eig = np.fft.rfft(row).real
            worst = eig.min()
            if worst >= -1e-8 * eig.max():
                break
            m *= 2
        else:
            raise NumericError(
                f"circulant embedding not nonnegative definite up to size {m} "
                f"(min eigenvalue {worst:.3e})"
            )
        self.n = n
        self._size = row.size
        # rfft returns the first half; rebuild the full symmetric spectrum
        full = np.concatenate([eig, eig[-2:0:-1]])
        self._scale = np.sqrt(np.clip(full, 0.0, None) / row.size)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self._size) + 1j * rng.standard_normal(self._size)
        return np.fft.fft(self._scale * z).real[: self.n]


def _fgn_cov(H: float, m: int) -> np.ndarray:
    j = np.arange(m, dtype=float)
    return 0.5 * (
        np.abs(j + 1) ** (2 * H) - 2 * np.abs(j) ** (2 * H) + np.abs(j - 1) ** (2 * H)
    )


class FgnSampler:
    """Reusable exact sampler for unit-spacing fractional Gaussian noise."""

    def __init__(self, H: float, n_increments: int):
        if not 0.0 < H < 1.0:
            raise DomainError(f"Hurst parameter must lie in (0,1), got {H}")
        self.H = H
        self._sampler = _CirculantSampler(lambda m: _fgn_cov(H, m), n_increments)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self._sampler.sample(rng)


def simulate_fbm(H: float, n: int, delta: float, seed: int) -> SeriesGrid:
    """Exact fBm path on n grid points via circulant embedding of fGn."""
    if n < 2:
        raise DomainError("fBm path needs n >= 2")
    sampler = FgnSampler(H, n - 1)
    incs = sampler.sample(rng_stream(seed, RNG_NOISE)) * delta**H
    values = np.concatenate([[0.0], np.cumsum(incs)])
    return SeriesGrid(
        values, delta,
        meta={"provenance": "simulated", "model": "fbm", "hurst": H, "seed": seed},
    )


class GaussianCoreSampler:
    """Reusable exact sampler for the Gaussian core on a fixed grid.

    Building the embedding needs the autocovariance on every lag of the grid,
    which is the expensive part; Monte Carlo loops should construct one
    sampler and draw many paths from it.
    """

    def __init__(self, spec: KernelSpec, n: int, delta: float):
        self.spec = spec
        self.n = n
        self.delta = delta
        self._sampler = _CirculantSampler(
            lambda m: autocovariance_grid(spec, delta, m), n
        )

    def sample(self, seed: int) -> SeriesGrid:
        values = self._sampler.sample(rng_stream(seed, RNG_NOISE))
        return SeriesGrid(
            values, self.delta,
            meta={
                "provenance": "simulated", "model": "gaussian-core",
                "alpha": self.spec.alpha, "lam": self.spec.lam, "seed": seed,
            },
        )


def simulate_gaussian_core(spec: KernelSpec, n: int, delta: float, seed: int) -> SeriesGrid:
    """Exact stationary path with the kernel's autocovariance."""
    if n < 2:
        raise DomainError("core path needs n >= 2")
    return GaussianCoreSampler(spec, n, delta).sample(seed)


# -- intermittency -------------------------------------------------------------


@dataclass(frozen=True)
class SigmaModel:
    """Intermittency model: constant, exp-OU, or a C1-smoothed exp-OU.

    For the OU kinds, log sigma is (ln level) plus a stationary OU process
    with mean reversion `mean_reversion` and volatility `volvol`; the smooth
    kind replaces the OU path by its trailing moving average over
    `smooth_window` time units, which makes sigma continuously differentiable
    (Holder exponent 1, comfortably inside the CLT assumption), while plain
    exp-OU sits exactly at the marginal exponent 1/2.
    """

    kind: str = "constant"
    level: float = 1.0
    volvol: float = 0.5
    mean_reversion: float = 1.0
    smooth_window: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "exp-ou", "smooth-exp-ou"):
            raise ConfigurationError(f"unknown sigma kind {self.kind!r}")
        if not self.level > 0:
            raise DomainError(f"sigma level must be positive, got {self.level}")
        if self.kind != "constant":
            if self.volvol < 0:
                raise DomainError("volvol must be nonnegative")
            if not self.mean_reversion > 0:
                raise DomainError("mean_reversion must be positive")
            if self.smooth_window is not None and not self.smooth_window > 0:
                raise DomainError("smooth_window must be positive")

    @property
    def window(self) -> float:
        if self.smooth_window is not None:
            return self.smooth_window
        return 0.5 / self.mean_reversion

    @property
    def holder_gamma(self) -> float:
        return {"constant": math.inf, "exp-ou": 0.5, "smooth-exp-ou": 1.0}[self.kind]

    @property
    def clt_marginal(self) -> bool:
        """True when the model sits on the boundary of the CLT assumption."""
        return self.kind == "exp-ou"


def _ou_path(theta: float, vol: float, n: int, delta: float,
             rng: np.random.Generator) -> np.ndarray:
    """Exact stationary OU path (mean 0) on n points."""
    phi = math.exp(-theta * delta)
    stat_sd = vol / math.sqrt(2.0 * theta) if vol > 0 else 0.0
    innov_sd = stat_sd * math.sqrt(1.0 - phi * phi)
    eps = rng.standard_normal(n)
    eps[0] *= stat_sd
    eps[1:] *= innov_sd
    return lfilter([1.0], [1.0, -phi], eps)


def simulate_sigma(model: SigmaModel, n: int, delta: float, seed: int) -> SeriesGrid:
    """Positive intermittency path; deterministic for a fixed seed."""
    if n < 1:
        raise DomainError("sigma path needs n >= 1")
    meta = {"provenance": "simulated", "model": f"sigma-{model.kind}", "seed": seed}
    if model.kind == "constant":
        return SeriesGrid(np.full(n, model.level), delta, meta=meta)
    rng = rng_stream(seed, RNG_SIGMA)
    if model.kind == "exp-ou":
        y = _ou_path(model.mean_reversion, model.volvol, n, delta, rng)
    else:
        w = max(1, round(model.window / delta))
        y_ext = _ou_path(model.mean_reversion, model.volvol, n + w - 1, delta, rng)
        cs = np.concatenate([[0.0], np.cumsum(y_ext)])
        y = (cs[w:] - cs[:-w]) / w
    return SeriesGrid(model.level * np.exp(y), delta, meta=meta)


# -- the full process ----------------------------------------------------------


def _bss_weights(spec: KernelSpec, delta_fine: float, n_cells: int) -> np.ndarray:
    """Convolution weights: exact L2 average on the singular cell, midpoint after."""
    b = np.empty(n_cells + 1)
    b[0] = math.sqrt(kernel_l2_interval(spec, 0.0, delta_fine) / delta_fine)
    lags = (np.arange(1, n_cells + 1) + 0.5) * delta_fine
    b[1:] = spec.eval(lags)
    return b


def bss_filter_variance(spec: KernelSpec, delta: float, oversample: int,
                        burn_in: float | None = None, k: int = 1) -> float:
    """Exact variance of the k-th order increment under the discrete scheme.

    Deterministic diagnostic: compares directly against tau_k(delta)^2 to
    quantify the discretization bias without Monte Carlo noise.
    """
    df = delta / oversample
    if burn_in is None:
        burn_in = find_burn_in(spec)
    mb = int(math.ceil(burn_in / df))
    b = _bss_weights(spec, df, mb)
    w = [(-1.0) ** j * math.comb(k, j) for j in range(k + 1)]
    combined = np.zeros(mb + 1 + k * oversample)
    for j, wj in enumerate(w):
        combined[j * oversample : j * oversample + mb + 1] += wj * b
    return df * float(np.sum(combined * combined))


def simulate_bss(spec: KernelSpec, model: SigmaModel, n: int, delta: float,
                 oversample: int = 16, burn_in: float | None = None,
                 seed: int = 0, with_sigma: bool = False):
    """Truncated stochastic convolution for X_t = int g(t-s) sigma_s dW_s.

    Simulates on the fine grid delta/oversample and returns the coarse-grid
    path.  With `with_sigma=True` also returns the sigma path on the coarse
    grid (needed for pathwise integrated-intermittency comparisons).
    """
    if n < 2:
        raise DomainError("path needs n >= 2")
    if not (isinstance(oversample, (int, np.integer)) and oversample >= 1):
        raise DomainError(f"oversample must be a positive integer, got {oversample}")
    tab = table_for(spec)
    tail_budget = 1e-6 * tab.c0
    if burn_in is None:
        burn_in = find_burn_in(spec, 1e-6)
    elif kernel_tail_mass(spec, burn_in) > tail_budget * (1.0 + 1e-9):
        raise ConfigurationError(
            f"burn_in {burn_in} leaves tail mass {kernel_tail_mass(spec, burn_in):.3e} "
            f"> {tail_budget:.3e}; need at least {find_burn_in(spec, 1e-6):.3f}"
        )
    df = delta / oversample
    mb = int(math.ceil(burn_in / df))
    m_cells = mb + (n - 1) * oversample

    sigma_vals = simulate_sigma(model, m_cells + 1, df, seed).values
    noise = rng_stream(seed, RNG_NOISE).standard_normal(m_cells) * math.sqrt(df)
    b = _bss_weights(spec, df, mb)
    conv = fftconvolve(sigma_vals[:m_cells] * noise, b)
    values = conv[mb - 1 : mb - 1 + (n - 1) * oversample + 1 : oversample].copy()

    meta = {
        "provenance": "simulated", "model": "bss",
        "alpha": spec.alpha, "lam": spec.lam, "sigma": model.kind,
        "oversample": int(oversample), "burn_in": float(burn_in), "seed": seed,
    }
    series = SeriesGrid(values, delta, meta=meta)
    if not with_sigma:
        return series
    sigma_coarse = SeriesGrid(
        sigma_vals[mb::oversample].copy(), delta,
        meta={"provenance": "simulated", "model": f"sigma-{model.kind}", "seed": seed},
    )
    return series, sigma_coarse
