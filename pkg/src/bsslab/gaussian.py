"""Gaussian-analysis constants of the limit theory.

Everything here is deterministic analysis around a standard normal U and
fractional Brownian motion B^H:

  * absolute moments m_p = E|U|^p,
  * Hermite coefficients a_l of |x|^p - m_p (probabilists' polynomials),
  * correlations rho_k(j) of k-th order fBm increments, at spacing 1 and 2
    and across the two spacings,
  * the asymptotic covariance matrix of the pair of normalized power
    variations at frequencies (d, 2d), assembled from the Hermite weights
    l! a_l^2 and the correlation series.

Increment covariances reduce, via Vandermonde convolution of the binomial
filter weights, to

    cov_k(j) = -1/2 * sum_{|m|<=k} (-1)^m C(2k, k+m) |j - m|^{2H},

evaluated directly for small j and by the large-lag expansion of the
central-difference operator (2 sinh(D/2))^{2k} x^{2H} beyond |j| = 64,
where the alternating sum would drown in cancellation.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DomainError, NumericError, RegimeError

__all__ = [
    "abs_moment",
    "HermiteExpansion",
    "hermite_coeffs",
    "rho_k",
    "rho_cross",
    "LambdaMatrix",
    "lambda_matrix",
]

# direct evaluation of the alternating |j-m|^{2H} sums is reliable below this
LARGE_LAG = 64


def abs_moment(p: float) -> float:
    """m_p = E|U|^p for standard normal U: 2^(p/2) Gamma((p+1)/2) / sqrt(pi)."""
    if not p > 0:
        raise DomainError(f"absolute moment needs p > 0, got {p}")
    return 2.0 ** (p / 2.0) * math.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)


# -- Hermite expansion of |x|^p - m_p ----------------------------------------


@dataclass
class HermiteExpansion:
    """Coefficients a_l of |x|^p - m_p = sum_{l>=2} a_l He_l(x).

    `a[l]` holds a_l for l = 0..truncation; odd entries are zero because the
    expanded function is even, and a_0 = a_1 = 0 by centering.  `tail_bound`
    is the residual of the variance identity
    sum_l l! a_l^2 = m_{2p} - m_p^2 left beyond the truncation.
    """

    power: float
    truncation: int
    a: np.ndarray
    tail_bound: float

    @property
    def coeffs(self) -> np.ndarray:
        """a_l for l = 2..truncation."""
        return self.a[2:]

    def weighted_squares(self) -> np.ndarray:
        """l! a_l^2 for l = 0..L (zero below l=2)."""
        facts = np.array([math.factorial(l) for l in range(self.truncation + 1)], dtype=float)
        return facts * self.a**2

    @property
    def l2_mass(self) -> float:
        return float(self.weighted_squares()[2:].sum())


def _hermite_integrals(p: float, L: int, n_panels: int) -> np.ndarray:
    """E[|U|^p He_l(U)] for l = 0..L on the half line (odd l vanish).

    The only non-smooth factor is x^p at the origin; the first panel absorbs
    it into a Gauss-Jacobi rule with weight x^p (restoring spectral accuracy
    for every p > 0), and the rest uses panel Gauss-Legendre.
    """
    from scipy.special import roots_jacobi

    xs, ws = leggauss(16)
    # He_L oscillates out to ~sqrt(2L+1); phi kills everything past ~26
    top = math.sqrt(2.0 * L + 1.0) + 12.0
    edges = np.linspace(0.0, top, n_panels + 1)
    h0 = edges[1]
    mid = 0.5 * (edges[1:-1] + edges[2:])[:, None]
    half = 0.5 * (edges[2:] - edges[1:-1])[:, None]
    x_gl = (mid + half * xs[None, :]).ravel()
    w_gl = (half * np.broadcast_to(ws, (n_panels - 1, xs.size))).ravel()
    base_gl = w_gl * x_gl**p

    tj, wj = roots_jacobi(48, 0.0, p)
    x_j = 0.5 * h0 * (1.0 + tj)
    base_j = (0.5 * h0) ** (p + 1.0) * wj  # x^p absorbed into the weight

    x = np.concatenate([x_j, x_gl])
    base = np.concatenate([base_j, base_gl])
    base = 2.0 * base * np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)

    out = np.zeros(L + 1)
    h_prev = np.zeros_like(x)
    h_cur = np.ones_like(x)
    out[0] = float(np.sum(base))
    for l in range(1, L + 1):
        h_prev, h_cur = h_cur, x * h_cur - (l - 1) * h_prev
        if l % 2 == 0:
            out[l] = float(np.sum(base * h_cur))
    return out


_HERMITE_CACHE: dict[tuple[float, int], HermiteExpansion] = {}
_HERMITE_LOCK = threading.Lock()


def hermite_coeffs(p: float, L: int = 60) -> HermiteExpansion:
    """Expansion of |x|^p - m_p, with panel count doubled until a_l stabilize.

    Doubling stops once two successive coefficient vectors agree to 1e-10 in
    the maximum norm; a tail residual below -1e-8 (impossible under the
    variance identity) raises NumericError.
    """
    if not p > 0:
        raise DomainError(f"hermite_coeffs needs p > 0, got {p}")
    if L < 2 or L % 2:
        raise DomainError(f"truncation L must be even and >= 2, got {L}")
    key = (float(p), int(L))
    cached = _HERMITE_CACHE.get(key)
    if cached is not None:
        return cached

    m_p = abs_moment(p)
    facts = np.array([math.factorial(l) for l in range(L + 1)], dtype=float)
    n_panels = 64
    prev = None
    for _ in range(8):
        a = _hermite_integrals(p, L, n_panels) / facts
        if prev is not None and np.max(np.abs(a - prev)) < 1e-10:
            break
        prev = a
        n_panels *= 2
    else:
        raise NumericError(f"Hermite quadrature did not stabilize for p={p}")

    a[0] -= m_p  # center: coefficient of He_0 is E f = 0
    a[1::2] = 0.0
    var = abs_moment(2 * p) - m_p**2
    tail = var - float((facts * a * a)[2:].sum())
    if tail < -1e-8:
        raise NumericError(
            f"Hermite mass exceeds m_2p - m_p^2 by {-tail:.3e} (p={p}, L={L})"
        )
    exp = HermiteExpansion(power=p, truncation=L, a=a, tail_bound=tail)
    with _HERMITE_LOCK:
        _HERMITE_CACHE[key] = exp
    return exp


# -- fBm increment correlations ------------------------------------------------


def _check_hurst(H: float):
    if not 0.0 < H < 1.0:
        raise DomainError(f"Hurst parameter must lie in (0,1), got {H}")


def _filter_weights(k: int) -> np.ndarray:
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise DomainError(f"filter order k must be a positive integer, got {k}")
    return np.array([(-1.0) ** j * math.comb(k, j) for j in range(k + 1)])


def _fgn_gamma(s, t, H):
    return 0.5 * (abs(s) ** (2 * H) + abs(t) ** (2 * H) - abs(s - t) ** (2 * H))


def _variance(H: float, k: int, spacing: int) -> float:
    m = np.arange(-k, k + 1)
    cw = np.array([(-1.0) ** mm * math.comb(2 * k, k + mm) for mm in m])
    return -0.5 * float(np.sum(cw * np.abs(spacing * m) ** (2 * H)))

def _falling(a: float, m: int) -> float:
    out = 1.0
    for i in range(m):
        out *= a - i
    return out


def _sinh_op_coeffs(k: int) -> list[float]:
    # (2 sinh(t/2))^{2k} = t^{2k} (1 + q1 t^2 + q2 t^4 + q3 t^6 + ...)
    a, b, c = 1.0 / 24, 1.0 / 1920, 1.0 / 322560
    q1 = 2 * k * a
    q2 = math.comb(2 * k, 2) * a * a + 2 * k * b
    q3 = math.comb(2 * k, 3) * a**3 + 2 * k * (2 * k - 1) * a * b + 2 * k * c
    return [1.0, q1, q2, q3]


def _cov_same_spacing(H: float, k: int, lags: np.ndarray, spacing: int) -> np.ndarray:
    """Covariance of k-th differences at `spacing`, index lag `lags` >= 0."""
    lags = np.asarray(lags, dtype=float)
    out = np.empty_like(lags)
    # in units of the spacing the lag is lags/spacing and the window is +-k
    rel = lags / spacing
    small = rel <= LARGE_LAG + 2 * k
    m = np.arange(-k, k + 1)
    cw = np.array([(-1.0) ** mm * math.comb(2 * k, k + mm) for mm in m])
    if small.any():
        js = lags[small][:, None]
        out[small] = -0.5 * np.sum(
            cw[None, :] * np.abs(js - spacing * m[None, :]) ** (2 * H), axis=1
        )
    if (~small).any():
        js = rel[~small]
        acc = np.zeros_like(js)
        for i, q in enumerate(_sinh_op_coeffs(k)):
            acc += q * _falling(2 * H, 2 * k + 2 * i) * js ** (2 * H - 2 * k - 2 * i)
        out[~small] = -0.5 * (-1.0) ** k * acc * spacing ** (2 * H)
    return out


def rho_k(H: float, k: int, j: int) -> float:
    """Correlation of k-th order fBm increments at unit spacing, lag j >= 0.

    Computed as the double-binomial contraction of the fBm covariance
    gamma(s,t) = (|s|^{2H} + |t|^{2H} - |s-t|^{2H})/2, normalized by the
    increment variance; rho_k(0) is exactly 1.
    """
    _check_hurst(H)
    w = _filter_weights(k)
    if j < 0:
        raise DomainError(f"lag must be >= 0, got {j}")
    if j == 0:
        return 1.0
    if j > LARGE_LAG + 2 * k:
        return float(_cov_same_spacing(H, k, np.array([float(j)]), 1)[0]) / _variance(H, k, 1)
    i = k  # any anchor works; increments are stationary
    cov = 0.0
    for q in range(k + 1):
        for r in range(k + 1):
            cov += w[q] * w[r] * _fgn_gamma(i - q, i + j - r, H)
    var = 0.0
    for q in range(k + 1):
        for r in range(k + 1):
            var += w[q] * w[r] * _fgn_gamma(i - q, i - r, H)
    return cov / var


def _cov_cross(H: float, k: int, lags: np.ndarray) -> np.ndarray:
    """Covariance of (spacing-1 diff at end 0, spacing-2 diff at end j)."""
    lags = np.asarray(lags, dtype=float)
    out = np.empty_like(lags)
    small = np.abs(lags) <= LARGE_LAG + 3 * k
    if small.any():
        js = lags[small][:, None, None]
        w = _filter_weights(k)
        q = np.arange(k + 1)[None, :, None]
        r = np.arange(k + 1)[None, None, :]
        ww = w[None, :, None] * w[None, None, :]
        out[small] = -0.5 * np.sum(ww * np.abs(js + q - 2 * r) ** (2 * H), axis=(1, 2))
    if (~small).any():
        js = lags[~small]
        sign = np.sign(js)
        aj = np.abs(js)
        # (1-e^t)^k (1-e^{-2t})^k = (-2)^k t^{2k} (1 + d1 t + d2 t^2 + d3 t^3 + ...)
        # for j -> +inf; odd coefficients flip sign for j -> -inf
        d1 = -k / 2.0
        d2 = k / 3.0 + k * (k - 1) / 8.0
        d3 = -k / 8.0 - k * (k - 1) / 6.0 - k * (k - 1) * (k - 2) / 48.0
        acc = np.zeros_like(js)
        for i, d in enumerate([1.0, d1, d2, d3]):
            term = d * _falling(2 * H, 2 * k + i) * aj ** (2 * H - 2 * k - i)
            acc += term * sign**i
        out[~small] = -0.5 * (-2.0) ** k * acc
    return out


def rho_cross(H: float, k: int, j: int) -> float:
    """Correlation between a unit-spacing and a spacing-2 k-th increment.

    The first difference ends at index 0, the second at index j (j may be
    negative; the function is not symmetric in j).
    """
    _check_hurst(H)
    _filter_weights(k)
    cov = float(_cov_cross(H, k, np.array([float(j)]))[0])
    return cov / math.sqrt(_variance(H, k, 1) * _variance(H, k, 2))


# -- asymptotic covariance matrix ---------------------------------------------


@dataclass
class LambdaMatrix:
    """Asymptotic covariance of normalized power variations at (d, 2d).

    Entries are the limits of Delta^{-1} var/cov of the pair of normalized
    variations of fBm with H = alpha + 1/2; `tail_rel` reports the largest
    relative weight the power-law tail extrapolation contributed to any of
    the three correlation series.
    """

    l11: float
    l12: float
    l22: float
    power: float
    hurst: float
    order: int
    truncation: int
    max_lag: int
    tail_rel: float

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.l11, self.l12], [self.l12, self.l22]])

    def contrast(self) -> float:
        """(-1, 1) Lambda (-1, 1)^T, the variance of the frequency contrast."""
        return self.l11 - 2.0 * self.l12 + self.l22

    def is_psd(self, tol: float = 1e-9) -> bool:
        return bool(np.linalg.eigvalsh(self.as_matrix()).min() > -tol)


def _series_with_tail(r: np.ndarray, ls: np.ndarray, weights: np.ndarray,
                      beta: float, J: int, edge_abs: tuple[float, ...]):
    """sum_l w_l * sum_j r_j^l with power-law tail extrapolation.

    `r` holds the correlations actually summed; `edge_abs` gives |rho| at the
    truncation edge for each open tail (one value for a one-sided series, two
    for the two-sided cross series).  Each tail is extended analytically via
    |rho(j)| ~ A j^{-beta}: sum_{j>J} A j^{-beta l} ~ rho(J)^l * J/(beta l - 1).
    """
    total = 0.0
    tail_rel = 0.0
    r2 = r * r
    cur = r2.copy()
    for l, wl in zip(ls, weights):
        s = float(cur.sum())
        tail = 0.0
        if beta * l > 1:
            for edge in edge_abs:
                tail += (edge**l) * J / (beta * l - 1.0)
        if s + tail != 0:
            tail_rel = max(tail_rel, abs(tail) / abs(s + tail))
        total += wl * (s + tail)
        cur *= r2
    return total, tail_rel


def lambda_matrix(p: float, H: float, k: int, L: int = 60, J: int = 100_000) -> LambdaMatrix:
    """Assemble the 2x2 asymptotic covariance matrix of (V-bar_1, V-bar_2).

    The diagonal entries follow the Hermite-times-correlation series
    sum_l l! a_l^2 (1 + 2 sum_{j>=1} rho(j)^l) with rho at spacing 1 and at
    unit index lags of spacing-2 increments; the off-diagonal entry sums the
    cross-correlation over all integer lags.  Requires square-summable
    correlations: k >= 2, or k = 1 with H < 3/4.
    """
    _check_hurst(H)
    if k < 1:
        raise DomainError(f"filter order must be >= 1, got {k}")
    if k == 1 and H >= 0.75:
        raise RegimeError(
            f"lambda series diverges for k=1 with H={H} >= 3/4; "
            "use second-order differences"
        )
    exp = hermite_coeffs(p, L)
    wts = exp.weighted_squares()
    ls = np.arange(2, L + 1, 2)
    weights = wts[2 : L + 1 : 2]
    beta = 2.0 * (k - H)

    var1 = _variance(H, k, 1)
    var2 = _variance(H, k, 2)
    # beyond the lag where |rho| ~ A j^-beta falls under 1e-8 the analytic
    # tail is exact to round-off, so the vectors can stop early
    probe = 512.0
    amp = max(
        abs(_cov_same_spacing(H, k, np.array([probe]), 1)[0]) / var1,
        abs(_cov_same_spacing(H, k, np.array([probe]), 2)[0]) / var2,
        abs(_cov_cross(H, k, np.array([probe]))[0]) / math.sqrt(var1 * var2),
        abs(_cov_cross(H, k, np.array([-probe]))[0]) / math.sqrt(var1 * var2),
    )
    j_eff = J
    if amp > 0:
        j_star = (amp * probe**beta / 1e-8) ** (1.0 / beta)
        j_eff = int(min(J, max(1024.0, j_star)))

    j = np.arange(1, j_eff + 1, dtype=float)
    r1 = _cov_same_spacing(H, k, j, 1) / var1
    r2 = _cov_same_spacing(H, k, j, 2) / var2
    jj = np.arange(-j_eff, j_eff + 1, dtype=float)
    rc = _cov_cross(H, k, jj) / math.sqrt(var1 * var2)

    s11, t11 = _series_with_tail(r1, ls, weights, beta, j_eff, (abs(r1[-1]),))
    s22, t22 = _series_with_tail(r2, ls, weights, beta, j_eff, (abs(r2[-1]),))
    s12, t12 = _series_with_tail(rc, ls, weights, beta, j_eff, (abs(rc[0]), abs(rc[-1])))

    mass = float(weights.sum())
    l11 = mass + 2.0 * s11
    l22 = mass + 2.0 * s22
    l12 = s12  # the j=0 cross term is part of the two-sided sum
    return LambdaMatrix(
        l11=l11,
        l12=l12,
        l22=l22,
        power=p,
        hurst=H,
        order=k,
        truncation=L,
        max_lag=J,
        tail_rel=max(t11, t22, t12),
    )
