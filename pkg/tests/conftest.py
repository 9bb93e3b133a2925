"""Shared helpers: session-cached samplers (embedding builds are expensive)."""

import pytest

from bsslab.kernel import KernelSpec
from bsslab.simulate import FgnSampler, GaussianCoreSampler

_CORE = {}
_FGN = {}


def core_sampler(alpha, lam, n, delta, quad_tol=1e-9):
    key = (alpha, lam, n, delta, quad_tol)
    if key not in _CORE:
        spec = KernelSpec(alpha=alpha, lam=lam, quad_tol=quad_tol)
        _CORE[key] = GaussianCoreSampler(spec, n, delta)
    return _CORE[key]


def fgn_sampler(H, m):
    key = (H, m)
    if key not in _FGN:
        _FGN[key] = FgnSampler(H, m)
    return _FGN[key]


@pytest.fixture(scope="session")
def samplers():
    return {"core": core_sampler, "fgn": fgn_sampler}
