"""Run configuration: a flat key = value file, overridable by CLI flags.

Every run is reproducible from its serialized configuration plus the seed;
the resolved mapping is echoed verbatim into every report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Any, Optional

from .errors import ConfigurationError
from .kernel import KernelSpec
from .simulate import SigmaModel

__all__ = ["RunConfig", "parse_kv_file", "parse_multipliers", "parse_float_list"]


def _coerce(text: str):
    low = text.strip()
    if low.lower() in ("true", "false"):
        return low.lower() == "true"
    for cast in (int, float):
        try:
            return cast(low)
        except ValueError:
            continue
    return low


def parse_kv_file(path: str) -> dict[str, Any]:
    """Parse `key = value` lines; '#' starts a comment."""
    out: dict[str, Any] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for ln, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigurationError(f"{path}:{ln}: expected 'key = value', got {raw!r}")
                key, val = line.split("=", 1)
                out[key.strip()] = _coerce(val)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    return out


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad number list {text!r}") from exc


def parse_multipliers(text: str) -> list[int]:
    """Comma list of ints; 'a:b' and 'a:b:step' expand to inclusive ranges."""
    out: list[int] = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if not tok:
            continue
        if ":" in tok:
            parts = tok.split(":")
            if len(parts) not in (2, 3):
                raise ConfigurationError(f"bad multiplier range {tok!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
                step = int(parts[2]) if len(parts) == 3 else 1
            except ValueError as exc:
                raise ConfigurationError(f"bad multiplier range {tok!r}") from exc
            if step < 1 or b < a:
                raise ConfigurationError(f"bad multiplier range {tok!r}")
            out.extend(range(a, b + 1, step))
        else:
            try:
                out.append(int(tok))
            except ValueError as exc:
                raise ConfigurationError(f"bad multiplier {tok!r}") from exc
    if not out:
        raise ConfigurationError("empty multiplier list")
    return out


@dataclass
class RunConfig:
    """All knobs of the five subcommands, with model/kernel builders."""

    command: str = ""
    # kernel
    alpha: float = -1.0 / 6.0
    lam: float = 1.0
    quad_tol: float = 1e-9
    # sigma model
    sigma_kind: str = "constant"
    sigma_level: float = 1.0
    sigma_volvol: float = 0.5
    sigma_mean_reversion: float = 1.0
    sigma_smooth_window: Optional[float] = None
    # grids and seeds
    model: str = "bss"
    hurst: Optional[float] = None
    n: int = 65536
    delta: float = 1.0 / 4096.0
    seed: int = 1
    oversample: int = 16
    burn_in: Optional[float] = None
    # estimation
    p: float = 2.0
    k: int = 2
    level: float = 0.95
    gapped: bool = False
    kappa: float = 0.6
    gap: Optional[int] = None
    powers: str = "2"
    multipliers: str = "1"
    # spectrum
    segment_len: int = 65536
    overlap: float = 0.5
    taper: str = "hann"
    f_min: Optional[float] = None
    f_max: Optional[float] = None
    # monte carlo
    experiment: str = "lln"
    reps: int = 100
    workers: int = 1
    t_eval: float = 1.0
    paths: int = 2000
    # io
    input: Optional[str] = None
    format: str = "csv"
    rate: Optional[float] = None
    standardize: bool = False
    out: Optional[str] = None
    report: Optional[str] = None
    csv: Optional[str] = None
    svg: Optional[str] = None

    # keys accepted in config files / --set, mapped onto attributes
    _ALIASES = {
        "kernel.alpha": "alpha",
        "kernel.lambda": "lam",
        "kernel.quad_tol": "quad_tol",
        "sigma.kind": "sigma_kind",
        "sigma.level": "sigma_level",
        "sigma.volvol": "sigma_volvol",
        "sigma.mean_reversion": "sigma_mean_reversion",
        "sigma.smooth_window": "sigma_smooth_window",
    }

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in fields(cls) if not f.name.startswith("_")}

    def apply(self, mapping: dict[str, Any], source: str = "config") -> None:
        names = self.field_names()
        for key, val in mapping.items():
            attr = self._ALIASES.get(key, key.replace("-", "_"))
            if attr not in names:
                raise ConfigurationError(f"unknown {source} key {key!r}")
            setattr(self, attr, val)

    def validate_common(self) -> None:
        if self.n < 2:
            raise ConfigurationError(f"n must be >= 2, got {self.n}")
        if not self.delta > 0:
            raise ConfigurationError(f"delta must be positive, got {self.delta}")
        if not isinstance(self.seed, int):
            raise ConfigurationError(f"seed must be an integer, got {self.seed!r}")
        if self.rate is not None:
            if not self.rate > 0:
                raise ConfigurationError(f"rate must be positive, got {self.rate}")
            self.delta = 1.0 / float(self.rate)

    def kernel_spec(self) -> KernelSpec:
        try:
            return KernelSpec(alpha=self.alpha, lam=self.lam, quad_tol=self.quad_tol)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    def sigma_model(self) -> SigmaModel:
        return SigmaModel(
            kind=self.sigma_kind,
            level=self.sigma_level,
            volvol=self.sigma_volvol,
            mean_reversion=self.sigma_mean_reversion,
            smooth_window=self.sigma_smooth_window,
        )

    def echo(self) -> dict[str, Any]:
        """Sorted plain-value mapping for report embedding."""
        out = {}
        for f in fields(self):
            if f.name.startswith("_"):
                continue
            val = getattr(self, f.name)
            if isinstance(val, float) and not math.isfinite(val):
                val = str(val)
            out[f.name] = val
        return dict(sorted(out.items()))
