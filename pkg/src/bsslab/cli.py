"""Command-line front end.

Subcommands: simulate, estimate, spectrum, scan, montecarlo.  Every flag can
also come from a `key = value` config file (--config); flags win.  Exit
codes: 0 success, 2 configuration error, 3 data error, 4 numeric/regime/
degenerate error (outputs are still flushed where possible).
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from .config import RunConfig, parse_float_list, parse_kv_file, parse_multipliers
from .errors import (
    BssError,
    ConfigurationError,
    DataError,
    DegenerateInputError,
    DomainError,
    NumericError,
    RegimeError,
)
from .estimate import alpha_scan, choose_gap, cof_ci, gapped_alpha_ci
from .montecarlo import EXPERIMENTS, run_montecarlo
from .reports import Report, emit_csv, emit_report, emit_svg_chart, to_jsonable
from .series_io import export_series, ingest_series
from .simulate import simulate_bss, simulate_fbm, simulate_gaussian_core
from .spectral import fit_spectrum, welch_psd

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _add_common(sp: argparse.ArgumentParser):
    sp.add_argument("--config", help="key = value configuration file")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override any config key (repeatable)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--report", help="write the JSON report here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bsslab",
        description="Simulation and smoothness estimation for Brownian "
                    "semi-stationary processes with the gamma kernel.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a sample path")
    _add_common(sp)
    sp.add_argument("--model", choices=["bss", "gaussian-core", "fbm"])
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--hurst", type=float)
    sp.add_argument("--n", type=int)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--rate", type=float, help="sampling rate in Hz (sets delta)")
    sp.add_argument("--oversample", type=int)
    sp.add_argument("--burn-in", dest="burn_in", type=float)
    sp.add_argument("--sigma-kind", dest="sigma_kind",
                    choices=["constant", "exp-ou", "smooth-exp-ou"])
    sp.add_argument("--sigma-level", dest="sigma_level", type=float)
    sp.add_argument("--out", required=False, help="series output path")
    sp.add_argument("--format", choices=["csv", "raw"])

    sp = sub.add_parser("estimate", help="estimate the smoothness parameter")
    _add_common(sp)
    sp.add_argument("--input", help="series path")
    sp.add_argument("--format", choices=["csv", "raw"])
    sp.add_argument("--delta", type=float)
    sp.add_argument("--rate", type=float)
    sp.add_argument("--standardize", action="store_true", default=None)
    sp.add_argument("--p", type=float)
    sp.add_argument("--level", type=float)
    sp.add_argument("--gapped", action="store_true", default=None)
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--gap", type=int, help="explicit gap size (overrides kappa rule)")

    sp = sub.add_parser("spectrum", help="Welch PSD and model fit")
    _add_common(sp)
    sp.add_argument("--input")
    sp.add_argument("--format", choices=["csv", "raw"])
    sp.add_argument("--delta", type=float)
    sp.add_argument("--rate", type=float)
    sp.add_argument("--standardize", action="store_true", default=None)
    sp.add_argument("--segment-len", dest="segment_len", type=int)
    sp.add_argument("--overlap", type=float)
    sp.add_argument("--taper", choices=["hann", "none"])
    sp.add_argument("--f-min", dest="f_min", type=float)
    sp.add_argument("--f-max", dest="f_max", type=float)
    sp.add_argument("--csv", help="write (freq, density) rows here")
    sp.add_argument("--svg", help="write a log-log chart here")

    sp = sub.add_parser("scan", help="alpha_hat over (p, lag multiplier) grid")
    _add_common(sp)
    sp.add_argument("--input")
    sp.add_argument("--format", choices=["csv", "raw"])
    sp.add_argument("--delta", type=float)
    sp.add_argument("--rate", type=float)
    sp.add_argument("--standardize", action="store_true", default=None)
    sp.add_argument("--powers", help="comma list, e.g. 1,2,4,8")
    sp.add_argument("--multipliers", help="comma list with a:b[:step] ranges")
    sp.add_argument("--csv", help="write scan rows here")
    sp.add_argument("--svg", help="write a chart here")

    sp = sub.add_parser("montecarlo", help="acceptance-style experiments")
    _add_common(sp)
    sp.add_argument("--experiment", choices=list(EXPERIMENTS))
    sp.add_argument("--reps", type=int)
    sp.add_argument("--paths", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--hurst", type=float)
    sp.add_argument("--n", type=int)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--p", type=float)
    sp.add_argument("--k", type=int)
    sp.add_argument("--level", type=float)
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--gap", type=int)
    sp.add_argument("--sigma-kind", dest="sigma_kind",
                    choices=["constant", "exp-ou", "smooth-exp-ou"])
    sp.add_argument("--oversample", type=int)
    sp.add_argument("--t-eval", dest="t_eval", type=float)
    sp.add_argument("--powers")
    return ap


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    if getattr(args, "config", None):
        cfg.apply(parse_kv_file(args.config), source="config-file")
    overrides = {}
    for item in getattr(args, "set", []) or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        from .config import _coerce
        overrides[key.strip()] = _coerce(val)
    cfg.apply(overrides, source="--set")
    flag_vals = {
        k: v for k, v in vars(args).items()
        if k not in ("command", "config", "set") and v is not None
    }
    cfg.apply(flag_vals, source="flag")
    cfg.validate_common()
    return cfg


def _ingest(cfg: RunConfig):
    if not cfg.input:
        raise ConfigurationError("an --input series path is required")
    return ingest_series(cfg.input, cfg.format, delta=cfg.delta, rate=cfg.rate,
                         standardize=cfg.standardize)


def _report_from(cfg: RunConfig, results: dict, warnings: list[str],
                 t0: float) -> Report:
    return Report(
        command=cfg.command,
        config=cfg.echo(),
        results=to_jsonable(results),
        warnings=list(warnings),
        timing={"wall_seconds": time.time() - t0},
    )


def _estimate_result(rep) -> dict:
    return {
        "alpha_hat": rep.alpha_hat,
        "cof": rep.cof,
        "p": rep.p,
        "delta": rep.delta,
        "gap": rep.gap,
        "stderr": rep.stderr,
        "ci": list(rep.ci) if rep.ci else None,
        "level": rep.level,
        "diagnostics": rep.diagnostics,
        "warnings": rep.warnings,
    }


def cmd_simulate(cfg: RunConfig) -> tuple[dict, list[str]]:
    if cfg.model == "fbm":
        H = cfg.hurst if cfg.hurst is not None else cfg.alpha + 0.5
        series = simulate_fbm(H, cfg.n, cfg.delta, cfg.seed)
    elif cfg.model == "gaussian-core":
        series = simulate_gaussian_core(cfg.kernel_spec(), cfg.n, cfg.delta, cfg.seed)
    elif cfg.model == "bss":
        series = simulate_bss(cfg.kernel_spec(), cfg.sigma_model(), cfg.n, cfg.delta,
                              oversample=cfg.oversample, burn_in=cfg.burn_in,
                              seed=cfg.seed)
    else:
        raise ConfigurationError(f"unknown model {cfg.model!r}")
    if cfg.out:
        export_series(series, cfg.out, cfg.format)
    results = {
        "model": cfg.model, "n": len(series), "delta": series.delta,
        "meta": series.meta, "out": cfg.out,
        "sample_mean": float(series.values.mean()),
        "sample_var": float(series.values.var()),
    }
    return results, []


def cmd_estimate(cfg: RunConfig) -> tuple[dict, list[str]]:
    series = _ingest(cfg)
    if cfg.gapped or cfg.gap is not None:
        u = cfg.gap
        prelim = None
        if u is None:
            prelim = cof_ci(series, cfg.p, level=cfg.level)
            u = choose_gap(series.delta, prelim.alpha_hat, cfg.kappa,
                           horizon=series.duration)
        rep = gapped_alpha_ci(series, cfg.p, u, level=cfg.level)
        results = {"estimate": _estimate_result(rep)}
        if prelim is not None:
            results["preliminary"] = _estimate_result(prelim)
    else:
        rep = cof_ci(series, cfg.p, level=cfg.level)
        results = {"estimate": _estimate_result(rep)}
    print(f"alpha_hat = {rep.alpha_hat:+.6f}"
          + (f"  ci{int((rep.level or 0) * 100)}% = [{rep.ci[0]:+.6f}, {rep.ci[1]:+.6f}]"
             if rep.ci else "")
          + (f"  gap = {rep.gap}" if rep.gap else ""))
    return results, list(rep.warnings)


def cmd_spectrum(cfg: RunConfig) -> tuple[dict, list[str]]:
    series = _ingest(cfg)
    psd = welch_psd(series, cfg.segment_len, cfg.overlap, cfg.taper)
    fit = fit_spectrum(psd, f_min=cfg.f_min, f_max=cfg.f_max)
    if cfg.csv:
        emit_csv(cfg.csv, ["freq", "density"],
                 list(zip(psd.freqs.tolist(), psd.density.tolist())))
    if cfg.svg:
        model = np.exp(fit.log_const) * (
            1.0 + (2 * np.pi * psd.freqs[1:] / fit.lam) ** 2) ** (-(1 + fit.alpha))
        emit_svg_chart(cfg.svg, [
            ("welch psd", psd.freqs[1:].tolist(), psd.density[1:].tolist()),
            ("fit", psd.freqs[1:].tolist(), model.tolist()),
        ], title="spectral density", loglog=True)
    print(f"alpha = {fit.alpha:+.6f}  lambda = {fit.lam:.6g}  "
          f"residual = {fit.residual:.3g}  bins = {fit.n_bins}")
    results = {
        "psd": {
            "segment_len": psd.segment_len, "overlap_fraction": psd.overlap_fraction,
            "taper": psd.taper, "n_segments": psd.n_segments,
            "bin_width": psd.bin_width, "n_bins": int(psd.freqs.size),
        },
        "fit": {
            "alpha": fit.alpha, "lambda": fit.lam, "log_const": fit.log_const,
            "f_min": fit.f_min, "f_max": fit.f_max, "residual": fit.residual,
            "n_bins": fit.n_bins, "n_iter": fit.n_iter,
        },
    }
    return results, list(fit.warnings)


def cmd_scan(cfg: RunConfig) -> tuple[dict, list[str]]:
    series = _ingest(cfg)
    powers = parse_float_list(cfg.powers)
    mults = parse_multipliers(cfg.multipliers)
    table = alpha_scan(series, powers, mults)
    rows = table.as_records()
    if cfg.csv:
        emit_csv(cfg.csv, ["p", "lag_multiplier", "alpha_hat", "count"],
                 [(r["p"], r["lag_multiplier"], r["alpha_hat"], r["count"])
                  for r in rows])
    if cfg.svg:
        curves = []
        for p in powers:
            pts = [(r["lag_multiplier"], r["alpha_hat"]) for r in rows
                   if r["p"] == p and r["alpha_hat"] is not None]
            if pts:
                curves.append((f"p={p:g}", [x for x, _ in pts], [y for _, y in pts]))
        emit_svg_chart(cfg.svg, curves, title="alpha_hat vs lag multiplier")
    insufficient = sum(1 for r in rows if r["note"] == "insufficient-data")
    warnings = []
    if insufficient:
        warnings.append(f"{insufficient} scan cells had insufficient data")
    return {"rows": rows, "meta": table.meta}, warnings


def cmd_montecarlo(cfg: RunConfig) -> Report:
    report = run_montecarlo(cfg)
    res = report.results
    line = f"experiment = {cfg.experiment}"
    for key in ("mean_ratio", "coverage", "rel_error"):
        if key in res:
            line += f"  {key} = {res[key]:.4f}"
        for kind in ("plain", "gapped"):
            if isinstance(res.get(kind), dict) and key in res[kind]:
                line += f"  {kind}.{key} = {res[kind][key]:.4f}"
    n_fail = res.get("n_failures", 0)
    line += f"  failures = {n_fail}"
    print(line)
    return report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.time()
    report = None
    try:
        cfg = _resolve_config(args)
        if args.command == "montecarlo":
            report = cmd_montecarlo(cfg)
            code = EXIT_NUMERIC if report.results.get("n_failures", 0) else EXIT_OK
        else:
            handler = {
                "simulate": cmd_simulate,
                "estimate": cmd_estimate,
                "spectrum": cmd_spectrum,
                "scan": cmd_scan,
            }[args.command]
            results, warnings = handler(cfg)
            report = _report_from(cfg, results, warnings, t0)
            code = EXIT_OK
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except (DataError, DegenerateInputError) as exc:
        is_degenerate = isinstance(exc, DegenerateInputError)
        print(f"{'degenerate input' if is_degenerate else 'data error'}: {exc}",
              file=sys.stderr)
        code = EXIT_NUMERIC if is_degenerate else EXIT_DATA
    except (NumericError, RegimeError, DomainError) as exc:
        print(f"numeric/regime error: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    except BssError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    if report is not None and getattr(args, "report", None):
        emit_report(report, args.report)
    sys.stdout.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
