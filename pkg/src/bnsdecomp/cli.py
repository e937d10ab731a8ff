"""Command-line entry point.

Verbs: ``validate``, ``price``, ``decompose``, ``figure1a``, ``figure1b``,
``simulate``. Exit codes: 0 success, 2 validation failure, 3 residual-test
failure, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from .bns_model import BnsParams, ParameterError, avg_future_variance
from .bs_core import BsPoint, bs_price
from .config import ConfigError, RunConfig, load_config, parse_range
from .decomposition import decompose_many
from .levy_measures import QuadratureError, assumption2_holds
from .path_engine import mc_price, write_path_csv

log = logging.getLogger("bnsdecomp")

EXIT_OK, EXIT_VALIDATION, EXIT_RESIDUAL, EXIT_NUMERIC = 0, 2, 3, 4

FIG1A_STRIKES = "440:480:0.1"
FIG1B_MATURITIES = "0.02:0.40:0.02"


class NumericFailure(RuntimeError):
    pass


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> None:
    fh = open(path, "w", newline="") if path and path != "-" else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if not all(math.isfinite(float(v)) for v in row):
                raise NumericFailure(f"non-finite value in output row {row}")
            w.writerow([fmt(v) for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _params_at(cfg: RunConfig, T: float) -> BnsParams:
    return cfg.model if T == cfg.model.T else cfg.model.with_(T=T)


def _bs_columns(params: BnsParams, K) -> tuple[np.ndarray, np.ndarray]:
    state = params.initial_state()
    vbar = avg_future_variance(state, params)
    k = np.atleast_1d(K)
    bs0 = [bs_price(BsPoint(0.0, params.x0, params.sigma0_sq, float(kk), params.r, params.T)) for kk in k]
    bsv = [bs_price(BsPoint(0.0, params.x0, vbar, float(kk), params.r, params.T)) for kk in k]
    return np.array(bs0), np.array(bsv)


def run_validate(cfg: RunConfig, out=sys.stdout) -> int:
    ok = True
    m = cfg.model
    print(f"variant            {m.measure.variant.value}", file=out)
    print(f"mu                 {fmt(m.mu)}", file=out)
    print(f"stationary mean    {fmt(m.measure.a / m.measure.b)}", file=out)
    for T in cfg.horizons():
        chk = assumption2_holds(m.measure, T)
        ok &= chk.holds
        floor = math.exp(-m.lam * T) * m.sigma0_sq
        tag = "ok" if chk.holds else "VIOLATED"
        print(f"T={T:g}: exponential-moment slack {fmt(chk.slack)} [{tag}]  variance floor {fmt(floor)}", file=out)
    return EXIT_OK if ok else EXIT_VALIDATION


def run_price(cfg: RunConfig) -> int:
    rows = []
    for T in cfg.horizons():
        p = _params_at(cfg, T)
        est = mc_price(p, p.initial_state(), np.array(cfg.strikes), cfg.sim)
        bs0, bsv = _bs_columns(p, cfg.strikes)
        rows += [(T, K, v, s, b0, bv) for K, v, s, b0, bv in zip(cfg.strikes, est.price, est.std_error, bs0, bsv)]
    write_csv(cfg.output_path, ["T", "K", "V0", "V0_se", "BS_sigma0", "BS_Vbar"], rows)
    return EXIT_OK


def run_figure1(cfg: RunConfig, panel: str) -> int:
    """Panel ``a`` sweeps strikes at fixed T; panel ``b`` sweeps T at fixed K."""
    if panel == "a":
        p = cfg.model
        K = np.array(cfg.strikes)
        est = mc_price(p, p.initial_state(), K, cfg.sim)
        bs0, bsv = _bs_columns(p, K)
        rows = list(zip(K, est.price, est.std_error, bs0, bsv))
        write_csv(cfg.output_path, ["K", "V0", "V0_se", "BS_sigma0", "BS_Vbar"], rows)
        return EXIT_OK
    K = cfg.strikes[0]
    rows = []
    for T in cfg.horizons():
        p = _params_at(cfg, T)
        est = mc_price(p, p.initial_state(), K, cfg.sim)
        bs0, bsv = _bs_columns(p, K)
        rows.append((T, est.price, est.std_error, bs0[0], bsv[0]))
    write_csv(cfg.output_path, ["T", "V0", "V0_se", "BS_sigma0", "BS_Vbar"], rows)
    return EXIT_OK


def run_decompose(cfg: RunConfig, report=sys.stderr) -> int:
    rows, header, ok = [], None, True
    for T in cfg.horizons():
        p = _params_at(cfg, T)
        for rep in decompose_many(p, p.initial_state(), cfg.strikes, cfg.sim):
            row = rep.row()
            header = header or list(row)
            rows.append([row[h] for h in header])
            ok &= rep.identity_holds()
            print(rep.text(), file=report)
    write_csv(cfg.output_path, header, rows)
    return EXIT_OK if ok else EXIT_RESIDUAL


def run_simulate(cfg: RunConfig, steps: int = 50, n_dump: int = 100) -> int:
    p = cfg.model
    grid = np.linspace(0.0, p.T, steps + 1)[1:]
    write_path_csv(cfg.output_path or "paths.csv", p, cfg.sim, grid, n_dump=n_dump)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bnsdecomp", description=__doc__.split("\n")[0])
    ap.add_argument("verb", choices=["validate", "price", "decompose", "figure1a", "figure1b", "simulate"])
    ap.add_argument("--config", help="INI config (default: bundled IG-OU parameter set)")
    ap.add_argument("--seed", type=int, help="64-bit seed")
    ap.add_argument("--paths", type=int, help="number of Monte-Carlo paths")
    ap.add_argument("--out", help="output CSV path ('-' for stdout)")
    ap.add_argument("--rho-override", type=float, dest="rho", help="replace the leverage parameter")
    ap.add_argument("--dump-paths", type=int, default=100, help="paths written by 'simulate'")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _configure(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.verb == "figure1a":
        cfg = replace(cfg, maturities=())
        if args.config is None:
            cfg = replace(cfg, strikes=parse_range(FIG1A_STRIKES))
    elif args.verb == "figure1b":
        if args.config is None:
            cfg = replace(cfg, strikes=(460.0,), maturities=parse_range(FIG1B_MATURITIES))
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    if args.paths is not None and args.paths < 2:
        raise ConfigError("--paths must be >= 2")
    return cfg.with_overrides(seed=args.seed, paths=args.paths, rho=args.rho, out=args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _configure(args)
        if args.verb != "validate":
            for T in cfg.horizons():
                _params_at(cfg, T)  # raises with the violated inequality
        if args.verb == "validate":
            return run_validate(cfg)
        if args.verb == "price":
            return run_price(cfg)
        if args.verb == "decompose":
            return run_decompose(cfg)
        if args.verb in ("figure1a", "figure1b"):
            return run_figure1(cfg, args.verb[-1])
        return run_simulate(cfg, n_dump=args.dump_paths)
    except (ConfigError, ParameterError) as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (QuadratureError, NumericFailure, FloatingPointError, OverflowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
