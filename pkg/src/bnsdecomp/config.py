"""INI run configuration: ``[model]``, ``[measure]``, ``[sim]``, ``[experiment]``."""

from __future__ import annotations

import configparser
import enum
import math
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .bns_model import BnsParams, ParameterError
from .levy_measures import LevyMeasureSpec, Variant
from .path_engine import SimConfig, SmallJumpPolicy

__all__ = ["ConfigError", "Experiment", "RunConfig", "parse_range", "load_config", "loads_config",
           "default_config_text"]


class ConfigError(ValueError):
    """Unparseable or invalid configuration (message carries the line when known)."""


class Experiment(str, enum.Enum):
    PRICE = "PRICE"
    DECOMPOSE = "DECOMPOSE"
    FIGURE1A = "FIGURE1A"
    FIGURE1B = "FIGURE1B"
    VALIDATE = "VALIDATE"
    SIMULATE = "SIMULATE"


@dataclass(frozen=True)
class RunConfig:
    model: BnsParams
    sim: SimConfig
    experiment: Experiment = Experiment.DECOMPOSE
    strikes: tuple[float, ...] = (460.0,)
    maturities: tuple[float, ...] = ()
    output_path: str | None = None

    def horizons(self) -> tuple[float, ...]:
        return self.maturities or (self.model.T,)

    def with_overrides(self, seed=None, paths=None, rho=None, out=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, sim=replace(cfg.sim, seed=seed))
        if paths is not None:
            cfg = replace(cfg, sim=replace(cfg.sim, n_paths=paths))
        if rho is not None:
            cfg = replace(cfg, model=cfg.model.with_(rho=rho))
        if out is not None:
            cfg = replace(cfg, output_path=out)
        return cfg


def _num(tok: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ConfigError(f"not a number: {tok!r}") from None


def parse_range(text: str) -> tuple[float, ...]:
    """``"440, 460"`` lists values; ``"440:480:0.1"`` is an inclusive range ``start:stop:step``."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = [_num(p) for p in text.split(":")]
        if len(parts) != 3:
            raise ConfigError(f"range needs start:stop:step, got {text!r}")
        lo, hi, step = parts
        if not step > 0.0:
            raise ConfigError("range step must be positive")
        if hi < lo:
            raise ConfigError("range stop below start")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        vals = lo + step * np.arange(n)
        # round away the float drift of repeated steps
        digits = max(0, -int(math.floor(math.log10(step))) + 6)
        return tuple(float(round(v, digits)) for v in vals)
    return tuple(_num(p) for p in re.split(r"[,\s]+", text) if p)


def default_config_text() -> str:
    return resources.files("bnsdecomp").joinpath("data/default_ig.ini").read_text()


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip().lower()
        elif current == section.lower() and re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return i
    return None


def loads_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    def get(section, key, conv, default=None):
        if not cp.has_option(section, key):
            if default is None:
                raise ConfigError(f"{source}: missing [{section}] {key}")
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            line = _line_of(text, section, key)
            where = f"line {line}" if line else f"[{section}]"
            raise ConfigError(f"{source}, {where}: bad value for {key} = {raw!r} ({exc})") from exc

    def where(section, key):
        line = _line_of(text, section, key)
        return f"{source}, line {line}" if line else source

    variant = get("measure", "variant", lambda s: Variant(s.strip().upper()))
    try:
        spec = LevyMeasureSpec(variant, get("measure", "lambda", float), get("measure", "a", float),
                               get("measure", "b", float))
    except ValueError as exc:
        raise ConfigError(f"{source}: [measure] {exc}") from exc

    if cp.has_option("model", "sigma0_sq"):
        s0_sq = get("model", "sigma0_sq", float)
    else:
        s0_sq = get("model", "sigma0", float) ** 2
    rho = get("model", "rho", float)
    if rho > 0.0:
        raise ConfigError(f"{where('model', 'rho')}: rho must be <= 0, got {rho}")
    model = BnsParams(S0=get("model", "S0", float), sigma0_sq=s0_sq, rho=rho,
                      r=get("model", "r", float), T=get("model", "T", float), measure=spec)

    sim_kw = {}
    for key, conv in (("n_paths", int), ("seed", int), ("ig_truncation", float),
                      ("small_jump_policy", lambda s: SmallJumpPolicy(s.strip().upper())),
                      ("time_nodes", int)):
        if cp.has_option("sim", key):
            sim_kw[key] = get("sim", key, conv)
    try:
        sim = SimConfig(**sim_kw)
    except ValueError as exc:
        raise ConfigError(f"{source}: [sim] {exc}") from exc

    kind = get("experiment", "kind", lambda s: Experiment(s.strip().upper()), Experiment.DECOMPOSE)
    strikes = get("experiment", "strikes", parse_range, (model.S0,)) or (model.S0,)
    maturities = get("experiment", "maturities", parse_range, ())
    if any(k <= 0.0 for k in strikes):
        raise ConfigError(f"{where('experiment', 'strikes')}: strikes must be positive")
    if any(t <= 0.0 for t in maturities):
        raise ConfigError(f"{where('experiment', 'maturities')}: maturities must be positive")
    out = cp.get("experiment", "output", fallback=None)
    return RunConfig(model, sim, kind, tuple(strikes), tuple(maturities), out)


def load_config(path: str | Path | None) -> RunConfig:
    """Read a config file; ``None`` loads the bundled IG-OU parameter set."""
    if path is None:
        return loads_config(default_config_text(), "default_ig.ini")
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    return loads_config(text, str(p))
