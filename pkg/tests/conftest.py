from __future__ import annotations

import math

import pytest
from hypothesis import HealthCheck, settings

from bnsdecomp.bns_model import BnsParams
from bnsdecomp.levy_measures import LevyMeasureSpec, Variant

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# IG-OU parameter set of the reference experiments
REF = dict(S0=468.44, sigma0=0.064262, rho=-4.7039, r=0.01, lam=2.4958, a=0.0872, b=11.98)


def ref_measure(variant=Variant.IG_OU) -> LevyMeasureSpec:
    return LevyMeasureSpec(variant, REF["lam"], REF["a"], REF["b"])


def ref_params(T=0.25, rho=REF["rho"], variant=Variant.IG_OU) -> BnsParams:
    return BnsParams(REF["S0"], REF["sigma0"] ** 2, rho, REF["r"], T, ref_measure(variant))


@pytest.fixture
def ig_spec():
    return ref_measure(Variant.IG_OU)


@pytest.fixture
def gamma_spec():
    return ref_measure(Variant.GAMMA_OU)


@pytest.fixture
def params():
    return ref_params()


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """``check(n, name, ok, detail)`` records a PASS/FAIL line, then asserts ``ok``."""

    def check(n: int, name: str, ok: bool, detail: str = "") -> None:
        ACCEPTANCE[n] = f"criterion {n:>2} {name:<34} {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        assert ok, ACCEPTANCE[n]

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


__all__ = ["REF", "ref_measure", "ref_params", "rel", "math"]
