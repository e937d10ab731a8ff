"""Break one call price into its Black-Scholes part and the jump corrections.

Run: python demos/price_anatomy.py [n_paths]
"""

from __future__ import annotations

import sys

from bnsdecomp import BnsParams, LevyMeasureSpec, SimConfig, Variant, decompose

measure = LevyMeasureSpec(Variant.IG_OU, lam=2.4958, a=0.0872, b=11.98)
params = BnsParams(S0=468.44, sigma0_sq=0.064262**2, rho=-4.7039, r=0.01, T=0.25, measure=measure)
n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000

report = decompose(params, params.initial_state(), 460.0, SimConfig(n_paths=n_paths, seed=1))
print(report.text())

# The first two terms need no simulation at all.
approx = report.bs_term + report.jump_principal
print(f"\nBS + principal jump term : {approx:.4f}")
print(f"Monte-Carlo price        : {report.reference_price.estimate:.4f}")
print(f"share left to I1..I5     : {(report.reference_price.estimate - approx):+.4f}")
