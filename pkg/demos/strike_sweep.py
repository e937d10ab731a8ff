"""How the correction terms move across strikes at a fixed horizon.

All strikes share one set of simulated paths, so differences between rows
are smooth rather than noisy.
"""

from __future__ import annotations

import numpy as np

from bnsdecomp import BnsParams, LevyMeasureSpec, SimConfig, Variant, decompose_many

measure = LevyMeasureSpec(Variant.IG_OU, lam=2.4958, a=0.0872, b=11.98)
params = BnsParams(468.44, 0.064262**2, -4.7039, 0.01, 0.1, measure)
strikes = np.arange(440.0, 481.0, 10.0)

reports = decompose_many(params, params.initial_state(), strikes, SimConfig(n_paths=10_000, seed=2))
cols = ("bs_term", "jump_principal", "i1", "i2", "i3", "i4", "i5")
print("K      " + "".join(f"{c:>15}" for c in cols) + f"{'residual/se':>13}")
for rep in reports:
    vals = [getattr(rep, c) for c in cols]
    vals = [v.estimate if hasattr(v, "estimate") else v for v in vals]
    print(f"{rep.K:<7g}" + "".join(f"{v:15.5f}" for v in vals) + f"{rep.residual / rep.residual_se:13.2f}")
