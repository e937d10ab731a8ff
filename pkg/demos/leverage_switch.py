"""Turn the leverage off and watch the jump terms vanish.

With rho = 0 the price process no longer jumps, so the principal term and
I3..I5 are exactly zero and I2 reduces to the pure variance-jump part.
"""

from __future__ import annotations

from bnsdecomp import BnsParams, LevyMeasureSpec, SimConfig, Variant, decompose

measure = LevyMeasureSpec(Variant.GAMMA_OU, lam=2.4958, a=0.0872, b=11.98)
cfg = SimConfig(n_paths=10_000, seed=3)
for rho in (-4.7039, 0.0):
    params = BnsParams(468.44, 0.064262**2, rho, 0.01, 0.25, measure)
    rep = decompose(params, params.initial_state(), 460.0, cfg)
    print(f"rho = {rho}")
    print(f"  principal {rep.jump_principal:+.5f}   I3+I4+I5 "
          f"{rep.i3.estimate + rep.i4.estimate + rep.i5.estimate:+.5f}")
    print(f"  I2 = vol part {rep.i2_vol_jump.estimate:+.5f} + joint part {rep.i2_joint_jump.estimate:+.5f}")
    print(f"  identity residual {rep.residual:+.5f} (se {rep.residual_se:.5f})")
