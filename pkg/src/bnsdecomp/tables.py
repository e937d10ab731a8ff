"""Strike-normalised integrand tables for one time-to-maturity.

Every integrand entering the decomposition is ``K * f(tau, m, v)`` with
``m = x - log K`` and ``v = sigma^2``. At each time node the functions are
tabulated on a tensor grid that is uniform in ``xi = asinh((m - m_c)/s0)``
and ``eta = log v``, then evaluated at path states with cubic B-splines.
The asinh coordinate puts resolution ``~ sqrt(v tau)`` next to the money
where short-dated kernels are steep, and spreads nodes geometrically away
from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .bs_core import _rule_for, i2_family_n, lbar_family_n
from .levy_measures import LevyMeasureSpec, support_cutoff

__all__ = ["TableGrid", "SplineTable", "NodeTables", "build_node_tables"]

_PAD = 6


@dataclass(frozen=True)
class TableGrid:
    m_c: float
    s0: float
    xi0: float
    dxi: float
    n_xi: int
    eta0: float
    deta: float
    n_eta: int

    @classmethod
    def covering(cls, m_lo, m_hi, v_lo, v_hi, m_c, s0, dxi, deta, pad=_PAD) -> "TableGrid":
        xi_lo = math.asinh((m_lo - m_c) / s0) - pad * dxi
        xi_hi = math.asinh((m_hi - m_c) / s0) + pad * dxi
        eta_lo = math.log(v_lo) - pad * deta
        eta_hi = math.log(v_hi) + pad * deta
        n_xi = int(math.ceil((xi_hi - xi_lo) / dxi)) + 1
        n_eta = int(math.ceil((eta_hi - eta_lo) / deta)) + 1
        return cls(m_c, s0, xi_lo, dxi, n_xi, eta_lo, deta, n_eta)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        xi = self.xi0 + self.dxi * np.arange(self.n_xi)
        eta = self.eta0 + self.deta * np.arange(self.n_eta)
        return self.m_c + self.s0 * np.sinh(xi), np.exp(eta)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        m, v = self.axes()
        mm, vv = np.meshgrid(m, v, indexing="ij")
        return mm.ravel(), vv.ravel()

    def coords(self, m, v) -> np.ndarray:
        fi = (np.arcsinh((np.asarray(m) - self.m_c) / self.s0) - self.xi0) / self.dxi
        fj = (np.log(v) - self.eta0) / self.deta
        return np.stack([np.ravel(fi), np.ravel(fj)])

    def contains(self, m, v) -> np.ndarray:
        c = self.coords(m, v)
        return ((c[0] >= 0) & (c[0] <= self.n_xi - 1) & (c[1] >= 0) & (c[1] <= self.n_eta - 1)).reshape(np.shape(m))

    @property
    def size(self) -> int:
        return self.n_xi * self.n_eta


class SplineTable:
    """Cubic B-spline interpolant of values sampled on a :class:`TableGrid`."""

    def __init__(self, grid: TableGrid, values: np.ndarray):
        self.grid = grid
        self._coef = ndimage.spline_filter(values.reshape(grid.n_xi, grid.n_eta), order=3, mode="mirror")

    def __call__(self, m, v) -> np.ndarray:
        shape = np.shape(m)
        out = ndimage.map_coordinates(self._coef, self.grid.coords(m, v), order=3,
                                      prefilter=False, mode="mirror")
        return out.reshape(shape)


@dataclass
class NodeTables:
    """Interpolants of every normalised integrand at one ``tau``.

    Keys: ``L`` (Lbar BS), ``Lx``, ``Lv`` (its x and sigma^2 partials),
    ``I2``/``I2v`` (total and pure-variance I2 integrands) and ``J5``
    (``int nu(dz) Delta^{rho z, z} Lbar BS``).
    """

    tau: float
    grid: TableGrid
    ext_grid: TableGrid
    tables: dict

    def __call__(self, key, m, v):
        return self.tables[key](m, v)


def build_node_tables(tau: float, r: float, rho: float, spec: LevyMeasureSpec,
                      m_lo: float, m_hi: float, v_lo: float, v_hi: float,
                      dxi: float = 0.1, deta: float = 0.1, n_dyadic: int = 16) -> NodeTables:
    """Tabulate all integrands on a box covering ``[m_lo, m_hi] x [v_lo, v_hi]``.

    ``Lbar BS`` is also sampled on an enlarged box so the shifted arguments
    ``(m + rho z, v + z)`` of the I5 integrand stay inside it for every
    node of the nu-rule.
    """
    m_c = -r * tau
    s0 = math.sqrt(v_lo * tau)
    grid = TableGrid.covering(m_lo, m_hi, v_lo, v_hi, m_c, s0, dxi, deta)
    z_max = support_cutoff(spec)
    m_in, v_in = grid.axes()
    ext = TableGrid.covering(min(m_in[0], m_in[0] + rho * z_max), max(m_in[-1], m_in[-1] + rho * z_max),
                             v_in[0], v_in[-1] + z_max, m_c, s0, dxi, deta, pad=2)
    tables = {}
    em, ev = ext.mesh()
    tables["L"] = SplineTable(ext, lbar_family_n(tau, em, ev, r, rho, spec, n_dyadic, which=("L",))["L"])
    gm, gv = grid.mesh()
    fam = lbar_family_n(tau, gm, gv, r, rho, spec, n_dyadic, which=("Lx", "Lv"))
    tables["Lx"] = SplineTable(grid, fam["Lx"])
    tables["Lv"] = SplineTable(grid, fam["Lv"])
    tot, vol = i2_family_n(tau, gm, gv, r, rho, spec, n_dyadic)
    tables["I2"] = SplineTable(grid, tot)
    tables["I2v"] = SplineTable(grid, vol)
    tables["J5"] = SplineTable(grid, j5_direct_from(tables["L"], tau, gm, gv, r, rho, spec, n_dyadic))
    return NodeTables(tau, grid, ext, tables)


def j5_direct_from(lbar, tau, m, v, r, rho, spec, n_dyadic=16, chunk=2048) -> np.ndarray:
    """``int nu(dz) [Lbar(m + rho z, v + z) - Lbar(m, v)]`` through a Lbar interpolant."""
    m = np.ravel(m)
    v = np.ravel(v)
    out = np.zeros_like(m)
    if rho == 0.0:
        return out
    for i in range(0, m.size, chunk):
        sl = slice(i, i + chunk)
        z, w = _rule_for(spec, tau, m[sl], v[sl], r, rho, n_dyadic)
        base = lbar(m[sl], v[sl])
        shifted = lbar(m[sl][:, None] + rho * z, v[sl][:, None] + z)
        out[sl] = ((shifted - base[:, None]) * w).sum(axis=1)
    return out
