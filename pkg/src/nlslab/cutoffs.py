"""Cutoff family chi, phi, phi1, psi used by the Morawetz functionals.

Everything is tabulated once in the normalized radius rho = r/R on [0, 2]
(phi and phi1 vanish beyond 2) and rescaled on evaluation, so one table
serves every R.

    phi(x)  = (1/(w3 R^3)) int chi^2((x-s)/R) chi^2(s/R) ds
    phi1(x) = (1/(w3 R^3)) int chi^2((x-s)/R) chi^4(s/R) ds
    psi(x)  = (1/|x|) int_0^|x| phi(r) dr
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline, PPoly

from .radial import RadialField

OMEGA3 = 4.0 * math.pi / 3.0  # volume of the unit ball
_CHUNK = 256


def smooth_step(x):
    """C-infinity step: 1 for x <= 0, 0 for x >= 1, exp(1 - 1/(1-x^2)) between."""
    x = np.asarray(x, dtype=float)
    out = np.where(x <= 0.0, 1.0, 0.0)
    mid = (x > 0.0) & (x < 1.0)
    xm = x[mid]
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - xm * xm))
    return out


def chi_profile(rho, eta: float):
    """chi(rho) = 1 for rho <= 1 - eta, 0 for rho >= 1."""
    return smooth_step((np.asarray(rho, dtype=float) - (1.0 - eta)) / eta)


def _radial_convolution(rho: np.ndarray, s: np.ndarray, f_s: np.ndarray, g_s: np.ndarray) -> np.ndarray:
    """(F*G)(rho) for radial F, G supported in [0, 1].

    (F*G)(r) = (2 pi / r) int s F(s) [int_{|r-s|}^{r+s} G(w) w dw] ds
    """
    prim = CubicSpline(s, g_s * s).antiderivative()

    def big_g(w):
        w = np.minimum(w, s[-1])
        return prim(w)

    ws = np.full(s.size, s[1] - s[0])
    ws[0] *= 0.5
    ws[-1] *= 0.5
    weight = ws * s * f_s
    out = np.empty(rho.size)
    for lo in range(0, rho.size, _CHUNK):
        r = rho[lo:lo + _CHUNK, None]
        inner = big_g(r + s[None, :]) - big_g(np.abs(r - s[None, :]))
        out[lo:lo + _CHUNK] = inner @ weight
    pos = rho > 0
    out[pos] *= 2.0 * math.pi / rho[pos]
    out[~pos] = 4.0 * math.pi * np.dot(ws, s * s * f_s * g_s)
    # support of the convolution of two unit balls
    out[rho >= 2.0] = 0.0
    return out


@dataclass(frozen=True)
class CutoffFamily:
    R: float
    eta: float
    rho: np.ndarray  # normalized nodes on [0, 2]
    chi: np.ndarray
    phi: np.ndarray
    phi1: np.ndarray
    psi: np.ndarray
    p0: np.ndarray  # normalized primitive of psi(w) w
    p2: np.ndarray  # normalized primitive of psi(w) w^3
    phi_integral: float  # int_0^2 phi(rho) d rho
    _phi_spline: PPoly
    _phi1_spline: PPoly
    _psi_spline: PPoly
    _p0_spline: PPoly
    _p2_spline: PPoly

    def with_scale(self, R: float) -> "CutoffFamily":
        if not R > 0:
            raise ValueError("R must be positive")
        return replace(self, R=float(R))

    # physical-radius evaluation

    def chi_at(self, r) -> np.ndarray:
        return chi_profile(np.asarray(r, dtype=float) / self.R, self.eta)

    def phi_at(self, r) -> np.ndarray:
        rho = np.asarray(r, dtype=float) / self.R
        return np.where(rho < 2.0, self._phi_spline(np.minimum(rho, 2.0)), 0.0)

    def phi1_at(self, r) -> np.ndarray:
        rho = np.asarray(r, dtype=float) / self.R
        return np.where(rho < 2.0, self._phi1_spline(np.minimum(rho, 2.0)), 0.0)

    def dphi_at(self, r) -> np.ndarray:
        rho = np.asarray(r, dtype=float) / self.R
        return np.where(rho < 2.0, self._phi_spline(np.minimum(rho, 2.0), 1), 0.0) / self.R

    def psi_at(self, r) -> np.ndarray:
        rho = np.asarray(r, dtype=float) / self.R
        far = self.phi_integral / np.maximum(rho, 2.0)
        return np.where(rho <= 2.0, self._psi_spline(np.minimum(rho, 2.0)), far)

    def p0_at(self, w) -> np.ndarray:
        """int_0^W psi(w) w dw."""
        rho = np.asarray(w, dtype=float) / self.R
        near = self._p0_spline(np.minimum(rho, 2.0))
        far = self.p0[-1] + self.phi_integral * (rho - 2.0)
        return self.R ** 2 * np.where(rho <= 2.0, near, far)

    def p2_at(self, w) -> np.ndarray:
        """int_0^W psi(w) w^3 dw."""
        rho = np.asarray(w, dtype=float) / self.R
        near = self._p2_spline(np.minimum(rho, 2.0))
        far = self.p2[-1] + self.phi_integral * (rho ** 3 - 8.0) / 3.0
        return self.R ** 4 * np.where(rho <= 2.0, near, far)


def build_cutoffs(R: float, eta: float, n_tab: int = 4096) -> CutoffFamily:
    if not (math.isfinite(R) and R > 0):
        raise ValueError("R must be positive")
    if not 0.0 < eta < 0.5:
        raise ValueError("eta must lie in (0, 1/2)")
    if n_tab < 256:
        raise ValueError("n_tab must be at least 256")

    rho = np.linspace(0.0, 2.0, n_tab)
    s = np.linspace(0.0, 1.0, n_tab // 2 + 1)
    chi_s = chi_profile(s, eta)
    chi2, chi4 = chi_s ** 2, chi_s ** 4

    phi = _radial_convolution(rho, s, chi2, chi2) / OMEGA3
    phi1 = _radial_convolution(rho, s, chi4, chi2) / OMEGA3

    d = rho[1] - rho[0]
    cum = np.concatenate(([0.0], np.cumsum(0.5 * d * (phi[1:] + phi[:-1]))))
    psi = np.empty(n_tab)
    psi[0] = phi[0]
    psi[1:] = cum[1:] / rho[1:]

    phi_spline = CubicSpline(rho, phi)
    phi1_spline = CubicSpline(rho, phi1)
    psi_spline = CubicSpline(rho, psi)
    p0_spline = CubicSpline(rho, psi * rho).antiderivative()
    p2_spline = CubicSpline(rho, psi * rho ** 3).antiderivative()

    return CutoffFamily(
        R=float(R),
        eta=float(eta),
        rho=rho,
        chi=chi_profile(rho, eta),
        phi=phi,
        phi1=phi1,
        psi=psi,
        p0=p0_spline(rho),
        p2=p2_spline(rho),
        phi_integral=float(cum[-1]),
        _phi_spline=phi_spline,
        _phi1_spline=phi1_spline,
        _psi_spline=psi_spline,
        _p0_spline=p0_spline,
        _p2_spline=p2_spline,
    )


def gradient_identity_residual(cf: CutoffFamily) -> float:
    """sup |r psi'(r) - (phi - psi)| over the table, psi' by centered differences."""
    d = cf.rho[1] - cf.rho[0]
    dpsi = np.gradient(cf.psi, d, edge_order=2)
    return float(np.max(np.abs(cf.rho * dpsi - (cf.phi - cf.psi))))


def ball_cutoff(r, R: float) -> np.ndarray:
    """chi_R: 1 for r <= R/4, 0 for r >= R/2."""
    quarter = 0.25 * R
    return smooth_step((np.asarray(r, dtype=float) - quarter) / quarter)


def chi_ball(cf: CutoffFamily, f: RadialField) -> RadialField:
    return RadialField(f.grid, f.v * ball_cutoff(f.grid.r, cf.R))


@functools.lru_cache(maxsize=16)
def _unit_cutoffs(eta: float, n_tab: int) -> CutoffFamily:
    return build_cutoffs(1.0, eta, n_tab)


def cached_cutoffs(R: float, eta: float, n_tab: int = 4096) -> CutoffFamily:
    """Shared read-only family; the tables are scale free, so only (eta, n_tab) key the cache."""
    return _unit_cutoffs(float(eta), int(n_tab)).with_scale(R)
