"""Morawetz action, its rate decomposition, boundary flux and interaction term.

All quantities are radial reductions on the v = r u grid.  The state
arguments accept anything with a ``field`` attribute (a simulation state) or
a bare :class:`RadialField`.
"""

from __future__ import annotations

import math

import numpy as np

from .cutoffs import CutoffFamily, chi_profile
from .radial import (
    FOUR_PI,
    RadialField,
    integrate,
    kinetic_density,
    lp_power,
    momentum_density,
    norms,
    radial_derivative,
)
from .series import ActionTerms, DiagnosticRow, TimeSeries

XI_FLOOR = 1e-12


class NoBoundaryError(ValueError):
    """Raised for boundary quantities on a free-space grid."""


class SeriesTooShortError(ValueError):
    pass


def _field(s) -> RadialField:
    return s if isinstance(s, RadialField) else s.field


def _time(s) -> float:
    return 0.0 if isinstance(s, RadialField) else float(s.t)


def action(s, cf: CutoffFamily) -> float:
    """M = 8 pi int psi(r) r Im(conj(v) v_r) dr."""
    f = _field(s)
    r = f.grid.r
    dv = radial_derivative(f)
    return 2.0 * FOUR_PI * integrate(f.grid, cf.psi_at(r) * r * momentum_density(f, dv))


def boundary_flux(s) -> float:
    """Integral of |d_n u|^2 over the obstacle sphere, 4 pi |v_r(r0)|^2."""
    f = _field(s)
    if f.grid.euclidean:
        raise NoBoundaryError("no boundary: the grid is free space (r0 = 0)")
    v = f.v
    # one-sided second order, with v(r0) = 0
    dv0 = (4.0 * v[1] - v[2]) / (2.0 * f.grid.h)
    return FOUR_PI * float(abs(dv0) ** 2)


def action_rate_terms(s, cf: CutoffFamily) -> ActionTerms:
    """Radial forms of the terms that add up to dM/dt.

    The outward normal of the exterior domain points toward the origin at
    r = r0, so x.n = -r0 and the boundary term is +2 r0 psi(r0) * flux.
    """
    f = _field(s)
    g = f.grid
    r = g.r
    inv_r = g.inv_r()
    dv = radial_derivative(f)
    absv2 = np.abs(f.v) ** 2
    quart = absv2 ** 2 * inv_r ** 2

    phi, phi1, psi = cf.phi_at(r), cf.phi1_at(r), cf.psi_at(r)
    bulk = 4.0 * FOUR_PI * integrate(g, phi * kinetic_density(f, dv) - 0.75 * phi1 * quart)
    quartic_err = -FOUR_PI * integrate(g, (3.0 * (phi - phi1) + 2.0 * (psi - phi)) * quart)

    # d/dr [3 phi + 2 (psi - phi)] = phi' + 2 psi', with r psi' = phi - psi
    weight = cf.dphi_at(r) + 2.0 * (phi - psi) * inv_r
    d_abs_u2 = 2.0 * np.real(np.conj(f.v) * dv) - 2.0 * absv2 * inv_r  # r^2 d_r |u|^2
    if g.euclidean:
        d_abs_u2[0] = 0.0
    gradient_err = FOUR_PI * integrate(g, weight * d_abs_u2)

    boundary = 0.0
    if not g.euclidean:
        boundary = 2.0 * g.r0 * float(cf.psi_at(g.r0)) * boundary_flux(f)
    return ActionTerms(bulk=bulk, boundary=boundary, angular=0.0,
                       quartic_err=quartic_err, gradient_err=gradient_err)


def rate_identity_residual(prev, nxt, mid, cf: CutoffFamily) -> float:
    """Relative mismatch between the centered difference of M and the term sum."""
    dt = _time(nxt) - _time(prev)
    if not dt > 0:
        raise ValueError("states must be in increasing time order")
    lhs = (action(nxt, cf) - action(prev, cf)) / dt
    terms = action_rate_terms(mid, cf)
    scale = abs(terms.bulk) + abs(terms.boundary) + abs(terms.quartic_err) + abs(terms.gradient_err)
    if scale == 0.0:
        return abs(lhs)
    return abs(lhs - terms.total) / scale


def interaction(s, cf: CutoffFamily) -> float:
    """Interaction Morawetz quantity M_R by the primitive-kernel reduction.

    M_R = 8 pi^2 sum_ij a_i b_j K(r_i, s_j) with
    K(r, s) = (r^2 - s^2)[P0(r+s) - P0(|r-s|)] + P2(r+s) - P2(|r-s|).
    On a uniform grid r+s depends only on i+j and |r-s| only on |i-j|, so the
    double sum collapses to convolutions and correlations.
    """
    f = _field(s)
    g = f.grid
    n, h = g.n, g.h
    r = g.r
    wts = g.weights()
    inv_r = g.inv_r()
    a = wts * momentum_density(f, radial_derivative(f)) * inv_r ** 2
    b = wts * np.abs(f.v) ** 2 * inv_r
    if not np.any(a) or not np.any(b):
        return 0.0
    ar2, bs2 = a * r * r, b * r * r

    sums = 2.0 * g.r0 + h * np.arange(2 * n - 1)
    total = np.dot(cf.p0_at(sums), np.convolve(ar2, b) - np.convolve(a, bs2))
    total += np.dot(cf.p2_at(sums), np.convolve(a, b))

    def by_gap(x, y):
        c = np.correlate(x, y, "full")
        out = c[n - 1:].copy()
        out[1:] += c[n - 2::-1]
        return out

    gaps = h * np.arange(n)
    total -= np.dot(cf.p0_at(gaps), by_gap(ar2, b) - by_gap(a, bs2))
    total -= np.dot(cf.p2_at(gaps), by_gap(a, b))
    return 8.0 * math.pi ** 2 * float(total)


def xi(s, R: float, eta: float = 0.1) -> float:
    """Radial component of the Galilean parameter at center 0.

    Returns 0 when the localized mass falls below 1e-12.
    """
    f = _field(s)
    w = chi_profile(f.grid.r / R, eta) ** 2
    denom = integrate(f.grid, w * np.abs(f.v) ** 2)
    if FOUR_PI * denom < XI_FLOOR:
        return 0.0
    num = integrate(f.grid, w * momentum_density(f, radial_derivative(f)))
    return -num / denom


def virial_value(f: RadialField) -> float:
    """V = int |x|^2 |u|^2 dx = 4 pi int r^2 |v|^2 dr."""
    return FOUR_PI * integrate(f.grid, f.grid.r ** 2 * np.abs(f.v) ** 2)


def diagnostic_row(s, cf: CutoffFamily, with_interaction: bool = True) -> DiagnosticRow:
    f = _field(s)
    return DiagnosticRow(
        t=_time(s),
        norms=norms(f),
        action=action(f, cf),
        action_terms=action_rate_terms(f, cf),
        flux=0.0 if f.grid.euclidean else boundary_flux(f),
        interaction=interaction(f, cf) if with_interaction else 0.0,
        xi0=xi(f, cf.R, cf.eta),
        virial=virial_value(f),
        lp3=lp_power(f, 3.0),
        lp5=lp_power(f, 5.0),
        lp10=lp_power(f, 10.0),
    )


def _window_mean(t: np.ndarray, y: np.ndarray, a: float, b: float) -> float:
    """Trapezoid mean of the piecewise-linear interpolant of y over [a, b]."""
    inner = (t > a) & (t < b)
    tt = np.concatenate(([a], t[inner], [b]))
    yy = np.interp(tt, t, y)
    return float(np.sum(0.5 * (yy[1:] + yy[:-1]) * np.diff(tt))) / (b - a)


def local_smoothing_average(series: TimeSeries, T0: float, values=None) -> float:
    """Largest time-average of the boundary flux over windows of length T0.

    Windows start at sample times, so that the maximum over windows of
    length 2 T0 never exceeds the maximum over windows of length T0.
    """
    if not T0 > 0:
        raise ValueError("T0 must be positive")
    t = np.asarray(series.times, dtype=float)
    y = np.asarray([row.flux for row in series.rows] if values is None else values, dtype=float)
    if t.size < 2 or t[-1] - t[0] < T0 * (1.0 - 1e-12):
        span = 0.0 if t.size == 0 else t[-1] - t[0]
        raise SeriesTooShortError(f"series spans {span:g}, shorter than T0 = {T0:g}")
    best = -math.inf
    tol = 1e-9 * T0
    for a in t:
        b = a + T0
        if b > t[-1] + tol:
            break
        best = max(best, _window_mean(t, y, a, min(b, t[-1])))
    return best


def dyadic_boundary_average(series: TimeSeries, cf: CutoffFamily, T0: float,
                            R0: float, J: float, nR: int) -> float:
    """Boundary term 2 r0 psi_R(r0) flux, time-averaged and averaged over
    nR log-spaced R in [R0, e^J R0]."""
    if series.euclidean:
        raise NoBoundaryError("no boundary: the run is in free space")
    if nR < 1:
        raise ValueError("nR must be at least 1")
    base = local_smoothing_average(series, T0)
    radii = R0 * np.exp(np.linspace(0.0, J, nR))
    weights = [2.0 * series.r0 * float(cf.with_scale(R).psi_at(series.r0)) for R in radii]
    return float(np.mean(weights)) * base
