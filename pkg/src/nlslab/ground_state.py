"""Ground state of -dQ + Q = Q^3 on R^3 by shooting, and the constants it sets.

With w = r Q the radial equation is w'' = w - w^3/r^2, w(0) = 0, w'(0) = a.
The ground state is the separatrix between shots that cross zero (a too
large) and shots that turn back up towards the constant solution Q = 1
(a too small).
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import spsolve

from .radial import RadialField, RadialGrid, make_grid, norms, NormSet

DEFAULT_R_MAX = 30.0
DEFAULT_N = 30001
MATCH_TOL = 1e-9


class ShootOutcome(enum.Enum):
    CROSSES_ZERO = "CrossesZero"
    STAYS_POSITIVE_GROWS = "StaysPositiveGrows"
    DECAYS = "Decays"


class GroundStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class ShotResult:
    outcome: ShootOutcome
    radius: float


def _integrate(a: float, h: float, n: int, record: bool = False):
    # series start: w = a r + (a - a^3) r^3 / 6 + O(r^5)
    r = h
    c3 = (a - a ** 3) / 6.0
    w = a * h + c3 * h ** 3
    p = a + 3.0 * c3 * h ** 2
    ws = [0.0, w] if record else None
    ps = [a, p] if record else None
    half = 0.5 * h
    outcome = ShootOutcome.DECAYS
    for _ in range(1, n - 1):
        rm = r + half
        rn = r + h
        k1w = p
        k1p = w - w * w * w / (r * r)
        w2 = w + half * k1w
        p2 = p + half * k1p
        k2w = p2
        k2p = w2 - w2 * w2 * w2 / (rm * rm)
        w3 = w + half * k2w
        p3 = p + half * k2p
        k3w = p3
        k3p = w3 - w3 * w3 * w3 / (rm * rm)
        w4 = w + h * k3w
        p4 = p + h * k3p
        k4w = p4
        k4p = w4 - w4 * w4 * w4 / (rn * rn)
        w += h * (k1w + 2.0 * k2w + 2.0 * k3w + k4w) / 6.0
        p += h * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0
        r = rn
        if record:
            ws.append(w)
            ps.append(p)
        if not (math.isfinite(w) and math.isfinite(p)):
            outcome = ShootOutcome.STAYS_POSITIVE_GROWS
            break
        if w < 0.0:
            outcome = ShootOutcome.CROSSES_ZERO
            break
        # Q = w/r turning back up, or outright divergence
        if r * p - w > 0.0 or w > 10.0 * a * r:
            outcome = ShootOutcome.STAYS_POSITIVE_GROWS
            break
    return outcome, r, ws, ps


def _check_free_space(grid: RadialGrid):
    if not grid.euclidean:
        raise ValueError("shooting needs a free-space grid (r0 = 0)")


def shoot(a: float, grid: RadialGrid) -> ShotResult:
    """Integrate one shot with fixed-step RK4 (step = grid spacing) and classify it."""
    if not a > 0:
        raise ValueError("shooting slope must be positive")
    _check_free_space(grid)
    outcome, r, _, _ = _integrate(float(a), grid.h, grid.n)
    return ShotResult(outcome, r)


@dataclass(frozen=True)
class GroundState:
    grid: RadialGrid
    profile: np.ndarray  # w = r Q on grid
    dprofile: np.ndarray  # w'
    a0: float
    r_match: float
    tail_c: float
    norms: NormSet

    def field(self) -> RadialField:
        return RadialField(self.grid, self.profile, self.dprofile)

    @functools.cached_property
    def _spline(self) -> CubicSpline:
        j = int(round(self.r_match / self.grid.h))
        return CubicSpline(self.grid.r[: j + 1], self.profile[: j + 1])

    def sample(self, r) -> np.ndarray:
        """w = r Q(r) at arbitrary radii (exponential tail past the matching radius)."""
        r = np.asarray(r, dtype=float)
        inside = r <= self.r_match
        out = self.tail_c * np.exp(-np.maximum(r, self.r_match))
        out = np.where(inside, self._spline(np.clip(r, 0.0, self.r_match)), out)
        return out

    def on_grid(self, grid: RadialGrid) -> RadialField:
        """Continuum Q sampled on another grid."""
        return RadialField(grid, self.sample(grid.r))

    def q_values(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        w = self.sample(r)
        out = np.empty_like(w)
        pos = r > 0
        out[pos] = w[pos] / r[pos]
        out[~pos] = self.a0
        return out


def find_ground_state(tol: float = 1e-12, grid: RadialGrid | None = None) -> GroundState:
    if grid is None:
        grid = make_grid(0.0, DEFAULT_R_MAX, DEFAULT_N)
    if not tol > 0:
        raise ValueError("tol must be positive")
    _check_free_space(grid)
    h, n = grid.h, grid.n

    def crosses(a):
        return _integrate(a, h, n)[0] is ShootOutcome.CROSSES_ZERO

    a_lo = a_hi = None
    prev = 0.5
    if crosses(prev):
        raise GroundStateError("no sign change in shooting scan")
    a = 1.0
    while a <= 1024.0:
        if crosses(a):
            a_lo, a_hi = prev, a
            break
        prev, a = a, 2.0 * a
    if a_lo is None:
        raise GroundStateError("no sign change in shooting scan")

    while a_hi - a_lo > tol:
        mid = 0.5 * (a_lo + a_hi)
        if mid <= a_lo or mid >= a_hi:
            break
        if crosses(mid):
            a_hi = mid
        else:
            a_lo = mid

    _, _, w_lo, p_lo = _integrate(a_lo, h, n, record=True)
    _, _, w_hi, p_hi = _integrate(a_hi, h, n, record=True)
    m = min(len(w_lo), len(w_hi))
    w_lo, w_hi = np.array(w_lo[:m]), np.array(w_hi[:m])
    p_lo, p_hi = np.array(p_lo[:m]), np.array(p_hi[:m])
    wmax = max(w_lo.max(), w_hi.max())
    # match before the two bracketing shots separate
    apart = np.nonzero(np.abs(w_lo - w_hi) > MATCH_TOL * wmax)[0]
    j = int(apart[0]) if apart.size else m - 1
    j = max(j - 1, 1)

    r = grid.r
    w = np.empty(n)
    dw = np.empty(n)
    w[: j + 1] = 0.5 * (w_lo[: j + 1] + w_hi[: j + 1])
    dw[: j + 1] = 0.5 * (p_lo[: j + 1] + p_hi[: j + 1])
    c = w[j] * math.exp(r[j])
    w[j + 1:] = c * np.exp(-r[j + 1:])
    dw[j + 1:] = -w[j + 1:]

    a0 = 0.5 * (a_lo + a_hi)
    f = RadialField(grid, w, dw)
    return GroundState(grid, w, dw, a0, float(r[j]), c, norms(f))


@functools.lru_cache(maxsize=8)
def cached_ground_state(r_max: float = DEFAULT_R_MAX, n: int = DEFAULT_N, tol: float = 1e-12) -> GroundState:
    return find_ground_state(tol, make_grid(0.0, r_max, n))


def pohozaev_residuals(gs: GroundState) -> tuple[float, float]:
    ns = gs.norms
    return abs(ns.kinetic - 3.0 * ns.mass) / ns.mass, abs(ns.l4_fourth - 4.0 * ns.mass) / ns.mass


def discrete_ground_state(gs: GroundState, grid: RadialGrid, max_iter: int = 30) -> RadialField:
    """Stationary state of the grid's own equation D2 w - w + w^3/r^2 = 0.

    Newton iteration started from the sampled continuum profile.  Free-space
    grids only: on an exterior grid there is no such state to polish towards.
    """
    _check_free_space(grid)
    h = grid.h
    r = grid.r[1:-1]
    w = gs.sample(r)
    m = w.size
    d2 = sp.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / h ** 2

    def residual(w):
        d = np.diff(np.concatenate(([0.0], w, [0.0])))
        return np.diff(d) / h ** 2 - w + w ** 3 / r ** 2

    for _ in range(max_iter):
        jac = (d2 - sp.identity(m) + sp.diags(3.0 * w ** 2 / r ** 2)).tocsc()
        step = spsolve(jac, -residual(w))
        w = w + step
        if np.max(np.abs(step)) <= 4e-16 * np.max(np.abs(w)):
            break
    else:
        if np.max(np.abs(step)) > 1e-10:
            raise GroundStateError("Newton polish of the discrete ground state did not converge")
    return RadialField(grid, np.concatenate(([0.0], w, [0.0])))


@dataclass(frozen=True)
class ThresholdConstants:
    em_threshold: float
    k_threshold: float
    gn_constant: float
    delta_prime: float
    rho: float
    mass_q: float


def thresholds(gs: GroundState, delta_prime: float = 0.1, rho: float = 0.01) -> ThresholdConstants:
    if not 0.0 < delta_prime < 1.0:
        raise ValueError("delta_prime must lie in (0, 1)")
    if not rho > 0:
        raise ValueError("rho must be positive")
    ns = gs.norms
    root = math.sqrt(ns.mass) * math.sqrt(ns.kinetic)
    return ThresholdConstants(
        em_threshold=ns.energy * ns.mass,
        k_threshold=root,
        gn_constant=(4.0 / 3.0) / root,
        delta_prime=delta_prime,
        rho=rho,
        mass_q=ns.mass,
    )


def gn_check(f: RadialField, tc: ThresholdConstants) -> float:
    """Ratio of the two sides of the refined Gagliardo-Nirenberg inequality (<= 1).

    For radial f the optimal Galilean boost is zero, so the infimum over
    boosts is the kinetic energy itself.
    """
    ns = norms(f)
    if ns.mass == 0.0 or ns.kinetic == 0.0:
        raise ValueError("gn_check needs a nonzero field")
    return ns.l4_fourth / (tc.gn_constant * math.sqrt(ns.mass) * math.sqrt(ns.kinetic) * ns.kinetic)
