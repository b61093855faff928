"""Radial exterior-domain discretization.

A radial function u(r) on {|x| > r0} (or all of R^3 when r0 = 0) is stored as
v(r) = r u(r) on a uniform grid.  The Dirichlet condition u = 0 on the obstacle
(or regularity at the origin) becomes v(r0) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FOUR_PI = 4.0 * math.pi
MIN_NODES = 16


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class RadialGrid:
    r0: float
    r_max: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.r0) and math.isfinite(self.r_max)):
            raise GridError("grid radii must be finite")
        if self.r0 < 0 or self.r_max <= self.r0:
            raise GridError(f"need r_max > r0 >= 0, got r0={self.r0}, r_max={self.r_max}")
        if int(self.n) != self.n or self.n < MIN_NODES:
            raise GridError(f"need n >= {MIN_NODES} nodes, got {self.n}")

    @property
    def h(self) -> float:
        return (self.r_max - self.r0) / (self.n - 1)

    @property
    def r(self) -> np.ndarray:
        return self.r0 + self.h * np.arange(self.n)

    @property
    def euclidean(self) -> bool:
        return self.r0 == 0.0

    def weights(self) -> np.ndarray:
        """Composite trapezoid weights."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def inv_r(self) -> np.ndarray:
        """1/r with the origin node mapped to 0 (every 1/r integrand vanishes there)."""
        r = self.r
        out = np.zeros(self.n)
        np.divide(1.0, r, out=out, where=r > 0)
        return out


def make_grid(r0: float, r_max: float, n: int) -> RadialGrid:
    return RadialGrid(float(r0), float(r_max), int(n))


def grid_with_spacing(r0: float, r_max: float, h: float) -> RadialGrid:
    """Grid whose node count is chosen so that the spacing is (close to) h."""
    n = int(round((r_max - r0) / h)) + 1
    return make_grid(r0, r0 + (n - 1) * h, n)


@dataclass(frozen=True)
class RadialField:
    """Samples v[j] ~ r_j u(r_j).

    ``dv`` optionally carries exact samples of v' (e.g. from an ODE
    integration); when present, the norms use it instead of finite
    differences.
    """

    grid: RadialGrid
    v: np.ndarray
    dv: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        v = np.array(self.v, dtype=complex)
        if v.shape != (self.grid.n,):
            raise ValueError(f"field has shape {v.shape}, grid has {self.grid.n} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v[0] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "v", v)
        if self.dv is not None:
            dv = np.array(self.dv, dtype=complex)
            dv.setflags(write=False)
            object.__setattr__(self, "dv", dv)

    @classmethod
    def from_u(cls, grid: RadialGrid, u) -> "RadialField":
        """Build from samples (or a callable) of u(r)."""
        r = grid.r
        values = u(r) if callable(u) else np.asarray(u)
        return cls(grid, r * values)

    def u(self) -> np.ndarray:
        """u = v/r; at the origin the limit v'(0) is used."""
        out = self.v * self.grid.inv_r()
        if self.grid.euclidean:
            out[0] = _derivative(self)[0]
        return out

    def scaled(self, c: complex) -> "RadialField":
        dv = None if self.dv is None else c * self.dv
        return RadialField(self.grid, c * self.v, dv)

    def with_values(self, v: np.ndarray) -> "RadialField":
        return RadialField(self.grid, v)

    def conj(self) -> "RadialField":
        dv = None if self.dv is None else np.conj(self.dv)
        return RadialField(self.grid, np.conj(self.v), dv)


@dataclass(frozen=True)
class NormSet:
    mass: float
    kinetic: float
    l4_fourth: float
    energy: float
    sup_abs: float


def _trapz(grid: RadialGrid, values: np.ndarray) -> float:
    return float(np.dot(grid.weights(), values))


def radial_derivative(f: RadialField) -> np.ndarray:
    """dv/dr: centered differences inside, second-order one-sided at the ends."""
    return np.gradient(f.v, f.grid.h, edge_order=2)


def _derivative(f: RadialField) -> np.ndarray:
    return f.dv if f.dv is not None else radial_derivative(f)


def kinetic_density(f: RadialField, dv: np.ndarray | None = None) -> np.ndarray:
    """|v_r - v/r|^2, i.e. r^2 |grad u|^2, with 0 at the origin."""
    if dv is None:
        dv = _derivative(f)
    g = dv - f.v * f.grid.inv_r()
    dens = np.abs(g) ** 2
    if f.grid.euclidean:
        dens[0] = 0.0
    return dens


def lp_power(f: RadialField, p: float) -> float:
    """||u||_p^p = 4 pi int |v|^p r^(2-p) dr."""
    r = f.grid.r
    a = np.abs(f.v)
    dens = np.zeros(f.grid.n)
    pos = r > 0
    dens[pos] = a[pos] ** p * r[pos] ** (2.0 - p)
    return FOUR_PI * _trapz(f.grid, dens)


def sup_abs(f: RadialField) -> float:
    return float(np.max(np.abs(f.u())))


def norms(f: RadialField) -> NormSet:
    g = f.grid
    mass = FOUR_PI * _trapz(g, np.abs(f.v) ** 2)
    kinetic = FOUR_PI * _trapz(g, kinetic_density(f))
    l4 = lp_power(f, 4.0)
    return NormSet(
        mass=mass,
        kinetic=kinetic,
        l4_fourth=l4,
        energy=0.5 * kinetic - 0.25 * l4,
        sup_abs=sup_abs(f),
    )


def momentum_density(f: RadialField, dv: np.ndarray | None = None) -> np.ndarray:
    """Im(conj(v) v_r) = r^2 Im(conj(u) u_r)."""
    if dv is None:
        dv = _derivative(f)
    return np.imag(np.conj(f.v) * dv)


def integrate(grid: RadialGrid, values: np.ndarray) -> float:
    """Trapezoid integral over the grid."""
    return _trapz(grid, values)


def resample(f: RadialField, grid: RadialGrid) -> RadialField:
    """Cubic-spline transfer of v onto another grid (zero outside the source span)."""
    from scipy.interpolate import CubicSpline

    src = f.grid.r
    re = CubicSpline(src, f.v.real)
    im = CubicSpline(src, f.v.imag)
    r = grid.r
    inside = (r >= src[0]) & (r <= src[-1])
    v = np.zeros(grid.n, dtype=complex)
    v[inside] = re(r[inside]) + 1j * im(r[inside])
    return RadialField(grid, v)
