"""Time stepping of the radial cubic NLS  i v_t + v_rr + |v|^2 v / r^2 = 0.

The scheme is the implicit midpoint rule with the conservative midpoint
nonlinearity

    N = (|v+|^2 + |v|^2)/2 * (v+ + v)/(2 r^2),

which keeps the discrete mass and the discrete energy exactly invariant.
Each step solves for the increment d = v+ - v,

    (I - i dt/2 L) d = i dt (L v + N(v + d, v)),

by fixed-point iteration on a once-factored tridiagonal matrix.  Working with
the increment rather than with v+ itself keeps the round-off of every step
proportional to the change of the state, which matters for long runs near
the (linearly unstable) ground state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .config import ConfigError, InitialData, RunConfig
from .cutoffs import CutoffFamily, cached_cutoffs
from .ground_state import cached_ground_state, discrete_ground_state
from .morawetz import diagnostic_row
from .radial import FOUR_PI, RadialField, RadialGrid, integrate, kinetic_density
from .series import TimeSeries

CHECKPOINT_FORMAT = "nlslab-checkpoint/1"
BLOWUP_FACTOR = 1e3


class StepError(RuntimeError):
    """Fixed-point iteration failed; carries the index of the step being taken."""

    def __init__(self, step_index: int, residual: float):
        super().__init__(f"fixed-point iteration did not converge at step {step_index} "
                         f"(last update {residual:.3e}); blowup or dt too large")
        self.step_index = step_index
        self.residual = residual


class StabilityGuardError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class SimState:
    t: float
    field: RadialField
    step_index: int


@dataclass(frozen=True)
class SpongeProfile:
    """Absorbing ramp sigma(r) = strength * ((r - r_s)/width)^2 on the outer layer."""

    width: float  # physical length of the layer
    strength: float
    profile: np.ndarray

    @classmethod
    def build(cls, grid: RadialGrid, fraction: float = 0.15, strength: float = 10.0) -> "SpongeProfile":
        if not 0.0 <= fraction < 1.0:
            raise ValueError("sponge fraction must lie in [0, 1)")
        if strength < 0:
            raise ValueError("sponge strength must be nonnegative")
        width = fraction * (grid.r_max - grid.r0)
        sigma = np.zeros(grid.n)
        if width > 0 and strength > 0:
            x = (grid.r - (grid.r_max - width)) / width
            sigma = strength * np.clip(x, 0.0, None) ** 2
        sigma.setflags(write=False)
        return cls(width, strength, sigma)

    @classmethod
    def off(cls, grid: RadialGrid) -> "SpongeProfile":
        return cls.build(grid, 0.0, 0.0)

    @property
    def active(self) -> bool:
        return bool(np.any(self.profile > 0))

    def start(self, grid: RadialGrid) -> float:
        return grid.r_max - self.width


class Stepper:
    """Implicit midpoint stepper for a fixed grid and time step.

    Parameters
    ----------
    grid : RadialGrid
    dt : float
    nonlinear : bool
        False drops the cubic term (free Schrodinger flow).
    sponge : SpongeProfile, optional
    tol : float
        Relative fixed-point tolerance; iteration continues past it while
        the updates keep shrinking, down to round-off.
    max_iter : int
    stability_factor : float
        Guard dt <= stability_factor * h^2.
    """

    def __init__(self, grid: RadialGrid, dt: float, nonlinear: bool = True,
                 sponge: SpongeProfile | None = None, tol: float = 1e-12,
                 max_iter: int = 50, stability_factor: float = 100.0):
        if not dt > 0:
            raise ValueError("dt must be positive")
        if dt > stability_factor * grid.h ** 2:
            raise StabilityGuardError(
                f"dt = {dt:g} exceeds the guard {stability_factor:g} h^2 = {stability_factor * grid.h ** 2:g}")
        self.grid = grid
        self.dt = float(dt)
        self.nonlinear = nonlinear
        self.sponge = sponge if sponge is not None else SpongeProfile.off(grid)
        self.tol = tol
        self.max_iter = max_iter
        m = grid.n - 2
        self._h2 = grid.h ** 2
        self._inv_r2 = 1.0 / grid.r[1:-1] ** 2
        lap = sp.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / self._h2
        self._lu = splu((sp.identity(m, dtype=complex) - 0.5j * self.dt * lap).tocsc())
        self._damp = np.exp(-self.sponge.profile[1:-1] * self.dt) if self.sponge.active else None

    def _lap(self, v: np.ndarray) -> np.ndarray:
        # difference of neighbour differences: exact zero on constant-free data
        d = np.diff(np.concatenate(([0.0], v, [0.0])))
        return np.diff(d) / self._h2

    def advance(self, v: np.ndarray, step_index: int = 0) -> np.ndarray:
        """One step on the interior values; returns the new interior values."""
        rhs_lin = 1j * self.dt * self._lap(v)
        if not self.nonlinear:
            vn = v + self._lu.solve(rhs_lin)
        else:
            abs_v2 = np.abs(v) ** 2
            scale = max(float(np.max(np.abs(v))), np.finfo(float).tiny)
            d = np.zeros_like(v)
            prev = math.inf
            err = math.inf
            for _ in range(self.max_iter):
                w = v + d
                # a collapsing state can overflow; that surfaces as StepError below
                with np.errstate(over="ignore", invalid="ignore"):
                    nl = 0.25 * (np.abs(w) ** 2 + abs_v2) * (w + v) * self._inv_r2
                    d_new = self._lu.solve(rhs_lin + 1j * self.dt * nl)
                    err = float(np.max(np.abs(d_new - d))) / scale
                d = d_new
                if not math.isfinite(err):
                    raise StepError(step_index, err)
                # below tolerance: stop once the updates stop shrinking
                if err <= 4e-16 or (err <= self.tol and err > 0.5 * prev):
                    break
                prev = err
            else:
                if err > self.tol:
                    raise StepError(step_index, err)
            vn = v + d
        if self._damp is not None:
            vn = vn * self._damp
        return vn

    def step(self, s: SimState) -> SimState:
        v = np.asarray(s.field.v)[1:-1]
        vn = self.advance(v, s.step_index + 1)
        full = np.concatenate(([0.0], vn, [0.0]))
        k = s.step_index + 1
        return SimState(k * self.dt, RadialField(self.grid, full), k)


def step(s: SimState, dt: float, nonlinear: bool = True, sponge: SpongeProfile | None = None,
         stability_factor: float = 100.0) -> SimState:
    """Single step with a throwaway stepper (builds and factors the matrix)."""
    return Stepper(s.field.grid, dt, nonlinear, sponge, stability_factor=stability_factor).step(s)


# initial data

def initial_field(data: InitialData, grid: RadialGrid) -> RadialField:
    p = dict(data.params)
    r = grid.r
    if data.kind == "gaussian":
        u = p["amplitude"] * np.exp(-(((r - p["center"]) / p["width"]) ** 2))
        return RadialField(grid, r * u)
    if data.kind == "ring":
        x = (r - p["center"]) / p["width"]
        u = np.where(np.abs(x) < 1.0, p["amplitude"] * (1.0 - x * x) ** 4, 0.0)
        return RadialField(grid, r * u)
    if data.kind == "ground_state":
        gs = cached_ground_state()
        if grid.euclidean:
            # the grid's own stationary state, so that e^{it} Q is followed
            # without an O(h^2) kick into the unstable mode
            f = discrete_ground_state(gs, grid)
        else:
            f = gs.on_grid(grid)
        return f.scaled(p["scale"])
    raise ConfigError(f"unknown initial data kind {data.kind!r}")


def initial_state(cfg: RunConfig) -> SimState:
    return SimState(0.0, initial_field(cfg.initial_data, cfg.grid()), 0)


def discrete_energy(f: RadialField) -> float:
    """Energy the scheme conserves exactly:
    2 pi [sum |v_{j+1} - v_j|^2 / h - (h/2) sum |v_j|^4 / r_j^2]."""
    g = f.grid
    h = g.h
    v = f.v
    grad = float(np.sum(np.abs(np.diff(v)) ** 2)) / h
    quart = h * float(np.sum(np.abs(v[1:-1]) ** 4 / g.r[1:-1] ** 2))
    return 2.0 * math.pi * (grad - 0.5 * quart)


# blowup detection

@dataclass(frozen=True)
class BlowupBaseline:
    linf: float
    grad: float

    @classmethod
    def of(cls, f: RadialField) -> "BlowupBaseline":
        return cls(_linf(f), _grad_norm(f))


def _linf(f: RadialField) -> float:
    return float(np.max(np.abs(f.u())))


def _grad_norm(f: RadialField) -> float:
    return math.sqrt(FOUR_PI * integrate(f.grid, kinetic_density(f)))


def detect_blowup(s: SimState, baseline: BlowupBaseline) -> bool:
    """True iff sup|u| or the gradient norm exceeds 1e3 times its initial value."""
    f = s.field
    if baseline.linf > 0 and _linf(f) > BLOWUP_FACTOR * baseline.linf:
        return True
    if baseline.grad > 0 and _grad_norm(f) > BLOWUP_FACTOR * baseline.grad:
        return True
    return False


# checkpoints

def save_checkpoint(path: str | Path, s: SimState, dt: float, baseline: BlowupBaseline) -> Path:
    """JSON header plus the little-endian complex128 v-array in base 16."""
    g = s.field.grid
    payload = np.ascontiguousarray(s.field.v, dtype="<c16").tobytes().hex()
    doc = {
        "format": CHECKPOINT_FORMAT,
        "t": s.t,
        "step": s.step_index,
        "dt": dt,
        "grid": {"r0": g.r0, "r_max": g.r_max, "n": g.n},
        "baseline": {"linf": baseline.linf, "grad": baseline.grad},
        "v": payload,
    }
    path = Path(path)
    path.write_text(json.dumps(doc) + "\n")
    return path


def load_checkpoint(path: str | Path) -> tuple[SimState, float, BlowupBaseline]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: unsupported checkpoint format {doc.get('format')!r}")
    try:
        g = doc["grid"]
        grid = RadialGrid(float(g["r0"]), float(g["r_max"]), int(g["n"]))
        v = np.frombuffer(bytes.fromhex(doc["v"]), dtype="<c16")
        state = SimState(float(doc["t"]), RadialField(grid, v), int(doc["step"]))
        base = BlowupBaseline(float(doc["baseline"]["linf"]), float(doc["baseline"]["grad"]))
        return state, float(doc["dt"]), base
    except (KeyError, ValueError, TypeError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from None


# driver

def make_stepper(cfg: RunConfig, grid: RadialGrid | None = None) -> Stepper:
    grid = grid if grid is not None else cfg.grid()
    sponge = SpongeProfile.build(grid, cfg.sponge_width, cfg.sponge_strength)
    try:
        return Stepper(grid, cfg.dt, cfg.mode == "nonlinear", sponge, cfg.solver_tol,
                       cfg.solver_max_iter, cfg.stability_factor)
    except StabilityGuardError as exc:
        raise ConfigError(str(exc), key="time.dt") from None


def cutoffs_for(cfg: RunConfig) -> CutoffFamily:
    return cached_cutoffs(cfg.cutoff_R0, cfg.cutoff_eta, cfg.cutoff_n_tab)


@dataclass
class Resume:
    state: SimState
    baseline: BlowupBaseline


def evolve(cfg: RunConfig, resume: Resume | None = None,
           checkpoint_path: str | Path | None = None,
           observer: Callable[[SimState], None] | None = None,
           with_interaction: bool = True) -> TimeSeries:
    """Run to t_end (or until blowup), sampling a diagnostic row every
    ``sample_every`` steps and at the final step.

    Parameters
    ----------
    resume : Resume, optional
        Continue from a checkpointed state instead of the initial data.
    checkpoint_path : path, optional
        Written every ``output.checkpoint_every`` steps (if nonzero) and at
        the end of the run, always holding the last valid state.
    observer : callable, optional
        Called with every state, including the initial one.
    """
    grid = cfg.grid()
    cf = cutoffs_for(cfg)
    stepper = make_stepper(cfg, grid)
    if resume is None:
        state = initial_state(cfg)
        baseline = BlowupBaseline.of(state.field)
    else:
        state, baseline = resume.state, resume.baseline
        if state.field.grid != grid:
            raise CheckpointError("checkpoint grid does not match the configuration")
    n_steps = cfg.n_steps
    if state.step_index > n_steps:
        raise CheckpointError("checkpoint lies beyond t_end")

    series = TimeSeries(euclidean=grid.euclidean, r0=grid.r0)
    series.states = [] if cfg.keep_states else None

    def sample(s: SimState):
        series.rows.append(diagnostic_row(s, cf, with_interaction))
        if series.states is not None:
            series.states.append(s)

    def checkpoint(s: SimState):
        if checkpoint_path is not None:
            save_checkpoint(checkpoint_path, s, cfg.dt, baseline)

    if observer:
        observer(state)
    if state.step_index % cfg.sample_every == 0 or state.step_index == n_steps:
        sample(state)
    while state.step_index < n_steps:
        try:
            nxt = stepper.step(state)
        except StepError as exc:
            series.termination = "blowup"
            series.message = str(exc)
            if series.rows and series.rows[-1].t != state.t:
                sample(state)
            break
        state = nxt
        if observer:
            observer(state)
        k = state.step_index
        if detect_blowup(state, baseline):
            series.termination = "blowup"
            series.message = f"growth beyond {BLOWUP_FACTOR:g} x initial size at t = {state.t:g}"
            sample(state)
            break
        if k % cfg.sample_every == 0 or k == n_steps:
            sample(state)
        if cfg.checkpoint_every and k % cfg.checkpoint_every == 0:
            checkpoint(state)
    series.final_state = state
    checkpoint(state)
    return series


def conservation_report(series: TimeSeries) -> tuple[float, float]:
    """Largest relative deviation of mass and energy from their initial values
    (absolute deviation when the initial value is zero)."""
    if not series.rows:
        raise ValueError("empty series")
    m0 = series.rows[0].norms.mass
    e0 = series.rows[0].norms.energy

    def drift(vals, ref):
        dev = max(abs(x - ref) for x in vals)
        return dev / abs(ref) if ref != 0 else dev

    return (drift([r.norms.mass for r in series.rows], m0),
            drift([r.norms.energy for r in series.rows], e0))


# dispersive decay

class ContaminationError(ValueError):
    pass


@dataclass
class DecayFit:
    slope: float
    intercept: float
    times: np.ndarray = field(repr=False)
    linf: np.ndarray = field(repr=False)


def decay_fit(cfg: RunConfig) -> DecayFit:
    """Linear run; least-squares slope of log sup|u| against log t on [t_a, t_b].

    Raises :class:`ContaminationError` if, before t_b, the largest |u| on the
    sponge layer exceeds ``fit.contamination`` times the largest |u| on the
    rest of the domain (the sponge could then shape the measured maximum).
    """
    if cfg.mode != "linear":
        raise ConfigError("decay fit needs mode = linear", key="mode")
    grid = cfg.grid()
    stepper = make_stepper(cfg, grid)
    state = initial_state(cfg)
    if not np.any(state.field.v):
        raise ValueError("decay fit needs nonzero initial data")
    outer = grid.r >= stepper.sponge.start(grid)
    n_b = int(math.ceil(cfg.fit_t_b / cfg.dt - 1e-9))
    ts, ys = [], []
    while state.step_index < n_b:
        state = stepper.step(state)
        u = np.abs(state.field.u())
        inner_max = float(np.max(u[~outer]))
        if np.any(outer) and float(np.max(u[outer])) > cfg.fit_contamination * inner_max:
            raise ContaminationError(
                f"sponge reached at t = {state.t:g} (before t_b = {cfg.fit_t_b:g}); "
                "enlarge grid.r_max or shorten the window")
        if state.t >= cfg.fit_t_a - 1e-12 and state.step_index % cfg.sample_every == 0:
            ts.append(state.t)
            ys.append(inner_max)
    if len(ts) < 2:
        raise ValueError("fewer than two samples in the fit window; lower time.sample_every")
    slope, intercept = np.polyfit(np.log(ts), np.log(ys), 1)
    return DecayFit(float(slope), float(intercept), np.array(ts), np.array(ys))


def linear_decay_fit(cfg: RunConfig) -> float:
    return decay_fit(cfg).slope

