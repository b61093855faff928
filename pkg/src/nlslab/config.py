"""Run configuration: a flat ``key = value`` text format with dotted keys.

Example::

    mode = nonlinear
    grid.r0 = 1.0
    grid.r_max = 80.0
    grid.h = 0.02
    time.dt = 0.005
    time.t_end = 20.0
    initial_data = gaussian{amplitude = 1.2, width = 1.0, center = 3.0}

Lines starting with ``#`` are comments.  Unknown keys, bad values and
duplicate keys are reported with the line number and the key.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .radial import RadialGrid, grid_with_spacing

MODES = ("nonlinear", "linear")

INITIAL_KINDS = {
    "gaussian": {"amplitude": 1.0, "width": 1.0, "center": 0.0},
    "ground_state": {"scale": 1.0},
    "ring": {"amplitude": 1.0, "center": 3.0, "width": 1.0},
}


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.key = key
        self.line = line


@dataclass(frozen=True)
class InitialData:
    kind: str
    params: tuple[tuple[str, float], ...]

    def get(self, name: str) -> float:
        return dict(self.params)[name]

    def with_param(self, name: str, value: float) -> "InitialData":
        p = dict(self.params)
        if name not in p:
            raise ConfigError(f"initial data '{self.kind}' has no parameter '{name}'", key=name)
        p[name] = float(value)
        return InitialData(self.kind, tuple(sorted(p.items())))

    def describe(self) -> str:
        inner = ", ".join(f"{k} = {v!r}" for k, v in self.params)
        return f"{self.kind}{{{inner}}}"


def parse_initial(text: str) -> InitialData:
    m = re.fullmatch(r"\s*([a-z_]+)\s*\{(.*)\}\s*", text)
    if not m:
        raise ConfigError(f"initial data must look like kind{{name = value, ...}}, got {text!r}")
    kind, body = m.group(1), m.group(2)
    if kind not in INITIAL_KINDS:
        raise ConfigError(f"unknown initial data kind {kind!r} (known: {', '.join(INITIAL_KINDS)})")
    params = dict(INITIAL_KINDS[kind])
    for item in filter(None, (s.strip() for s in body.split(","))):
        if "=" not in item:
            raise ConfigError(f"initial data parameter {item!r} lacks '='")
        name, value = (s.strip() for s in item.split("=", 1))
        if name not in params:
            raise ConfigError(f"{kind} has no parameter {name!r}", key=name)
        params[name] = _float(value, name)
    return InitialData(kind, tuple(sorted(params.items())))


@dataclass(frozen=True)
class RunConfig:
    mode: str = "nonlinear"
    grid_r0: float = 0.0
    grid_r_max: float = 40.0
    grid_h: float = 0.0125
    dt: float = 0.005
    t_end: float = 5.0
    sample_every: int = 50
    stability_factor: float = 100.0
    sponge_width: float = 0.15
    sponge_strength: float = 10.0
    initial_data: InitialData = field(default_factory=lambda: parse_initial("ground_state{scale = 1.0}"))
    cutoff_R0: float = 2.0
    cutoff_J: float = 2.0
    cutoff_nR: int = 8
    cutoff_eta: float = 0.1
    cutoff_n_tab: int = 4096
    detector_eps: float = 0.2
    detector_window_len: float = 5.0
    detector_T0: tuple[float, ...] = (10.0, 20.0, 40.0, 80.0)
    detector_delta_prime: float = 0.1
    fit_t_a: float = 1.0
    fit_t_b: float = 8.0
    fit_contamination: float = 0.1
    solver_tol: float = 1e-12
    solver_max_iter: int = 50
    checkpoint_every: int = 0
    keep_states: bool = False

    def __post_init__(self):
        validate(self)

    def grid(self) -> RadialGrid:
        return grid_with_spacing(self.grid_r0, self.grid_r_max, self.grid_h)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def with_value(self, key: str, value) -> "RunConfig":
        """Copy with one dotted key changed; ``initial_data.<name>`` edits a descriptor parameter."""
        if key.startswith("initial_data."):
            name = key.split(".", 1)[1]
            return replace(self, initial_data=self.initial_data.with_param(name, _float(str(value), key)))
        if key not in KEYS:
            raise ConfigError(f"unknown parameter path {key!r}", key=key)
        attr, conv = KEYS[key]
        return replace(self, **{attr: conv(str(value), key)})

    def to_text(self) -> str:
        lines = []
        for key, (attr, _) in KEYS.items():
            val = getattr(self, attr)
            if isinstance(val, InitialData):
                text = val.describe()
            elif isinstance(val, tuple):
                text = ", ".join(repr(x) for x in val)
            elif isinstance(val, bool):
                text = "true" if val else "false"
            else:
                text = repr(val) if isinstance(val, float) else str(val)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"


def _float(text: str, key: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}", key=key) from None
    if not math.isfinite(x):
        raise ConfigError(f"{key}: value must be finite", key=key)
    return x


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}", key=key) from None


def _bool(text: str, key: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected true or false, got {text!r}", key=key)


def _mode(text: str, key: str) -> str:
    if text not in MODES:
        raise ConfigError(f"{key}: expected one of {MODES}, got {text!r}", key=key)
    return text


def _floats(text: str, key: str) -> tuple[float, ...]:
    return tuple(_float(t.strip(), key) for t in text.split(",") if t.strip())


def _initial(text: str, key: str) -> InitialData:
    try:
        return parse_initial(text)
    except ConfigError as exc:
        raise ConfigError(f"{key}: {exc}", key=key) from None


KEYS = {
    "mode": ("mode", _mode),
    "grid.r0": ("grid_r0", _float),
    "grid.r_max": ("grid_r_max", _float),
    "grid.h": ("grid_h", _float),
    "time.dt": ("dt", _float),
    "time.t_end": ("t_end", _float),
    "time.sample_every": ("sample_every", _int),
    "time.stability_factor": ("stability_factor", _float),
    "sponge.width": ("sponge_width", _float),
    "sponge.strength": ("sponge_strength", _float),
    "initial_data": ("initial_data", _initial),
    "cutoffs.R0": ("cutoff_R0", _float),
    "cutoffs.J": ("cutoff_J", _float),
    "cutoffs.nR": ("cutoff_nR", _int),
    "cutoffs.eta": ("cutoff_eta", _float),
    "cutoffs.n_tab": ("cutoff_n_tab", _int),
    "detector.eps": ("detector_eps", _float),
    "detector.window_len": ("detector_window_len", _float),
    "detector.T0": ("detector_T0", _floats),
    "detector.delta_prime": ("detector_delta_prime", _float),
    "fit.t_a": ("fit_t_a", _float),
    "fit.t_b": ("fit_t_b", _float),
    "fit.contamination": ("fit_contamination", _float),
    "solver.tol": ("solver_tol", _float),
    "solver.max_iter": ("solver_max_iter", _int),
    "output.checkpoint_every": ("checkpoint_every", _int),
    "output.keep_states": ("keep_states", _bool),
}


def validate(cfg: RunConfig) -> None:
    def need(cond: bool, key: str, msg: str):
        if not cond:
            raise ConfigError(f"{key}: {msg}", key=key)

    need(cfg.dt > 0, "time.dt", "must be positive")
    need(cfg.t_end >= 0, "time.t_end", "must be nonnegative")
    need(cfg.sample_every >= 1, "time.sample_every", "must be at least 1")
    need(cfg.stability_factor > 0, "time.stability_factor", "must be positive")
    need(cfg.grid_r0 >= 0, "grid.r0", "must be nonnegative")
    need(cfg.grid_r_max > cfg.grid_r0, "grid.r_max", "must exceed grid.r0")
    need(cfg.grid_h > 0, "grid.h", "must be positive")
    need((cfg.grid_r_max - cfg.grid_r0) / cfg.grid_h >= 15, "grid.h", "leaves fewer than 16 nodes")
    need(0.0 <= cfg.sponge_width < 1.0, "sponge.width", "must lie in [0, 1)")
    need(cfg.sponge_strength >= 0, "sponge.strength", "must be nonnegative")
    need(cfg.cutoff_R0 > 0, "cutoffs.R0", "must be positive")
    need(cfg.cutoff_J >= 0, "cutoffs.J", "must be nonnegative")
    need(cfg.cutoff_nR >= 1, "cutoffs.nR", "must be at least 1")
    need(0.0 < cfg.cutoff_eta < 0.5, "cutoffs.eta", "must lie in (0, 1/2)")
    need(cfg.cutoff_n_tab >= 256, "cutoffs.n_tab", "must be at least 256")
    need(cfg.detector_eps > 0, "detector.eps", "must be positive")
    need(cfg.detector_window_len > 0, "detector.window_len", "must be positive")
    need(all(t > 0 for t in cfg.detector_T0), "detector.T0", "entries must be positive")
    need(0.0 < cfg.detector_delta_prime < 1.0, "detector.delta_prime", "must lie in (0, 1)")
    need(0.0 < cfg.fit_t_a < cfg.fit_t_b, "fit.t_b", "need 0 < fit.t_a < fit.t_b")
    need(cfg.fit_contamination > 0, "fit.contamination", "must be positive")
    need(cfg.solver_tol > 0, "solver.tol", "must be positive")
    need(cfg.solver_max_iter >= 1, "solver.max_iter", "must be at least 1")
    need(cfg.checkpoint_every >= 0, "output.checkpoint_every", "must be nonnegative")


def parse_config(text: str) -> RunConfig:
    values: dict[str, object] = {}
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", key=key, line=lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[key]})", key=key, line=lineno)
        seen[key] = lineno
        attr, conv = KEYS[key]
        try:
            values[attr] = conv(value, key)
        except ConfigError as exc:
            raise ConfigError(str(exc), key=key, line=lineno) from None
    try:
        return RunConfig(**values)
    except ConfigError as exc:
        line = seen.get(exc.key) if exc.key else None
        raise ConfigError(str(exc), key=exc.key, line=line) from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
