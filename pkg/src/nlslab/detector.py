"""Threshold classification, coercivity tracking, space-time norms and verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cutoffs import CutoffFamily, chi_ball
from .ground_state import ThresholdConstants
from .radial import RadialField, norms
from .series import TimeSeries

MARGIN = 1e-6
WINDOW_SLACK = 1e-9

BELOW = "Below"
ABOVE = "Above"
NEAR = "NearThreshold"

SCATTERING = "ScatteringConsistent"
BLOWUP = "Blowup"
INCONCLUSIVE = "Inconclusive"


class HypothesisError(ValueError):
    pass


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class Classification:
    """Threshold class with the relative margins 1 - E M / (E M)_Q and
    1 - |grad u| |u| / (|grad Q| |Q|) (positive means below)."""

    kind: str
    energy_margin: float
    kinetic_margin: float


def classify_initial(f: RadialField, tc: ThresholdConstants) -> Classification:
    ns = norms(f)
    if ns.mass == 0.0:
        raise ValueError("cannot classify the zero field")
    em = 1.0 - ns.energy * ns.mass / tc.em_threshold
    km = 1.0 - math.sqrt(ns.mass * ns.kinetic) / tc.k_threshold
    if em > MARGIN and km > MARGIN:
        kind = BELOW
    elif km < -MARGIN:
        kind = ABOVE
    else:
        kind = NEAR
    return Classification(kind, em, km)


@dataclass(frozen=True)
class KineticMassTrack:
    max_product: float
    ratio: float  # max_product / k_threshold
    delta_prime: float  # empirical 1 - ratio


def kinetic_mass_track(series: TimeSeries, tc: ThresholdConstants) -> KineticMassTrack:
    if not series.rows:
        raise ValueError("empty series")
    best = max(math.sqrt(r.norms.mass * r.norms.kinetic) for r in series.rows)
    ratio = best / tc.k_threshold
    return KineticMassTrack(best, ratio, 1.0 - ratio)


def coercivity_check(f: RadialField, tc: ThresholdConstants) -> float:
    """(|grad f|^2 - 3/4 |f|_4^4) / (|grad f|^2 + |f|_4^4) for fields obeying
    the (1 - delta') bound on |grad f| |f|."""
    ns = norms(f)
    product = math.sqrt(ns.mass * ns.kinetic)
    if product > (1.0 - tc.delta_prime) * tc.k_threshold:
        raise HypothesisError(
            f"hypothesis violated: |grad f| |f| = {product:.6g} exceeds "
            f"(1 - {tc.delta_prime:g}) x {tc.k_threshold:.6g}")
    denom = ns.kinetic + ns.l4_fourth
    if denom == 0.0:
        raise ValueError("coercivity ratio undefined for the zero field")
    return (ns.kinetic - 0.75 * ns.l4_fourth) / denom


def localized_coercivity(f: RadialField, cf: CutoffFamily, tc: ThresholdConstants) -> tuple[bool, float]:
    """Whether |grad g|^2 - 3/4 |g|_4^4 >= delta' |grad g|^2 for g = chi_R f, and
    the ratio of the left side to |grad g|^2 (1 when g vanishes)."""
    ns = norms(chi_ball(cf, f))
    if ns.kinetic == 0.0:
        return True, 1.0
    ratio = (ns.kinetic - 0.75 * ns.l4_fourth) / ns.kinetic
    return ratio >= tc.delta_prime, ratio


def smallest_coercive_radius(states, cf: CutoffFamily, tc: ThresholdConstants, radii) -> float | None:
    """Smallest R in ``radii`` for which localized coercivity holds at every state."""
    for R in sorted(radii):
        scaled = cf.with_scale(R)
        if all(localized_coercivity(getattr(s, "field", s), scaled, tc)[0] for s in states):
            return float(R)
    return None


# space-time norms

def _time_integral(t: np.ndarray, y: np.ndarray, t1: float, t2: float) -> float:
    inner = (t > t1) & (t < t2)
    tt = np.concatenate(([t1], t[inner], [t2]))
    yy = np.interp(tt, t, y)
    return float(np.sum(0.5 * (yy[1:] + yy[:-1]) * np.diff(tt)))


def windowed_norm(series: TimeSeries, p: int, window: tuple[float, float]) -> float:
    """(int_{t1}^{t2} |u(t)|_p^p dt)^(1/p), trapezoid over the sampled rows."""
    t1, t2 = window
    if not t2 >= t1:
        raise WindowError(f"empty window ({t1}, {t2})")
    t = np.asarray(series.times, dtype=float)
    if t.size == 0 or t1 < t[0] - WINDOW_SLACK or t2 > t[-1] + WINDOW_SLACK:
        span = "no samples" if t.size == 0 else f"[{t[0]:g}, {t[-1]:g}]"
        raise WindowError(f"window [{t1:g}, {t2:g}] is not covered by the samples {span}")
    y = np.array([row.lp_power(p) for row in series.rows])
    t1, t2 = max(t1, t[0]), min(t2, t[-1])
    if t2 == t1:
        return 0.0
    return _time_integral(t, y, t1, t2) ** (1.0 / p)


def interpolation_l5(series: TimeSeries, window: tuple[float, float]) -> tuple[float, float]:
    """Both sides of |u|_{L5} <= |u|_{L3}^{3/7} |u|_{L10}^{4/7} on the window."""
    lhs = windowed_norm(series, 5, window)
    rhs = windowed_norm(series, 3, window) ** (3.0 / 7.0) * windowed_norm(series, 10, window) ** (4.0 / 7.0)
    return lhs, rhs


# virial

def virial(series: TimeSeries, exclude_last: int = 0) -> tuple[np.ndarray, float]:
    """V(t) samples and the worst relative mismatch between the second
    difference of V and 8 |grad u|^2 - 6 |u|_4^4 at interior samples,
    ignoring the final ``exclude_last`` samples."""
    if not series.euclidean:
        raise ValueError("virial identity needs a free-space run (the obstacle adds boundary terms)")
    v = np.array([row.virial for row in series.rows])
    t = np.asarray(series.times, dtype=float)
    last = len(v) - 1 - exclude_last
    worst = 0.0
    for i in range(1, last):
        h1, h2 = t[i] - t[i - 1], t[i + 1] - t[i]
        d2 = 2.0 * (h1 * v[i + 1] - (h1 + h2) * v[i] + h2 * v[i - 1]) / (h1 * h2 * (h1 + h2))
        row = series.rows[i].norms
        target = 8.0 * row.kinetic - 6.0 * row.l4_fourth
        scale = 8.0 * row.kinetic + 6.0 * row.l4_fourth
        if scale > 0:
            worst = max(worst, abs(d2 - target) / scale)
    return v, worst


def virial_curvature(series: TimeSeries) -> np.ndarray:
    """Second differences of V at interior samples."""
    v = np.array([row.virial for row in series.rows])
    t = np.asarray(series.times, dtype=float)
    if v.size < 3:
        return np.zeros(0)
    h1, h2 = np.diff(t)[:-1], np.diff(t)[1:]
    return 2.0 * (h1 * v[2:] - (h1 + h2) * v[1:-1] + h2 * v[:-2]) / (h1 * h2 * (h1 + h2))


# verdict

@dataclass(frozen=True)
class Verdict:
    kind: str
    evidence: dict = field(default_factory=dict)
    window: tuple[float, float, float] | None = None

    def as_dict(self) -> dict:
        return {"kind": self.kind, "evidence": dict(self.evidence),
                "window": None if self.window is None else list(self.window)}


def scattering_verdict(series: TimeSeries, eps: float, window_len: float) -> Verdict:
    """Search windows of length ``window_len`` (starting at sample times, the
    earliest qualifying one wins) for a windowed L5 norm at most ``eps``."""
    if not eps > 0 or not window_len > 0:
        raise ValueError("eps and window_len must be positive")
    if not series.rows:
        raise ValueError("empty series")
    evidence: dict[str, float | None] = {"final_l4": series.rows[-1].norms.l4_fourth}
    curv = virial_curvature(series) if series.euclidean else np.zeros(0)
    if curv.size:
        evidence["virial_max_curvature"] = float(np.max(curv))
    if series.blew_up:
        evidence["blowup_time"] = series.rows[-1].t
        return Verdict(BLOWUP, evidence)

    t = np.asarray(series.times, dtype=float)
    best = math.inf
    for a in t:
        b = a + window_len
        if b > t[-1] + WINDOW_SLACK:
            break
        val = windowed_norm(series, 5, (a, min(b, t[-1])))
        if val <= eps:
            evidence["window_l5"] = val
            return Verdict(SCATTERING, evidence, (float(a), float(a + window_len), float(eps)))
        best = min(best, val)
    evidence["min_window_l5"] = best if math.isfinite(best) else None
    return Verdict(INCONCLUSIVE, evidence)
