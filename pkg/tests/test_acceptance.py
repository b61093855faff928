"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line (collected in the terminal summary)
before asserting, so a failing criterion still reports its measured value.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from nlslab.cli import sweep
from nlslab.cutoffs import build_cutoffs, gradient_identity_residual
from nlslab.detector import BELOW, BLOWUP, INCONCLUSIVE, SCATTERING, interpolation_l5, scattering_verdict, virial
from nlslab.evolve import Resume, SpongeProfile, decay_fit, evolve, initial_field, load_checkpoint
from nlslab.ground_state import find_ground_state, gn_check, pohozaev_residuals
from nlslab.morawetz import interaction, local_smoothing_average
from nlslab.radial import integrate, make_grid, norms
from nlslab.series import series_to_csv
from nlslab.verify import (
    angular_interaction,
    interaction_test_state,
    random_radial_field,
    rate_identity_max_residual,
)

from conftest import ACCEPTANCE_LINES, CONFIGS

SHIPPED = sorted(p.stem for p in CONFIGS.glob("*.cfg"))


def record(number: int, title: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] #{number:<2} {title}: {detail}")
    return passed


def test_01_pohozaev():
    t0 = time.perf_counter()
    gs = find_ground_state(grid=make_grid(0.0, 30.0, 30001))
    elapsed = time.perf_counter() - t0
    k, q = pohozaev_residuals(gs)
    ok = k < 1e-6 and q < 1e-6 and elapsed < 5.0
    assert record(1, "Pohozaev", ok, f"kinetic {k:.2e}, quartic {q:.2e}, {elapsed:.2f} s")


def test_02_threshold_identity(gs, tc):
    m = gs.norms.mass
    em = gs.norms.energy * m
    rel = abs(em - 0.5 * m * m) / (0.5 * m * m)
    rel_const = abs(tc.em_threshold - 0.5 * m * m) / (0.5 * m * m)
    ok = rel < 1e-6 and rel_const < 1e-6
    assert record(2, "threshold identity", ok, f"E(Q)M(Q) vs M^2/2 relative {rel:.2e}")


def test_03_soliton_fidelity(runs, gs):
    cfg = runs.config("default")
    t0 = time.perf_counter()
    series = evolve(cfg, with_interaction=False)
    elapsed = time.perf_counter() - t0
    final = series.final_state
    q = gs.on_grid(final.field.grid)
    q_v = np.real(q.v)
    err = (math.sqrt(integrate(q.grid, (np.abs(final.field.v) - q_v) ** 2))
           / math.sqrt(integrate(q.grid, q_v ** 2)))
    m = [r.norms.mass for r in series.rows]
    e = [r.norms.energy for r in series.rows]
    mass_drift = max(abs(x - m[0]) for x in m) / m[0]
    energy_drift = max(abs(x - e[0]) for x in e) / abs(e[0])
    ok = (final.t == pytest.approx(5.0) and err < 1e-3 and mass_drift < 1e-8
          and energy_drift < 1e-4 and elapsed < 120.0)
    assert record(3, "soliton fidelity", ok,
                  f"profile error {err:.2e}, mass drift {mass_drift:.1e}, energy drift {energy_drift:.1e}, "
                  f"{elapsed:.1f} s")


def test_04_dispersive_decay_exterior(runs):
    # The exterior slope stays near -1.2 on [1, 8]; the free-space run is shown for contrast.
    cfg = runs.config("dispersive_exterior")
    assert cfg.grid_r0 == 1.0 and cfg.grid_r_max == 80.0 and cfg.mode == "linear"
    slope = decay_fit(cfg).slope
    free = decay_fit(runs.config("dispersive_free")).slope
    ok = abs(slope + 1.5) <= 0.1
    assert record(4, "dispersive decay (exterior)", ok,
                  f"slope {slope:.3f} (target -1.5 +/- 0.1; free space {free:.3f})")


def test_05_cutoff_identity():
    res = [gradient_identity_residual(build_cutoffs(1.0, 0.1, n)) for n in (2048, 4096)]
    factor = res[0] / res[1]
    ok = res[1] < 1e-4 and 3.0 <= factor <= 5.0
    assert record(5, "cutoff identity", ok, f"residual {res[1]:.2e} at n_tab 4096, factor {factor:.2f}")


def test_06_morawetz_rate_identity(runs):
    cfg = runs.config("morawetz_exterior", keep_states=True)
    fine = replace(cfg, grid_h=cfg.grid_h / 2, dt=cfg.dt / 2)
    coarse_res = rate_identity_max_residual(cfg)
    fine_res = rate_identity_max_residual(fine)
    factor = coarse_res / fine_res
    ok = coarse_res < 1e-2 and 3.0 <= factor <= 5.0
    assert record(6, "Morawetz rate identity", ok, f"residual {coarse_res:.2e}, factor {factor:.2f}")


def test_07_interaction_oracle():
    worst = 0.0
    for r0 in (0.0, 1.0):
        f = interaction_test_state(r0=r0, n=64)
        cf = build_cutoffs(1.5, 0.1)
        fast, slow = interaction(f, cf), angular_interaction(f, cf)
        worst = max(worst, abs(fast - slow) / abs(slow))
    assert record(7, "interaction oracle", worst < 1e-4, f"relative {worst:.2e}")


def test_08_gagliardo_nirenberg(gs, tc):
    rng = np.random.default_rng(0)
    worst = max(gn_check(random_radial_field(rng), tc) for _ in range(100))
    at_q = gn_check(gs.field(), tc)
    ok = worst <= 1.0 + 1e-10 and abs(at_q - 1.0) <= 1e-4
    assert record(8, "Gagliardo-Nirenberg", ok, f"max ratio {worst:.6f} on 100 fields, {at_q:.8f} at Q")


def _segments(series):
    """Times and per-interval trapezoid integrals of |u|_p^p for p = 3, 5, 10."""
    t = np.asarray(series.times)
    seg = {}
    for p in (3, 5, 10):
        y = np.array([row.lp_power(p) for row in series.rows])
        seg[p] = 0.5 * (y[1:] + y[:-1]) * np.diff(t)
    return t, seg


def _holder_gap(series) -> tuple[float, int]:
    """Largest lhs - rhs over sample-aligned windows of lengths spacing * 2^k.

    Window integrals are direct sliding sums of the interval integrals
    (differences of cumulative sums would cancel the late, tiny L10 terms).
    """
    t, seg = _segments(series)
    worst, count = -math.inf, 0
    step = 1
    while step < t.size:
        box = np.ones(step)
        n3, n5, n10 = (np.convolve(seg[p], box, "valid") ** (1.0 / p) for p in (3, 5, 10))
        gap = n5 - n3 ** (3.0 / 7.0) * n10 ** (4.0 / 7.0)
        worst = max(worst, float(np.max(gap)))
        count += gap.size
        step *= 2
    return worst, count


def test_09_holder_interpolation(runs):
    gaps = {}
    total = 0
    for name in SHIPPED:
        series = runs.series(name)
        gaps[name], n = _holder_gap(series)
        total += n
        # the package routine agrees with the interval sums on the full span
        t, seg = _segments(series)
        if t.size > 1:
            lhs, _ = interpolation_l5(series, (t[0], t[-1]))
            assert lhs == pytest.approx(seg[5].sum() ** 0.2, rel=1e-12)
    worst = max(gaps.values())
    ok = worst <= 1e-10
    assert record(9, "Holder interpolation", ok,
                  f"max lhs - rhs {worst:.2e} over {total} windows of {len(SHIPPED)} runs")


def _sponge_free(series, cfg, tol=1e-8):
    """Rows before the sponge layer holds more than ``tol`` of the mass."""
    grid = cfg.grid()
    outer = grid.r >= SpongeProfile.build(grid, cfg.sponge_width, cfg.sponge_strength).start(grid)
    keep = 0
    for s in series.states:
        mass = np.abs(s.field.v) ** 2
        share = integrate(grid, np.where(outer, mass, 0.0)) / integrate(grid, mass)
        if share > tol:
            break
        keep += 1
    return replace(series, rows=series.rows[:keep])


def test_10_virial_identity(runs):
    results = {}
    for name in ("default", "below_free", "blowup_free"):
        cfg = runs.config(name, keep_states=True)
        series = _sponge_free(evolve(cfg, with_interaction=False), cfg)
        exclude = 2 if series.blew_up or name == "blowup_free" else 0
        _, res = virial(series, exclude_last=exclude)
        results[name] = (res, series.rows[-1].t)
    soliton = runs.series("default")
    target = max(abs(8 * r.norms.kinetic - 6 * r.norms.l4_fourth) for r in soliton.rows)
    scale = 8 * soliton.rows[0].norms.kinetic
    ok = all(res < 1e-2 for res, _ in results.values()) and target / scale < 1e-3
    detail = ", ".join(f"{k} {v[0]:.1e} (t <= {v[1]:g})" for k, v in results.items())
    assert record(10, "virial identity", ok, f"{detail}; soliton |8K - 6L|/8K {target / scale:.1e}")


def test_11_dichotomy_sweep(runs, gs, tc):
    cfg = runs.config("sweep_gaussian")
    values = [round(c * gs.a0, 4) for c in (0.3, 0.5, 0.6, 0.7, 0.9, 1.0, 1.2, 1.5)]
    rows = sweep(cfg, "initial_data.amplitude", values, workers=1)
    energies = {v: norms(initial_field(cfg.initial_data.with_param("amplitude", v), cfg.grid())).energy
                for v in values}
    below = [r for r in rows if r["classification"] == BELOW]
    negative = [r for r in rows if energies[r["value"]] < 0]
    soliton = scattering_verdict(runs.series("default"), cfg.detector_eps, cfg.detector_window_len)
    ok = (bool(below) and bool(negative)
          and all(r["verdict"] == SCATTERING for r in below)
          and all(r["verdict"] == BLOWUP for r in negative)
          and soliton.kind == INCONCLUSIVE)
    summary = "; ".join(f"{r['value']:g} {r['classification']} -> {r['verdict']}" for r in rows)
    assert record(11, "dichotomy sweep", ok, f"{summary}; soliton -> {soliton.kind}")


def test_12_local_smoothing_trend(runs):
    cfg = runs.config("local_smoothing")
    series = runs.series("local_smoothing")
    averages = [local_smoothing_average(series, T0) for T0 in cfg.detector_T0]
    ok = (series.rows[-1].t == pytest.approx(160.0) and not series.blew_up
          and all(b <= a for a, b in zip(averages, averages[1:])))
    detail = ", ".join(f"T0={T0:g}: {a:.4f}" for T0, a in zip(cfg.detector_T0, averages))
    assert record(12, "local smoothing trend", ok, detail)


def test_13_determinism_and_resume(runs, tmp_path):
    cfg = runs.config("below_free", t_end=2.0, checkpoint_every=200)
    first = series_to_csv(evolve(cfg))
    second = series_to_csv(evolve(cfg))
    full = evolve(cfg)
    evolve(replace(cfg, t_end=1.0), checkpoint_path=tmp_path / "c.json")
    state, _, base = load_checkpoint(tmp_path / "c.json")
    rest = evolve(cfg, resume=Resume(state, base))
    tail = full.rows[len(full.rows) - len(rest.rows):]
    worst = max(abs(a - b) for ra, rb in zip(tail, rest.rows)
                for a, b in zip(ra.to_record().values(), rb.to_record().values()))
    ok = first == second and worst <= 1e-12 and len(rest.rows) > 1
    assert record(13, "determinism and resume", ok,
                  f"byte-identical {first == second}, resume max deviation {worst:.1e}")
