"""Acceptance criteria, one test each; every check prints a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from conftest import UPPER_POINT, record
from foldfold.bifurcation import (
    check_theorem,
    compute_coefficients,
    find_foldfold,
    predict_period,
    predict_z_offset,
)
from foldfold.glacial import insolation_Q, obliquity_s2, preset
from foldfold.integrator import IntegrationOptions
from foldfold.poincare import find_cycle, fit_timemap, measure_cycle
from foldfold.synthetic import build_synthetic, planted_point, synthetic_spec
from foldfold.system import MINUS, PLUS, State, SurfaceParams, region_name, surface_lift

# tolerances
PERIOD_TOL = {1e-3: 0.05, 1e-4: 0.03}
LIFT_TOL = 1e-5
FIT_TOL = 1e-3
BETA_TOL = 1e-12
OFFSET_TOL = {1e-3: 0.15, 1e-4: 0.05, 1e-5: 0.02}
ATTRACT_TOL = 0.01
AMPLITUDE_TOL = 0.10
CROSS_TOL = 1e-9


def long_run(sys, p, eps, init, period, n_periods):
    opts = IntegrationOptions(max_step=period / 100)
    return measure_cycle(sys.with_param(p.param_value), eps, init, n_periods * period, opts=opts)


def start_near_cycle(sys, p, cyc):
    # on the surface, three predicted offsets below the fold-fold point
    x, z = cyc.fixed_point
    zi = p.z0 - 3.0 * (p.z0 - z)
    return State(x, surface_lift(sys.surface, zi), zi)


@pytest.fixture(scope="module")
def cycles(glacial_sys, glacial_point, glacial_coeffs):
    return {eps: find_cycle(glacial_sys, glacial_point, eps, coeffs=glacial_coeffs) for eps in (1e-3, 1e-4, 1e-5)}


@pytest.mark.slow
@pytest.mark.parametrize("eps", [1e-3, 1e-4])
def test_c1_period_formula(glacial_sys, glacial_point, glacial_coeffs, cycles, eps):
    p = glacial_point
    dist = max(abs(a - b) for a, b in zip(p.as_vector(), UPPER_POINT))
    t0 = time.perf_counter()
    T_f = predict_period(glacial_coeffs, eps)
    m = long_run(glacial_sys, p, eps, start_near_cycle(glacial_sys, p, cycles[eps]), T_f, 400)
    elapsed = time.perf_counter() - t0
    err = abs(m.period - T_f) / m.period
    ok = err <= PERIOD_TOL[eps] and elapsed <= 60
    record(f"1 period formula eps={eps:g}", ok,
           f"T_sim={m.period:.6g} ({m.n_cycles} cycles) T_formula={T_f:.6g} rel={err:.4f} "
           f"tol={PERIOD_TOL[eps]} time={elapsed:.1f}s point offset from reference={dist:.1e}")
    assert ok


def test_c2_surface_geometry():
    s = SurfaceParams(1.05, 1.75)
    t0 = time.perf_counter()
    errs = [abs(surface_lift(s, z) - y) for z, y in ((0.918074, 0.948796), (-0.208427, 0.244733))]
    ok = max(errs) <= LIFT_TOL and time.perf_counter() - t0 < 1
    record("2 surface geometry", ok, f"max |lift - eta|={max(errs):.2e} tol={LIFT_TOL}")
    assert ok


def test_c3_timemap_fit(synth_sys, synth_point, synth_coeffs):
    t0 = time.perf_counter()
    worst = 0.0
    detail = []
    for region in (MINUS, PLUS):
        rc = synth_coeffs.region(region)
        fit = fit_timemap(synth_sys, synth_point, region, [0.0, 5e-5, 1e-4])
        for nm in ("alpha", "beta", "gamma", "eta"):
            ref = getattr(rc, nm)
            err = abs(getattr(fit, nm) - ref) / abs(ref)
            worst = max(worst, err)
            detail.append(f"{nm}{region_name(region)[0]}={err:.1e}")
    elapsed = time.perf_counter() - t0
    ok = worst <= FIT_TOL and elapsed <= 30
    record("3 time-map fit", ok, f"worst rel={worst:.2e} tol={FIT_TOL} time={elapsed:.1f}s " + " ".join(detail))
    assert ok


def _coefficient_sets(glacial_sys, glacial_point):
    out = {"glacial": compute_coefficients(glacial_sys, glacial_point)}
    for variant in ("nominal", "no_gx", "same_sign_h", "flipped_slopes"):
        spec = synthetic_spec(variant)
        sys = build_synthetic(spec)
        p = find_foldfold(sys, [planted_point(spec)])[0]
        out[variant] = compute_coefficients(sys, p)
    rng = np.random.default_rng(11)
    for i in range(20):
        spec = synthetic_spec(fy=0.7 + rng.uniform(-0.3, 0.3), gx=0.8 + rng.uniform(-0.3, 0.3),
                              hz_plus=-0.3 + rng.uniform(-0.3, 0.3), hyz_minus=0.15 + rng.uniform(-0.3, 0.3))
        sys = build_synthetic(spec)
        p = find_foldfold(sys, [planted_point(spec)])[0]
        out[f"random{i}"] = compute_coefficients(sys, p)
    return out


def test_c4_beta_identity(glacial_sys, glacial_point):
    sets = _coefficient_sets(glacial_sys, glacial_point)
    worst = max(abs(rc.beta * rc.h0 / -2.0 - 1) for c in sets.values() for rc in (c.minus, c.plus))
    ok = worst <= BETA_TOL
    record("4 beta identity", ok, f"{len(sets)} coefficient sets, worst rel={worst:.1e} tol={BETA_TOL}")
    assert ok


def _offset_ratios(p, c, cycles):
    return {eps: (p.z0 - cyc.fixed_point[1]) / predict_z_offset(c, eps) for eps, cyc in cycles.items()}


def test_c5_fixed_point_scaling(glacial_point, glacial_coeffs, cycles, synth_sys, synth_point, synth_coeffs):
    t0 = time.perf_counter()
    ratios = _offset_ratios(glacial_point, glacial_coeffs, cycles)
    devs = {e: abs(r - 1) for e, r in ratios.items()}
    trend = devs[1e-3] > devs[1e-4] > devs[1e-5]
    ok = all(devs[e] <= OFFSET_TOL[e] for e in devs) and trend
    text = " ".join(f"eps={e:g}: ratio={r:.4f} dev={devs[e]:.3f} tol={OFFSET_TOL[e]}" for e, r in ratios.items())
    record("5 fixed-point scaling (glacial)", ok, f"{text} decreasing={trend}")
    syn = {e: find_cycle(synth_sys, synth_point, e, coeffs=synth_coeffs) for e in (1e-3, 1e-4, 1e-5)}
    sr = _offset_ratios(synth_point, synth_coeffs, syn)
    sdev = {e: abs(r - 1) for e, r in sr.items()}
    sok = all(sdev[e] <= OFFSET_TOL[e] for e in sdev) and sdev[1e-3] > sdev[1e-4] > sdev[1e-5]
    record("5 fixed-point scaling (synthetic)", sok,
           " ".join(f"eps={e:g}: dev={d:.4f}" for e, d in sdev.items()) + f" time={time.perf_counter() - t0:.1f}s")
    assert ok and sok


@pytest.mark.slow
@pytest.mark.parametrize("eps", [1e-3, 1e-4])
def test_c6_attractivity(glacial_sys, glacial_point, glacial_coeffs, cycles, eps):
    p = glacial_point
    cyc = cycles[eps]
    t0 = time.perf_counter()
    mods = cyc.eigenvalue_moduli
    T = cyc.period
    periods = []
    for sign in (-1, 1):
        # offset from the fold-fold point in z alone, so the start lies off the surface
        init = State(p.x0, p.y0, p.z0 + sign * 10 * math.sqrt(eps))
        periods.append(long_run(glacial_sys, p, eps, init, T, 1300).period)
    errs = [abs(q - T) / T for q in periods]
    elapsed = time.perf_counter() - t0
    ok = max(mods) < 1 and max(errs) <= ATTRACT_TOL and elapsed <= 120
    record(f"6 attractivity eps={eps:g}", ok,
           f"|lambda|={mods[0]:.4f},{mods[1]:.4f} perturbed periods rel={errs[0]:.1e},{errs[1]:.1e} "
           f"tol={ATTRACT_TOL} time={elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_c7_amplitude_law(glacial_sys, glacial_point, glacial_coeffs, cycles):
    p = glacial_point
    t0 = time.perf_counter()
    scaled = {}
    for eps, cyc in cycles.items():
        m = long_run(glacial_sys, p, eps, start_near_cycle(glacial_sys, p, cyc), cyc.period, 400)
        scaled[eps] = m.z_amplitude / math.sqrt(eps)
    vals = list(scaled.values())
    spread = max(vals) / min(vals) - 1
    elapsed = time.perf_counter() - t0
    ok = spread <= AMPLITUDE_TOL and elapsed <= 180
    record("7 amplitude law", ok, " ".join(f"eps={e:g}: A/sqrt(eps)={v:.6g}" for e, v in scaled.items())
           + f" spread={spread:.3f} tol={AMPLITUDE_TOL} time={elapsed:.1f}s")
    assert ok


@pytest.mark.parametrize("variant, condition", [("no_gx", "as3"), ("same_sign_h", "timemap"),
                                                ("flipped_slopes", "as4")])
def test_c8_negative_controls(variant, condition):
    spec = synthetic_spec(variant)
    sys = build_synthetic(spec)
    p = find_foldfold(sys, [planted_point(spec)])[0]
    v = check_theorem(sys, p, compute_coefficients(sys, p))
    ok = (not v.applicable) and v.failed == (condition,)
    record(f"8 negative control {variant}", ok, f"applicable={v.applicable} failed={v.failed}")
    assert ok


def test_c9_cross_forms(glacial_sys, glacial_point):
    sets = _coefficient_sets(glacial_sys, glacial_point)
    k_err = max(abs(c.K - c.K_beta) / abs(c.K) for c in sets.values())
    b_err = max(abs(rc.B - rc.B_aux) / max(abs(rc.B), 1e-300) for c in sets.values() for rc in (c.minus, c.plus))
    ok = max(k_err, b_err) <= CROSS_TOL
    record("9 cross-form consistency", ok, f"{len(sets)} sets, K rel={k_err:.1e} B rel={b_err:.1e} tol={CROSS_TOL}")
    assert ok


def test_c10_forcing():
    t0 = time.perf_counter()
    lo = minimize_scalar(obliquity_s2, bounds=(0, math.pi / 2), method="bounded", options={"xatol": 1e-12})
    hi = minimize_scalar(lambda b: -obliquity_s2(b), bounds=(-0.5, 0.5), method="bounded", options={"xatol": 1e-12})
    s_min, s_max = lo.fun, -hi.fun
    t1 = preset("baseline").s2
    outside = not (s_min <= t1 <= s_max)
    ok = insolation_Q(0.0) == 343.0 and abs(s_min + 0.3125) < 1e-9 and abs(s_max - 0.625) < 1e-9
    ok = ok and time.perf_counter() - t0 < 1
    record("10 forcing functions", ok,
           f"Q(0)={insolation_Q(0.0)} s2 range=[{s_min:.10f}, {s_max:.10f}] "
           f"baseline s2={t1} outside range={outside} (consistency flag)")
    assert ok
