import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foldfold.bifurcation import (
    check_theorem,
    compute_coefficients,
    find_foldfold,
    foldfold_residual,
    make_point,
    predict_fixed_points,
    predict_period,
    predict_transit_times,
    predict_z_offset,
)
from foldfold.errors import DegeneracyError, InapplicableError, PreconditionError
from foldfold.glacial import nullcline_seeds
from foldfold.synthetic import build_synthetic, planted_point, synthetic_spec
from foldfold.system import MINUS, PLUS, PiecewiseSystem, SurfaceParams


def analyse(variant="nominal", **over):
    spec = synthetic_spec(variant, **over)
    sys = build_synthetic(spec)
    p = find_foldfold(sys, [planted_point(spec)])[0]
    c = compute_coefficients(sys, p)
    return sys, p, c, check_theorem(sys, p, c)


def test_constructed_residual_is_zero():
    a, b = 1.0, 3.0
    h = {MINUS: -2.0, PLUS: 1.5}
    # (a + b)(g + g_i) = b h_i at the origin with g(0, 0) = 0
    sys = PiecewiseSystem(
        surface=SurfaceParams(a, b),
        f=lambda x, y: x - y, g=lambda x, y: x + 2 * y,
        gshift_minus=lambda e: b * h[MINUS] / (a + b),
        gshift_plus=lambda e: b * h[PLUS] / (a + b),
        h_minus=lambda y, z, e: h[MINUS], h_plus=lambda y, z, e: h[PLUS],
    )
    # surface point above z with y = 0: z = -a/b
    r = foldfold_residual(sys, 0.0, 0.0, -a / b, None)
    assert np.all(r == 0.0)


def test_residual_linear_in_z(synth_sys, synth_point):
    p = synth_point
    r0 = foldfold_residual(synth_sys, p.x0, p.y0, p.z0, 0.0)
    for d in (1e-3, -0.2, 0.5):
        r1 = foldfold_residual(synth_sys, p.x0, p.y0, p.z0 + d, 0.0)
        assert r1[0] - r0[0] == pytest.approx(-synth_sys.surface.b * d, rel=1e-12)


def test_glacial_grid_recovers_both_reference_points(glacial_params, glacial_sys):
    grid = np.linspace(-1, 1.2, 12)
    pts = find_foldfold(glacial_sys, nullcline_seeds(glacial_params, grid, grid))
    found = {(round(p.y0, 6), round(p.z0, 6)) for p in pts}
    assert (0.948796, 0.918074) in found
    assert (0.244733, -0.208427) in found
    for p in pts:
        assert p.max_residual <= 1e-10


def test_glacial_reference_parameter_value(glacial_point):
    assert glacial_point.param_value == pytest.approx(-10.0202, abs=5e-5)
    assert glacial_point.x0 == pytest.approx(5.08105, abs=5e-6)


def test_planted_root_recovered(synth_spec, synth_sys):
    x0, y0, z0, p0 = planted_point(synth_spec)
    pts = find_foldfold(synth_sys, [(x0 + 0.1, y0 - 0.1, z0 + 0.05, p0)])
    assert len(pts) == 1
    assert np.allclose(pts[0].as_vector(), [x0, y0, z0, p0], atol=1e-12)


def test_failed_seed_reported(synth_sys):
    failures = []
    assert find_foldfold(synth_sys, [(1e6, -1e6, 1e6, 1e6)], max_iter=3, failures=failures) == []
    assert len(failures) == 1


def test_non_finite_seed_rejected(synth_sys):
    with pytest.raises(PreconditionError):
        find_foldfold(synth_sys, [(math.nan, 0, 0, 0)])


def test_coefficients_need_a_foldfold_point(synth_sys):
    p = make_point(synth_sys, 0.0, 0.5, 0.0, 0.0)
    with pytest.raises(PreconditionError):
        compute_coefficients(synth_sys, p)


def test_beta_identity_and_auxiliary_relations(glacial_coeffs, synth_coeffs):
    for c in (glacial_coeffs, synth_coeffs):
        for rc in (c.minus, c.plus):
            assert rc.beta == -2.0 / rc.h0
            assert rc.alpha == pytest.approx(rc.alpha_bar / rc.h0, rel=1e-12)
            assert rc.gamma == pytest.approx(rc.gamma_bar / rc.h0, rel=1e-12, abs=1e-300)
            assert rc.eta == pytest.approx(rc.eta_bar / rc.h0, rel=1e-12)
            assert rc.k_bar == pytest.approx(rc.k_bbar * rc.G, rel=1e-12)
            assert rc.B == pytest.approx(rc.B_aux, rel=1e-9)
        assert c.K == pytest.approx(c.K_beta, rel=1e-9)
        assert c.M == pytest.approx(c.M_beta, rel=1e-9)


def test_synthetic_closed_form_values(synth_coeffs):
    # hand-evaluated from the nominal polynomial coefficients
    c = synth_coeffs
    assert c.minus.D == pytest.approx(1.5 * -2.0 - 0.9 * 0.4 - 1.5 * -0.2)
    assert c.minus.alpha_bar == pytest.approx(-2 * 2.5 * 0.8 / c.minus.D)
    assert c.plus.gamma_bar == pytest.approx(-2 * (2.5 * 0.3 - 1.5 * 0.2) / c.plus.D)
    assert c.minus.A == pytest.approx(-1.0 + 0.5 * 0.7 * 0.6 * c.minus.alpha_bar)


def test_table_keys(glacial_coeffs, glacial_sys, glacial_point):
    d = glacial_coeffs.to_dict()
    for k in ("alpha_bar_minus", "alpha_bar_plus", "eta_bar_minus", "B_plus", "K", "M", "k", "m"):
        assert k in d
    v = check_theorem(glacial_sys, glacial_point, glacial_coeffs).to_dict()
    assert v["applicable"] is True and v["stable_branch"] == "lower"
    json.dumps(v)


def test_glacial_applicable(glacial_sys, glacial_point, glacial_coeffs):
    v = check_theorem(glacial_sys, glacial_point, glacial_coeffs)
    assert v.applicable and v.failed == ()
    assert glacial_coeffs.ratio > 0


def test_tilde_typo_is_noted(synth_coeffs):
    assert any("tilde" in n for n in synth_coeffs.notes)


def test_no_gx_kills_alpha_bar():
    _, _, c, v = analyse("no_gx")
    assert c.minus.alpha_bar == 0.0 and c.plus.alpha_bar == 0.0
    assert v.cond_as3.holds is False and not v.applicable
    with pytest.raises(InapplicableError):
        predict_period(c, 1e-3)


def test_same_sign_h_fails_timemap():
    _, _, c, v = analyse("same_sign_h")
    assert v.cond_timemap.holds is False
    assert v.failed == ("timemap",)


def test_flipped_slopes_flip_M():
    _, _, c0, v0 = analyse()
    _, _, c1, v1 = analyse("flipped_slopes")
    assert c1.M == pytest.approx(-c0.M, rel=1e-12)
    assert c1.m == pytest.approx(-c0.m, rel=1e-12)
    assert v0.cond_as4.holds and not v1.cond_as4.holds
    assert v1.failed == ("as4",)


def test_degenerate_D_raises():
    # g_y chosen so that D vanishes in the minus region
    spec = synthetic_spec(gy=0.04, gyy=0.0)
    sys = build_synthetic(spec)
    p = find_foldfold(sys, [planted_point(spec)])[0]
    with pytest.raises(DegeneracyError):
        compute_coefficients(sys, p)


def test_sqrt_eps_scaling(glacial_coeffs, glacial_point):
    c = glacial_coeffs
    for eps in (1e-3, 2.5e-5, 1e-6):
        assert predict_period(c, 4 * eps) == 2 * predict_period(c, eps)
        assert predict_z_offset(c, 4 * eps) == pytest.approx(2 * predict_z_offset(c, eps), rel=1e-15)
    lo, up = predict_fixed_points(c, glacial_point, 1e-3)
    assert lo[0] == up[0]
    assert lo[1] + up[1] == pytest.approx(2 * glacial_point.z0, rel=1e-15)
    with pytest.raises(PreconditionError):
        predict_period(c, 0.0)


def test_reference_period_at_1e3(glacial_coeffs):
    assert predict_period(glacial_coeffs, 1e-3) == pytest.approx(0.149956, abs=1e-4)


def test_reference_period_at_1e4(glacial_coeffs):
    # reference 0.047202; the sqrt-eps law applied to the 1e-3 value gives 0.0474202,
    # so both reference values cannot come from the same coefficient set
    assert predict_period(glacial_coeffs, 1e-4) == pytest.approx(0.047202, abs=1e-4)


def test_transit_times(glacial_coeffs):
    c = glacial_coeffs
    tm, tp = predict_transit_times(c, 1e-4)
    root = math.sqrt(-1e-4 * c.M / c.K)
    assert tm == pytest.approx(2 / abs(c.minus.h0) * root)
    assert tp == pytest.approx(2 / abs(c.plus.h0) * root)


def test_time_rescaling(synth_coeffs):
    spec = synthetic_spec(time_scale=2.0)
    sys = build_synthetic(spec)
    p = find_foldfold(sys, [planted_point(spec)])[0]
    c2 = compute_coefficients(sys, p)
    c1 = synth_coeffs
    assert c2.minus.h0 == 2 * c1.minus.h0 and c2.plus.h0 == 2 * c1.plus.h0
    assert predict_z_offset(c2, 1e-3) == pytest.approx(predict_z_offset(c1, 1e-3), rel=1e-12)
    assert predict_period(c2, 1e-3) == pytest.approx(predict_period(c1, 1e-3) / 2, rel=1e-12)


def test_finite_difference_coefficients_match(glacial_sys, glacial_point, glacial_coeffs):
    fd = compute_coefficients(glacial_sys.without_derivatives(), glacial_point)
    for k, v in glacial_coeffs.to_dict().items():
        assert fd.to_dict()[k] == pytest.approx(v, rel=1e-6, abs=1e-9), k


perturb = st.floats(-0.3, 0.3)


@settings(max_examples=60, deadline=None)
@given(fy=perturb, gx=perturb, gy=perturb, hz=perturb, hyz=perturb, he=perturb, d=perturb)
def test_applicable_implies_positive_ratio(fy, gx, gy, hz, hyz, he, d):
    spec = synthetic_spec(fy=0.7 + fy, gx=0.8 + gx, gy=-2.0 + gy, hz_plus=-0.3 + hz,
                          hyz_minus=0.15 + hyz, he_plus=0.2 + he, d_minus=-0.5 + d)
    sys = build_synthetic(spec)
    p = find_foldfold(sys, [planted_point(spec)])[0]
    try:
        c = compute_coefficients(sys, p)
    except DegeneracyError:
        return
    for rc in (c.minus, c.plus):
        assert abs(rc.beta * rc.h0 + 2.0) <= 1e-12
    v = check_theorem(sys, p, c)
    if v.applicable:
        assert c.ratio > 0
        assert c.K == pytest.approx(c.K_beta, rel=1e-9)
