import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from pinchflow.errors import (
    BelowThreshold,
    InsufficientHistory,
    NoQualifyingPoints,
    NotPinched,
    PreconditionFailed,
    WindowExceedsDomain,
)
from pinchflow.estimates import (
    COMPACT,
    INCONCLUSIVE,
    NECK_CANDIDATE,
    DichotomyParams,
    EstimateReport,
    GradientEstimateConsts,
    NeckParams,
    chen_kmin,
    chen_kmin_profile,
    cylindrical_trend,
    d_sharp,
    dichotomy_classify,
    fit_gamma,
    gradient_bound_check,
    gradient_ratio_bound,
    gradient_ratio_monitor,
    half_double_check,
    harnack_check,
    harnack_lower_bound,
    kappa_n,
    measure_csharp,
    neck_count,
    neck_detect,
    parabolic_nbhd,
    second_deriv_monitor,
    values_at_labels,
)
from pinchflow.flow import FlowConfig, parabolic_rescale, regrid, run
from pinchflow.models import Cylinder, ProductSpheres, Sphere, curvature_frame, shrink_exact
from pinchflow.profile import (
    ProfileState,
    max_H_point,
    product_circle_state,
    profile_geometry,
    straight_cylinder_state,
)
from pinchflow.tensor import PinchingParams, norm_A2, norm_H2


def _semicircle(n, R=1.0, N=401):
    th = np.linspace(0.2, np.pi - 0.2, N)
    return ProfileState(n=n, u=R * np.sin(th), chi=R * np.cos(th), periodic=False, dx=th[1] - th[0])


def _dumbbell(n=8, N=512):
    x = np.arange(N) / N
    R = math.sqrt(3.0)
    return ProfileState(n=n, u=1 + 0.5 * np.cos(4 * np.pi * x),
                        chi=np.column_stack([R * np.cos(2 * np.pi * x), R * np.sin(2 * np.pi * x)]))


# ---------------------------------------------------------------- constants


def test_constants_examples():
    assert kappa_n(8, 1 / 6) == pytest.approx(2 / 15)
    assert gradient_ratio_bound(8, 1 / 6, 0.1) == pytest.approx(1.875, rel=1e-14)
    assert d_sharp(5, 0.25) == 0.03125
    assert d_sharp(5, 0.0) == math.inf
    assert harnack_lower_bound(10.0, 0.5, 0.3) == pytest.approx(4.0, rel=1e-15)
    assert DichotomyParams(2, 0.5).alpha0 == pytest.approx(2 * math.pi, rel=1e-15)
    assert DichotomyParams(2, 0.5, 0.1).gamma0 == pytest.approx(1 + 0.2 * math.pi)
    g = GradientEstimateConsts.with_n(5, c_sharp=0.25)
    assert g.d_sharp == 0.03125


def test_constant_validation():
    with pytest.raises(ValueError):
        GradientEstimateConsts(gamma1=-1.0)
    with pytest.raises(ValueError):
        DichotomyParams(8, 1 / 7)
    with pytest.raises(ValueError):
        NeckParams(L=0.5)
    with pytest.raises(ValueError):
        gradient_ratio_bound(8, 0.4, 0.1)
    with pytest.raises(NotPinched):
        gradient_ratio_bound(8, 1 / 6, 0.0)


# ---------------------------------------------------------------- gradient estimates


def test_gradient_monitor_on_models():
    m = Cylinder(8, 1.0)
    sup, bound = gradient_ratio_monitor(m, PinchingParams(8, 1, 1 / 6))
    assert sup == 0.0 and bound > 0
    with pytest.raises(NotPinched):
        gradient_ratio_monitor(ProductSpheres(6, 0.1, 2, 1.0), PinchingParams(8, 2, 1 / 6))


def test_gradient_bound_checks():
    zero = GradientEstimateConsts()
    for m in (Sphere(5, 1.0), Cylinder(4, 2.0), ProductSpheres(2, 1.0, 3, 0.5)):
        assert gradient_bound_check(m, zero)
        assert second_deriv_monitor(m, zero)
    s = product_circle_state(6, 0.3, 1.0, 256, bump_amplitude=0.2)
    assert not gradient_bound_check(s, zero)
    assert not second_deriv_monitor(s, zero)
    g1, g2 = fit_gamma([s])
    g3, g4 = fit_gamma([s], power=3, second=True)
    fitted = GradientEstimateConsts(gamma1=g1, gamma2=g2, gamma3=g3, gamma4=g4)
    assert gradient_bound_check(s, fitted)
    assert second_deriv_monitor(s, fitted)


def test_gradient_ratio_scale_invariant():
    s = product_circle_state(6, 0.3, 1.0, 256, bump_amplitude=0.2)
    p = PinchingParams(6, 2, 0.25)
    sup0, b0 = gradient_ratio_monitor(s, p)
    i, _ = max_H_point(s)
    r, _ = parabolic_rescale(s, i)
    sup1, b1 = gradient_ratio_monitor(r, p)
    assert sup1 == pytest.approx(sup0, rel=1e-8)
    assert b1 == pytest.approx(b0, rel=1e-8)


def test_neckpinch_gradient_ratio_below_bound(neckpinch, neckpinch_geos):
    p = PinchingParams(8, 2, 1 / 6)
    for s, geo in zip(neckpinch.snapshots, neckpinch_geos):
        sup, bound = gradient_ratio_monitor(s, p, geo)
        assert sup <= bound


# ---------------------------------------------------------------- c#, Harnack, half/double


def test_csharp_cylinder():
    s = straight_cylinder_state(5, 1.0, 32, length=4.0)
    assert measure_csharp([s], 0.0) == pytest.approx(0.0, abs=1e-10)
    # a flowing cylinder has d|H|/dt = |H|^3 / (n - 1)
    res = run(s, FlowConfig(t_end=0.02, keep_snapshots=True))
    c = measure_csharp(res.snapshots, 0.0)
    assert c == pytest.approx(1 / 4, rel=5e-3)


def test_csharp_no_points():
    s = product_circle_state(4, 0.5, 1.0, 64)
    with pytest.raises(NoQualifyingPoints):
        measure_csharp([s], 1e6)
    with pytest.raises(NoQualifyingPoints):
        measure_csharp([], 0.0)


def test_csharp_stable_under_refinement():
    vals = []
    for N in (128, 256):
        s = product_circle_state(5, 0.5, 1.0, N, bump_amplitude=0.1)
        res = run(s, FlowConfig(t_end=0.005, keep_snapshots=True))
        vals.append(measure_csharp(res.snapshots, 0.0))
    assert vals[1] == pytest.approx(vals[0], rel=0.1)
    assert 0 < vals[1] < math.inf


def test_values_at_labels():
    s = product_circle_state(5, 0.5, 1.0, 128, bump_amplitude=0.1)
    r = regrid(s, 10.0)
    f = lambda lab: np.cos(2 * np.pi * lab) + 0.3 * np.sin(6 * np.pi * lab)
    got = values_at_labels(r, f(r.labels), s.labels)
    np.testing.assert_allclose(got, f(s.labels), atol=1e-5)
    np.testing.assert_array_equal(values_at_labels(s, f(s.labels), s.labels), f(s.labels))


def test_harnack_cylinder_and_negative_control():
    c = straight_cylinder_state(5, 1.0, 64)
    assert harnack_check(c, 3, 0.0, 0.0, 2.0)
    assert harnack_check(c, 3, 0.5, 1.0, 2.0).margin == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(BelowThreshold):
        harnack_check(c, 3, 0.5, 10.0, 2.0)
    s = product_circle_state(6, 0.3, 1.0, 256, bump_amplitude=0.3)
    i, _ = max_H_point(s)
    assert harnack_check(s, i, measure_csharp([s], 0.0), 0.0, 2.0)
    assert not harnack_check(s, i, 1e-3, 0.0, 2.0)


def test_half_double():
    c = straight_cylinder_state(5, 1.0, 32, length=4.0)
    res = run(c, FlowConfig(t_end=0.01, keep_snapshots=True))
    k0 = len(res.snapshots) - 1
    ok = half_double_check(res.snapshots, 5, k0, 0.25, 0.0, L=1.0, theta=0.001)
    assert ok
    with pytest.raises(InsufficientHistory):
        half_double_check(res.snapshots, 5, k0, 0.25, 0.0, L=1.0, theta=1.0)
    with pytest.raises(BelowThreshold):
        half_double_check(res.snapshots, 5, k0, 0.25, 100.0)


def test_parabolic_nbhd_normalization():
    s = product_circle_state(6, 0.3, 1.0, 128, bump_amplitude=0.2)
    geo = profile_geometry(s, grad=False)
    for i in (0, 17, 64):
        nb = parabolic_nbhd(s, i, 2.0, 1.0, geo)
        assert nb.r_hat * geo.Hnorm[i] == pytest.approx(5.0, rel=1e-12)
        assert nb.lookback == pytest.approx(nb.r_hat**2)


# ---------------------------------------------------------------- necks


@given(st.floats(1e-8, 1.0), st.integers(2, 9), st.floats(0.2, 5.0))
@settings(deadline=None, max_examples=30)
def test_cylinder_is_neck(eps, n, r):
    s = straight_cylinder_state(n, r, 128, length=40.0 * r)
    ok, dev = neck_detect(s, 7, NeckParams(eps_neck=eps))
    assert ok and dev <= 1e-10


@pytest.mark.parametrize("eps", [0.3, 0.1, 0.01])
def test_sphere_chart_is_not_neck(eps):
    s = _semicircle(5)
    ok, dev = neck_detect(s, s.N // 2, NeckParams(eps_neck=eps, L=1.0))
    assert not ok and dev > 0.3


def test_window_errors():
    s = _semicircle(5)
    with pytest.raises(WindowExceedsDomain):
        neck_detect(s, s.N // 2, NeckParams(L=2.0))
    small = straight_cylinder_state(4, 1.0, 32, length=1.0)
    # translation-periodic: a window longer than one period wraps
    with pytest.raises(WindowExceedsDomain):
        neck_detect(small, 0, NeckParams(L=2.0))


def test_neckpinch_late_state_has_neck(neckpinch):
    t_end = neckpinch.state.time
    late = [s for s in neckpinch.snapshots if s.time >= 0.9 * t_end]
    assert late
    assert neck_count(late[-1], NeckParams(0.1, 2, 2.0)) >= 1
    s = late[-1]
    i, _ = max_H_point(s)
    ok, dev = neck_detect(s, i, NeckParams(0.1, 2, 2.0))
    assert ok and dev < 0.1


# ---------------------------------------------------------------- trends


def test_trend_on_self_similar_families():
    for m, target in ((Cylinder(6, 1.0), 1 / 5), (Sphere(6, 1.0), 1 / 6)):
        T = 1.0 / (2 * (m.n - (m.kind == "cylinder")))
        rows = []
        for t in np.linspace(0, 0.99 * T, 30):
            f = curvature_frame(shrink_exact(m, t))
            rows.append((math.sqrt(norm_H2(f)), norm_A2(f) / norm_H2(f)))
        H, r = map(np.array, zip(*rows))
        tr = cylindrical_trend(H, r)
        assert np.ptp(tr.envelope) < 1e-10
        assert tr.asymptote == pytest.approx(target, abs=1e-10)
        assert tr.within(target, 1e-10, H[0])


def test_trend_fit_recovers_asymptote():
    H = np.geomspace(1, 1000, 50)
    r = 1 / 7 - 0.3 / H**2
    tr = cylindrical_trend(H, r)
    assert tr.asymptote == pytest.approx(1 / 7, abs=1e-12)
    assert tr.slope == pytest.approx(-0.3, rel=1e-6)
    assert np.all(np.diff(tr.envelope[np.argsort(H)]) <= 0)
    assert not tr.within(1 / 7, 0.02, 1e9)
    with pytest.raises(ValueError):
        cylindrical_trend([], [])


# ---------------------------------------------------------------- dichotomy


def test_chen_kmin():
    assert chen_kmin(Sphere(5, 1.0)) == pytest.approx(0.625)
    assert chen_kmin(Cylinder(6, 2.0)) == pytest.approx(0.0, abs=1e-15)
    assert chen_kmin(ProductSpheres(6, 0.1, 2, 1.0)) < 0
    s = product_circle_state(5, 1.0, 1e6, 64)
    np.testing.assert_allclose(chen_kmin_profile(profile_geometry(s, grad=False)), 0.0, atol=1e-6)


def test_dichotomy_sphere_compact():
    r = dichotomy_classify(Sphere(6, 1.0), 0, DichotomyParams(6, 0.01))
    assert r.kind == COMPACT
    with pytest.raises(PreconditionFailed):
        dichotomy_classify(Cylinder(6, 1.0), 0, DichotomyParams(6, 0.01))
    with pytest.raises(PreconditionFailed):
        dichotomy_classify(Sphere(6, 1.0), 0, DichotomyParams(6, 0.01), H_sharp=100.0)


def test_dichotomy_dumbbell_finds_neck():
    s = _dumbbell()
    c = measure_csharp([s], 0.0)
    dp = DichotomyParams(8, 0.005, c)
    r = dichotomy_classify(s, 0, dp)
    assert r.kind == NECK_CANDIDATE
    assert abs(s.x[r.index] - 0.25) < 0.01 or abs(s.x[r.index] - 0.75) < 0.01
    assert r.curvature_ok and r.H_candidate >= r.H_center / dp.gamma0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.6), st.floats(1.2, 4.0), st.floats(1e-3, 0.02), st.integers(4, 9))
def test_compact_implies_positive_kmin(amp, R, eta0, n):
    N = 128
    x = np.arange(N) / N
    s = ProfileState(n=n, u=1 + amp * np.cos(4 * np.pi * x),
                     chi=np.column_stack([R * np.cos(2 * np.pi * x), R * np.sin(2 * np.pi * x)]))
    geo = profile_geometry(s, grad=False)
    j = int(np.argmin(geo.ratio))
    assume(geo.ratio[j] < 1 / (n - 1) - eta0)
    r = dichotomy_classify(s, j, DichotomyParams(n, eta0), geo=geo)
    kmin = chen_kmin_profile(geo)
    if r.kind == COMPACT:
        assert np.all(kmin > 0)
    elif r.kind == INCONCLUSIVE:
        assert kmin[r.index] <= 0
    else:
        assert geo.ratio[r.index] >= 1 / (n - 1) - eta0


# ---------------------------------------------------------------- report


def test_report_roundtrip():
    rep = EstimateReport()
    rep.set("cSharp", 0.1516)
    rep.set("name", "neck")
    rep.set("count", 3)
    rep.check("harnack", True)
    rep.check("neck", False)
    back = EstimateReport.from_text(rep.to_text())
    assert back.values == rep.values
    assert not back.all_passed
