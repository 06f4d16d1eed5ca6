from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from einglue.errors import ConfigurationError, NumericError
from einglue.geometry import frame_curvature
from einglue.gluing import (
    CutoffSpec,
    GluedMetricSpec,
    cutoff_shape_constants,
    decay_exponent_fit,
    error_sup_norm,
    error_support_check,
    glued_profile,
    negativity_certificate,
    smoothstep,
)
from einglue.profiles import eval_model_profile, solve_cone_angle

# measured once from the frozen smoothstep
K1 = 2.0
K2 = 9.84104230183115


def test_smoothstep_reference_values():
    psi, p1, p2 = smoothstep(np.array([-1.0, 0.0, 0.25, 0.5, 1.0, 2.0]))
    assert psi[0] == 0.0 and psi[1] == 0.0 and psi[4] == 1.0 and psi[5] == 1.0
    assert psi[3] == 0.5 and p1[3] == pytest.approx(2.0, abs=1e-15) and p2[3] == pytest.approx(0.0, abs=1e-12)
    # B(t) / (B(t) + B(1 - t)) with B = exp(-1/t)
    t = 0.25
    B = lambda x: np.exp(-1 / x)
    assert psi[2] == pytest.approx(B(t) / (B(t) + B(1 - t)), rel=1e-14)
    assert np.all(p1[[0, 1, 4, 5]] == 0) and np.all(p2[[0, 1, 4, 5]] == 0)


@given(st.floats(1e-3, 1 - 1e-3))
@settings(max_examples=80, deadline=None)
def test_smoothstep_derivatives_fd(t):
    h = 1e-6
    psi, p1, p2 = smoothstep(t)
    assert 0 <= psi <= 1
    assert (smoothstep(t + h)[0] - smoothstep(t - h)[0]) / (2 * h) == pytest.approx(float(p1), abs=1e-6)
    assert (smoothstep(t + h)[1] - smoothstep(t - h)[1]) / (2 * h) == pytest.approx(float(p2), abs=1e-5)


def test_smoothstep_symmetry():
    t = np.linspace(0, 1, 1001)
    assert np.allclose(smoothstep(t)[0] + smoothstep(1 - t)[0], 1.0, atol=1e-15)


def test_shape_constants_frozen():
    k1, k2 = cutoff_shape_constants()
    assert k1 == pytest.approx(K1, rel=1e-12)
    assert k2 == pytest.approx(K2, rel=1e-9)


@pytest.mark.parametrize("U", [10.0, 1e3, 1e6])
def test_cutoff_derivative_scaling(U):
    cut = CutoffSpec.for_uglue(U)
    u = np.linspace(cut.lower, cut.upper, 20001)
    chi, c1, c2 = cut.chi(u)
    assert np.all((chi >= 0) & (chi <= 1))
    assert np.max(np.abs(c1)) * cut.width == pytest.approx(K1, rel=1e-6)
    assert np.max(np.abs(c2)) * cut.width**2 == pytest.approx(K2, rel=1e-3)
    assert np.max(np.abs(c1)) <= K1 / cut.width * (1 + 1e-12)


def test_cutoff_validation():
    with pytest.raises(ConfigurationError):
        CutoffSpec(2.0, 1.0)


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        GluedMetricSpec.build(4, 2, 1.2)
    spec = GluedMetricSpec.build(4, 2, 100.0)
    assert spec.with_uglue(50.0).cutoff.lower == 25.0
    assert spec.to_dict()["cutoff"]["upper"] == 100.0


@pytest.mark.parametrize("n,d,U", [(4, 2, 100.0), (5, 3, 1e3), (6, 5, 37.5)])
def test_glued_bit_exact_outside_annulus(n, d, U):
    spec = GluedMetricSpec.build(n, d, U)
    prof = glued_profile(spec)
    inner = np.geomspace(spec.u_a, U / 2, 3000)
    outer = np.geomspace(U, 40 * U, 3000)
    got = prof.evaluate(inner)
    ref = eval_model_profile(n, spec.a, inner)
    for x, y in zip(got, ref):
        assert np.array_equal(x, y)
    V, V1, V2 = prof.evaluate(outer)
    assert np.array_equal(V, outer * outer - 1.0)
    assert np.array_equal(V1, 2.0 * outer)
    assert np.all(V2 == 2.0)
    # scalar path agrees
    assert prof.evaluate(U / 4) == eval_model_profile(n, spec.a, U / 4)
    assert prof.evaluate(2 * U) == ((2 * U) ** 2 - 1.0, 4.0 * U, 2.0)


def test_glued_zero_a_hyperbolic():
    spec = GluedMetricSpec.build(4, 1, 30.0)
    u = np.geomspace(1.0, 100.0, 500)
    V, V1, V2 = glued_profile(spec).evaluate(u)
    assert np.array_equal(V, u * u - 1.0)
    assert np.array_equal(V1, 2 * u)


def test_glued_derivatives_inside_annulus():
    spec = GluedMetricSpec.build(4, 3, 10.0)
    prof = glued_profile(spec)
    h = 1e-5
    for u in np.linspace(5.2, 9.8, 17):
        V, V1, V2 = prof.evaluate(u)
        Vp, V1p, _ = prof.evaluate(u + h)
        Vm, V1m, _ = prof.evaluate(u - h)
        assert (Vp - Vm) / (2 * h) == pytest.approx(V1, rel=1e-8)
        assert (V1p - V1m) / (2 * h) == pytest.approx(V2, rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("n,d,U", [(4, 5, 100.0), (5, 2, 50.0), (4, 1, 100.0)])
def test_support(n, d, U):
    chk = error_support_check(GluedMetricSpec.build(n, d, U))
    assert chk.support_ok
    assert chk.inner_max < 1e-10 and chk.outer_max < 1e-10


def test_error_is_continuous_across_annulus_edges():
    spec = GluedMetricSpec.build(4, 2, 100.0)
    prof = glued_profile(spec)
    for edge in (50.0, 100.0):
        e = frame_curvature(prof, 4, np.array([edge * (1 - 1e-4), edge, edge * (1 + 1e-4)])).err_norm(4)
        assert np.max(e) < 1e-12


def test_sup_norm_zero_for_a_zero():
    assert error_sup_norm(GluedMetricSpec.build(4, 1, 100.0)) == 0.0


def test_sup_norm_decay_ratio():
    s2 = error_sup_norm(GluedMetricSpec.build(4, 2, 1e2))
    s3 = error_sup_norm(GluedMetricSpec.build(4, 2, 1e3))
    assert s3 / s2 == pytest.approx(1e-3, rel=1e-6)
    s5a = error_sup_norm(GluedMetricSpec.build(5, 2, 1e2))
    s5b = error_sup_norm(GluedMetricSpec.build(5, 2, 2e2))
    assert s5b / s5a == pytest.approx(2.0**-4, rel=1e-6)


def test_sup_norm_witness_inside_annulus():
    spec = GluedMetricSpec.build(4, 2, 100.0)
    sup, at = error_sup_norm(spec, with_witness=True)
    assert 50.0 < at < 100.0
    assert sup >= error_sup_norm(spec, samples=100) * (1 - 1e-12)
    with pytest.raises(ValueError):
        error_sup_norm(spec, samples=10)


def test_sup_norm_exact_scaling_constant():
    """sup|E| U^(n-1) is U-independent: E depends on u only through u / U."""
    base = GluedMetricSpec.build(6, 3, 1e2)
    consts = [error_sup_norm(base.with_uglue(U)) * U**5 for U in (1e2, 1e3, 1e5)]
    assert np.allclose(consts, consts[0], rtol=1e-8)


@pytest.mark.parametrize("n", [4, 6])
def test_decay_fit(n):
    base = GluedMetricSpec.build(n, 2, 100.0)
    specs = [base.with_uglue(10**p) for p in (2, 2.5, 3, 3.5, 4)]
    assert decay_exponent_fit(specs) == pytest.approx(-(n - 1), abs=0.05 * (n - 1))


def test_decay_fit_rejections():
    base = GluedMetricSpec.build(4, 2, 100.0)
    with pytest.raises(ValueError):
        decay_exponent_fit([base.with_uglue(U) for U in (100, 200, 300)])
    with pytest.raises(ValueError):
        decay_exponent_fit([base.with_uglue(U) for U in (100, 200, 300, 400)])
    zero = GluedMetricSpec.build(4, 1, 100.0)
    with pytest.raises(NumericError):
        decay_exponent_fit([zero.with_uglue(10**p) for p in (2, 2.5, 3, 3.5, 4)])


def test_negativity_examples():
    cert = negativity_certificate(GluedMetricSpec.build(4, 2, 1e3))
    assert cert.max_sec < 0
    assert cert.min_required_Uglue is not None and cert.min_required_Uglue < 1e3
    flat = negativity_certificate(GluedMetricSpec.build(4, 1, 1e3))
    assert flat.max_sec == -1.0 and flat.holds_at_floor


def test_negativity_threshold_monotone_in_d():
    """Measured threshold shrinks (or holds still) as d decreases; frozen from a scan."""
    t = {}
    for d in (2, 3, 5):
        cert = negativity_certificate(GluedMetricSpec.build(4, d, 100.0), samples=400)
        t[d] = cert.min_required_Uglue
    assert t[2] <= t[3] <= t[5]
    assert t[2] == pytest.approx(1.9696, rel=1e-3)
    assert t[5] == pytest.approx(2.0884, rel=1e-3)


def test_negativity_threshold_is_sharp():
    spec = GluedMetricSpec.build(4, 3, 100.0)
    cert = negativity_certificate(spec, samples=400)
    U = cert.min_required_Uglue
    above = negativity_certificate(spec.with_uglue(U * 1.001), samples=400)
    assert above.max_sec < 0
    below = spec.with_uglue(U * 0.99)
    assert negativity_certificate(below, samples=400).max_sec >= 0


def test_negativity_holds_at_floor_higher_dim():
    cert = negativity_certificate(GluedMetricSpec.build(5, 2, 100.0), samples=400)
    assert cert.holds_at_floor and cert.min_required_Uglue is None


def test_negativity_u_cap_check():
    with pytest.raises(ValueError):
        negativity_certificate(GluedMetricSpec.build(4, 2, 100.0), u_cap=50.0)


def test_fiber_curvature_at_u_a_from_glued():
    sol = solve_cone_angle(4, 3)
    spec = GluedMetricSpec.build(4, 3, 100.0)
    fc = frame_curvature(glued_profile(spec), 4, spec.u_a)
    assert fc.k_fiber == pytest.approx(-1 / sol.u_of_d**2, abs=1e-10)
