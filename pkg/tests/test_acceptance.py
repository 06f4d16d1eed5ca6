"""Acceptance criteria, one test each, with their stated tolerances and runtime budgets.

Each test prints a single PASS/FAIL line (collected into the terminal summary).
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from einglue import tensorlab as tl
from einglue.estimates import convergence_table, sqrt_sequence
from einglue.geometry import VolumeQuery, frame_curvature, region_volume, volume_cap
from einglue.gluing import (
    GluedMetricSpec,
    decay_exponent_fit,
    error_support_check,
    glued_profile,
    negativity_certificate,
)
from einglue.profiles import (
    a_max_and_v,
    cone_angle_sequence,
    eval_model_profile,
    hyperbolic_profile,
    model_profile,
    solve_cone_angle,
)

GRID_5 = [(n, d) for n in (4, 5, 6) for d in (2, 3, 5)]


def verdict(k, ok, detail, elapsed, budget=None):
    within = budget is None or elapsed < budget
    status = "PASS" if ok and within else "FAIL"
    timing = f"{elapsed:.1f} s" + (f" / budget {budget:g} s" if budget else "")
    line = f"{status} criterion {k}: {detail} ({timing})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
    assert within, line


def test_criterion_01_einstein_family_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(4, 11):
        for d in range(1, 9):
            sol = solve_cone_angle(n, d)
            p = model_profile(n, sol.a_of_d)
            u = np.geomspace(sol.u_of_d * (1 + 1e-6), 1e3, 4000)
            worst = max(worst, float(np.max(frame_curvature(p, n, u).err_norm(n))))
    verdict(1, worst < 1e-9, f"max |Ric + (n-1) g| = {worst:.2e} < 1e-9", time.perf_counter() - t0, 10)


def test_criterion_02_cone_angle_matching():
    t0 = time.perf_counter()
    worst_res, a1, increasing = 0.0, 0.0, True
    for n in range(4, 11):
        seq = cone_angle_sequence(n, 64)
        worst_res = max(worst_res, max(max(s.residuals) for s in seq))
        a1 = max(a1, abs(seq[0].a_of_d))
        increasing &= bool(np.all(np.diff([s.a_of_d for s in seq]) > 0))
        for d in range(1, 9):
            worst_res = max(worst_res, max(solve_cone_angle(n, d).residuals))
    a64 = solve_cone_angle(4, 64).a_of_d
    a_max = a_max_and_v(4)[0]
    gap = (a_max - a64) / a_max
    ok = worst_res < 1e-10 and a1 < 1e-12 and increasing and 0 < gap < 0.02
    verdict(
        2, ok,
        f"residuals {worst_res:.1e}, |a(1)| {a1:.1e}, increasing {increasing}, a(64) {gap:.2%} below a_max(4)",
        time.perf_counter() - t0, 5,
    )


def _random_configs(count, seed=20240):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.choice([4, 5, 6]))
        kind = rng.choice(["hyperbolic", "model", "glued"], p=[0.2, 0.5, 0.3])
        if kind == "hyperbolic":
            prof = hyperbolic_profile(n)
            u0 = 1.0 + rng.uniform(0.3, 4.0)
        elif kind == "model":
            d = int(rng.integers(1, 9))
            prof = model_profile(n, solve_cone_angle(n, d).a_of_d)
            u0 = prof.domain_lower + rng.uniform(0.2, 4.0)
        else:
            d = int(rng.integers(2, 6))
            U = float(rng.uniform(3.0, 12.0))
            prof = glued_profile(GluedMetricSpec.build(n, d, U))
            u0 = float(rng.uniform(0.5 * U, U))
        out.append((str(kind), n, prof, float(u0), float(rng.uniform(1.2, 1.8))))
    return out


def test_criterion_03_oracle_equivalence():
    t0 = time.perf_counter()
    worst, where = 0.0, None
    configs = _random_configs(54)
    for kind, n, prof, u0, x0 in configs:
        # stencil error grows near the singular locus: keep >= 50 cells away from it
        h = min(0.004, (u0 - prof.domain_lower) / 50)
        fd = tl.fd_frame_richardson(prof, u0, h, x0=x0)
        fc = frame_curvature(prof, n, u0)
        closed = {
            "k_base": fc.k_base, "k_mixed": fc.k_mixed, "k_mixed_theta": fc.k_mixed,
            "k_fiber": fc.k_fiber, "ric_u": fc.ric_diag[0], "ric_theta": fc.ric_diag[1],
            "ric_fiber": fc.ric_diag[2],
        }
        for k in tl.FRAME_KEYS:
            e = abs(fd[k] - closed[k])
            if e > worst:
                worst, where = e, (kind, n, round(u0, 3), k)
    verdict(
        3, worst < 1e-6,
        f"{len(configs)} configurations, worst |FD - closed form| = {worst:.1e} at {where}",
        time.perf_counter() - t0, 300,
    )


def _spacing_ratio(profile, u0):
    """Extrapolated residual at spacings h and h/2 on a small patch: O(h^2) gives ~4."""
    res = []
    for h in (0.04, 0.02):
        grid = tl.ansatz_patch(profile, u0, h, extent=9)
        g = tl.metric_field(grid)
        res.append(tl.linearization_check(grid, g, tl.random_symmetric_field(grid, seed=1)).pointwise_max_residual)
    return res[0] / res[1]


def test_criterion_04_linearization_identity():
    t0 = time.perf_counter()
    parts, ok = [], True
    model = model_profile(4, solve_cone_angle(4, 2).a_of_d)
    for name, prof in (("hyperbolic", hyperbolic_profile(4)), ("model", model)):
        grid = tl.ansatz_patch(prof, 2.0, 0.02)
        assert grid.extents == (17,) * 4
        g = tl.metric_field(grid)
        rep = tl.linearization_check(grid, g, tl.random_symmetric_field(grid, seed=0))
        ratio = _spacing_ratio(prof, 2.0)
        this = 1.7 <= rep.convergence_order <= 2.3 and 3.0 <= ratio <= 5.0
        ok &= this
        parts.append(
            f"{name}: eps-order {rep.convergence_order:.3f}, residual {rep.pointwise_max_residual:.1e}, spacing ratio {ratio:.2f}"
        )
    verdict(4, ok, "; ".join(parts), time.perf_counter() - t0, 300)


def test_criterion_05_decay_law():
    t0 = time.perf_counter()
    worst = 0.0
    for n, d in GRID_5:
        base = GluedMetricSpec.build(n, d, 100.0)
        specs = [base.with_uglue(U) for U in np.logspace(2, 4, 5)]
        slope = decay_exponent_fit(specs)
        worst = max(worst, abs(slope + (n - 1)) / (n - 1))
    verdict(5, worst < 0.05, f"worst relative deviation from -(n-1): {worst:.1e}", time.perf_counter() - t0, 30)


def test_criterion_06_support_and_locality():
    t0 = time.perf_counter()
    ok, worst = True, 0.0
    for n, d in GRID_5:
        for U in np.logspace(2, 4, 5):
            spec = GluedMetricSpec.build(n, d, float(U))
            chk = error_support_check(spec)
            ok &= chk.support_ok
            worst = max(worst, chk.inner_max, chk.outer_max)
            prof = glued_profile(spec)
            inner = np.geomspace(spec.u_a, U / 2, 2000)
            outer = np.geomspace(U, 4 * U, 2000)
            for x, y in zip(prof.evaluate(inner), eval_model_profile(n, spec.a, inner)):
                ok &= bool(np.array_equal(x, y))
            V, V1, V2 = prof.evaluate(outer)
            ok &= bool(np.array_equal(V, outer * outer - 1.0) and np.array_equal(V1, 2 * outer) and np.all(V2 == 2.0))
    verdict(6, ok, f"support ok and bit-exact outside annulus; max |E| outside {worst:.1e}", time.perf_counter() - t0)


def test_criterion_07_negativity():
    t0 = time.perf_counter()
    ok, top, fib = True, -math.inf, 0.0
    for n, d in GRID_5:
        spec = GluedMetricSpec.build(n, d, 1e3)
        cert = negativity_certificate(spec)
        ok &= cert.max_sec < 0
        top = max(top, cert.max_sec)
        k = frame_curvature(glued_profile(spec), n, spec.u_a).k_fiber
        fib = max(fib, abs(k + 1.0 / spec.u_a**2))
    ok &= fib < 1e-10
    verdict(7, ok, f"largest max_sec {top:.3f} < 0; fiber curvature error at u_a {fib:.1e}", time.perf_counter() - t0)


def test_criterion_08_volume_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst, capped = 0.0, True
    for _ in range(200):
        n, d = int(rng.integers(4, 11)), int(rng.integers(1, 9))
        U = float(10 ** rng.uniform(0.4, 5))
        vol = float(rng.uniform(0, 10))
        sol = solve_cone_angle(n, d)
        if U / 2 < sol.u_of_d:
            continue
        q = VolumeQuery(U, n, d, vol)
        got = region_volume(model_profile(n, sol.a_of_d), q)
        exact = 2 * math.pi * d * vol * (U ** (n - 1) - (U / 2) ** (n - 1)) / (n - 1)
        if exact > 0:
            worst = max(worst, abs(got - exact) / exact)
        capped &= got <= volume_cap(q)
    verdict(8, worst < 1e-9 and capped, f"max relative error {worst:.1e}, cap respected {capped}", time.perf_counter() - t0)


def test_criterion_09_l2_convergence():
    t0 = time.perf_counter()
    table = convergence_table(sqrt_sequence(4, 2, range(25, 401)))
    b = np.array([r.log_l2_bound for r in table.rows])
    decreasing = bool(np.all(np.diff(b[1:]) < 0))
    ratio_log10 = (b[-1] - b[0]) / math.log(10)
    valid = all(r.bound_holds() for r in table.rows)
    ok = decreasing and ratio_log10 < -3 and valid
    verdict(
        9, ok,
        f"{len(b)} rows, decreasing {decreasing}, final/first = 10^{ratio_log10:.1f}, numeric <= 1.01 bound {valid}",
        time.perf_counter() - t0, 60,
    )


def test_criterion_10_kernel_direction():
    t0 = time.perf_counter()
    orders = []
    for n, d in [(4, 2), (4, 5), (5, 3), (6, 2)]:
        sol = solve_cone_angle(n, d)
        u = np.geomspace(2 * sol.u_of_d, 100.0, 300)
        orders.append(tl.kernel_direction_check(n, sol.a_of_d, u).convergence_order)
    ok = all(1.7 <= o <= 2.3 for o in orders)
    verdict(10, ok, "fitted eps-orders " + ", ".join(f"{o:.3f}" for o in orders), time.perf_counter() - t0, 60)
