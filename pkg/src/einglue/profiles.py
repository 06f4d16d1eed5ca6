"""Radial profiles V(u) for metrics du^2/V + V dtheta^2 + u^2 g_S.

The Einstein family is V_a(u) = u^2 - 1 + a u^(3-n).  Its largest zero u_a
carries a cone singularity of angle pi * V_a'(u_a); picking a = a(d) makes
the angle 2 pi / d, which is smooth on the d-fold branched cover.

Every profile is stored as a deviation dV from the hyperbolic profile
u^2 - 1, so that curvature errors can be formed without cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from einglue.errors import DomainError, NoPositiveRootError, SolverError

SOLVE_TOL = 1e-10
IDENTITY_TOL = 1e-12
COND_LIMIT = 1e12


def _check_dim(n: int) -> None:
    if int(n) != n or n < 4:
        raise DomainError(f"dimension must be an integer >= 4, got {n!r}")


def _as_output(u, *vals):
    if np.ndim(u) == 0:
        return tuple(float(v) for v in vals)
    return vals


def model_deviation(n: int, a: float, u):
    """(w, w', w'') for w = a u^(3-n)."""
    u = np.asarray(u, dtype=float)
    w = a * u ** (3 - n)
    w1 = (3 - n) * a * u ** (2 - n)
    w2 = (3 - n) * (2 - n) * a * u ** (1 - n)
    return w, w1, w2


def eval_model_profile(n: int, a: float, u):
    """Return (V, V', V'') of V_a(u) = u^2 - 1 + a u^(3-n).

    Accepts scalars or arrays for ``u``.
    """
    _check_dim(n)
    uu = np.asarray(u, dtype=float)
    if np.any(uu <= 0):
        raise DomainError("u must be positive")
    w, w1, w2 = model_deviation(n, a, uu)
    return _as_output(u, uu * uu - 1.0 + w, 2.0 * uu + w1, 2.0 + w2)


@dataclass(frozen=True)
class ProfileSpec:
    """A radial profile, stored as its deviation from u^2 - 1.

    ``deviation(u)`` returns (dV, dV', dV'') with V = u^2 - 1 + dV.
    ``breakpoints`` lists u-values where the profile changes character
    (the gluing annulus); scans refine between them.
    """

    kind: str
    n: int
    a: float
    domain_lower: float
    deviation: Callable = field(repr=False, compare=False)
    breakpoints: tuple[float, ...] = ()
    params: dict = field(default_factory=dict, compare=False)

    def _check(self, u) -> np.ndarray:
        uu = np.asarray(u, dtype=float)
        if np.any(uu < self.domain_lower) or np.any(uu <= 0):
            raise DomainError(
                f"u must be >= {self.domain_lower} for the {self.kind} profile"
            )
        return uu

    def evaluate(self, u):
        uu = self._check(u)
        dv, dv1, dv2 = self.deviation(uu)
        return _as_output(u, uu * uu - 1.0 + dv, 2.0 * uu + dv1, 2.0 + dv2)

    def evaluate_deviation(self, u):
        uu = self._check(u)
        return _as_output(u, *self.deviation(uu))


def _zero_deviation(u):
    z = np.zeros_like(np.asarray(u, dtype=float))
    return z, z.copy(), z.copy()


def hyperbolic_profile(n: int) -> ProfileSpec:
    _check_dim(n)
    return ProfileSpec("hyperbolic", n, 0.0, 1.0, _zero_deviation)


def model_profile(n: int, a: float) -> ProfileSpec:
    _check_dim(n)
    u_a = largest_root(n, a)

    def dev(u):
        return model_deviation(n, a, u)

    return ProfileSpec("model", n, float(a), u_a, dev)


def a_max_and_v(n: int) -> tuple[float, float]:
    """Double-root point of the family: V_{a_max}(v) = V'_{a_max}(v) = 0."""
    _check_dim(n)
    v = math.sqrt((n - 3) / (n - 1))
    a_max = 2.0 * v ** (n - 1) / (n - 3)
    return a_max, v


def largest_root(n: int, a: float) -> float:
    """Largest zero u_a of V_a; bracketed on [v(n), 2 + |a|] then Newton-polished."""
    _check_dim(n)
    a_max, v = a_max_and_v(n)
    if a > a_max * (1.0 + 4e-15):
        raise NoPositiveRootError(f"a = {a!r} exceeds a_max({n}) = {a_max!r}")

    def V(u):
        return u * u - 1.0 + a * u ** (3 - n)

    def dV(u):
        return 2.0 * u + (3 - n) * a * u ** (2 - n)

    if V(v) >= -IDENTITY_TOL:
        # a within rounding of a_max: the double root itself
        return v
    hi = 2.0 + abs(a)
    u = optimize.brentq(V, v, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    for _ in range(3):
        slope = dV(u)
        if slope <= 0:
            break
        step = V(u) / slope
        if abs(V(u - step)) >= abs(V(u)):
            break
        u -= step
    return float(u)


def cone_angle(n: int, a: float) -> float:
    """Cone angle pi * V_a'(u_a) of g_a along the singular locus."""
    u_a = largest_root(n, a)
    return math.pi * (2.0 * u_a + (3 - n) * a * u_a ** (2 - n))


# -- geometric oracle -------------------------------------------------------


def circle_ratio(n: int, a: float, offset: float, inner: float = 0.0):
    """Circumference/radius of the metric circle {u = u_a + offset}.

    The radius is the (u, theta)-plane distance from {u = u_a + inner}.
    With inner = 0 this is the distance to the singular locus itself.
    Returns (radius, circumference, ratio).
    """
    u_a = largest_root(n, a)
    c = a * u_a ** (3 - n)

    def W(s):
        # V(u_a + s) with V(u_a) = 0 removed exactly
        return s * (2.0 * u_a + s) + c * math.expm1((3 - n) * math.log1p(s / u_a))

    if inner > 0.0:
        radius, _ = integrate.quad(
            lambda s: 1.0 / math.sqrt(W(s)), inner, offset, epsabs=0, epsrel=1e-10, limit=400
        )
    else:
        # u = u_a + t^2 removes the inverse square-root singularity
        radius, _ = integrate.quad(
            lambda t: 2.0 * t / math.sqrt(W(t * t)),
            0.0, math.sqrt(offset), epsabs=0, epsrel=1e-12, limit=200,
        )
    circumference = 2.0 * math.pi * math.sqrt(W(offset))
    return radius, circumference, circumference / radius


def cone_angle_geometric(n: int, a: float, offsets=None) -> float:
    """Cone angle from circumference/radius of small circles, extrapolated to radius 0.

    ratio(r) = angle + c2 r^2 + c4 r^4 + ...; fitted in r^2.
    """
    u_a = largest_root(n, a)
    if offsets is None:
        # the linear regime of V shrinks like V'/V'' near the double root
        _, dV, d2V = eval_model_profile(n, a, u_a)
        scale = min(u_a, abs(dV) / abs(d2V)) if d2V else u_a
        offsets = scale * np.array([1e-4, 2e-4, 4e-4, 8e-4, 1.6e-3])
    radii, ratios = [], []
    for off in offsets:
        r, _, q = circle_ratio(n, a, float(off))
        radii.append(r)
        ratios.append(q)
    coef = np.polyfit(np.square(radii), ratios, 2)
    return float(coef[-1])


# -- cone-angle matching ----------------------------------------------------


@dataclass(frozen=True)
class ConeAngleSolution:
    n: int
    d: int
    a_of_d: float
    u_of_d: float
    residuals: tuple[float, float]
    method: str = "newton"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "a": self.a_of_d,
            "u_a": self.u_of_d,
            "residuals": list(self.residuals),
            "method": self.method,
        }


def _residuals(n: int, a: float, u: float, slope: float) -> tuple[float, float]:
    V = u * u - 1.0 + a * u ** (3 - n)
    dV = 2.0 * u + (3 - n) * a * u ** (2 - n)
    return float(abs(V)), float(abs(dV - slope))


def _newton_step_solve(n, slope, a, u, max_iter=60):
    for it in range(max_iter):
        V = u * u - 1.0 + a * u ** (3 - n)
        dV = 2.0 * u + (3 - n) * a * u ** (2 - n)
        d2V = 2.0 + (3 - n) * (2 - n) * a * u ** (1 - n)
        F = np.array([V, dV - slope])
        J = np.array([[u ** (3 - n), dV], [(3 - n) * u ** (2 - n), d2V]])
        if np.linalg.cond(J) > COND_LIMIT:
            return None, (a, u)
        da, du = np.linalg.solve(J, -F)
        a, u = a + da, u + du
        if u <= 0:
            raise SolverError("Newton iterate left u > 0", last_iterate=(a, u))
        if abs(da) <= 1e-16 * max(1.0, abs(a)) and abs(du) <= 1e-16 * u:
            break
    return (a, u), (a, u)


def _solve_on_zero_curve(n: int, slope: float) -> tuple[float, float]:
    """Fallback in the (u, angle) parametrization: a(u) = (1 - u^2) u^(n-3) keeps V = 0."""
    _, v = a_max_and_v(n)

    def g(u):
        return 2.0 * u + (3 - n) * (1.0 - u * u) / u - slope

    u = optimize.brentq(g, v, 1.0, xtol=1e-15, rtol=1e-15, maxiter=200)
    return (1.0 - u * u) * u ** (n - 3), u


def _continuation_path(d: int) -> list[int]:
    path = list(range(1, min(d, 64) + 1))
    k = path[-1]
    while k < d:
        k = min(2 * k, d)
        path.append(k)
    return path


def _solve_slope(n: int, d: int, seed: tuple[float, float]) -> ConeAngleSolution:
    slope = 2.0 / d
    sol, last = _newton_step_solve(n, slope, *seed)
    method = "newton"
    if sol is None:
        sol = _solve_on_zero_curve(n, slope)
        method = "zero-curve"
    a, u = sol
    res = _residuals(n, a, u, slope)
    a_max, _ = a_max_and_v(n)
    if max(res) >= SOLVE_TOL or not a < a_max:
        raise SolverError(
            f"cone-angle solve for n={n}, d={d} did not converge (residuals {res})",
            last_iterate=last,
        )
    return ConeAngleSolution(n, d, float(a), float(u), res, method)


def cone_angle_sequence(n: int, d_max: int) -> list[ConeAngleSolution]:
    """Solutions for d = 1, ..., d_max by continuation in d."""
    _check_dim(n)
    out = []
    seed = (0.0, 1.0)
    for d in range(1, d_max + 1):
        sol = _solve_slope(n, d, seed)
        seed = (sol.a_of_d, sol.u_of_d)
        out.append(sol)
    return out


def solve_cone_angle(n: int, d: int) -> ConeAngleSolution:
    """Find a(d) with cone angle 2 pi / d.

    Newton on (V_a(u), V_a'(u) - 2/d) = 0, continued from (a, u) = (0, 1)
    through d = 1, 2, ..., 64 and then doubling up to d.
    """
    _check_dim(n)
    if int(d) != d or d < 1:
        raise DomainError(f"branch degree must be an integer >= 1, got {d!r}")
    d = int(d)
    seed = (0.0, 1.0)
    sol = None
    for k in _continuation_path(d):
        sol = _solve_slope(n, k, seed)
        seed = (sol.a_of_d, sol.u_of_d)
    return sol
