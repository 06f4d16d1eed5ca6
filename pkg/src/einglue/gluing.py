"""Glued profile V = u^2 - 1 + a u^(3-n) chi(u) and its error/curvature checks.

chi is 1 for u <= U_glue/2, 0 for u >= U_glue, and in between follows the
exponential smoothstep psi(t) = B(t) / (B(t) + B(1 - t)), B(t) = exp(-1/t).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import expit

from einglue.errors import ConfigurationError, NumericError
from einglue.geometry import curvature_scan, frame_curvature
from einglue.profiles import ProfileSpec, model_deviation, solve_cone_angle

SUPPORT_TOL = 1e-10


def smoothstep(t):
    """psi, psi', psi'' of the exponential smoothstep, exact 0/1 outside (0, 1)."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    ti = np.where(inside, t, 0.5)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        s = 1.0 / (1.0 - ti) - 1.0 / ti
        sig = expit(s)
        bump = expit(s) * expit(-s)
        s1 = 1.0 / (1.0 - ti) ** 2 + 1.0 / ti**2
        s2 = 2.0 / (1.0 - ti) ** 3 - 2.0 / ti**3
        p1 = np.where(bump > 0, bump * s1, 0.0)
        p2 = np.where(bump > 0, bump * (1.0 - 2.0 * sig) * s1**2 + bump * s2, 0.0)
    psi = np.where(inside, sig, np.where(t >= 1, 1.0, 0.0))
    return psi, np.where(inside, p1, 0.0), np.where(inside, p2, 0.0)


@dataclass(frozen=True)
class CutoffSpec:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.upper > self.lower > 0:
            raise ConfigurationError("cutoff needs 0 < lower < upper")

    @classmethod
    def for_uglue(cls, U_glue: float) -> "CutoffSpec":
        return cls(U_glue / 2.0, float(U_glue))

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def chi(self, u):
        """chi, chi', chi'' at u."""
        L = self.width
        psi, p1, p2 = smoothstep((self.upper - np.asarray(u, dtype=float)) / L)
        return psi, -p1 / L, p2 / L**2


def cutoff_shape_constants() -> tuple[float, float]:
    """K1 = sup|psi'|, K2 = sup|psi''| so that |chi^(k)| <= K_k / width^k."""
    t = np.linspace(1e-3, 1 - 1e-3, 20001)
    out = []
    for k in (1, 2):
        vals = np.abs(smoothstep(t)[k])
        i = int(np.argmax(vals))
        res = optimize.minimize_scalar(
            lambda x: -abs(float(smoothstep(x)[k])),
            bounds=(t[max(i - 1, 0)], t[min(i + 1, t.size - 1)]),
            method="bounded",
            options={"xatol": 1e-13},
        )
        out.append(max(float(vals[i]), -float(res.fun)))
    return out[0], out[1]


@dataclass(frozen=True)
class GluedMetricSpec:
    n: int
    d: int
    a: float
    u_a: float
    U_glue: float
    cutoff: CutoffSpec

    def __post_init__(self):
        if not self.U_glue / 2.0 > self.u_a:
            raise ConfigurationError(
                f"U_glue/2 = {self.U_glue / 2} must exceed u_a = {self.u_a}"
            )

    @classmethod
    def build(cls, n: int, d: int, U_glue: float) -> "GluedMetricSpec":
        sol = solve_cone_angle(n, d)
        return cls(n, d, sol.a_of_d, sol.u_of_d, float(U_glue), CutoffSpec.for_uglue(U_glue))

    def with_uglue(self, U_glue: float) -> "GluedMetricSpec":
        return GluedMetricSpec(
            self.n, self.d, self.a, self.u_a, float(U_glue), CutoffSpec.for_uglue(U_glue)
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "a": self.a,
            "u_a": self.u_a,
            "U_glue": self.U_glue,
            "cutoff": {"lower": self.cutoff.lower, "upper": self.cutoff.upper, "shape": "exp-smoothstep"},
        }


def glued_profile(spec: GluedMetricSpec) -> ProfileSpec:
    n, a, cut = spec.n, spec.a, spec.cutoff

    def dev(u):
        u = np.asarray(u, dtype=float)
        w, w1, w2 = model_deviation(n, a, u)
        if np.all(u <= cut.lower):
            return w, w1, w2
        chi, c1, c2 = cut.chi(u)
        g0 = w * chi
        g1 = w1 * chi + w * c1
        g2 = w2 * chi + 2.0 * w1 * c1 + w * c2
        # outside the annulus, reproduce the model / hyperbolic terms bit for bit
        inner, outer = u <= cut.lower, u >= cut.upper
        g0 = np.where(inner, w, np.where(outer, 0.0, g0))
        g1 = np.where(inner, w1, np.where(outer, 0.0, g1))
        g2 = np.where(inner, w2, np.where(outer, 0.0, g2))
        return g0, g1, g2

    return ProfileSpec(
        "glued", n, a, spec.u_a, dev, (cut.lower, cut.upper), {"U_glue": spec.U_glue, "d": spec.d}
    )


def _err_norm(profile: ProfileSpec, u):
    return frame_curvature(profile, profile.n, u).err_norm(profile.n)


@dataclass(frozen=True)
class SupportCheck:
    support_ok: bool
    inner_max: float
    inner_witness: float
    outer_max: float
    outer_witness: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def error_support_check(spec: GluedMetricSpec, samples: int = 2000) -> SupportCheck:
    """|E| must vanish on [u_a, U_glue/2] and [U_glue, 4 U_glue]."""
    prof = glued_profile(spec)
    inner_u = np.geomspace(spec.u_a, spec.cutoff.lower, samples)
    outer_u = np.geomspace(spec.cutoff.upper, 4.0 * spec.cutoff.upper, samples)
    e_in, e_out = _err_norm(prof, inner_u), _err_norm(prof, outer_u)
    i, j = int(np.argmax(e_in)), int(np.argmax(e_out))
    ok = bool(e_in[i] < SUPPORT_TOL and e_out[j] < SUPPORT_TOL)
    return SupportCheck(ok, float(e_in[i]), float(inner_u[i]), float(e_out[j]), float(outer_u[j]))


def error_sup_norm(spec: GluedMetricSpec, samples: int = 1000, with_witness: bool = False):
    """max |Ric + (n-1) g| over the gluing annulus, sampled log-uniformly then refined."""
    if samples < 100:
        raise ValueError("error_sup_norm needs at least 100 samples")
    prof = glued_profile(spec)
    lo, hi = spec.cutoff.lower, spec.cutoff.upper
    u = np.geomspace(lo, hi, samples)
    e = _err_norm(prof, u)
    i = int(np.argmax(e))
    best, at = float(e[i]), float(u[i])
    if best > 0:
        res = optimize.minimize_scalar(
            lambda x: -float(_err_norm(prof, x)),
            bounds=(u[max(i - 1, 0)], u[min(i + 1, samples - 1)]),
            method="bounded",
            options={"xatol": 1e-12 * hi},
        )
        if -res.fun > best:
            best, at = float(-res.fun), float(res.x)
    return (best, at) if with_witness else best


def decay_exponent_fit(specs, samples: int = 1000) -> float:
    """Least-squares slope of log sup|E| against log U_glue."""
    if len(specs) < 4:
        raise ValueError("need at least 4 values of U_glue")
    U = np.array([s.U_glue for s in specs], dtype=float)
    if np.log10(U.max() / U.min()) < 2:
        raise ValueError("U_glue values must span at least two decades")
    sup = np.array([error_sup_norm(s, samples) for s in specs])
    if not np.all(np.isfinite(sup)) or np.any(sup <= 0):
        raise NumericError("degenerate decay fit: sup|E| vanishes for some U_glue")
    x, y = np.log(U), np.log(sup)
    if np.var(y) == 0 or np.var(x) == 0:
        raise NumericError("degenerate decay fit: zero variance")
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


@dataclass(frozen=True)
class NegativityCertificate:
    max_sec: float
    witness_u: float
    min_required_Uglue: float | None
    holds_at_floor: bool
    admissible_floor: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _max_sec(spec: GluedMetricSpec, u_cap: float, samples: int) -> tuple[float, float]:
    scan = curvature_scan(glued_profile(spec), spec.n, (spec.u_a, u_cap), samples)
    return scan.max_sec, scan.witnesses["max_sec"]


def negativity_certificate(
    spec: GluedMetricSpec, u_cap: float | None = None, samples: int = 1000, rel_tol: float = 1e-6
) -> NegativityCertificate:
    """Upper sectional-curvature bound of the glued metric on [u_a, u_cap].

    When the bound is negative, bisect downward in U_glue for the smallest
    value that keeps it negative (assumes a single crossing).  Admissible
    U_glue start at 2 u_a; if negativity survives down to there, there is
    no threshold and min_required_Uglue is None.
    """
    if u_cap is None:
        u_cap = 4.0 * spec.U_glue
    if u_cap < spec.U_glue:
        raise ValueError("u_cap must be >= U_glue")
    top, where = _max_sec(spec, u_cap, samples)
    if not top < 0:
        return NegativityCertificate(top, where, None, False)
    if spec.a == 0:
        return NegativityCertificate(top, where, None, True)

    def negative(U):
        return _max_sec(spec.with_uglue(U), 2.0 * U, samples)[0] < 0

    floor = 2.0 * spec.u_a * (1.0 + 1e-9)
    if negative(floor):
        return NegativityCertificate(top, where, None, True, floor)
    lo, hi = floor, spec.U_glue
    while hi - lo > rel_tol * hi:
        mid = np.sqrt(lo * hi)
        if negative(mid):
            hi = mid
        else:
            lo = mid
    return NegativityCertificate(top, where, float(hi), False, floor)

