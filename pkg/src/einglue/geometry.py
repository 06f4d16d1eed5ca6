"""Closed-form curvature of du^2/V + V dtheta^2 + u^2 g_S and radial volumes.

Orthonormal frame: e_u = sqrt(V) d_u, e_theta = V^(-1/2) d_theta, and
u^(-1) times a g_S-orthonormal frame on the fiber (g_S has curvature -1).
In that frame the curvature operator is diagonal on the wedge basis, so the
three plane curvatures below are the extremes of sec at each point, and
Ric + (n-1) g is diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from einglue.errors import DomainError, NumericError
from einglue.profiles import ProfileSpec


@dataclass(frozen=True)
class FrameCurvature:
    k_base: object
    k_mixed: object
    k_fiber: object
    ric_diag: tuple
    err_diag: tuple

    def err_norm(self, n: int):
        """Frame norm of Ric + (n-1) g; fiber entries count n - 2 times."""
        e_u, e_t, e_f = self.err_diag
        return np.sqrt(e_u**2 + e_t**2 + (n - 2) * e_f**2)

    def max_sec(self):
        return np.maximum(np.maximum(self.k_base, self.k_mixed), self.k_fiber)

    def min_sec(self):
        return np.minimum(np.minimum(self.k_base, self.k_mixed), self.k_fiber)


def frame_curvature(profile: ProfileSpec, n: int, u) -> FrameCurvature:
    """Sectional curvatures, frame Ricci and the Einstein error at u.

    u may equal profile.domain_lower: the curvature of the cone-smoothed
    metric extends continuously to the singular locus.
    """
    if n != profile.n:
        raise DomainError(f"profile built for n={profile.n}, asked for n={n}")
    V, V1, V2 = profile.evaluate(u)
    dv, dv1, dv2 = profile.evaluate_deviation(u)
    u = np.asarray(u, dtype=float) if np.ndim(u) else float(u)

    k_base = -V2 / 2.0
    k_mixed = -V1 / (2.0 * u)
    k_fiber = (-1.0 - V) / (u * u)
    ric_u = k_base + (n - 2) * k_mixed
    ric_f = 2.0 * k_mixed + (n - 3) * k_fiber
    # Ric + (n-1) g is linear in V and vanishes for u^2 - 1: use the deviation
    err_u = -dv2 / 2.0 - (n - 2) * dv1 / (2.0 * u)
    err_f = -dv1 / u - (n - 3) * dv / (u * u)
    return FrameCurvature(
        k_base, k_mixed, k_fiber, (ric_u, ric_u, ric_f), (err_u, err_u, err_f)
    )


def warped_frame_curvature(n: int, A, A1, B, B1, B2, C, C1, C2) -> FrameCurvature:
    """Curvature of A(u) du^2 + B(u) dtheta^2 + C(u) g_S, given values and u-derivatives.

    General cohomogeneity-one form; the ansatz is A = 1/V, B = V, C = u^2.
    err_diag here is formed as ric + (n - 1) directly.
    """
    f = np.sqrt(B)
    f_u = B1 / (2 * f)
    f_uu = B2 / (2 * f) - B1**2 / (4 * f**3)
    h = np.sqrt(C)
    h_u = C1 / (2 * h)
    h_uu = C2 / (2 * h) - C1**2 / (4 * h**3)
    # d/dr = A^(-1/2) d/du
    f_rr = f_uu / A - A1 * f_u / (2 * A**2)
    h_rr = h_uu / A - A1 * h_u / (2 * A**2)
    k_base = -f_rr / f
    k_u_fib = -h_rr / h
    k_t_fib = -(f_u * h_u / A) / (f * h)
    k_fiber = (-1.0 - h_u**2 / A) / h**2
    ric_u = k_base + (n - 2) * k_u_fib
    ric_t = k_base + (n - 2) * k_t_fib
    ric_f = k_u_fib + k_t_fib + (n - 3) * k_fiber
    ric = (ric_u, ric_t, ric_f)
    err = tuple(r + (n - 1) for r in ric)
    k_mixed = np.maximum(k_u_fib, k_t_fib)
    return FrameCurvature(k_base, k_mixed, k_fiber, ric, err)


def scan_grid(lo: float, hi: float, samples: int, breakpoints=()) -> np.ndarray:
    """Log-uniform grid on [lo, hi] with ``samples`` points per segment between breakpoints."""
    cuts = [lo] + sorted(b for b in breakpoints if lo < b < hi) + [hi]
    pieces = [np.geomspace(a, b, samples) for a, b in zip(cuts[:-1], cuts[1:])]
    return np.unique(np.concatenate(pieces))


@dataclass(frozen=True)
class ScanResult:
    min_sec: float
    max_sec: float
    max_err_norm: float
    witnesses: dict

    def to_dict(self) -> dict:
        return {
            "min_sec": self.min_sec,
            "max_sec": self.max_sec,
            "max_err_norm": self.max_err_norm,
            "witnesses": dict(self.witnesses),
        }


def curvature_scan(profile: ProfileSpec, n: int, u_range, samples: int = 1000) -> ScanResult:
    lo, hi = map(float, u_range)
    if not hi > lo:
        raise DomainError(f"empty u-range {u_range!r}")
    if samples < 2:
        raise DomainError("need at least 2 samples")
    if lo < profile.domain_lower:
        raise DomainError(f"u-range starts below {profile.domain_lower}")
    u = scan_grid(lo, hi, samples, profile.breakpoints)
    fc = frame_curvature(profile, n, u)
    smax, smin, enorm = fc.max_sec(), fc.min_sec(), fc.err_norm(n)
    i_max, i_min, i_err = int(np.argmax(smax)), int(np.argmin(smin)), int(np.argmax(enorm))
    return ScanResult(
        float(smin[i_min]),
        float(smax[i_max]),
        float(enorm[i_err]),
        {"min_sec": float(u[i_min]), "max_sec": float(u[i_max]), "max_err_norm": float(u[i_err])},
    )


@dataclass(frozen=True)
class VolumeQuery:
    U: float
    n: int
    d: int
    vol_sigma: float

    def __post_init__(self):
        if not self.U > 1:
            raise DomainError("U must exceed 1")
        if self.vol_sigma < 0:
            raise DomainError("vol_sigma must be non-negative")


def region_volume(profile: ProfileSpec, q: VolumeQuery) -> float:
    """Volume of {U/2 < u < U} on the d-fold cover (theta-period 2 pi d).

    The ansatz density is u^(n-2) du dtheta dvol_S, independent of V.
    """
    if q.U / 2 < profile.domain_lower:
        raise DomainError(f"U/2 = {q.U / 2} is below u_a = {profile.domain_lower}")
    if q.vol_sigma == 0:
        return 0.0
    val, err, info = integrate.quad(
        lambda u: u ** (q.n - 2), q.U / 2, q.U, epsabs=0, epsrel=1e-10, limit=200, full_output=1
    )[:3]
    if err > 1e-8 * abs(val):
        raise NumericError(f"volume quadrature did not converge (err {err:g})")
    return 2.0 * math.pi * q.d * q.vol_sigma * val


def volume_constant(n: int, d: int) -> float:
    """C with vol{U/2 < u < U} = C U^(n-1) vol(Sigma) exactly."""
    return 2.0 * math.pi * d * (1.0 - 2.0 ** (1 - n)) / (n - 1)


def volume_cap(q: VolumeQuery, margin: float = 1e-9) -> float:
    return volume_constant(q.n, q.d) * (1.0 + margin) * q.U ** (q.n - 1) * q.vol_sigma
