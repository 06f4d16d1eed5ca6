"""Finite-difference tensor calculus on coordinate patches.

Fields are numpy arrays of shape ``grid.extents + components``; every
derivative is a second-order central difference that writes NaN into the
boundary layer it cannot reach, so nested operators shrink the valid core
automatically and reports are taken over finite entries only.

Index conventions (coordinates):
    dT[..., k, i, j]     = d_k T_ij
    Gamma[..., a, b, c]  = Gamma^a_bc
    R[..., a, b, c, d]   = R^a_bcd,  R(d_c, d_d) d_b = R^a_bcd d_a
    Ric[..., b, d]       = R^a_bad

For the ansatz chart the coordinates are (u, theta, x_1, ..., x_{n-2}) and
g_S = (dx_1^2 + ... + dx_{n-2}^2) / x_{n-2}^2.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from einglue.errors import DomainError
from einglue.geometry import warped_frame_curvature
from einglue.profiles import ProfileSpec, model_deviation

STENCIL_MARGIN = 3
DEFAULT_EXTENTS = {4: 17, 5: 9, 6: 6}


@dataclass(frozen=True)
class PatchGrid:
    dim: int
    origin: tuple
    spacing: tuple
    extents: tuple
    chart: str = "flat"
    profile: ProfileSpec | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not (len(self.origin) == len(self.spacing) == len(self.extents) == self.dim):
            raise DomainError("origin, spacing and extents must have one entry per axis")
        if any(h <= 0 for h in self.spacing):
            raise DomainError("grid spacing must be positive")
        if any(N < 3 for N in self.extents):
            raise DomainError("each axis needs at least 3 points for central differences")

    @property
    def shape(self) -> tuple:
        return tuple(self.extents)

    def axes(self) -> list[np.ndarray]:
        return [o + h * np.arange(N) for o, h, N in zip(self.origin, self.spacing, self.extents)]

    def coords(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def center_index(self) -> tuple:
        return tuple(N // 2 for N in self.extents)

    def refined(self, factor: int = 2) -> "PatchGrid":
        """Same node count and center, spacing divided by ``factor``."""
        c = [o + h * (N // 2) for o, h, N in zip(self.origin, self.spacing, self.extents)]
        sp = tuple(h / factor for h in self.spacing)
        org = tuple(ci - hi * (N // 2) for ci, hi, N in zip(c, sp, self.extents))
        return PatchGrid(self.dim, org, sp, self.extents, self.chart, self.profile)


def flat_patch(dim: int, spacing: float = 0.1, extent: int = 9) -> PatchGrid:
    return PatchGrid(dim, (0.0,) * dim, (spacing,) * dim, (extent,) * dim, "flat")


def ansatz_patch(
    profile: ProfileSpec,
    u0: float,
    spacing: float,
    extent: int | None = None,
    x0: float = 1.5,
    theta0: float = 0.0,
) -> PatchGrid:
    """Patch of the ansatz metric centred at (u0, theta0, 0, ..., 0, x0)."""
    n = profile.n
    N = DEFAULT_EXTENTS.get(n, 5) if extent is None else extent
    half = (N // 2) * spacing
    cen = [u0, theta0] + [0.0] * (n - 3) + [x0]
    origin = tuple(c - half for c in cen)
    margin = STENCIL_MARGIN * spacing
    if u0 - half - margin <= profile.domain_lower:
        raise DomainError(
            f"patch reaches u = {u0 - half:.6g}, within {STENCIL_MARGIN} cells of u_a = {profile.domain_lower:.6g}"
        )
    if x0 - half - margin <= 0:
        raise DomainError("patch reaches the boundary x_{n-2} = 0 of upper half-space")
    return PatchGrid(n, origin, (spacing,) * n, (N,) * n, "ansatz", profile)


@dataclass(frozen=True)
class PatchField:
    """A tensor field on a patch.  rank: '0', '01' (covector), '02', '12' (Christoffel), '13'."""

    rank: str
    values: np.ndarray
    grid: PatchGrid = field(repr=False)

    def __post_init__(self):
        ncomp = {"0": 0, "01": 1, "02": 2, "12": 3, "13": 4}
        if self.rank not in ncomp:
            raise TypeError(f"unknown field rank {self.rank!r}")
        want = self.grid.shape + (self.grid.dim,) * ncomp[self.rank]
        if self.values.shape != want:
            raise TypeError(f"rank {self.rank} field needs shape {want}, got {self.values.shape}")
        if self.rank == "02":
            v = self.values
            same = (v == np.swapaxes(v, -1, -2)) | (np.isnan(v) & np.isnan(np.swapaxes(v, -1, -2)))
            if not np.all(same):
                raise ValueError("(0,2) field is not exactly symmetric")

    @classmethod
    def symmetric(cls, values: np.ndarray, grid: PatchGrid) -> "PatchField":
        return cls("02", 0.5 * (values + np.swapaxes(values, -1, -2)), grid)

    def at(self, index) -> np.ndarray:
        return self.values[tuple(index)]

    def core_max_abs(self) -> float:
        v = np.abs(self.values)
        return float(np.nanmax(v)) if np.any(np.isfinite(v)) else float("nan")

    def __add__(self, other: "PatchField") -> "PatchField":
        _same(self, other)
        return PatchField(self.rank, self.values + other.values, self.grid)

    def __sub__(self, other: "PatchField") -> "PatchField":
        _same(self, other)
        return PatchField(self.rank, self.values - other.values, self.grid)

    def scaled(self, c: float) -> "PatchField":
        return PatchField(self.rank, c * self.values, self.grid)


def _same(f: PatchField, g: PatchField) -> None:
    if f.rank != g.rank or f.values.shape != g.values.shape:
        raise TypeError(f"field mismatch: {f.rank} vs {g.rank}")


def _require(f: PatchField, rank: str, what: str) -> None:
    if f.rank != rank:
        raise TypeError(f"{what} expects a rank-{rank} field, got rank {f.rank}")


# -- metrics on patches -----------------------------------------------------


def metric_field(grid: PatchGrid) -> PatchField:
    n = grid.dim
    g = np.zeros(grid.shape + (n, n))
    if grid.chart == "flat":
        g[...] = np.eye(n)
        return PatchField("02", g, grid)
    if grid.chart != "ansatz":
        raise DomainError(f"no metric for chart {grid.chart!r}")
    X = grid.coords()
    u, x_last = X[0], X[-1]
    V, _, _ = grid.profile.evaluate(u)
    g[..., 0, 0] = 1.0 / V
    g[..., 1, 1] = V
    fib = u * u / (x_last * x_last)
    for i in range(2, n):
        g[..., i, i] = fib
    return PatchField("02", g, grid)


def model_family_tangent(grid: PatchGrid) -> PatchField:
    """d/da of g_a on an ansatz patch of a model profile: diag(-w/V^2, w, 0, ...), w = u^(3-n)."""
    n = grid.dim
    u = grid.coords()[0]
    V, _, _ = grid.profile.evaluate(u)
    w = u ** (3 - n)
    k = np.zeros(grid.shape + (n, n))
    k[..., 0, 0] = -w / V**2
    k[..., 1, 1] = w
    return PatchField("02", k, grid)


def random_symmetric_field(
    grid: PatchGrid, seed: int = 0, amplitude: float = 0.1, modes: int = 3, length: float = 1.0
) -> PatchField:
    """Smooth symmetric (0,2) field: plane waves of wavelength >= 2 * length in absolute coordinates.

    Components are scaled by the metric diagonal at the patch centre, and the
    same seed gives the same field on any patch, so refinements compare like with like.
    """
    rng = np.random.default_rng(seed)
    n = grid.dim
    X = grid.coords()
    c = grid.center_index()
    scale = np.sqrt(np.abs(np.diag(metric_field(grid).at(c)))) if grid.chart == "ansatz" else np.ones(n)
    h = np.zeros(grid.shape + (n, n))
    for i in range(n):
        for j in range(i, n):
            comp = np.zeros(grid.shape)
            for _ in range(modes):
                k = rng.uniform(-1.0, 1.0, n) * np.pi / length
                phase = rng.uniform(0, 2 * np.pi)
                comp += rng.normal() * np.sin(sum(k[m] * X[m] for m in range(n)) + phase)
            comp *= amplitude * scale[i] * scale[j] / np.sqrt(modes)
            h[..., i, j] = comp
            h[..., j, i] = comp
    return PatchField("02", h, grid)


def scalar_times(f: np.ndarray, g: PatchField) -> PatchField:
    return PatchField("02", f[..., None, None] * g.values, g.grid)


# -- difference operators ---------------------------------------------------


def partial(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    out = np.full_like(values, np.nan)
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    dst[axis] = slice(1, -1)
    hi, lo = list(src), list(src)
    hi[axis] = slice(2, None)
    lo[axis] = slice(None, -2)
    out[tuple(dst)] = (values[tuple(hi)] - values[tuple(lo)]) / (2.0 * h)
    return out


def gradient(values: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """Derivative index inserted right after the grid axes."""
    nd = len(grid.shape)
    parts = [partial(values, k, grid.spacing[k]) for k in range(grid.dim)]
    return np.stack(parts, axis=nd)


def inverse(g: np.ndarray) -> np.ndarray:
    return np.linalg.inv(g)


def christoffel_from(g: np.ndarray, grid: PatchGrid, ginv: np.ndarray | None = None) -> np.ndarray:
    if ginv is None:
        ginv = inverse(g)
    dg = gradient(g, grid)
    lower = 0.5 * (
        np.einsum("...bdc->...dbc", dg) + np.einsum("...cdb->...dbc", dg) - dg
    )
    return np.einsum("...ad,...dbc->...abc", ginv, lower)


def riemann_from(gamma: np.ndarray, grid: PatchGrid) -> np.ndarray:
    dgam = gradient(gamma, grid)
    R = np.einsum("...cadb->...abcd", dgam) - np.einsum("...dacb->...abcd", dgam)
    R += np.einsum("...ace,...edb->...abcd", gamma, gamma)
    R -= np.einsum("...ade,...ecb->...abcd", gamma, gamma)
    return R


def ricci_from(gamma: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """Ric_bd = R^a_bad, contracted before storing the full Riemann tensor."""
    dgam = gradient(gamma, grid)
    ric = np.einsum("...aadb->...bd", dgam) - np.einsum("...daab->...bd", dgam)
    ric += np.einsum("...aae,...edb->...bd", gamma, gamma)
    ric -= np.einsum("...ade,...eab->...bd", gamma, gamma)
    return 0.5 * (ric + np.swapaxes(ric, -1, -2))


def cov_deriv_covector(w: np.ndarray, gamma: np.ndarray, grid: PatchGrid) -> np.ndarray:
    return gradient(w, grid) - np.einsum("...lij,...l->...ij", gamma, w)


def cov_deriv_02(h: np.ndarray, gamma: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """(nabla h)[..., k, i, j] = nabla_k h_ij."""
    dh = gradient(h, grid)
    dh -= np.einsum("...lki,...lj->...kij", gamma, h)
    dh -= np.einsum("...lkj,...il->...kij", gamma, h)
    return dh


def cov_deriv_03(T: np.ndarray, gamma: np.ndarray, grid: PatchGrid) -> np.ndarray:
    dT = gradient(T, grid)
    dT -= np.einsum("...lmk,...lij->...mkij", gamma, T)
    dT -= np.einsum("...lmi,...klj->...mkij", gamma, T)
    dT -= np.einsum("...lmj,...kil->...mkij", gamma, T)
    return dT


# -- public operators -------------------------------------------------------


@dataclass(frozen=True)
class CurvatureFields:
    christoffel: PatchField
    riemann: PatchField
    ricci: PatchField


def curvature_fd(grid: PatchGrid, metric: PatchField | None = None) -> CurvatureFields:
    if any(N < 5 for N in grid.extents):
        raise DomainError("curvature needs at least 5 points per axis (two nested stencils)")
    g = metric_field(grid) if metric is None else metric
    _require(g, "02", "curvature_fd")
    gam = christoffel_from(g.values, grid)
    R = riemann_from(gam, grid)
    ric = np.einsum("...abad->...bd", R)
    return CurvatureFields(
        PatchField("12", gam, grid),
        PatchField("13", R, grid),
        PatchField.symmetric(ric, grid),
    )


def lowered_riemann(R: np.ndarray, g: np.ndarray) -> np.ndarray:
    """R_abcd = g_ae R^e_bcd."""
    return np.einsum("...ae,...ebcd->...abcd", g, R)


def sectional(R: np.ndarray, g: np.ndarray, i: int, j: int) -> np.ndarray:
    """Curvature of the coordinate plane span{d_i, d_j}."""
    Rl = np.einsum("...e,...e->...", g[..., i, :], R[..., :, j, i, j])
    return Rl / (g[..., i, i] * g[..., j, j] - g[..., i, j] ** 2)


def first_bianchi_residual(R: np.ndarray, g: np.ndarray) -> float:
    Rl = lowered_riemann(R, g)
    cyc = Rl + np.einsum("...iljk->...ijkl", Rl) + np.einsum("...iklj->...ijkl", Rl)
    return float(np.nanmax(np.abs(cyc)))


def bianchi_op(grid: PatchGrid, g_background: PatchField, h: PatchField) -> PatchField:
    """beta(h) = -sum_i (nabla_{e_i} h)(., e_i) + 1/2 d tr h, all with respect to g_background."""
    _require(h, "02", "bianchi_op")
    _require(g_background, "02", "bianchi_op")
    gb = g_background.values
    ginv = inverse(gb)
    gam = christoffel_from(gb, grid, ginv)
    return PatchField("01", _bianchi(h.values, ginv, gam, grid), grid)


def _bianchi(h, ginv, gam, grid):
    nh = cov_deriv_02(h, gam, grid)
    div = np.einsum("...ik,...ikj->...j", ginv, nh)
    tr = np.einsum("...ik,...ik->...", ginv, h)
    return -div + 0.5 * gradient(tr, grid)


def lie_derivative_metric(grid: PatchGrid, g: PatchField, beta: PatchField) -> PatchField:
    """L_X g for X = beta^sharp (raised with g): nabla_i beta_j + nabla_j beta_i."""
    _require(beta, "01", "lie_derivative_metric")
    gam = christoffel_from(g.values, grid)
    nb = cov_deriv_covector(beta.values, gam, grid)
    return PatchField("02", nb + np.swapaxes(nb, -1, -2), grid)


def weitzenbock(h: np.ndarray, ginv: np.ndarray, R: np.ndarray, ric: np.ndarray) -> np.ndarray:
    """h(Ric x, y) + h(x, Ric y) - 2 tr h(., R(., x) y)."""
    rh = np.einsum("...ab,...bx,...ay->...xy", ginv, ric, h)
    h_mixed = np.einsum("...ik,...ke->...ie", ginv, h)
    rring = np.einsum("...ie,...eyix->...xy", h_mixed, R)
    return rh + np.swapaxes(rh, -1, -2) - 2.0 * rring


def lichnerowicz(grid: PatchGrid, g_background: PatchField, h: PatchField) -> PatchField:
    """Delta_L h = nabla^* nabla h + Weitzenbock term, for the background metric."""
    _require(h, "02", "lichnerowicz")
    _require(g_background, "02", "lichnerowicz")
    gb = g_background.values
    ginv = inverse(gb)
    gam = christoffel_from(gb, grid, ginv)
    nnh = cov_deriv_03(cov_deriv_02(h.values, gam, grid), gam, grid)
    rough = -np.einsum("...mk,...mkij->...ij", ginv, nnh)
    del nnh
    R = riemann_from(gam, grid)
    ric = np.einsum("...abad->...bd", R)
    out = rough + weitzenbock(h.values, ginv, R, ric)
    return PatchField.symmetric(out, grid)


def first_non_positive_point(g: np.ndarray):
    eig = np.linalg.eigvalsh(g)
    bad = eig[..., 0] <= 0
    if np.any(bad):
        return tuple(int(i) for i in np.argwhere(bad)[0])
    return None


def einstein_operator(grid: PatchGrid, g_background: PatchField, g: PatchField) -> PatchField:
    """Phi(g) = Ric(g) + (n-1) g + 1/2 L_{beta(g)^sharp} g, beta taken for g_background."""
    _require(g, "02", "einstein_operator")
    bad = first_non_positive_point(g.values)
    if bad is not None:
        raise DomainError(f"metric is not positive definite at grid point {bad}")
    n = grid.dim
    gb = g_background.values
    gb_inv = inverse(gb)
    beta = _bianchi(g.values, gb_inv, christoffel_from(gb, grid, gb_inv), grid)
    gam = christoffel_from(g.values, grid)
    ric = ricci_from(gam, grid)
    nb = cov_deriv_covector(beta, gam, grid)
    lie = nb + np.swapaxes(nb, -1, -2)
    return PatchField.symmetric(ric + (n - 1) * g.values + 0.5 * lie, grid)


@dataclass(frozen=True)
class OperatorReport:
    pointwise_max_residual: float
    convergence_order: float
    steps: tuple = ()
    residuals: tuple = ()
    increments: tuple = ()

    def to_dict(self) -> dict:
        return {
            "pointwise_max_residual": self.pointwise_max_residual,
            "convergence_order": self.convergence_order,
            "steps": list(self.steps),
            "residuals": list(self.residuals),
            "increments": list(self.increments),
        }


def fitted_order(steps, values) -> float:
    """Slope of log(values) against log(steps)."""
    x, y = np.log(np.asarray(steps, float)), np.log(np.asarray(values, float))
    return float(np.polyfit(x, y, 1)[0])


def linearization_check(
    grid: PatchGrid, g_background: PatchField, h: PatchField, steps=(0.2, 0.1, 0.05)
) -> OperatorReport:
    """Compare centred differences of Phi along g + eps h with 1/2 Delta_L h + (n-1) h.

    convergence_order is the eps-order of the successive increments
    |Q(eps_i) - Q(eps_{i+1})|, which removes the spacing error shared by
    every quotient; pointwise_max_residual uses the eps-extrapolated quotient
    and therefore measures the spacing error alone.
    """
    _require(h, "02", "linearization_check")
    n = grid.dim
    steps = tuple(sorted(steps, reverse=True))
    if len(steps) < 3:
        raise ValueError("need at least three eps steps")
    target = lichnerowicz(grid, g_background, h).values * 0.5 + (n - 1) * h.values
    if not np.any(h.values):
        return OperatorReport(0.0, float("nan"), steps, (0.0,) * len(steps), ())
    quotients = []
    for eps in steps:
        plus = einstein_operator(grid, g_background, g_background + h.scaled(eps))
        minus = einstein_operator(grid, g_background, g_background - h.scaled(eps))
        quotients.append((plus.values - minus.values) / (2.0 * eps))
    residuals = tuple(float(np.nanmax(np.abs(q - target))) for q in quotients)
    incs = tuple(
        float(np.nanmax(np.abs(quotients[i] - quotients[i + 1]))) for i in range(len(steps) - 1)
    )
    order = fitted_order(steps[:-1], incs)
    r = steps[-2] / steps[-1]
    extrap = quotients[-1] + (quotients[-1] - quotients[-2]) / (r**2 - 1.0)
    return OperatorReport(
        float(np.nanmax(np.abs(extrap - target))), order, steps, residuals, incs
    )


# -- oracle for the closed-form curvature ----------------------------------


FRAME_KEYS = ("k_base", "k_mixed", "k_mixed_theta", "k_fiber", "ric_u", "ric_theta", "ric_fiber")


def fd_frame_values(profile: ProfileSpec, u0: float, spacing: float, x0: float = 1.5) -> dict:
    """Frame curvature at (u0, x0) from finite differences on a 5^n patch."""
    grid = ansatz_patch(profile, u0, spacing, extent=5, x0=x0)
    c = grid.center_index()
    g = metric_field(grid).values
    gam = christoffel_from(g, grid)
    R = riemann_from(gam, grid)
    gc, Rc = g[c], R[c]
    ric = np.einsum("abad->bd", Rc)

    def K(i, j):
        return float(sectional(Rc, gc, i, j))

    return {
        "k_base": K(0, 1),
        "k_mixed": K(0, 2),
        "k_mixed_theta": K(1, 2),
        "k_fiber": K(2, 3),
        "ric_u": float(ric[0, 0] / gc[0, 0]),
        "ric_theta": float(ric[1, 1] / gc[1, 1]),
        "ric_fiber": float(ric[2, 2] / gc[2, 2]),
    }


def fd_frame_richardson(profile: ProfileSpec, u0: float, spacing: float, x0: float = 1.5) -> dict:
    coarse = fd_frame_values(profile, u0, spacing, x0)
    fine = fd_frame_values(profile, u0, spacing / 2.0, x0)
    return {k: (4.0 * fine[k] - coarse[k]) / 3.0 for k in coarse}


def kernel_direction_check(n: int, a: float, u_samples, steps=(0.04, 0.02, 0.01, 0.005)) -> OperatorReport:
    """Centred eps-differences of Ric + (n-1) g along g_a + eps d_a g_a.

    The family stays Einstein, so the linearization along its tangent vanishes
    and the centred quotient is O(eps^2).  Uses the generic cohomogeneity-one
    curvature formula, where the perturbed metric leaves the ansatz.
    """
    u = np.asarray(u_samples, dtype=float)
    w, w1, _ = model_deviation(n, 1.0, u)
    # w = u^(3-n) = dV/da,  w1 = its u-derivative
    wa, wa1, wa2 = model_deviation(n, a, u)
    V, V1, V2 = u * u - 1.0 + wa, 2.0 * u + wa1, 2.0 + wa2
    w2 = model_deviation(n, 1.0, u)[2]

    def err(eps):
        A = 1.0 / V - eps * w / V**2
        A1 = -V1 / V**2 - eps * (w1 / V**2 - 2.0 * w * V1 / V**3)
        B, B1, B2 = V + eps * w, V1 + eps * w1, V2 + eps * w2
        fc = warped_frame_curvature(n, A, A1, B, B1, B2, u * u, 2.0 * u, 2.0 * np.ones_like(u))
        return np.stack(fc.err_diag)

    steps = tuple(sorted(steps, reverse=True))
    if np.any(V - steps[0] * np.abs(w) <= 0):
        raise DomainError("largest eps step makes the perturbed metric degenerate; sample further from u_a")
    vals = tuple(float(np.max(np.abs((err(e) - err(-e)) / (2.0 * e)))) for e in steps)
    return OperatorReport(vals[-1], fitted_order(steps, vals), steps, vals, ())


def dump_field_csv(f: PatchField, path, components=None) -> None:
    """Write one row per grid point: index, coordinates, selected components."""
    grid = f.grid
    comp_shape = f.values.shape[len(grid.shape):]
    comps = list(np.ndindex(*comp_shape)) if components is None else [tuple(c) for c in components]
    axes = grid.axes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [f"i{k}" for k in range(grid.dim)]
            + [f"x{k}" for k in range(grid.dim)]
            + ["c" + "".join(map(str, c)) for c in comps]
        )
        for idx in np.ndindex(*grid.shape):
            v = f.values[idx]
            w.writerow(
                list(idx)
                + [repr(float(axes[k][i])) for k, i in enumerate(idx)]
                + [repr(float(v[c])) if comps != [()] else repr(float(v)) for c in comps]
            )
