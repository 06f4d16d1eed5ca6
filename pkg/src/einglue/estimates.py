"""Scenario-level estimate chain: (n, d, R_nu, diam Sigma) -> U_max, U_glue, L^2 bound.

sup|E| and the L^2 integral of the glued metric are exactly homogeneous in
U_glue (E depends only on dV = a u^(3-n) chi(u), and chi is a function of
u / U_glue), so for large U_glue they are rescaled from a reference run at
REFERENCE_UGLUE.  All chained quantities are carried as natural logs.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

from scipy import integrate

from einglue.errors import ConfigurationError, NumericError
from einglue.geometry import VolumeQuery, frame_curvature, region_volume
from einglue.gluing import GluedMetricSpec, error_sup_norm, glued_profile

REFERENCE_UGLUE = 1e3
DIRECT_LIMIT = 1e6
BOUND_SLACK = 1.01

SCENARIO_KEYS = ("n", "d", "R_nu", "diam_sigma", "vol_sigma", "vol_cap_constant")


def log_cosh(x: float) -> float:
    return x + math.log1p(math.exp(-2.0 * x)) - math.log(2.0)


def _exp(x: float) -> float:
    if x == -math.inf:
        return 0.0
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def unit_ball_volume(k: int) -> float:
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


@dataclass(frozen=True)
class ScenarioInputs:
    n: int
    d: int
    R_nu: float
    diam_sigma: float
    vol_sigma: float | None = None
    vol_cap_constant: float | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise ConfigurationError(f"n must be an integer >= 4, got {self.n!r}")
        if int(self.d) != self.d or self.d < 2:
            raise ConfigurationError(f"d must be an integer >= 2, got {self.d!r}")
        if not self.R_nu > 0:
            raise ConfigurationError("R_nu must be positive")
        if not self.diam_sigma >= 0:
            raise ConfigurationError("diam_sigma must be non-negative")
        if not log_cosh(self.R_nu) > math.log(4.0):
            raise ConfigurationError(
                f"cosh(R_nu) = {math.cosh(self.R_nu):.6g} must exceed 4 so that U_glue < U_max / 2"
            )
        if self.vol_sigma is not None and self.vol_cap_constant is not None:
            raise ConfigurationError("give either vol_sigma or vol_cap_constant, not both")
        if self.vol_sigma is not None and self.vol_sigma < 0:
            raise ConfigurationError("vol_sigma must be non-negative")
        if self.vol_cap_constant is not None and not self.vol_cap_constant > 0:
            raise ConfigurationError("vol_cap_constant must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioInputs":
        unknown = set(data) - set(SCENARIO_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
        missing = {"n", "d", "R_nu", "diam_sigma"} - set(data)
        if missing:
            raise ConfigurationError(f"missing scenario keys: {sorted(missing)}")
        return cls(
            int(data["n"]),
            int(data["d"]),
            float(data["R_nu"]),
            float(data["diam_sigma"]),
            None if data.get("vol_sigma") is None else float(data["vol_sigma"]),
            None if data.get("vol_cap_constant") is None else float(data["vol_cap_constant"]),
        )

    def log_vol_sigma_cap(self) -> tuple[float, str]:
        if self.vol_sigma is not None:
            return _log(self.vol_sigma), "given vol_{n-2}(Sigma)"
        if self.vol_cap_constant is not None:
            C, src = self.vol_cap_constant, "given constant"
        else:
            C, src = unit_ball_volume(self.n - 2), f"unit {self.n - 2}-ball volume"
        return math.log(C) + (self.n - 3) * self.diam_sigma, f"C exp((n-3) diam), C = {src}"


def derive_log_parameters(s: ScenarioInputs) -> tuple[float, float]:
    log_umax = log_cosh(s.R_nu)
    return log_umax, 0.5 * log_umax


def derive_parameters(s: ScenarioInputs) -> tuple[float, float]:
    """U_max = cosh(R_nu), U_glue = sqrt(U_max); inf when U_max overflows."""
    lm, lg = derive_log_parameters(s)
    return _exp(lm), _exp(lg)


@dataclass(frozen=True)
class L2Chain:
    value: float
    log_value: float
    eps: float
    sup_exponent: float
    volume_exponent: float
    net_exponent: float
    decay_certified: bool
    status: str

    def to_dict(self) -> dict:
        return asdict(self)


def _chain(s: ScenarioInputs, log_sup: float, log_c_vol: float) -> L2Chain:
    n = s.n
    _, log_ug = derive_log_parameters(s)
    log_vol, _ = s.log_vol_sigma_cap()
    eps = 2.0 * (n - 3) * s.diam_sigma / s.R_nu
    sup_exp, vol_exp = -2.0 * (n - 1), (n - 1) + eps
    net = sup_exp + vol_exp
    certified = eps < n - 1
    if log_sup == -math.inf or log_vol == -math.inf:
        log_b = -math.inf
    else:
        log_b = 2.0 * log_sup + log_c_vol + (n - 1) * log_ug + log_vol
    status = "decay certified" if certified else "no decay certified"
    return L2Chain(_exp(log_b), log_b, eps, sup_exp, vol_exp, net, certified, status)


def l2_bound_chain(s: ScenarioInputs, measured_sup: float, measured_C_vol: float) -> L2Chain:
    """sup|E|^2 times the gluing-region volume C_vol U_glue^(n-1) vol_cap.

    Exponent bookkeeping in U_glue: -2(n-1) + (n-1) + eps, with
    eps = 2(n-3) diam / R_nu from exp((n-3) diam) <= U_glue^eps.
    """
    return _chain(s, _log(measured_sup), math.log(measured_C_vol))


def l2_numeric(spec: GluedMetricSpec, vol_sigma: float) -> float:
    """2 pi d vol(Sigma) int_{U/2}^{U} |E|^2 u^(n-2) du."""
    if vol_sigma == 0 or spec.a == 0:
        return 0.0
    prof = glued_profile(spec)
    n = spec.n

    def f(u):
        return float(frame_curvature(prof, n, u).err_norm(n)) ** 2 * u ** (n - 2)

    val, err = integrate.quad(f, spec.cutoff.lower, spec.cutoff.upper, epsabs=0, epsrel=1e-10, limit=400)
    if not math.isfinite(val) or err > 1e-6 * abs(val):
        raise NumericError(f"L2 quadrature did not converge (value {val:g}, error {err:g})")
    return 2.0 * math.pi * spec.d * vol_sigma * val


@dataclass(frozen=True)
class _Reference:
    U: float
    log_sup_const: float  # log(sup|E| U^(n-1))
    log_c_vol: float
    log_l2_const: float  # log(l2_numeric U^(n-1)) per unit vol(Sigma)


@lru_cache(maxsize=None)
def _reference(n: int, d: int) -> _Reference:
    U = REFERENCE_UGLUE
    spec = GluedMetricSpec.build(n, d, U)
    sup = error_sup_norm(spec)
    vol = region_volume(glued_profile(spec), VolumeQuery(U, n, d, 1.0))
    l2 = l2_numeric(spec, 1.0)
    lu = math.log(U)
    return _Reference(U, math.log(sup) + (n - 1) * lu, math.log(vol) - (n - 1) * lu, math.log(l2) + (n - 1) * lu)


@dataclass(frozen=True)
class EstimateReport:
    n: int
    d: int
    R_nu: float
    diam_sigma: float
    U_max: float
    U_glue: float
    log_U_max: float
    log_U_glue: float
    sup_error: float
    log_sup_error: float
    C_vol: float
    gluing_volume: float
    log_gluing_volume: float
    l2_bound: float
    log_l2_bound: float
    l2_numeric: float
    log_l2_numeric: float
    eps: float
    net_exponent: float
    decay_certified: bool
    status: str
    provenance: dict = field(default_factory=dict)

    def bound_holds(self) -> bool:
        if self.log_l2_numeric == -math.inf:
            return True
        return self.log_l2_numeric <= self.log_l2_bound + math.log(BOUND_SLACK)

    def to_dict(self) -> dict:
        return asdict(self)


CSV_COLUMNS = [
    "n", "d", "R_nu", "diam_sigma", "U_max", "U_glue", "log_U_glue", "sup_error",
    "log_sup_error", "C_vol", "gluing_volume", "l2_bound", "log_l2_bound", "l2_numeric",
    "log_l2_numeric", "eps", "net_exponent", "decay_certified", "status",
]


def estimate_row(s: ScenarioInputs) -> EstimateReport:
    n, d = s.n, s.d
    log_um, log_ug = derive_log_parameters(s)
    U_glue = _exp(log_ug)
    log_vol, vol_src = s.log_vol_sigma_cap()
    if U_glue <= DIRECT_LIMIT:
        spec = GluedMetricSpec.build(n, d, U_glue)
        sup = error_sup_norm(spec)
        c_vol = region_volume(glued_profile(spec), VolumeQuery(U_glue, n, d, 1.0)) / U_glue ** (n - 1)
        log_sup, log_c_vol = math.log(sup), math.log(c_vol)
        num = l2_numeric(spec, _exp(log_vol)) if log_vol > -math.inf else 0.0
        log_num = _log(num)
        how = "measured directly at U_glue"
    else:
        ref = _reference(n, d)
        log_sup = ref.log_sup_const - (n - 1) * log_ug
        log_c_vol = ref.log_c_vol
        log_num = ref.log_l2_const - (n - 1) * log_ug + log_vol
        how = f"rescaled from U_glue = {ref.U:g} by exact homogeneity"
    chain = _chain(s, log_sup, log_c_vol)
    log_gv = log_c_vol + (n - 1) * log_ug + log_vol
    return EstimateReport(
        n=n, d=d, R_nu=s.R_nu, diam_sigma=s.diam_sigma,
        U_max=_exp(log_um), U_glue=U_glue, log_U_max=log_um, log_U_glue=log_ug,
        sup_error=_exp(log_sup), log_sup_error=log_sup,
        C_vol=_exp(log_c_vol),
        gluing_volume=_exp(log_gv), log_gluing_volume=log_gv,
        l2_bound=chain.value, log_l2_bound=chain.log_value,
        l2_numeric=_exp(log_num), log_l2_numeric=log_num,
        eps=chain.eps, net_exponent=chain.net_exponent,
        decay_certified=chain.decay_certified, status=chain.status,
        provenance={
            "U_max": "cosh(R_nu)",
            "U_glue": "U_max ** 0.5",
            "sup_error": how,
            "l2_numeric": how,
            "C_vol": "quadrature of u^(n-2) on [U_glue/2, U_glue], theta-period 2 pi d",
            "vol_sigma_cap": vol_src,
            "eps": "2 (n-3) diam_sigma / R_nu, fixed per scenario (modeling choice)",
        },
    )


@dataclass(frozen=True)
class ConvergenceTable:
    rows: list
    decreasing_from: int | None

    @property
    def eventually_decreasing(self) -> bool:
        return self.decreasing_from is not None and self.decreasing_from < len(self.rows) - 1

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "decreasing_from": self.decreasing_from,
            "eventually_decreasing": self.eventually_decreasing,
        }


def _decreasing_from(logs: list[float]) -> int | None:
    if len(logs) < 2:
        return None
    start = len(logs) - 1
    while start > 0 and logs[start - 1] > logs[start]:
        start -= 1
    return start


def convergence_table(seq, workers: int | None = None) -> ConvergenceTable:
    """One EstimateReport per scenario, in input order.

    decreasing_from is the first row index after which log l2_bound is
    strictly decreasing (None for a single row).
    """
    seq = [s if isinstance(s, ScenarioInputs) else ScenarioInputs.from_dict(s) for s in seq]
    for n, d in sorted({(s.n, s.d) for s in seq}):
        _reference(n, d)
    if workers and workers > 1 and len(seq) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(estimate_row, seq))
    else:
        rows = [estimate_row(s) for s in seq]
    return ConvergenceTable(rows, _decreasing_from([r.log_l2_bound for r in rows]))


def load_scenarios(path) -> list[ScenarioInputs]:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ConfigurationError("scenario document must be a JSON array")
    return [ScenarioInputs.from_dict(item) for item in data]


def sqrt_sequence(n: int = 4, d: int = 2, ks=range(25, 401)) -> list[ScenarioInputs]:
    """diam_k = sqrt(k), R_k = k."""
    return [ScenarioInputs(n, d, float(k), math.sqrt(k)) for k in ks]
