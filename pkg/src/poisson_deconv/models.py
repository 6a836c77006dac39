"""Intensity and error-density families with closed-form Fourier coefficients.

Each family is a nonnegative function on the circle whose coefficients are
known exactly, which makes class membership checkable and risks computable
without quadrature. The same families serve as intensities (scaled by the
total mass ``tau``) and as error densities (``tau = 1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .circular import FourierVector, WeightSequence

__all__ = [
    "FAMILIES",
    "FunctionSpec",
    "IntensityClass",
    "ErrorClass",
    "MembershipReport",
    "AssumptionReport",
    "RhoValue",
    "make_family",
    "family_from_dict",
    "class_membership",
    "check_assumption_seq",
    "series_rho",
]

FAMILIES = ("uniform", "cosine", "poisson_kernel", "young_pol")
ROLES = ("intensity", "error-density")

CHECK_GRID = 4096
NEGATIVITY_TOL = 1e-10
DEFAULT_YOUNG_J = 64
MEMBERSHIP_SCAN = 100_000


@dataclass(frozen=True)
class FunctionSpec:
    """A validated intensity or error density with exact coefficients.

    ``sup_bound``/``inf_bound`` are certified bounds: exact for the closed-form
    families, grid extrema widened by a Lipschitz slack otherwise.
    """

    role: str
    family: str
    params: Mapping[str, float]
    sup_bound: float
    inf_bound: float
    is_real: bool = field(default=True, repr=False)

    @property
    def tau(self) -> float:
        return float(self.params.get("tau", 1.0))

    @property
    def bandwidth(self) -> int | None:
        """Largest ``|j|`` with a nonzero coefficient, ``None`` if unbounded."""
        if self.family == "uniform":
            return 0
        if self.family == "cosine":
            return 1 if self.params["beta"] != 0 else 0
        if self.family == "young_pol":
            return int(self.params["J"])
        return None

    @property
    def decay(self) -> float | None:
        """Geometric coefficient ratio ``r`` of the Poisson kernel family."""
        return float(self.params["r"]) if self.family == "poisson_kernel" else None

    def coefficient(self, j):
        """Exact Fourier coefficient(s) at ``j`` (real-valued, symmetric)."""
        return _coefficient(self.family, self.params, j)

    def coefficients(self, K: int) -> FourierVector:
        return FourierVector(K, self.coefficient(np.arange(-K, K + 1)).astype(complex), True)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        tau = self.tau
        if self.family == "uniform":
            out = np.full(t.shape, tau)
        elif self.family == "cosine":
            out = tau * (1.0 + self.params["beta"] * np.cos(2.0 * np.pi * t))
        elif self.family == "poisson_kernel":
            r = self.params["r"]
            out = tau * (1.0 - r * r) / (1.0 - 2.0 * r * np.cos(2.0 * np.pi * t) + r * r)
        else:
            J = int(self.params["J"])
            out = _cosine_series(self.coefficient(np.arange(J + 1)), t)
        return out[()] if np.ndim(out) == 0 else out

    def to_dict(self) -> dict:
        d = {"family": self.family}
        for key, value in self.params.items():
            if key == "r" and "rate" in self.params:
                continue
            d[key] = value
        return d


def _cosine_series(c, t):
    """Clenshaw evaluation of ``c[0] + 2 sum_{j>=1} c[j] cos(2 pi j t)``."""
    x = np.cos(2.0 * np.pi * t)
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for cj in c[:0:-1]:
        b1, b2 = 2.0 * cj + 2.0 * x * b1 - b2, b1
    return c[0] + x * b1 - b2


def _coefficient(family, params, j):
    a = np.abs(np.asarray(j))
    tau = params.get("tau", 1.0)
    if family == "uniform":
        out = np.where(a == 0, tau, 0.0)
    elif family == "cosine":
        out = np.where(a == 0, tau, np.where(a == 1, tau * params["beta"] / 2.0, 0.0))
    elif family == "poisson_kernel":
        out = tau * np.power(params["r"], a.astype(float))
    elif family == "young_pol":
        c = np.power(1.0 + a, -params["q"])
        out = tau * np.where(a == 0, 1.0, np.where(a <= params["J"], c, 0.0))
    else:
        raise ValueError(f"unknown family {family!r}")
    return out.astype(float)


def make_family(role: str, family: str, **params) -> FunctionSpec:
    """Construct and validate a family member.

    Parameters
    ----------
    role : {"intensity", "error-density"}
    family : {"uniform", "cosine", "poisson_kernel", "young_pol"}
    **params
        ``tau`` (intensity mass, default 1), ``beta`` for cosine, ``rate`` or
        ``r`` for the Poisson kernel (``r = exp(-rate)``), ``q`` and ``J`` for
        young_pol.

    Raises
    ------
    ValueError
        On out-of-range parameters or a function dipping below zero on the
        check grid.
    """
    if role not in ROLES:
        raise ValueError(f"role must be one of {ROLES}")
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}")
    p = {k: float(v) for k, v in params.items()}
    tau = p.pop("tau", 1.0)
    if role == "error-density" and tau != 1.0:
        raise ValueError("error densities have unit mass (tau = 1)")
    if not tau > 0:
        raise ValueError("tau must be positive")
    p["tau"] = tau

    if family == "cosine":
        beta = p.setdefault("beta", 0.0)
        if not abs(beta) < 1:
            raise ValueError("cosine family needs |beta| < 1")
        sup, inf = tau * (1 + abs(beta)), tau * (1 - abs(beta))
    elif family == "poisson_kernel":
        if "rate" in p:
            if not p["rate"] > 0:
                raise ValueError("poisson_kernel rate must be positive")
            p["r"] = math.exp(-p["rate"])
        r = p.get("r")
        if r is None or not 0 < r < 1:
            raise ValueError("poisson_kernel needs decay r in (0, 1)")
        sup, inf = tau * (1 + r) / (1 - r), tau * (1 - r) / (1 + r)
    elif family == "young_pol":
        q = p.setdefault("q", 2.0)
        J = p.setdefault("J", float(DEFAULT_YOUNG_J))
        if not q > 1:
            raise ValueError("young_pol needs q > 1")
        if J < 1 or J != int(J):
            raise ValueError("young_pol needs an integer truncation J >= 1")
        sup, inf = None, None
    else:
        sup, inf = tau, tau

    spec = FunctionSpec(role, family, dict(p), 0.0, 0.0)
    grid = spec.evaluate(np.arange(CHECK_GRID) / CHECK_GRID)
    gmin, gmax = float(np.min(grid)), float(np.max(grid))
    if gmin < -NEGATIVITY_TOL:
        raise ValueError(f"{family} with {params} is negative on the check grid (min {gmin:.3g})")
    if sup is None:
        J = int(p["J"])
        js = np.arange(1, J + 1)
        c = np.abs(spec.coefficient(js))
        lipschitz = 2.0 * 2.0 * np.pi * float(np.sum(js * c))
        slack = lipschitz / (2.0 * CHECK_GRID)
        sup = min(gmax + slack, tau + 2.0 * float(np.sum(c)))
        inf = gmin - slack
    # closed-form extrema can differ from grid values in the last bit
    return FunctionSpec(role, family, dict(p), float(sup) * (1 + 1e-12), float(inf) * (1 - 1e-12))


def family_from_dict(d: Mapping, role: str) -> FunctionSpec:
    """Parse ``{"family": "cosine", "tau": 50, "beta": 0.5}`` style configs."""
    d = dict(d)
    family = d.pop("family")
    return make_family(role, family, **d)


@dataclass(frozen=True)
class IntensityClass:
    gamma: WeightSequence
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("radius r must be positive")
        if self.gamma.kind == "pol" and self.gamma.exponent < 0:
            raise ValueError("gamma must satisfy gamma_j >= 1")
        if self.gamma.kind == "exp" and self.gamma.exponent < 0:
            raise ValueError("gamma must satisfy gamma_j >= 1")
        if self.gamma.kind == "table" and min(self.gamma.table) < 1:
            raise ValueError("gamma must satisfy gamma_j >= 1")


@dataclass(frozen=True)
class RhoValue:
    """``sum_j alpha_j`` with a certified enclosure ``[lower, upper]``."""

    value: float
    lower: float
    upper: float
    method: str

    @property
    def finite(self) -> bool:
        return math.isfinite(self.upper)


def series_rho(alpha: WeightSequence, J: int = 1000) -> RhoValue:
    """Total mass of a decaying weight sequence over Z."""
    if alpha.kind == "exp":
        if alpha.exponent >= 0:
            return RhoValue(math.inf, math.inf, math.inf, "divergent")
        q = math.exp(2.0 * alpha.exponent)
        v = (1 + q) / (1 - q)
        return RhoValue(v, v, v, "geometric")
    if alpha.kind == "flat":
        return RhoValue(math.inf, math.inf, math.inf, "divergent")
    if alpha.kind == "table":
        return RhoValue(math.nan, math.nan, math.inf, "undecidable")
    e = -2.0 * alpha.exponent  # alpha_j = j**(-e)
    partial = 1.0 + 2.0 * float(np.sum(np.arange(1, J + 1, dtype=float) ** (-e)))
    if e <= 1:
        return RhoValue(math.inf, partial, math.inf, "divergent")
    # integral comparison on both sides of the window
    lower = partial + 2.0 * (J + 1.0) ** (1.0 - e) / (e - 1.0)
    upper = partial + 2.0 * float(J) ** (1.0 - e) / (e - 1.0)
    return RhoValue(0.5 * (lower + upper), lower, upper, "partial+integral")


@dataclass(frozen=True)
class ErrorClass:
    alpha: WeightSequence
    d: float = 1.0
    rho: RhoValue = field(init=False)

    def __post_init__(self):
        if not self.d >= 1:
            raise ValueError("d must be >= 1")
        rho = series_rho(self.alpha)
        if not rho.finite:
            raise ValueError(f"sum of alpha is not finite ({rho.method})")
        object.__setattr__(self, "rho", rho)


@dataclass
class MembershipReport:
    member: bool | None
    kind: str
    value: float | None = None
    bound: float | None = None
    ratio_inf: float | None = None
    ratio_sup: float | None = None
    witness: int | None = None
    detail: str = ""

    @property
    def margin(self) -> float | None:
        if self.kind == "intensity" and self.value is not None:
            return self.bound - self.value
        return None

    def __bool__(self):
        return bool(self.member)


def _weighted_tail(w: WeightSequence, tau: float, r: float, T: int) -> float:
    """Certified bound for ``2 * sum_{j>T} w_j tau^2 r^(2j)``; inf if divergent."""
    if w.kind == "table":
        raise ValueError("undecidable tail for table weights")
    if w.kind == "pol":
        q = ((T + 2.0) / (T + 1.0)) ** (2.0 * w.exponent) * r * r
    elif w.kind == "exp":
        q = math.exp(2.0 * w.exponent) * r * r
    else:
        q = r * r
    if q >= 1:
        return math.inf
    first = float(w(T + 1)) * tau * tau * r ** (2.0 * (T + 1))
    return 2.0 * first / (1.0 - q)


def class_membership(spec: FunctionSpec, cls: IntensityClass | ErrorClass, window: int | None = None) -> MembershipReport:
    """Decide whether ``spec`` belongs to an intensity or error class.

    For error classes the ratio ``|c_j|^2 / alpha_j`` must stay in
    ``[1/d, d]`` for every ``j``; ``window`` restricts the check to
    ``|j| <= window`` (the report then says so).
    """
    if isinstance(cls, IntensityClass):
        return _intensity_membership(spec, cls)
    return _error_membership(spec, cls, window)


def _intensity_membership(spec, cls):
    g = cls.gamma
    band = spec.bandwidth
    if band is not None:
        if g.kind == "table" and band > g.support:
            return MembershipReport(None, "intensity", bound=cls.r, detail="table gamma shorter than support")
        js = np.arange(-band, band + 1)
        value = float(np.sum(g(js) * spec.coefficient(js) ** 2))
        return MembershipReport(value <= cls.r, "intensity", value, cls.r, detail="finite sum")
    if g.kind == "table":
        return MembershipReport(None, "intensity", bound=cls.r, detail="undecidable: table gamma, infinite support")
    T = 200
    js = np.arange(-T, T + 1)
    partial = float(np.sum(g(js) * spec.coefficient(js) ** 2))
    tail = _weighted_tail(g, spec.tau, spec.decay, T)
    if not math.isfinite(tail):
        return MembershipReport(False, "intensity", math.inf, cls.r, detail="weighted series diverges")
    value = partial + tail
    if value <= cls.r:
        return MembershipReport(True, "intensity", value, cls.r, detail=f"partial sum + tail bound {tail:.3g}")
    if partial > cls.r:
        return MembershipReport(False, "intensity", partial, cls.r, detail="partial sum exceeds radius")
    return MembershipReport(None, "intensity", value, cls.r, detail="tail bound straddles the radius")


def _error_membership(spec, cls, window):
    if spec.role != "error-density":
        return MembershipReport(False, "error", detail="not an error density")
    a, d = cls.alpha, cls.d
    lo, hi = 1.0 / d, d

    def verdict(js, ratio, restricted):
        bad = np.nonzero((ratio < lo * (1 - 1e-12)) | (ratio > hi * (1 + 1e-12)))[0]
        rinf, rsup = float(ratio.min()), float(ratio.max())
        if bad.size:
            return MembershipReport(False, "error", ratio_inf=rinf, ratio_sup=rsup, witness=int(js[bad[0]]),
                                    detail="two-sided bound violated")
        return MembershipReport(True, "error", ratio_inf=rinf, ratio_sup=rsup,
                                detail="restricted to |j| <= %d" % window if restricted else "all j")

    if window is not None:
        js = np.arange(window + 1)
        return verdict(js, spec.coefficient(js) ** 2 / a(js), True)

    band = spec.bandwidth
    if band is not None:
        # the first vanishing coefficient decides the lower bound
        end = band + 1
        if a.kind == "table" and end > a.support:
            return MembershipReport(None, "error", detail="undecidable: table alpha shorter than support + 1")
        js = np.arange(end + 1)
        return verdict(js, spec.coefficient(js) ** 2 / a(js), False)

    if a.kind == "table":
        return MembershipReport(None, "error", detail="undecidable: table alpha, infinite support")
    r = spec.decay
    if a.kind == "exp":
        # ratio_j = exp(j * (-2 log(1/r) - 2 e)) exactly
        slope = 2.0 * math.log(r) - 2.0 * a.exponent
        if abs(slope) < 1e-15:
            return MembershipReport(True, "error", ratio_inf=1.0, ratio_sup=1.0, detail="exact: ratio identically 1")
        witness = int(math.floor(math.log(d) / abs(slope))) + 1
        js = np.arange(witness + 1)
        return verdict(js, np.exp(slope * js), False)
    js = np.arange(MEMBERSHIP_SCAN + 1)
    with np.errstate(under="ignore"):
        ratio = spec.coefficient(js) ** 2 / a(js)
    rep = verdict(js, ratio, False)
    if rep.member:
        return MembershipReport(None, "error", ratio_inf=rep.ratio_inf, ratio_sup=rep.ratio_sup,
                                detail=f"no violation up to |j| = {MEMBERSHIP_SCAN}; tail undecided")
    return rep


@dataclass
class AssumptionReport:
    ok: bool
    violations: list[tuple[str, int]]
    rho: RhoValue

    def __bool__(self):
        return self.ok


def check_assumption_seq(omega: WeightSequence, gamma: WeightSequence, alpha: WeightSequence, J: int) -> AssumptionReport:
    """Check the standing regularity conditions on ``0..J``.

    Conditions: unit values at zero, ``gamma_j >= 1``, ``omega/gamma`` and
    ``alpha`` nonincreasing, and a finite ``sum_j alpha_j``. Violations are
    reported with the first witnessing index.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    js = np.arange(J + 1)
    w, g, a = omega(js), gamma(js), alpha(js)
    violations = []
    for name, seq in (("omega_0 != 1", w), ("gamma_0 != 1", g), ("alpha_0 != 1", a)):
        if seq[0] != 1.0:
            violations.append((name, 0))
    for name, seq in (("omega", w), ("gamma", g), ("alpha", a)):
        if np.any(seq <= 0):
            violations.append((f"{name} not strictly positive", int(np.argmax(seq <= 0))))
    if np.any(g < 1):
        violations.append(("gamma_j < 1", int(np.argmax(g < 1))))
    ratio = w / g
    inc = np.nonzero(np.diff(ratio) > 1e-15 * np.abs(ratio[1:]))[0]
    if inc.size:
        violations.append(("omega/gamma increasing", int(inc[0]) + 1))
    inc = np.nonzero(np.diff(a) > 1e-15 * np.abs(a[1:]))[0]
    if inc.size:
        violations.append(("alpha increasing", int(inc[0]) + 1))
    rho = series_rho(alpha, max(J, 1000))
    if not rho.finite:
        violations.append((f"sum of alpha not finite ({rho.method})", -1))
    return AssumptionReport(not violations, violations, rho)
