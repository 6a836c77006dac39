"""Choice of the dimension parameter.

Three rules are provided: the minimax oracle (needs both smoothness classes),
the partially adaptive rule (needs the error class only) and the fully
adaptive rule (data only). All of them scan explicit finite index ranges and
break ties towards the smallest index.

Index bounds follow the convention ``(inf S - 1) min bound`` with
``inf {} = bound + 1``, so a constraint that never binds yields ``bound``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .circular import FourierVector, WeightSequence, weighted_norm_sq
from .estimate import EmpiricalCoeffs, series_estimator

__all__ = [
    "WindowTooSmall",
    "ConstantsMode",
    "PAPER",
    "RatePoint",
    "SelectionResult",
    "ProofIndices",
    "psi_scan",
    "phi_scan",
    "oracle_rates",
    "rate_formula",
    "Delta_seq",
    "delta_seq",
    "first_index",
    "N_alpha",
    "M_alpha",
    "N_alpha_grid",
    "M_alpha_grid",
    "contrast",
    "contrast_values",
    "partial_adaptive",
    "full_adaptive",
    "full_indices",
    "proof_indices",
    "check_assumption_fully",
    "FullyReport",
    "delta_ratio_check",
    "exponential_threshold_check",
    "coefficient_floor_check",
]

PARTIAL_PENALTY = 165.0 / 2.0
FULL_PENALTY = 2750.0
M_THRESHOLD = 640.0


class WindowTooSmall(ValueError):
    """A scan or selection needs indices beyond the available window."""


@dataclass(frozen=True)
class ConstantsMode:
    """Numerical constants of the adaptive rules.

    ``paper`` uses the constants the risk bounds are proved with. ``practical(c)``
    multiplies the penalty constants (165/2 and 2750) and the 640 threshold
    constant by ``c``.
    """

    name: str = "paper"
    c: float = 1.0

    def __post_init__(self):
        if self.name not in ("paper", "practical"):
            raise ValueError("constants mode is 'paper' or 'practical(c)'")
        if not self.c > 0:
            raise ValueError("practical constant factor must be positive")
        if self.name == "paper" and self.c != 1.0:
            raise ValueError("paper mode has factor 1")

    @classmethod
    def practical(cls, c: float) -> "ConstantsMode":
        return cls("practical", float(c))

    @property
    def scale(self) -> float:
        return self.c

    def __str__(self):
        return "paper" if self.name == "paper" else f"practical({self.c!r})"

    @classmethod
    def parse(cls, value) -> "ConstantsMode":
        if isinstance(value, ConstantsMode):
            return value
        if value is None or value == "paper":
            return PAPER
        if isinstance(value, dict):
            return cls.practical(value["practical"])
        mt = re.fullmatch(r"\s*practical\(\s*([^)]+)\)\s*", str(value))
        if mt:
            expr = mt.group(1)
            if "/" in expr:
                num, den = expr.split("/")
                return cls.practical(float(num) / float(den))
            return cls.practical(float(expr))
        raise ValueError(f"cannot parse constants mode {value!r}")


PAPER = ConstantsMode()


# ---------------------------------------------------------------------------
# minimax rates


@dataclass(frozen=True)
class RatePoint:
    k_star: int
    psi: float
    phi: float
    bias_term: float
    variance_term: float
    phi_k: int = 1


def psi_scan(omega, gamma, alpha, n: int, K_max: int) -> tuple[int, float, float, float]:
    """``min_k max{omega_k/gamma_k, sum_{|j|<=k} omega_j/(n alpha_j)}``.

    Returns ``(k_star, psi, bias, variance)``. The scan stops as soon as the
    variance term alone exceeds the best value found (it cannot improve any
    more); reaching ``K_max`` first raises :class:`WindowTooSmall`.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    best, k_best, b_best, v_best = math.inf, 0, math.nan, math.nan
    variance = 0.0
    prev_bias = math.inf
    for k in range(K_max + 1):
        inc = float(omega(k)) / (n * float(alpha(k)))
        variance += inc if k == 0 else 2.0 * inc
        bias = float(omega(k)) / float(gamma(k))
        if bias > prev_bias * (1 + 1e-12):
            raise ValueError(f"omega/gamma increases at k={k}")
        prev_bias = bias
        val = max(bias, variance)
        if val < best:
            best, k_best, b_best, v_best = val, k, bias, variance
        if variance > best:
            return k_best, best, b_best, v_best
    raise WindowTooSmall(f"Psi scan did not terminate within K_max={K_max}")


def phi_scan(omega, gamma, alpha, m: int, K_max: int) -> tuple[int, float]:
    """``max_{k>=1} omega_k/gamma_k * min(1, 1/(m alpha_k))`` and its argmax."""
    if m < 1:
        raise ValueError("m must be >= 1")
    best, k_best = -math.inf, 1
    for k in range(1, K_max + 1):
        ratio = float(omega(k)) / float(gamma(k))
        if ratio <= best:
            return k_best, best
        val = ratio * min(1.0, 1.0 / (m * float(alpha(k))))
        if val > best:
            best, k_best = val, k
    raise WindowTooSmall(f"Phi scan did not terminate within K_max={K_max}")


def oracle_rates(omega, gamma, alpha, n: int, m: int, K_max: int = 10_000) -> RatePoint:
    """Rate functionals in ``n`` and ``m`` and the oracle dimension.

    ``k_star`` comes from :func:`psi_scan`, whose signature has no ``m``.
    """
    k, psi, bias, var = psi_scan(omega, gamma, alpha, n, K_max)
    kphi, phi = phi_scan(omega, gamma, alpha, m, K_max)
    return RatePoint(k, psi, phi, bias, var, kphi)


_RESTRICTIONS = {
    ("pol", "pol"): ("p >= s", "a > 1/2"),
    ("exp", "pol"): ("a > 1/2",),
    ("pol", "exp"): ("p >= s",),
    ("exp", "exp"): (),
}


def rate_formula(scenario: tuple[str, str], s: float, p: float, a: float, size: float, which: str = "n") -> float:
    """Closed-form order of the rate in ``n`` (``which='n'``) or ``m``.

    ``scenario`` is ``(gamma_kind, alpha_kind)`` with kinds ``pol``/``exp``.
    Constants are dropped.
    """
    scenario = tuple(scenario)
    if scenario not in _RESTRICTIONS:
        raise ValueError(f"unknown scenario {scenario}")
    for cond in _RESTRICTIONS[scenario]:
        ok = {"p >= s": p >= s, "a > 1/2": a > 0.5}[cond]
        if not ok:
            raise ValueError(f"restriction violated: {cond}")
    if which not in ("n", "m"):
        raise ValueError("which must be 'n' or 'm'")
    x = float(size)
    L = math.log(x)
    if which == "n":
        if scenario == ("pol", "pol"):
            return x ** (-2.0 * (p - s) / (2 * p + 2 * a + 1))
        if scenario == ("exp", "pol"):
            return L ** (2 * s + 2 * a + 1) / x
        if scenario == ("pol", "exp"):
            return L ** (-2.0 * (p - s))
        return L ** (2 * s) * x ** (-p / (p + a))
    if scenario == ("pol", "pol"):
        return x ** (-min(p - s, a) / a)
    if scenario == ("exp", "pol"):
        return 1.0 / x
    if scenario == ("pol", "exp"):
        return L ** (-2.0 * (p - s))
    return L ** (2 * s) * x ** (-p / a) if a >= p else 1.0 / x


# ---------------------------------------------------------------------------
# index bounds and penalty sequences


def Delta_seq(ratios: np.ndarray) -> np.ndarray:
    """Running maximum of ``omega_j / alpha_j`` (or its empirical analogue)."""
    return np.maximum.accumulate(np.asarray(ratios, dtype=float))


def delta_seq(Delta: np.ndarray, shift: int) -> np.ndarray:
    """``(2k+1) Delta_k log(Delta_k v (k+shift)) / log(k+shift)``; shift is 3 or 4."""
    if shift not in (3, 4):
        raise ValueError("log shift is 3 (partial rule) or 4 (full rule)")
    k = np.arange(len(Delta), dtype=float)
    return (2 * k + 1) * Delta * np.log(np.maximum(Delta, k + shift)) / np.log(k + shift)


def first_index(pred: Callable[[np.ndarray], np.ndarray], bound: int) -> int:
    """``(inf{1 <= j <= bound : pred(j)} - 1) min bound`` with ``inf {} = bound + 1``.

    ``pred`` is vectorized over integer arrays; the range is scanned in
    doubling chunks so early hits stay cheap.
    """
    start, size = 1, 8
    while start <= bound:
        js = np.arange(start, min(bound, start + size - 1) + 1)
        hit = np.nonzero(pred(js))[0]
        if hit.size:
            return int(js[hit[0]]) - 1
        start, size = int(js[-1]) + 1, size * 2
    return bound


def _running_max(omega: WeightSequence, js: np.ndarray) -> np.ndarray:
    # omega^+_j on a contiguous block js, including indices below js[0]
    head = float(np.max(omega(np.arange(js[0])))) if js[0] > 0 else -math.inf
    return np.maximum(np.maximum.accumulate(omega(js)), head)


def N_alpha(omega: WeightSequence, alpha: WeightSequence, n: int, shift: int = 3, factor: float = 1.0) -> int:
    """``N`` index: first ``j`` with ``alpha_j/(2j+1) < factor log(n+shift) omega_j^+/n``."""
    thr = factor * math.log(n + shift) / n
    return first_index(lambda js: alpha(js) / (2 * js + 1) < thr * _running_max(omega, js), n)


def M_alpha(alpha: WeightSequence, m: int, d: float = 1.0, scale: float = 1.0) -> int:
    """``M`` index of the partial rule: first ``j`` with ``alpha_j < 640 d log(m+1)/m``."""
    thr = scale * M_THRESHOLD * d * math.log(m + 1) / m
    return first_index(lambda js: alpha(js) < thr, m)


def _first_below_grid(g: np.ndarray, thresholds: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Vectorized ``first_index`` for a nonincreasing table ``g[j]``, ``j = 0..``.

    Returns ``(inf{1 <= j <= b : g_j < t} - 1) min b`` for each pair ``(t, b)``.
    """
    neg = -g[1:]
    # number of leading entries with g_j >= t
    c = np.searchsorted(neg, -thresholds, side="right")
    if np.any((c == neg.size) & (bounds > neg.size)):
        raise WindowTooSmall("table too short for the requested bounds")
    return np.minimum(c, bounds)


def _is_nonincreasing(x: np.ndarray) -> bool:
    return bool(np.all(np.diff(x) <= 0))


def M_alpha_grid(alpha: WeightSequence, ms, d: float = 1.0, scale: float = 1.0) -> np.ndarray:
    """:func:`M_alpha` over many ``m`` at once."""
    ms = np.asarray(ms, dtype=np.int64)
    table = alpha(np.arange(int(ms.max()) + 1))
    thr = scale * M_THRESHOLD * d * np.log(ms + 1.0) / ms
    if not _is_nonincreasing(table):
        return np.array([M_alpha(alpha, int(m), d, scale) for m in ms])
    return _first_below_grid(table, thr, ms)


def N_alpha_grid(omega: WeightSequence, alpha: WeightSequence, ns, shift: int = 3, factor: float = 1.0) -> np.ndarray:
    """:func:`N_alpha` over many ``n`` at once."""
    ns = np.asarray(ns, dtype=np.int64)
    js = np.arange(int(ns.max()) + 1)
    g = alpha(js) / ((2 * js + 1) * omega.running_max(js[-1]))
    thr = factor * np.log(ns + float(shift)) / ns
    if not _is_nonincreasing(g):
        return np.array([N_alpha(omega, alpha, int(n), shift, factor) for n in ns])
    return _first_below_grid(g, thr, ns)


def contrast(t: FourierVector, big: FourierVector, omega: WeightSequence) -> float:
    """``||t||_omega^2 - 2 Re <big, t>_omega`` for ``t`` inside ``big``'s window."""
    if t.K > big.K:
        raise WindowTooSmall("contrast needs t inside the reference window")
    b = big.truncate(t.K)
    w = omega(t.indices)
    inner = np.sum(w * b.coefficients * np.conj(t.coefficients))
    return weighted_norm_sq(t, omega) - 2.0 * float(inner.real)


def contrast_values(emp: EmpiricalCoeffs, omega: WeightSequence, K: int) -> np.ndarray:
    """``-sum_{|j|<=k} omega_j |lambdahat_j|^2`` for ``k = 0..K``."""
    est = series_estimator(emp, K)
    w = omega(np.arange(K + 1))
    sq = np.abs(est.coefficients[K:]) ** 2
    terms = w * sq
    terms[1:] *= 2.0
    return -np.cumsum(terms)


@dataclass
class SelectionResult:
    mode: str
    k_selected: int
    K_cap: int
    index_bounds: dict
    contrast: list
    penalty: list
    delta: list
    Delta: list
    ellhat0: float
    constants_mode: str
    n: int = 0
    m: int = 0

    def criterion(self) -> np.ndarray:
        return np.asarray(self.contrast) + np.asarray(self.penalty)

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(asdict(self), indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, text: str) -> "SelectionResult":
        return cls(**json.loads(text))


def _argmin(values: np.ndarray) -> int:
    # np.argmin returns the first minimizer
    return int(np.argmin(values))


def _needs(emp: EmpiricalCoeffs, K: int):
    if K > emp.K:
        raise WindowTooSmall(f"selection range 0..{K} exceeds the empirical window {emp.K}")


def partial_adaptive(emp: EmpiricalCoeffs, omega: WeightSequence, alpha: WeightSequence, d: float = 1.0,
                     constants_mode: ConstantsMode | str = PAPER) -> SelectionResult:
    """Penalized contrast selection with known error smoothness ``alpha``, ``d``."""
    mode = ConstantsMode.parse(constants_mode)
    if d < 1:
        raise ValueError("d must be >= 1")
    n, m = emp.n, emp.m
    N = N_alpha(omega, alpha, n, shift=3)
    M = M_alpha(alpha, m, d, scale=mode.scale)
    K = min(N, M)
    _needs(emp, K)
    js = np.arange(K + 1)
    Delta = Delta_seq(omega(js) / alpha(js))
    delta = delta_seq(Delta, 3)
    ell0 = max(emp.ellhat0, 1.0)
    pen = mode.scale * PARTIAL_PENALTY * d * ell0 * delta / n
    con = contrast_values(emp, omega, K)
    k = _argmin(con + pen)
    return SelectionResult("partial", k, K, {"N": N, "M": M}, con.tolist(), pen.tolist(), delta.tolist(),
                           Delta.tolist(), emp.ellhat0, str(mode), n, m)


def full_indices(fsq: np.ndarray, omega: WeightSequence, n: int, m: int,
                 allow_open: bool = False) -> tuple[int | None, int | None]:
    """``(N, M)`` of the full rule from squared moduli ``fsq[j]``, ``j = 0..``.

    ``fsq`` may be empirical or exact. An index whose infimum is not reached
    within the available entries is undetermined: with ``allow_open`` it is
    returned as ``None`` (it then exceeds ``len(fsq) - 2``), otherwise
    :class:`WindowTooSmall` is raised.
    """
    avail = len(fsq) - 1
    thr_n = math.log(n + 4) / n
    wplus = omega.running_max(min(n, avail)) if avail >= 1 else np.ones(1)

    def scan(pred, bound):
        for j in range(1, min(bound, avail) + 1):
            if pred(j):
                return j - 1
        if bound > avail:
            if allow_open:
                return None
            raise WindowTooSmall(f"index scan needs |j| up to {bound}, window is {avail}")
        return bound

    N = scan(lambda j: fsq[j] / (2 * j + 1) < thr_n * wplus[j], n)
    thr_m = math.log(m) / m
    M = scan(lambda j: fsq[j] < thr_m, m)
    return N, M


def _full_cap(N: int | None, M: int | None, avail: int) -> int:
    """``N ^ M``. An open index is at least ``avail`` while a determined one is
    at most ``avail``, so one determined index fixes the minimum."""
    known = [x for x in (N, M) if x is not None]
    if not known:
        raise WindowTooSmall(f"full-rule cap undetermined within window {avail}")
    return min(known)


def full_adaptive(emp: EmpiricalCoeffs, omega: WeightSequence, constants_mode: ConstantsMode | str = PAPER,
                  fhat_sq: np.ndarray | None = None) -> SelectionResult:
    """Fully data-driven penalized contrast selection.

    ``fhat_sq`` optionally supplies ``|fhat_j|^2`` on a wider window than
    ``emp`` for the index scans.
    """
    mode = ConstantsMode.parse(constants_mode)
    n, m = emp.n, emp.m
    fsq = emp.fhat_sq() if fhat_sq is None else np.asarray(fhat_sq)
    N, M = full_indices(fsq, omega, n, m, allow_open=True)
    K = _full_cap(N, M, len(fsq) - 1)
    _needs(emp, K)
    js = np.arange(K + 1)
    flags = emp.omega_flags[emp.K : emp.K + K + 1]
    with np.errstate(divide="ignore"):
        ratio = np.where(flags, omega(js) / np.where(flags, fsq[: K + 1], 1.0), 0.0)
    Delta = Delta_seq(ratio)
    delta = delta_seq(Delta, 4)
    ell0 = max(emp.ellhat0, 1.0)
    pen = mode.scale * FULL_PENALTY * ell0 * delta / n
    con = contrast_values(emp, omega, K)
    k = _argmin(con + pen)
    return SelectionResult("full", k, K, {"N": N, "M": M}, con.tolist(), pen.tolist(), delta.tolist(),
                           Delta.tolist(), emp.ellhat0, str(mode), n, m)


# ---------------------------------------------------------------------------
# proof-side indices and deterministic certificates


@dataclass(frozen=True)
class ProofIndices:
    N_minus: int
    N_plus: int
    M_minus: int
    M_plus: int
    K_minus: int
    K_plus: int
    Delta_k: tuple = ()
    delta_k: tuple = ()


def proof_indices(omega: WeightSequence, alpha: WeightSequence, d: float, n: int, m: int,
                  f_coeffs: np.ndarray | None = None, K: int | None = None) -> ProofIndices:
    """Bracketing indices ``N-/N+``, ``M-/M+``, ``K-/K+`` by direct enumeration.

    With exact coefficients ``f_coeffs[j]`` (``j = 0..``) the known-density
    analogues ``Delta_k``/``delta_k`` are added for ``k = 0..K``.
    """
    Nm = N_alpha(omega, alpha, n, shift=4, factor=4.0 * d)
    Np = N_alpha(omega, alpha, n, shift=4, factor=1.0 / (4.0 * d))
    thr = math.log(m) / m
    Mm = first_index(lambda js: alpha(js) < 4.0 * d * thr, m)
    Mp = first_index(lambda js: 4.0 * d * alpha(js) < thr, m)
    D, dl = (), ()
    if f_coeffs is not None:
        f_coeffs = np.asarray(f_coeffs)
        K = len(f_coeffs) - 1 if K is None else K
        js = np.arange(K + 1)
        Dk = Delta_seq(omega(js) / np.abs(f_coeffs[: K + 1]) ** 2)
        D, dl = tuple(Dk.tolist()), tuple(delta_seq(Dk, 4).tolist())
    return ProofIndices(Nm, Np, Mm, Mp, min(Nm, Mm), min(Np, Mp), D, dl)


@dataclass
class FullyReport:
    """Grid certificates for the extra assumption of the fully adaptive rule
    and the deterministic companion facts."""

    m_grid: list
    certificate: list
    certificate_max: float
    certificate_slope: float
    bounded: bool
    delta_ratio: dict = field(default_factory=dict)
    exponential_threshold: dict = field(default_factory=dict)
    coefficient_floor: dict = field(default_factory=dict)


def delta_ratio_check(omega: WeightSequence, alpha: WeightSequence, n_grid) -> dict:
    """``delta_j/n <= 1`` for every ``j <= N_n`` (partial-rule variant)."""
    ns = np.asarray(list(n_grid), dtype=np.int64)
    Ns = N_alpha_grid(omega, alpha, ns, shift=3)
    Kmax = int(Ns.max())
    js = np.arange(Kmax + 1)
    dl = delta_seq(Delta_seq(omega(js) / alpha(js)), 3)
    # delta is not assumed monotone in j, so take the prefix maximum
    worst = np.maximum.accumulate(dl)[Ns]
    bad = ns[worst / ns > 1.0]
    return {"ok": bad.size == 0, "violations": bad.tolist(), "max_ratio": float(np.max(worst / ns))}


def exponential_threshold_check(alpha: WeightSequence, d: float, m_grid) -> dict:
    """``exp(-m alpha_M/(128 d)) <= (m+1)^-5`` wherever ``M >= 1``."""
    ms = np.asarray(list(m_grid), dtype=np.int64)
    Ms = M_alpha_grid(alpha, ms, d)
    live = Ms >= 1
    lhs = np.exp(-ms[live] * alpha(Ms[live]) / (128.0 * d))
    rhs = (ms[live] + 1.0) ** -5
    bad = ms[live][lhs > rhs]
    return {"ok": bad.size == 0, "violations": bad.tolist(), "vacuous": ms[~live].tolist()}


def coefficient_floor_check(alpha: WeightSequence, d: float, m_grid, f_coeff: Callable) -> dict:
    """``min_{1<=j<=M} |f_j|^2 >= 2/m`` with exact coefficients ``f_coeff(j)``."""
    ms = np.asarray(list(m_grid), dtype=np.int64)
    Ms = M_alpha_grid(alpha, ms, d)
    Kmax = int(Ms.max())
    if Kmax == 0:
        return {"ok": True, "violations": [], "vacuous": ms.tolist()}
    fsq = np.abs(np.asarray(f_coeff(np.arange(1, Kmax + 1)), dtype=float)) ** 2
    prefix_min = np.minimum.accumulate(fsq)
    live = Ms >= 1
    mins = prefix_min[Ms[live] - 1]
    bad = ms[live][mins < 2.0 / ms[live]]
    return {"ok": bad.size == 0, "violations": bad.tolist(), "vacuous": ms[~live].tolist()}


def check_assumption_fully(alpha: WeightSequence, d: float, m_grid: Sequence[int],
                           omega: WeightSequence | None = None, n_grid: Sequence[int] | None = None,
                           f_coeff: Callable | None = None) -> FullyReport:
    """Evaluate ``exp(-m alpha_{M+ + 1}/(128 d)) m^5`` over ``m_grid``.

    ``bounded`` is true when the certificate does not grow along the upper
    half of the grid (log-log slope <= 0). Companion checks are filled in when
    their inputs are given: ``delta_ratio`` needs ``n_grid``, ``coefficient_floor`` needs
    exact coefficients ``f_coeff``; ``exponential_threshold`` always runs.
    """
    m_grid = [int(m) for m in m_grid]
    if not m_grid:
        raise ValueError("m_grid must be nonempty")
    cert = []
    for m in m_grid:
        Mp = proof_indices(WeightSequence.flat(), alpha, d, 1, m).M_plus
        cert.append(math.exp(-m * float(alpha(Mp + 1)) / (128.0 * d)) * float(m) ** 5)
    upper = list(zip(m_grid, cert))[len(m_grid) // 2 :]
    if len(upper) >= 2 and all(c > 0 for _, c in upper) and len({m for m, _ in upper}) >= 2:
        slope = float(np.polyfit(np.log([m for m, _ in upper]), np.log([c for _, c in upper]), 1)[0])
    else:
        slope = 0.0
    report = FullyReport(m_grid, cert, max(cert), slope, slope <= 1e-9)
    report.exponential_threshold = exponential_threshold_check(alpha, d, m_grid)
    if f_coeff is not None:
        report.coefficient_floor = coefficient_floor_check(alpha, d, m_grid, f_coeff)
    if n_grid is not None:
        report.delta_ratio = delta_ratio_check(omega or WeightSequence.flat(), alpha, n_grid)
    return report
