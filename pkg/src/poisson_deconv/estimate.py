"""Empirical Fourier coefficients and the thresholded series estimator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .circular import FourierVector, WeightSequence
from .models import FunctionSpec
from .simulate import Dataset, PointPattern

__all__ = [
    "EmpiricalCoeffs",
    "empirical_ell",
    "empirical_f",
    "empirical_coeffs",
    "series_estimator",
    "exact_risk",
    "write_estimate",
]

_CHUNK = 1 << 14
_ANCHOR = 16


def _char_sums(x: np.ndarray, K: int) -> np.ndarray:
    """``sum_i exp(-2 pi i j x_i)`` for ``j = 0..K``.

    Powers of ``exp(-2 pi i x)`` are built by repeated multiplication and
    re-anchored from the exactly reduced phase every few steps, which keeps
    the rounding drift at a few ulp.
    """
    out = np.zeros(K + 1, dtype=complex)
    for start in range(0, x.size, _CHUNK):
        chunk = x[start : start + _CHUNK]
        step = np.exp(-2j * np.pi * chunk)
        for j0 in range(0, K + 1, _ANCHOR):
            z = np.exp(-2j * np.pi * np.mod(j0 * chunk, 1.0))
            for j in range(j0, min(j0 + _ANCHOR, K + 1)):
                if j > j0:
                    z = z * step
                out[j] += z.sum()
    return out


def empirical_ell(processes: Sequence[PointPattern], K: int) -> FourierVector:
    """Average over processes of ``sum_{y in N_i} e_j(-y)``, ``|j| <= K``."""
    n = len(processes)
    if n < 1:
        raise ValueError("need at least one process")
    if K < 0:
        raise ValueError("K must be nonnegative")
    pts = np.concatenate([p.points for p in processes]) if n else np.empty(0)
    return FourierVector.from_nonnegative(_char_sums(pts, K) / n)


def empirical_f(errors, K: int) -> tuple[FourierVector, np.ndarray]:
    """Empirical error coefficients and the inclusive threshold flags
    ``|fhat_j|^2 >= 1/m`` over the window ``-K..K``."""
    y = np.asarray(errors, dtype=float).reshape(-1)
    m = y.size
    if m < 1:
        raise ValueError("empty error sample")
    c = _char_sums(y, K) / m
    c[0] = 1.0
    fhat = FourierVector.from_nonnegative(c)
    flags = np.abs(fhat.coefficients) ** 2 >= 1.0 / m
    return fhat, flags


@dataclass(frozen=True)
class EmpiricalCoeffs:
    ellhat: FourierVector
    fhat: FourierVector
    omega_flags: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        if self.ellhat.K != self.fhat.K or self.omega_flags.shape != (2 * self.ellhat.K + 1,):
            raise ValueError("inconsistent windows")
        flags = np.asarray(self.omega_flags, dtype=bool).copy()
        flags.setflags(write=False)
        object.__setattr__(self, "omega_flags", flags)

    @property
    def K(self) -> int:
        return self.ellhat.K

    @property
    def ellhat0(self) -> float:
        return self.ellhat[0].real

    def flag(self, j: int) -> bool:
        return bool(self.omega_flags[j + self.K])

    def fhat_sq(self) -> np.ndarray:
        """``|fhat_j|^2`` for ``j = 0..K``."""
        return np.abs(self.fhat.coefficients[self.K :]) ** 2


def empirical_coeffs(data: Dataset, K: int) -> EmpiricalCoeffs:
    ell = empirical_ell(data.processes, K)
    fhat, flags = empirical_f(data.error_sample, K)
    return EmpiricalCoeffs(ell, fhat, flags, data.n, data.m)


def series_estimator(emp: EmpiricalCoeffs, k: int) -> FourierVector:
    """Coefficients ``ellhat_j / fhat_j`` on ``Omega_j`` and zero elsewhere, ``|j| <= k``."""
    if not 0 <= k <= emp.K:
        raise ValueError(f"dimension {k} outside the empirical window 0..{emp.K}")
    sl = slice(emp.K - k, emp.K + k + 1)
    ell, fh, flags = emp.ellhat.coefficients[sl], emp.fhat.coefficients[sl], emp.omega_flags[sl]
    c = np.zeros(2 * k + 1, dtype=complex)
    c[flags] = ell[flags] / fh[flags]
    return FourierVector(k, c, True)


def _tail_bound(truth: FunctionSpec, omega: WeightSequence, T: int) -> float:
    """Certified bound for ``sum_{|j|>T} omega_j |[lambda]_j|^2``."""
    band = truth.bandwidth
    if band is not None:
        if band <= T:
            return 0.0
        raise ValueError(f"tail_K={T} does not cover the band-limited truth (bandwidth {band})")
    if omega.kind == "table":
        raise ValueError("undecidable tail: table weights with an infinite-support truth")
    r = truth.decay
    if omega.kind == "pol":
        # term ratio w(j+1)/w(j) * r^2 is largest at j = T + 1
        q = ((T + 2.0) / (T + 1.0)) ** (2.0 * omega.exponent) * r * r
    elif omega.kind == "exp":
        q = math.exp(2.0 * omega.exponent) * r * r
    else:
        q = r * r
    if q >= 1.0:
        raise ValueError("weighted truth norm diverges or tail_K too small for a geometric bound")
    first = float(omega(T + 1)) * float(truth.coefficient(T + 1)) ** 2
    return 2.0 * first / (1.0 - q)


def exact_risk(est: FourierVector, truth: FunctionSpec, omega: WeightSequence, tail_K: int,
               return_tail: bool = False):
    """Weighted squared loss ``||est - truth||_omega^2`` in coefficient space.

    The sum runs exactly up to ``tail_K``; beyond it a certified analytic tail
    bound is added (zero for band-limited truths, geometric otherwise). With
    ``return_tail`` the pair ``(loss, tail)`` is returned.
    """
    if tail_K < est.K:
        raise ValueError("tail_K must cover the estimator window")
    tail = _tail_bound(truth, omega, tail_K)
    js = est.indices
    inside = float(np.sum(omega(js) * np.abs(est.coefficients - truth.coefficient(js)) ** 2))
    outer = np.arange(est.K + 1, tail_K + 1)
    between = 2.0 * float(np.sum(omega(outer) * truth.coefficient(outer) ** 2))
    loss = inside + between + tail
    return (loss, tail) if return_tail else loss


def write_estimate(est: FourierVector, emp: EmpiricalCoeffs, csv_path: str | Path, extra: dict | None = None) -> None:
    """Estimator CSV plus a JSON sidecar ``{n, m, k, flags}`` next to it."""
    csv_path = Path(csv_path)
    est.to_csv(csv_path)
    k = est.K
    flags = emp.omega_flags[emp.K - k : emp.K + k + 1]
    meta = {"n": emp.n, "m": emp.m, "k": k, "flags": [bool(x) for x in flags]}
    if extra:
        meta.update(extra)
    csv_path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")
