"""Fourier analysis on the circle [0, 1).

Coefficients are stored in a dense symmetric window ``-K..K``; index ``j`` of
a window lives at position ``j + K`` of the underlying array.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "FourierVector",
    "WeightSequence",
    "eval_basis",
    "coeffs_by_quadrature",
    "quadrature_coeffs",
    "weighted_norm_sq",
    "convolve",
    "synthesize",
]

HERMITIAN_TOL = 1e-9
IMAG_RESIDUE_TOL = 1e-9


def _phase(j, t):
    # reduce j*t modulo 1 before scaling by 2*pi to keep large products accurate
    return 2.0 * np.pi * np.mod(np.multiply.outer(j, t), 1.0)


def eval_basis(j, t):
    """Evaluate ``e_j(t) = exp(2 pi i j t)``; broadcasts over ``j`` and ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0.0) | (t >= 1.0)):
        raise ValueError("t must lie in [0, 1)")
    out = np.exp(1j * _phase(np.asarray(j), t))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class FourierVector:
    """Fourier coefficients of a function on the circle for ``|j| <= K``.

    ``real`` marks the coefficients of a real-valued function; such vectors are
    Hermitian (``c[-j] == conj(c[j])``).
    """

    K: int
    coefficients: np.ndarray = field(repr=False)
    real: bool = True

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex)
        if self.K < 0:
            raise ValueError("K must be nonnegative")
        if c.shape != (2 * self.K + 1,):
            raise ValueError(f"expected {2 * self.K + 1} coefficients, got {c.shape}")
        if self.real:
            scale = max(1.0, float(np.max(np.abs(c))))
            asym = np.max(np.abs(c - np.conj(c[::-1])))
            if asym > HERMITIAN_TOL * scale:
                raise ValueError(f"real FourierVector is not Hermitian (defect {asym:.3g})")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def from_nonnegative(cls, values: Sequence[complex], real: bool = True) -> "FourierVector":
        """Build a Hermitian vector from the coefficients at ``j = 0..K``."""
        v = np.asarray(values, dtype=complex)
        full = np.concatenate([np.conj(v[:0:-1]), v])
        if real:
            full[len(v) - 1] = full[len(v) - 1].real
        return cls(len(v) - 1, full, real)

    @classmethod
    def zeros(cls, K: int) -> "FourierVector":
        return cls(K, np.zeros(2 * K + 1, dtype=complex), True)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def __getitem__(self, j: int) -> complex:
        if abs(j) > self.K:
            raise IndexError(f"index {j} outside window -{self.K}..{self.K}")
        return complex(self.coefficients[j + self.K])

    def __len__(self) -> int:
        return 2 * self.K + 1

    def truncate(self, k: int) -> "FourierVector":
        if not 0 <= k <= self.K:
            raise ValueError(f"cannot truncate window {self.K} to {k}")
        return FourierVector(k, self.coefficients[self.K - k : self.K + k + 1], self.real)

    def padded(self, K: int) -> "FourierVector":
        """Zero-extend (or truncate) to window ``K``."""
        if K <= self.K:
            return self.truncate(K)
        c = np.zeros(2 * K + 1, dtype=complex)
        c[K - self.K : K + self.K + 1] = self.coefficients
        return FourierVector(K, c, self.real)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "re", "im"])
        for j, c in zip(self.indices, self.coefficients):
            w.writerow([int(j), repr(float(c.real)), repr(float(c.imag))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path, real: bool | None = None) -> "FourierVector":
        text = Path(source).read_text() if not str(source).lstrip().startswith("j,") else str(source)
        rows = list(csv.DictReader(io.StringIO(text)))
        js = np.array([int(r["j"]) for r in rows])
        if js.size == 0 or js.size % 2 == 0 or np.any(np.diff(js) != 1) or js[0] != -js[-1]:
            raise ValueError("CSV rows must cover a symmetric window -K..K in ascending order")
        c = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
        if real is None:
            real = bool(np.allclose(c, np.conj(c[::-1]), rtol=0, atol=HERMITIAN_TOL * max(1.0, np.abs(c).max())))
        return cls(int(js[-1]), c, real)


class WeightSequence:
    """Strictly positive symmetric weight sequence indexed by ``j`` in Z.

    ``pol(e)`` is ``|j|**(2e)`` and ``exp(e)`` is ``exp(2e|j|)``, both equal to
    one at ``j = 0``; a negative exponent gives a decaying sequence (the usual
    error-smoothness weights). ``table`` holds explicit values for ``j = 0..L``
    and is undefined beyond ``L``.
    """

    KINDS = ("flat", "pol", "exp", "table")

    def __init__(self, kind: str = "flat", exponent: float = 0.0, table: Sequence[float] | None = None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown weight kind {kind!r}")
        if kind == "table":
            if table is None or len(table) == 0:
                raise ValueError("table weights need explicit values")
            values = tuple(float(x) for x in table)
            if min(values) <= 0:
                raise ValueError("weights must be strictly positive")
            self.table = values
        else:
            self.table = None
        self.kind = kind
        self.exponent = float(exponent) if kind in ("pol", "exp") else 0.0

    @classmethod
    def flat(cls) -> "WeightSequence":
        return cls("flat")

    @classmethod
    def pol(cls, exponent: float) -> "WeightSequence":
        return cls("pol", exponent)

    @classmethod
    def exp(cls, exponent: float) -> "WeightSequence":
        return cls("exp", exponent)

    @classmethod
    def from_table(cls, values: Sequence[float]) -> "WeightSequence":
        return cls("table", table=values)

    @property
    def support(self) -> int | None:
        """Largest index with a defined value, ``None`` if unbounded."""
        return len(self.table) - 1 if self.kind == "table" else None

    def __call__(self, j):
        a = np.abs(np.asarray(j))
        if self.kind == "flat":
            out = np.ones(a.shape)
        elif self.kind == "pol":
            with np.errstate(divide="ignore"):
                out = np.where(a == 0, 1.0, np.power(np.maximum(a, 1).astype(float), 2.0 * self.exponent))
        elif self.kind == "exp":
            out = np.exp(2.0 * self.exponent * a)
        else:
            if np.any(a > self.support):
                raise ValueError(f"table weights undefined beyond |j| = {self.support}")
            out = np.asarray(self.table)[a]
        return float(out) if out.ndim == 0 else out

    def running_max(self, J: int) -> np.ndarray:
        """``max_{0<=i<=j} w(i)`` for ``j = 0..J``."""
        return np.maximum.accumulate(self(np.arange(J + 1)))

    def to_dict(self) -> dict:
        if self.kind == "table":
            return {"kind": "table", "table": list(self.table)}
        if self.kind == "flat":
            return {"kind": "flat"}
        return {"kind": self.kind, "exponent": self.exponent}

    @classmethod
    def from_dict(cls, d: dict) -> "WeightSequence":
        kind = d.get("kind", "flat")
        if kind == "table":
            return cls.from_table(d["table"])
        if "decay" in d:
            return cls(kind, -float(d["decay"]))
        return cls(kind, float(d.get("exponent", 0.0)))

    def __eq__(self, other):
        return isinstance(other, WeightSequence) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.kind, self.exponent, self.table))

    def __repr__(self):
        if self.kind == "flat":
            return "WeightSequence.flat()"
        if self.kind == "table":
            return f"WeightSequence.from_table({list(self.table)!r})"
        return f"WeightSequence.{self.kind}({self.exponent!r})"


def quadrature_coeffs(values: np.ndarray, K: int, real: bool = True) -> FourierVector:
    """Equispaced quadrature of ``int g(t) e_j(-t) dt`` from grid values ``g(k/N)``."""
    values = np.asarray(values)
    N = values.shape[0]
    if N < 4 * K + 4:
        raise ValueError(f"{N} nodes alias a window of size {K}; need at least {4 * K + 4}")
    ks = np.arange(N)
    js = np.arange(0, K + 1) if real else np.arange(-K, K + 1)
    # exact integer reduction of j*k modulo N
    phase = 2.0 * np.pi * (np.mod(np.multiply.outer(js, ks), N) / N)
    c = (np.exp(-1j * phase) @ values) / N
    if real:
        return FourierVector.from_nonnegative(c, real=True)
    return FourierVector(K, c, False)


def coeffs_by_quadrature(g: Callable | object, K: int, nodes: int = 4096) -> FourierVector:
    """Fourier coefficients of ``g`` for ``|j| <= K`` by an ``nodes``-point rule.

    ``g`` is either a callable on arrays of ``t`` or an object with an
    ``evaluate`` method (a :class:`~poisson_deconv.models.FunctionSpec`).
    """
    if nodes < 4 * K + 4:
        raise ValueError(f"{nodes} nodes alias a window of size {K}; need at least {4 * K + 4}")
    f = getattr(g, "evaluate", g)
    t = np.arange(nodes) / nodes
    values = np.asarray(f(t))
    real = bool(getattr(g, "is_real", not np.iscomplexobj(values)))
    return quadrature_coeffs(values.real if real else values, K, real)


def weighted_norm_sq(v: FourierVector, w: WeightSequence) -> float:
    return float(np.sum(w(v.indices) * np.abs(v.coefficients) ** 2))


def convolve(a: FourierVector, b: FourierVector) -> FourierVector:
    """Coefficients of the circular convolution (coefficient-wise product)."""
    K = min(a.K, b.K)
    a, b = a.truncate(K), b.truncate(K)
    return FourierVector(K, a.coefficients * b.coefficients, a.real and b.real)


def synthesize(v: FourierVector, t):
    """Evaluate ``sum_j v_j e_j(t)`` at ``t`` (scalar or array)."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0.0) | (t >= 1.0)):
        raise ValueError("t must lie in [0, 1)")
    basis = np.exp(1j * _phase(v.indices, t.reshape(-1)))
    out = v.coefficients @ basis
    if v.real:
        scale = max(1.0, float(np.max(np.abs(out), initial=0.0)))
        residue = float(np.max(np.abs(out.imag), initial=0.0))
        if residue > IMAG_RESIDUE_TOL * scale:
            raise ArithmeticError(f"imaginary residue {residue:.3g} in real synthesis")
        out = out.real
    out = out.reshape(t.shape)
    return out[()] if out.ndim == 0 else out
