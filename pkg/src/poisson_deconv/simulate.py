"""Poisson point processes on the circle, contamination and auxiliary samples.

Randomness is always drawn from an explicit ``numpy.random.Generator``.
:func:`substream` derives independent generators from a root seed and a tuple
of integer keys so that replications can run in any order or process and still
reproduce the serial result bit for bit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np

from .models import FunctionSpec

__all__ = [
    "PointPattern",
    "Dataset",
    "Stream",
    "substream",
    "sample_locations",
    "sample_ppp",
    "sample_ppps",
    "contaminate",
    "sample_errors",
    "merge",
    "split",
    "simulate_dataset",
]


class Stream(IntEnum):
    """Role tags for substream derivation."""

    HIDDEN = 0
    CONTAMINATION = 1
    AUXILIARY = 2
    SPLIT = 3


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def _wrap(x: np.ndarray) -> np.ndarray:
    y = x - np.floor(x)
    # tiny negative inputs round up to exactly 1.0
    y[y >= 1.0] = 0.0
    return y


@dataclass(frozen=True)
class PointPattern:
    """Sorted points of one realization on [0, 1)."""

    points: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        p = np.sort(np.asarray(self.points, dtype=float).reshape(-1))
        if p.size and (p[0] < 0.0 or p[-1] >= 1.0):
            raise ValueError("points must lie in [0, 1)")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        return isinstance(other, PointPattern) and np.array_equal(self.points, other.points)

    __hash__ = None


def sample_locations(spec: FunctionSpec, size: int, rng) -> np.ndarray:
    """I.i.d. draws from the normalized shape ``spec / tau``.

    Rejection sampling against the uniform envelope ``sup_bound / tau``;
    the uniform family is sampled directly.
    """
    if size == 0:
        return np.empty(0)
    if spec.family == "uniform":
        return np.asarray(rng.random(size), dtype=float)
    envelope = spec.sup_bound
    accept_rate = spec.tau / envelope
    out = []
    need = size
    while need > 0:
        batch = int(math.ceil(need / accept_rate * 1.1)) + 16
        u = rng.random(batch)
        v = rng.random(batch)
        keep = u[v * envelope <= spec.evaluate(u)]
        out.append(keep[:need])
        need -= min(need, keep.size)
    return np.concatenate(out)


def sample_ppps(spec: FunctionSpec, n: int, rng) -> list[PointPattern]:
    """``n`` independent realizations of a PPP with intensity ``spec``."""
    if spec.role != "intensity":
        raise ValueError("sample_ppps needs an intensity")
    counts = np.asarray(rng.poisson(spec.tau, n), dtype=int).reshape(n)
    locations = sample_locations(spec, int(counts.sum()), rng)
    return [PointPattern(p) for p in np.split(locations, np.cumsum(counts)[:-1])]


def sample_ppp(spec: FunctionSpec, rng) -> PointPattern:
    return sample_ppps(spec, 1, rng)[0]


def sample_errors(f: FunctionSpec, m: int, rng) -> np.ndarray:
    """``m`` i.i.d. draws from the error density ``f`` on [0, 1).

    The Poisson kernel with decay ``r = exp(-a)`` is the wrapped Cauchy law:
    a Cauchy variable with scale ``a / (2 pi)`` reduced modulo one.
    """
    if f.role != "error-density":
        raise ValueError("sample_errors needs an error density")
    if m < 0:
        raise ValueError("m must be nonnegative")
    if f.family == "poisson_kernel":
        scale = -math.log(f.params["r"]) / (2.0 * math.pi)
        u = np.asarray(rng.random(m), dtype=float)
        return _wrap(scale * np.tan(np.pi * (u - 0.5)))
    return sample_locations(f, m, rng)


def contaminate(pattern: PointPattern, f: FunctionSpec, rng) -> PointPattern:
    """Shift every point by an independent draw from ``f`` modulo one."""
    eps = sample_errors(f, len(pattern), rng)
    return PointPattern(_wrap(pattern.points + eps))


def _contaminate_all(patterns: Sequence[PointPattern], f: FunctionSpec, rng) -> list[PointPattern]:
    counts = [len(p) for p in patterns]
    flat = np.concatenate([p.points for p in patterns]) if patterns else np.empty(0)
    shifted = _wrap(flat + sample_errors(f, flat.size, rng))
    return [PointPattern(p) for p in np.split(shifted, np.cumsum(counts)[:-1])]


def merge(patterns: Sequence[PointPattern]) -> PointPattern:
    if not patterns:
        return PointPattern()
    return PointPattern(np.concatenate([p.points for p in patterns]))


def split(pattern: PointPattern, n: int, rng) -> list[PointPattern]:
    """Assign each point independently and uniformly to one of ``n`` buckets."""
    if n < 1:
        raise ValueError("n must be >= 1")
    labels = rng.integers(0, n, size=len(pattern))
    return [PointPattern(pattern.points[labels == i]) for i in range(n)]


@dataclass(frozen=True)
class Dataset:
    """Observed processes ``N_1..N_n`` and the auxiliary error sample."""

    processes: tuple[PointPattern, ...]
    error_sample: np.ndarray
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        procs = tuple(self.processes)
        err = np.asarray(self.error_sample, dtype=float).reshape(-1)
        if len(procs) < 1 or err.size < 1:
            raise ValueError("a dataset needs n >= 1 processes and m >= 1 error draws")
        if np.any((err < 0.0) | (err >= 1.0)):
            raise ValueError("error sample must lie in [0, 1)")
        err.setflags(write=False)
        object.__setattr__(self, "processes", procs)
        object.__setattr__(self, "error_sample", err)

    @property
    def n(self) -> int:
        return len(self.processes)

    @property
    def m(self) -> int:
        return self.error_sample.size

    def all_points(self) -> np.ndarray:
        return np.concatenate([p.points for p in self.processes])

    def __eq__(self, other):
        return (
            isinstance(other, Dataset)
            and self.n == other.n
            and all(a == b for a, b in zip(self.processes, other.processes))
            and np.array_equal(self.error_sample, other.error_sample)
        )

    __hash__ = None

    def to_csv(self, path: str | Path | None = None) -> str:
        """Rows ``kind,index,value``.

        ``process`` rows give each process's point count (so empty processes
        survive a round trip), ``point`` rows carry their process index and
        ``error`` rows their sample index.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "index", "value"])
        for i, p in enumerate(self.processes):
            w.writerow(["process", i, len(p)])
        for i, p in enumerate(self.processes):
            for x in p.points:
                w.writerow(["point", i, repr(float(x))])
        for i, y in enumerate(self.error_sample):
            w.writerow(["error", i, repr(float(y))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path) -> "Dataset":
        text = str(source) if str(source).startswith("kind,") else Path(source).read_text()
        counts: dict[int, int] = {}
        points: dict[int, list[float]] = {}
        errors: list[tuple[int, float]] = []
        for row in csv.DictReader(io.StringIO(text)):
            kind, idx = row["kind"], int(row["index"])
            if kind == "process":
                counts[idx] = int(row["value"])
            elif kind == "point":
                points.setdefault(idx, []).append(float(row["value"]))
            elif kind == "error":
                errors.append((idx, float(row["value"])))
            else:
                raise ValueError(f"unknown row kind {kind!r}")
        n = max([*counts, *points], default=-1) + 1
        procs = []
        for i in range(n):
            pts = points.get(i, [])
            if i in counts and counts[i] != len(pts):
                raise ValueError(f"process {i}: declared {counts[i]} points, found {len(pts)}")
            procs.append(PointPattern(np.array(pts)))
        errors.sort()
        return cls(tuple(procs), np.array([y for _, y in errors]))


def simulate_dataset(
    intensity: FunctionSpec,
    error: FunctionSpec,
    n: int,
    m: int,
    seed: int,
    keys: Sequence[int] = (),
) -> Dataset:
    """Draw one dataset; hidden points, their errors and the auxiliary sample
    each use their own substream of ``(seed, *keys)``."""
    hidden = sample_ppps(intensity, n, substream(seed, *keys, Stream.HIDDEN))
    observed = _contaminate_all(hidden, error, substream(seed, *keys, Stream.CONTAMINATION))
    aux = sample_errors(error, m, substream(seed, *keys, Stream.AUXILIARY))
    prov = {"seed": int(seed), "keys": [int(k) for k in keys], "bit_generator": "PCG64"}
    return Dataset(tuple(observed), aux, prov)
