"""Monte Carlo risk benchmark and event diagnostics.

Every replication draws its dataset from substreams keyed by ``(n, m, rep)``
and results are merged in replication order, so output files do not depend
on the number of workers.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .circular import WeightSequence
from .estimate import EmpiricalCoeffs, empirical_coeffs, empirical_f, exact_risk, series_estimator
from .models import (
    ErrorClass,
    FunctionSpec,
    IntensityClass,
    check_assumption_seq,
    class_membership,
    family_from_dict,
)
from .select import (
    PAPER,
    ConstantsMode,
    M_alpha,
    WindowTooSmall,
    full_adaptive,
    full_indices,
    partial_adaptive,
    proof_indices,
    psi_scan,
)
from .simulate import simulate_dataset

__all__ = [
    "ExperimentConfig",
    "RiskRecord",
    "DiagnosticsRecord",
    "RISK_COLUMNS",
    "run_experiment",
    "write_records",
    "gnuplot_script",
    "slope_regression",
    "event_diagnostics",
    "xi1_holds",
    "xi2_holds",
    "resolve_workers",
]

log = logging.getLogger(__name__)

THREADS_ENV = "POISSON_DECONV_THREADS"
RISK_COLUMNS = ("n", "m", "estimator", "mean_risk", "se", "mean_k", "k_hist", "R", "seed", "constants_mode")
_FIXED = re.compile(r"fixed[(:]\s*(\d+)\s*\)?$")


def _estimator_id(e) -> str:
    if isinstance(e, dict) and "fixed" in e:
        return f"fixed({int(e['fixed'])})"
    e = str(e).strip()
    mt = _FIXED.fullmatch(e)
    if mt:
        return f"fixed({int(mt.group(1))})"
    if e in ("oracle", "partial", "full"):
        return e
    raise ValueError(f"unknown estimator {e!r}")


@dataclass
class ExperimentConfig:
    intensity: FunctionSpec
    error: FunctionSpec
    gamma: WeightSequence
    r: float
    alpha: WeightSequence
    d: float = 1.0
    omega: WeightSequence = field(default_factory=WeightSequence.flat)
    n_grid: list = field(default_factory=lambda: [100])
    m_grid: list = field(default_factory=lambda: [100])
    reps: int = 100
    seed: int = 0
    estimators: list = field(default_factory=lambda: ["oracle"])
    constants_mode: ConstantsMode = PAPER
    K_max: int = 64
    tail_K: int = 512
    output: str | None = None

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.n_grid or not self.m_grid:
            raise ValueError("grids must be nonempty")
        if min(self.n_grid) < 1 or min(self.m_grid) < 1:
            raise ValueError("sample sizes must be >= 1")
        self.estimators = [_estimator_id(e) for e in self.estimators]
        self.constants_mode = ConstantsMode.parse(self.constants_mode)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["intensity"] = family_from_dict(d["intensity"], "intensity")
        d["error"] = family_from_dict(d["error"], "error-density")
        for key in ("gamma", "alpha", "omega"):
            if key in d:
                d[key] = WeightSequence.from_dict(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "intensity": self.intensity.to_dict(),
            "error": self.error.to_dict(),
            "gamma": self.gamma.to_dict(),
            "r": self.r,
            "alpha": self.alpha.to_dict(),
            "d": self.d,
            "omega": self.omega.to_dict(),
            "n_grid": list(self.n_grid),
            "m_grid": list(self.m_grid),
            "reps": self.reps,
            "seed": self.seed,
            "estimators": list(self.estimators),
            "constants_mode": str(self.constants_mode),
            "K_max": self.K_max,
            "tail_K": self.tail_K,
            "output": self.output,
        }

    def class_status(self) -> dict:
        """Membership of the simulated truth in the configured classes."""
        lam = class_membership(self.intensity, IntensityClass(self.gamma, self.r))
        try:
            err = class_membership(self.error, ErrorClass(self.alpha, self.d))
        except ValueError as exc:
            return {"intensity": lam.member, "error": None, "verified": False, "detail": str(exc)}
        seq = check_assumption_seq(self.omega, self.gamma, self.alpha, 100)
        verified = bool(lam.member) and bool(err.member) and seq.ok
        return {"intensity": lam.member, "error": err.member, "sequences": seq.ok, "verified": verified}


@dataclass
class RiskRecord:
    n: int
    m: int
    estimator: str
    mean_risk: float
    se: float
    mean_k: float
    k_hist: dict
    R: int
    seed: int
    constants_mode: str

    def row(self) -> list:
        hist = "|".join(f"{k}:{c}" for k, c in sorted(self.k_hist.items()))
        return [self.n, self.m, self.estimator, repr(self.mean_risk), repr(self.se), repr(self.mean_k), hist,
                self.R, self.seed, self.constants_mode]


def resolve_workers(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


def _one_replication(cfg: ExperimentConfig, n: int, m: int, rep: int, k_oracle: int | None) -> dict:
    data = simulate_dataset(cfg.intensity, cfg.error, n, m, cfg.seed, keys=(n, m, rep))
    K = min(n, m, cfg.K_max)
    emp = empirical_coeffs(data, K)
    out = {}

    def risk(k):
        return exact_risk(series_estimator(emp, k), cfg.intensity, cfg.omega, cfg.tail_K)

    modes = [cfg.constants_mode] if cfg.constants_mode == PAPER else [cfg.constants_mode, PAPER]
    for est in cfg.estimators:
        if est == "oracle":
            if k_oracle > K:
                raise WindowTooSmall(f"oracle dimension {k_oracle} exceeds window {K}; raise K_max")
            out[est] = (risk(k_oracle), k_oracle)
        elif est.startswith("fixed("):
            k = int(est[6:-1])
            if k > K:
                raise WindowTooSmall(f"fixed dimension {k} exceeds window {K}; raise K_max")
            out[est] = (risk(k), k)
        else:
            for mode in modes:
                sel = _select(est, emp, data, cfg, mode)
                key = est if mode == cfg.constants_mode else f"{est}[{mode}]"
                out[key] = (risk(sel.k_selected), sel.k_selected)
    return out


def _select(est, emp, data, cfg, mode):
    if est == "partial":
        return partial_adaptive(emp, cfg.omega, cfg.alpha, cfg.d, mode)
    try:
        return full_adaptive(emp, cfg.omega, mode)
    except WindowTooSmall:
        wide = min(data.n, data.m)
        fhat, _ = empirical_f(data.error_sample, wide)
        fsq = np.abs(fhat.coefficients[wide:]) ** 2
        return full_adaptive(emp, cfg.omega, mode, fhat_sq=fsq)


def _run_chunk(cfg, n, m, reps, k_oracle):
    return [_one_replication(cfg, n, m, rep, k_oracle) for rep in reps]


def run_experiment(cfg: ExperimentConfig, workers: int | None = None, write: bool = True) -> list[RiskRecord]:
    """Monte Carlo risks for every ``(n, m)`` grid point and estimator.

    With ``write`` and ``cfg.output`` set, the records are also written as CSV.
    When the configuration uses practical constants, the adaptive rules are
    additionally run in ``paper`` mode and reported as ``partial[paper]``
    and ``full[paper]``.
    """
    status = cfg.class_status()
    if not status["verified"]:
        log.warning("class-unverified configuration: %s", status)
    workers = resolve_workers(workers)
    records = []
    for n in cfg.n_grid:
        k_oracle = None
        if "oracle" in cfg.estimators:
            k_oracle = psi_scan(cfg.omega, cfg.gamma, cfg.alpha, n, max(cfg.K_max, 10_000))[0]
        for m in cfg.m_grid:
            results = _map_reps(cfg, n, m, k_oracle, workers)
            records.extend(_aggregate(cfg, n, m, results))
    if write and cfg.output:
        write_records(records, cfg.output)
    return records


def _map_reps(cfg, n, m, k_oracle, workers):
    reps = list(range(cfg.reps))
    if workers == 1:
        return _run_chunk(cfg, n, m, reps, k_oracle)
    from joblib import Parallel, delayed

    chunks = [reps[i::workers] for i in range(workers)]
    parts = Parallel(n_jobs=workers)(delayed(_run_chunk)(cfg, n, m, c, k_oracle) for c in chunks if c)
    by_rep = {}
    for chunk, part in zip([c for c in chunks if c], parts):
        by_rep.update(zip(chunk, part))
    return [by_rep[r] for r in reps]


def _aggregate(cfg, n, m, results):
    records = []
    for key in results[0]:
        risks = np.array([res[key][0] for res in results])
        ks = [res[key][1] for res in results]
        R = len(risks)
        se = float(np.std(risks, ddof=1) / math.sqrt(R)) if R > 1 else 0.0
        hist: dict[int, int] = {}
        for k in ks:
            hist[k] = hist.get(k, 0) + 1
        mode = "paper" if key.endswith("[paper]") else str(cfg.constants_mode)
        records.append(RiskRecord(n, m, key, float(np.mean(risks)), se, float(np.mean(ks)), hist, R, cfg.seed, mode))
    return records


def write_records(records: Sequence[RiskRecord], path: str | Path) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RISK_COLUMNS)
    for rec in records:
        w.writerow(rec.row())
    text = buf.getvalue()
    Path(path).write_text(text)
    return text


def gnuplot_script(csv_path: str | Path, estimators: Sequence[str], x: str = "n") -> str:
    """Plain gnuplot script plotting mean risk against ``n`` or ``m`` per estimator."""
    col = 1 if x == "n" else 2
    lines = [
        "set datafile separator ','",
        "set logscale xy",
        f"set xlabel '{x}'",
        "set ylabel 'mean weighted risk'",
        "set key outside",
    ]
    plots = [
        f"'{csv_path}' using (strcol(3) eq '{e}' ? ${col} : 1/0):4:5 with yerrorlines title '{e}'"
        for e in estimators
    ]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def slope_regression(x, y, level: float = 0.95) -> tuple[float, float]:
    """Least-squares slope of ``log y`` against ``log x`` and its CI half-width."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 4:
        raise ValueError("need at least 4 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("values must be positive")
    fit = stats.linregress(np.log(x), np.log(y))
    half = float(stats.t.ppf(0.5 + level / 2, x.size - 2) * fit.stderr)
    return float(fit.slope), half


# ---------------------------------------------------------------------------
# events


def xi1_holds(ellhat0: float, ell0: float) -> bool:
    """``(ell0 v 1)/2 <= ellhat0 v 1 <= 2 (ell0 v 1)``."""
    a, b = max(ell0, 1.0), max(ellhat0, 1.0)
    return a / 2.0 <= b <= 2.0 * a


def xi2_holds(fhat: np.ndarray, f: np.ndarray, M: int, m: int) -> bool:
    """For ``0 <= j <= M``: ``|1/fhat_j - 1/f_j| <= 1/(2|f_j|)`` and ``|fhat_j| >= 1/m``.

    ``fhat`` and ``f`` are indexed by ``j = 0..``; by symmetry nonnegative
    indices suffice.
    """
    fh = np.asarray(fhat[: M + 1], dtype=complex)
    fx = np.asarray(f[: M + 1], dtype=complex)
    if np.any(np.abs(fh) < 1.0 / m):
        return False
    return bool(np.all(np.abs(1.0 / fh - 1.0 / fx) <= 0.5 / np.abs(fx)))


@dataclass
class DiagnosticsRecord:
    n: int
    m: int
    R: int
    xi1_fail: float
    xi2_fail: float
    xi3_fail: float
    omega_fail: list
    omega_bound: list
    omega_se: list
    residual_mean: list
    residual_var: list
    var_ratio_ell: list
    var_ratio_f: list
    M: int = 0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["residual_mean"] = [[z.real, z.imag] for z in self.residual_mean]
        return d


def event_diagnostics(cfg: ExperimentConfig, n: int, m: int, J: int = 4, reps: int | None = None) -> DiagnosticsRecord:
    """Empirical event frequencies and moment checks at one grid point.

    The bound compared against the threshold-failure frequencies is
    ``min{1, 4d/(m alpha_j)}``; the process-side variance ratios use
    ``[lambda]_0 / n`` and the error-side ones ``(1 - |f_j|^2)/m``.
    """
    R = reps or cfg.reps
    lam, f = cfg.intensity, cfg.error
    js = np.arange(J + 1)
    lam_j, f_j = lam.coefficient(js), f.coefficient(js)
    M = M_alpha(cfg.alpha, m, cfg.d, cfg.constants_mode.scale)
    pidx = proof_indices(cfg.omega, cfg.alpha, cfg.d, n, m)
    W = max(J, M)
    f_w = f.coefficient(np.arange(W + 1))
    ell, fh = np.empty((R, J + 1), complex), np.empty((R, J + 1), complex)
    xi1 = xi2 = xi3 = 0
    for rep in range(R):
        data = simulate_dataset(lam, f, n, m, cfg.seed, keys=(n, m, rep))
        emp = empirical_coeffs(data, W)
        ell[rep] = emp.ellhat.coefficients[W : W + J + 1]
        fh[rep] = emp.fhat.coefficients[W : W + J + 1]
        xi1 += not xi1_holds(emp.ellhat0, lam.tau)
        xi2 += not xi2_holds(emp.fhat.coefficients[W:], f_w, M, m)
        try:
            N_hat, M_hat = full_indices(emp.fhat_sq(), cfg.omega, n, m)
        except WindowTooSmall:
            fw, _ = empirical_f(data.error_sample, min(n, m))
            N_hat, M_hat = full_indices(np.abs(fw.coefficients[fw.K :]) ** 2, cfg.omega, n, m)
        xi3 += not (pidx.K_minus <= min(N_hat, M_hat) <= pidx.K_plus)
    resid = ell - lam_j * f_j
    fail = (np.abs(fh) ** 2 < 1.0 / m).mean(axis=0)
    bound = np.minimum(1.0, 4.0 * cfg.d / (m * cfg.alpha(js)))
    var_ell = np.mean(np.abs(ell - ell.mean(axis=0)) ** 2, axis=0) * R / max(R - 1, 1)
    var_f = np.mean(np.abs(fh - fh.mean(axis=0)) ** 2, axis=0) * R / max(R - 1, 1)
    target_f = (1.0 - np.abs(f_j) ** 2) / m
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_f = np.where(target_f > 0, var_f / target_f, np.nan)
    return DiagnosticsRecord(
        n, m, R, xi1 / R, xi2 / R, xi3 / R,
        fail.tolist(), bound.tolist(), np.sqrt(fail * (1 - fail) / R).tolist(),
        resid.mean(axis=0).tolist(), (np.mean(np.abs(resid) ** 2, axis=0)).tolist(),
        (var_ell / (lam.tau / n)).tolist(), ratio_f.tolist(), M,
    )
