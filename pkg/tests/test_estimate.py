"""Empirical coefficients, the thresholded series estimator and exact risk."""

import json
import math

import numpy as np
import pytest

from poisson_deconv.circular import FourierVector, WeightSequence
from poisson_deconv.estimate import (
    EmpiricalCoeffs,
    empirical_coeffs,
    empirical_ell,
    empirical_f,
    exact_risk,
    series_estimator,
    write_estimate,
)
from poisson_deconv.models import make_family
from poisson_deconv.simulate import Dataset, PointPattern, merge, simulate_dataset, substream


def dataset(processes, errors):
    return Dataset(tuple(PointPattern(p) for p in processes), np.asarray(errors, dtype=float))


class TestEmpiricalEll:
    def test_single_point(self):
        ell = empirical_ell([PointPattern([0.25])], 1)
        assert ell[0] == 1.0
        np.testing.assert_allclose(ell[1], -1j, atol=1e-15)

    def test_average_over_processes(self):
        ell = empirical_ell([PointPattern(), PointPattern([0.5])], 1)
        assert ell[0] == 0.5
        np.testing.assert_allclose(ell[1], -0.5, atol=1e-15)

    def test_empty_processes_give_zero(self):
        ell = empirical_ell([PointPattern(), PointPattern()], 3)
        np.testing.assert_array_equal(ell.coefficients, 0)

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(0)
        procs = [PointPattern(rng.random(int(rng.integers(0, 30)))) for _ in range(7)]
        ell = empirical_ell(procs, 9)
        pts = np.concatenate([p.points for p in procs])
        js = np.arange(-9, 10)
        direct = np.exp(-2j * np.pi * np.outer(js, pts)).sum(axis=1) / 7
        np.testing.assert_allclose(ell.coefficients, direct, atol=1e-12)

    def test_chunked_sums_agree(self):
        # more points than one chunk of the accumulator
        pts = substream(1).random(40_000)
        ell = empirical_ell([PointPattern(pts)], 3)
        direct = np.exp(-2j * np.pi * np.outer(np.arange(-3, 4), pts)).sum(axis=1)
        np.testing.assert_allclose(ell.coefficients, direct, rtol=1e-10, atol=1e-8)

    def test_rejects_no_processes(self):
        with pytest.raises(ValueError):
            empirical_ell([], 2)


class TestEmpiricalF:
    def test_noiseless(self):
        fhat, flags = empirical_f(np.zeros(5), 4)
        np.testing.assert_allclose(fhat.coefficients, 1.0)
        assert flags.all()

    def test_inclusive_boundary(self):
        fhat, flags = empirical_f([0.25], 1)
        np.testing.assert_allclose(fhat[1], -1j, atol=1e-15)
        assert flags[2]

    def test_flag_false_for_balanced_sample(self):
        fhat, flags = empirical_f([0, 0.25, 0.5, 0.75], 2)
        assert abs(fhat[1]) < 1e-15
        assert not flags[3] and not flags[1]
        assert flags[2]
        # the four points also cancel at j = 2
        assert not flags[4] and not flags[0]

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            empirical_f([], 2)


class TestEmpiricalCoeffs:
    def test_window_consistency(self):
        ell = FourierVector.zeros(2)
        fhat = FourierVector.from_nonnegative([1.0, 0.0])
        with pytest.raises(ValueError):
            EmpiricalCoeffs(ell, fhat, np.ones(3, bool), 1, 1)

    def test_properties(self):
        emp = empirical_coeffs(dataset([[0.1, 0.2], [0.3]], [0.0, 0.5]), 2)
        assert emp.n == 2 and emp.m == 2 and emp.K == 2
        assert emp.ellhat0 == 1.5
        assert emp.flag(0)
        np.testing.assert_allclose(emp.fhat_sq(), [1.0, 0.0, 1.0], atol=1e-15)


class TestSeriesEstimator:
    def test_k_zero_is_mean_count(self):
        rng = substream(2)
        lam = make_family("intensity", "cosine", tau=20, beta=0.3)
        f = make_family("error-density", "poisson_kernel", rate=0.7)
        data = simulate_dataset(lam, f, 13, 30, seed=1)
        est = series_estimator(empirical_coeffs(data, 4), 0)
        assert est[0] == pytest.approx(len(merge(data.processes)) / 13)

    def test_threshold_zeroes_coefficients(self):
        emp = empirical_coeffs(dataset([[0.1, 0.6]], [0, 0.25, 0.5, 0.75]), 1)
        est = series_estimator(emp, 1)
        assert est[1] == 0 and est[-1] == 0
        assert est[0] == 2

    def test_noiseless_single_point(self):
        est = series_estimator(empirical_coeffs(dataset([[0.25]], [0.0]), 1), 1)
        np.testing.assert_allclose(est[1], -1j, atol=1e-15)
        assert est.real

    def test_division_by_fhat(self):
        rng = np.random.default_rng(3)
        data = dataset([rng.random(40), rng.random(10)], rng.random(6) * 0.2)
        emp = empirical_coeffs(data, 3)
        est = series_estimator(emp, 3)
        for j in range(-3, 4):
            expected = emp.ellhat[j] / emp.fhat[j] if emp.flag(j) else 0
            np.testing.assert_allclose(est[j], expected, rtol=1e-14)

    def test_rejects_dimension_outside_window(self):
        emp = empirical_coeffs(dataset([[0.2]], [0.1]), 2)
        with pytest.raises(ValueError):
            series_estimator(emp, 3)


class TestExactRisk:
    def test_zero_for_exact_band_limited(self):
        truth = make_family("intensity", "cosine", tau=2, beta=0.5)
        assert exact_risk(truth.coefficients(3), truth, WeightSequence.flat(), 10) == 0.0

    def test_missing_first_harmonic(self):
        truth = make_family("intensity", "cosine", tau=2, beta=0.5)
        est = FourierVector.from_nonnegative([2.0])
        assert exact_risk(est, truth, WeightSequence.flat(), 10) == pytest.approx(0.5)

    def test_geometric_tail(self):
        truth = make_family("intensity", "poisson_kernel", tau=1, r=0.5)
        for tail_K in (0, 3, 40):
            loss, tail = exact_risk(FourierVector.zeros(0), truth, WeightSequence.flat(), tail_K, return_tail=True)
            # the tail is an upper bound, so loss overshoots by at most the tail
            assert 5 / 3 * (1 - 1e-14) <= loss <= (5 / 3 + tail) * (1 + 1e-14)
        assert exact_risk(FourierVector.zeros(0), truth, WeightSequence.flat(), 40) == pytest.approx(5 / 3, abs=1e-15)

    def test_tail_bound_is_an_upper_bound_for_weighted_norms(self):
        truth = make_family("intensity", "poisson_kernel", tau=3, rate=0.4)
        r = math.exp(-0.4)
        for omega, exact in [
            (WeightSequence.pol(1), 9 * (1 + 2 * sum(j**2 * r ** (2 * j) for j in range(1, 3000)))),
            (WeightSequence.exp(0.1), 9 * (1 + 2 * sum(math.exp(0.2 * j) * r ** (2 * j) for j in range(1, 3000)))),
        ]:
            loss, tail = exact_risk(FourierVector.zeros(0), truth, omega, 10, return_tail=True)
            assert exact * (1 - 1e-12) <= loss <= (exact + tail) * (1 + 1e-12)
            assert tail > 0

    def test_rejections(self):
        band = make_family("intensity", "young_pol", tau=1, q=2, J=64)
        with pytest.raises(ValueError):
            exact_risk(FourierVector.zeros(2), band, WeightSequence.flat(), 10)
        pk = make_family("intensity", "poisson_kernel", tau=1, r=0.5)
        with pytest.raises(ValueError):
            exact_risk(FourierVector.zeros(2), pk, WeightSequence.from_table([1.0] * 20), 10)
        with pytest.raises(ValueError):
            exact_risk(FourierVector.zeros(5), pk, WeightSequence.flat(), 3)
        with pytest.raises(ValueError):
            exact_risk(FourierVector.zeros(0), pk, WeightSequence.exp(1.0), 10)


class TestMonteCarloMoments:
    """Light versions of the moment identities; the acceptance suite runs them at full size."""

    def test_unbiased_and_variance(self):
        lam = make_family("intensity", "cosine", tau=50, beta=0.5)
        f = make_family("error-density", "poisson_kernel", rate=0.7)
        R, n, m = 600, 20, 50
        ell = np.empty((R, 3), complex)
        fh = np.empty((R, 3), complex)
        for rep in range(R):
            emp = empirical_coeffs(simulate_dataset(lam, f, n, m, seed=21, keys=(rep,)), 2)
            ell[rep], fh[rep] = emp.ellhat.coefficients[2:], emp.fhat.coefficients[2:]
        target = lam.coefficient(np.arange(3)) * f.coefficient(np.arange(3))
        se = np.sqrt(50 / n / R)
        assert np.all(np.abs(ell.mean(axis=0).real - target) < 4 * se)
        var_ell = np.var(ell, axis=0, ddof=1)
        np.testing.assert_allclose(var_ell, 50 / n, rtol=0.2)
        var_f = np.var(fh[:, 1:], axis=0, ddof=1)
        np.testing.assert_allclose(var_f, (1 - f.coefficient(np.arange(1, 3)) ** 2) / m, rtol=0.2)


class TestWriteEstimate:
    def test_sidecar(self, tmp_path):
        emp = empirical_coeffs(dataset([[0.1, 0.6]], [0, 0.25, 0.5, 0.75]), 2)
        est = series_estimator(emp, 1)
        write_estimate(est, emp, tmp_path / "est.csv", {"mode": "fixed"})
        meta = json.loads((tmp_path / "est.json").read_text())
        assert meta == {"n": 1, "m": 4, "k": 1, "flags": [False, True, False], "mode": "fixed"}
        back = FourierVector.from_csv(tmp_path / "est.csv")
        np.testing.assert_array_equal(back.coefficients, est.coefficients)
