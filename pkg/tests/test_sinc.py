import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from nusest.exceptions import DuplicateAbscissa
from nusest.experiments import check_bound_dominance
from nusest.sinc import (EstimatorDesign, SampleVector, SincInterpolator, build_gram,
                         design_coefficients, error_bound, estimate, kernel_identity_residual,
                         quadratic_form, sinc)

import oracles

TWO_OVER_PI = 2.0 / math.pi


def distinct_abscissas(max_size=12, lo=-10.0, hi=10.0, min_gap=1e-3):
    return st.lists(st.floats(lo, hi), min_size=1, max_size=max_size).map(sorted).filter(
        lambda xs: len(xs) < 2 or min(b - a for a, b in zip(xs, xs[1:])) > min_gap)


@pytest.mark.parametrize("x, expected", [(0.0, 1.0), (1.0, 0.0), (0.5, TWO_OVER_PI)])
def test_sinc_values(x, expected):
    assert sinc(x) == pytest.approx(expected, abs=1e-16)


@pytest.mark.parametrize("x", [1e-12, -3e-9, 5e-7, 1e-6, -1e-6, 1.0000001e-6, 1e-4])
def test_sinc_near_zero_relative_error(x):
    mpmath.mp.dps = 40
    ref = float(mpmath.sin(mpmath.pi * x) / (mpmath.pi * x))
    assert abs(sinc(x) - ref) / ref < 1e-15


@given(st.floats(-1e3, 1e3))
def test_sinc_even(x):
    assert sinc(x) == sinc(-x)


def test_sinc_array_shape():
    out = sinc(np.zeros((2, 3)))
    assert out.shape == (2, 3)
    assert_array_equal(out, 1.0)


def test_gram_integer_grid_is_identity():
    assert_allclose(build_gram([0.0, 1.0, 2.0]), np.eye(3), atol=1e-16)


def test_gram_half_step():
    assert_allclose(build_gram([0.0, 0.5]), [[1, TWO_OVER_PI], [TWO_OVER_PI, 1]], rtol=1e-15)


def test_gram_random_psd(rng):
    x = np.sort(rng.uniform(0, 7, 8))
    eig = np.linalg.eigvalsh(build_gram(x))
    assert eig.min() >= -1e-12


def test_gram_rejects_duplicates():
    with pytest.raises(DuplicateAbscissa):
        build_gram([0.0, 1.0, 1.0 + 1e-10])
    build_gram([0.0, 1.0, 1.0 + 1e-10], eps_x=1e-11)


@settings(max_examples=60, deadline=None)
@given(distinct_abscissas())
def test_gram_symmetric_unit_diagonal(xs):
    g = build_gram(xs)
    assert_array_equal(g, g.T)
    assert_array_equal(np.diag(g), 1.0)


@settings(max_examples=60, deadline=None)
@given(distinct_abscissas(), st.floats(1e-6, 10.0), st.floats(-15.0, 15.0))
def test_regularized_solve_residual(xs, mu, x):
    design = EstimatorDesign.from_abscissas(xs, mu)
    c = design_coefficients(design, x)
    g = design.kernel_vector(x)
    resid = (design.gram + mu * np.eye(len(xs))) @ c - g
    assert np.max(np.abs(resid)) < 1e-8
    assert np.linalg.eigvalsh(design.gram + mu * np.eye(len(xs))).min() >= mu - 1e-10


@settings(max_examples=40, deadline=None)
@given(distinct_abscissas(max_size=6, min_gap=0.05), st.floats(1e-3, 2.0), st.floats(-8.0, 8.0))
def test_coefficients_match_gauss_jordan_oracle(xs, mu, x):
    design = EstimatorDesign.from_abscissas(xs, mu)
    expected = oracles.sinc_coefficients(xs, mu, x)
    assert_allclose(design_coefficients(design, x), expected, rtol=0, atol=1e-10)


def test_coefficients_single_abscissa():
    design = EstimatorDesign.from_abscissas([0.0], 0.0)
    for x in (0.0, 0.3, 2.7):
        assert_allclose(design_coefficients(design, x), [sinc(x)])


@pytest.mark.parametrize("mu", [0.0, 0.01, 1.0])
def test_coefficients_diagonal_system(mu):
    design = EstimatorDesign.from_abscissas(np.arange(6.0), mu)
    x = 2.3
    assert_allclose(design_coefficients(design, x),
                    [oracles.sinc(x - m) / (1 + mu) for m in range(6)], atol=1e-15)


def test_coefficients_two_by_two():
    # explicit 2x2 inverse: c = adj(G + mu I) g / det
    design = EstimatorDesign.from_abscissas([0.0, 0.5], 0.1)
    assert_allclose(design_coefficients(design, 0.25),
                    [0.5184303037904953, 0.5184303037904953], rtol=1e-13)


def test_coefficients_vectorized():
    design = EstimatorDesign.from_abscissas([0.0, 0.7, 1.9], 0.05)
    xs = np.array([-0.5, 0.1, 3.0])
    c = design_coefficients(design, xs)
    assert c.shape == (3, 3)
    for row, x in zip(c, xs):
        assert_allclose(row, design_coefficients(design, x), rtol=1e-14)


def test_estimate_zero_samples():
    design = EstimatorDesign.from_abscissas([0.0, 0.4, 1.3], 0.1)
    samples = SampleVector(np.zeros(3), 0.1, 1.0)
    assert_array_equal(estimate(design, samples, np.linspace(-2, 4, 7)), 0)


def test_estimate_two_by_two():
    design = EstimatorDesign.from_abscissas([0.0, 0.5], 0.01)
    samples = SampleVector([1 + 0j, 1j], 0.01, 1.0)
    val = estimate(design, samples, 0.3)
    assert val == pytest.approx(0.4414767632022352 + 0.6479568785081734j, rel=1e-13)


def test_estimate_is_linear(rng):
    design = EstimatorDesign.from_abscissas(np.sort(rng.uniform(0, 5, 7)), 0.02)
    z1, z2 = (np.array([1, 1j]) @ rng.standard_normal((2, 7)) for _ in range(2))
    x = rng.uniform(0, 5, 11)
    lhs = estimate(design, SampleVector(2 * z1 - 3j * z2, 0.02, 1.0), x)
    rhs = 2 * estimate(design, SampleVector(z1, 0.02, 1.0), x) - 3j * estimate(
        design, SampleVector(z2, 0.02, 1.0), x)
    assert_allclose(lhs, rhs, atol=1e-12)


def test_exact_reconstruction_on_integer_grid(rng):
    m = 16
    a = rng.uniform(-1, 1, m) + 1j * rng.uniform(-1, 1, m)
    design = EstimatorDesign.from_abscissas(np.arange(m, dtype=float), 0.0)
    samples = SampleVector(a, 0.0, 2.0)
    x = rng.uniform(-3, m + 3, 100)
    truth = np.array([sum(ap * oracles.sinc(xi - p) for p, ap in enumerate(a)) for xi in x])
    assert np.max(np.abs(estimate(design, samples, x) - truth)) < 1e-9


def test_error_bound_examples():
    design = EstimatorDesign.from_abscissas([0.0], 0.0)
    assert error_bound(design, 1.0, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert error_bound(design, 1.0, 0.5) == pytest.approx(1 - 4 / math.pi**2, rel=1e-14)
    assert error_bound(design, 3.0, 0.5) == pytest.approx(9 * 0.5947152654306489, rel=1e-14)


def test_error_bound_diagonal_closed_form():
    design = EstimatorDesign.from_abscissas(np.arange(10.0), 0.01)
    assert error_bound(design, 1.0, 4.5) == pytest.approx(0.04989625069282766, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(distinct_abscissas(), st.floats(1e-4, 1.0), st.floats(-15.0, 15.0))
def test_error_bound_non_negative(xs, mu, x):
    assert error_bound(EstimatorDesign.from_abscissas(xs, mu), 2.0, x) >= 0


def test_minimizer_optimality(rng):
    for _ in range(20):
        m = int(rng.integers(1, 10))
        xs = np.sort(rng.uniform(0, m, m))
        if m > 1 and np.min(np.diff(xs)) < 1e-3:
            continue
        design = EstimatorDesign.from_abscissas(xs, float(rng.uniform(1e-3, 1)))
        x = float(rng.uniform(-1, m + 1))
        c = design_coefficients(design, x)
        q0 = quadratic_form(design, c, x)
        assert q0 == pytest.approx(error_bound(design, 1.0, x), abs=1e-12)
        for _ in range(20):
            d = rng.standard_normal(m)
            d *= 1e-3 / np.linalg.norm(d)
            assert quadratic_form(design, c + d, x) >= q0 - 1e-15


@pytest.mark.parametrize("y, yp, p, tol", [(0.3, 0.7, 10_000, 1e-3), (2.0, 5.0, 1_000, 1e-2)])
def test_kernel_identity(y, yp, p, tol):
    assert kernel_identity_residual(y, yp, p) < tol
    assert kernel_identity_residual(y, yp, p) < kernel_identity_residual(y, yp, p // 100)


def test_kernel_identity_at_origin():
    assert kernel_identity_residual(0.0, 0.0, 1) == 0.0


def test_mu_zero_fallback_warns():
    xs = 0.125 * np.arange(28)
    with pytest.warns(RuntimeWarning, match="ridge"):
        design = EstimatorDesign.from_abscissas(xs, 0.0)
    assert design.ridge == pytest.approx(1e-12)
    assert design.mu == 0.0


def test_mu_zero_without_fallback_when_well_posed():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        design = EstimatorDesign.from_abscissas(np.arange(5.0), 0.0)
    assert design.ridge == 0.0


def test_design_is_read_only():
    design = EstimatorDesign.from_abscissas([0.0, 1.5], 0.1)
    with pytest.raises(ValueError):
        design.gram[0, 0] = 2.0
    with pytest.raises(AttributeError):
        design.mu = 3.0


def test_bound_holds_on_average_over_random_signals():
    results = check_bound_dominance(n_configs=20, seed=7, n_draws=4000, signal_mode="random")
    assert all(r.passed for r in results)


def test_bound_is_not_worst_case_for_a_pure_tone():
    # |s(x)| = 1 everywhere and bandwidth < 1, yet the error exceeds the bound
    design = EstimatorDesign.from_abscissas([0.0], 0.0)
    tone = lambda x: np.exp(1j * np.pi * 0.999 * x)  # noqa: E731
    err = abs(tone(0.5) - estimate(design, SampleVector([tone(0.0)], 0.0, 1.0), 0.5)) ** 2
    assert err > 2 * error_bound(design, 1.0, 0.5)


class TestSincInterpolator:
    def test_get_params_roundtrip(self):
        est = SincInterpolator(noise_variance=0.1, amplitude_bound=2.0)
        assert est.get_params() == {"noise_variance": 0.1, "amplitude_bound": 2.0,
                                    "eps_x": 1e-9}
        est.set_params(noise_variance=0.3)
        assert est.noise_variance == 0.3

    def test_matches_functional_api(self, rng):
        x = np.sort(rng.uniform(0, 6, 9))
        z = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        est = SincInterpolator(noise_variance=0.04, amplitude_bound=2.0).fit(x, z)
        design = EstimatorDesign.from_abscissas(x, 0.01)
        xt = np.linspace(-1, 7, 13)
        assert_allclose(est.predict(xt), estimate(design, SampleVector(z, 0.04, 2.0), xt))
        assert_allclose(est.error_bound(xt), error_bound(design, 2.0, xt))

    def test_accepts_column_input(self):
        est = SincInterpolator().fit(np.arange(3.0)[:, None], [1, 2, 3])
        assert_allclose(est.predict([[1.0]]), [2.0], atol=1e-15)

    def test_unfitted(self):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            SincInterpolator().predict([0.0])

    def test_validation(self):
        with pytest.raises(ValueError):
            SincInterpolator().fit([0.0, np.nan], [1, 2])
        with pytest.raises(ValueError):
            SincInterpolator().fit([0.0, 1.0], [1, 2, 3])
        with pytest.raises(ValueError):
            SincInterpolator(amplitude_bound=0.0).fit([0.0], [1])
