import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slscreen import Dataset, DimensionMismatch, LossConvention, curvature_bound, loss_gradient, loss_value
from slscreen.loss import alpha_vector, spectral_norm

from conftest import random_dataset

U, N = LossConvention.UNNORMALIZED, LossConvention.NORMALIZED


def test_loss_at_zero():
    d = random_dataset(0, 3, 4)
    assert loss_value(np.zeros(4), d, N) == pytest.approx(np.log(2), abs=1e-15)
    assert loss_value(np.zeros(4), d, U) == pytest.approx(3 * np.log(2), abs=1e-15)


def test_loss_saturated_margin():
    d = Dataset([[1.0]], [1.0])
    v = loss_value(np.array([40.0]), d)
    assert np.isfinite(v) and 0 < v < 1e-17
    big = loss_value(np.array([-800.0]), d)
    assert big == pytest.approx(800.0)


def test_gradient_at_zero():
    d = random_dataset(1, 6, 3)
    for c in (U, N):
        expected = -(c.scale(d.m) / 2) * (d.y @ d.a)
        assert np.allclose(loss_gradient(np.zeros(3), d, c), expected, atol=1e-15)


def test_zero_column_has_zero_gradient():
    d = random_dataset(2, 7, 3)
    a = d.a.copy()
    a[:, 1] = 0.0
    d = Dataset(a, d.y)
    x = np.random.default_rng(0).standard_normal(3)
    assert loss_gradient(x, d)[1] == 0.0


def test_gradient_finite_differences_5x4():
    d = random_dataset(3, 5, 4)
    rng = np.random.default_rng(3)
    h = 1e-5
    for _ in range(20):
        x = rng.standard_normal(4)
        g = loss_gradient(x, d)
        fd = np.array([(loss_value(x + h * e, d) - loss_value(x - h * e, d)) / (2 * h) for e in np.eye(4)])
        assert np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-12) < 1e-5


def test_gradient_is_scaled_alpha_identity():
    d = random_dataset(4, 9, 5)
    x = np.random.default_rng(4).standard_normal(5)
    for c in (U, N):
        assert np.array_equal(loss_gradient(x, d, c), -c.scale(d.m) * (d.a.T @ alpha_vector(x, d)))


def test_alpha_examples():
    d = random_dataset(5, 6, 2)
    assert np.array_equal(alpha_vector(np.zeros(2), d), d.y / 2)
    sat = Dataset([[1.0]], [1.0])
    a1 = alpha_vector(np.array([50.0]), sat)[0]
    assert 0 < a1 < 2e-22


def test_alpha_extended_precision():
    mpmath.mp.dps = 40
    d = random_dataset(6, 25, 4, scale=5.0)
    x = np.random.default_rng(6).standard_normal(4) * 3
    alpha = alpha_vector(x, d)
    margin = d.a @ x
    for i in range(d.m):
        t = mpmath.mpf(float(d.y[i])) * mpmath.mpf(float(margin[i]))
        exact = mpmath.mpf(float(d.y[i])) / (1 + mpmath.exp(t))
        assert abs(alpha[i] - float(exact)) <= 1e-14 * abs(float(exact)) + 1e-300


def test_loss_extended_precision_extremes():
    mpmath.mp.dps = 40
    for t in [-700.0, -40.0, -30.0, -1e-8, 0.0, 1e-8, 29.9, 30.0, 30.1, 50.0, 700.0]:
        d = Dataset([[1.0]], [1.0])
        got = loss_value(np.array([t]), d)
        exact = float(mpmath.log1p(mpmath.exp(-mpmath.mpf(t))))
        assert got == pytest.approx(exact, rel=1e-14, abs=1e-300)


def test_curvature_examples():
    assert curvature_bound(Dataset(np.eye(2), [1.0, -1.0]), U) == pytest.approx(0.25, rel=1e-5)
    assert curvature_bound(Dataset([[2.0]], [1.0]), N) == pytest.approx(1.0, rel=1e-5)
    assert curvature_bound(Dataset(np.zeros((3, 2)), [1.0, -1.0, 1.0]), U) == 0.0


def test_curvature_bounds_hessian_spectrum():
    d = random_dataset(7, 20, 10)
    bound = curvature_bound(d, U)
    assert spectral_norm(d.a) == pytest.approx(np.linalg.norm(d.a, 2), rel=1e-6)
    rng = np.random.default_rng(7)
    for _ in range(100):
        x = rng.standard_normal(10) * rng.uniform(0, 3)
        s = 1 / (1 + np.exp(-(d.a @ x)))
        hess = d.a.T @ (d.a * (s * (1 - s))[:, None])
        assert np.linalg.eigvalsh(hess).max() <= bound


def test_dimension_mismatch():
    d = random_dataset(8, 4, 3)
    with pytest.raises(DimensionMismatch):
        loss_value(np.zeros(2), d)
    with pytest.raises(DimensionMismatch):
        loss_gradient(np.zeros(4), d)
    with pytest.raises(DimensionMismatch):
        alpha_vector(np.zeros((3, 1)), d)


@given(st.integers(0, 10_000), st.floats(0.01, 0.99))
def test_convexity_probe(seed, lam):
    d = random_dataset(seed % 50, 8, 3)
    rng = np.random.default_rng(seed)
    x, xp = rng.standard_normal(3) * 5, rng.standard_normal(3) * 5
    mid = loss_value(lam * x + (1 - lam) * xp, d)
    assert mid <= lam * loss_value(x, d) + (1 - lam) * loss_value(xp, d) + 1e-12


@given(st.integers(0, 10_000))
def test_normalized_is_mean(seed):
    d = random_dataset(seed % 50, 1 + seed % 17, 3)
    x = np.random.default_rng(seed).standard_normal(3) * 10
    assert loss_value(x, d, N) == pytest.approx(loss_value(x, d, U) / d.m, rel=1e-15)


@given(st.integers(0, 10_000))
def test_no_overflow_large_margins(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((6, 3))
    d = Dataset(a, np.sign(rng.standard_normal(6)) + (rng.standard_normal(6) == 0))
    x = rng.standard_normal(3)
    x *= 1e4 / max(np.abs(a @ x).max(), 1e-12)
    assert np.isfinite(loss_value(x, d))
    assert np.all(np.isfinite(loss_gradient(x, d)))
    assert np.all(np.isfinite(alpha_vector(x, d)))
