import math
from dataclasses import dataclass

import numpy as np
import pytest

import funcrate as fr
from funcrate.funcs import empirical_holder_check, evaluate

CATALOG = [
    fr.Constant(3.0, gamma=0.5),
    fr.Constant(-1.25),
    fr.Linear(2.0, 1.0),
    fr.Linear(-0.5),
    fr.PowerAbs(0.5, 0.0),
    fr.PowerAbs(0.3, 1.0),
    fr.PowerAbs(1.0, -2.0),
    fr.Sine(1.0, gamma=0.5),
    fr.Sine(3.0, gamma=1.0),
    fr.ClippedPower(0.5, 0.0, cap=1.5),
    fr.ClippedPower(0.8, 2.0, cap=0.5),
]


def test_evaluate_examples():
    assert evaluate(fr.Constant(3.0), 17.2) == 3.0
    assert evaluate(fr.PowerAbs(0.5, 0.0), 4.0) == 2.0
    assert evaluate(fr.Linear(2.0, 1.0), 3.0) == 7.0


def test_evaluate_vectorized():
    h = fr.PowerAbs(0.5, 1.0)
    xs = np.array([1.0, 2.0, 5.0])
    np.testing.assert_allclose(h(xs), [0.0, 1.0, 2.0])


def test_power_abs_euclidean_for_vectors():
    h = fr.PowerAbs(0.5, 0.0)
    states = np.array([[3.0, 4.0], [0.0, 0.0]])
    np.testing.assert_allclose(h(states), [math.sqrt(5.0), 0.0])


def test_clipped_power_caps():
    h = fr.ClippedPower(0.5, 0.0, cap=1.5)
    assert h(100.0) == 1.5
    assert h(1.0) == 1.0
    assert h.holder_norm == 1.0


def test_holder_check_power_abs():
    h = fr.PowerAbs(0.5, 0.0)
    val = empirical_holder_check(h, (-2.0, 2.0), 101)
    assert val <= 1.0 + 1e-9


def test_holder_check_constant_zero():
    assert empirical_holder_check(fr.Constant(5.0), (-3.0, 7.0), 100) == 0.0


def test_holder_check_sine_bound():
    h = fr.Sine(1.0, gamma=0.5)
    val = empirical_holder_check(h, (-10.0, 10.0), 1001)
    assert val <= 2.0**0.5 + 1e-9
    # dense-grid scan oracle: the bound really is respected on a finer grid
    xs = np.linspace(-10, 10, 4001)
    hx = np.sin(xs)
    i, j = np.triu_indices(len(xs), k=1)
    ratios = np.abs(hx[i] - hx[j]) / np.abs(xs[i] - xs[j]) ** 0.5
    assert ratios.max() <= 2.0**0.5 + 1e-9


def test_catalog_never_violates_declared_norms():
    for h in CATALOG:
        val = empirical_holder_check(h, (-10.0, 10.0), 10_000)
        assert val <= h.holder_norm + 1e-9, h


def test_holder_violation_raises():
    @dataclass(frozen=True)
    class Misdeclared:
        gamma: float = 1.0
        holder_norm: float = 0.1  # true Lipschitz constant is 1

        def __call__(self, x):
            return np.asarray(x, dtype=float)

    with pytest.raises(fr.HolderViolation):
        empirical_holder_check(Misdeclared(), (-1.0, 1.0), 50)


def test_linear_is_affine():
    h = fr.Linear(1.7, -0.3)
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=(2, 100))
    lhs = h(x + y) - h(x) - h(y) + h(0.0)
    np.testing.assert_allclose(lhs, 0.0, atol=1e-12)


def test_power_abs_gamma_one_is_abs():
    h = fr.PowerAbs(1.0, -2.0)
    xs = np.linspace(-5, 5, 101)
    np.testing.assert_array_equal(h(xs), np.abs(xs + 2.0))


def test_declared_norms():
    assert fr.Constant(7.0).holder_norm == 0.0
    assert fr.Linear(-3.0).holder_norm == 3.0
    assert fr.PowerAbs(0.5).holder_norm == 1.0
    assert fr.Sine(2.0, gamma=0.5).holder_norm == pytest.approx(
        2.0**0.5 * 2.0**0.5
    )


def test_validation():
    with pytest.raises(ValueError):
        fr.PowerAbs(0.0)
    with pytest.raises(ValueError):
        fr.PowerAbs(1.5)
    with pytest.raises(ValueError):
        fr.Sine(-1.0)
    with pytest.raises(ValueError):
        fr.ClippedPower(0.5, cap=0.0)
    with pytest.raises(ValueError):
        empirical_holder_check(fr.Constant(1.0), (-1, 1), 1)
