import numpy as np
import pytest

from gattn.errors import UnknownOperatorError
from gattn.gradcheck import CheckResult, check_op, numeric_gradient, relative_error, well_separated_projection


def test_numeric_gradient_of_quadratic():
    x = np.array([1.0, -2.0, 3.0])
    grad = numeric_gradient(lambda: float(np.sum(x**2)), x)
    np.testing.assert_allclose(grad, 2 * x, atol=1e-8)
    np.testing.assert_array_equal(x, [1.0, -2.0, 3.0])


def test_relative_error_is_scale_relative():
    assert relative_error(np.array([1.0, 1e-12]), np.array([1.0, 0.0])) < 1e-11
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_error(np.array([2.0]), np.array([1.0])) == 0.5


def test_well_separated_projection():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 10))
    p = well_separated_projection(x, rng, min_gap=1e-3)
    y = np.sort(np.abs(x.T @ p) / np.linalg.norm(p))
    assert y[0] > 1e-3 and np.diff(y).min() > 1e-3
    with pytest.raises(RuntimeError):
        well_separated_projection(np.ones((2, 3)), rng)


def test_check_result():
    assert CheckResult("x", {"a": 1e-7, "b": 1e-6}).passed(1e-5)
    assert not CheckResult("x", {"a": 1e-4}).passed(1e-5)
    assert not CheckResult("x", skipped="tie").passed(1.0)


def test_unknown_operator():
    with pytest.raises(UnknownOperatorError):
        check_op("sgat")
