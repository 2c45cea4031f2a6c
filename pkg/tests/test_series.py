import math
from fractions import Fraction

import numpy as np
import pytest

from fermatlab.services.expr_core import BranchViolationError
from fermatlab.services.series import LaurentSeries, NeedsRamification


def geometric(length=10):
    """1/(1 - t)"""
    return LaurentSeries.from_coefficients([1.0] * length)


def test_constructors():
    s = LaurentSeries.monomial(3.0, -2, 5)
    assert s.lo == -2 and s.prec == 3
    assert s.coefficient(-2) == 3.0
    assert s.coefficient(-5) == 0.0
    with pytest.raises(IndexError):
        s.coefficient(3)


def test_inverse_of_geometric_series():
    inv = geometric().inverse()
    np.testing.assert_allclose(inv.values(), [1, -1] + [0] * 8, atol=1e-14)


def test_laurent_product_shifts_orders():
    t_inv = LaurentSeries.monomial(1.0, -1, 8)
    product = t_inv * geometric(8)
    assert product.lo == -1
    assert product.coefficient(-1) == 1.0
    assert product.coefficient(3) == 1.0


def test_sum_keeps_smaller_precision():
    a = LaurentSeries.from_coefficients([1, 2, 3], lo=0)
    b = LaurentSeries.from_coefficients([1, 1], lo=-1)
    total = a + b
    assert total.lo == -1
    assert total.prec == 1
    np.testing.assert_allclose(total.values(), [1, 2])


def test_integer_power_matches_repeated_product():
    s = LaurentSeries.from_coefficients([2.0, 1.0, 0.5], length=8)
    np.testing.assert_allclose((s ** 3).values(), (s * s * s).values(), rtol=1e-14)
    np.testing.assert_allclose((s ** -1 * s).values(), [1] + [0] * 7, atol=1e-14)


def test_square_root_of_binomial():
    s = LaurentSeries.from_coefficients([1.0, 1.0], length=6)
    half = s.power(Fraction(1, 2))
    expected = [math.comb(1, 0), 0.5, -0.125, 0.0625, -0.0390625, 0.02734375]
    np.testing.assert_allclose(half.values().real, expected, rtol=1e-13)


def test_root_of_leading_monomial():
    s = LaurentSeries.monomial(8.0, 3, 6)
    cube = s.nth_root(3)
    assert cube.lo == 1
    assert cube.coefficient(1) == pytest.approx(2.0)


def test_root_needs_ramification():
    with pytest.raises(NeedsRamification):
        LaurentSeries.monomial(1.0, 1, 4).nth_root(2)


def test_principal_root_refuses_the_cut():
    with pytest.raises(BranchViolationError):
        LaurentSeries.constant(-4.0, 4).nth_root(2)


def test_chosen_branch_of_root():
    root = LaurentSeries.constant(-4.0, 4).nth_root(2, branch=0)
    assert root.coefficient(0) == pytest.approx(2j)
    other = LaurentSeries.constant(-4.0, 4).nth_root(2, branch=1)
    assert other.coefficient(0) == pytest.approx(-2j)


def test_order_ignores_numerical_noise():
    s = LaurentSeries.from_coefficients([1e-14, 0.0, 3.0, 1.0])
    assert s.order() == 2
    assert LaurentSeries.from_coefficients([0.0, 0.0]).order() is None


def test_derivations():
    t = LaurentSeries.monomial(1.0, 1, 4)
    d = (t ** 3).d_sigma()
    assert d.lo == 2
    assert d.coefficient(2) == pytest.approx(3.0)

    xi = LaurentSeries.base_coordinate(0.5, 4, depth=2)
    square = xi * xi
    dxi = square.d_xi()
    assert dxi.coefficient(0, 0) == pytest.approx(1.0)
    assert dxi.tdeg == square.tdeg - 1


def test_depth_mismatch_raises():
    a = LaurentSeries.constant(1.0, 3, depth=0)
    b = LaurentSeries.constant(1.0, 3, depth=2)
    with pytest.raises(ValueError):
        a + b
