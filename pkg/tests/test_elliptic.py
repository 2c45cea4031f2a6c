import cmath

import numpy as np
import pytest
from scipy.special import beta

from fermatlab.services.elliptic import (
    E_ROOT,
    LatticePoleError,
    ZeroOfWp,
    laurent_coefficients,
)
from fermatlab.services.expr_core import Finite, Pole, evaluate


SAMPLES = [0.3, 0.4 + 0.7j, -1.1 + 0.2j, 2.5 - 1.9j]


def test_laurent_coefficients():
    c = laurent_coefficients(4)
    assert c[3] == pytest.approx(1 / 28)
    # c_6 = 3 c_3^2 / (13 * 3)
    assert c[6] == pytest.approx(1 / (28 ** 2 * 13))
    assert np.all(c[[4, 5, 7, 8]] == 0.0)


def test_real_half_period(elliptic_context):
    expected = E_ROOT / 3 * beta(1 / 6, 0.5)
    assert elliptic_context.real_half_period == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("z", SAMPLES)
def test_differential_equation(elliptic_context, z):
    p, dp, pole = elliptic_context.wp_pair([z])
    assert not pole[0]
    scale = max(1.0, abs(4 * p[0] ** 3))
    assert abs(dp[0] ** 2 - 4 * p[0] ** 3 + 1) / scale < 1e-11


@pytest.mark.parametrize("z", SAMPLES)
def test_periodicity(elliptic_context, z):
    b1, b2 = elliptic_context.basis
    p0 = elliptic_context.wp(z).value
    for shift in (b1, b2, b1 - 2 * b2):
        assert elliptic_context.wp(z + shift).value == pytest.approx(p0, rel=1e-10)


def test_equianharmonic_rotation(elliptic_context):
    rho = cmath.exp(2j * cmath.pi / 3)
    z = 0.37 + 0.21j
    assert elliptic_context.wp(rho * z).value == pytest.approx(rho * elliptic_context.wp(z).value, rel=1e-11)


def test_poles_at_lattice_points(elliptic_context):
    assert elliptic_context.wp(0.0) == Pole(2)
    assert elliptic_context.wp_prime(elliptic_context.basis[0]) == Pole(3)
    with pytest.raises(LatticePoleError):
        elliptic_context.baker_pair(0.0)


def test_lattice_points_are_sorted_by_modulus(elliptic_context):
    points = elliptic_context.lattice_points(7.0)
    assert points[0] == 0
    assert len([w for w in points if abs(w) > 0 and abs(w) < abs(elliptic_context.basis[0]) * 1.01]) == 6
    assert all(abs(a) <= abs(b) for a, b in zip(points, points[1:]))


def test_zeros_of_wp(elliptic_context):
    zeros = elliptic_context.wp_zeros(4.0)
    assert zeros
    for w in zeros:
        assert abs(elliptic_context.wp(w).value) < 1e-10
    with pytest.raises(ZeroOfWp):
        elliptic_context.baker_pair(zeros[0])


@pytest.mark.parametrize("z", SAMPLES)
def test_baker_pair_sums_cubes_to_one(elliptic_context, z):
    pair = elliptic_context.baker_pair(z)
    assert abs(pair.p ** 3 + pair.q ** 3 - 1) < 1e-10 * max(1.0, abs(pair.p) ** 3)


def test_expression_nodes_follow_the_context(elliptic_context):
    z = 0.45 - 0.3j
    result = evaluate(elliptic_context.wp_prime_expr(), z)
    assert isinstance(result, Finite)
    assert result.value == pytest.approx(elliptic_context.wp_prime(z).value)
    gamma1, gamma2 = elliptic_context.baker_exprs()
    pair = elliptic_context.baker_pair(z)
    assert evaluate(gamma1, z).value == pytest.approx(pair.p)
    assert evaluate(gamma2, z).value == pytest.approx(pair.q)
