import cmath
import math

import numpy as np
import pytest

from fermatlab.services.expr_core import (
    BRANCH,
    FINITE,
    POLE,
    BranchViolation,
    BranchViolationError,
    Const,
    Finite,
    Pole,
    PoleAtBasePoint,
    SampleAtPole,
    Z,
    compose,
    compose_jets,
    evaluate,
    evaluate_many,
    exp,
    fermat_terms,
    field_apply,
    has_pole_nodes,
    log,
    residual,
    root,
    taylor_jet,
    taylor_jets,
)


def test_arithmetic_nodes_evaluate():
    f = (Z + 1) * (Z - 2) / (Z + 3)
    result = evaluate(f, 1.0)
    assert isinstance(result, Finite)
    assert result.value == pytest.approx(2 * -1 / 4)


def test_zero_power_is_constant_one():
    assert isinstance(Z ** 0, Const)
    assert Z ** 1 is Z


def test_fractional_power_is_rejected():
    with pytest.raises(TypeError):
        Z ** 0.5


def test_simple_pole_reports_order():
    assert evaluate(Z ** -1, 0.0) == Pole(1)
    assert isinstance(evaluate(1 / Z, 0.0), Pole)
    assert evaluate(Z ** -2, 0.0) == Pole(2)
    assert isinstance(evaluate(1 / (Z - 0.5), 0.5), Pole)


def test_branch_cut_is_reported_not_raised():
    result = evaluate(log(Z), -1.0)
    assert isinstance(result, BranchViolation)
    assert isinstance(evaluate(root(Z, 3), -8.0), BranchViolation)


def test_principal_branches():
    assert evaluate(root(Z, 3), 8.0).value == pytest.approx(2.0)
    assert evaluate(log(Z), 1j).value == pytest.approx(1j * math.pi / 2)


def test_evaluate_many_marks_status():
    zs = np.array([0.5, 1.0, -2.0])
    batch = evaluate_many(1 / (Z - 1) + log(Z), zs)
    assert list(batch.status) == [FINITE, POLE, BRANCH]
    assert batch.values[1] == 0.0
    assert batch.finite.tolist() == [True, False, False]


def test_exp_taylor_coefficients():
    jet = taylor_jet(exp(Z), 0.0, 6)
    expected = [1 / math.factorial(k) for k in range(7)]
    np.testing.assert_allclose(jet.coeffs.real, expected, rtol=1e-14)
    assert jet.derivative(4) == pytest.approx(1.0)


def test_jets_match_closed_form_derivatives():
    f = exp(Z ** 2) * root(1 + Z, 2)
    z0 = 0.3 + 0.1j
    jet = taylor_jet(f, z0, 2)
    g = cmath.exp(z0 ** 2)
    s = cmath.sqrt(1 + z0)
    first = 2 * z0 * g * s + g / (2 * s)
    assert jet.derivative(0) == pytest.approx(g * s)
    assert jet.derivative(1) == pytest.approx(first, rel=1e-12)


def test_batched_jets_agree_with_single_jets():
    f = 1 / (2 - Z) + exp(Z) * Z
    zs = [0.1, -0.4 + 0.2j, 0.7j]
    coeffs, status = taylor_jets(f, zs, 5)
    assert (status == FINITE).all()
    for i, z in enumerate(zs):
        np.testing.assert_allclose(coeffs[:, i], taylor_jet(f, z, 5).coeffs, rtol=1e-13)


def test_taylor_jet_raises_at_pole_and_cut():
    with pytest.raises(PoleAtBasePoint):
        taylor_jet(1 / Z, 0.0)
    with pytest.raises(BranchViolationError):
        taylor_jet(log(Z), -3.0)


def test_jet_algebra():
    a = taylor_jet(Z + 2, 0.0, 4)
    inv = a.reciprocal()
    np.testing.assert_allclose((a * inv).coeffs, [1, 0, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(a.log().exp().coeffs, a.coeffs, rtol=1e-13)
    np.testing.assert_allclose(a.power(0.5).coeffs, taylor_jet(root(Z + 2, 2), 0.0, 4).coeffs, rtol=1e-13)


def test_compose_jets_matches_composed_expression():
    inner = taylor_jet(2 * Z + Z ** 2, 0.5, 5)
    outer = taylor_jet(exp(Z), inner.coeffs[0], 5)
    direct = taylor_jet(compose(exp(Z), 2 * Z + Z ** 2), 0.5, 5)
    np.testing.assert_allclose(compose_jets(outer, inner).coeffs, direct.coeffs, rtol=1e-12)


def test_field_apply_is_kth_derivative():
    assert field_apply(Z ** 5, 3, 1.0) == pytest.approx(60.0)


def test_has_pole_nodes():
    assert has_pole_nodes(1 / (Z + 1))
    assert has_pole_nodes(Z ** -1)
    assert not has_pole_nodes(exp(Z) * Z ** 3)


def test_fermat_residual_of_trigonometric_pair():
    f = [0.5 * (exp(1j * Z) + exp(-1j * Z)), -0.5j * (exp(1j * Z) - exp(-1j * Z))]
    for z in (0.2, 1.3 - 0.4j):
        assert residual(f, [2, 2], z) < 1e-14


def test_fermat_terms_shape_and_coefficients():
    terms, status = fermat_terms([Z, Z], [2, 3], [0.5, 2.0], coefficients=[Const(2.0), Const(1.0)])
    assert terms.shape == (2, 2)
    np.testing.assert_allclose(terms[:, 0], [0.5, 0.125])
    assert (status == FINITE).all()


def test_fermat_terms_needs_matching_lengths():
    with pytest.raises(ValueError):
        fermat_terms([Z], [2, 3], [0.1])


def test_residual_at_pole_raises():
    with pytest.raises(SampleAtPole):
        residual([1 / Z, Z], [2, 2], 0.0)
