import numpy as np
import pytest

from fermatlab.models import GridSpec
from fermatlab.services import solutions as solutions_module
from fermatlab.services.elliptic import default_context
from fermatlab.services.expr_core import Z, compose, exp
from fermatlab.services.solutions import (
    CATALOG_IDS,
    Domain,
    ParameterOutOfRange,
    SolutionKind,
    UnknownFamily,
    k3n5_constants,
    pole_adjacent,
    sample_grid,
)


def test_sample_grid_polar_and_random():
    polar = sample_grid(GridSpec(radius=0.5, points=200))
    assert polar.size == 200
    assert np.abs(polar).max() <= 0.5 + 1e-15
    random = sample_grid(GridSpec(kind="random", radius=0.5, points=50, seed=3))
    np.testing.assert_array_equal(random, sample_grid(GridSpec(kind="random", radius=0.5, points=50, seed=3)))
    assert sample_grid(GridSpec(points=10, include_center=True))[0] == 0


def test_holo_equal_example(factory):
    solution = factory.holo_equal(3, 2, [0.5])
    assert solution.domain == Domain.UNIT_DISC
    assert solution.kind == SolutionKind.HOLOMORPHIC
    report = factory.verify(solution, GridSpec(radius=0.9, points=200))
    assert report.passed
    assert report.max_residual <= 1e-9


def test_holo_equal_rejects_inadmissible_parameter(factory):
    with pytest.raises(ParameterOutOfRange):
        factory.holo_equal(3, 2, [1.2])
    with pytest.raises(ParameterOutOfRange):
        factory.holo_equal(3, 3, [0.5])
    with pytest.raises(ParameterOutOfRange):
        factory.holo_equal(3, 2, [0.0])


def test_holo_general_uses_lcm_powers(factory):
    solution = factory.holo_general([2, 3, 6], [0.5, 0.4])
    assert solution.params["lcm"] == 6
    assert solution.params["powers"] == [3, 2, 1]
    assert factory.verify(solution).passed


def test_mero_general_has_pole_at_origin(factory):
    solution = factory.mero_general([2, 3], [1.2])
    assert solution.kind == SolutionKind.MEROMORPHIC
    assert solution.known_poles == (0j,)
    report = factory.verify(solution, GridSpec(radius=0.9, points=200, include_center=True))
    assert report.passed
    assert report.skipped_near_pole == 1


def test_mero_general_rejects_small_sum(factory):
    with pytest.raises(ParameterOutOfRange):
        factory.mero_general([3, 3], [0.5])


def test_mero_equal_variants(factory):
    two = factory.mero_equal(4, 4, [1.0, 0.5, 0.5], variant=2)
    assert factory.verify(two).passed
    one = factory.mero_equal(3, 5, [0.6], b=1.5 + 0.5j, variant=1)
    assert one.k == 5
    assert one.params["variant"] == 1
    assert factory.verify(one).passed
    with pytest.raises(ParameterOutOfRange):
        factory.mero_equal(3, 5, [0.6], b=None, variant=1)
    with pytest.raises(ParameterOutOfRange):
        factory.mero_equal(2, 5, [0.9], b=1.0, variant=1)


@pytest.mark.parametrize("family_id", [fid for fid in CATALOG_IDS if fid != "K3N5_M"])
def test_catalog_entries_verify(factory, family_id):
    solution = factory.catalog(family_id)
    tolerance = 1e-8 if family_id == "K2N3_BAKER" else 1e-9
    report = factory.verify(solution, GridSpec(radius=0.9, points=200), tolerance)
    assert report.passed, report.failures[:3]


def test_k3n5_meromorphic_within_branch_radius(factory):
    solution = factory.catalog("K3N5_M")
    assert any("consistent" in note for note in solution.notes)
    report = factory.verify(solution, GridSpec(radius=0.7, points=200), 1e-8)
    assert report.passed


def test_k3n5_constants_are_finite():
    p1, p2 = k3n5_constants()
    assert np.isfinite(p1) and np.isfinite(p2)
    assert abs(p2) > 0


def test_catalog_with_entire_inner_function(factory):
    solution = factory.catalog("K3N4_H", inner=exp(Z))
    assert solution.domain == Domain.COMPLEX_PLANE
    assert solution.kind == SolutionKind.HOLOMORPHIC
    assert factory.verify(solution, GridSpec(radius=0.9, points=100)).passed


def test_trigonometric_pair_with_pole_inner_function(factory):
    solution = factory.catalog("K2N2_TRIG", inner=1 / (Z - 2))
    assert solution.kind == SolutionKind.MEROMORPHIC
    assert factory.verify(solution, GridSpec(radius=0.9, points=100)).passed


def test_unknown_family(factory):
    with pytest.raises(UnknownFamily):
        factory.catalog("K9N9")
    with pytest.raises(UnknownFamily):
        factory.build("holo-odd", n=3, k=2, a=[0.5])


def test_unit_disc_grid_must_stay_inside(factory):
    with pytest.raises(ParameterOutOfRange):
        factory.verify(factory.holo_equal(3, 2, [0.5]), GridSpec(radius=1.0))


@pytest.mark.parametrize(
    "family, kwargs",
    [
        ("holo-equal", {"n": 4, "k": 3}),
        ("mero-equal", {"n": 3, "k": 2}),
        ("mero-equal", {"n": 3, "k": 5, "variant": 1}),
        ("holo-general", {"exponents": [2, 3, 4]}),
        ("mero-general", {"exponents": [3, 4]}),
    ],
)
def test_random_draws_are_admissible(factory, rng, family, kwargs):
    for _ in range(5):
        params = factory.draw_parameters(family, rng, **kwargs)
        solution = factory.build(**params)
        report = factory.verify(solution, GridSpec(radius=0.9, points=120))
        assert report.passed, params


def test_perturbed_solution_fails(factory):
    solution = factory.perturb(factory.catalog("K3N2_H"), index=1, eps=1e-3)
    report = factory.verify(solution, GridSpec(radius=0.9, points=50))
    assert not report.passed
    assert report.failures


def test_summary_serializes_members(factory):
    summary = factory.summarize(factory.holo_equal(3, 2, [0.5]))
    assert summary.family_id == "holo-equal"
    assert len(summary.exprs) == 2
    assert summary.exponents == [3, 3]


def test_pole_guard_skips_samples_near_inner_function_poles(factory, monkeypatch):
    samples = np.array([0.3 + 5e-4, 0.3 - 2e-4j, 0.5 + 0.1j])
    monkeypatch.setattr(solutions_module, "sample_grid", lambda grid: samples)
    solution = factory.catalog("K2N2_TRIG", inner=Z - 0.3)
    assert solution.known_poles == ()
    report = factory.verify(solution, GridSpec(radius=0.9))
    assert report.skipped_near_pole == 2
    assert report.accepted == 1
    assert report.passed


def test_pole_guard_counts_on_a_grid_straddling_an_inner_pole(factory, monkeypatch):
    samples = np.array([0.5 + 3e-4, 0.5 - 8e-4j, 0.5 + 2e-3, 0.2, -0.4j])
    monkeypatch.setattr(solutions_module, "sample_grid", lambda grid: samples)
    solution = factory.catalog("K2N2_TRIG", inner=1 / (Z - 0.5))
    report = factory.verify(solution, GridSpec(radius=0.9))
    assert report.skipped_near_pole == 2
    assert report.accepted == 3
    assert report.max_residual <= 1e-9


def test_pole_adjacent_pulls_back_through_compositions():
    samples = np.array([0.3 + 1e-4, 0.3 + 0.1, 0.3 + 0.2j])
    reciprocal = compose(1 / Z, Z - 0.3)
    np.testing.assert_array_equal(pole_adjacent([reciprocal], samples), [True, False, False])
    wp = default_context().wp_expr(Z - 0.3)
    np.testing.assert_array_equal(pole_adjacent([wp], samples), [True, False, False])
    np.testing.assert_array_equal(pole_adjacent([Z * Z + 1], samples), [False, False, False])
