"""Tests for the product bulk, the overlap system and the assembled metric."""

import dataclasses
import itertools
import math

import numpy as np
import numpy.testing as npt
import pytest

from modules.bell_partition import bell_eval, circle, sphere_patch, torus2, user_manifold
from modules.chart_geometry import metric_from_expressions
from modules.errors import DegenerateFiberComponent, InconsistentTargets, MissingPsiData
from modules.global_glue import (
    OverlapSamples,
    assemble_metric,
    build_product_bulk,
    certify_glue,
    count_equations,
    export_system_csv,
    fiber_component,
    glue,
    restrict_to_base,
    solve_psi,
)
from modules.jet_core import Jet


@pytest.fixture(scope="module")
def circle_glue():
    bulk = build_product_bulk(circle(), "interval")
    spec, system = glue(bulk)
    return bulk, spec, system


@pytest.fixture(scope="module")
def torus_glue():
    bulk = build_product_bulk(torus2(), "interval")
    spec, system = glue(bulk)
    return bulk, spec, system


class TestCountEquations:
    @pytest.mark.parametrize("n,M", [(1, 7), (2, 15), (3, 31)])
    def test_values(self, n, M):
        assert count_equations(n) == M

    @pytest.mark.parametrize("n", range(1, 11))
    def test_matches_nonempty_subsets(self, n):
        charts = range(n + 2)
        subsets = sum(1 for r in range(1, n + 3) for _ in itertools.combinations(charts, r))
        assert count_equations(n) == subsets

    def test_needs_positive_dimension(self):
        with pytest.raises(ValueError):
            count_equations(0)


class TestTargets:
    def test_normal_gauge_fiber_is_one(self, circle_glue):
        _, spec, _ = circle_glue
        for target in spec.targets.values():
            assert target.phi.allclose(Jet.constant(1.0, 2, target.phi.order), atol=0.0)
            assert target.certificate["passed"]

    def test_targets_agree_on_overlaps(self, circle_glue):
        bulk, spec, _ = circle_glue
        shared = [p for p, s in zip(spec.samples.points, spec.samples.patterns) if len(s) == 2]
        assert shared
        for p in shared:
            first = spec.targets[0].at(bulk.atlas.local_coordinates(0, p))
            second = spec.targets[1].at(bulk.atlas.local_coordinates(1, p))
            assert first.allclose(second, atol=1e-9)


class TestOverlapSystem:
    def test_class_size_is_M_plus_one(self, circle_glue):
        bulk, _, system = circle_glue
        assert bulk.N == 8 and system.N == 8

    def test_patterns_cover_subset_lattice(self, circle_glue):
        _, spec, _ = circle_glue
        counts = spec.samples.pattern_counts()
        assert set(counts) == {"0", "1", "0,1"}
        assert all(0 < c <= 8 for c in counts.values())

    def test_underdetermined_with_levels(self, circle_glue):
        _, spec, system = circle_glue
        assert system.n_unknowns > system.n_rows
        assert set(system.level_counts()) <= {2, 3}
        for tag in system.row_tags:
            size = len(spec.samples.patterns[tag.point])
            assert tag.level == 1 + 3 - size
            if tag.compat:
                assert size == 2

    def test_minimum_norm_solution(self, circle_glue):
        _, spec, _ = circle_glue
        assert spec.solution.residual <= 1e-8
        assert spec.solution.rank == spec.solution.expected_rank

    def test_planted_solution(self, circle_glue, rng):
        _, _, system = circle_glue
        planted = rng.standard_normal(system.n_unknowns)
        solution = solve_psi(dataclasses.replace(system, rhs=system.matrix @ planted))
        assert solution.residual <= 1e-10

    def test_inconsistent_targets(self, circle_glue):
        _, _, system = circle_glue
        rhs = system.rhs.copy()
        row = next(r for r, tag in enumerate(system.row_tags) if tag.compat)
        rhs[row] += 1e-3
        with pytest.raises(InconsistentTargets):
            solve_psi(dataclasses.replace(system, rhs=rhs))

    def test_single_chart_single_point(self):
        base = user_manifold({"dim": 1, "charts": [{"center": [0.0], "half_widths": [1.0]}], "bounds": [[-0.5, 0.5]]})
        bulk = build_product_bulk(base, "interval", N=2)
        samples = OverlapSamples(np.array([[0.1, 0.05]]), (frozenset({0}),))
        spec, system = glue(bulk, order=0, samples=samples)
        assert (system.n_rows, system.n_unknowns) == (1, 2)
        assert fiber_component(spec, [0.1, 0.05]).constant_term == pytest.approx(1.0, abs=1e-12)

    def test_export_csv(self, circle_glue, tmp_path):
        _, _, system = circle_glue
        paths = export_system_csv(system, tmp_path / "csv")
        matrix_lines = (tmp_path / "csv" / "matrix.csv").read_text().splitlines()
        assert matrix_lines[0] == "row,column,value"
        assert len(matrix_lines) == system.matrix.nnz + 1
        rows_lines = (tmp_path / "csv" / "rows.csv").read_text().splitlines()
        assert len(rows_lines) == system.n_rows + 1
        assert len(paths) == 3


class TestAssembledMetric:
    def test_fiber_component_matches_target(self, circle_glue):
        _, spec, _ = circle_glue
        for p in spec.samples.points:
            assert fiber_component(spec, p).allclose(Jet.constant(1.0, 2, spec.order), atol=1e-8)

    def test_unit_psi_gives_bell_sum(self, circle_glue):
        bulk, spec, _ = circle_glue
        p = spec.samples.points[0]
        members = spec.samples.patterns[0]
        psis = {
            key: (Jet.constant(1.0, 2, spec.order) if key[2] == 0 else Jet.zero(2, spec.order))
            for key in spec.psis
        }
        fiber = fiber_component(dataclasses.replace(spec, psis=psis), p)
        expected = sum(bell_eval(bulk.atlas.elements[i].bell, bulk.atlas.local_coordinates(i, p)) for i in members)
        assert fiber.constant_term == pytest.approx(expected, rel=1e-12)

    def test_circle_certificate(self, circle_glue):
        _, spec, _ = circle_glue
        report = certify_glue(spec)
        assert report["assembled_residual"] <= 1e-6
        assert report["restriction_deviation"] == 0.0
        assert report["bell_sum_min"] > 0.0
        assert report["passed"]

    def test_restriction_is_exact(self, circle_glue):
        bulk, spec, _ = circle_glue
        p = spec.samples.points[-1]
        restricted = restrict_to_base(spec, p)
        expected = metric_from_expressions(bulk.base.metric, p[:1], spec.order)
        npt.assert_array_equal(restricted[0, 0].coeffs, expected[0, 0].coeffs)

    def test_outside_all_bells(self, circle_glue):
        _, spec, _ = circle_glue
        with pytest.raises(DegenerateFiberComponent):
            assemble_metric(spec, [0.0, 2.5])

    def test_point_without_psi(self, circle_glue):
        _, spec, _ = circle_glue
        with pytest.raises(MissingPsiData):
            assemble_metric(spec, [0.123, 0.05])


class TestTorusProduct:
    def test_sizes(self, torus_glue):
        bulk, _, system = torus_glue
        assert count_equations(bulk.n) == 15
        assert bulk.N == 16
        assert system.n_unknowns > system.n_rows
        assert set(system.level_counts()) <= {2, 3, 4}

    def test_certificate(self, torus_glue):
        _, spec, _ = torus_glue
        assert spec.solution.residual <= 1e-8
        report = certify_glue(spec)
        assert report["assembled_residual"] <= 1e-6
        assert report["restriction_deviation"] == 0.0
        assert report["passed"]


class TestSphereBase:
    def test_restriction_bit_for_bit(self):
        bulk = build_product_bulk(sphere_patch(), "interval")
        points = np.array([[math.pi / 2, 0.0, 0.0], [math.pi / 2 + 0.1, -0.1, 0.05]])
        samples = OverlapSamples(points, (frozenset({0}),) * 2)
        spec, _ = glue(bulk, samples=samples)
        for p in points:
            restricted = restrict_to_base(spec, p)
            expected = metric_from_expressions(bulk.base.metric, p[:2], spec.order)
            for a in range(2):
                for b in range(2):
                    npt.assert_array_equal(restricted[a, b].coeffs, expected[a, b].coeffs)
