"""Tests for the codimension-one Einstein extension."""

import dataclasses
import math
import time

import numpy as np
import numpy.testing as npt
import pytest

from modules.chart_geometry import BulkChartMetric, ChartMetric, metric_from_expressions
from modules.errors import ConstraintSolveFailed, DimensionTwoWithNonzeroLambda
from modules.jet_core import Jet
from modules.local_embed import (
    CONSTRAINT_TOL,
    SeedMetric,
    certify,
    constraint_components,
    extend_iterated,
    extend_metric,
    initial_data_solve,
)

SPHERE2 = [["1", "0"], [None, "sin(x1)^2"]]
WARPED = [["1", "0"], [None, "(1 + 0.2*x1 + 0.3*x1^2)^2"]]


def slab(H, order):
    """e^{2Hy}(dx1² + dx2²) + dy² expanded at the origin"""
    warp = f"exp({2 * H!r}*y)"
    return metric_from_expressions([[warp, "0", "0"], [None, warp, "0"], [None, None, "1"]], [0.0] * 3, order)


def flat_seed(n, order):
    return SeedMetric(ChartMetric.euclidean(n, order))


class TestInitialData:
    def test_flat_line_is_trivial(self):
        data = initial_data_solve(flat_seed(1, 4), 0.0)
        assert data.lambda0 == 0.0
        assert all(not c.terms() for c in data.c1.flat)
        assert data.iterations == 0

    @pytest.mark.parametrize("lam,H", [(0.0, 0.0), (-0.25, 0.5)])
    def test_flat_plane_picks_umbilic_root(self, lam, H):
        data = initial_data_solve(flat_seed(2, 5), lam)
        assert data.lambda0 == pytest.approx(H, abs=1e-12)
        assert data.constraint_norm <= CONSTRAINT_TOL

    def test_ansatz_satisfies_constraints(self):
        seed = flat_seed(2, 5)
        data = initial_data_solve(seed, -0.25, initial_guess=(0.5, None))
        assert data.iterations == 0
        for c in constraint_components(seed, data.c1, -0.25, 1, 5):
            npt.assert_allclose(c.coeffs, 0.0, atol=1e-12)

    def test_sphere_constraints(self):
        seed = SeedMetric.from_expressions(SPHERE2, [math.pi / 2, 0.0], 5)
        data = initial_data_solve(seed, 1.0)
        assert data.constraint_norm <= CONSTRAINT_TOL

    def test_gauss_newton_on_warped_seed(self):
        seed = SeedMetric.from_expressions(WARPED, [0.0, 0.0], 4)
        data = initial_data_solve(seed, -1.0)
        assert data.iterations >= 1
        assert data.constraint_norm <= CONSTRAINT_TOL
        # measured again from the returned data
        for c in constraint_components(seed, data.c1, -1.0, 1, 4):
            assert np.max(np.abs(c.coeffs)) <= CONSTRAINT_TOL

    def test_stagnation_reports_best_residual(self):
        seed = SeedMetric.from_expressions(WARPED, [0.0, 0.0], 4)
        with pytest.raises(ConstraintSolveFailed) as info:
            initial_data_solve(seed, -1.0, max_iterations=0)
        assert info.value.iterations == 0
        assert info.value.best_residual > CONSTRAINT_TOL

    def test_line_with_lambda_refused(self):
        with pytest.raises(DimensionTwoWithNonzeroLambda):
            initial_data_solve(flat_seed(1, 4), 0.5)


class TestExtendMetric:
    def test_flat_line(self):
        result = extend_metric(flat_seed(1, 6), 0.0, order=6)
        g = result.bulk.to_chart_metric()
        npt.assert_array_equal(g.constant_matrix(), np.eye(2))
        assert not g[0, 1].terms()
        assert g[0, 0].terms() == {(0, 0): 1.0}
        assert result.residual_norm == 0.0

    @pytest.mark.parametrize("lam,H", [(0.0, 0.0), (-0.25, 0.5)])
    def test_flat_plane_matches_warped_family(self, lam, H):
        order = 6
        result = extend_metric(flat_seed(2, order), lam, order=order)
        expected = slab(H, order)
        for i in range(2):
            for j in range(2):
                assert result.bulk.base[i, j].allclose(expected[i, j], atol=1e-8), (i, j)
        assert result.residual_norm <= 1e-8

    def test_lorentzian_fiber(self):
        result = extend_metric(flat_seed(2, 4), 0.0, epsilon=-1, order=4)
        npt.assert_array_equal(result.bulk.to_chart_metric().constant_matrix(), np.diag([1.0, 1.0, -1.0]))
        assert result.residual_norm <= 1e-12

    def test_sphere_with_positive_lambda(self):
        seed = SeedMetric.from_expressions(SPHERE2, [math.pi / 2, 0.0], 5)
        result = extend_metric(seed, 1.0, order=5)
        assert result.residual_norm <= 1e-7
        assert result.constraint_norm <= CONSTRAINT_TOL

    def test_seed_order_too_low(self):
        with pytest.raises(ValueError):
            extend_metric(flat_seed(2, 3), 0.0, order=5)
        with pytest.raises(ValueError):
            extend_metric(flat_seed(2, 3), 0.0, order=1)


class TestCertify:
    def test_flat_extension_all_zero(self):
        report = certify(extend_metric(flat_seed(2, 4), 0.0))
        assert report["slice_deviation"] == 0.0
        assert max(report["residual_by_degree"]) <= 1e-12
        assert report["constraint_norm"] <= 1e-12
        assert report["block_form"] and report["passed"]

    def test_warped_family(self):
        report = certify(extend_metric(flat_seed(2, 6), -0.25))
        assert max(report["residual_by_degree"]) <= 1e-8
        assert report["passed"]

    @pytest.mark.parametrize("order", [5, 6])
    def test_sphere_constraint_propagation(self, order):
        started = time.perf_counter()
        seed = SeedMetric.from_expressions(SPHERE2, [math.pi / 2, 0.0], order)
        report = certify(extend_metric(seed, 1.0, order=order))
        elapsed = time.perf_counter() - started
        assert report["slice_deviation"] == 0.0
        # through degree K - 2
        assert max(report["residual_by_degree"][: order - 1]) <= 1e-7
        assert max(report["fiber_residual_by_degree"][: order - 1]) <= 1e-7
        assert report["passed"]
        assert elapsed <= 60.0

    def test_warped_seed_after_newton(self):
        seed = SeedMetric.from_expressions(WARPED, [0.0, 0.0], 4)
        report = certify(extend_metric(seed, -1.0))
        assert report["slice_deviation"] == 0.0
        assert report["residual_norm"] <= 1e-7
        assert max(report["fiber_residual_by_degree"][:2]) <= 1e-6

    def test_corrupted_second_order_flagged(self):
        order = 4
        result = extend_metric(flat_seed(2, order), -0.25, order=order)
        comps = result.bulk.base.components.copy()
        comps[0, 0] = comps[0, 0] + Jet.from_terms(3, order, {(0, 0, 2): 0.1})
        corrupted = dataclasses.replace(result, bulk=BulkChartMetric(ChartMetric(comps)))
        report = certify(corrupted)
        assert report["residual_by_degree"][0] >= 0.05
        assert report["slice_deviation"] == 0.0
        assert not report["passed"]


class TestIterated:
    def test_flat_codimension_two(self):
        results = extend_iterated(flat_seed(1, 4), 0.0, order=4, codimension=2)
        assert [r.bulk.dim for r in results] == [2, 3]
        final = results[-1].bulk.to_chart_metric()
        npt.assert_array_equal(final.constant_matrix(), np.eye(3))
        assert all(certify(r)["passed"] for r in results)

    def test_codimension_must_be_positive(self):
        with pytest.raises(ValueError):
            extend_iterated(flat_seed(1, 4), 0.0, codimension=0)
