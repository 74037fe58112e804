import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from fuzzcor import DomainError, LlcParams, bivariate_normal_rect, cell_prob_drho, cell_probabilities
from fuzzcor.latent import RHO_GUARD, bvn_upper, std_normal_cdf, std_normal_quantile
from oracles import bisect_quantile, bvn_cdf_quad, rect_dblquad

INF = np.inf
DESIGN = (-2.0, -0.66, 0.66, 2.0)


def random_params(rng, max_cuts=5):
    R = rng.integers(1, max_cuts + 1)
    C = rng.integers(1, max_cuts + 1)
    tr = np.sort(rng.uniform(-2.5, 2.5, R))
    tc = np.sort(rng.uniform(-2.5, 2.5, C))
    return LlcParams(rng.uniform(-0.95, 0.95), tr, tc)


class TestUnivariate:
    def test_cdf_center(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_quantile_against_bisection(self):
        assert std_normal_quantile(0.25) == pytest.approx(bisect_quantile(0.25), abs=1e-12)
        assert std_normal_quantile(0.25) == pytest.approx(-0.6744897501960817, abs=1e-12)

    def test_round_trip(self, rng):
        x = rng.uniform(-5, 5, 100)
        np.testing.assert_allclose(std_normal_quantile(std_normal_cdf(x)), x, atol=1e-8)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.2, float("nan")])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            std_normal_quantile(p)


class TestRectangle:
    def test_independent_quadrant(self):
        assert bivariate_normal_rect(-INF, 0, -INF, 0, 0.0) == pytest.approx(0.25, abs=1e-15)

    def test_comonotone_quadrant(self):
        assert bivariate_normal_rect(-INF, 0, -INF, 0, 1.0) == pytest.approx(0.5, abs=1e-15)

    def test_against_dblquad(self):
        got = bivariate_normal_rect(-INF, 0.5, -INF, -0.3, 0.6)
        assert got == pytest.approx(rect_dblquad(-INF, 0.5, -INF, -0.3, 0.6), abs=1e-8)

    def test_upper_orthant_against_quad(self, rng):
        for _ in range(200):
            h, k = rng.uniform(-4, 4, 2)
            rho = rng.uniform(-0.999, 0.999)
            expected = 1 - stats.norm.cdf(h) - stats.norm.cdf(k) + bvn_cdf_quad(h, k, rho)
            assert bvn_upper(h, k, rho) == pytest.approx(expected, abs=1e-12)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 2), st.floats(0, 2), st.floats(-0.99, 0.99))
    def test_monotone_in_upper_bounds(self, a1, a2, d1, d2, rho):
        base = bivariate_normal_rect(a1, a1 + 0.5, a2, a2 + 0.5, rho)
        assert bivariate_normal_rect(a1, a1 + 0.5 + d1, a2, a2 + 0.5, rho) >= base - 1e-15
        assert bivariate_normal_rect(a1, a1 + 0.5, a2, a2 + 0.5 + d2, rho) >= base - 1e-15


class TestParams:
    def test_clamp_and_shape(self):
        p = LlcParams(1.0, [0.0], [-1.0, 1.0])
        assert p.rho == 1 - RHO_GUARD
        assert p.shape == (2, 3)
        assert p.row_bounds.tolist() == [-INF, 0.0, INF]

    def test_rejects_bad_thresholds(self):
        with pytest.raises(ValueError):
            LlcParams(0.1, [0.5, 0.5], [0.0])
        with pytest.raises(ValueError):
            LlcParams(0.1, [0.0, INF], [0.0])

    def test_json(self):
        p = LlcParams(0.3, DESIGN, DESIGN[1:3])
        q = LlcParams.from_dict(p.to_dict())
        assert q.rho == p.rho and np.array_equal(q.tau_col, p.tau_col)


class TestCellProbabilities:
    def test_quadrants(self):
        np.testing.assert_allclose(cell_probabilities(LlcParams(0.0, [0.0], [0.0])), 0.25, atol=1e-15)

    def test_independence_is_product(self):
        pi = cell_probabilities(LlcParams(0.0, DESIGN, DESIGN))
        m = np.diff(stats.norm.cdf(np.r_[-INF, DESIGN, INF]))
        np.testing.assert_allclose(pi, np.outer(m, m), atol=1e-15)

    def test_design_grid_against_dblquad(self):
        p = LlcParams(0.85, DESIGN, DESIGN)
        rb, cb = p.row_bounds, p.col_bounds
        oracle = np.array([[rect_dblquad(rb[r], rb[r + 1], cb[c], cb[c + 1], 0.85) for c in range(5)]
                           for r in range(5)])
        np.testing.assert_allclose(cell_probabilities(p), oracle, atol=1e-8)

    def test_sums_to_one(self, rng):
        for _ in range(100):
            pi = cell_probabilities(random_params(rng))
            assert pi.sum() == pytest.approx(1.0, abs=1e-10)
            assert np.all(pi >= 0)


class TestDerivative:
    def test_conserves_mass(self, rng):
        for _ in range(20):
            assert cell_prob_drho(random_params(rng)).sum() == pytest.approx(0.0, abs=1e-12)

    def test_finite_differences(self, rng):
        h = 1e-6
        for _ in range(20):
            p = random_params(rng)
            fd = (cell_probabilities(p.with_rho(p.rho + h)) - cell_probabilities(p.with_rho(p.rho - h))) / (2 * h)
            np.testing.assert_allclose(cell_prob_drho(p), fd, atol=1e-6)

    def test_symmetric_at_zero(self):
        d = cell_prob_drho(LlcParams(0.0, DESIGN, DESIGN))
        np.testing.assert_allclose(d, d.T, atol=1e-16)
