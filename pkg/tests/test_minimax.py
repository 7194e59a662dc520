import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oneshot_rsp.ensemble import Ensemble, orthogonal_ensemble
from oneshot_rsp.errors import InvalidEps
from oneshot_rsp.hypothesis import beta_eps
from oneshot_rsp.minimax import (
    game_value,
    lower_bound_correction,
    lower_bound_radius,
    solve_saddle,
    worst_case_lower_bound,
)
from oneshot_rsp.smoothing import min_max_radius

from conftest import hs_state


class TestSaddle:
    def test_identical(self, plus):
        res = solve_saddle(Ensemble([plus, plus]), 0.3)
        assert res.value == pytest.approx(0.7, abs=1e-4)
        assert res.d_h == pytest.approx(0.0, abs=1e-3)

    def test_orthogonal(self):
        for lam in (0.2, 0.5, 0.8):
            res = solve_saddle(orthogonal_ensemble(2), lam)
            assert res.value == pytest.approx((1 - lam) / 2, abs=1e-4)
            assert res.d_h == pytest.approx(1.0, abs=1e-3)
            assert np.allclose(res.p_star, [0.5, 0.5], atol=1e-2)

    def test_single(self, zero):
        assert solve_saddle(Ensemble([zero]), 0.4).d_h == pytest.approx(0.0, abs=1e-3)

    def test_grid_oracle(self):
        # dim 2, diagonal sigma suffices by symmetry of the orthogonal pair
        ens = orthogonal_ensemble(2)
        lam = 0.4
        grid = np.linspace(0, 1, 101)
        best = min(max(game_value(ens, lam, np.array([a, 1 - a]), np.diag([s, 1 - s])) for s in grid)
                   for a in grid)
        assert solve_saddle(ens, lam).value == pytest.approx(best, abs=1e-3)

    def test_game_value_matches_beta(self, zero, plus):
        ens = Ensemble([zero, plus])
        p, sigma = np.array([0.3, 0.7]), np.diag([0.6, 0.4])
        rho = np.zeros((4, 4), complex)
        rho[:2, :2], rho[2:, 2:] = p[0] * zero, p[1] * plus
        beta, _ = beta_eps(rho, np.kron(np.diag(p), sigma), 0.2)
        assert game_value(ens, 0.2, p, sigma) == pytest.approx(beta, abs=1e-6)

    @settings(max_examples=8)
    @given(st.integers(0, 2**32 - 1))
    def test_certified_gap(self, seed):
        rng = np.random.default_rng(seed)
        ens = Ensemble([hs_state(rng, 2) for _ in range(3)])
        res = solve_saddle(ens, 0.3, tol=1e-4)
        assert res.lower <= res.value + 1e-9
        assert res.gap <= 1e-4

    def test_invalid_lambda(self):
        with pytest.raises(InvalidEps):
            solve_saddle(orthogonal_ensemble(2), 1.0)


class TestLowerBound:
    def test_correction(self):
        val = lower_bound_correction(0.1, 0.5)
        assert val == pytest.approx(np.log2(0.99 * 0.51 / 0.125) + 3 * np.log2(3), abs=1e-12)
        assert val == pytest.approx(6.77, abs=5e-3)

    def test_single_state(self, plus):
        lb = worst_case_lower_bound(Ensemble([plus]), 0.1, 0.1)
        assert lb < 0

    def test_orthogonal_pair(self):
        gamma = lower_bound_radius(0.1, 0.4)
        assert gamma == pytest.approx(np.sqrt(2 * 0.41))
        lb = worst_case_lower_bound(orthogonal_ensemble(2), 0.1, 0.4)
        expected = min_max_radius(orthogonal_ensemble(2), gamma) - lower_bound_correction(0.1, 0.4)
        assert lb == pytest.approx(expected, abs=1e-9)

    def test_large_radius_gives_minus_infinity(self):
        assert worst_case_lower_bound(orthogonal_ensemble(2), 0.5, 0.6) == -np.inf

    def test_invalid_delta(self):
        with pytest.raises(InvalidEps):
            worst_case_lower_bound(orthogonal_ensemble(2), 0.5, 0.8)
