import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oneshot_rsp.errors import InvalidEps
from oneshot_rsp.hypothesis import (
    beta_eps,
    beta_eps_sdp,
    bridge_correction,
    d_h,
    dmax_dh_bridge,
    dpi_gap,
)
from oneshot_rsp.operators import apply_isometry_channel, random_isometry

from conftest import random_state, state_pairs


def np_oracle(p, q, eps):
    """Diagonal Neyman-Pearson optimum: accept outcomes by likelihood ratio, randomizing the last."""
    order = np.argsort(-(p / np.where(q > 0, q, 1e-300)))
    need, beta = 1 - eps, 0.0
    for i in order:
        if need <= 1e-15:
            break
        take = min(1.0, need / p[i]) if p[i] > 0 else 0.0
        need -= take * p[i]
        beta += take * q[i]
    return beta


class TestBeta:
    def test_identical(self):
        rho = np.diag([0.3, 0.7])
        for eps in (0.0, 0.2, 0.6):
            beta, test = beta_eps(rho, rho, eps)
            assert beta == pytest.approx(1 - eps, abs=1e-9)
            assert test.alpha >= 1 - eps - 1e-9

    def test_pure_versus_mixed(self, zero):
        beta, test = beta_eps(zero, np.eye(2) / 2, 0.0)
        assert beta == pytest.approx(0.5, abs=1e-9)
        assert np.allclose(test.matrix, zero, atol=1e-7)

    def test_diagonal_example(self):
        beta, test = beta_eps(np.diag([0.5, 0.5]), np.diag([0.9, 0.1]), 0.5)
        assert beta == pytest.approx(0.1, abs=1e-9)
        assert np.allclose(test.matrix, np.diag([0, 1]), atol=1e-7)

    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.95))
    def test_diagonal_oracle(self, seed, eps):
        rng = np.random.default_rng(seed)
        p, q = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
        beta, test = beta_eps(np.diag(p), np.diag(q), eps)
        assert beta == pytest.approx(np_oracle(p, q, eps), abs=1e-8)
        test.check()

    @given(state_pairs(), st.floats(0.05, 0.9))
    def test_matches_sdp(self, pair, eps):
        beta, _ = beta_eps(*pair, eps)
        assert beta == pytest.approx(beta_eps_sdp(*pair, eps).beta, abs=1e-6)

    @given(state_pairs(), st.floats(0.0, 0.9), st.floats(0.0, 0.09))
    def test_monotone_in_eps(self, pair, eps, step):
        a, _ = beta_eps(*pair, eps)
        b, _ = beta_eps(*pair, eps + step)
        assert b <= a + 1e-9

    def test_invalid_eps(self):
        with pytest.raises(InvalidEps):
            beta_eps(np.eye(2) / 2, np.eye(2) / 2, 1.0)


class TestDh:
    def test_identical(self):
        rho = np.diag([0.2, 0.8])
        for eps in (0.0, 0.3, 0.7):
            assert d_h(rho, rho, eps) == pytest.approx(0.0, abs=1e-9)

    def test_diagonal_example(self):
        assert d_h(np.diag([0.5, 0.5]), np.diag([0.9, 0.1]), 0.5) == pytest.approx(np.log2(5), abs=1e-8)

    def test_distinguishable(self, zero, one):
        assert d_h(zero, one, 0.0) == np.inf

    @given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.9))
    def test_data_processing(self, seed, eps):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 4))
        r, s = random_state(rng, d), random_state(rng, d)
        V = random_isometry(d, 2 * d, rng)
        ch = lambda m: apply_isometry_channel(m, V, 2)  # noqa: E731
        assert dpi_gap(r, s, eps, ch) >= -1e-8


class TestBridge:
    def test_identical(self):
        rho = np.diag([0.5, 0.5])
        iv = dmax_dh_bridge(rho, rho, 0.5, 0.25)
        assert iv.upper == pytest.approx(0.0, abs=1e-9)
        expected = -(np.log2(0.5 * 0.75 / 0.25**3) + 3 * np.log2(3))
        assert iv.lower == pytest.approx(expected, abs=1e-8)
        assert iv.lower == pytest.approx(-9.34, abs=5e-3)

    def test_diagonal(self):
        r, s = np.diag([0.5, 0.5]), np.diag([0.9, 0.1])
        iv = dmax_dh_bridge(r, s, 0.5, 0.1)
        assert iv.upper == pytest.approx(np.log2(5), abs=1e-8)
        beta4 = np_oracle(np.array([0.5, 0.5]), np.array([0.9, 0.1]), 0.4)
        lower = -np.log2(beta4 / 0.6) - bridge_correction(0.5, 0.1)
        assert iv.lower == pytest.approx(lower, abs=1e-8)

    @given(state_pairs(), st.floats(0.2, 0.8))
    def test_lower_below_upper(self, pair, eps):
        iv = dmax_dh_bridge(*pair, eps, eps / 2)
        assert iv.lower <= iv.upper + 1e-9

    def test_invalid(self):
        with pytest.raises(InvalidEps):
            dmax_dh_bridge(np.eye(2) / 2, np.eye(2) / 2, 0.5, 0.6)
