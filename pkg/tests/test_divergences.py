import numpy as np
import pytest
from hypothesis import given

from oneshot_rsp.divergences import (
    d_max,
    d_obs,
    holevo,
    i_max,
    mutual_information,
    relative_entropy,
    substate_bound,
    t_of_q,
    von_neumann,
)
from oneshot_rsp.ensemble import CqState, Ensemble, orthogonal_ensemble
from oneshot_rsp.errors import InvalidEps
from oneshot_rsp.operators import BipartiteShape, projector

from conftest import state_pairs, states

BELL = projector(np.array([1, 0, 0, 1]) / np.sqrt(2))


def h2(a):
    return -a * np.log2(a) - (1 - a) * np.log2(1 - a)


class TestEntropies:
    def test_von_neumann(self, zero, plus):
        assert von_neumann(np.eye(2) / 2) == pytest.approx(1.0, abs=1e-12)
        assert von_neumann(plus) == pytest.approx(0.0, abs=1e-12)
        assert von_neumann(np.diag([0.75, 0.25])) == pytest.approx(0.8112781, abs=1e-7)

    def test_relative_entropy(self, zero, one):
        assert relative_entropy(zero, zero) == pytest.approx(0.0, abs=1e-12)
        assert relative_entropy(zero, np.eye(2) / 2) == pytest.approx(1.0, abs=1e-12)
        assert relative_entropy(zero, one) == np.inf

    def test_mutual_information(self, zero):
        shape = BipartiteShape(2, 2)
        assert mutual_information(np.kron(zero, np.eye(2) / 2), shape) == pytest.approx(0.0, abs=1e-10)
        assert mutual_information(BELL, shape) == pytest.approx(2.0, abs=1e-10)
        classical = np.diag([0.5, 0, 0, 0.5])
        assert mutual_information(classical, shape) == pytest.approx(1.0, abs=1e-10)

    def test_holevo(self, zero, plus):
        assert holevo(Ensemble([plus, plus], [0.5, 0.5])) == pytest.approx(0.0, abs=1e-12)
        assert holevo(orthogonal_ensemble(2)) == pytest.approx(1.0, abs=1e-12)
        # average state has eigenvalues cos^2(pi/8), sin^2(pi/8)
        expected = h2(np.cos(np.pi / 8) ** 2)
        assert holevo(Ensemble([zero, plus], [0.5, 0.5])) == pytest.approx(expected, abs=1e-10)
        assert expected == pytest.approx(0.6009, abs=1e-4)

    @given(state_pairs())
    def test_klein(self, pair):
        assert relative_entropy(*pair) >= 0.0


class TestMaxDivergence:
    def test_examples(self, zero, one, rng):
        assert d_max(np.eye(2) / 2, np.eye(2) / 2) == pytest.approx(0.0, abs=1e-12)
        assert d_max(np.diag([0.5, 0.5]), np.diag([0.75, 0.25])) == pytest.approx(1.0, abs=1e-12)
        assert d_max(zero, one) == np.inf

    @given(state_pairs())
    def test_dominates_relative_entropy(self, pair):
        assert d_max(*pair) >= relative_entropy(*pair) - 1e-9

    @given(state_pairs())
    def test_observational_bounds(self, pair):
        # t log(t/s) is at most the binary divergence plus max_t (1-t) log(1/(1-t))
        rho, sigma = pair
        obs = d_obs(rho, sigma, grid_size=64)
        assert obs <= d_max(rho, sigma) + 1e-7
        assert obs <= relative_entropy(rho, sigma) + np.log2(np.e) / np.e + 1e-7


class TestMaxInformation:
    def test_product(self, zero):
        shape = BipartiteShape(2, 2)
        assert i_max(np.kron(np.eye(2) / 2, zero), shape) == pytest.approx(0.0, abs=1e-6)

    def test_correlated(self, zero, one):
        cq = CqState(np.array([0.5, 0.5]), (zero, one))
        assert i_max(cq) == pytest.approx(1.0, abs=1e-6)
        assert i_max(np.diag([0.5, 0, 0, 0.5]), BipartiteShape(2, 2)) == pytest.approx(1.0, abs=1e-6)

    def test_identical_conditionals(self, plus):
        assert i_max(Ensemble([plus, plus], [0.3, 0.7])) == pytest.approx(0.0, abs=1e-6)

    def test_dense_needs_shape(self):
        with pytest.raises(ValueError):
            i_max(np.eye(4) / 4)

    @given(states(dims=(2,)), states(dims=(2,)))
    def test_above_mutual_information(self, a, b):
        cq = CqState(np.array([0.5, 0.5]), (a, b))
        assert i_max(cq) >= mutual_information(cq.matrix(), cq.shape) - 1e-6


class TestCapacity:
    def test_single_state(self, plus):
        assert t_of_q(Ensemble([plus])).value == pytest.approx(0.0, abs=1e-9)

    def test_orthogonal_pair(self):
        res = t_of_q(orthogonal_ensemble(2))
        assert res.value == pytest.approx(1.0, abs=1e-6)
        assert np.allclose(res.p, [0.5, 0.5])

    def test_identical(self, zero):
        assert t_of_q(Ensemble([zero, zero])).value == pytest.approx(0.0, abs=1e-9)

    def test_against_grid(self, zero):
        mixed = np.diag([0.2, 0.8])
        ens = Ensemble([zero, mixed])
        grid = max(holevo(ens, [a, 1 - a]) for a in np.linspace(0, 1, 2001))
        assert t_of_q(ens).value == pytest.approx(grid, abs=1e-5)


class TestObservational:
    def test_self(self, rng):
        assert d_obs(np.diag([0.3, 0.7]), np.diag([0.3, 0.7])) == pytest.approx(0.0, abs=1e-9)

    def test_pure_versus_mixed(self):
        assert d_obs(np.diag([1.0, 0.0]), np.eye(2) / 2) == pytest.approx(1.0, abs=1e-9)

    def test_diagonal_oracle(self):
        rho, sigma = np.array([0.5, 0.5]), np.array([0.9, 0.1])
        grid = np.arange(1001) / 1000
        a, b = np.meshgrid(grid, grid)
        t = a * rho[0] + b * rho[1]
        s = a * sigma[0] + b * sigma[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(t > 0, t * np.log2(t / s), 0.0)
        oracle = float(np.max(vals))
        assert d_obs(np.diag(rho), np.diag(sigma)) == pytest.approx(oracle, abs=1e-4)


class TestSubstate:
    def test_equal_states(self):
        rho = np.diag([0.4, 0.6])
        assert substate_bound(rho, rho, 0.5) == pytest.approx(np.log2(4 / 3), abs=1e-6)
        assert np.log2(4 / 3) == pytest.approx(0.415, abs=1e-3)

    def test_pure_versus_mixed(self):
        val = substate_bound(np.diag([1.0, 0.0]), np.eye(2) / 2, 0.5)
        assert val == pytest.approx(4 + np.log2(4 / 3), abs=1e-6)
        assert val == pytest.approx(4.415, abs=1e-3)

    def test_near_one(self):
        assert substate_bound(np.eye(2) / 2, np.eye(2) / 2, 1 - 1e-10) == np.inf

    def test_invalid(self):
        with pytest.raises(InvalidEps):
            substate_bound(np.eye(2) / 2, np.eye(2) / 2, 0.0)

    def test_precomputed(self):
        assert substate_bound(None, None, 0.5, dobs=1.0) == pytest.approx(4 + np.log2(4 / 3))
