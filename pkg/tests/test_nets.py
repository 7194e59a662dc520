import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oneshot_rsp.ensemble import Ensemble, orthogonal_ensemble
from oneshot_rsp.errors import InvalidEps
from oneshot_rsp.nets import (
    Direction,
    StateKind,
    build_net,
    coverage_radius,
    distance_matrix,
    induced_distribution,
    is_minimal,
    net_ensemble,
    random_ensemble,
    sample_states,
    transfer_brackets,
)
from oneshot_rsp.operators import purified_distance


def pair_at_distance(dist):
    # pure qubits with |<a|b>|^2 = 1 - dist^2
    theta = np.arcsin(dist)
    a = np.array([1.0, 0.0])
    b = np.array([np.cos(theta), np.sin(theta)])
    return np.outer(a, a), np.outer(b, b)


class TestBuild:
    def test_identical(self, plus):
        assert len(build_net(Ensemble([plus] * 4), 0.1)) == 1

    def test_close_pair(self):
        a, b = pair_at_distance(0.3)
        assert purified_distance(a, b) == pytest.approx(0.3)
        assert len(build_net(Ensemble([a, b]), 0.5)) == 1

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_orthogonal(self, n):
        net = build_net(orthogonal_ensemble(n), 0.5)
        assert len(net) == n
        assert np.all(distance_matrix(orthogonal_ensemble(n))[~np.eye(n, dtype=bool)] == pytest.approx(1.0))

    def test_zero_radius(self):
        ens = random_ensemble(2, 5, seed=1)
        net = build_net(ens, 0.0)
        assert net.points == list(range(5))

    def test_invalid_radius(self):
        with pytest.raises(InvalidEps):
            build_net(orthogonal_ensemble(2), 1.5)

    def test_label_order(self, zero, one):
        a, b = pair_at_distance(0.2)
        ens = Ensemble([a, b], labels=["z", "a"])
        assert build_net(ens, 0.5, order="label").points == [1]
        assert build_net(ens, 0.5).points == [0]

    @settings(max_examples=20)
    @given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.9))
    def test_invariants(self, seed, nu):
        ens = random_ensemble(2, 8, seed)
        net = build_net(ens, nu)
        assert coverage_radius(ens, net) < nu or len(net) == len(ens)
        d = distance_matrix(ens)
        pts = net.points
        assert all(d[i, j] >= nu for i in pts for j in pts if i != j)
        assert is_minimal(ens, net)
        assert induced_distribution(ens, net).sum() == pytest.approx(1.0)


class TestInduced:
    def test_single_point(self, plus):
        net = build_net(Ensemble([plus, plus], [0.3, 0.7]), 0.2)
        assert net.induced_weights.tolist() == [1.0]

    def test_two_clusters(self):
        a, b = pair_at_distance(0.05)
        c, d = (np.eye(2)[::-1] @ m @ np.eye(2)[::-1] for m in (a, b))
        ens = Ensemble([a, b, c, d], [0.25] * 4)
        net = build_net(ens, 0.3)
        assert net.induced_weights.tolist() == [0.5, 0.5]

    def test_skewed(self):
        a, b = pair_at_distance(0.05)
        c = np.diag([0.0, 1.0])
        p = np.array([0.1, 0.6, 0.3])
        ens = Ensemble([a, b, c], p)
        net = build_net(ens, 0.3)
        manual = np.zeros(len(net))
        for x, k in enumerate(net.assignment):
            manual[k] += p[x]
        assert np.allclose(net.induced_weights, manual)
        assert np.allclose(net_ensemble(ens, net).weights, manual)


class TestTransfer:
    def test_zero_radius_average(self):
        ens = random_ensemble(2, 3, seed=4)
        rec = transfer_brackets(ens, 0.3, 0.0, Direction.AVERAGE_CASE)
        assert rec.net_size == rec.source_size
        assert rec.left_cost == rec.right_cost
        assert rec.ok

    def test_worst_case(self):
        a, b = pair_at_distance(0.05)
        ens = Ensemble([a, b, np.diag([0.0, 1.0])], [0.4, 0.3, 0.3])
        rec = transfer_brackets(ens, 0.3, 0.1, Direction.WORST_CASE)
        assert rec.net_size == 2
        assert rec.left_cost <= rec.right_cost
        assert rec.ok

    def test_average_case(self):
        a, b = pair_at_distance(0.05)
        ens = Ensemble([a, b, np.diag([0.0, 1.0])], [0.4, 0.3, 0.3])
        rec = transfer_brackets(ens, 0.3, 0.1, "AverageCase")
        assert all(v <= 0.4 + 1e-6 for v in rec.composed_errors.values())
        assert rec.ok


class TestSampling:
    def test_empty(self):
        assert sample_states(2, 0, StateKind.HAAR_PURE, seed=0) == []

    def test_kinds(self):
        pure = sample_states(3, 4, "HaarPure", seed=1)
        mixed = sample_states(3, 4, "HilbertSchmidtMixed", seed=1)
        assert all(np.isclose(np.trace(s.matrix @ s.matrix).real, 1.0) for s in pure)
        assert all(np.linalg.matrix_rank(s.matrix) == 3 for s in mixed)

    def test_seeded(self):
        a = sample_states(2, 3, "HaarPure", seed=9)
        b = sample_states(2, 3, "HaarPure", seed=9)
        assert all(np.array_equal(x.matrix, y.matrix) for x, y in zip(a, b))

    def test_dim_limit(self):
        with pytest.raises(ValueError):
            sample_states(9, 1, "HaarPure", seed=0)
