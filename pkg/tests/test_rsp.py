import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oneshot_rsp.ensemble import Ensemble, orthogonal_ensemble
from oneshot_rsp.minimax import lower_bound_correction, lower_bound_radius
from oneshot_rsp.errors import DominationViolated, InvalidEps
from oneshot_rsp.operators import fidelity, maximally_mixed, purified_distance
from oneshot_rsp.smoothing import min_max_radius
from oneshot_rsp.rsp import (
    avg_case_additive,
    avg_case_protocol,
    build_jrs,
    closed_form_outputs,
    cost_bits,
    gap_demo,
    geometric_cutoff,
    simulate_jrs_exact,
    simulate_jrs_sampled,
    skewed_distribution,
    tensor_outputs,
    average_case_bracket,
    worst_case_additive,
    worst_case_bracket,
    worst_case_protocol,
)

from conftest import hs_state


class TestConstruction:
    def test_lambda_zero(self, plus):
        inst = build_jrs([plus, plus], plus, 0.0, 3)
        assert inst.fail_prob == 0.0
        for u in inst.unitaries:
            assert np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-10)
        assert inst.residuals()["rotation"] <= 1e-10

    def test_complement_state(self, zero, one):
        inst = build_jrs([zero], np.eye(2) / 2, 1.0, 1)
        assert np.allclose(inst.xis[0], one, atol=1e-12)
        res = inst.residuals()
        assert res["domination"] <= 1e-12 and res["rotation"] <= 1e-10

    def test_domination_violated(self, zero):
        with pytest.raises(DominationViolated):
            build_jrs([zero], np.eye(2) / 2, 0.5, 1)

    def test_t_positive(self, zero):
        with pytest.raises(ValueError):
            build_jrs([zero], np.eye(2) / 2, 1.0, 0)

    @settings(max_examples=20)
    @given(st.integers(0, 2**32 - 1))
    def test_random_residuals(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 4))
        sigma = hs_state(rng, d)
        targets = [hs_state(rng, d) for _ in range(3)]
        from oneshot_rsp.divergences import d_max

        lam = max(0.0, max(d_max(t, sigma) for t in targets))
        inst = build_jrs(targets, sigma, lam, 2)
        res = inst.residuals()
        assert res["domination"] <= 1e-7 and res["rotation"] <= 1e-7


class TestSimulation:
    def test_one_round(self, zero):
        inst = build_jrs([zero], np.eye(2) / 2, 1.0, 1)
        out = simulate_jrs_exact(inst).outputs[0]
        assert np.allclose(out, 0.5 * zero + 0.5 * np.eye(2) / 2, atol=1e-12)

    def test_no_failure(self, plus):
        inst = build_jrs([plus], plus, 0.0, 4)
        assert np.allclose(simulate_jrs_exact(inst).outputs[0], plus, atol=1e-12)

    def test_two_rounds_tensor(self, zero):
        inst = build_jrs([zero], np.eye(2) / 2, 1.0, 2)
        expected = 0.75 * zero + 0.25 * np.eye(2) / 2
        assert np.max(np.abs(tensor_outputs(inst, 0) - expected)) <= 1e-10
        out = simulate_jrs_exact(inst, cross_check=True)
        assert out.simulation_residual <= 1e-10

    @settings(max_examples=10)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 3))
    def test_closed_form_matches_tensor(self, seed, t):
        rng = np.random.default_rng(seed)
        sigma = hs_state(rng, 2)
        targets = [hs_state(rng, 2) for _ in range(2)]
        from oneshot_rsp.divergences import d_max

        lam = max(0.0, max(d_max(x, sigma) for x in targets))
        inst = build_jrs(targets, sigma, lam, t)
        for x, out in enumerate(closed_form_outputs(inst)):
            assert np.max(np.abs(tensor_outputs(inst, x) - out)) <= 1e-9

    def test_sampled_no_failure(self, plus):
        inst = build_jrs([plus], plus, 0.0, 2)
        run = simulate_jrs_sampled(inst, 1000, seed=1)
        assert run.fail_fraction == [0.0]
        assert np.allclose(run.outputs[0], plus)

    def test_sampled_binomial(self, zero):
        inst = build_jrs([zero], np.eye(2) / 2, 1.0, 1)
        n = 100_000
        frac = simulate_jrs_sampled(inst, n, seed=7).fail_fraction[0]
        assert abs(frac - 0.5) <= 3 * math.sqrt(0.25 / n)

    def test_sampled_deterministic(self, zero, one):
        inst = build_jrs([zero, one], np.eye(2) / 2, 1.0, 2)
        a = simulate_jrs_sampled(inst, 5000, seed=3)
        b = simulate_jrs_sampled(inst, 5000, seed=3)
        assert json.dumps(a.summary()) == json.dumps(b.summary())
        assert a.fail_fraction == b.fail_fraction

    def test_cost(self):
        assert [cost_bits(t) for t in (1, 2, 3, 4, 7, 8)] == [1, 2, 2, 3, 3, 4]


class TestProtocols:
    def test_identical_states_average(self, plus):
        eps = 0.3
        run = avg_case_protocol(Ensemble([plus, plus], [0.5, 0.5]), eps)
        assert run.lam == pytest.approx(0.0, abs=1e-5)
        assert run.cost_bits <= math.log2(math.log(8 / eps**2)) + 2
        assert run.outcome.achieved_error <= 1e-3

    def test_orthogonal_average(self):
        run = avg_case_protocol(orthogonal_ensemble(2), 0.2)
        assert run.error_ok and run.outcome.achieved_error <= 0.2
        assert run.t == math.ceil(2**run.lam * math.log(8 / 0.2**2))
        assert run.cost_bits == math.ceil(math.log2(run.t + 1))

    def test_single_state_worst(self, plus):
        run = worst_case_protocol(Ensemble([plus]), 0.3)
        assert run.cost_bits <= math.log2(1.09) + math.log2(math.log(2 / 0.0081)) + 2
        assert run.error_ok

    def test_orthogonal_worst(self):
        ens = orthogonal_ensemble(2)
        run = worst_case_protocol(ens, 0.2)
        for s, o in zip(ens.states, run.outcome.outputs):
            assert purified_distance(s, o) <= 0.2 + 1e-6

    def test_rounds_shrink_with_eps(self):
        ens = orthogonal_ensemble(2)
        ts = [worst_case_protocol(ens, e, cross_check=False).t for e in (0.2, 0.5, 0.9)]
        assert ts[0] >= ts[1] >= ts[2]

    def test_invalid_eps(self):
        with pytest.raises(InvalidEps):
            avg_case_protocol(orthogonal_ensemble(2), 0.0)

    def test_unpacking(self):
        outcome, bits = worst_case_protocol(orthogonal_ensemble(2), 0.3)
        assert bits == outcome.cost_bits

    @settings(max_examples=6)
    @given(st.integers(0, 2**32 - 1), st.floats(0.15, 0.6))
    def test_random_average_error(self, seed, eps):
        rng = np.random.default_rng(seed)
        ens = Ensemble([hs_state(rng, 2) for _ in range(3)], rng.dirichlet(np.ones(3)))
        run = avg_case_protocol(ens, eps, cross_check=False)
        avg_f = sum(p * fidelity(s, o) for p, s, o in zip(ens.weights, ens.states, run.outcome.outputs))
        assert math.sqrt(max(1 - avg_f**2, 0)) <= eps + 1e-6


class TestBrackets:
    def test_additive_terms(self):
        assert avg_case_additive(0.1) == pytest.approx(math.log2(math.log(800)) + 2, abs=1e-12)
        assert avg_case_additive(0.1) == pytest.approx(4.74, abs=5e-3)
        assert worst_case_additive(0.3) == pytest.approx(
            math.log2(1.09) + math.log2(math.log(2 / 0.0081)) + 2, abs=1e-12)

    def test_identical_states(self, plus):
        rep = average_case_bracket(Ensemble([plus, plus], [0.5, 0.5]), 0.2)
        assert rep.lower_bits <= 1e-3
        assert rep.lower_bits <= rep.achieved_bits <= rep.upper_bits
        assert rep.ok

    def test_orthogonal_average(self):
        rep = average_case_bracket(orthogonal_ensemble(2), 0.1)
        assert rep.lower_bits - 1e-3 <= rep.achieved_bits <= rep.upper_bits + 1e-3
        assert rep.ok
        json.dumps(rep.to_json())

    def test_worst_single(self, plus):
        rep = worst_case_bracket(Ensemble([plus]), 0.3, 0.2)
        assert rep.lower_bits <= 0 <= rep.upper_bits and rep.ok

    def test_worst_orthogonal(self):
        rep = worst_case_bracket(orthogonal_ensemble(2), 0.1, 0.4)
        assert rep.lower_bits <= rep.achieved_bits <= rep.upper_bits
        assert all(len(r) == 3 for r in rep.csv_rows())

    def test_delta_sweep(self):
        # the radius term grows as delta shrinks, but the correction grows faster
        ens = orthogonal_ensemble(4)
        radii = []
        for d in (0.45, 0.3, 0.2, 0.1):
            rep = worst_case_bracket(ens, 0.1, d)
            gamma = lower_bound_radius(0.1, d)
            radii.append(min_max_radius(ens, gamma))
            assert rep.lower_bits == pytest.approx(radii[-1] - lower_bound_correction(0.1, d), abs=1e-9)
            assert rep.lower_bits <= rep.achieved_bits <= rep.upper_bits
        assert radii == sorted(radii)
        assert max(radii) <= np.log2(4) + 1e-6


class TestGap:
    def test_demo(self):
        rec = gap_demo(10, 0.5, reduction_n=None)
        assert rec.worst_lb >= 10
        assert rec.avg_cost_skewed == 0
        assert rec.skewed_error <= 0.5 + 1e-12
        assert rec.geometric_bound == pytest.approx(math.log2(3) + 2, abs=1e-12)
        assert rec.geometric_error <= 0.5
        assert rec.geometric_cost <= rec.geometric_bound

    def test_skewed_point_mass(self):
        assert skewed_distribution(3, 0.0)[0] == 1.0
        assert geometric_cutoff(3, 0.0) == 8

    @pytest.mark.slow
    def test_reduction(self):
        rec = gap_demo(3, 0.5, reduction_n=3)
        assert rec.reduction_success >= 0.75
        assert all(rec.checks.values())


def test_maximally_mixed_helper():
    assert np.allclose(maximally_mixed(3), np.eye(3) / 3)
