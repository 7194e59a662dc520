import json

import numpy as np
import pytest

from oneshot_rsp.ensemble import CqState, Ensemble, orthogonal_ensemble
from oneshot_rsp.errors import DimensionMismatch, InvalidState, ParseError
from oneshot_rsp.operators import matrix_to_json


class TestEnsemble:
    def test_empty(self):
        with pytest.raises(InvalidState, match="expected ≥ 1"):
            Ensemble([])

    def test_mixed_dimensions(self):
        with pytest.raises(DimensionMismatch):
            Ensemble([np.eye(2) / 2, np.eye(3) / 3])

    def test_weights_must_sum_to_one(self):
        with pytest.raises(InvalidState):
            Ensemble([np.eye(2) / 2], [0.5])

    def test_subnormalized_state_rejected(self):
        with pytest.raises(InvalidState, match="state 0"):
            Ensemble([np.eye(2) / 4])

    def test_orthogonal(self):
        ens = orthogonal_ensemble(4)
        assert len(ens) == 4 and ens.dim == 4
        assert np.allclose(ens.average(), np.eye(4) / 4)

    def test_require_weights(self):
        ens = Ensemble([np.eye(2) / 2])
        with pytest.raises(InvalidState):
            ens.require_weights()
        assert ens.uniform().weights.tolist() == [1.0]

    def test_json_round_trip(self, plus):
        ens = Ensemble([plus, np.eye(2) / 2], [0.25, 0.75], ["p", "m"])
        back = Ensemble.from_json(json.loads(json.dumps(ens.to_json())))
        assert back.labels == ["p", "m"]
        assert np.allclose(back.weights, ens.weights)
        assert all(np.allclose(a, b) for a, b in zip(back.states, ens.states))

    def test_parse_errors(self, tmp_path):
        with pytest.raises(ParseError, match="expected ≥ 1"):
            Ensemble.from_json({"states": []})
        with pytest.raises(ParseError, match="dim"):
            Ensemble.from_json({"dim": 3, "states": [matrix_to_json(np.eye(2) / 2)]})
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ParseError, match="malformed"):
            Ensemble.load(bad)


class TestCqState:
    def test_block_structure(self, zero, one):
        cq = CqState(np.array([0.5, 0.5]), (zero, one))
        m = cq.matrix()
        assert m.shape == (4, 4)
        assert np.isclose(np.trace(m).real, 1.0)
        assert np.allclose(cq.marginal_b, np.eye(2) / 2)
        assert np.allclose(cq.marginal_a, np.eye(2) / 2)

    def test_subnormalized_weights_allowed(self, zero):
        cq = CqState(np.array([0.4]), (zero,))
        assert np.isclose(np.trace(cq.matrix()).real, 0.4)

    def test_weight_count(self, zero):
        with pytest.raises(DimensionMismatch):
            CqState(np.array([0.5, 0.5]), (zero,))
