"""Finite families of states and the classical-quantum states they induce."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidState, ParseError
from .operators import (
    BipartiteShape,
    DensityOperator,
    as_matrix,
    matrix_from_json,
    matrix_to_json,
    validate_state,
)


@dataclass(frozen=True)
class CqState:
    """``sum_x q_x |x><x| (x) rho_x`` stored blockwise."""

    weights: np.ndarray
    conditionals: tuple[np.ndarray, ...]

    def __post_init__(self):
        q = np.asarray(self.weights, dtype=float)
        if q.ndim != 1 or len(q) != len(self.conditionals):
            raise DimensionMismatch("one weight per conditional state is required")
        if np.any(q < -1e-12) or q.sum() > 1 + 1e-9:
            raise InvalidState(f"weights must be nonnegative with total <= 1, got {q.sum():.12g}")
        object.__setattr__(self, "weights", q)
        object.__setattr__(self, "conditionals", tuple(np.asarray(c, dtype=complex) for c in self.conditionals))

    @property
    def shape(self) -> BipartiteShape:
        return BipartiteShape(len(self.weights), self.conditionals[0].shape[0])

    @property
    def marginal_a(self) -> np.ndarray:
        return np.diag(self.weights).astype(complex)

    @property
    def marginal_b(self) -> np.ndarray:
        return sum(q * c for q, c in zip(self.weights, self.conditionals))

    def blocks(self) -> list[np.ndarray]:
        """Unnormalized blocks ``q_x rho_x``."""
        return [q * c for q, c in zip(self.weights, self.conditionals)]

    def matrix(self) -> np.ndarray:
        n, d = self.shape.dimA, self.shape.dimB
        out = np.zeros((n * d, n * d), dtype=complex)
        for x, blk in enumerate(self.blocks()):
            out[x * d:(x + 1) * d, x * d:(x + 1) * d] = blk
        return out


class Ensemble:
    """Labelled states ``Q(x)`` with an optional input distribution ``p``."""

    def __init__(self, states: Sequence, weights: Sequence[float] | None = None,
                 labels: Sequence | None = None):
        mats = [as_matrix(s) for s in states]
        if not mats:
            raise InvalidState("states: expected ≥ 1")
        d = mats[0].shape[0]
        for i, m in enumerate(mats):
            if m.shape != (d, d):
                raise DimensionMismatch(f"state {i} has shape {m.shape}, expected {(d, d)}")
            try:
                validate_state(m, normalized=True)
            except InvalidState as exc:
                raise InvalidState(f"state {i}: {exc}") from None
        self.states: tuple[np.ndarray, ...] = tuple(np.array(m, dtype=complex) for m in mats)
        self.labels = list(labels) if labels is not None else list(range(len(mats)))
        if len(self.labels) != len(mats):
            raise DimensionMismatch(f"{len(self.labels)} labels for {len(mats)} states")
        if weights is None:
            self.weights = None
        else:
            p = np.asarray(weights, dtype=float)
            if p.shape != (len(mats),):
                raise DimensionMismatch(f"{p.size} weights for {len(mats)} states")
            if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
                raise InvalidState(f"weights must form a probability vector (sum {p.sum():.12g})")
            self.weights = p

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return self.states[0].shape[0]

    def require_weights(self) -> np.ndarray:
        if self.weights is None:
            raise InvalidState("this operation needs an input distribution (weights)")
        return self.weights

    def with_weights(self, p: Sequence[float]) -> "Ensemble":
        return Ensemble(self.states, p, self.labels)

    def uniform(self) -> "Ensemble":
        return self.with_weights(np.full(len(self), 1.0 / len(self)))

    def cq_state(self, p: Sequence[float] | None = None) -> CqState:
        q = self.require_weights() if p is None else np.asarray(p, dtype=float)
        return CqState(q, self.states)

    def average(self, p: Sequence[float] | None = None) -> np.ndarray:
        return self.cq_state(p).marginal_b

    def density_operators(self) -> list[DensityOperator]:
        return [DensityOperator(s) for s in self.states]

    def to_json(self) -> dict:
        out = {"dim": self.dim, "labels": self.labels, "states": [matrix_to_json(s) for s in self.states]}
        if self.weights is not None:
            out["weights"] = self.weights.tolist()
        return out

    @classmethod
    def from_json(cls, obj) -> "Ensemble":
        if not isinstance(obj, dict):
            raise ParseError("ensemble: expected a JSON object")
        raw = obj.get("states")
        if not isinstance(raw, list) or not raw:
            raise ParseError("states: expected ≥ 1")
        mats = []
        for i, s in enumerate(raw):
            try:
                mats.append(matrix_from_json(s))
            except (ValueError, TypeError) as exc:
                raise ParseError(f"states[{i}]: {exc}") from None
        if "dim" in obj and any(m.shape[0] != obj["dim"] for m in mats):
            raise ParseError(f"dim: declared {obj['dim']} but a state has a different size")
        try:
            return cls(mats, obj.get("weights"), obj.get("labels"))
        except (InvalidState, DimensionMismatch) as exc:
            raise ParseError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> "Ensemble":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from None
        return cls.from_json(obj)

    def __repr__(self) -> str:
        return f"Ensemble(size={len(self)}, dim={self.dim}, weighted={self.weights is not None})"


def orthogonal_ensemble(n: int, dim: int | None = None) -> Ensemble:
    """Computational basis states ``|0>, ..., |n-1>`` with uniform weights."""
    d = n if dim is None else dim
    states = []
    for i in range(n):
        m = np.zeros((d, d), dtype=complex)
        m[i, i] = 1.0
        states.append(m)
    return Ensemble(states, np.full(n, 1.0 / n))
