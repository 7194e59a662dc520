"""Finite nets over ensembles, and moving RSP protocols between an ensemble and its net.

A net point covers every state strictly within purified distance ``nu``
of it. Nets are built greedily: a state joins the net when no earlier net
point covers it.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .ensemble import Ensemble
from .errors import InvalidEps, InvalidState
from .operators import DensityOperator, fidelity, purified_distance
from .rsp import avg_case_protocol, worst_case_protocol

COVER_TOL = 1e-12


class Direction(str, Enum):
    WORST_CASE = "WorstCase"
    AVERAGE_CASE = "AverageCase"


class StateKind(str, Enum):
    HAAR_PURE = "HaarPure"
    HILBERT_SCHMIDT = "HilbertSchmidtMixed"


@dataclass
class Net:
    nu: float
    points: list[int]
    assignment: list[int]
    induced_weights: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.points)

    def to_json(self) -> dict:
        w = None if self.induced_weights is None else [float(v) for v in self.induced_weights]
        return {"nu": self.nu, "net_indices": list(self.points), "assignment": list(self.assignment),
                "induced_weights": w}


def distance_matrix(ensemble: Ensemble) -> np.ndarray:
    n = len(ensemble)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = purified_distance(ensemble.states[i], ensemble.states[j])
    return out


def build_net(ensemble: Ensemble, nu: float, order: str = "index") -> Net:
    """Greedy net; each state is assigned to the first net point that covers it.

    ``order="label"`` scans states sorted by label so that the net does not
    depend on how the file happened to list them.
    """
    if not (0.0 <= nu <= 1.0):
        raise InvalidEps(f"nu must lie in [0, 1], got {nu!r}")
    if order == "index":
        scan = list(range(len(ensemble)))
    elif order == "label":
        scan = sorted(range(len(ensemble)), key=lambda i: str(ensemble.labels[i]))
    else:
        raise ValueError(f"unknown order {order!r}")
    dist = distance_matrix(ensemble)
    points: list[int] = []
    for i in scan:
        if not any(dist[i, j] < nu for j in points):
            points.append(i)
    assignment = []
    for i in range(len(ensemble)):
        k = next(k for k, j in enumerate(points) if j == i or dist[i, j] < nu)
        assignment.append(k)
    net = Net(float(nu), points, assignment)
    if ensemble.weights is not None:
        net.induced_weights = induced_distribution(ensemble, net)
    return net


def induced_distribution(ensemble: Ensemble, net: Net) -> np.ndarray:
    p = ensemble.require_weights()
    out = np.zeros(len(net))
    np.add.at(out, net.assignment, p)
    if abs(out.sum() - p.sum()) > 1e-12:
        raise InvalidState("induced weights lost probability mass")
    return out


def net_ensemble(ensemble: Ensemble, net: Net) -> Ensemble:
    states = [ensemble.states[j] for j in net.points]
    labels = [ensemble.labels[j] for j in net.points]
    w = net.induced_weights if net.induced_weights is not None else None
    if w is not None:
        w = w / w.sum()
    return Ensemble(states, w, labels)


def coverage_radius(ensemble: Ensemble, net: Net) -> float:
    """Largest distance from a state to its assigned net point."""
    return max(purified_distance(s, ensemble.states[net.points[k]])
               for s, k in zip(ensemble.states, net.assignment))


def is_minimal(ensemble: Ensemble, net: Net) -> bool:
    """True when dropping any single net point leaves some state uncovered."""
    dist = distance_matrix(ensemble)
    for drop in net.points:
        rest = [j for j in net.points if j != drop]
        if all(any(i == j or dist[i, j] < net.nu for j in rest) for i in range(len(ensemble))):
            return False
    return True


@dataclass
class TransferRecord:
    direction: str
    eps: float
    nu: float
    net_size: int
    source_size: int
    left_cost: float | None = None
    right_cost: float | None = None
    composed_errors: dict[str, float] = field(default_factory=dict)
    certified: list[str] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return asdict(self)


def _worst_error(ensemble: Ensemble, outputs) -> float:
    return max(purified_distance(s, o) for s, o in zip(ensemble.states, outputs))


def _avg_error(ensemble: Ensemble, outputs) -> float:
    p = ensemble.require_weights()
    f = float(np.dot(p, [fidelity(s, o) for s, o in zip(ensemble.states, outputs)]))
    return math.sqrt(max(1.0 - min(f, 1.0) ** 2, 0.0))


def transfer_brackets(ensemble: Ensemble, eps: float, nu: float, direction: Direction | str,
                      tol: float = 1e-6) -> TransferRecord:
    """Evaluate both transfer statements between ``ensemble`` and its greedy ``nu``-net.

    Worst case: protocols for the net at error ``eps`` and ``eps - nu``
    bracket the cost on the source; the second one, composed with the
    assignment map, is run on the source and its error checked. Average
    case: a net protocol composed with the assignment map, and a source
    protocol run on the net through the induced distribution, each reach
    error at most ``eps + nu``.
    """
    direction = Direction(direction)
    if not (0.0 < eps <= 1.0):
        raise InvalidEps(f"eps must lie in (0, 1], got {eps!r}")
    src = ensemble if ensemble.weights is not None else ensemble.uniform()
    net = build_net(src, nu)
    tnet = net_ensemble(src, net)
    rec = TransferRecord(direction.value, float(eps), float(nu), len(net), len(src))
    if direction is Direction.WORST_CASE:
        left = worst_case_protocol(tnet, eps)
        rec.left_cost = float(left.cost_bits)
        rec.checks["left_error<=eps"] = left.error_ok
        if 0.0 < eps - nu:
            right = worst_case_protocol(tnet, eps - nu)
            rec.right_cost = float(right.cost_bits)
            composed = [right.outcome.outputs[k] for k in net.assignment]
            err = _worst_error(src, composed)
            rec.composed_errors["source_via_net"] = err
            rec.checks["composed_error<=eps"] = err <= eps + tol
            rec.checks["left<=right"] = rec.left_cost <= rec.right_cost
            rec.certified = ["left", "right"]
        else:
            rec.certified = ["left"]
        return rec

    run_net = avg_case_protocol(tnet, eps)
    composed = [run_net.outcome.outputs[k] for k in net.assignment]
    e1 = _avg_error(src, composed)
    rec.left_cost = float(run_net.cost_bits)
    rec.composed_errors["source_via_net"] = e1
    rec.checks["source_via_net<=eps+nu"] = e1 <= eps + nu + tol

    run_src = avg_case_protocol(src, eps)
    p = src.weights
    outs = []
    for k in range(len(net)):
        members = [x for x, a in enumerate(net.assignment) if a == k]
        mass = sum(p[x] for x in members)
        if mass > 0:
            outs.append(sum(p[x] * run_src.outcome.outputs[x] for x in members) / mass)
        else:
            outs.append(run_src.outcome.outputs[net.points[k]])
    e2 = _avg_error(tnet, outs)
    rec.right_cost = float(run_src.cost_bits)
    rec.composed_errors["net_via_source"] = e2
    rec.checks["net_via_source<=eps+nu"] = e2 <= eps + nu + tol
    rec.certified = ["source_via_net", "net_via_source"]
    return rec


def sample_states(dim: int, count: int, kind: StateKind | str, seed: int) -> list[DensityOperator]:
    """Random states: Haar-random pure states, or Hilbert-Schmidt mixed states ``G G^dag / Tr``."""
    kind = StateKind(kind)
    if not (1 <= dim <= 8):
        raise ValueError(f"dim must lie in 1..8, got {dim}")
    if count < 0:
        raise ValueError("count must be nonnegative")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        if kind is StateKind.HAAR_PURE:
            v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            v /= np.linalg.norm(v)
            m = np.outer(v, v.conj())
        else:
            g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            m = g @ g.conj().T
            m /= np.real(np.trace(m))
        out.append(DensityOperator(0.5 * (m + m.conj().T)))
    return out


def random_ensemble(dim: int, size: int, seed: int, pure_fraction: float = 0.5) -> Ensemble:
    """A weighted ensemble mixing Haar-pure and Hilbert-Schmidt states, with Dirichlet weights."""
    rng = np.random.default_rng(seed)
    states = []
    for i in range(size):
        kind = StateKind.HAAR_PURE if rng.random() < pure_fraction else StateKind.HILBERT_SCHMIDT
        states.extend(sample_states(dim, 1, kind, int(rng.integers(2**63))))
    return Ensemble(states, rng.dirichlet(np.ones(size)))
