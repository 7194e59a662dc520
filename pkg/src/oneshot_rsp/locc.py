"""Exact and sampled simulation of two-party LOCC protocols for bit transmission.

A protocol is in normal form: in each round the speaker applies a unitary
to their whole register and measures its ``k`` leftmost qubits in the
computational basis; the outcome travels as a ``k``-bit message and lands
as fresh qubits at the left end of the listener's register. Alice's
register starts as ``[input (n), entangled half (e), ancilla]`` and Bob's
as ``[entangled half (e), ancilla]``. At the end Bob applies an output
unitary and reads his ``n`` leftmost qubits as the guess ``Y``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionBlowup, InvalidState, ParseError
from .operators import fidelity, ket, matrix_from_json, matrix_to_json, projector, random_unitary

MAX_QUBITS = 14
UNITARY_TOL = 1e-9
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass
class Round:
    speaker: str
    bits: int
    unitary: np.ndarray | None = None

    def __post_init__(self):
        if self.speaker not in ("A", "B"):
            raise InvalidState(f"speaker must be 'A' or 'B', got {self.speaker!r}")
        if self.bits < 0:
            raise InvalidState("message length must be nonnegative")


@dataclass
class LoccProtocol:
    n: int
    schmidt: np.ndarray
    rounds: list[Round] = field(default_factory=list)
    output_unitary: np.ndarray | None = None
    alice_ancilla: int = 0
    bob_ancilla: int = 0

    def __post_init__(self):
        s = np.asarray(self.schmidt, dtype=float)
        if s.ndim != 1 or len(s) < 1 or len(s) & (len(s) - 1):
            raise InvalidState("Schmidt vector length must be a power of two")
        if np.any(s < 0) or abs(float(np.sum(s)) - 1.0) > 1e-9:
            raise InvalidState("Schmidt coefficients must be a probability vector")
        self.schmidt = s
        self.validate()

    @property
    def ebits(self) -> int:
        return int(round(math.log2(len(self.schmidt))))

    @property
    def m_a(self) -> int:
        return sum(r.bits for r in self.rounds if r.speaker == "A")

    @property
    def m_b(self) -> int:
        return sum(r.bits for r in self.rounds if r.speaker == "B")

    def register_sizes(self) -> list[tuple[int, int]]:
        """Register sizes ``(alice, bob)`` before each round, then before the output step."""
        a = self.n + self.ebits + self.alice_ancilla
        b = self.ebits + self.bob_ancilla
        sizes = [(a, b)]
        for r in self.rounds:
            if r.speaker == "A":
                b += r.bits
            else:
                a += r.bits
            sizes.append((a, b))
        return sizes

    def validate(self) -> None:
        sizes = self.register_sizes()
        if sum(sizes[-1]) > MAX_QUBITS:
            raise DimensionBlowup(f"protocol needs {sum(sizes[-1])} qubits, cap is {MAX_QUBITS}")
        for i, (r, (a, b)) in enumerate(zip(self.rounds, sizes)):
            own = a if r.speaker == "A" else b
            if r.bits > own:
                raise InvalidState(f"round {i} measures {r.bits} of {own} qubits")
            _check_unitary(r.unitary, 2**own, f"round {i}")
        if sizes[-1][1] < self.n:
            raise InvalidState(f"Bob holds {sizes[-1][1]} qubits but must output {self.n}")
        _check_unitary(self.output_unitary, 2 ** sizes[-1][1], "output")

    def to_json(self) -> dict:
        def enc(u):
            return None if u is None else matrix_to_json(u)

        return {
            "n": self.n,
            "schmidt": self.schmidt.tolist(),
            "alice_ancilla": self.alice_ancilla,
            "bob_ancilla": self.bob_ancilla,
            "rounds": [{"speaker": r.speaker, "bits": r.bits, "unitary": enc(r.unitary)} for r in self.rounds],
            "output_unitary": enc(self.output_unitary),
        }

    @classmethod
    def from_json(cls, obj) -> "LoccProtocol":
        def dec(u):
            return None if u is None else matrix_from_json(u)

        try:
            rounds = [Round(r["speaker"], int(r["bits"]), dec(r.get("unitary"))) for r in obj.get("rounds", [])]
            return cls(int(obj["n"]), np.asarray(obj.get("schmidt", [1.0]), dtype=float), rounds,
                       dec(obj.get("output_unitary")), int(obj.get("alice_ancilla", 0)),
                       int(obj.get("bob_ancilla", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed protocol description: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "LoccProtocol":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        return cls.from_json(obj)


def _check_unitary(u, dim: int, what: str) -> None:
    if u is None:
        return
    if u.shape != (dim, dim):
        raise InvalidState(f"{what}: unitary of shape {u.shape}, register needs {dim}")
    if np.max(np.abs(u.conj().T @ u - np.eye(dim))) > UNITARY_TOL:
        raise InvalidState(f"{what}: matrix is not unitary")


# ---------------------------------------------------------------------------
# exact evaluation


class _Branch:
    """One measurement branch: an unnormalized pure state with its register layout."""

    __slots__ = ("psi", "alice", "bob", "transcript")

    def __init__(self, psi, alice, bob, transcript):
        self.psi = psi
        self.alice = alice
        self.bob = bob
        self.transcript = transcript


def _initial(proto: LoccProtocol, x: int) -> _Branch:
    n, e = proto.n, proto.ebits
    # axes: alice input, alice ebits, alice ancilla, bob ebits, bob ancilla
    inp = np.zeros(2**n, dtype=complex)
    inp[x] = 1.0
    shared = np.zeros((2**e, 2**e), dtype=complex)
    shared[np.arange(2**e), np.arange(2**e)] = np.sqrt(proto.schmidt)
    psi = np.multiply.outer(inp, shared.reshape(-1))
    psi = np.multiply.outer(psi, _zeros(proto.alice_ancilla + proto.bob_ancilla)).reshape(-1)
    # reorder to alice-first: [inp, eA, eB, ancA, ancB] -> [inp, eA, ancA, eB, ancB]
    aA, aB = proto.alice_ancilla, proto.bob_ancilla
    total = n + 2 * e + aA + aB
    psi = psi.reshape((2,) * total) if total else psi.reshape(())
    order = list(range(n + e)) + list(range(n + 2 * e, n + 2 * e + aA)) + list(range(n + e, n + 2 * e)) \
        + list(range(n + 2 * e + aA, total))
    psi = np.transpose(psi, order)
    alice = list(range(n + e + aA))
    bob = list(range(n + e + aA, total))
    return _Branch(psi, alice, bob, ())


def _zeros(k: int) -> np.ndarray:
    v = np.zeros(2**k, dtype=complex)
    v[0] = 1.0
    return v


def _apply(psi: np.ndarray, u: np.ndarray | None, axes: list[int]) -> np.ndarray:
    if u is None or not axes:
        return psi
    k = len(axes)
    moved = np.moveaxis(psi, axes, list(range(k)))
    shape = moved.shape
    out = (u @ moved.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(out, list(range(k)), axes)


def _measure(br: _Branch, rnd: Round) -> list[_Branch]:
    own = br.alice if rnd.speaker == "A" else br.bob
    psi = _apply(br.psi, rnd.unitary, own)
    k = rnd.bits
    if k == 0:
        return [_Branch(psi, br.alice, br.bob, br.transcript + (0,))]
    axes = own[:k]
    out = []
    new_axes = list(range(psi.ndim, psi.ndim + k))
    for m in range(2**k):
        bits = [(m >> (k - 1 - j)) & 1 for j in range(k)]
        proj = np.zeros_like(psi)
        idx = [slice(None)] * psi.ndim
        for ax, bit in zip(axes, bits):
            idx[ax] = bit
        idx_t = tuple(idx)
        proj[idx_t] = psi[idx_t]
        if np.vdot(proj, proj).real <= 1e-30:
            continue
        record = np.zeros(2**k, dtype=complex)
        record[m] = 1.0
        grown = np.multiply.outer(proj, record.reshape((2,) * k))
        if rnd.speaker == "A":
            alice, bob = br.alice, new_axes + br.bob
        else:
            alice, bob = new_axes + br.alice, br.bob
        out.append(_Branch(grown, alice, bob, br.transcript + (m,)))
    return out


def leaf_distribution(proto: LoccProtocol, x: int) -> list[tuple[tuple[int, ...], int, float]]:
    """Every ``(transcript, guess, probability)`` with positive probability for input ``x``."""
    branches = [_initial(proto, x)]
    for rnd in proto.rounds:
        branches = [child for br in branches for child in _measure(br, rnd)]
    n = proto.n
    leaves = []
    for br in branches:
        psi = _apply(br.psi, proto.output_unitary, br.bob)
        moved = np.moveaxis(psi, br.bob[:n], list(range(n))).reshape(2**n, -1)
        probs = np.sum(np.abs(moved) ** 2, axis=1)
        for y in np.nonzero(probs > 1e-30)[0]:
            leaves.append((br.transcript, int(y), float(probs[y])))
    return leaves


def run_exact(proto: LoccProtocol) -> float:
    """``Pr[Y = X]`` for uniformly random ``X``, by full branch enumeration."""
    n = proto.n
    total = 0.0
    for x in range(2**n):
        total += sum(pr for _, y, pr in leaf_distribution(proto, x) if y == x)
    return float(total / 2**n)


@dataclass
class SampledRun:
    p_hat: float
    inputs: np.ndarray
    guesses: np.ndarray
    transcripts: list[tuple[int, ...]]

    @property
    def trials(self) -> int:
        return len(self.inputs)


def run_sampled(proto: LoccProtocol, trials: int, seed: int) -> SampledRun:
    """Monte-Carlo run: draw ``X`` uniformly, then a leaf of the protocol tree for that input."""
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    n = proto.n
    xs = rng.integers(0, 2**n, size=trials)
    ys = np.empty(trials, dtype=np.int64)
    transcripts: list[tuple[int, ...]] = [()] * trials
    for x in range(2**n):
        idx = np.nonzero(xs == x)[0]
        if not len(idx):
            continue
        leaves = leaf_distribution(proto, x)
        pr = np.array([lf[2] for lf in leaves])
        pick = rng.choice(len(leaves), size=len(idx), p=pr / pr.sum())
        for i, j in zip(idx, pick):
            ys[i] = leaves[j][1]
            transcripts[i] = leaves[j][0]
    return SampledRun(float(np.mean(ys == xs)), xs, ys, transcripts)


# ---------------------------------------------------------------------------
# protocols and the bound


def _hadamards(k: int) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for _ in range(k):
        out = np.kron(out, _H)
    return out


def baseline_protocol(n: int, p_target: float) -> LoccProtocol:
    """Alice sends the first ``ceil(n - log2(1/p))`` bits of ``X``; Bob guesses the rest uniformly."""
    if not (0.0 < p_target <= 1.0):
        raise ValueError(f"p_target must lie in (0, 1], got {p_target!r}")
    m = max(0, math.ceil(n + math.log2(p_target) - 1e-12))
    guess = n - m
    out = np.kron(np.eye(2**m), _hadamards(guess)) if guess else None
    return LoccProtocol(n, np.ones(1), [Round("A", m)] if m else [], out, 0, guess)


def verbatim_protocol(n: int) -> LoccProtocol:
    return baseline_protocol(n, 1.0)


@dataclass
class BoundRecord:
    m_a: int
    m_b: int
    n: int
    p: float
    slack: float
    one_way: bool

    @property
    def holds(self) -> bool:
        return self.slack >= -1e-9


def check_bound(proto: LoccProtocol) -> BoundRecord:
    """Slack ``m_A - n - log2 p`` of the bit-transmission bound for an exactly evaluated protocol."""
    p = run_exact(proto)
    slack = float("inf") if p <= 0 else proto.m_a - proto.n - math.log2(p)
    one_way = all(r.speaker == "A" for r in proto.rounds)
    return BoundRecord(proto.m_a, proto.m_b, proto.n, p, float(slack), one_way)


def _random_local(dim_qubits: int, rng: np.random.Generator) -> np.ndarray | None:
    kind = rng.integers(4)
    d = 2**dim_qubits
    if kind == 0 or dim_qubits == 0:
        return None
    if kind == 1:
        return np.eye(d, dtype=complex)[rng.permutation(d)]
    if kind == 2:
        return random_unitary(d, rng)
    # a random permutation dressed with phases and a Haar rotation on one qubit
    perm = np.eye(d, dtype=complex)[rng.permutation(d)] * np.exp(2j * np.pi * rng.random(d))
    q = int(rng.integers(dim_qubits))
    local = np.kron(np.kron(np.eye(2**q), random_unitary(2, rng)), np.eye(2 ** (dim_qubits - q - 1)))
    return local @ perm


def random_protocol(rng: np.random.Generator, max_n: int = 4, max_ebits: int = 3,
                    max_rounds: int = 4) -> LoccProtocol:
    """A random protocol within the simulation envelope, used by the fuzz campaign."""
    while True:
        n = int(rng.integers(1, max_n + 1))
        e = int(rng.integers(0, max_ebits + 1))
        schmidt = rng.dirichlet(np.ones(2**e)) if rng.random() < 0.5 else np.full(2**e, 2.0**-e)
        a_anc = int(rng.integers(0, 2))
        b_anc = int(rng.integers(0, max(n - e, 0) + 2))
        k = int(rng.integers(1, max_rounds + 1))
        speakers = ["A" if rng.random() < 0.6 else "B" for _ in range(k)]
        a, b = n + e + a_anc, e + b_anc
        rounds = []
        for sp in speakers:
            own = a if sp == "A" else b
            bits = int(rng.integers(0, min(own, 3) + 1))
            if a + b + bits > MAX_QUBITS:
                bits = 0
            rounds.append(Round(sp, bits, _random_local(own, rng)))
            if sp == "A":
                b += bits
            else:
                a += bits
        if b < n or a + b > MAX_QUBITS:
            continue
        return LoccProtocol(n, schmidt, rounds, _random_local(b, rng), a_anc, b_anc)


def fuzz_bound(count: int, seed: int, **kwargs) -> list[BoundRecord]:
    """Exact bound checks on ``count`` random protocols; protocol ``i`` draws from stream ``(seed, i)``."""
    out = []
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        out.append(check_bound(random_protocol(rng, **kwargs)))
    return out


def rsp_to_bits(outputs: Sequence[np.ndarray]) -> float:
    """Bob's success at guessing ``x`` by measuring ``sigma_x`` in the computational basis.

    ``outputs[x]`` is the state an RSP protocol leaves with Bob for target
    ``|x><x|``. The success probability equals the average squared fidelity,
    which the check below confirms.
    """
    m = len(outputs)
    diag = np.array([float(np.real(np.asarray(o)[x, x])) for x, o in enumerate(outputs)])
    if any(np.asarray(o).shape[0] != m for o in outputs):
        raise InvalidState("outputs must act on a space of dimension equal to their number")
    success = float(np.mean(diag))
    fid2 = float(np.mean([fidelity(projector(ket(x, m)), o) ** 2 for x, o in enumerate(outputs)]))
    if success < fid2 - 1e-9:
        raise InvalidState(f"measured success {success} below averaged squared fidelity {fid2}")
    return success
