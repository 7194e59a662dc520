"""Smoothed max-divergence and max-information through small SDPs.

Fidelity constraints use the block characterization: ``F(rho, w)`` is the
largest ``Re Tr X`` with ``[[rho, X], [X^dag, w]] >= 0``. The smoothed
operator is the lower-right corner of that block, so it never needs a
separate variable.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .divergences import cq_i_max_witness, d_max, mutual_information
from .ensemble import CqState, Ensemble
from .errors import InvalidEps, InvalidState
from .operators import BipartiteShape, as_matrix, hermitize, partial_trace, validate_state
from .sdp import LinearMap, SdpBuilder, SdpSolution, offdiag_functional, require_optimal, select

log = logging.getLogger(__name__)

WEIGHT_CUTOFF = 1e-12


class Mode(str, Enum):
    FIXED_MARGINAL = "FixedMarginal"
    VARIABLE_MARGINAL = "VariableMarginal"


def _fidelity_block(b: SdpBuilder, target: np.ndarray) -> int:
    """Add a ``2d`` block whose upper-left corner is pinned to ``target``."""
    d = target.shape[0]
    z = b.block(2 * d)
    b.matrix_constraint([(z, LinearMap.kraus([select(2 * d, 0, d)]))], "==", target)
    return z


def _corner(d: int, coeff: float = 1.0) -> LinearMap:
    """Picks the lower-right ``d x d`` corner of a ``2d`` block."""
    return LinearMap.kraus([select(2 * d, d, d)], coeff)


def _corner_trace(d: int) -> np.ndarray:
    c = np.zeros((2 * d, 2 * d), dtype=complex)
    c[d:, d:] = np.eye(d)
    return c


def _lower_corner(z: np.ndarray) -> np.ndarray:
    d = z.shape[0] // 2
    return hermitize(z[d:, d:])


def smooth_d_max(rho, sigma, eps: float, normalized: bool = False) -> float:
    """Smallest ``D_max(r || sigma)`` over ``r`` within purified distance ``eps`` of ``rho``.

    ``normalized=True`` restricts the search to unit-trace ``r``; the
    default admits subnormalized ones. Radii ``eps >= 1`` reach the zero
    operator and give ``-inf``.
    """
    r, s = as_matrix(rho), as_matrix(sigma)
    validate_state(r, normalized=True)
    validate_state(s)
    if eps < 0:
        raise InvalidEps(f"eps must be nonnegative, got {eps!r}")
    if eps == 0:
        return d_max(r, s)
    if eps >= 1 and not normalized:
        return float("-inf")
    d = r.shape[0]
    b = SdpBuilder()
    z = _fidelity_block(b, r)
    mu = b.scalar()
    b.matrix_constraint([(mu, LinearMap.scalar_times(s)), (z, _corner(d, -1.0))], ">=", np.zeros((d, d)))
    b.scalar_constraint({z: _corner_trace(d)}, "==" if normalized else "<=", 1.0)
    b.scalar_constraint({z: offdiag_functional(d)}, ">=", float(np.sqrt(max(1.0 - eps**2, 0.0))))
    b.add_objective(mu, np.eye(1))
    sol = b.solve()
    if sol.status == "Infeasible":
        return float("inf")
    require_optimal(sol, "smooth max-divergence SDP")
    val = max(sol.primal_value, 0.0)
    return float(np.log2(val)) if val > 0 else float("-inf")


@dataclass
class SmoothImax:
    """Smooth max-information estimate with the smoothed CQ state that attains it."""

    value: float
    mode: Mode
    fixed_value: float
    q: np.ndarray
    conditionals: list[np.ndarray]
    sigma: np.ndarray
    evaluations: int = 1
    converged: bool = True
    notes: list[str] = field(default_factory=list)

    @property
    def tau_trace(self) -> float:
        return float(2.0 ** self.value)


def _fixed_q_sdp(ens_states: Sequence[np.ndarray], p: np.ndarray, q: np.ndarray, eps: float):
    """``min Tr tau`` with ``tau >= w_x``, ``Tr w_x = 1`` and ``sum sqrt(p q) F(Q_x, w_x) >= sqrt(1 - eps^2)``."""
    d = ens_states[0].shape[0]
    b = SdpBuilder()
    tau = b.block(d)
    blocks: dict[int, int] = {}
    fid: dict[int, np.ndarray] = {}
    for x, (qx, px) in enumerate(zip(q, p)):
        if qx <= WEIGHT_CUTOFF or px <= WEIGHT_CUTOFF:
            continue
        z = _fidelity_block(b, ens_states[x])
        blocks[x] = z
        b.scalar_constraint({z: _corner_trace(d)}, "==", 1.0)
        b.matrix_constraint([(tau, LinearMap.identity()), (z, _corner(d, -1.0))],
                            ">=", np.zeros((d, d)))
        fid[z] = np.sqrt(px * qx) * offdiag_functional(d)
    for x, qx in enumerate(q):
        # symbols only present in q still need tau >= w_x; w_x is free, so any state will do
        if qx > WEIGHT_CUTOFF and x not in blocks:
            w = b.block(d)
            blocks[x] = w
            b.scalar_constraint({w: np.eye(d)}, "==", 1.0)
            b.matrix_constraint([(tau, LinearMap.identity()), (w, LinearMap.identity(-1.0))], ">=", np.zeros((d, d)))
    if not fid:
        raise InvalidState("no symbol carries weight in both p and q")
    b.scalar_constraint(fid, ">=", float(np.sqrt(max(1.0 - eps**2, 0.0))))
    b.add_objective(tau, np.eye(d))
    sol = b.solve()
    return sol, tau, blocks


def _package(states, q, sol: SdpSolution, tau: int, blocks: dict[int, int]):
    t = hermitize(sol.blocks[tau])
    tr = float(np.real(np.trace(t)))
    sigma = t / tr
    conds = []
    for x, s in enumerate(states):
        if x in blocks:
            z = sol.blocks[blocks[x]]
            w = _lower_corner(z) if z.shape[0] == 2 * s.shape[0] else hermitize(z)
            w = w / np.real(np.trace(w))
        else:
            w = sigma.copy()
        conds.append(w)
    return tr, sigma, conds


def _smooth_i_max_fixed(states, p, q, eps):
    sol, tau, blocks = _fixed_q_sdp(states, p, q, eps)
    if sol.status == "Infeasible":
        return float("inf"), None
    require_optimal(sol, "smooth max-information SDP")
    return float(np.log2(max(sol.primal_value, 1e-300))), (sol, tau, blocks)


def smooth_i_max_cq(ensemble: Ensemble, eps: float, mode: Mode | str = Mode.FIXED_MARGINAL,
                    max_evals: int | None = None) -> SmoothImax:
    """Upper estimate of the smooth max-information of ``sum_x p_x |x><x| (x) Q(x)``.

    The search runs over CQ states ``sum_x q_x |x><x| (x) w_x`` with
    normalized ``w_x``. ``FixedMarginal`` keeps ``q = p`` and solves one
    SDP; ``VariableMarginal`` additionally moves ``q`` over the simplex by
    Nelder-Mead, starting from ``p``, and can only lower the value.
    """
    mode = Mode(mode)
    p = ensemble.require_weights()
    states = ensemble.states
    if not (0.0 <= eps <= 1.0):
        raise InvalidEps(f"eps must lie in [0, 1], got {eps!r}")
    if eps == 0.0:
        tr, sp = cq_i_max_witness(ensemble.cq_state())
        conds = [s.copy() if px > WEIGHT_CUTOFF else sp / np.real(np.trace(sp)) for s, px in zip(states, p)]
        val = float(np.log2(tr))
        return SmoothImax(val, mode, val, p.copy(), conds, hermitize(sp / tr))

    fixed_val, pack = _smooth_i_max_fixed(states, p, p, eps)
    tr, sigma, conds = _package(states, p, *pack)
    result = SmoothImax(fixed_val, mode, fixed_val, p.copy(), conds, sigma)
    if mode is Mode.FIXED_MARGINAL or len(states) == 1:
        return result

    n = len(states)
    support = p > WEIGHT_CUTOFF
    best = {"val": fixed_val, "q": p.copy(), "pack": pack}
    evals = [0]

    def to_q(z: np.ndarray) -> np.ndarray:
        e = np.exp(z - z.max())
        return e / e.sum()

    def objective(z: np.ndarray) -> float:
        q = to_q(z)
        evals[0] += 1
        try:
            val, pk = _smooth_i_max_fixed(states, p, q, eps)
        except Exception as exc:  # solver trouble at a probe point just rejects the point
            log.debug("probe rejected: %s", exc)
            return float("inf")
        if val < best["val"] - 1e-12:
            best.update(val=val, q=q, pack=pk)
        return val

    z0 = np.where(support, np.log(np.where(support, p, 1.0)), -30.0)
    budget = max_evals or 60 * n
    res = minimize(objective, z0, method="Nelder-Mead",
                   options={"maxfev": budget, "xatol": 1e-4, "fatol": 1e-7})
    tr, sigma, conds = _package(states, best["q"], *best["pack"])
    return SmoothImax(best["val"], mode, fixed_val, best["q"], conds, sigma,
                      evaluations=evals[0], converged=bool(res.success))


@dataclass
class RadiusResult:
    value: float
    omegas: list[np.ndarray]
    sigma_prime: np.ndarray

    @property
    def sigma(self) -> np.ndarray:
        return self.sigma_prime / np.real(np.trace(self.sigma_prime))


def min_max_radius(ensemble: Ensemble, delta: float, return_witness: bool = False):
    """``min_sigma max_x`` of the smooth max-divergence of ``Q(x)`` against ``sigma`` at radius ``delta``.

    One SDP over subnormalized ``w_x`` close to ``Q(x)`` and an
    unnormalized ``s >= w_x``; the value is ``log2 Tr s``.
    """
    if delta < 0:
        raise InvalidEps(f"delta must be nonnegative, got {delta!r}")
    states = ensemble.states
    d = ensemble.dim
    if delta >= 1:
        out = RadiusResult(float("-inf"), [np.zeros((d, d), complex) for _ in states], np.zeros((d, d), complex))
        return out if return_witness else out.value
    b = SdpBuilder()
    sp = b.block(d)
    blocks = []
    if delta == 0:
        for s in states:
            b.matrix_constraint([(sp, LinearMap.identity())], ">=", s)
    else:
        bound = float(np.sqrt(1.0 - delta**2))
        for s in states:
            z = _fidelity_block(b, s)
            blocks.append(z)
            b.scalar_constraint({z: _corner_trace(d)}, "<=", 1.0)
            b.scalar_constraint({z: offdiag_functional(d)}, ">=", bound)
            b.matrix_constraint([(sp, LinearMap.identity()), (z, _corner(d, -1.0))],
                                ">=", np.zeros((d, d)))
    b.add_objective(sp, np.eye(d))
    sol = require_optimal(b.solve(), "min-max radius SDP")
    value = float(np.log2(max(sol.primal_value, 1e-300)))
    if not return_witness:
        return value
    omegas = [s.copy() for s in states] if delta == 0 else [_lower_corner(sol.blocks[z]) for z in blocks]
    return RadiusResult(value, omegas, hermitize(sol.blocks[sp]))


# ---------------------------------------------------------------------------
# finite-n equipartition check


def _binary_entropy(a: float) -> float:
    if a <= 0 or a >= 1:
        return 0.0
    return float(-a * np.log2(a) - (1 - a) * np.log2(1 - a))


def qaep_lines(mi: float, dim_a: int, dim_b: int, n: int, eps: float) -> tuple[float | None, float]:
    """The two finite-n lines around ``(1/n) I_max^eps`` of ``rho^{(x)n}``.

    The lower line needs ``n >= 2 (1 - eps^2)`` and is ``None`` otherwise.
    """
    lower = None
    if n >= 2 * (1 - eps**2):
        lower = mi - 3.0 / n * _binary_entropy(eps) - 2 * eps * np.log2(dim_a * dim_b)
    xi = 8 * np.sqrt(13 - 4 * np.log2(eps)) * (2 + 0.5 * np.log2(dim_a))
    upper = mi + xi / np.sqrt(n) - 2.0 / n * np.log2(eps**2 / 24)
    return lower, float(upper)


@dataclass
class QaepRecord:
    lhs_lb: float | None
    value: float
    rhs_ub: float
    n: int
    eps: float
    lower_applies: bool

    @property
    def holds(self) -> bool:
        ok = self.value <= self.rhs_ub + 1e-3
        if self.lower_applies:
            ok = ok and self.lhs_lb <= self.value + 1e-3
        return ok


def cq_power(cq: CqState, n: int) -> CqState:
    weights = np.array([1.0])
    conds = [np.array([[1.0 + 0j]])]
    for _ in range(n):
        weights = np.kron(weights, cq.weights)
        conds = [np.kron(a, c) for a in conds for c in cq.conditionals]
    return CqState(weights, conds)


def _as_cq(state, shape: BipartiteShape | None) -> CqState | None:
    if isinstance(state, Ensemble):
        return state.cq_state()
    if isinstance(state, CqState):
        return state
    m = as_matrix(state)
    da, db = shape.dimA, shape.dimB
    t = m.reshape(da, db, da, db)
    off = t.copy()
    for x in range(da):
        off[x, :, x, :] = 0
    if np.max(np.abs(off)) > 1e-12:
        return None
    weights = np.array([np.real(np.trace(t[x, :, x, :])) for x in range(da)])
    conds = [t[x, :, x, :] / w if w > WEIGHT_CUTOFF else np.eye(db) / db for x, w in enumerate(weights)]
    return CqState(weights, conds)


def smooth_i_max_general(rho_ab, shape: BipartiteShape, eps: float) -> float:
    """Upper estimate for a general bipartite state, keeping the smoothed ``A`` marginal fixed."""
    m = as_matrix(rho_ab)
    shape.check(m)
    validate_state(m, normalized=True)
    rho_a = partial_trace(m, shape, "B")
    D, da, db = shape.dim, shape.dimA, shape.dimB
    w, v = np.linalg.eigh(hermitize(rho_a))
    root = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    lift = [np.kron(root[:, [k]], np.eye(db)) for k in range(da)]
    ptrace = [np.kron(np.eye(da), np.eye(db)[[j], :]) @ select(2 * D, D, D) for j in range(db)]
    b = SdpBuilder()
    z = _fidelity_block(b, m)
    sp = b.block(db)
    b.matrix_constraint([(z, LinearMap.kraus(ptrace))], "==", rho_a)
    b.matrix_constraint([(sp, LinearMap.kraus(lift)), (z, LinearMap.kraus([select(2 * D, D, D)], -1.0))],
                        ">=", np.zeros((D, D)))
    b.scalar_constraint({z: offdiag_functional(D)}, ">=", float(np.sqrt(max(1 - eps**2, 0.0))))
    b.add_objective(sp, np.eye(db))
    sol = require_optimal(b.solve(), "general smooth max-information SDP")
    return float(np.log2(sol.primal_value))


def qaep_check(rho_ab, shape: BipartiteShape | None, n: int, eps: float) -> QaepRecord:
    if n not in (1, 2):
        raise ValueError("tensor powers are limited to n in {1, 2}")
    if not (0 < eps < 1):
        raise InvalidEps(f"eps must lie in (0, 1), got {eps!r}")
    cq = _as_cq(rho_ab, shape)
    if cq is not None:
        shape = cq.shape
        mi = mutual_information(cq.matrix(), shape)
        power = cq_power(cq, n)
        ens = Ensemble(power.conditionals, power.weights)
        value = smooth_i_max_cq(ens, eps).value / n
    else:
        m = as_matrix(rho_ab)
        mi = mutual_information(m, shape)
        big, big_shape = m, shape
        if n == 2:
            da, db = shape.dimA, shape.dimB
            t = np.kron(m, m).reshape(da, db, da, db, da, db, da, db)
            big = t.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(da * da * db * db, -1)
            big_shape = BipartiteShape(da * da, db * db)
        value = smooth_i_max_general(big, big_shape, eps) / n
    lower, upper = qaep_lines(mi, shape.dimA, shape.dimB, n, eps)
    return QaepRecord(lower, float(value), upper, n, eps, lower is not None)
