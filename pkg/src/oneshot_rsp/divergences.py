"""Entropies and (non-smooth) divergences, all in bits."""
from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from .ensemble import CqState, Ensemble
from .errors import InvalidEps, NonConvergence
from .hypothesis import beta_eps
from .operators import (
    BipartiteShape,
    as_matrix,
    eigh_clamped,
    hermitize,
    partial_trace,
    validate_state,
)
from .sdp import LinearMap, SdpBuilder, require_optimal

log = logging.getLogger(__name__)

SUPPORT_TOL = 1e-9


def _kernel_weight(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Weight that ``rho`` puts on the numerical kernel of ``sigma``."""
    w, v = np.linalg.eigh(hermitize(sigma))
    k = v[:, w <= SUPPORT_TOL]
    if k.shape[1] == 0:
        return 0.0
    return float(np.real(np.trace(k.conj().T @ rho @ k)))


def supported(rho, sigma) -> bool:
    return _kernel_weight(as_matrix(rho), as_matrix(sigma)) <= SUPPORT_TOL


def _xlogx_sum(w: np.ndarray) -> float:
    w = w[w > 0]
    return float(np.sum(w * np.log2(w)))


def von_neumann(rho) -> float:
    m = as_matrix(rho)
    validate_state(m, normalized=True)
    w, _ = eigh_clamped(m)
    val = -_xlogx_sum(w)
    return val if val > 0 else 0.0


def relative_entropy(rho, sigma) -> float:
    r, s = as_matrix(rho), as_matrix(sigma)
    validate_state(r, normalized=True)
    validate_state(s, normalized=True)
    if not supported(r, s):
        return float("inf")
    ws, vs = np.linalg.eigh(hermitize(s))
    keep = ws > SUPPORT_TOL
    log_s = (vs[:, keep] * np.log2(ws[keep])) @ vs[:, keep].conj().T
    wr, _ = eigh_clamped(r)
    val = _xlogx_sum(wr) - float(np.real(np.trace(r @ log_s)))
    return max(val, 0.0)


def mutual_information(rho_ab, shape: BipartiteShape) -> float:
    m = as_matrix(rho_ab)
    shape.check(m)
    val = von_neumann(partial_trace(m, shape, "B")) + von_neumann(partial_trace(m, shape, "A")) - von_neumann(m)
    return max(val, 0.0)


def holevo(ensemble: Ensemble, p=None) -> float:
    q = ensemble.require_weights() if p is None else np.asarray(p, dtype=float)
    avg = ensemble.average(q)
    val = von_neumann(avg) - sum(px * von_neumann(s) for px, s in zip(q, ensemble.states) if px > 0)
    return max(float(val), 0.0)


def d_max(rho, sigma) -> float:
    """``log2 min{c : rho <= c sigma}``; ``+inf`` without support inclusion."""
    r, s = as_matrix(rho), as_matrix(sigma)
    validate_state(r)
    validate_state(s)
    if not supported(r, s):
        return float("inf")
    ws, vs = np.linalg.eigh(hermitize(s))
    keep = ws > SUPPORT_TOL
    v = vs[:, keep] / np.sqrt(ws[keep])
    top = float(np.linalg.eigvalsh(hermitize(v.conj().T @ r @ v))[-1])
    if top <= 0.0:
        return float("-inf")
    return float(np.log2(top))


def _i_max_witness(rho_ab: np.ndarray, shape: BipartiteShape) -> tuple[float, np.ndarray]:
    rho_a = partial_trace(rho_ab, shape, "B")
    w, v = eigh_clamped(rho_a)
    root = (v * np.sqrt(w)) @ v.conj().T
    eye_b = np.eye(shape.dimB)
    kraus = [np.kron(root[:, [k]], eye_b) for k in range(shape.dimA)]
    b = SdpBuilder()
    sp = b.block(shape.dimB)
    b.matrix_constraint([(sp, LinearMap.kraus(kraus))], ">=", rho_ab)
    b.add_objective(sp, eye_b)
    sol = require_optimal(b.solve(), "max-information SDP")
    return float(sol.primal_value), hermitize(sol.blocks[sp])


def cq_i_max_witness(cq: CqState) -> tuple[float, np.ndarray]:
    """``min Tr s`` over ``s >= rho_x`` for every block with positive weight."""
    d = cq.shape.dimB
    b = SdpBuilder()
    sp = b.block(d)
    for q, c in zip(cq.weights, cq.conditionals):
        if q > 1e-12:
            b.matrix_constraint([(sp, LinearMap.identity())], ">=", c)
    b.add_objective(sp, np.eye(d))
    sol = require_optimal(b.solve(), "max-information SDP")
    return float(sol.primal_value), hermitize(sol.blocks[sp])


def i_max(state, shape: BipartiteShape | None = None) -> float:
    """Max-information ``min_sigma D_max(rho_AB || rho_A (x) sigma)``.

    Accepts a :class:`CqState`, a weighted :class:`Ensemble`, or a dense
    bipartite operator together with its ``shape``.
    """
    if isinstance(state, Ensemble):
        state = state.cq_state()
    if isinstance(state, CqState):
        tr, _ = cq_i_max_witness(state)
    else:
        m = as_matrix(state)
        if shape is None:
            raise ValueError("a dense operator needs its bipartite shape")
        shape.check(m)
        validate_state(m, normalized=True)
        tr, _ = _i_max_witness(m, shape)
    return float(np.log2(tr))


class CapacityResult(NamedTuple):
    value: float
    p: np.ndarray
    iterations: int


def t_of_q(ensemble: Ensemble, tol: float = 1e-6, max_iter: int = 10_000) -> CapacityResult:
    """Maximal Holevo information over input distributions.

    Blahut-Arimoto iteration ``p_x <- p_x exp(D(Q_x || avg))``; stops when
    the capacity upper bound ``max_x D(Q_x || avg)`` is within ``tol`` of
    the current Holevo value.
    """
    n = len(ensemble)
    p = np.full(n, 1.0 / n)
    states = ensemble.states
    for it in range(max_iter + 1):
        avg = sum(px * s for px, s in zip(p, states))
        div = np.array([relative_entropy(s, hermitize(avg)) for s in states])
        chi = float(np.dot(p, div))
        if float(np.max(div)) - chi <= tol:
            return CapacityResult(max(chi, 0.0), p, it)
        p = p * np.exp2(div)
        p /= p.sum()
    raise NonConvergence(f"capacity iteration did not reach tol={tol} in {max_iter} steps")


def d_obs(rho, sigma, grid_size: int = 512) -> float:
    """Observational divergence ``sup_M Tr(M rho) log2(Tr(M rho) / Tr(M sigma))``.

    For a fixed acceptance ``t = Tr(M rho)`` the best test minimizes
    ``Tr(M sigma)``, so the supremum runs over the boundary curve
    ``t -> beta^{1-t}``; it is sampled on ``t = i / grid_size`` and the best
    grid cell is refined by golden-section search. The result never
    exceeds the true value.
    """
    r, s = as_matrix(rho), as_matrix(sigma)
    validate_state(r, normalized=True)
    validate_state(s, normalized=True)
    if not supported(r, s):
        return float("inf")

    def f(t: float) -> float:
        t = min(max(t, 1e-300), 1.0)
        beta, _ = beta_eps(r, s, 1.0 - t)
        if beta <= 0.0:
            return float("inf")
        return t * np.log2(t / beta)

    ts = np.arange(1, grid_size + 1) / grid_size
    vals = np.array([f(t) for t in ts])
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo = ts[i - 1] if i > 0 else ts[0] / 2
    hi = ts[i + 1] if i + 1 < len(ts) else 1.0
    g = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(60):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
        if b - a < 1e-12:
            break
    best = max(best, fc, fd)
    return max(float(best), 0.0)


def substate_bound(rho, sigma, eps: float, grid_size: int = 512, dobs: float | None = None) -> float:
    """``d_obs / eps^2 + log2(1 / (1 - eps^2))``, an upper bound on the smooth max-divergence.

    A precomputed ``dobs`` skips the observational-divergence search.
    """
    if not (0.0 < eps < 1.0 + 1e-12):
        raise InvalidEps(f"eps must lie in (0, 1), got {eps!r}")
    if eps > 1.0 - 1e-9:
        return float("inf")
    if dobs is None:
        dobs = d_obs(rho, sigma, grid_size)
    return float(dobs / eps**2 - np.log2(1.0 - eps**2))
