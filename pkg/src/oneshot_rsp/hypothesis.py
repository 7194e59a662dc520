"""Binary quantum hypothesis testing.

``beta_eps`` finds the optimal test by bisecting on the Neyman-Pearson
threshold ``t``: the projector onto the positive part of ``rho - t sigma``
accepts less of ``rho`` as ``t`` grows, and the optimal test mixes the two
projectors that bracket the acceptance level ``1 - eps``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidEps, InvalidState
from .operators import as_matrix, hermitize, validate_state
from .sdp import LinearMap, SdpBuilder, require_optimal

log = logging.getLogger(__name__)

BETA_ZERO = 1e-14
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class TestOperator:
    """A two-outcome test ``(Q, 1 - Q)`` together with its acceptance probabilities."""

    __test__ = False  # keep pytest from collecting this class

    matrix: np.ndarray
    alpha: float
    beta: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def check(self, tol: float = 1e-9) -> None:
        w = np.linalg.eigvalsh(hermitize(self.matrix))
        if w[0] < -tol or w[-1] > 1 + tol:
            raise InvalidState(f"test eigenvalues {w[0]:.3e}..{w[-1]:.3e} leave [0, 1]")


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not (0.0 <= eps < 1.0):
        raise InvalidEps(f"eps must lie in [0, 1), got {eps!r}")
    return eps


def _positive_projector(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hermitize(m))
    # rounding noise on null directions must not enter the test
    vp = v[:, w > 1e-12 * max(1.0, float(np.max(np.abs(w))))]
    return vp @ vp.conj().T


def _expect(q: np.ndarray, m: np.ndarray) -> float:
    return float(np.real(np.trace(q @ m)))


def beta_eps_sdp(rho, sigma, eps: float) -> TestOperator:
    """Independent SDP solve of the testing problem.

    The solver works on the dual ``max (1 - eps) mu - Tr Y`` subject to
    ``Y >= mu rho - sigma``, ``Y >= 0``, which always has interior points;
    the optimal test is the multiplier of the matrix inequality.
    """
    r, s = as_matrix(rho), as_matrix(sigma)
    eps = _check_eps(eps)
    d = r.shape[0]
    b = SdpBuilder()
    y = b.block(d)
    mu = b.scalar()
    slack = b.matrix_constraint([(y, LinearMap.identity()), (mu, LinearMap.scalar_times(-r))], ">=", -s)
    b.add_objective(mu, np.array([[1.0 - eps]]))
    b.add_objective(y, -np.eye(d))
    sol = require_optimal(b.solve(maximize=True), "hypothesis-testing SDP")
    Q = hermitize(sol.dual_blocks[slack])
    return TestOperator(Q, _expect(Q, r), max(float(sol.primal_value), 0.0))


def beta_eps(rho, sigma, eps: float) -> tuple[float, TestOperator]:
    """Minimal type-II error ``<Q, sigma>`` over tests with ``<Q, rho> >= 1 - eps``."""
    r, s = as_matrix(rho), as_matrix(sigma)
    if r.shape != s.shape:
        raise InvalidState(f"states of shapes {r.shape} and {s.shape}")
    validate_state(r, normalized=True)
    validate_state(s, normalized=True)
    eps = _check_eps(eps)
    target = 1.0 - eps
    slack = 1e-12

    # rho-mass sitting outside supp(sigma) can be accepted for free
    ws, vs = np.linalg.eigh(hermitize(s))
    ker = vs[:, ws <= 1e-9]
    if ker.shape[1]:
        pk = ker @ ker.conj().T
        free = _expect(pk, r)
        if free >= target - slack:
            c = min(target / free, 1.0) if free > 0 else 0.0
            Q = c * pk
            return _finish(Q, r, s)

    def accept(t: float) -> tuple[np.ndarray, float]:
        Q = _positive_projector(r - t * s)
        return Q, _expect(Q, r)

    q_lo, a_lo = accept(0.0)
    if a_lo < target - slack:
        # rho not fully supported by the positive part at t = 0 only through rounding
        q_lo, a_lo = _support(r), 1.0
    t_lo = 0.0
    t_hi = 1.0
    q_hi, a_hi = accept(t_hi)
    doublings = 0
    while a_hi >= target - slack and doublings < 2000:
        t_lo, q_lo, a_lo = t_hi, q_hi, a_hi
        t_hi *= 2.0
        q_hi, a_hi = accept(t_hi)
        doublings += 1
    if a_hi >= target - slack:
        log.info("threshold bracket not found; falling back to SDP")
        test = beta_eps_sdp(r, s, eps)
        return _report(test)

    for _ in range(MAX_BISECTIONS):
        if t_hi - t_lo <= 4 * np.finfo(float).eps * t_hi:
            break
        mid = 0.5 * (t_lo + t_hi)
        q_mid, a_mid = accept(mid)
        if a_mid >= target - slack:
            t_lo, q_lo, a_lo = mid, q_mid, a_mid
        else:
            t_hi, q_hi, a_hi = mid, q_mid, a_mid
    else:
        log.info("bisection cap reached; falling back to SDP")
        return _report(beta_eps_sdp(r, s, eps))

    if a_lo - a_hi > 1e-15:
        w = float(np.clip((target - a_hi) / (a_lo - a_hi), 0.0, 1.0))
    else:
        w = 1.0
    Q = w * q_lo + (1.0 - w) * q_hi
    return _finish(Q, r, s)


def _support(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hermitize(m))
    vp = v[:, w > 1e-12]
    return vp @ vp.conj().T


def _finish(Q: np.ndarray, r: np.ndarray, s: np.ndarray) -> tuple[float, TestOperator]:
    Q = hermitize(Q)
    return _report(TestOperator(Q, _expect(Q, r), max(_expect(Q, s), 0.0)))


def _report(test: TestOperator) -> tuple[float, TestOperator]:
    beta = 0.0 if test.beta < BETA_ZERO else test.beta
    return beta, TestOperator(test.matrix, test.alpha, beta)


def d_h(rho, sigma, eps: float) -> float:
    """Hypothesis-testing relative entropy ``-log2(beta / (1 - eps))``."""
    beta, _ = beta_eps(rho, sigma, eps)
    if beta == 0.0:
        return float("inf")
    return float(-np.log2(beta) + np.log2(1.0 - eps))


class BridgeInterval(NamedTuple):
    lower: float
    upper: float


def bridge_smoothing(eps: float) -> tuple[float, float]:
    """Smoothing radii whose smooth max-divergences the bridge interval brackets.

    The first radius pairs with ``lower`` (the smooth value is at least it)
    and the second with ``upper`` (the smooth value is at most it).
    """
    return float(np.sqrt(1.0 - eps)), float(np.sqrt(2.0 * (1.0 - eps)))


def bridge_correction(eps: float, delta: float) -> float:
    return float(np.log2(eps * (1.0 - eps + delta) / delta**3) + 3.0 * np.log2(3.0))


def dmax_dh_bridge(rho, sigma, eps: float, delta: float) -> BridgeInterval:
    """Bounds relating smooth max-divergence and hypothesis-testing divergence.

    ``lower`` bounds the smooth max-divergence at radius ``sqrt(1 - eps)``
    from below and ``upper`` bounds the one at ``sqrt(2 (1 - eps))`` from
    above.
    """
    if not (0.0 < eps < 1.0):
        raise InvalidEps(f"eps must lie in (0, 1), got {eps!r}")
    if not (0.0 < delta < eps):
        raise InvalidEps(f"delta must lie in (0, eps), got {delta!r}")
    lower = d_h(rho, sigma, eps - delta) - bridge_correction(eps, delta)
    return BridgeInterval(float(lower), d_h(rho, sigma, eps))


def dpi_gap(rho, sigma, eps: float, channel) -> float:
    """``beta(channel(rho) || channel(sigma)) - beta(rho || sigma)``; nonnegative up to rounding."""
    r, s = as_matrix(rho), as_matrix(sigma)
    before, _ = beta_eps(r, s, eps)
    after, _ = beta_eps(channel(r), channel(s), eps)
    return after - before
