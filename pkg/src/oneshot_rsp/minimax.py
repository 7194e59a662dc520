"""The testing game ``min_p max_sigma beta^lam(rho_AB(p) || rho_A(p) (x) sigma)``.

For CQ arguments the testing error has the closed dual form

    f(p, sigma) = max_{mu >= 0} mu (1 - lam) - sum_x p_x Tr(mu Q_x - sigma)_+ ,

which is convex in ``p`` and concave in ``sigma``. The sigma-player's best
response to ``p`` is one SDP, and its optimal ``(mu, sigma)`` gives an
affine minorant of ``g(p) = max_sigma f(p, sigma)``. The p-player runs
Kelley's cutting-plane method on these minorants (an LP over the
simplex); the LP multipliers mix the sigma best responses into a
strategy whose guaranteed value closes the duality gap.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from .ensemble import Ensemble
from .errors import InvalidEps, NonConvergence
from .operators import hermitize, positive_part
from .sdp import LinearMap, SdpBuilder, require_optimal
from .smoothing import min_max_radius

log = logging.getLogger(__name__)


@dataclass
class SaddleResult:
    value: float
    p_star: np.ndarray
    sigma_star: np.ndarray
    gap: float
    lower: float
    rounds: int
    lam: float

    @property
    def d_h(self) -> float:
        """The game value expressed as a hypothesis-testing divergence."""
        if self.value <= 0:
            return float("inf")
        return float(-np.log2(self.value / (1.0 - self.lam)))


def _hinge(mu: float, states, sigma: np.ndarray) -> np.ndarray:
    return np.array([np.real(np.trace(positive_part(mu * q - sigma))) for q in states])


def game_value(ensemble: Ensemble, lam: float, p: np.ndarray, sigma: np.ndarray) -> float:
    """``f(p, sigma)`` by a one-dimensional concave maximization over ``mu``."""
    states = ensemble.states

    def neg(mu: float) -> float:
        return -(mu * (1 - lam) - float(np.dot(p, _hinge(mu, states, sigma))))

    return float(-_max_concave_1d(neg))


def _max_concave_1d(neg) -> float:
    """Minimum of a convex function of ``mu >= 0`` whose slope settles at a nonnegative value."""
    hi = 1.0
    while neg(2 * hi) < neg(hi) - 1e-15 and hi < 1e12:
        hi *= 2
    res = minimize_scalar(neg, bounds=(0.0, 2 * hi), method="bounded", options={"xatol": 1e-12})
    return min(float(res.fun), neg(0.0))


def guaranteed_value(ensemble: Ensemble, lam: float, sigma: np.ndarray) -> float:
    """``min_p f(p, sigma) = max_mu [mu (1 - lam) - max_x Tr(mu Q_x - sigma)_+]``."""
    states = ensemble.states

    def neg(mu: float) -> float:
        return -(mu * (1 - lam) - float(np.max(_hinge(mu, states, sigma))))

    return float(-_max_concave_1d(neg))


def best_response(ensemble: Ensemble, lam: float, p: np.ndarray):
    """Best sigma against ``p``; returns ``(g(p), sigma, mu, per-symbol slopes)``."""
    d = ensemble.dim
    b = SdpBuilder()
    sigma = b.block(d)
    mu = b.scalar()
    zs = []
    active = [x for x, px in enumerate(p) if px > 1e-14]
    for x in active:
        z = b.block(d)
        zs.append(z)
        b.matrix_constraint([(z, LinearMap.identity()), (mu, LinearMap.scalar_times(-ensemble.states[x])),
                             (sigma, LinearMap.identity())], ">=", np.zeros((d, d)))
        b.add_objective(z, -p[x] * np.eye(d))
    b.scalar_constraint({sigma: np.eye(d)}, "==", 1.0)
    b.add_objective(mu, np.array([[1.0 - lam]]))
    sol = require_optimal(b.solve(maximize=True), "best-response SDP")
    s = hermitize(sol.blocks[sigma])
    s = s / np.real(np.trace(s))
    m = float(np.real(sol.blocks[mu][0, 0]))
    return float(sol.primal_value), s, m


def max_min_value(ensemble: Ensemble, lam: float) -> tuple[float, np.ndarray]:
    """``max_sigma min_p f(p, sigma)`` as a single SDP."""
    d = ensemble.dim
    b = SdpBuilder()
    sigma = b.block(d)
    mu = b.scalar()
    t = b.scalar()
    for q in ensemble.states:
        z = b.block(d)
        b.matrix_constraint([(z, LinearMap.identity()), (mu, LinearMap.scalar_times(-q)),
                             (sigma, LinearMap.identity())], ">=", np.zeros((d, d)))
        b.scalar_constraint({t: np.eye(1), z: -np.eye(d)}, ">=", 0.0)
    b.scalar_constraint({sigma: np.eye(d)}, "==", 1.0)
    b.add_objective(mu, np.array([[1.0 - lam]]))
    b.add_objective(t, -np.eye(1))
    sol = require_optimal(b.solve(maximize=True), "max-min SDP")
    s = hermitize(sol.blocks[sigma])
    return float(sol.primal_value), s / np.real(np.trace(s))


def solve_saddle(ensemble: Ensemble, lambda_eps: float, tol: float = 1e-4, max_rounds: int = 200) -> SaddleResult:
    lam = float(lambda_eps)
    if not (0.0 <= lam < 1.0):
        raise InvalidEps(f"lambda must lie in [0, 1), got {lam!r}")
    n = len(ensemble)
    p = ensemble.weights.copy() if ensemble.weights is not None else np.full(n, 1.0 / n)
    cuts_a, cuts_c, sigmas = [], [], []
    best_upper, best_p, best_sigma = np.inf, p, None
    lower, sigma_bar = -np.inf, None
    for k in range(1, max_rounds + 1):
        g, s, mu = best_response(ensemble, lam, p)
        if g < best_upper:
            best_upper, best_p = g, p.copy()
        # exact minorant of g through the best response: f(., s) >= mu (1 - lam) - <., hinge>
        cuts_a.append(mu * (1 - lam))
        cuts_c.append(_hinge(mu, ensemble.states, s))
        sigmas.append(s)
        # Kelley step: min_p max_k a_k - <p, c_k> over the simplex
        A = np.hstack([-np.array(cuts_c), -np.ones((k, 1))])
        res = linprog(np.r_[np.zeros(n), 1.0], A_ub=A, b_ub=-np.array(cuts_a),
                      A_eq=np.r_[np.ones(n), 0.0][None, :], b_eq=[1.0],
                      bounds=[(0, None)] * n + [(None, None)], method="highs")
        if res.status != 0:
            raise NonConvergence(f"cutting-plane LP failed: {res.message}")
        p = np.clip(res.x[:n], 0, None)
        p /= p.sum()
        w = np.clip(-res.ineqlin.marginals, 0, None)
        if w.sum() > 0:
            w /= w.sum()
            sigma_bar = hermitize(sum(wk * sk for wk, sk in zip(w, sigmas)))
            lower = max(lower, guaranteed_value(ensemble, lam, sigma_bar))
            best_sigma = sigma_bar
        gap = best_upper - lower
        log.debug("round %d: upper %.10f lower %.10f", k, best_upper, lower)
        if gap <= tol:
            return SaddleResult(float(best_upper), best_p, best_sigma, float(max(gap, 0.0)), float(lower), k, lam)
    raise NonConvergence(f"saddle gap {best_upper - lower:.3e} above tol={tol} after {max_rounds} rounds")


def lower_bound_correction(eps: float, delta: float) -> float:
    return float(np.log2((1 - eps**2) * (eps**2 + delta) / delta**3) + 3 * np.log2(3.0))


def lower_bound_radius(eps: float, delta: float) -> float:
    return float(np.sqrt(2 * (eps**2 + delta)))


def worst_case_lower_bound(ensemble: Ensemble, eps: float, delta: float) -> float:
    """Lower bound on worst-case cost: the min-max radius at ``sqrt(2 (eps^2 + delta))`` minus a correction.

    Radii of one or more reach the zero operator, so the bound is then ``-inf``.
    """
    if not (0.0 < eps <= 1.0):
        raise InvalidEps(f"eps must lie in (0, 1], got {eps!r}")
    if not (0.0 < delta < 1.0 - eps**2):
        raise InvalidEps(f"delta must lie in (0, 1 - eps^2), got {delta!r}")
    gamma = lower_bound_radius(eps, delta)
    radius = min_max_radius(ensemble, gamma)
    return float(radius - lower_bound_correction(eps, delta))
