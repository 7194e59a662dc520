"""Remote state preparation by rejection sampling, and the cost brackets around it.

Alice and Bob share ``t`` copies of a purification ``|w>`` of a reference
state ``sigma``. For input ``x`` Alice rotates each copy into ``|w_x>``,
whose flag qubit reads 0 with probability ``2**-lam`` and then leaves
Bob's half in the target ``sigma_x``. She announces the first flagged
copy, or 0 when none is flagged, in which case Bob outputs the maximally
mixed state.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .divergences import cq_i_max_witness, d_max
from .ensemble import Ensemble, orthogonal_ensemble
from .errors import DimensionBlowup, DominationViolated, InvalidEps, NumericalFailure
from .minimax import worst_case_lower_bound
from .operators import (
    as_matrix,
    fidelity,
    hermitize,
    maximally_mixed,
    purification_matrix,
    validate_state,
)
from .smoothing import WEIGHT_CUTOFF, Mode, min_max_radius, smooth_i_max_cq

log = logging.getLogger(__name__)

DOMINATION_TOL = 1e-8
SIMULATION_CAP = 2**20


# ---------------------------------------------------------------------------
# the protocol itself


@dataclass
class JrsInstance:
    lam: float
    sigma: np.ndarray
    targets: list[np.ndarray]
    xis: list[np.ndarray | None]
    w: np.ndarray
    w_x: list[np.ndarray]
    unitaries: list[np.ndarray]
    t: int

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    @property
    def fail_prob(self) -> float:
        return 1.0 - 2.0 ** (-self.lam)

    @property
    def cost_bits(self) -> int:
        return cost_bits(self.t)

    def residuals(self) -> dict[str, float]:
        d = self.dim
        dom = max(float(np.linalg.eigvalsh(hermitize(tx - 2.0**self.lam * self.sigma))[-1]) for tx in self.targets)
        rot = 0.0
        for u, wx in zip(self.unitaries, self.w_x):
            moved = (u @ self.w.reshape(2 * d, d)).reshape(-1)
            rot = max(rot, float(np.linalg.norm(moved - wx)))
        return {"domination": dom, "rotation": rot}


def cost_bits(t: int) -> int:
    """Bits to announce an index in ``{0, ..., t}``."""
    return int(math.ceil(math.log2(t + 1)))


def _pure_vector(rho: np.ndarray) -> np.ndarray:
    """Purification of ``rho`` on ``K (x) H`` as a flat vector, ``K`` first."""
    m = purification_matrix(rho)  # H x K
    return m.T.reshape(-1)


def build_jrs(targets: Sequence, sigma, lam: float, t: int) -> JrsInstance:
    targets = [hermitize(as_matrix(s)) for s in targets]
    sig = hermitize(as_matrix(sigma))
    validate_state(sig, normalized=True)
    if lam < 0:
        raise DominationViolated(f"lambda must be nonnegative, got {lam!r}")
    if t < 1:
        raise ValueError(f"t must be at least 1, got {t}")
    d = sig.shape[0]
    for x, tx in enumerate(targets):
        validate_state(tx, normalized=True)
        excess = float(np.linalg.eigvalsh(hermitize(tx - 2.0**lam * sig))[-1])
        if excess > DOMINATION_TOL:
            raise DominationViolated(f"target {x} exceeds 2**lam * sigma by {excess:.3e}")
    a = 2.0 ** (-lam)
    w = np.concatenate([_pure_vector(sig), np.zeros(d * d, dtype=complex)])
    xis, wxs, us = [], [], []
    Mw = w.reshape(2 * d, d)
    for tx in targets:
        v = _pure_vector(tx)
        if lam == 0 or a >= 1.0:
            xi = None
            wx = np.concatenate([v, np.zeros(d * d, dtype=complex)])
        else:
            xi = (sig - a * tx) / (1.0 - a)
            wv, vv = np.linalg.eigh(hermitize(xi))
            xi = (vv * np.clip(wv, 0, None)) @ vv.conj().T
            xi = xi / np.real(np.trace(xi))
            u = _pure_vector(xi)
            wx = np.concatenate([np.sqrt(a) * v, np.sqrt(1.0 - a) * u])
        Mwx = wx.reshape(2 * d, d)
        A, _, Bh = np.linalg.svd(Mwx @ Mw.conj().T)
        U = A @ Bh
        xis.append(xi)
        wxs.append(wx)
        us.append(U)
    inst = JrsInstance(float(lam), sig, targets, xis, w, wxs, us, int(t))
    res = inst.residuals()
    if res["rotation"] > 1e-7:
        raise NumericalFailure(f"Uhlmann rotation residual {res['rotation']:.3e}")
    return inst


@dataclass
class RspOutcome:
    outputs: list[np.ndarray]
    fidelities: list[float]
    cost_bits: int
    error_mode: str
    achieved_error: float
    weights: list[float] | None = None
    simulation_residual: float | None = None
    fail_fraction: list[float] | None = None

    def summary(self) -> dict:
        return {
            "cost_bits": self.cost_bits,
            "error_mode": self.error_mode,
            "achieved_error": self.achieved_error,
            "fidelities": list(self.fidelities),
            "simulation_residual": self.simulation_residual,
        }


def closed_form_outputs(inst: JrsInstance) -> list[np.ndarray]:
    f_t = inst.fail_prob ** inst.t
    mix = maximally_mixed(inst.dim)
    return [(1.0 - f_t) * tx + f_t * mix for tx in inst.targets]


def tensor_outputs(inst: JrsInstance, x: int) -> np.ndarray:
    """Bob's output for input ``x`` from the full ``t``-copy state, enumerating every flag pattern."""
    d, t = inst.dim, inst.t
    if (2 * d * d) ** t > SIMULATION_CAP:
        raise DimensionBlowup(f"{t} copies of dimension {2 * d * d} exceed the simulation cap")
    copy = (inst.unitaries[x] @ inst.w.reshape(2 * d, d)).reshape(2, d, d)
    state = np.array(1.0 + 0j)
    for _ in range(t):
        state = np.multiply.outer(state, copy)
    out = np.zeros((d, d), dtype=complex)
    for pattern in itertools.product((0, 1), repeat=t):
        idx = tuple(itertools.chain.from_iterable((c, slice(None), slice(None)) for c in pattern))
        proj = state[idx]  # axes: k1 h1 k2 h2 ...
        first = pattern.index(0) if 0 in pattern else None
        if first is None:
            prob = float(np.real(np.vdot(proj, proj)))
            out += prob * maximally_mixed(d)
            continue
        h_axis = 2 * first + 1
        moved = np.moveaxis(proj, h_axis, 0).reshape(d, -1)
        out += moved @ moved.conj().T
    return hermitize(out)


def _score(outputs, reference, weights, mode):
    fids = [fidelity(hermitize(r), hermitize(o)) for r, o in zip(reference, outputs)]
    if mode == "WorstCase":
        err = max(math.sqrt(max(1 - f * f, 0.0)) for f in fids)
    else:
        avg = float(np.dot(weights, fids))
        err = math.sqrt(max(1 - min(avg, 1.0) ** 2, 0.0))
    return fids, float(min(err, 1.0))


def simulate_jrs_exact(inst: JrsInstance, reference: Sequence | None = None, weights=None,
                       cross_check: bool | None = None) -> RspOutcome:
    """Output states from the closed-form mixture, cross-checked on the explicit tensor state.

    The cross-check runs by default whenever ``t <= 6`` and the state fits
    the simulation cap. ``weights`` switch the error to the average-case
    measure.
    """
    outputs = closed_form_outputs(inst)
    residual = None
    d = inst.dim
    if cross_check is None:
        cross_check = inst.t <= 6 and (2 * d * d) ** inst.t <= SIMULATION_CAP
    if cross_check:
        residual = 0.0
        for x in range(len(inst.targets)):
            residual = max(residual, float(np.max(np.abs(tensor_outputs(inst, x) - outputs[x]))))
        if residual > 1e-8:
            raise NumericalFailure(f"closed form and tensor simulation differ by {residual:.3e}")
    ref = inst.targets if reference is None else [as_matrix(r) for r in reference]
    mode = "WorstCase" if weights is None else "AverageCase"
    fids, err = _score(outputs, ref, weights, mode)
    w = None if weights is None else [float(v) for v in weights]
    return RspOutcome(outputs, fids, inst.cost_bits, mode, err, w, residual)


def simulate_jrs_sampled(inst: JrsInstance, trials: int, seed: int, reference: Sequence | None = None,
                         weights=None) -> RspOutcome:
    """Monte-Carlo run of the protocol; input ``x`` draws from its own stream ``(seed, x)``."""
    if trials < 1:
        raise ValueError("trials must be positive")
    d = inst.dim
    outputs, fails = [], []
    for x, (u, tx) in enumerate(zip(inst.unitaries, inst.targets)):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(x,)))
        copy = (u @ inst.w.reshape(2 * d, d)).reshape(2, d * d)
        p0 = float(np.real(np.vdot(copy[0], copy[0])))
        flags = rng.random((trials, inst.t)) < p0
        failed = int(np.sum(~flags.any(axis=1)))
        frac = failed / trials
        outputs.append((1 - frac) * tx + frac * maximally_mixed(d))
        fails.append(frac)
    ref = inst.targets if reference is None else [as_matrix(r) for r in reference]
    mode = "WorstCase" if weights is None else "AverageCase"
    fids, err = _score(outputs, ref, weights, mode)
    w = None if weights is None else [float(v) for v in weights]
    return RspOutcome(outputs, fids, inst.cost_bits, mode, err, w, None, fails)


# ---------------------------------------------------------------------------
# protocols built from smoothed quantities


def _clean_state(m: np.ndarray) -> np.ndarray:
    """Clip solver rounding off a witness state and renormalize it."""
    w, v = np.linalg.eigh(hermitize(m))
    m = (v * np.clip(w, 0.0, None)) @ v.conj().T
    return hermitize(m / np.real(np.trace(m)))


def _needed_lambda(targets, sigma) -> float:
    return max(0.0, max(d_max(tx, sigma) for tx in targets))


def _check_protocol_eps(eps: float) -> float:
    if not (0.0 < eps <= 1.0):
        raise InvalidEps(f"eps must lie in (0, 1], got {eps!r}")
    return float(eps)


@dataclass
class ProtocolRun:
    outcome: RspOutcome
    cost_bits: int
    lam: float
    t: int
    smoothing_value: float
    error_ok: bool
    instance: JrsInstance | None = None

    def __iter__(self):
        # unpacks as (outcome, cost_bits)
        return iter((self.outcome, self.cost_bits))


def avg_case_protocol(ensemble: Ensemble, eps: float, mode: Mode | str = Mode.FIXED_MARGINAL,
                      cross_check: bool | None = None) -> ProtocolRun:
    eps = _check_protocol_eps(eps)
    p = ensemble.require_weights()
    sm = smooth_i_max_cq(ensemble, eps / (2 * math.sqrt(2)), mode)
    sigma = _clean_state(sm.sigma)
    live = [x for x in range(len(ensemble)) if p[x] > WEIGHT_CUTOFF and sm.q[x] > WEIGHT_CUTOFF]
    targets = [_clean_state(sm.conditionals[x]) if x in live else sigma for x in range(len(ensemble))]
    lam = max(sm.value, _needed_lambda([targets[x] for x in live], sigma), 0.0)
    t = max(1, math.ceil(2.0**lam * math.log(8 / eps**2)))
    # the unsmoothed states are exact, so prefer them whenever they need no more rounds
    tr, sp = cq_i_max_witness(ensemble.cq_state())
    sigma0 = _clean_state(sp)
    lam0 = max(math.log2(tr), _needed_lambda([ensemble.states[x] for x in live], sigma0), 0.0)
    t0 = max(1, math.ceil(2.0**lam0 * math.log(8 / eps**2)))
    if t0 <= t:
        sigma, lam, t = sigma0, lam0, t0
        targets = [ensemble.states[x] if x in live else sigma0 for x in range(len(ensemble))]
    inst = build_jrs(targets, sigma, lam, t)
    out = simulate_jrs_exact(inst, reference=ensemble.states, weights=p, cross_check=cross_check)
    return ProtocolRun(out, out.cost_bits, lam, t, sm.value, out.achieved_error <= eps + 1e-6, inst)


def worst_case_protocol(ensemble: Ensemble, eps: float, cross_check: bool | None = None) -> ProtocolRun:
    eps = _check_protocol_eps(eps)
    delta = eps / math.sqrt(1 + eps**2)
    rad = min_max_radius(ensemble, delta, return_witness=True)
    sigma = _clean_state(rad.sigma)
    targets = [_clean_state(w) for w in rad.omegas]
    kappa = rad.value + math.log2(1 + eps**2)
    lam = max(kappa, _needed_lambda(targets, sigma), 0.0)
    t = max(1, math.ceil(2.0**lam * math.log(2 / eps**4)))
    exact = min_max_radius(ensemble, 0.0, return_witness=True)
    sigma0 = _clean_state(exact.sigma)
    lam0 = max(exact.value, _needed_lambda(ensemble.states, sigma0), 0.0)
    t0 = max(1, math.ceil(2.0**lam0 * math.log(2 / eps**4)))
    if t0 <= t:
        sigma, lam, t, targets = sigma0, lam0, t0, list(ensemble.states)
    inst = build_jrs(targets, sigma, lam, t)
    out = simulate_jrs_exact(inst, reference=ensemble.states, cross_check=cross_check)
    return ProtocolRun(out, out.cost_bits, lam, t, rad.value, out.achieved_error <= eps + 1e-6, inst)


# ---------------------------------------------------------------------------
# bound brackets


@dataclass
class BoundReport:
    epsilon: float
    delta: float | None
    lower_bits: float
    achieved_bits: float
    upper_bits: float
    mode: str
    achieved_error: float
    error_mode: str
    lower_certified: bool
    checks: dict[str, bool] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    witness_files: list[str] | None = None
    library_version: str = __version__

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return asdict(self)

    def csv_rows(self) -> list[tuple[str, float, float]]:
        return [("lower_bits", self.lower_bits, self.epsilon),
                ("achieved_bits", self.achieved_bits, self.epsilon),
                ("upper_bits", self.upper_bits, self.epsilon),
                ("achieved_error", self.achieved_error, self.epsilon)]


def avg_case_additive(eps: float) -> float:
    return math.log2(math.log(8 / eps**2)) + 2


def worst_case_additive(eps: float) -> float:
    return math.log2(1 + eps**2) + math.log2(math.log(2 / eps**4)) + 2


def average_case_bracket(ensemble: Ensemble, eps: float, mode: Mode | str = Mode.FIXED_MARGINAL,
                     tol: float = 1e-3, cross_check: bool | None = None) -> BoundReport:
    """Average-case bracket: smooth max-information at ``eps`` below, at ``eps / 2 sqrt 2`` plus slack above."""
    eps = _check_protocol_eps(eps)
    mode = Mode(mode)
    lower = smooth_i_max_cq(ensemble, eps, mode).value
    run = avg_case_protocol(ensemble, eps, mode, cross_check=cross_check)
    upper = run.smoothing_value + avg_case_additive(eps)
    checks = {
        "lower<=achieved": lower <= run.cost_bits + tol,
        "achieved<=upper": run.cost_bits <= upper + tol,
        "error<=eps": run.error_ok,
    }
    notes = [f"smoothing values are {mode.value} estimates, which can only exceed the exact quantity; "
             "the lower-vs-achieved comparison is therefore not a certified instance of the lower bound"]
    return BoundReport(eps, None, float(lower), float(run.cost_bits), float(upper), mode.value,
                       run.outcome.achieved_error, "AverageCase", False, checks, notes)


theorem1_bracket = average_case_bracket


def worst_case_bracket(ensemble: Ensemble, eps: float, delta: float, tol: float = 1e-3,
                       cross_check: bool | None = None) -> BoundReport:
    eps = _check_protocol_eps(eps)
    lower = worst_case_lower_bound(ensemble, eps, delta)
    run = worst_case_protocol(ensemble, eps, cross_check=cross_check)
    upper = run.smoothing_value + worst_case_additive(eps)
    checks = {
        "lower<=achieved": lower <= run.cost_bits + tol,
        "achieved<=upper": run.cost_bits <= upper + tol,
        "error<=eps": run.error_ok,
    }
    notes = []
    if math.isinf(lower):
        notes.append("smoothing radius sqrt(2(eps^2+delta)) is at least 1, so the lower bound is vacuous")
    return BoundReport(eps, float(delta), float(lower), float(run.cost_bits), float(upper), "MinMaxRadius",
                       run.outcome.achieved_error, "WorstCase", True, checks, notes)


# ---------------------------------------------------------------------------
# worst case versus average case on the computational basis


def skewed_distribution(n_bits: int, eps: float, x0: int = 0) -> np.ndarray:
    m = 2**n_bits
    top = math.sqrt(1 - eps**2)
    p = np.full(m, (1 - top) / (m - 1) if m > 1 else 0.0)
    p[x0] = top if m > 1 else 1.0
    return p


def geometric_distribution(n_bits: int) -> np.ndarray:
    m = 2**n_bits
    p = 0.5 ** np.arange(1, m + 1, dtype=float)
    p[-1] = 0.5 ** (m - 1)
    return p


def geometric_cutoff(n_bits: int, eps: float) -> int:
    m = 2**n_bits
    if eps == 0:
        return m
    return min(math.ceil(math.log2(2 / eps**2)), m)


@dataclass
class GapRecord:
    n_bits: int
    epsilon: float
    worst_lb: int
    avg_cost_skewed: int
    skewed_error: float
    skewed_point_mass: bool
    geometric_t: int
    geometric_cost: int
    geometric_bound: float
    geometric_error: float
    reduction_n: int | None
    reduction_success: float | None
    reduction_target: float
    checks: dict[str, bool] = field(default_factory=dict)


def gap_demo(n_bits: int, eps: float, reduction_n: int | None = 3) -> GapRecord:
    if not (0.0 <= eps < 1 / math.sqrt(2)):
        raise InvalidEps(f"eps must lie in [0, 1/sqrt 2), got {eps!r}")
    if n_bits < 1 or n_bits > 10:
        raise ValueError("n_bits must lie in 1..10")
    m = 2**n_bits
    # the reduction to bit transmission gives cost >= n + log2(1 - eps^2) > n - 1
    worst_lb = n_bits

    # skewed: Bob always outputs |x0>; fidelity with |x><x| is the overlap of basis vectors
    p = skewed_distribution(n_bits, eps)
    overlaps = np.zeros(m)
    overlaps[0] = 1.0
    f_skew = float(np.dot(p, overlaps))
    skew_err = math.sqrt(max(1 - f_skew**2, 0.0))

    # geometric: send x when x <= t, else a uniformly random index in 1..t
    pg = geometric_distribution(n_bits)
    t = geometric_cutoff(n_bits, eps)
    diag_out = np.zeros((m, m))
    for x in range(m):
        if x < t:
            diag_out[x, x] = 1.0
        else:
            diag_out[x, :t] = 1.0 / t
    # F(|x><x|, sigma_x) = sqrt(<x|sigma_x|x>) for diagonal outputs
    f_geo = float(np.dot(pg, np.sqrt(np.diag(diag_out))))
    geo_err = math.sqrt(max(1 - min(f_geo, 1.0) ** 2, 0.0))
    geo_cost = int(math.ceil(math.log2(t))) if t > 1 else 0
    bound = math.log2(min(m, math.log2(2 / eps**2))) + 2 if eps > 0 else n_bits + 2.0

    succ = None
    if reduction_n:
        from .locc import rsp_to_bits

        ens = orthogonal_ensemble(2**reduction_n)
        run = worst_case_protocol(ens, eps if eps > 0 else 1e-3, cross_check=False)
        succ = rsp_to_bits(run.outcome.outputs)
    target = 1 - eps**2
    checks = {
        "skewed_error<=eps": skew_err <= eps + 1e-12,
        "geometric_error<=eps": geo_err <= eps + 1e-12,
        "geometric_cost<=bound": geo_cost <= bound + 1e-12,
    }
    if succ is not None:
        checks["reduction_success>=1-eps^2"] = succ >= target - 1e-9
    return GapRecord(n_bits, eps, worst_lb, 0, skew_err, bool(eps == 0), t, geo_cost, bound, geo_err,
                     reduction_n, succ, target, checks)
