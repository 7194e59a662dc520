"""The acceptance suite, shared by the test suite and ``oneshot-rsp selftest``.

Each criterion draws from its own stream ``SeedSequence(seed, (k,))`` and
returns a :class:`CriterionResult` whose ``summary`` holds only
deterministic values (rounded to ten significant digits), so that reports
for equal seeds are byte-identical. Wall-clock timings are kept apart.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from .divergences import d_obs, i_max, substate_bound
from .ensemble import CqState, Ensemble, orthogonal_ensemble
from .hypothesis import beta_eps, beta_eps_sdp, bridge_smoothing, dmax_dh_bridge
from .locc import baseline_protocol, check_bound, fuzz_bound
from .nets import random_ensemble, sample_states, transfer_brackets
from .operators import hermitize, maximally_mixed
from .rsp import build_jrs, closed_form_outputs, gap_demo, tensor_outputs, average_case_bracket, worst_case_bracket
from .smoothing import min_max_radius, qaep_check, smooth_d_max

SCALES: dict[str, dict[str, object]] = {
    "full": {
        "beta_pairs": 100, "bridge_pairs": 200, "bracket_ensembles": 50, "orthogonal_sizes": (2, 4, 8),
        "jrs_max_t": 6, "locc_max_n": 6, "locc_fuzz": 200, "reduction_n": 3, "convexity_triples": 500,
        "qaep_n": (1, 2), "substate_pairs": 100, "net_ensembles": 20,
    },
    "quick": {
        "beta_pairs": 10, "bridge_pairs": 10, "bracket_ensembles": 3, "orthogonal_sizes": (2, 4),
        "jrs_max_t": 3, "locc_max_n": 3, "locc_fuzz": 10, "reduction_n": 2, "convexity_triples": 25,
        "qaep_n": (1,), "substate_pairs": 3, "net_ensembles": 2,
    },
}

NAMES = {
    1: "Neyman-Pearson bisection matches SDP",
    2: "Dmax-Dh sandwich",
    3: "average-case bracket",
    4: "worst-case bracket",
    5: "orthogonal ensembles",
    6: "JRS closed form vs tensor simulation",
    7: "LOCC bit-transmission bound",
    8: "worst vs average gap",
    9: "convexity and concavity of beta",
    10: "QAEP finite-n sandwich",
    11: "substate consistency",
    12: "net transfer",
    13: "determinism",
}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d} {self.name} ({self.seconds:.1f}s)"

    def record(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed, "summary": _clean(self.summary)}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.10g}")
    return obj


def _rng(seed: int, k: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k, *extra)))


def _hs_state(rng: np.random.Generator, d: int) -> np.ndarray:
    return sample_states(d, 1, "HilbertSchmidtMixed", int(rng.integers(2**63)))[0].matrix


def _any_state(rng: np.random.Generator, d: int) -> np.ndarray:
    kind = "HaarPure" if rng.random() < 0.5 else "HilbertSchmidtMixed"
    return sample_states(d, 1, kind, int(rng.integers(2**63)))[0].matrix


# ---------------------------------------------------------------------------
# criteria


def criterion_1(seed: int, scale: dict, tol: float) -> dict:
    rng = _rng(seed, 1)
    worst, count = 0.0, 0
    for _ in range(scale["beta_pairs"]):
        d = int(rng.integers(2, 4))
        # full-rank pairs: at eps = 0 a rank-deficient rho leaves the SDP without an attained optimum
        r, s = _hs_state(rng, d), _hs_state(rng, d)
        for eps in (0.0, 0.25, 0.5):
            b1, _ = beta_eps(r, s, eps)
            b2 = beta_eps_sdp(r, s, eps).beta
            worst = max(worst, abs(b1 - b2))
            count += 1
    return {"passed": worst <= 1e-6 * tol, "max_abs_diff": worst, "comparisons": count}


def criterion_2(seed: int, scale: dict, tol: float) -> dict:
    rng = _rng(seed, 2)
    violations, checks = 0, 0
    worst = -np.inf
    for _ in range(scale["bridge_pairs"]):
        r, s = _any_state(rng, 2), _hs_state(rng, 2)
        for eps in (0.3, 0.5, 0.7):
            lo, hi = dmax_dh_bridge(r, s, eps, eps / 2)
            r_lo, r_hi = bridge_smoothing(eps)
            a = smooth_d_max(r, s, r_lo)
            b = smooth_d_max(r, s, r_hi)
            for excess in (lo - a, b - hi):
                checks += 1
                if np.isfinite(excess):
                    worst = max(worst, excess)
                if excess > 1e-4 * tol:
                    violations += 1
    return {"passed": violations == 0, "violations": violations, "checks": checks, "max_excess": worst}


def _bracket_ensembles(seed: int, count: int) -> list[Ensemble]:
    out = []
    for i in range(count):
        rng = _rng(seed, 3, i)
        d = int(rng.integers(2, 4))
        n = int(rng.integers(1, 7))
        out.append(random_ensemble(d, n, int(rng.integers(2**63))))
    return out


def criterion_3(seed: int, scale: dict, tol: float) -> dict:
    fails, worst_err_margin, runs = [], -np.inf, 0
    for i, ens in enumerate(_bracket_ensembles(seed, scale["bracket_ensembles"])):
        for eps in (0.1, 0.3):
            rep = average_case_bracket(ens, eps, tol=1e-3 * tol)
            runs += 1
            margin = rep.achieved_error - eps
            worst_err_margin = max(worst_err_margin, margin)
            ok = (rep.lower_bits <= rep.achieved_bits + 1e-3 * tol
                  and rep.achieved_bits <= rep.upper_bits + 1e-3 * tol
                  and margin <= 1e-6 * tol)
            if not ok:
                fails.append([i, eps])
    return {"passed": not fails, "runs": runs, "failures": fails, "max_error_minus_eps": worst_err_margin}


def criterion_4(seed: int, scale: dict, tol: float) -> dict:
    fails, runs, finite_lower = [], 0, 0
    for i, ens in enumerate(_bracket_ensembles(seed, scale["bracket_ensembles"])):
        for eps in (0.1, 0.3):
            rep = worst_case_bracket(ens, eps, (1 - eps**2) / 2, tol=1e-3 * tol)
            runs += 1
            finite_lower += math.isfinite(rep.lower_bits)
            ok = (rep.lower_bits <= rep.achieved_bits + 1e-3 * tol
                  and rep.achieved_bits <= rep.upper_bits + 1e-3 * tol
                  and rep.achieved_error <= eps + 1e-3 * tol)
            if not ok:
                fails.append([i, eps])
    return {"passed": not fails, "runs": runs, "failures": fails, "finite_lower_bounds": finite_lower}


def criterion_5(seed: int, scale: dict, tol: float) -> dict:
    rows = {}
    ok = True
    for n in scale["orthogonal_sizes"]:
        ens = orthogonal_ensemble(n)
        a, b = i_max(ens), min_max_radius(ens, 0.0)
        rows[str(n)] = [a, b]
        ok = ok and abs(a - math.log2(n)) <= 1e-5 * tol and abs(b - math.log2(n)) <= 1e-5 * tol
    return {"passed": ok, "values": rows}


def criterion_6(seed: int, scale: dict, tol: float) -> dict:
    rng = _rng(seed, 6)
    worst, cases = 0.0, 0
    for lam in (0.0, 0.5, 1.0, 2.0):
        for t in range(1, scale["jrs_max_t"] + 1):
            if lam == 0.0:
                sigma = _hs_state(rng, 2)
                targets = [sigma]
            else:
                sigma = maximally_mixed(2)
                cap = min(1.0, 2.0 ** (lam - 1))
                targets = []
                for _ in range(2):
                    r = _any_state(rng, 2)
                    top = float(np.linalg.eigvalsh(r)[-1])
                    a = 0.0 if top <= cap else (top - cap) / (top - 0.5)
                    targets.append(hermitize((1 - a) * r + a * sigma))
            inst = build_jrs(targets, sigma, lam, t)
            closed = closed_form_outputs(inst)
            for x in range(len(targets)):
                worst = max(worst, float(np.max(np.abs(tensor_outputs(inst, x) - closed[x]))))
            cases += 1
    return {"passed": worst <= 1e-8 * tol, "max_norm_diff": worst, "cases": cases}


def criterion_7(seed: int, scale: dict, tol: float) -> dict:
    worst_base = 0.0
    for n in range(1, scale["locc_max_n"] + 1):
        for k in range(0, n + 1):
            rec = check_bound(baseline_protocol(n, 2.0**-k))
            worst_base = max(worst_base, abs(rec.slack))
    recs = fuzz_bound(scale["locc_fuzz"], seed)
    min_slack = min(r.slack for r in recs)
    ok = worst_base <= 1e-12 * tol and min_slack >= -1e-9 * tol
    return {"passed": ok, "baseline_max_abs_slack": worst_base, "fuzz_count": len(recs),
            "fuzz_min_slack": min_slack, "fuzz_two_way": sum(r.m_b > 0 for r in recs)}


def criterion_8(seed: int, scale: dict, tol: float) -> dict:
    g = gap_demo(10, 0.5, reduction_n=scale["reduction_n"])
    ok = (g.worst_lb == 10 and g.avg_cost_skewed == 0 and g.skewed_error <= 0.5 + 1e-12 * tol
          and abs(g.geometric_bound - 3.585) <= 1e-3 and g.geometric_cost <= g.geometric_bound
          and g.geometric_error <= 0.5 + 1e-12 * tol and g.reduction_success >= 0.75 - 1e-9 * tol)
    return {"passed": ok, "worst_lb": g.worst_lb, "avg_cost_skewed": g.avg_cost_skewed,
            "skewed_error": g.skewed_error, "geometric_cost": g.geometric_cost,
            "geometric_bound": g.geometric_bound, "geometric_error": g.geometric_error,
            "reduction_n": g.reduction_n, "reduction_success": g.reduction_success}


def _cq_beta(states, p, sigma, eps) -> float:
    cq = CqState(p, states)
    rho = cq.matrix()
    return beta_eps(rho, np.kron(cq.marginal_a, sigma), eps)[0]


def criterion_9(seed: int, scale: dict, tol: float) -> dict:
    rng = _rng(seed, 9)
    vconv = vconc = 0
    worst = -np.inf
    for _ in range(scale["convexity_triples"]):
        n, d = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        states = [_any_state(rng, d) for _ in range(n)]
        eps = float(rng.uniform(0.05, 0.8))
        lam = float(rng.random())
        p0, p1 = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        s0, s1 = _hs_state(rng, d), _hs_state(rng, d)
        # convex in p at fixed sigma
        mid = _cq_beta(states, lam * p0 + (1 - lam) * p1, s0, eps)
        ex = mid - (lam * _cq_beta(states, p0, s0, eps) + (1 - lam) * _cq_beta(states, p1, s0, eps))
        worst = max(worst, ex)
        vconv += ex > 1e-8 * tol
        # concave in sigma at fixed p
        mid = _cq_beta(states, p0, lam * s0 + (1 - lam) * s1, eps)
        ex = (lam * _cq_beta(states, p0, s0, eps) + (1 - lam) * _cq_beta(states, p0, s1, eps)) - mid
        worst = max(worst, ex)
        vconc += ex > 1e-8 * tol
    return {"passed": vconv == 0 and vconc == 0, "convexity_violations": vconv,
            "concavity_violations": vconc, "max_excess": worst}


def criterion_10(seed: int, scale: dict, tol: float) -> dict:
    rng = _rng(seed, 10)
    rows, ok = [], True
    for n in scale["qaep_n"]:
        for eps in (0.1, 0.3):
            p = rng.dirichlet(np.ones(2))
            cq = CqState(p, [_any_state(rng, 2), _any_state(rng, 2)])
            rec = qaep_check(cq, None, n, eps)
            good = rec.value <= rec.rhs_ub + 1e-3 * tol
            if rec.lower_applies:
                good = good and rec.lhs_lb <= rec.value + 1e-3 * tol
            ok = ok and good
            rows.append([n, eps, rec.lhs_lb if rec.lhs_lb is not None else "n/a", rec.value, rec.rhs_ub])
    return {"passed": ok, "rows": rows}


def criterion_11(seed: int, scale: dict, tol: float) -> dict:
    rng = _rng(seed, 11)
    violations, worst = 0, -np.inf
    for _ in range(scale["substate_pairs"]):
        r, s = _any_state(rng, 2), _hs_state(rng, 2)
        dobs = d_obs(r, s)
        for eps in (0.3, 0.6):
            ex = smooth_d_max(r, s, eps) - substate_bound(r, s, eps, dobs=dobs)
            worst = max(worst, ex)
            violations += ex > 1e-4 * tol
    return {"passed": violations == 0, "violations": violations, "max_excess": worst}


def _clustered_ensemble(rng: np.random.Generator) -> Ensemble:
    d = int(rng.integers(2, 4))
    states = []
    for _ in range(int(rng.integers(1, 4))):
        base = _any_state(rng, d)
        states.append(base)
        for _ in range(int(rng.integers(0, 3))):
            a = float(rng.uniform(0.0, 0.004))
            states.append(hermitize((1 - a) * base + a * _hs_state(rng, d)))
    return Ensemble(states, rng.dirichlet(np.ones(len(states))))


def criterion_12(seed: int, scale: dict, tol: float) -> dict:
    eps, nu = 0.3, 0.1
    fails, worst_avg, merged = [], -np.inf, 0
    for i in range(scale["net_ensembles"]):
        ens = _clustered_ensemble(_rng(seed, 12, i))
        avg = transfer_brackets(ens, eps, nu, "AverageCase", tol=1e-6 * tol)
        worst = transfer_brackets(ens, eps, nu, "WorstCase", tol=1e-6 * tol)
        merged += avg.net_size < avg.source_size
        worst_avg = max(worst_avg, *(e - eps - nu for e in avg.composed_errors.values()))
        both = worst.left_cost is not None and worst.right_cost is not None
        if not (avg.ok and worst.ok and both):
            fails.append(i)
    return {"passed": not fails, "failures": fails, "nets_smaller_than_source": merged,
            "max_avg_error_minus_bound": worst_avg}


def criterion_13(seed: int, scale: dict, tol: float) -> dict:
    # reruns the quick suite twice in-process and compares the serialized reports
    a = render_report(run_suite(seed, "quick", tol, only=range(1, 13)), seed, "quick", tol)
    b = render_report(run_suite(seed, "quick", tol, only=range(1, 13)), seed, "quick", tol)
    return {"passed": a == b, "report_bytes": len(a.encode())}


CRITERIA: dict[int, Callable[[int, dict, float], dict]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11, 12: criterion_12,
    13: criterion_13,
}


def run_criterion(number: int, seed: int = 0, scale: str = "full", tol: float = 1.0) -> CriterionResult:
    """Run one criterion; ``tol`` multiplies every numerical tolerance."""
    t0 = time.perf_counter()
    out = dict(CRITERIA[number](seed, SCALES[scale], tol))
    passed = bool(out.pop("passed"))
    return CriterionResult(number, NAMES[number], passed, out, time.perf_counter() - t0)


def _run_packed(args) -> CriterionResult:
    return run_criterion(*args)


def run_suite(seed: int = 0, scale: str = "full", tol: float = 1.0, only=None,
              workers: int = 1) -> list[CriterionResult]:
    numbers = sorted(CRITERIA) if only is None else sorted(only)
    jobs = [(k, seed, scale, tol) for k in numbers]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_packed, jobs))
    return [_run_packed(j) for j in jobs]


def render_report(results: list[CriterionResult], seed: int, scale: str, tol: float) -> str:
    doc = {
        "version": __version__,
        "config": {"command": "selftest", "seed": seed, "scale": scale, "tol": tol},
        "passed": all(r.passed for r in results),
        "criteria": [r.record() for r in results],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
