"""``oneshot-rsp``: command-line front end.

Exit codes: 0 success, 1 a checked assertion failed, 2 bad configuration
or input, 3 a solver failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    DimensionMismatch,
    InvalidConfig,
    InvalidEps,
    InvalidState,
    NonConvergence,
    NumericalFailure,
    OneShotError,
    ParseError,
    SolverFailure,
)

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
MAX_PAIRS = 6

log = logging.getLogger("oneshot_rsp")


@dataclass
class RunConfig:
    command: str
    ensemble: str | None = None
    epsilon: float | None = None
    delta: float | None = None
    nu: float | None = None
    seed: int = 0
    tol: float | None = None
    out: str | None = None
    format: str = "json"
    workers: int = 1

    def validate(self) -> None:
        if self.epsilon is not None and not (0.0 <= self.epsilon <= 1.0):
            raise InvalidConfig(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.nu is not None and not (0.0 <= self.nu <= 1.0):
            raise InvalidConfig(f"nu must lie in [0, 1], got {self.nu}")
        if self.delta is not None:
            eps = self.epsilon or 0.0
            if not (0.0 < self.delta < 1.0 - eps**2):
                raise InvalidConfig(f"delta must lie in (0, 1 - epsilon^2), got {self.delta}")
        if not (0 <= self.seed < 2**64):
            raise InvalidConfig("seed must be a 64-bit unsigned integer")
        if self.tol is not None and self.tol <= 0:
            raise InvalidConfig("tol must be positive")
        if self.workers < 1:
            raise InvalidConfig("workers must be positive")
        if self.format not in ("json", "csv"):
            raise InvalidConfig(f"unknown format {self.format!r}")

    def need(self, name: str):
        value = getattr(self, name)
        if value is None:
            raise InvalidConfig(f"--{name} is required for '{self.command}'")
        return value


# ---------------------------------------------------------------------------
# serialization


def jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf``, ``nan``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _csv_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def render(report: dict, rows: list[tuple[str, float]], cfg: RunConfig) -> str:
    if cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "value", "epsilon"])
        eps = "" if cfg.epsilon is None else _csv_value(cfg.epsilon)
        for name, value in rows:
            w.writerow([name, _csv_value(value), eps])
        return buf.getvalue()
    doc = {"version": __version__, "config": asdict(cfg), **report}
    return json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n"


def emit(text: str, cfg: RunConfig) -> None:
    if cfg.out is None:
        sys.stdout.write(text)
        return
    try:
        Path(cfg.out).write_text(text)
    except OSError as exc:
        raise InvalidConfig(f"cannot write {cfg.out}: {exc}") from None


def _scalar_rows(d: dict, prefix: str = "") -> list[tuple[str, float]]:
    rows = []
    for k, v in d.items():
        name = f"{prefix}{k}"
        if isinstance(v, (bool, int, float, np.integer, np.floating)) and not isinstance(v, str):
            rows.append((name, v))
        elif isinstance(v, dict):
            rows.extend(_scalar_rows(v, name + "."))
    return rows


def _load_ensemble(cfg: RunConfig):
    from .ensemble import Ensemble

    path = cfg.need("ensemble")
    if not Path(path).is_file():
        raise InvalidConfig(f"ensemble file {path} is not readable")
    return Ensemble.load(path)


# ---------------------------------------------------------------------------
# commands


def cmd_entropy(cfg: RunConfig, args) -> int:
    from .divergences import d_max, d_obs, holevo, i_max, mutual_information, t_of_q, von_neumann
    from .hypothesis import beta_eps, d_h
    from .smoothing import min_max_radius, smooth_d_max, smooth_i_max_cq

    ens = _load_ensemble(cfg)
    if ens.weights is None:
        ens = ens.uniform()
    eps = cfg.epsilon if cfg.epsilon is not None else 0.1
    rows: list[tuple[str, float]] = []
    for x, s in enumerate(ens.states):
        rows.append((f"entropy[{x}]", von_neumann(s)))
    cq = ens.cq_state()
    rows.append(("holevo", holevo(ens)))
    rows.append(("mutual_information", mutual_information(cq.matrix(), cq.shape)))
    rows.append(("capacity", t_of_q(ens).value))
    rows.append(("i_max", i_max(ens)))
    rows.append(("smooth_i_max", smooth_i_max_cq(ens, eps).value))
    rows.append(("min_max_radius", min_max_radius(ens, eps)))
    pairs = list(itertools.permutations(range(len(ens)), 2))[:MAX_PAIRS]
    test_eps = min(eps, 0.999)
    for i, j in pairs:
        r, s = ens.states[i], ens.states[j]
        tag = f"[{i},{j}]"
        rows.append((f"d_max{tag}", d_max(r, s)))
        rows.append((f"smooth_d_max{tag}", smooth_d_max(r, s, eps)))
        rows.append((f"d_obs{tag}", d_obs(r, s)))
        rows.append((f"beta{tag}", beta_eps(r, s, test_eps)[0]))
        rows.append((f"d_h{tag}", d_h(r, s, test_eps)))
    report = {"quantities": {k: v for k, v in rows}}
    emit(render(report, rows, cfg), cfg)
    return EXIT_OK


def cmd_bounds(cfg: RunConfig, args) -> int:
    from .rsp import average_case_bracket, worst_case_bracket

    ens = _load_ensemble(cfg)
    if ens.weights is None:
        ens = ens.uniform()
    eps = cfg.need("epsilon")
    if eps <= 0:
        raise InvalidConfig("bounds need epsilon > 0")
    delta = cfg.delta if cfg.delta is not None else (1 - eps**2) / 2
    tol = cfg.tol if cfg.tol is not None else 1e-3
    reports = {"average_case": average_case_bracket(ens, eps, tol=tol),
               "worst_case": worst_case_bracket(ens, eps, delta, tol=tol)}
    if args.corrupt_upper:
        # failure-path hook: push the upper bound below the achieved cost
        for rep in reports.values():
            rep.upper_bits = rep.achieved_bits - 1.0
            rep.checks["achieved<=upper"] = rep.achieved_bits <= rep.upper_bits + tol
    ok = all(r.ok for r in reports.values())
    rows = []
    for key, rep in reports.items():
        for name, value, _ in rep.csv_rows():
            rows.append((f"{key}.{name}", value))
    emit(render({"reports": {k: r.to_json() for k, r in reports.items()}, "ok": ok}, rows, cfg), cfg)
    return EXIT_OK if ok else EXIT_ASSERT


def cmd_locc(cfg: RunConfig, args) -> int:
    from .locc import LoccProtocol, baseline_protocol, check_bound, fuzz_bound, run_sampled

    if args.protocol:
        proto = LoccProtocol.load(args.protocol)
    elif args.baseline:
        n, p = args.baseline
        if n != int(n) or n < 1:
            raise InvalidConfig("baseline needs an integer n >= 1")
        proto = baseline_protocol(int(n), p)
    else:
        proto = None
    report: dict = {}
    ok = True
    if proto is not None:
        rec = check_bound(proto)
        report["bound"] = asdict(rec)
        report["protocol"] = {"n": proto.n, "ebits": proto.ebits, "rounds": len(proto.rounds)}
        ok = ok and rec.holds
        if args.trials:
            run = run_sampled(proto, args.trials, cfg.seed)
            report["sampled"] = {"trials": run.trials, "p_hat": run.p_hat}
    if args.fuzz:
        recs = fuzz_bound(args.fuzz, cfg.seed)
        report["fuzz"] = {"count": len(recs), "min_slack": min(r.slack for r in recs),
                          "two_way": sum(r.m_b > 0 for r in recs), "envelope": "n<=4, ebits<=3, rounds<=4"}
        ok = ok and all(r.holds for r in recs)
    if not report:
        raise InvalidConfig("locc needs --protocol, --baseline or --fuzz")
    report["ok"] = ok
    emit(render(report, _scalar_rows(report), cfg), cfg)
    return EXIT_OK if ok else EXIT_ASSERT


def cmd_jrs(cfg: RunConfig, args) -> int:
    from .rsp import avg_case_protocol, simulate_jrs_sampled, worst_case_protocol

    ens = _load_ensemble(cfg)
    eps = cfg.need("epsilon")
    if eps <= 0:
        raise InvalidConfig("jrs needs epsilon > 0")
    if args.mode == "average":
        if ens.weights is None:
            ens = ens.uniform()
        run = avg_case_protocol(ens, eps)
    else:
        run = worst_case_protocol(ens, eps)
    report = {"mode": args.mode, "cost_bits": run.cost_bits, "lambda": run.lam, "t": run.t,
              "smoothing_value": run.smoothing_value, "error_ok": run.error_ok,
              "outcome": run.outcome.summary()}
    if args.trials:
        weights = ens.weights if args.mode == "average" else None
        samp = simulate_jrs_sampled(run.instance, args.trials, cfg.seed, reference=ens.states, weights=weights)
        report["sampled"] = {"trials": args.trials, "achieved_error": samp.achieved_error,
                             "fail_fraction": samp.fail_fraction}
    emit(render(report, _scalar_rows(report), cfg), cfg)
    return EXIT_OK if run.error_ok else EXIT_ASSERT


def cmd_net(cfg: RunConfig, args) -> int:
    from .nets import build_net, coverage_radius, transfer_brackets

    ens = _load_ensemble(cfg)
    nu = cfg.need("nu")
    net = build_net(ens, nu, order=args.order)
    report = {"net": net.to_json(), "net_size": len(net), "coverage_radius": coverage_radius(ens, net)}
    ok = True
    if cfg.epsilon:
        recs = {d: transfer_brackets(ens, cfg.epsilon, nu, d) for d in ("AverageCase", "WorstCase")}
        report["transfer"] = {d: r.to_json() for d, r in recs.items()}
        ok = all(r.ok for r in recs.values())
    report["ok"] = ok
    emit(render(report, _scalar_rows(report), cfg), cfg)
    return EXIT_OK if ok else EXIT_ASSERT


def cmd_gap(cfg: RunConfig, args) -> int:
    from .rsp import gap_demo

    eps = cfg.epsilon if cfg.epsilon is not None else 0.5
    if not (0.0 <= eps < 1 / math.sqrt(2)):
        raise InvalidConfig("gap needs epsilon in [0, 1/sqrt 2)")
    rec = gap_demo(args.n_bits, eps, reduction_n=args.reduction_n or None)
    report = asdict(rec)
    ok = all(rec.checks.values())
    emit(render(report, _scalar_rows(report), cfg), cfg)
    return EXIT_OK if ok else EXIT_ASSERT


def cmd_selftest(cfg: RunConfig, args) -> int:
    from .acceptance import render_report, run_suite

    tol = cfg.tol if cfg.tol is not None else 1.0
    results = run_suite(cfg.seed, args.scale, tol, workers=cfg.workers)
    for r in results:
        print(r.line(), file=sys.stderr)
    text = render_report(results, cfg.seed, args.scale, tol)
    emit(text, cfg)
    failed = [r for r in results if not r.passed]
    if failed:
        print("failed: " + ", ".join(f"{r.number} ({r.name})" for r in failed), file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


COMMANDS = {"entropy": cmd_entropy, "bounds": cmd_bounds, "locc": cmd_locc, "jrs": cmd_jrs,
            "net": cmd_net, "gap": cmd_gap, "selftest": cmd_selftest}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--ensemble", metavar="PATH", help="ensemble JSON file")
    common.add_argument("--epsilon", type=float, metavar="F")
    common.add_argument("--delta", type=float, metavar="F")
    common.add_argument("--nu", type=float, metavar="F")
    common.add_argument("--seed", type=int, default=0, metavar="N")
    common.add_argument("--tol", type=float, metavar="F", help="tolerance override (selftest: multiplier)")
    common.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--workers", type=int, default=1, metavar="N")

    p = argparse.ArgumentParser(prog="oneshot-rsp", description="One-shot remote state preparation toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("entropy", parents=[common], help="entropies and divergences of an ensemble")
    b = sub.add_parser("bounds", parents=[common], help="average- and worst-case cost brackets")
    b.add_argument("--corrupt-upper", action="store_true", help=argparse.SUPPRESS)
    lo = sub.add_parser("locc", parents=[common], help="bit-transmission bound for LOCC protocols")
    lo.add_argument("--protocol", metavar="PATH", help="protocol description JSON")
    lo.add_argument("--baseline", nargs=2, type=float, metavar=("N", "P"), help="classical baseline protocol")
    lo.add_argument("--fuzz", type=int, metavar="COUNT", help="check the bound on random protocols")
    lo.add_argument("--trials", type=int, default=0, help="also run a sampled simulation")
    j = sub.add_parser("jrs", parents=[common], help="run the rejection-sampling protocol")
    j.add_argument("--mode", choices=("average", "worst"), default="average")
    j.add_argument("--trials", type=int, default=0, help="also run a sampled simulation")
    n = sub.add_parser("net", parents=[common], help="greedy nu-net and transfer brackets")
    n.add_argument("--order", choices=("index", "label"), default="index")
    g = sub.add_parser("gap", parents=[common], help="worst-case versus average-case gap")
    g.add_argument("--n-bits", type=int, default=10)
    g.add_argument("--reduction-n", type=int, default=3, help="size of the simulated reduction (0 skips it)")
    s = sub.add_parser("selftest", parents=[common], help="run the acceptance suite")
    s.add_argument("--scale", choices=("full", "quick"), default="full")
    return p


def _configure_logging() -> None:
    level = os.environ.get("ONESHOT_RSP_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    cfg = RunConfig(args.command, args.ensemble, args.epsilon, args.delta, args.nu, args.seed, args.tol,
                    args.out, args.format, args.workers)
    try:
        cfg.validate()
        return COMMANDS[args.command](cfg, args)
    except (ParseError, InvalidConfig, InvalidEps, InvalidState, DimensionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverFailure, NonConvergence, NumericalFailure) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OneShotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())
