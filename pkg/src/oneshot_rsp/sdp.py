"""Small dense semidefinite programs over Hermitian blocks.

Each complex ``d x d`` block ``X`` is carried as a real symmetric
``2d x 2d`` block ``Y`` through the embedding ``[[Re, -Im], [Im, Re]]``;
``Re Tr(A X) = Tr(emb(A) Y) / 2`` and ``X`` is recovered by averaging the
two copies, which keeps it PSD. The resulting real conic program is
handed to Clarabel.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import clarabel
import numpy as np
from scipy import sparse

from .errors import SolverFailure
from .operators import hermitize

log = logging.getLogger(__name__)

Sense = Literal["==", "<=", ">="]


@dataclass
class Block:
    dim: int
    real: bool = False

    @property
    def width(self) -> int:
        """Side length of the real symmetric matrix that stores the block."""
        return self.dim if self.real else 2 * self.dim

    @property
    def nvars(self) -> int:
        w = self.width
        return w * (w + 1) // 2


@dataclass
class ScalarConstraint:
    coeffs: dict[int, np.ndarray]
    sense: Sense
    rhs: float


@dataclass
class SdpProblem:
    """``minimize (or maximize) sum_b <C_b, X_b>`` over PSD blocks subject to scalar constraints.

    Every constraint reads ``sum_b Re Tr(A_b X_b) (sense) rhs``.
    """

    blocks: list[Block] = field(default_factory=list)
    objective: dict[int, np.ndarray] = field(default_factory=dict)
    constraints: list[ScalarConstraint] = field(default_factory=list)
    maximize: bool = False
    tol: float = 1e-7

    def validate(self) -> None:
        for c in [self.objective, *(k.coeffs for k in self.constraints)]:
            for b, m in c.items():
                d = self.blocks[b].dim
                if m.shape != (d, d):
                    raise ValueError(f"coefficient of shape {m.shape} on block {b} of dim {d}")
                if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-10:
                    raise ValueError(f"coefficient on block {b} is not Hermitian")


@dataclass
class SdpSolution:
    status: Literal["Optimal", "Infeasible", "MaxIter"]
    primal_value: float
    dual_value: float
    blocks: list[np.ndarray]
    dual_blocks: list[np.ndarray] = field(default_factory=list)
    iterations: int = 0
    solve_time: float = 0.0
    raw_status: str = ""

    @property
    def gap(self) -> float:
        return abs(self.primal_value - self.dual_value)


def _svec_index(width: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/col of each svec entry: upper triangle, column-major."""
    rows, cols = [], []
    for j in range(width):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
    return np.array(rows), np.array(cols)


def _svec(m: np.ndarray, idx) -> np.ndarray:
    r, c = idx
    scale = np.where(r == c, 1.0, np.sqrt(2.0))
    return m[r, c] * scale


def _smat(v: np.ndarray, width: int, idx) -> np.ndarray:
    r, c = idx
    scale = np.where(r == c, 1.0, 1.0 / np.sqrt(2.0))
    m = np.zeros((width, width))
    m[r, c] = v * scale
    m[c, r] = v * scale
    return m


def _embed(a: np.ndarray) -> np.ndarray:
    re, im = np.real(a), np.imag(a)
    return np.block([[re, -im], [im, re]])


def _functional(block: Block, coeff: np.ndarray, idx) -> np.ndarray:
    """Vector ``g`` with ``g . y == Re Tr(coeff X)`` for the stored block ``y``."""
    if block.real:
        return _svec(np.real(hermitize(coeff)), idx)
    return 0.5 * _svec(_embed(hermitize(coeff)), idx)


def _recover(block: Block, y: np.ndarray, idx) -> np.ndarray:
    Y = _smat(y, block.width, idx)
    if block.real:
        return Y.astype(complex)
    d = block.dim
    return 0.5 * (Y[:d, :d] + Y[d:, d:]) + 0.5j * (Y[d:, :d] - Y[:d, d:])


def solve_sdp(problem: SdpProblem, max_iter: int = 200) -> SdpSolution:
    problem.validate()
    blocks = problem.blocks
    offsets = np.cumsum([0] + [b.nvars for b in blocks])
    n = int(offsets[-1])
    idx = {w: _svec_index(w) for w in {b.width for b in blocks}}

    def row(coeffs: dict[int, np.ndarray]) -> np.ndarray:
        g = np.zeros(n)
        for b, m in coeffs.items():
            blk = blocks[b]
            g[offsets[b]:offsets[b + 1]] += _functional(blk, m, idx[blk.width])
        return g

    sign = -1.0 if problem.maximize else 1.0
    q = sign * row(problem.objective)

    eq = [c for c in problem.constraints if c.sense == "=="]
    ineq = [c for c in problem.constraints if c.sense != "=="]
    A_rows, b_vals = [], []
    for c in eq:
        A_rows.append(row(c.coeffs))
        b_vals.append(c.rhs)
    for c in ineq:
        # clarabel wants a.x + s = b with s >= 0, i.e. a.x <= b
        s = 1.0 if c.sense == "<=" else -1.0
        A_rows.append(s * row(c.coeffs))
        b_vals.append(s * c.rhs)
    A_lin = np.array(A_rows).reshape(len(A_rows), n)

    cones = []
    if eq:
        cones.append(clarabel.ZeroConeT(len(eq)))
    if ineq:
        cones.append(clarabel.NonnegativeConeT(len(ineq)))
    for blk in blocks:
        if blk.width == 1:
            cones.append(clarabel.NonnegativeConeT(1))
        else:
            cones.append(clarabel.PSDTriangleConeT(blk.width))

    A = sparse.vstack([sparse.csc_matrix(A_lin), -sparse.identity(n, format="csc")], format="csc")
    b = np.concatenate([np.array(b_vals, dtype=float), np.zeros(n)])
    P = sparse.csc_matrix((n, n))

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = 1e-9
    settings.tol_gap_rel = 1e-9
    settings.tol_feas = 1e-9
    settings.tol_ktratio = 1e-7
    solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
    res = solver.solve()
    raw = str(res.status)
    y = np.asarray(res.x)
    mats = [_recover(blk, y[offsets[i]:offsets[i + 1]], idx[blk.width]) for i, blk in enumerate(blocks)]
    z = np.asarray(res.z)[len(b_vals):]
    # the embedded dual is emb(W)/2 for a complex block's Hermitian multiplier W
    duals = [(1.0 if blk.real else 2.0) * _recover(blk, z[offsets[i]:offsets[i + 1]], idx[blk.width])
             for i, blk in enumerate(blocks)]
    pv, dv = sign * res.obj_val, sign * res.obj_val_dual
    log.debug("clarabel %s after %d iterations, primal %.12g dual %.12g", raw, res.iterations, pv, dv)

    if raw in ("Solved",):
        status = "Optimal"
    elif raw == "AlmostSolved" and abs(pv - dv) <= max(problem.tol, 1e-6 * max(1.0, abs(pv))):
        status = "Optimal"
    elif "PrimalInfeasible" in raw:
        status = "Infeasible"
    elif raw in ("MaxIterations", "MaxTime", "AlmostSolved", "InsufficientProgress",
                 "NumericalError"):
        status = "MaxIter"
    else:
        raise SolverFailure(f"solver returned status {raw}")
    return SdpSolution(status, pv, dv, mats, duals, res.iterations, res.solve_time, raw)


class LinearMap:
    """Hermiticity-preserving map given by a callable and its adjoint."""

    def __init__(self, apply: Callable[[np.ndarray], np.ndarray], adjoint: Callable[[np.ndarray], np.ndarray]):
        self.apply = apply
        self.adjoint = adjoint

    @classmethod
    def kraus(cls, ops: Sequence[np.ndarray], coeff: float = 1.0) -> "LinearMap":
        ops = [np.asarray(k, dtype=complex) for k in ops]
        return cls(
            lambda X: coeff * sum(k @ X @ k.conj().T for k in ops),
            lambda H: coeff * sum(k.conj().T @ H @ k for k in ops),
        )

    @classmethod
    def identity(cls, coeff: float = 1.0) -> "LinearMap":
        return cls(lambda X: coeff * X, lambda H: coeff * H)

    @classmethod
    def scalar_times(cls, m: np.ndarray) -> "LinearMap":
        """``[[mu]] -> mu * m`` for a 1x1 block."""
        m = np.asarray(m, dtype=complex)
        return cls(lambda X: X[0, 0] * m, lambda H: np.array([[np.real(np.trace(H @ m))]], dtype=complex))


def hermitian_basis(d: int) -> list[np.ndarray]:
    basis = []
    for j in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[j, j] = 1.0
        basis.append(e)
    for j in range(d):
        for k in range(j + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[j, k] = e[k, j] = 1.0
            basis.append(e)
            f = np.zeros((d, d), dtype=complex)
            f[j, k], f[k, j] = 1j, -1j
            basis.append(f)
    return basis


def select(dim_total: int, start: int, size: int) -> np.ndarray:
    """Kraus operator that picks the diagonal sub-block ``[start, start+size)``."""
    k = np.zeros((size, dim_total), dtype=complex)
    k[np.arange(size), start + np.arange(size)] = 1.0
    return k


def offdiag_functional(d: int) -> np.ndarray:
    """Coefficient ``C`` on a ``2d`` block with ``Re Tr(C Z) = Re Tr(Z_12)``."""
    c = np.zeros((2 * d, 2 * d), dtype=complex)
    c[:d, d:] = 0.5 * np.eye(d)
    c[d:, :d] = 0.5 * np.eye(d)
    return c


class SdpBuilder:
    """Incremental construction of an :class:`SdpProblem` with matrix constraints."""

    def __init__(self, tol: float = 1e-7):
        self.problem = SdpProblem(tol=tol)

    def block(self, dim: int, real: bool = False) -> int:
        self.problem.blocks.append(Block(dim, real))
        return len(self.problem.blocks) - 1

    def scalar(self) -> int:
        """Nonnegative scalar variable as a real 1x1 block."""
        return self.block(1, real=True)

    def dim(self, b: int) -> int:
        return self.problem.blocks[b].dim

    def add_objective(self, b: int, coeff: np.ndarray) -> None:
        prev = self.problem.objective.get(b)
        self.problem.objective[b] = coeff if prev is None else prev + coeff

    def scalar_constraint(self, coeffs: dict[int, np.ndarray], sense: Sense, rhs: float) -> None:
        merged: dict[int, np.ndarray] = {}
        for b, m in coeffs.items():
            merged[b] = np.asarray(m, dtype=complex)
        self.problem.constraints.append(ScalarConstraint(merged, sense, float(rhs)))

    def matrix_constraint(self, terms: Sequence[tuple[int, LinearMap]], sense: Sense, rhs: np.ndarray) -> int | None:
        """``sum_i map_i(X_{b_i}) (sense) rhs`` in the PSD order; returns the slack block for inequalities."""
        rhs = np.asarray(rhs, dtype=complex)
        d = rhs.shape[0]
        terms = list(terms)
        slack = None
        if sense != "==":
            slack = self.block(d)
            # lhs - rhs = S (>=) or rhs - lhs = S (<=)
            coeff = -1.0 if sense == ">=" else 1.0
            terms.append((slack, LinearMap.identity(coeff)))
        for h in hermitian_basis(d):
            coeffs: dict[int, np.ndarray] = {}
            for b, lm in terms:
                a = hermitize(lm.adjoint(h))
                coeffs[b] = coeffs[b] + a if b in coeffs else a
            self.problem.constraints.append(ScalarConstraint(coeffs, "==", float(np.real(np.trace(h @ rhs)))))
        return slack

    def solve(self, maximize: bool = False, max_iter: int = 200) -> SdpSolution:
        self.problem.maximize = maximize
        return solve_sdp(self.problem, max_iter=max_iter)


def require_optimal(sol: SdpSolution, what: str) -> SdpSolution:
    if sol.status != "Optimal":
        raise SolverFailure(f"{what}: solver status {sol.status} ({sol.raw_status})")
    return sol


def fidelity_sdp(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Root fidelity as ``max Re Tr X`` over ``[[rho, X], [X^dag, sigma]] >= 0``."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    d = rho.shape[0]
    bld = SdpBuilder()
    z = bld.block(2 * d)
    bld.matrix_constraint([(z, LinearMap.kraus([select(2 * d, 0, d)]))], "==", rho)
    bld.matrix_constraint([(z, LinearMap.kraus([select(2 * d, d, d)]))], "==", sigma)
    bld.add_objective(z, offdiag_functional(d))
    sol = require_optimal(bld.solve(maximize=True), "fidelity SDP")
    return float(sol.primal_value)
