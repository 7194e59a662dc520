"""Dense linear algebra on small quantum states.

Everything here works on plain ``numpy`` arrays; :class:`DensityOperator`
and :class:`PureState` are thin validated carriers used at API and file
boundaries. Matrix functions go through ``numpy.linalg.eigh`` with the
spectrum clamped at zero before any square root or logarithm.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal, Union

import numpy as np

from .errors import DimensionMismatch, InvalidState, NumericalFailure, ShapeMismatch


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-10
    psd: float = 1e-9
    trace: float = 1e-9
    support: float = 1e-9


DEFAULT_TOL = Tolerances()


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian PSD matrix with trace at most one.

    ``normalized`` is derived from the trace at construction time.
    """

    matrix: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        m = _readonly(self.matrix)
        validate_state(m, tol=self.tol)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    @property
    def normalized(self) -> bool:
        return abs(self.trace - 1.0) <= self.tol.trace

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    @classmethod
    def from_json(cls, obj: dict) -> "DensityOperator":
        return cls(matrix_from_json(obj))

    def to_json(self) -> dict:
        return matrix_to_json(self.matrix)


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        v = _readonly(np.ravel(self.amplitudes))
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise InvalidState(f"pure state has norm {np.linalg.norm(v):.3e}, expected 1")
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True)
class BipartiteShape:
    dimA: int
    dimB: int

    def __post_init__(self):
        if self.dimA < 1 or self.dimB < 1:
            raise ShapeMismatch(f"invalid factor dims {self.dimA}x{self.dimB}")

    @property
    def dim(self) -> int:
        return self.dimA * self.dimB

    def check(self, m: np.ndarray) -> None:
        if m.shape != (self.dim, self.dim):
            raise ShapeMismatch(f"operator of shape {m.shape} does not factor as {self.dimA}x{self.dimB}")


StateLike = Union[np.ndarray, DensityOperator, PureState]


def as_matrix(x: StateLike) -> np.ndarray:
    if isinstance(x, DensityOperator):
        return x.matrix
    if isinstance(x, PureState):
        return x.density()
    a = np.asarray(x, dtype=complex)
    if a.ndim == 1:
        return np.outer(a, a.conj())
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def validate_state(m: np.ndarray, normalized: bool = False, tol: Tolerances = DEFAULT_TOL) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidState(f"expected a square matrix, got shape {m.shape}")
    asym = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if asym > tol.herm:
        i, j = np.unravel_index(np.argmax(np.abs(m - m.conj().T)), m.shape)
        raise InvalidState(f"matrix not Hermitian at row {i}, col {j} (deviation {asym:.3e})")
    w = np.linalg.eigvalsh(hermitize(m))
    if w.size and w[0] < -tol.psd:
        raise InvalidState(f"matrix not PSD (smallest eigenvalue {w[0]:.3e})")
    tr = float(np.real(np.trace(m)))
    if tr < -tol.trace or tr > 1 + tol.trace:
        raise InvalidState(f"trace {tr:.12g} outside [0, 1]")
    if normalized and abs(tr - 1) > tol.trace:
        raise InvalidState(f"trace {tr:.12g}, expected a normalized state")


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def eigh_clamped(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(hermitize(m))
    return np.clip(w, 0.0, None), v


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = eigh_clamped(m)
    return (v * np.sqrt(w)) @ v.conj().T


def psd_power(m: np.ndarray, power: float, cutoff: float = 0.0) -> np.ndarray:
    """``m**power`` on the eigenvalues above ``cutoff``; zero elsewhere."""
    w, v = eigh_clamped(m)
    keep = w > cutoff
    wp = np.zeros_like(w)
    wp[keep] = w[keep] ** power
    return (v * wp) @ v.conj().T


def support_projector(m: np.ndarray, cutoff: float = DEFAULT_TOL.support) -> np.ndarray:
    w, v = eigh_clamped(m)
    vs = v[:, w > cutoff]
    return vs @ vs.conj().T


def positive_part(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hermitize(m))
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec: Iterable[complex]) -> np.ndarray:
    v = np.asarray(vec, dtype=complex)
    return np.outer(v, v.conj())


def maximally_mixed(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


def _trace_deficit(m: np.ndarray, tol: float) -> float:
    d = 1.0 - float(np.real(np.trace(m)))
    return 0.0 if abs(d) <= tol else max(d, 0.0)


def root_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``Tr sqrt(sqrt(rho) sigma sqrt(rho))`` as the trace norm of ``sqrt(rho) sqrt(sigma)``."""
    s = np.linalg.svd(psd_sqrt(rho) @ psd_sqrt(sigma), compute_uv=False)
    return float(np.sum(s))


def fidelity(rho: StateLike, sigma: StateLike, tol: Tolerances = DEFAULT_TOL) -> float:
    """Generalized fidelity for subnormalized operators.

    The trace-deficit term only contributes when neither argument is
    normalized within ``tol.trace``.
    """
    r, s = as_matrix(rho), as_matrix(sigma)
    if r.shape != s.shape:
        raise DimensionMismatch(f"fidelity of {r.shape} and {s.shape} operators")
    validate_state(r, tol=tol)
    validate_state(s, tol=tol)
    f = root_fidelity(r, s)
    f += np.sqrt(_trace_deficit(r, tol.trace) * _trace_deficit(s, tol.trace))
    return float(f)


def purified_distance(rho: StateLike, sigma: StateLike, tol: Tolerances = DEFAULT_TOL) -> float:
    f = fidelity(rho, sigma, tol=tol)
    rad = 1.0 - f * f
    if rad < -1e-12:
        # fidelity above one beyond rounding; inputs passed validation so this is numerical
        raise NumericalFailure(f"fidelity {f!r} exceeds 1")
    return float(np.sqrt(min(max(rad, 0.0), 1.0)))


def fidelity_pure(psi: np.ndarray, sigma: np.ndarray) -> float:
    """Root fidelity between ``|psi><psi|`` and ``sigma``: ``sqrt(<psi|sigma|psi>)``."""
    v = np.asarray(psi, dtype=complex)
    return float(np.sqrt(max(np.real(v.conj() @ as_matrix(sigma) @ v), 0.0)))


def partial_trace(rho: StateLike, shape: BipartiteShape, side: Literal["A", "B"] = "B") -> np.ndarray:
    """Trace out ``side`` and return the reduced operator on the other factor."""
    m = as_matrix(rho)
    shape.check(m)
    t = m.reshape(shape.dimA, shape.dimB, shape.dimA, shape.dimB)
    if side == "B":
        return np.einsum("ajbj->ab", t)
    if side == "A":
        return np.einsum("iaib->ab", t)
    raise ValueError(f"side must be 'A' or 'B', got {side!r}")


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def purify(rho: StateLike) -> PureState:
    """Spectral purification ``sum_i sqrt(l_i) |e_i>|i>`` (system first, ancilla second)."""
    m = as_matrix(rho)
    validate_state(m, normalized=True)
    w, v = eigh_clamped(m)
    w = w / w.sum()
    d = m.shape[0]
    psi = np.zeros((d, d), dtype=complex)
    for i in range(d):
        psi[:, i] = np.sqrt(w[i]) * v[:, i]
    return PureState(psi.reshape(-1))


def purification_matrix(rho: np.ndarray) -> np.ndarray:
    """Matrix ``M`` (system x ancilla) with ``M M^dag = rho``; unnormalized input allowed."""
    w, v = eigh_clamped(rho)
    return v * np.sqrt(w)


def uhlmann_extension(rho_AB: StateLike, shape: BipartiteShape, rho_prime_A: StateLike) -> np.ndarray:
    """Extension of ``rho_prime_A`` with the same fidelity to ``rho_AB`` as the marginals have.

    Purify ``rho_AB`` on ``A(BR)`` and ``rho_prime_A`` on ``AA'``; the
    isometry ``A' -> BR`` that maximizes the overlap comes from the SVD of
    the overlap matrix, and the extension is the ``R``-marginal of the
    rotated purification.
    """
    m = as_matrix(rho_AB)
    shape.check(m)
    validate_state(m, normalized=True)
    rp = as_matrix(rho_prime_A)
    if rp.shape != (shape.dimA, shape.dimA):
        raise DimensionMismatch(f"marginal of shape {rp.shape} does not match dimA={shape.dimA}")
    validate_state(rp)
    dA, dB = shape.dimA, shape.dimB
    # |v> as a dA x (dB*dR) matrix
    pv = purification_matrix(m)  # (dA dB) x dR
    dR = pv.shape[1]
    Mv = pv.reshape(dA, dB * dR)
    Mp = purification_matrix(rp)  # dA x dA
    G = Mv.conj().T @ Mp  # (dB dR) x dA
    try:
        U, _, Vh = np.linalg.svd(G, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalFailure("SVD of the purification overlap did not converge") from exc
    V = Vh.conj().T @ U.conj().T  # dA x (dB dR), rows orthonormal
    Mnew = (Mp @ V).reshape(dA * dB, dR)
    return hermitize(Mnew @ Mnew.conj().T)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_isometry(dim_in: int, dim_out: int, rng: np.random.Generator) -> np.ndarray:
    return random_unitary(dim_out, rng)[:, :dim_in]


def apply_isometry_channel(rho: np.ndarray, V: np.ndarray, dim_out: int) -> np.ndarray:
    """``Tr_env(V rho V^dag)`` with ``V`` mapping into ``out (x) env``."""
    big = V @ rho @ V.conj().T
    env = big.shape[0] // dim_out
    return partial_trace(big, BipartiteShape(dim_out, env), "B")


def matrix_from_json(obj: dict) -> np.ndarray:
    """Parse the ``{"re": [[...]], "im": [[...]]}`` literal; ``im`` may be omitted."""
    if not isinstance(obj, dict) or "re" not in obj:
        raise ValueError('matrix literal must be an object with key "re"')
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    if re.shape != im.shape or re.ndim != 2:
        raise ValueError(f"re/im shapes {re.shape} and {im.shape} differ or are not 2-D")
    return re + 1j * im


def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}
