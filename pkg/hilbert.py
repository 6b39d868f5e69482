"""
Truncated qutrit (x) Fock space.

Basis ordering is qubit-major and fixed for the whole package:
|q, m>  ->  index q * n_fock + m,   q in {g=0, e=1, f=2},   m in 0..n_fock-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from validation import NumericalIntegrityError, ParamValidationError, check_density_matrix

N_QUBIT = 3
LEVELS = ("g", "e", "f")


@dataclass(frozen=True)
class SpaceDims:
    n_fock: int
    n_qubit: int = N_QUBIT

    def __post_init__(self):
        if self.n_qubit != N_QUBIT:
            raise ParamValidationError("n_qubit == 3", f"n_qubit = {self.n_qubit}")
        if int(self.n_fock) != self.n_fock or self.n_fock < 2:
            raise ParamValidationError("n_fock >= 2", f"n_fock = {self.n_fock}")

    @property
    def dim(self) -> int:
        return self.n_qubit * self.n_fock

    def index(self, q: int | str, m: int) -> int:
        if isinstance(q, str):
            q = LEVELS.index(q)
        if not (0 <= q < self.n_qubit and 0 <= m < self.n_fock):
            raise IndexError(f"|{q},{m}> outside the truncated space")
        return q * self.n_fock + m


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    dims: SpaceDims
    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen(self.entries)
        if entries.shape != (self.dims.dim, self.dims.dim):
            raise ValueError(f"Operator shape {entries.shape} does not match dim {self.dims.dim}")
        object.__setattr__(self, 'entries', entries)

    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.dims, self.entries.conj().T)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.dims, self.entries @ other.entries)

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.dims, self.entries + other.entries)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.dims, self.entries - other.entries)

    def __mul__(self, scalar) -> "OperatorMatrix":
        return OperatorMatrix(self.dims, scalar * self.entries)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    dims: SpaceDims
    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen(self.entries)
        if entries.shape != (self.dims.dim, self.dims.dim):
            raise ValueError(f"Density matrix shape {entries.shape} does not match dim {self.dims.dim}")
        check_density_matrix(entries, hermitian_tol=1e-10, trace_tol=1e-10, min_eigenvalue=-1e-9)
        object.__setattr__(self, 'entries', entries)


@dataclass(frozen=True)
class Populations:
    levels: np.ndarray  # shape (3, n_fock), P(|q, m>)
    P_g: float
    P_e: float
    P_f: float
    n_mean: float

    @property
    def P_ground(self) -> float:
        return self.P_g


# ---- Operators ----

def identity(dims: SpaceDims) -> OperatorMatrix:
    return OperatorMatrix(dims, np.eye(dims.dim))


def annihilation_resonator(dims: SpaceDims) -> OperatorMatrix:
    """a (x) 1 on the Fock factor: <q, m-1| a |q, m> = sqrt(m)."""
    a = np.diag(np.sqrt(np.arange(1, dims.n_fock)), k=1)
    return OperatorMatrix(dims, np.kron(np.eye(N_QUBIT), a))


def lowering_qubit(dims: SpaceDims) -> OperatorMatrix:
    """Three-level ladder b: <g|b|e> = 1, <e|b|f> = sqrt(2)."""
    b = np.diag(np.sqrt(np.arange(1, N_QUBIT)), k=1)
    return OperatorMatrix(dims, np.kron(b, np.eye(dims.n_fock)))


def qubit_operator(dims: SpaceDims, q_matrix: np.ndarray) -> OperatorMatrix:
    """Embed a 3x3 qubit matrix as q_matrix (x) 1."""
    return OperatorMatrix(dims, np.kron(np.asarray(q_matrix, dtype=complex), np.eye(dims.n_fock)))


def transition(dims: SpaceDims, to: str, frm: str) -> OperatorMatrix:
    """|to><frm| on the qubit."""
    m = np.zeros((N_QUBIT, N_QUBIT), dtype=complex)
    m[LEVELS.index(to), LEVELS.index(frm)] = 1.0
    return qubit_operator(dims, m)


def projector(dims: SpaceDims, level: str) -> OperatorMatrix:
    return transition(dims, level, level)


# ---- States ----

def basis_state(dims: SpaceDims, q: int | str, m: int) -> DensityMatrix:
    rho = np.zeros((dims.dim, dims.dim), dtype=complex)
    i = dims.index(q, m)
    rho[i, i] = 1.0
    return DensityMatrix(dims, rho)


def thermal_state(dims: SpaceDims, P_e: float) -> DensityMatrix:
    """Diagonal qubit mixture (1-P_e, P_e, 0) with the resonator in vacuum."""
    if not 0.0 <= P_e < 0.5:
        raise ParamValidationError("0 <= P_e < 0.5", f"P_e = {P_e}")
    rho = np.zeros((dims.dim, dims.dim), dtype=complex)
    rho[dims.index("g", 0), dims.index("g", 0)] = 1.0 - P_e
    rho[dims.index("e", 0), dims.index("e", 0)] = P_e
    return DensityMatrix(dims, rho)


def maximally_mixed(dims: SpaceDims) -> DensityMatrix:
    return DensityMatrix(dims, np.eye(dims.dim) / dims.dim)


def populations_from_array(rho: np.ndarray, dims: SpaceDims, tol: float = 1e-10) -> Populations:
    """Level populations of a raw density-matrix array."""
    defect = float(np.max(np.abs(rho - rho.conj().T)))
    if defect > tol:
        raise NumericalIntegrityError(f"Density matrix not Hermitian: defect {defect:.3e}")
    diag = np.real(np.diag(rho)).reshape(N_QUBIT, dims.n_fock)
    total = float(diag.sum())
    if abs(total - 1.0) > 1e-9:
        raise NumericalIntegrityError(f"Populations sum to {total:.12f}")
    qubit = diag.sum(axis=1)
    photons = diag.sum(axis=0)
    return Populations(
        levels=diag,
        P_g=float(qubit[0]),
        P_e=float(qubit[1]),
        P_f=float(qubit[2]),
        n_mean=float(np.dot(np.arange(dims.n_fock), photons)),
    )


def populations(rho: DensityMatrix) -> Populations:
    return populations_from_array(rho.entries, rho.dims)
