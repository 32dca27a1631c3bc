"""
algebra.py - Two-qubit operators, states and density-matrix checks.

Everything lives in the ordered basis {|00>, |01>, |10>, |11>} and uses
hbar = 1. Superoperators act on column-stacked density matrices.

Usage:
    from dmme.algebra import pauli, system_hamiltonian, fidelity, bell_target
    H = system_hamiltonian(f=-22.2, J=10.6)
    F = fidelity(rho, bell_target())
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Tuple, Union

import numpy as np

from .errors import DomainError

logger = logging.getLogger(__name__)

# =============================================================================
# CONFIGURATION
# =============================================================================

DIM = 4
BASIS_LABELS = ("00", "01", "10", "11")
NORM_TOL = 1e-10

_SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
IDENTITY2 = np.eye(2, dtype=complex)
IDENTITY4 = np.eye(DIM, dtype=complex)


class Picture(str, Enum):
    SCHROEDINGER = "schroedinger"
    INTERACTION = "interaction"

    def flipped(self) -> "Picture":
        if self is Picture.SCHROEDINGER:
            return Picture.INTERACTION
        return Picture.SCHROEDINGER


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A 4x4 density matrix tagged with the picture it lives in."""
    entries: np.ndarray
    picture: Picture = Picture.SCHROEDINGER


@dataclass(frozen=True)
class DensityDiagnostics:
    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float

    def within(self, trace_tol: float = 1e-8, eig_tol: float = 1e-8, herm_tol: float = 1e-10) -> bool:
        return (self.hermiticity_defect <= herm_tol
                and abs(self.trace_defect) <= trace_tol
                and self.min_eigenvalue >= -eig_tol)


# =============================================================================
# OPERATORS AND STATES
# =============================================================================

def pauli(axis: str, site: int) -> np.ndarray:
    """Embed sigma_axis on qubit `site` (1 = left factor, 2 = right factor)."""
    if axis not in _SIGMA:
        raise DomainError(f"Invalid Pauli axis: {axis!r}")
    if site == 1:
        return np.kron(_SIGMA[axis], IDENTITY2)
    if site == 2:
        return np.kron(IDENTITY2, _SIGMA[axis])
    raise DomainError(f"Invalid qubit site: {site!r}")


@lru_cache(maxsize=1)
def _generators() -> Tuple[Tuple[np.ndarray, ...], Tuple[np.ndarray, ...]]:
    # outer su(2) acts on {|00>, |11>}, inner su(2) on {|01>, |10>}
    s11 = np.diag([1, 0, 0, -1]).astype(complex)
    s21 = np.zeros((DIM, DIM), dtype=complex)
    s21[0, 3], s21[3, 0] = 1j, -1j
    s31 = np.zeros((DIM, DIM), dtype=complex)
    s31[0, 3] = s31[3, 0] = 1.0

    s12 = np.zeros((DIM, DIM), dtype=complex)
    s12[1, 2] = s12[2, 1] = 1.0
    s22 = np.diag([0, 1, -1, 0]).astype(complex)
    s32 = np.zeros((DIM, DIM), dtype=complex)
    s32[1, 2], s32[2, 1] = 1j, -1j
    return (s11, s21, s31), (s12, s22, s32)


def sigma_generators() -> Tuple[Tuple[np.ndarray, ...], Tuple[np.ndarray, ...]]:
    """Return the two mutually commuting su(2) triples (Sigma^(1), Sigma^(2))."""
    first, second = _generators()
    return tuple(m.copy() for m in first), tuple(m.copy() for m in second)


_XX = pauli("x", 1) @ pauli("x", 2)
_ZSUM = pauli("z", 1) + pauli("z", 2)


def system_hamiltonian(f: float, J: float) -> np.ndarray:
    """H = pi J sx1 sx2 + f (sz1 + sz2)."""
    return np.pi * J * _XX + f * _ZSUM


_A = pauli("x", 1) + pauli("x", 2)


def coupling_operator() -> np.ndarray:
    """Collective system operator A = sx1 + sx2 coupled to the reservoir."""
    return _A.copy()


def basis_state(label: str) -> np.ndarray:
    if label not in BASIS_LABELS:
        raise DomainError(f"Invalid basis label: {label!r}")
    psi = np.zeros(DIM, dtype=complex)
    psi[BASIS_LABELS.index(label)] = 1.0
    return psi


def bell_target() -> np.ndarray:
    """The target state (|00> - |11>)/sqrt(2)."""
    return (basis_state("00") - basis_state("11")) / np.sqrt(2.0)


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def is_unitary(u: np.ndarray, tol: float = 1e-8) -> bool:
    return bool(np.linalg.norm(u @ u.conj().T - IDENTITY4, ord=2) <= tol)


# =============================================================================
# DENSITY MATRICES
# =============================================================================

def _entries(rho: Union[DensityMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.entries
    return np.asarray(rho, dtype=complex)


def fidelity(rho: Union[DensityMatrix, np.ndarray], target: np.ndarray) -> float:
    """<target|rho|target>, clipped into [0, 1]."""
    target = np.asarray(target, dtype=complex)
    norm = np.vdot(target, target).real
    if abs(norm - 1.0) > NORM_TOL:
        raise DomainError(f"Invalid target state: norm^2 = {norm:.12g}")
    value = np.vdot(target, _entries(rho) @ target).real
    return float(min(max(value, 0.0), 1.0))


def check_density(rho: Union[DensityMatrix, np.ndarray]) -> DensityDiagnostics:
    m = _entries(rho)
    herm = float(np.linalg.norm(m - m.conj().T))
    hermitian_part = 0.5 * (m + m.conj().T)
    return DensityDiagnostics(
        hermiticity_defect=herm,
        trace_defect=float(np.trace(m).real - 1.0),
        min_eigenvalue=float(np.linalg.eigvalsh(hermitian_part)[0]),
    )


# =============================================================================
# SUPEROPERATORS (column stacking: vec(A X B) = (B^T kron A) vec(X))
# =============================================================================

def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v).reshape(DIM, DIM, order="F")


def spre(a: np.ndarray) -> np.ndarray:
    return np.kron(IDENTITY4, a)


def spost(b: np.ndarray) -> np.ndarray:
    return np.kron(b.T, IDENTITY4)


def commutator_super(h: np.ndarray) -> np.ndarray:
    """Superoperator of X -> -i[h, X]."""
    return -1j * (spre(h) - spost(h))


def dissipator_super(c: np.ndarray) -> np.ndarray:
    """Superoperator of X -> c X c^dag - {c^dag c, X}/2."""
    cdc = c.conj().T @ c
    return np.kron(c.conj(), c) - 0.5 * spre(cdc) - 0.5 * spost(cdc)
