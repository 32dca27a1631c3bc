"""
invariant.py - Lewis-Riesenfeld invariant of the driven two-qubit model.

The invariant I = g1 S1(1) - g2 S2(1) + g6 S3(1) + g3 S1(2) + g4 S2(2) - g5 S3(2)
splits into an outer block on {|00>, |11>} (g1, g2, g6) and an inner block on
{|01>, |10>} (g3, g4, g5). Its eigenstates, written through the angles
(eta, zeta) of each block, carry the exact propagator
U(t) = sum_n exp(i alpha_n) |psi_n(t)><psi_n(0)|.

Usage:
    from dmme.invariant import GVector, eigensystem, integrate_lr
    eig = eigensystem(GVector(-4/3, 0.0, 1.0, 0.0, 0.0, 1.0))
    lr = integrate_lr(eig_g0, protocol.fields, grid)
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Protocol as TypingProtocol, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .algebra import IDENTITY4, sigma_generators, system_hamiltonian
from .errors import DegenerateInvariantError, DomainError, IntegrationError

logger = logging.getLogger(__name__)

# =============================================================================
# CONFIGURATION
# =============================================================================

DEGENERACY_TOL = 1e-12   # |lambda| below this has no well-defined eigenbasis
RADIUS_TOL = 1e-14       # in-plane radius below which angle rates are taken as 0
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_METHOD = "RK45"


class FieldSource(TypingProtocol):
    """Anything that yields (f, J) at time t."""

    def at(self, t: float) -> Tuple[float, float]:
        ...


@dataclass(frozen=True)
class GVector:
    g1: float
    g2: float
    g3: float
    g4: float
    g5: float
    g6: float

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "GVector":
        if len(values) != 6:
            raise DomainError(f"Invalid GVector length: {len(values)}")
        return cls(*(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array([self.g1, self.g2, self.g3, self.g4, self.g5, self.g6])

    @property
    def lambda1(self) -> float:
        return -math.sqrt(self.g3 ** 2 + self.g4 ** 2 + self.g5 ** 2)

    @property
    def lambda3(self) -> float:
        return -math.sqrt(self.g1 ** 2 + self.g2 ** 2 + self.g6 ** 2)

    def eigenvalues(self) -> np.ndarray:
        """(lambda1, lambda2, lambda3, lambda4) = (-L1, +L1, -L3, +L3)."""
        l1, l3 = self.lambda1, self.lambda3
        return np.array([l1, -l1, l3, -l3])


class LRIAngles(NamedTuple):
    eta1: float
    zeta1: float
    eta2: float
    zeta2: float


class AngleRates(NamedTuple):
    eta1: float
    zeta1: float
    eta2: float
    zeta2: float


@dataclass(frozen=True, eq=False)
class LRIEigensystem:
    """Eigenstates as columns psi_1..psi_4 with their constant eigenvalues."""
    states: np.ndarray
    eigenvalues: np.ndarray
    angles: LRIAngles

    def state(self, n: int) -> np.ndarray:
        return self.states[:, n - 1].copy()


@dataclass(frozen=True, eq=False)
class PhaseAccumulator:
    alphas: np.ndarray
    t: float = 0.0

    @classmethod
    def zero(cls) -> "PhaseAccumulator":
        return cls(np.zeros(4), 0.0)


@dataclass(frozen=True, eq=False)
class LRTrajectory:
    """Co-integrated invariant coefficients and LR phases on a grid."""
    times: np.ndarray
    g: np.ndarray        # (n, 6)
    phases: np.ndarray   # (n, 4)

    def gvector(self, k: int) -> GVector:
        return GVector.from_array(self.g[k])

    def accumulator(self, k: int) -> PhaseAccumulator:
        return PhaseAccumulator(self.phases[k].copy(), float(self.times[k]))


# =============================================================================
# COEFFICIENT DYNAMICS
# =============================================================================

def _g_rhs_array(g: np.ndarray, f: float, J: float) -> np.ndarray:
    g1, g2, _, g4, g5, g6 = g
    pj = 2.0 * np.pi * J
    return np.array([
        pj * g2,
        4.0 * f * g6 - pj * g1,
        0.0,
        pj * g5,
        -pj * g4,
        -4.0 * f * g2,
    ])


def g_rhs(g: GVector, f: float, J: float) -> GVector:
    """Time derivative of the coefficients under H(f, J)."""
    return GVector.from_array(_g_rhs_array(g.as_array(), f, J))


def _check_grid(grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise DomainError("Invalid time grid: need at least two points")
    steps = np.diff(grid)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise DomainError("Invalid time grid: must be strictly monotone")
    return grid


def _solve(rhs, grid: np.ndarray, y0: np.ndarray, rtol: float, atol: float, method: str):
    sol = solve_ivp(rhs, (grid[0], grid[-1]), y0, t_eval=grid, method=method,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"Integration failed: {sol.message}")
    return sol


def integrate_g(g0: GVector, fields: FieldSource, grid: Sequence[float],
                rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                method: str = DEFAULT_METHOD) -> np.ndarray:
    """Integrate the coefficient ODE; returns an (n, 6) array on `grid`."""
    grid = _check_grid(grid)

    def rhs(t, y):
        f, J = fields.at(t)
        return _g_rhs_array(y, f, J)

    sol = _solve(rhs, grid, g0.as_array(), rtol, atol, method)
    return sol.y.T.copy()


# =============================================================================
# INVARIANT, ANGLES, EIGENSTATES
# =============================================================================

def invariant_matrix(g: GVector) -> np.ndarray:
    (s11, s21, s31), (s12, s22, s32) = sigma_generators()
    return (g.g1 * s11 - g.g2 * s21 + g.g6 * s31
            + g.g3 * s12 + g.g4 * s22 - g.g5 * s32)


def _block_angles(diag: float, re: float, im: float, name: str) -> Tuple[float, float]:
    # block [[diag, re - i im], [re + i im, -diag]]
    big = math.sqrt(diag * diag + re * re + im * im)
    if big < DEGENERACY_TOL:
        raise DegenerateInvariantError(f"Degenerate invariant: {name} = {big:.3g}")
    sin2 = min(max((diag + big) / (2.0 * big), 0.0), 1.0)
    return math.asin(math.sqrt(sin2)), math.atan2(-im, re)


def angles(g: GVector) -> LRIAngles:
    eta1, zeta1 = _block_angles(g.g4, g.g3, g.g5, "lambda1")
    eta2, zeta2 = _block_angles(g.g1, g.g6, g.g2, "lambda3")
    return LRIAngles(eta1, zeta1, eta2, zeta2)


def _states(ang: LRIAngles) -> np.ndarray:
    s1, c1 = math.sin(ang.eta1), math.cos(ang.eta1)
    s2, c2 = math.sin(ang.eta2), math.cos(ang.eta2)
    e1 = complex(math.cos(ang.zeta1), math.sin(ang.zeta1))
    e2 = complex(math.cos(ang.zeta2), math.sin(ang.zeta2))
    v = np.zeros((4, 4), dtype=complex)
    v[1, 0], v[2, 0] = -c1 * e1, s1
    v[1, 1], v[2, 1] = s1 * e1, c1
    v[0, 2], v[3, 2] = -c2 * e2, s2
    v[0, 3], v[3, 3] = s2 * e2, c2
    return v


def eigensystem(g: GVector) -> LRIEigensystem:
    ang = angles(g)
    return LRIEigensystem(states=_states(ang), eigenvalues=g.eigenvalues(), angles=ang)


def _block_rates(d: float, a: float, b: float, dd: float, da: float, db: float) -> Tuple[float, float]:
    # (d, a, b) = (diagonal, real off-diagonal, imaginary off-diagonal)
    r2 = a * a + b * b
    if r2 < RADIUS_TOL ** 2:
        return 0.0, 0.0
    r = math.sqrt(r2)
    big2 = r2 + d * d
    eta_dot = (dd * r2 - d * (a * da + b * db)) / (2.0 * r * big2)
    zeta_dot = (b * da - a * db) / r2
    return eta_dot, zeta_dot


def angle_rates(g: GVector, g_dot: GVector) -> AngleRates:
    """Time derivatives of (eta1, zeta1, eta2, zeta2) given g and its derivative."""
    eta1, zeta1 = _block_rates(g.g4, g.g3, g.g5, g_dot.g4, g_dot.g3, g_dot.g5)
    eta2, zeta2 = _block_rates(g.g1, g.g6, g.g2, g_dot.g1, g_dot.g6, g_dot.g2)
    return AngleRates(eta1, zeta1, eta2, zeta2)


def state_derivatives(ang: LRIAngles, rates: AngleRates) -> np.ndarray:
    """Columns d psi_n / dt of the closed-form eigenstates."""
    s1, c1 = math.sin(ang.eta1), math.cos(ang.eta1)
    s2, c2 = math.sin(ang.eta2), math.cos(ang.eta2)
    e1 = complex(math.cos(ang.zeta1), math.sin(ang.zeta1))
    e2 = complex(math.cos(ang.zeta2), math.sin(ang.zeta2))
    d = np.zeros((4, 4), dtype=complex)
    d[1, 0] = (s1 * rates.eta1 - 1j * c1 * rates.zeta1) * e1
    d[2, 0] = c1 * rates.eta1
    d[1, 1] = (c1 * rates.eta1 + 1j * s1 * rates.zeta1) * e1
    d[2, 1] = -s1 * rates.eta1
    d[0, 2] = (s2 * rates.eta2 - 1j * c2 * rates.zeta2) * e2
    d[3, 2] = c2 * rates.eta2
    d[0, 3] = (c2 * rates.eta2 + 1j * s2 * rates.zeta2) * e2
    d[3, 3] = -s2 * rates.eta2
    return d


# =============================================================================
# LR PHASES AND PROPAGATOR
# =============================================================================

def lr_phase_rates(ang: LRIAngles, f: float, J: float,
                   zeta_dot: Tuple[float, float]) -> np.ndarray:
    """d alpha_n / dt = <psi_n| i d/dt - H |psi_n> for n = 1..4."""
    zeta1_dot, zeta2_dot = zeta_dot
    pj = np.pi * J
    x1 = pj * math.sin(2.0 * ang.eta1) * math.cos(ang.zeta1)
    x2 = pj * math.sin(2.0 * ang.eta2) * math.cos(ang.zeta2)
    z2 = 2.0 * f * math.cos(2.0 * ang.eta2)
    return np.array([
        -(zeta1_dot * math.cos(ang.eta1) ** 2 - x1),
        -(zeta1_dot * math.sin(ang.eta1) ** 2 + x1),
        -(zeta2_dot * math.cos(ang.eta2) ** 2 - x2 + z2),
        -(zeta2_dot * math.sin(ang.eta2) ** 2 + x2 - z2),
    ])


def lr_rhs(g: np.ndarray, f: float, J: float) -> Tuple[np.ndarray, np.ndarray]:
    """(g_dot, alpha_dot) for a raw coefficient array; shared by every integrator."""
    g_dot = _g_rhs_array(g, f, J)
    gv, gdv = GVector.from_array(g), GVector.from_array(g_dot)
    ang = angles(gv)
    rates = angle_rates(gv, gdv)
    return g_dot, lr_phase_rates(ang, f, J, (rates.zeta1, rates.zeta2))


def integrate_lr(g0: GVector, fields: FieldSource, grid: Sequence[float],
                 rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                 method: str = DEFAULT_METHOD) -> LRTrajectory:
    """Co-integrate g and the four LR phases (all phases start at 0)."""
    grid = _check_grid(grid)

    def rhs(t, y):
        f, J = fields.at(t)
        g_dot, a_dot = lr_rhs(y[:6], f, J)
        return np.concatenate([g_dot, a_dot])

    y0 = np.concatenate([g0.as_array(), np.zeros(4)])
    sol = _solve(rhs, grid, y0, rtol, atol, method)
    return LRTrajectory(times=grid, g=sol.y[:6].T.copy(), phases=sol.y[6:].T.copy())


def propagator(eig_t: LRIEigensystem, eig_0: LRIEigensystem,
               phases: PhaseAccumulator) -> np.ndarray:
    return eig_t.states @ np.diag(np.exp(1j * phases.alphas)) @ eig_0.states.conj().T


def integrate_propagator(fields: FieldSource, grid: Sequence[float],
                         rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                         method: str = "DOP853") -> np.ndarray:
    """Time-ordered solution of i dU/dt = H U, U(grid[0]) = 1; shape (n, 4, 4)."""
    grid = _check_grid(grid)

    def rhs(t, y):
        f, J = fields.at(t)
        u = y.reshape(4, 4)
        return (-1j * system_hamiltonian(f, J) @ u).ravel()

    sol = _solve(rhs, grid, IDENTITY4.ravel().copy(), rtol, atol, method)
    return sol.y.T.reshape(-1, 4, 4)


def invariance_residual(g: GVector, g_dot: GVector, f: float, J: float) -> float:
    """Frobenius norm of i dI/dt - [H, I]."""
    inv = invariant_matrix(g)
    h = system_hamiltonian(f, J)
    return float(np.linalg.norm(1j * invariant_matrix(g_dot) - (h @ inv - inv @ h)))
