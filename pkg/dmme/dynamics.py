"""
dynamics.py - Driven Markovian master equation in the invariant eigenbasis.

The secular generator keeps two jump operators, F32 = |psi3><psi2| and
F24 = |psi2><psi4| (LR eigenstates at t=0 in the interaction picture, or
conjugated by the LR propagator in the Schroedinger picture), each with an
emission rate gamma (N + 1) and a reverse channel gamma N. The density matrix
is integrated together with the invariant coefficients g and the LR phases
in a single state vector so that rates, phases and rho share one grid.

Usage:
    from dmme.dynamics import EvolutionOptions, evolve
    traj = evolve(rho0, protocol, bath, EvolutionOptions(grid=200))
    print(traj.fidelity[-1])
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import null_space, svd

from .algebra import (
    DIM,
    DensityDiagnostics,
    DensityMatrix,
    Picture,
    bell_target,
    check_density,
    commutator_super,
    dissipator_super,
    fidelity,
    is_unitary,
    projector,
    system_hamiltonian,
    unvec,
    vec,
)
from .bath import BathParams, Rates, rates
from .controls import Protocol, ProtocolState, protocol_state
from .errors import (
    DomainError,
    InconsistentRateError,
    IntegrationError,
    NonUnitaryError,
    ToleranceError,
    UnsupportedTemperatureError,
)
from .invariant import (
    GVector,
    LRIEigensystem,
    PhaseAccumulator,
    eigensystem,
    lr_rhs,
    propagator,
)

logger = logging.getLogger(__name__)

# =============================================================================
# CONFIGURATION
# =============================================================================

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_METHOD = "RK45"
DEFAULT_GRID = 400
TRACE_TOL = 1e-8
EIG_TOL = 1e-8
NULL_RCOND = 1e-9
DARK_TOL = 1e-10
DFS_TOL = 1e-8

JumpOps = Dict[Tuple[int, int], np.ndarray]


@dataclass(frozen=True)
class EvolutionOptions:
    picture: Picture = Picture.INTERACTION
    closed_system: bool = False
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    method: str = DEFAULT_METHOD
    grid: int = DEFAULT_GRID
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "picture", Picture(self.picture))
        if not (self.rtol > 0.0 and self.atol > 0.0):
            raise DomainError(f"Invalid tolerances: rtol={self.rtol}, atol={self.atol}")
        if self.grid < 2:
            raise DomainError(f"Invalid grid resolution: {self.grid}")


@dataclass(frozen=True, eq=False)
class Liouvillian:
    matrix: np.ndarray
    t: float
    picture: Picture
    lamb_shift: bool
    basis: np.ndarray   # LR eigenstates (columns) the jump operators are built from


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray          # (n, 4, 4) in `picture`
    lab_states: np.ndarray      # (n, 4, 4) Schroedinger picture
    picture: Picture
    g: np.ndarray
    phases: np.ndarray
    f: np.ndarray
    J: np.ndarray
    gamma32: np.ndarray
    gamma24: np.ndarray
    alpha32: np.ndarray
    alpha24: np.ndarray
    diagnostics: List[DensityDiagnostics]
    fidelity: Optional[np.ndarray] = None
    warnings: List[str] = field(default_factory=list)

    def eigensystem(self, k: int) -> LRIEigensystem:
        return eigensystem(GVector.from_array(self.g[k]))

    def population(self, psi_index: int) -> np.ndarray:
        """<psi_n(t)|rho(t)|psi_n(t)> along the trajectory (n = 1..4)."""
        out = np.empty(self.times.size)
        for k in range(self.times.size):
            psi = self.eigensystem(k).state(psi_index)
            out[k] = np.vdot(psi, self.lab_states[k] @ psi).real
        return out


@dataclass(frozen=True, eq=False)
class SteadyState:
    rho: DensityMatrix
    null_dim: int
    null_basis: np.ndarray
    residual: float
    sector_dim: int = 1

    @property
    def degenerate(self) -> bool:
        return self.sector_dim > 1


@dataclass(frozen=True)
class DarkStateReport:
    is_dark: bool
    lam: complex
    lam_mn: Dict[Tuple[int, int], complex]
    eigen_residual: float
    jump_residual: float
    balance_defect: float


@dataclass(frozen=True)
class DFSReport:
    psi1_leakage: float
    sector: Optional[str]
    sector_leakage: Optional[float]
    passed: bool


# =============================================================================
# GENERATOR
# =============================================================================

def lindblad_ops(eig0: LRIEigensystem, eig_t: LRIEigensystem, phases: PhaseAccumulator,
                 picture: Picture = Picture.INTERACTION) -> JumpOps:
    """Jump operators |psi_l><psi_u| for both directions of the two secular pairs."""
    ops = {}
    for l, u in ((3, 2), (2, 3), (2, 4), (4, 2)):
        ops[(l, u)] = np.outer(eig0.state(l), eig0.state(u).conj())
    if Picture(picture) is Picture.SCHROEDINGER:
        U = propagator(eig_t, eig0, phases)
        ops = {key: U @ op @ U.conj().T for key, op in ops.items()}
    return ops


def lamb_shift_hamiltonian(r: Rates, ops: JumpOps, temperature: float = 0.0) -> np.ndarray:
    """sum over channels of S xi^2 F^dag F (diagonal in the LR basis)."""
    if temperature > 0.0:
        raise UnsupportedTemperatureError(
            f"Lamb shift is only available at zero temperature (T = {temperature})")
    h = np.zeros((DIM, DIM), dtype=complex)
    for ch in r.channels:
        F = ops[(ch.lower, ch.upper)]
        h += ch.lamb_shift * ch.xi ** 2 * (F.conj().T @ F)
    return h


def build_generator(t: float, r: Optional[Rates], ops: JumpOps, hamiltonian: Optional[np.ndarray],
                    picture: Picture, basis: np.ndarray) -> Liouvillian:
    """16x16 generator: -i[H + H_LS, .] + sum emission D[F] + absorption D[F^dag]."""
    h = np.zeros((DIM, DIM), dtype=complex) if hamiltonian is None else hamiltonian.astype(complex)
    lamb = False
    dissipator = np.zeros((DIM * DIM, DIM * DIM), dtype=complex)
    if r is not None:
        for ch in r.channels:
            if ch.emission < 0.0 or ch.absorption < 0.0 or ch.gamma < 0.0:
                raise InconsistentRateError(
                    f"Negative rate on channel {ch.lower}{ch.upper}: "
                    f"emission={ch.emission}, absorption={ch.absorption}")
            if ch.emission > 0.0:
                dissipator += ch.emission * dissipator_super(ops[(ch.lower, ch.upper)])
            if ch.absorption > 0.0:
                dissipator += ch.absorption * dissipator_super(ops[(ch.upper, ch.lower)])
        if any(ch.lamb_shift != 0.0 for ch in r.channels):
            h = h + lamb_shift_hamiltonian(r, ops)
            lamb = True
    return Liouvillian(matrix=commutator_super(h) + dissipator, t=t,
                       picture=Picture(picture), lamb_shift=lamb, basis=basis)


def generator_at(state: ProtocolState, eig0: LRIEigensystem, phases: PhaseAccumulator,
                 bath: BathParams, picture: Picture) -> Tuple[Liouvillian, Rates]:
    """Assemble the generator for one protocol instant."""
    r = rates(state, bath)
    ops = lindblad_ops(eig0, state.eig, phases, picture)
    if Picture(picture) is Picture.SCHROEDINGER:
        return build_generator(state.t, r, ops, system_hamiltonian(state.f, state.J),
                               picture, state.eig.states), r
    return build_generator(state.t, r, ops, None, picture, eig0.states), r


# =============================================================================
# EVOLUTION
# =============================================================================

def _as_matrix(rho0: Union[DensityMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(rho0, DensityMatrix):
        return rho0.entries.astype(complex)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape == (DIM,):
        return projector(rho0)
    return rho0


def evolve(rho0: Union[DensityMatrix, np.ndarray], protocol: Protocol, bath: BathParams,
           options: EvolutionOptions = EvolutionOptions(),
           target: Optional[np.ndarray] = None) -> Trajectory:
    """Integrate rho, g and the LR phases over [0, protocol.duration].

    At t = 0 both pictures coincide, so rho0 is taken as given. `target`
    defaults to (|00> - |11>)/sqrt(2).
    """
    rho_init = _as_matrix(rho0)
    diag0 = check_density(rho_init)
    if not diag0.within():
        raise DomainError(f"Invalid initial density matrix: {diag0}")
    target = bell_target() if target is None else np.asarray(target, dtype=complex)
    picture = options.picture
    grid = np.linspace(0.0, protocol.duration, options.grid + 1)
    eig0 = eigensystem(protocol.g0)
    fields = protocol.fields
    zero = np.zeros((DIM * DIM, DIM * DIM), dtype=complex)

    def rhs(t, y):
        g = y[16:22].real
        f, J = fields.at(t)
        g_dot, a_dot = lr_rhs(g, f, J)
        if options.closed_system:
            if picture is Picture.SCHROEDINGER:
                L = commutator_super(system_hamiltonian(f, J))
            else:
                L = zero
        else:
            state = protocol_state(t, GVector.from_array(g), fields)
            L = generator_at(state, eig0, PhaseAccumulator(y[22:26].real, t), bath, picture)[0].matrix
        return np.concatenate([L @ y[:16], g_dot, a_dot])

    y0 = np.concatenate([vec(rho_init), protocol.g0.as_array().astype(complex), np.zeros(4, dtype=complex)])
    sol = solve_ivp(rhs, (grid[0], grid[-1]), y0, t_eval=grid, method=options.method,
                    rtol=options.rtol, atol=options.atol)
    if not sol.success:
        raise IntegrationError(f"Master equation integration failed: {sol.message}")
    return _assemble(sol.y, grid, eig0, protocol, bath, options, target)


def _assemble(y: np.ndarray, grid: np.ndarray, eig0: LRIEigensystem, protocol: Protocol,
              bath: BathParams, options: EvolutionOptions, target: np.ndarray) -> Trajectory:
    n = grid.size
    states = np.empty((n, DIM, DIM), dtype=complex)
    lab = np.empty_like(states)
    g = y[16:22].real.T.copy()
    phases = y[22:26].real.T.copy()
    cols = {name: np.empty(n) for name in ("f", "J", "gamma32", "gamma24", "alpha32", "alpha24", "fid")}
    diagnostics = []
    warnings: List[str] = []
    reversed_seen = set()
    for k, t in enumerate(grid):
        state = protocol_state(float(t), GVector.from_array(g[k]), protocol.fields)
        r = rates(state, bath)
        rho = unvec(y[:16, k])
        states[k] = rho
        if options.picture is Picture.SCHROEDINGER:
            lab[k] = rho
        else:
            U = propagator(state.eig, eig0, PhaseAccumulator(phases[k], float(t)))
            lab[k] = U @ rho @ U.conj().T
        diag = check_density(lab[k])
        diagnostics.append(diag)
        if options.strict and not diag.within(TRACE_TOL, EIG_TOL, herm_tol=math.inf):
            raise ToleranceError(f"Density matrix drifted at t = {t:.6g}: {diag}")
        cols["f"][k], cols["J"][k] = state.f, state.J
        cols["gamma32"][k], cols["gamma24"][k] = r.gamma32, r.gamma24
        cols["alpha32"][k], cols["alpha24"][k] = r.alpha32, r.alpha24
        cols["fid"][k] = fidelity(lab[k], target)
        for ch, name in zip(r.channels, ("32", "24")):
            if ch.reversed and name not in reversed_seen:
                reversed_seen.add(name)
                msg = f"transition {name} reversed at t = {t:.6g} (alpha = {ch.alpha:.6g})"
                logger.warning(msg)
                warnings.append(msg)
    return Trajectory(times=grid, states=states, lab_states=lab, picture=options.picture,
                      g=g, phases=phases, f=cols["f"], J=cols["J"],
                      gamma32=cols["gamma32"], gamma24=cols["gamma24"],
                      alpha32=cols["alpha32"], alpha24=cols["alpha24"],
                      diagnostics=diagnostics, fidelity=cols["fid"], warnings=warnings)


def picture_transform(rho: DensityMatrix, U: np.ndarray) -> DensityMatrix:
    """Interaction -> Schroedinger is U rho U^dag; the reverse uses U^dag."""
    if not is_unitary(U):
        raise NonUnitaryError("Picture change needs a unitary operator")
    if rho.picture is Picture.INTERACTION:
        out = U @ rho.entries @ U.conj().T
    else:
        out = U.conj().T @ rho.entries @ U
    return DensityMatrix(out, rho.picture.flipped())


# =============================================================================
# STEADY STATE
# =============================================================================

def steady_state(L: Liouvillian, reference: int = 3) -> SteadyState:
    """Null-space steady state restricted to the sector orthogonal to psi_1.

    The result is the spectral projection of |psi_reference><psi_reference|
    onto the kernel, i.e. the state the generator relaxes that start to. With
    a one-dimensional kernel this is the unique steady state; with a larger
    one (a closed transition) it is still a density matrix, and the kernel
    dimension is reported in `sector_dim`.
    """
    basis = null_space(L.matrix, rcond=NULL_RCOND)
    W = L.basis[:, 1:4]
    reduced = np.kron(W.T, W.conj().T) @ L.matrix @ np.kron(W.conj(), W)
    u, s, vh = svd(reduced)
    kernel = int(np.sum(s <= NULL_RCOND * s[0]))
    right, left = vh[s.size - kernel:].conj().T, u[:, s.size - kernel:]
    if kernel == 0:
        raise DomainError(f"Generator at t = {L.t:.6g} has no steady state in the physical sector")
    if right.shape[1] > 1:
        logger.warning("Degenerate steady state (sector dimension %d) at t = %.6g; "
                       "projecting psi_%d", right.shape[1], L.t, reference)
    start = np.zeros((3, 3), dtype=complex)
    start[reference - 2, reference - 2] = 1.0
    coeffs = np.linalg.solve(left.conj().T @ right, left.conj().T @ vec(start))
    Y = (right @ coeffs).reshape(3, 3, order="F")
    trace = np.trace(Y).real
    if trace < TRACE_TOL:
        raise DomainError(f"Steady state at t = {L.t:.6g} lost its trace ({trace:.3g})")
    X = W @ Y @ W.conj().T / trace
    X = 0.5 * (X + X.conj().T)
    residual = float(np.linalg.norm(L.matrix @ vec(X)))
    return SteadyState(rho=DensityMatrix(X, L.picture), null_dim=int(basis.shape[1]),
                       null_basis=basis, residual=residual, sector_dim=int(right.shape[1]))


def adiabatic_steady_populations(N32: float, N24: float) -> Tuple[float, float, float]:
    """(rho22, rho33, rho44) from the two balance equations and normalization."""
    if N32 < 0.0 or N24 < 0.0 or not (math.isfinite(N32) and math.isfinite(N24)):
        raise DomainError(f"Invalid occupations: N32={N32}, N24={N24}")
    den = 3.0 * N24 * N32 + N24 + 2.0 * N32 + 1.0
    return N32 * (N24 + 1.0) / den, (N24 + 1.0) * (N32 + 1.0) / den, N24 * N32 / den


def swapped_steady_populations(N32: float, N24: float) -> Tuple[float, float, float]:
    """The closed form with denominator 2 N24 + N32 + 3 N24 N32 + 1 (not normalized)."""
    den = 2.0 * N24 + N32 + 3.0 * N24 * N32 + 1.0
    return N32 * (N24 + 1.0) / den, (N24 + 1.0) * (N32 + 1.0) / den, N24 * N32 / den


# =============================================================================
# DARK STATES AND DECOHERENCE-FREE SUBSPACES
# =============================================================================

def dark_state_check(phi: np.ndarray, r: Rates, ops: JumpOps, tol: float = DARK_TOL) -> DarkStateReport:
    """Kraus criteria for phi to be a stationary pure state of the generator."""
    phi = np.asarray(phi, dtype=complex)
    weighted = []
    for ch in r.channels:
        weighted.append((ch.emission, (ch.lower, ch.upper)))
        weighted.append((ch.absorption, (ch.upper, ch.lower)))
    drift = -1j * lamb_shift_hamiltonian(r, ops)
    for w, key in weighted:
        if w > 0.0:
            drift = drift + w * (ops[key].conj().T @ ops[key])
    lam = complex(np.vdot(phi, drift @ phi))
    eigen_residual = float(np.linalg.norm(drift @ phi - lam * phi))

    lam_mn = {}
    jump_residual = 0.0
    balance = 0.0
    for w, key in weighted:
        if w <= 0.0:
            continue
        out = ops[key] @ phi
        lam_k = complex(np.vdot(phi, out))
        lam_mn[key] = lam_k
        jump_residual = max(jump_residual, float(np.linalg.norm(out - lam_k * phi)))
        balance += w * abs(lam_k) ** 2
    defect = abs(balance - lam.real)
    return DarkStateReport(is_dark=eigen_residual <= tol and jump_residual <= tol and defect <= tol,
                           lam=lam, lam_mn=lam_mn, eigen_residual=eigen_residual,
                           jump_residual=jump_residual, balance_defect=defect)


def _max_leakage(traj: Trajectory, keep: Sequence[int]) -> float:
    kept = sum(traj.population(n) for n in keep)
    return float(np.max(np.abs(kept - kept[0])))


def dfs_check(protocol: Protocol, bath: BathParams,
              options: EvolutionOptions = EvolutionOptions(grid=100),
              tol: float = DFS_TOL) -> DFSReport:
    """psi_1 protection, plus the psi_3 sector when J or f vanishes identically."""
    eig0 = eigensystem(protocol.g0)
    leak = 0.0
    for rho0 in (projector(eig0.state(1)), np.eye(DIM, dtype=complex) / DIM):
        traj = evolve(rho0, protocol, bath, options)
        leak = max(leak, _max_leakage(traj, (1,)))

    samples = np.linspace(0.0, protocol.duration, 33)
    values = np.array([protocol.fields.at(t) for t in samples])
    sector = None
    if np.all(values[:, 1] == 0.0):
        sector = "J=0"
    elif np.all(values[:, 0] == 0.0):
        sector = "f=0"
    sector_leak = None
    if sector is not None:
        traj = evolve(projector(eig0.state(3)), protocol, bath, options)
        sector_leak = _max_leakage(traj, (1, 3))
    passed = leak <= tol and (sector_leak is None or sector_leak <= tol)
    return DFSReport(psi1_leakage=leak, sector=sector, sector_leakage=sector_leak, passed=passed)
