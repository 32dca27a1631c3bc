"""
bath.py - Reservoir response for the collective coupling A = sx1 + sx2.

Ohmic spectral density with a cutoff tied to each transition frequency,
J(a) = s a exp(-a / (kappa a)), Planck occupations, decay rates
gamma_mn = xi_mn^2 2 pi J(alpha_mn), the instantaneous transition frequencies
alpha_mn = -d(theta_mn)/dt between invariant eigenstates, and the
zero-temperature Lamb shift S(a) = s [wc - a exp(-a/wc) Ei(a/wc)].

Usage:
    from dmme.bath import BathParams, rates
    bath = BathParams(temperature=0.0, s32=0.1, s24=0.01)
    r = rates(protocol_state(t, g, fields), bath)
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from .algebra import coupling_operator, system_hamiltonian
from .controls import Protocol, ProtocolState, protocol_state
from .errors import DomainError, UnsupportedTemperatureError
from .invariant import (
    AngleRates,
    GVector,
    LRIAngles,
    PhaseAccumulator,
    eigensystem,
    integrate_g,
    integrate_lr,
    state_derivatives,
)

logger = logging.getLogger(__name__)

# =============================================================================
# CONFIGURATION
# =============================================================================

DEFAULT_S32 = 0.1
DEFAULT_S24 = 0.01
DEFAULT_KAPPA = 10.0

EULER_GAMMA = 0.5772156649015329
EI_SERIES_LIMIT = 40.0     # power series below, asymptotic series above
EI_MAX_TERMS = 500
EI_EPS = 1e-17
XI_FLOOR = 1e-12           # |A_mn|^2 below which the coupling phase is undefined
ALPHA_FLOOR = 1e-9         # |alpha| below which a transition is resonant and keeps its labels
LIMIT_STEPS = (1e-3, 4e-3, 1.6e-2)   # offsets tried for the coupling-phase limit
STATIC_TOL = 1e-12         # |dg/dt| below which the invariant is stationary
MAX_UNWRAP_REFINEMENTS = 6
THETA_FD_XI2 = 1e-2        # xi_mn^2 above which finite differences of theta_mn track alpha_mn

_A = coupling_operator()


@dataclass(frozen=True)
class BathParams:
    temperature: float = 0.0
    s32: float = DEFAULT_S32
    s24: float = DEFAULT_S24
    cutoff_multiplier: float = DEFAULT_KAPPA
    include_lamb_shift: bool = False

    def __post_init__(self):
        if not self.temperature >= 0.0:
            raise DomainError(f"Invalid temperature: {self.temperature}")
        if self.s32 < 0.0 or self.s24 < 0.0:
            raise DomainError(f"Invalid couplings: s32={self.s32}, s24={self.s24}")
        if not self.cutoff_multiplier > 0.0:
            raise DomainError(f"Invalid cutoff multiplier: {self.cutoff_multiplier}")

    def coupling(self, pair: Tuple[int, int]) -> float:
        key = frozenset(pair)
        if key == frozenset((2, 3)):
            return self.s32
        if key == frozenset((2, 4)):
            return self.s24
        return 0.0


@dataclass(frozen=True, eq=False)
class TransitionData:
    """Matrix elements of A in the LR basis (index 0 <-> psi_1)."""
    A: np.ndarray
    xi: np.ndarray
    phi: np.ndarray
    theta: Optional[np.ndarray] = None


@dataclass(frozen=True)
class FrequencyParts:
    energy: float
    geometric: float
    coupling_phase: float

    @property
    def total(self) -> float:
        return self.energy + self.geometric + self.coupling_phase


@dataclass(frozen=True)
class Frequencies:
    alpha23: FrequencyParts
    alpha24: FrequencyParts
    xi23: float
    xi24: float

    @property
    def alpha32(self) -> float:
        return -self.alpha23.total


@dataclass(frozen=True)
class ChannelRate:
    """One secular jump |psi_lower><psi_upper| and its thermal partner."""
    lower: int
    upper: int
    alpha: float
    xi: float
    gamma: float
    occupation: float
    emission: float
    absorption: float
    lamb_shift: float
    reversed: bool


@dataclass(frozen=True)
class Rates:
    channel32: ChannelRate
    channel24: ChannelRate

    @property
    def channels(self) -> Tuple[ChannelRate, ChannelRate]:
        return self.channel32, self.channel24

    @property
    def gamma32(self) -> float:
        return self.channel32.gamma

    @property
    def gamma24(self) -> float:
        return self.channel24.gamma

    @property
    def S32(self) -> float:
        return self.channel32.lamb_shift

    @property
    def S24(self) -> float:
        return self.channel24.lamb_shift

    @property
    def alpha32(self) -> float:
        return self.channel32.alpha

    @property
    def alpha24(self) -> float:
        return self.channel24.alpha

    @property
    def reversed(self) -> bool:
        return self.channel32.reversed or self.channel24.reversed


# =============================================================================
# SPECTRAL FUNCTIONS
# =============================================================================

def planck_n(alpha: float, temperature: float) -> float:
    if not alpha > 0.0:
        raise DomainError(f"Invalid frequency for Planck occupation: {alpha}")
    if temperature == 0.0:
        return 0.0
    x = alpha / temperature
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


def planck_n_formal(alpha: float, temperature: float) -> float:
    """1/(exp(a/T) - 1) for either sign of a; N(-a) = -(N(a) + 1)."""
    if alpha == 0.0 or not temperature > 0.0:
        raise DomainError(f"Invalid arguments: alpha={alpha}, T={temperature}")
    return 1.0 / math.expm1(alpha / temperature)


def spectral_density(alpha: float, s: float, cutoff: float) -> float:
    if not alpha > 0.0:
        raise DomainError(f"Invalid frequency for spectral density: {alpha}")
    if not cutoff > 0.0:
        raise DomainError(f"Invalid cutoff: {cutoff}")
    return s * alpha * math.exp(-alpha / cutoff)


def gamma0(alpha: float, bath: BathParams, s: float) -> float:
    return 2.0 * math.pi * spectral_density(alpha, s, bath.cutoff_multiplier * alpha)


def _ei_series(x: float) -> float:
    total, term = 0.0, 1.0
    for k in range(1, EI_MAX_TERMS):
        term *= x / k
        total += term / k
        if abs(term / k) < EI_EPS * abs(total) and k > abs(x):
            break
    return EULER_GAMMA + math.log(abs(x)) + total


def _ei_asymptotic(x: float) -> float:
    total, term = 1.0, 1.0
    for k in range(1, EI_MAX_TERMS):
        nxt = term * k / x
        if nxt > term or nxt < EI_EPS * total:
            break
        term = nxt
        total += term
    return math.exp(x) / x * total


def _e1_continued_fraction(y: float) -> float:
    # modified Lentz evaluation of E1(y), y > 1
    tiny = 1e-300
    b = y + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, EI_MAX_TERMS):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        step = c * d
        h *= step
        if abs(step - 1.0) < 1e-16:
            break
    return h * math.exp(-y)


def exp_integral_Ei(x: float) -> float:
    """Exponential integral Ei(x) (principal value for x > 0)."""
    if x == 0.0:
        raise DomainError("Invalid argument: Ei has a logarithmic singularity at 0")
    if x > 709.0:
        raise DomainError(f"Invalid argument: Ei({x}) overflows")
    if x > EI_SERIES_LIMIT:
        return _ei_asymptotic(x)
    if x < -1.0:
        return -_e1_continued_fraction(-x)
    return _ei_series(x)


def lamb_shift_S0(alpha: float, bath: BathParams, s: float) -> float:
    if bath.temperature > 0.0:
        raise UnsupportedTemperatureError(
            f"Lamb shift is only available at zero temperature (T = {bath.temperature})")
    if not alpha > 0.0:
        raise DomainError(f"Invalid frequency for Lamb shift: {alpha}")
    wc = bath.cutoff_multiplier * alpha
    return s * (wc - alpha * math.exp(-alpha / wc) * exp_integral_Ei(alpha / wc))


def lamb_shift_pv(alpha: float, bath: BathParams, s: float) -> float:
    """P int_0^inf J(w)/(w - alpha) dw at T = 0, by quadrature."""
    if bath.temperature > 0.0:
        raise UnsupportedTemperatureError("Principal-value Lamb shift is zero-temperature only")
    if not alpha > 0.0:
        raise DomainError(f"Invalid frequency for Lamb shift: {alpha}")
    wc = bath.cutoff_multiplier * alpha

    def density(w):
        return s * w * math.exp(-w / wc)

    near, _ = quad(density, 0.0, 2.0 * alpha, weight="cauchy", wvar=alpha)
    far, _ = quad(lambda w: density(w) / (w - alpha), 2.0 * alpha, np.inf, limit=200)
    return near + far


# =============================================================================
# TRANSITIONS
# =============================================================================

def matrix_elements_A(eig) -> np.ndarray:
    """A_mn = <psi_m|A|psi_n> as a 4x4 array (index 0 <-> psi_1)."""
    v = eig.states
    return v.conj().T @ _A @ v


def xi_theta(A: np.ndarray, phases: PhaseAccumulator) -> TransitionData:
    """xi = |A|, phi = Arg A, theta_mn = alpha_n - alpha_m + phi_mn."""
    a = phases.alphas
    phi = np.angle(A)
    theta = a[np.newaxis, :] - a[:, np.newaxis] + phi
    return TransitionData(A=A, xi=np.abs(A), phi=phi, theta=theta)


def _phase_rate(v: np.ndarray, dv: np.ndarray, i: int, j: int) -> Optional[float]:
    """d(Arg A_mn)/dt, or None where |A_mn|^2 < XI_FLOOR."""
    a_mn = np.vdot(v[:, i], _A @ v[:, j])
    norm2 = abs(a_mn) ** 2
    if norm2 < XI_FLOOR:
        return None
    a_dot = np.vdot(dv[:, i], _A @ v[:, j]) + np.vdot(v[:, i], _A @ dv[:, j])
    return float((a_dot * np.conj(a_mn)).imag / norm2)


def _limit_phase_rate(state: ProtocolState, i: int, j: int) -> float:
    """One-sided limit of the coupling-phase rate at a zero of A_mn.

    Samples three co-integrated points on the side inside the protocol and
    extrapolates quadratically back to state.t.
    """
    if state.fields is None or np.max(np.abs(state.g_dot.as_array())) < STATIC_TOL:
        return 0.0
    side = -1.0 if state.t > 0.0 else 1.0
    for h in LIMIT_STEPS:
        grid = state.t + side * h * np.arange(4)
        g = integrate_g(state.g, state.fields, grid, rtol=1e-12, atol=1e-13, method="DOP853")
        samples = []
        for k in (1, 2, 3):
            near = protocol_state(float(grid[k]), GVector.from_array(g[k]), state.fields)
            rate = _phase_rate(near.eig.states, state_derivatives(near.eig.angles, near.rates), i, j)
            if rate is None:
                break
            samples.append(rate)
        if len(samples) == 3:
            return 3.0 * samples[0] - 3.0 * samples[1] + samples[2]
    logger.debug("coupling phase %d%d undefined near t = %.6g, rate set to 0", i + 1, j + 1, state.t)
    return 0.0


def _pair_parts(m: int, n: int, state: ProtocolState, v: np.ndarray, dv: np.ndarray,
                energy: np.ndarray, geo: np.ndarray) -> Tuple[FrequencyParts, float]:
    i, j = m - 1, n - 1
    phi_dot = _phase_rate(v, dv, i, j)
    if phi_dot is None:
        phi_dot = _limit_phase_rate(state, i, j)
    parts = FrequencyParts(energy=float(energy[j] - energy[i]),
                           geometric=float(geo[i] - geo[j]),
                           coupling_phase=-phi_dot)
    return parts, float(abs(np.vdot(v[:, i], _A @ v[:, j])))


def instantaneous_frequencies(state: ProtocolState) -> Frequencies:
    """alpha_23 and alpha_24 split into energy, geometric and coupling-phase parts.

    Where A_mn vanishes the coupling-phase part is its one-sided limit, so
    the frequencies stay continuous up to the protocol ends.
    """
    v = state.eig.states
    dv = state_derivatives(state.eig.angles, state.rates)
    h = system_hamiltonian(state.f, state.J)
    energy = np.einsum("in,ij,jn->n", v.conj(), h, v).real
    geo = np.real(1j * np.einsum("in,in->n", v.conj(), dv))
    p23, xi23 = _pair_parts(2, 3, state, v, dv, energy, geo)
    p24, xi24 = _pair_parts(2, 4, state, v, dv, energy, geo)
    return Frequencies(alpha23=p23, alpha24=p24, xi23=xi23, xi24=xi24)


def closed_form_alphas(ang: LRIAngles, rates: AngleRates, f: float, J: float) -> Tuple[float, float]:
    """Closed-form (alpha23, alpha24) for eta1 = pi/4, zeta1 = 0."""
    eta, zeta = ang.eta2, ang.zeta2
    eta_dot, zeta_dot = rates.eta2, rates.zeta2
    s2 = math.sin(2.0 * eta) * math.cos(zeta)
    c2 = math.cos(2.0 * eta)
    pj = math.pi * J
    wobble = 2.0 * eta_dot * math.sin(zeta)

    a23 = zeta_dot * math.cos(eta) ** 2 + 2.0 * f * c2 - pj * (s2 + 1.0)
    den23 = 2.0 * s2 - 2.0
    if abs(den23) > 2.0 * XI_FLOOR:
        a23 += (zeta_dot * (1.0 + c2 - s2) + wobble) / den23

    a24 = zeta_dot * math.sin(eta) ** 2 - 2.0 * f * c2 + pj * (s2 - 1.0)
    den24 = 2.0 * s2 + 2.0
    if abs(den24) > 2.0 * XI_FLOOR:
        a24 -= (zeta_dot * (1.0 - c2 + s2) + wobble) / den24
    return a23, a24


def _hold_undefined(values: np.ndarray, defined: np.ndarray) -> np.ndarray:
    if not defined.any():
        return np.zeros_like(values)
    first = int(np.argmax(defined))
    idx = np.where(defined, np.arange(values.size), first)
    return values[np.maximum.accumulate(idx)]


def theta_series(protocol: Protocol, grid: Sequence[float],
                 pairs: Sequence[Tuple[int, int]] = ((2, 3), (2, 4))) -> Dict[Tuple[int, int], np.ndarray]:
    """Continuous theta_mn(t) along the protocol; refines the grid on phase jumps.

    Where |A_mn|^2 drops below XI_FLOOR the coupling phase is undefined and
    the last defined value is held.
    """
    grid = np.asarray(grid, dtype=float)
    for _ in range(MAX_UNWRAP_REFINEMENTS + 1):
        lr = integrate_lr(protocol.g0, protocol.fields, grid, rtol=1e-12, atol=1e-13,
                          method="DOP853")
        raw = {pair: np.empty(grid.size) for pair in pairs}
        phis = {pair: np.empty(grid.size) for pair in pairs}
        defined = {pair: np.ones(grid.size, dtype=bool) for pair in pairs}
        for k in range(grid.size):
            data = xi_theta(matrix_elements_A(eigensystem(lr.gvector(k))), lr.accumulator(k))
            for m, n in pairs:
                phis[(m, n)][k] = data.phi[m - 1, n - 1]
                defined[(m, n)][k] = data.xi[m - 1, n - 1] ** 2 >= XI_FLOOR
                raw[(m, n)][k] = lr.phases[k, n - 1] - lr.phases[k, m - 1]
        for p in pairs:
            phis[p] = _hold_undefined(phis[p], defined[p])
        jumps = max(np.max(np.abs(np.diff(np.unwrap(phis[p])))) for p in pairs)
        if jumps <= math.pi / 2:
            break
        logger.debug("theta jump %.3f on %d points, refining", jumps, grid.size)
        grid = np.linspace(grid[0], grid[-1], 2 * grid.size - 1)
    return {p: raw[p] + np.unwrap(phis[p]) for p in pairs}


# =============================================================================
# RATES
# =============================================================================

def _thermal_weight(alpha: float, temperature: float) -> float:
    # alpha * N(alpha), finite as alpha -> 0
    if temperature == 0.0:
        return 0.0
    x = alpha / temperature
    if x < 1e-12:
        return temperature
    if x > 700.0:
        return 0.0
    return alpha / math.expm1(x)


def _channel(lower: int, upper: int, alpha: float, xi: float, bath: BathParams) -> ChannelRate:
    s = bath.coupling((lower, upper))
    flipped = alpha < -ALPHA_FLOOR
    if flipped:
        lower, upper = upper, lower
    a = abs(alpha)
    scale = 2.0 * math.pi * s * math.exp(-1.0 / bath.cutoff_multiplier) * xi * xi
    absorption = scale * _thermal_weight(a, bath.temperature)
    if a < ALPHA_FLOOR:
        gamma, occupation, shift = 0.0, (math.inf if bath.temperature > 0.0 else 0.0), 0.0
        emission = absorption
    else:
        gamma = xi * xi * gamma0(a, bath, s)
        occupation = planck_n(a, bath.temperature)
        emission = gamma + absorption
        shift = lamb_shift_S0(a, bath, s) if bath.include_lamb_shift else 0.0
    return ChannelRate(lower=lower, upper=upper, alpha=alpha, xi=xi, gamma=gamma,
                       occupation=occupation, emission=emission, absorption=absorption,
                       lamb_shift=shift, reversed=flipped)


def rates(state: ProtocolState, bath: BathParams,
          frequencies: Optional[Frequencies] = None) -> Rates:
    """Secular decay rates of the two LR transitions at one instant."""
    if bath.include_lamb_shift and bath.temperature > 0.0:
        raise UnsupportedTemperatureError(
            f"Lamb shift is only available at zero temperature (T = {bath.temperature})")
    freq = frequencies or instantaneous_frequencies(state)
    return Rates(
        channel32=_channel(3, 2, freq.alpha32, freq.xi23, bath),
        channel24=_channel(2, 4, freq.alpha24.total, freq.xi24, bath),
    )
