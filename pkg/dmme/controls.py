"""
controls.py - Inverse engineering of the control fields f(t), J(t).

A protocol fixes the outer-block invariant coefficients g1(t), g2(t), g6(t)
between the boundary values, and the fields are read off the coefficient ODE:

    J = dg1/dt / (2 pi g2)          f = (dg2/dt + 2 pi J g1) / (4 g6)

g1(t) = g1(0) p(t) with a profile p per (variant, orientation):

    cos2 forward   p = cos^2(w t)       cos2 reversed   p = sin^2(w t)
    sin3 forward   p = 1 - sin^3(w t)   sin3 reversed   p = sin^3(w t)

and g2(t) = g2m sin(2 w t), g6(t) = sqrt(lambda3^2 - g1^2 - g2^2).

Usage:
    from dmme.controls import ProtocolParams, synthesize
    protocol = synthesize(ProtocolParams())          # caption parameter set
    f, J = protocol.fields.at(0.0)
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import AdmissibilityError, DomainError
from .invariant import (
    AngleRates,
    GVector,
    LRIEigensystem,
    _g_rhs_array,
    angle_rates,
    eigensystem,
)

logger = logging.getLogger(__name__)

# =============================================================================
# CONFIGURATION
# =============================================================================

DEFAULT_GAMMA = 1.0
DEFAULT_DELTA = math.sqrt(0.1)
DEFAULT_G2M = 0.02
DEFAULT_OMEGA = 1.0
DEFAULT_G3 = 1.0
ADMISSIBILITY_SAMPLES = 4001


class Variant(str, Enum):
    COS2 = "cos2"
    SIN3 = "sin3"


class Orientation(str, Enum):
    FORWARD = "forward"
    REVERSED = "reversed"


@dataclass(frozen=True)
class ProtocolParams:
    gamma: float = DEFAULT_GAMMA
    delta: float = DEFAULT_DELTA
    g2m: float = DEFAULT_G2M
    omega_e: float = DEFAULT_OMEGA
    variant: Variant = Variant.COS2
    orientation: Orientation = Orientation.FORWARD
    g3: float = DEFAULT_G3

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"Invalid delta: {self.delta} (must lie in (0, 1))")
        if not self.gamma > 0.0:
            raise DomainError(f"Invalid gamma: {self.gamma} (must be > 0)")
        if self.g2m == 0.0:
            raise DomainError("Invalid g2m: must be nonzero")
        if not self.omega_e > 0.0:
            raise DomainError(f"Invalid omega_e: {self.omega_e} (must be > 0)")
        if not self.g3 > 0.0:
            raise DomainError(f"Invalid g3: {self.g3} (must be > 0)")

    @property
    def period(self) -> float:
        return math.pi / (2.0 * self.omega_e)

    @property
    def g1_0(self) -> float:
        return boundary_g(self.gamma, self.delta, self.g3)[0].g1

    @property
    def lambda3(self) -> float:
        return boundary_g(self.gamma, self.delta, self.g3)[2]


@dataclass(frozen=True)
class ControlFields:
    f: Callable[[float], float]
    J: Callable[[float], float]

    def at(self, t: float) -> Tuple[float, float]:
        return self.f(t), self.J(t)

    @classmethod
    def constant(cls, f: float, J: float) -> "ControlFields":
        f, J = float(f), float(J)
        return cls(f=lambda t: f, J=lambda t: J)


@dataclass(frozen=True)
class Protocol:
    """Fields plus the invariant they drive, over [0, duration]."""
    fields: ControlFields
    g0: GVector
    duration: float
    params: Optional[ProtocolParams] = None


@dataclass(frozen=True)
class ProtocolState:
    """Every protocol quantity the reservoir needs at one instant."""
    t: float
    g: GVector
    g_dot: GVector
    f: float
    J: float
    eig: LRIEigensystem
    rates: AngleRates
    fields: Optional[ControlFields] = None   # for one-sided limits at isolated points


# =============================================================================
# BOUNDARY AND ANSATZ
# =============================================================================

def boundary_g(gamma: float, delta: float, g3: float = DEFAULT_G3) -> Tuple[GVector, GVector, float]:
    """(g at t=0, g at t=T, lambda3) for the target (|00> - |11>)/sqrt(2) at T."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"Invalid delta: {delta} (must lie in (0, 1))")
    if gamma == 0.0:
        raise DomainError("Invalid gamma: must be nonzero")
    k = 2.0 * delta * math.sqrt(1.0 - delta * delta)
    g_start = GVector((2.0 * delta * delta - 1.0) * gamma / k, 0.0, g3, 0.0, 0.0, gamma)
    g_end = GVector(0.0, 0.0, g3, 0.0, 0.0, gamma / k)
    return g_start, g_end, -abs(gamma) / k


def _profile(params: ProtocolParams, t: float) -> Tuple[float, float, float]:
    """(p, dp/dt, (dp/dt)/sin(2 w t)) with the last one finite everywhere."""
    w = params.omega_e
    s, c = math.sin(w * t), math.cos(w * t)
    forward = params.orientation is Orientation.FORWARD
    if params.variant is Variant.COS2:
        ratio = -w if forward else w
        p = c * c if forward else s * s
    else:
        ratio = (-1.5 if forward else 1.5) * w * s
        p = 1.0 - s ** 3 if forward else s ** 3
    return p, ratio * math.sin(2.0 * w * t), ratio


def _outer(params: ProtocolParams, t: float) -> Tuple[float, float, float]:
    g_start, _, lam3 = boundary_g(params.gamma, params.delta, params.g3)
    p, _, _ = _profile(params, t)
    g1 = g_start.g1 * p
    g2 = params.g2m * math.sin(2.0 * params.omega_e * t)
    rest = lam3 * lam3 - g1 * g1 - g2 * g2
    if rest <= 0.0:
        raise AdmissibilityError(
            f"Inadmissible protocol: g6^2 = {rest:.6g} <= 0 at t = {t:.6g}", t=t)
    return g1, g2, math.sqrt(rest)


def ansatz_g(params: ProtocolParams, t: float) -> GVector:
    g1, g2, g6 = _outer(params, t)
    return GVector(g1, g2, params.g3, 0.0, 0.0, g6)


def ansatz_g_dot(params: ProtocolParams, t: float) -> GVector:
    """Analytic time derivative of ansatz_g."""
    g1, g2, g6 = _outer(params, t)
    _, p_dot, _ = _profile(params, t)
    g1_dot = params.g1_0 * p_dot
    g2_dot = 2.0 * params.g2m * params.omega_e * math.cos(2.0 * params.omega_e * t)
    g6_dot = -(g1 * g1_dot + g2 * g2_dot) / g6
    return GVector(g1_dot, g2_dot, 0.0, 0.0, 0.0, g6_dot)


def check_admissible(params: ProtocolParams, samples: int = ADMISSIBILITY_SAMPLES) -> None:
    """Raise AdmissibilityError at the worst grid point if g6 turns imaginary."""
    _, _, lam3 = boundary_g(params.gamma, params.delta, params.g3)
    grid = np.linspace(0.0, params.period, samples)
    g1_0 = params.g1_0
    worst_t, worst = 0.0, math.inf
    for t in grid:
        p, _, _ = _profile(params, t)
        g2 = params.g2m * math.sin(2.0 * params.omega_e * t)
        rest = lam3 * lam3 - (g1_0 * p) ** 2 - g2 * g2
        if rest < worst:
            worst_t, worst = float(t), rest
    if worst <= 0.0:
        raise AdmissibilityError(
            f"Inadmissible g2m = {params.g2m}: g6^2 = {worst:.6g} at t = {worst_t:.6g}",
            t=worst_t)


# =============================================================================
# CONTROL FIELDS
# =============================================================================

def _J(params: ProtocolParams, t: float) -> float:
    _, _, ratio = _profile(params, t)
    return params.g1_0 * ratio / (2.0 * math.pi * params.g2m)


def _f(params: ProtocolParams, t: float) -> float:
    g1, _, g6 = _outer(params, t)
    g2_dot = 2.0 * params.g2m * params.omega_e * math.cos(2.0 * params.omega_e * t)
    return (g2_dot + 2.0 * math.pi * _J(params, t) * g1) / (4.0 * g6)


def _build(params: ProtocolParams) -> ControlFields:
    check_admissible(params)
    return ControlFields(f=lambda t: _f(params, t), J=lambda t: _J(params, t))


def control_fields(params: ProtocolParams) -> ControlFields:
    if params.variant is Variant.SIN3:
        return control_fields_sin3(params)
    return _build(params)


def control_fields_sin3(params: ProtocolParams) -> ControlFields:
    if params.variant is not Variant.SIN3:
        raise DomainError(f"Invalid variant for the cubic ansatz: {params.variant.value}")
    return _build(params)


def cos2_field_closed_form(params: ProtocolParams, t: float) -> float:
    """The closed-form f(t) of the cos^2 protocol (regression reference)."""
    w, m, g1_0 = params.omega_e, params.g2m, params.g1_0
    c2 = math.cos(w * t) ** 2
    root = math.sqrt(g1_0 ** 2 * (1.0 - c2 * c2) - (m * math.sin(2.0 * w * t)) ** 2
                     + params.gamma ** 2)
    return w * (2.0 * m * m * math.cos(2.0 * w * t) - g1_0 ** 2 * c2) / (4.0 * m * root)


def synthesize(params: ProtocolParams) -> Protocol:
    return Protocol(fields=control_fields(params), g0=ansatz_g(params, 0.0),
                    duration=params.period, params=params)


def protocol_state(t: float, g: GVector, fields: ControlFields) -> ProtocolState:
    f, J = fields.at(t)
    g_dot = GVector.from_array(_g_rhs_array(g.as_array(), f, J))
    return ProtocolState(t=t, g=g, g_dot=g_dot, f=f, J=J, eig=eigensystem(g),
                         rates=angle_rates(g, g_dot), fields=fields)


# =============================================================================
# ADIABATIC LIMIT (constant f, J)
# =============================================================================

def _splitting(f: float, J: float) -> float:
    e = math.hypot(math.pi * J, 2.0 * f)
    if e == 0.0:
        raise DomainError("Degenerate adiabatic limit: f = J = 0")
    return e


def hamiltonian_energies(f: float, J: float) -> Tuple[float, float, float, float]:
    """(eps1, eps2, eps3, eps4) = (-pi J, pi J, -E, E), E = sqrt(pi^2 J^2 + 4 f^2)."""
    e = math.hypot(math.pi * J, 2.0 * f)
    return -math.pi * J, math.pi * J, -e, e


def adiabatic_eta2(f: float, J: float) -> float:
    e = _splitting(f, J)
    inner = min(max((e - 2.0 * f) / e, 0.0), 2.0)
    return math.acos(min(math.sqrt(0.5) * math.sqrt(inner), 1.0))


def adiabatic_xi(f: float, J: float) -> Tuple[float, float]:
    eta2 = adiabatic_eta2(f, J)
    c, s = math.cos(eta2), math.sin(eta2)
    return abs(math.sqrt(2.0) * (c - s)), abs(math.sqrt(2.0) * (c + s))


def adiabatic_alphas(f: float, J: float) -> Tuple[float, float]:
    """(alpha23, alpha24) of the adiabatic limit."""
    e = _splitting(f, J)
    return -(e + math.pi * J), e - math.pi * J


def adiabatic_g(f: float, J: float, lambda3: float = -1.0, g3: float = DEFAULT_G3) -> GVector:
    """Invariant proportional to H in the outer block, with psi_3 its lower eigenstate."""
    c = abs(lambda3) / _splitting(f, J)
    return GVector(2.0 * f * c, 0.0, g3, 0.0, 0.0, math.pi * J * c)


def constant_protocol(f: float, J: float, duration: float,
                      lambda3: float = -1.0, g3: float = DEFAULT_G3) -> Protocol:
    if not duration > 0.0:
        raise DomainError(f"Invalid duration: {duration}")
    return Protocol(fields=ControlFields.constant(f, J),
                    g0=adiabatic_g(f, J, lambda3, g3), duration=duration)
