"""
config.py - Experiment configuration: flat key = value files plus DMME_* overrides.

File format:
    # comment
    g2m = 0.02
    delta = sqrt(0.1)
    initial_state = ket00

Every key can be overridden from the environment as DMME_<KEY>, e.g.
DMME_TEMPERATURE=1.0. Unset keys take the defaults below.
"""

import math
import os
import re
from dataclasses import dataclass, fields, replace
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .algebra import DIM, Picture
from .bath import DEFAULT_KAPPA, DEFAULT_S24, DEFAULT_S32, BathParams
from .controls import (
    DEFAULT_DELTA,
    DEFAULT_G2M,
    DEFAULT_G3,
    DEFAULT_GAMMA,
    DEFAULT_OMEGA,
    Orientation,
    ProtocolParams,
    Variant,
)
from .dynamics import DEFAULT_ATOL, DEFAULT_GRID, DEFAULT_METHOD, DEFAULT_RTOL, EvolutionOptions
from .errors import ConfigError, DMMEError

# =============================================================================
# CONFIGURATION
# =============================================================================

ENV_PREFIX = "DMME_"
DEFAULT_OUTPUT_DIR = "results"
INITIAL_STATES = ("psi3_0", "ket00", "psi4_0", "psi1_0", "custom")
SOLVER_METHODS = ("RK45", "RK23", "DOP853", "Radau", "BDF", "LSODA")
_TRUE = ("true", "1", "yes", "on")
_FALSE = ("false", "0", "no", "off")
_SQRT = re.compile(r"^sqrt\(\s*([^()]+?)\s*\)$")


@dataclass(frozen=True)
class ExperimentConfig:
    # protocol
    gamma: float = DEFAULT_GAMMA
    delta: float = DEFAULT_DELTA
    g2m: float = DEFAULT_G2M
    omega_e: float = DEFAULT_OMEGA
    variant: str = Variant.COS2.value
    orientation: str = Orientation.FORWARD.value
    g3: float = DEFAULT_G3
    # bath
    temperature: float = 0.0
    s32: float = DEFAULT_S32
    s24: float = DEFAULT_S24
    kappa: float = DEFAULT_KAPPA
    include_lamb_shift: bool = False
    # run
    initial_state: str = "psi3_0"
    initial_amplitudes: Optional[Tuple[complex, ...]] = None
    closed_system: bool = False
    picture: str = Picture.INTERACTION.value
    grid: int = DEFAULT_GRID
    method: str = DEFAULT_METHOD
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    output_dir: str = DEFAULT_OUTPUT_DIR

    def protocol_params(self) -> ProtocolParams:
        return ProtocolParams(gamma=self.gamma, delta=self.delta, g2m=self.g2m,
                              omega_e=self.omega_e, variant=self.variant,
                              orientation=self.orientation, g3=self.g3)

    def bath_params(self, include_lamb_shift: Optional[bool] = None) -> BathParams:
        lamb = self.include_lamb_shift if include_lamb_shift is None else include_lamb_shift
        return BathParams(temperature=self.temperature, s32=self.s32, s24=self.s24,
                          cutoff_multiplier=self.kappa, include_lamb_shift=lamb)

    def evolution_options(self, closed_system: Optional[bool] = None, grid: Optional[int] = None,
                          picture: Optional[str] = None) -> EvolutionOptions:
        return EvolutionOptions(
            picture=Picture(picture or self.picture),
            closed_system=self.closed_system if closed_system is None else closed_system,
            rtol=self.rtol, atol=self.atol, method=self.method,
            grid=self.grid if grid is None else grid,
        )

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return validate(replace(self, **changes))


KEYS = tuple(f.name for f in fields(ExperimentConfig))
_FLOAT_KEYS = ("gamma", "delta", "g2m", "omega_e", "g3", "temperature", "s32", "s24",
               "kappa", "rtol", "atol")
_BOOL_KEYS = ("include_lamb_shift", "closed_system")


# =============================================================================
# PARSING
# =============================================================================

def _parse_float(key: str, raw: str) -> float:
    text = raw.strip()
    m = _SQRT.match(text)
    try:
        if m:
            inner = float(m.group(1))
            if inner < 0.0:
                raise ConfigError(f"Invalid {key}: sqrt of negative value {inner}", field=key)
            return math.sqrt(inner)
        return float(text)
    except ValueError:
        raise ConfigError(f"Invalid {key}: {raw!r} is not a number", field=key)


def _parse_bool(key: str, raw: str) -> bool:
    text = raw.strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ConfigError(f"Invalid {key}: {raw!r} is not a boolean", field=key)


def _parse_amplitudes(raw: str) -> Tuple[complex, ...]:
    try:
        amps = tuple(complex(part.replace(" ", "")) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"Invalid initial_amplitudes: {raw!r}", field="initial_amplitudes")
    if len(amps) != DIM:
        raise ConfigError(f"Invalid initial_amplitudes: expected {DIM} values, got {len(amps)}",
                          field="initial_amplitudes")
    return amps


def parse_value(key: str, raw: str):
    """Convert one raw string to the type of field `key`."""
    if key not in KEYS:
        raise ConfigError(f"Unknown key {key!r}; accepted keys: {', '.join(KEYS)}", field=key)
    if key in _FLOAT_KEYS:
        return _parse_float(key, raw)
    if key in _BOOL_KEYS:
        return _parse_bool(key, raw)
    if key == "grid":
        try:
            return int(raw.strip())
        except ValueError:
            raise ConfigError(f"Invalid grid: {raw!r} is not an integer", field=key)
    if key == "initial_amplitudes":
        return _parse_amplitudes(raw)
    return raw.strip()


def parse_lines(text: str) -> Dict[str, object]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", line=lineno)
        key, raw = stripped.split("=", 1)
        key = key.strip().lower()
        try:
            values[key] = parse_value(key, raw)
        except ConfigError as e:
            raise ConfigError(str(e), line=lineno, field=e.field)
    return values


# =============================================================================
# VALIDATION
# =============================================================================

def validate(config: ExperimentConfig) -> ExperimentConfig:
    for key in _FLOAT_KEYS:
        value = getattr(config, key)
        if not math.isfinite(value):
            raise ConfigError(f"Invalid {key}: {value} (must be finite)", field=key)
    if config.initial_state not in INITIAL_STATES:
        raise ConfigError(f"Invalid initial_state: {config.initial_state!r} "
                          f"(one of {', '.join(INITIAL_STATES)})", field="initial_state")
    if config.initial_state == "custom":
        if config.initial_amplitudes is None:
            raise ConfigError("initial_state = custom needs initial_amplitudes",
                              field="initial_amplitudes")
        norm = float(np.linalg.norm(np.asarray(config.initial_amplitudes, dtype=complex)))
        if norm == 0.0 or not math.isfinite(norm):
            raise ConfigError("Invalid initial_amplitudes: zero or non-finite norm",
                              field="initial_amplitudes")
    if config.method not in SOLVER_METHODS:
        raise ConfigError(f"Invalid method: {config.method!r} (one of {', '.join(SOLVER_METHODS)})",
                          field="method")
    if config.picture not in tuple(p.value for p in Picture):
        raise ConfigError(f"Invalid picture: {config.picture!r}", field="picture")

    # the remaining checks live with the parameter objects themselves
    checks = (("protocol", config.protocol_params), ("bath", config.bath_params),
              ("run", config.evolution_options))
    for name, build in checks:
        try:
            build()
        except (DMMEError, ValueError) as e:
            raise ConfigError(f"Invalid {name} parameters: {e}", field=name)
    return config


def load_config(path: Optional[str] = None, environ: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    """Read `path` (if given), apply DMME_<KEY> overrides, validate."""
    values: Dict[str, object] = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"Config file not found: {path}")
        with open(path) as f:
            values.update(parse_lines(f.read()))

    environ = os.environ if environ is None else environ
    for key in KEYS:
        raw = environ.get(ENV_PREFIX + key.upper())
        if raw is not None:
            values[key] = parse_value(key, raw)

    return validate(ExperimentConfig(**values))
