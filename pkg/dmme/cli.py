"""
cli.py - Command-line front end for the driven master equation experiments.

Usage:
    python run_dmme.py figure1 [--config PATH] [--out DIR] [--grid N]
    python run_dmme.py figure2 [--config PATH] [--out DIR] [--grid N]
    python run_dmme.py simulate [--config PATH] [--out DIR] [--grid N]
    python run_dmme.py steady [--config PATH] [--out DIR] [--grid N]
    python run_dmme.py scan-g2m [--low 0.1] [--high 1.0] [--resolution 1e-3]
    python run_dmme.py selfcheck [--config PATH]

Exit codes: 0 success, 1 invalid configuration or input, 2 failed check.
"""

import argparse
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import expi

from .algebra import Picture, basis_state, projector
from .bath import (
    THETA_FD_XI2,
    BathParams,
    ChannelRate,
    Rates,
    exp_integral_Ei,
    instantaneous_frequencies,
    lamb_shift_pv,
    lamb_shift_S0,
    matrix_elements_A,
    rates,
    theta_series,
)
from .config import ExperimentConfig, load_config
from .controls import (
    Protocol,
    ProtocolParams,
    Variant,
    ansatz_g,
    ansatz_g_dot,
    check_admissible,
    constant_protocol,
    control_fields,
    protocol_state,
    synthesize,
)
from .dynamics import (
    EvolutionOptions,
    Trajectory,
    adiabatic_steady_populations,
    build_generator,
    dark_state_check,
    dfs_check,
    evolve,
    generator_at,
    lindblad_ops,
    steady_state,
    swapped_steady_populations,
)
from .errors import (
    AdmissibilityError,
    DMMEError,
    IntegrationError,
    NoSignChangeError,
    ToleranceError,
    UnsupportedTemperatureError,
)
from .invariant import (
    GVector,
    PhaseAccumulator,
    eigensystem,
    integrate_lr,
    integrate_propagator,
    invariance_residual,
    propagator,
)

logger = logging.getLogger(__name__)

# =============================================================================
# CONFIGURATION
# =============================================================================

RESULT_COLUMNS = ["t", "fidelity", "log10_infidelity", "f", "J", "gamma32", "gamma24",
                  "alpha32", "alpha24", "trace_defect", "min_eig"]
FLOAT_FORMAT = "%.17g"
INFIDELITY_FLOOR = 1e-16
SCAN_RANGE = (0.1, 1.0)
SCAN_RESOLUTION = 1e-3
SCAN_COARSE_POINTS = 19
SCAN_TIME_SAMPLES = 401
MAX_WORKERS = 4
ORACLE_METHOD = "DOP853"    # high-order solver for the fast-rotating Schroedinger picture

PASS = "pass"
FAIL = "fail"
XFAIL = "expected-fail"

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CHECK_FAILED = 2


@dataclass(frozen=True)
class ThresholdEstimate:
    threshold: float
    lower: float
    upper: float
    width: float
    coarse: Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str


# =============================================================================
# RESULT TABLES
# =============================================================================

def result_table(traj: Trajectory, fidelity: Optional[np.ndarray] = None) -> pd.DataFrame:
    """One row per grid point with the fixed result columns."""
    fid = traj.fidelity if fidelity is None else np.clip(np.asarray(fidelity, dtype=float), 0.0, 1.0)
    infid = np.maximum(1.0 - fid, INFIDELITY_FLOOR)
    df = pd.DataFrame({
        "t": traj.times,
        "fidelity": fid,
        "log10_infidelity": np.log10(infid),
        "f": traj.f,
        "J": traj.J,
        "gamma32": traj.gamma32,
        "gamma24": traj.gamma24,
        "alpha32": traj.alpha32,
        "alpha24": traj.alpha24,
        "trace_defect": [d.trace_defect for d in traj.diagnostics],
        "min_eig": [d.min_eigenvalue for d in traj.diagnostics],
    })
    return df[RESULT_COLUMNS]


def save_table(df: pd.DataFrame, out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    print(f"  Saved: {path}")
    return path


def save_summary(summary: Dict, out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w") as f:
        json.dump(summary, f, indent=2)
    print(f"  Saved: {path}")
    return path


def _final_fidelity(df: pd.DataFrame) -> float:
    return float(df["fidelity"].iloc[-1])


# =============================================================================
# EXPERIMENTS
# =============================================================================

def initial_state(config: ExperimentConfig, protocol: Protocol) -> np.ndarray:
    """State vector selected by config.initial_state."""
    eig0 = eigensystem(protocol.g0)
    selector = config.initial_state
    if selector == "ket00":
        return basis_state("00")
    if selector == "custom":
        amps = np.asarray(config.initial_amplitudes, dtype=complex)
        return amps / np.linalg.norm(amps)
    index = {"psi1_0": 1, "psi3_0": 3, "psi4_0": 4}[selector]
    return eig0.state(index)


def _run_series(jobs: Sequence[Callable[[], pd.DataFrame]]) -> List[pd.DataFrame]:
    # results come back in submission order
    with ThreadPoolExecutor(max_workers=MAX_WORKERS) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [fut.result() for fut in futures]


def run_simulation(config: ExperimentConfig) -> Tuple[pd.DataFrame, Trajectory]:
    protocol = synthesize(config.protocol_params())
    psi0 = initial_state(config, protocol)
    traj = evolve(projector(psi0), protocol, config.bath_params(), config.evolution_options())
    for msg in traj.warnings:
        print(f"WARNING: {msg}")
    return result_table(traj), traj


def run_figure1(config: ExperimentConfig, out_dir: Optional[str] = None) -> Dict[str, pd.DataFrame]:
    """Infidelity series (a), control fields (b) and decay rates (c)."""
    out_dir = out_dir or config.output_dir
    protocol = synthesize(config.protocol_params())
    bath = config.bath_params()
    eig0 = eigensystem(protocol.g0)
    ket00 = basis_state("00")
    series = (
        ("a_psi3_open", eig0.state(3), False),
        ("a_ket00_open", ket00, False),
        ("a_ket00_closed", ket00, True),
    )

    def job(psi0, closed):
        return lambda: result_table(evolve(projector(psi0), protocol, bath,
                                           config.evolution_options(closed_system=closed)))

    print("Running figure 1 series...")
    tables = dict(zip((name for name, _, _ in series),
                      _run_series([job(psi0, closed) for _, psi0, closed in series])))
    rates_src = tables["a_psi3_open"]
    tables["b_fields"] = rates_src[["t", "f", "J"]].copy()
    tables["c_rates"] = rates_src[["t", "gamma32", "gamma24", "alpha32", "alpha24"]].copy()

    for name, df in tables.items():
        save_table(df, out_dir, f"figure1{name}.csv")
    # transition 24 closes at t = T, so rate minima are taken over [0, T)
    open_rates = tables["c_rates"].iloc[:-1]
    summary = {
        "final_fidelity": {name: _final_fidelity(tables[name]) for name, _, _ in series},
        "min_gamma32": float(open_rates["gamma32"].min()),
        "min_gamma24": float(open_rates["gamma24"].min()),
        "gamma24_at_end": float(tables["c_rates"]["gamma24"].iloc[-1]),
        "config": _config_dict(config),
    }
    save_summary(summary, out_dir, "figure1_summary.json")
    return tables


def run_figure2(config: ExperimentConfig, out_dir: Optional[str] = None) -> Dict[str, pd.DataFrame]:
    """Infidelity with and without the Lamb shift, for three initial states."""
    if config.temperature > 0.0:
        raise UnsupportedTemperatureError(
            f"figure2 needs temperature = 0 (got {config.temperature})")
    out_dir = out_dir or config.output_dir
    protocol = synthesize(config.protocol_params())
    eig0 = eigensystem(protocol.g0)
    options = config.evolution_options(closed_system=False)
    starts = (("psi3", eig0.state(3)), ("psi4", eig0.state(4)), ("ket00", basis_state("00")))

    def job(psi0, lamb):
        def run():
            return result_table(evolve(projector(psi0), protocol,
                                       config.bath_params(include_lamb_shift=lamb), options))
        return run

    keys, jobs = [], []
    for label, psi0 in starts:
        for lamb in (True, False):
            keys.append(f"{label}_lamb_{'on' if lamb else 'off'}")
            jobs.append(job(psi0, lamb))
    print("Running figure 2 series...")
    tables = dict(zip(keys, _run_series(jobs)))

    for name, df in tables.items():
        save_table(df, out_dir, f"figure2_{name}.csv")
    summary = {"final_infidelity": {}, "max_lamb_difference": {}, "config": _config_dict(config)}
    for label, _ in starts:
        on, off = tables[f"{label}_lamb_on"], tables[f"{label}_lamb_off"]
        summary["final_infidelity"][label] = {
            "lamb_on": 1.0 - _final_fidelity(on), "lamb_off": 1.0 - _final_fidelity(off)}
        summary["max_lamb_difference"][label] = float(np.max(np.abs(
            on["fidelity"].to_numpy() - off["fidelity"].to_numpy())))
    save_summary(summary, out_dir, "figure2_summary.json")
    return tables


def run_steady(config: ExperimentConfig, out_dir: Optional[str] = None) -> pd.DataFrame:
    """Instantaneous steady state along the protocol vs the balance-equation populations."""
    out_dir = out_dir or config.output_dir
    params = config.protocol_params()
    fields = control_fields(params)
    bath = config.bath_params()
    rows = []
    for t in np.linspace(0.0, params.period, config.grid + 1):
        state = protocol_state(float(t), ansatz_g(params, float(t)), fields)
        L, r = generator_at(state, state.eig, PhaseAccumulator.zero(), bath, Picture.INTERACTION)
        ss = steady_state(L)
        pops = [np.vdot(state.eig.state(n), ss.rho.entries @ state.eig.state(n)).real for n in (2, 3, 4)]
        n32, n24 = r.channel32.occupation, r.channel24.occupation
        if r.reversed or not (math.isfinite(n32) and math.isfinite(n24)):
            balance = (math.nan, math.nan, math.nan)
        else:
            balance = adiabatic_steady_populations(n32, n24)
        rows.append({"t": float(t), "N32": n32, "N24": n24,
                     "rho22": pops[0], "rho33": pops[1], "rho44": pops[2],
                     "rho22_balance": balance[0], "rho33_balance": balance[1],
                     "rho44_balance": balance[2], "null_dim": ss.null_dim,
                     "sector_dim": ss.sector_dim, "residual": ss.residual})
    df = pd.DataFrame(rows)
    save_table(df, out_dir, "steady.csv")
    return df


# =============================================================================
# THRESHOLD SCAN
# =============================================================================

def min_alpha32(params: ProtocolParams, samples: int = SCAN_TIME_SAMPLES) -> float:
    """Minimum over the protocol of the 3 -> 2 transition frequency."""
    fields = control_fields(params)
    values = []
    for t in np.linspace(0.0, params.period, samples):
        state = protocol_state(float(t), ansatz_g(params, float(t)), fields)
        values.append(instantaneous_frequencies(state).alpha32)
    return float(min(values))


def scan_alpha_sign(config: ExperimentConfig, g2m_range: Tuple[float, float] = SCAN_RANGE,
                    resolution: float = SCAN_RESOLUTION,
                    coarse_points: int = SCAN_COARSE_POINTS) -> ThresholdEstimate:
    """Smallest g2m in the range where min_t alpha32 changes sign, by coarse scan then bisection."""
    low, high = g2m_range
    if not (0.0 < low < high) or not resolution > 0.0:
        raise NoSignChangeError(f"Invalid scan range {g2m_range} or resolution {resolution}")
    base = config.protocol_params()

    def value(m):
        return min_alpha32(replace(base, g2m=float(m)))

    grid = np.linspace(low, high, coarse_points)
    with ThreadPoolExecutor(max_workers=MAX_WORKERS) as pool:
        coarse = list(pool.map(value, grid))
    logger.debug("coarse scan: %s", list(zip(grid, coarse)))

    bracket = None
    for k in range(1, len(grid)):
        if np.sign(coarse[k]) != np.sign(coarse[0]):
            bracket = (float(grid[k - 1]), float(grid[k]), coarse[k - 1])
            break
    if bracket is None:
        raise NoSignChangeError(
            f"min alpha32 keeps sign {np.sign(coarse[0]):+.0f} over g2m in [{low}, {high}]")

    lo, hi, f_lo = bracket
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        f_mid = value(mid)
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return ThresholdEstimate(threshold=0.5 * (lo + hi), lower=lo, upper=hi, width=hi - lo,
                             coarse=tuple(zip(map(float, grid), coarse)))


# =============================================================================
# SELF-CHECK
# =============================================================================

def _five_point(y: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central derivative on the interior points [2:-2]."""
    return (-y[4:] + 8.0 * y[3:-1] - 8.0 * y[1:-3] + y[:-4]) / (12.0 * h)


def _synthetic_rates(n32: float, n24: float) -> Rates:
    def channel(lower, upper, n):
        return ChannelRate(lower=lower, upper=upper, alpha=1.0, xi=1.0, gamma=1.0, occupation=n,
                           emission=n + 1.0, absorption=n, lamb_shift=0.0, reversed=False)
    return Rates(channel32=channel(3, 2, n32), channel24=channel(2, 4, n24))


def _check_admissibility(params: ProtocolParams) -> CheckResult:
    try:
        check_admissible(params)
    except AdmissibilityError as e:
        return CheckResult("admissibility", FAIL, f"{e} (t = {e.t:.6g})")
    return CheckResult("admissibility", PASS, f"g6 real on [0, {params.period:.6g}]")


def _check_lri(params: ProtocolParams) -> CheckResult:
    worst_fd = worst_co = drift = 0.0
    h = 1e-5
    for variant in (Variant.COS2, Variant.SIN3):
        p = replace(params, variant=variant)
        protocol = synthesize(p)
        grid = np.linspace(0.0, p.period, 201)
        lr = integrate_lr(protocol.g0, protocol.fields, grid, rtol=1e-12, atol=1e-13, method="DOP853")
        lam0 = protocol.g0.lambda3
        for k, t in enumerate(grid):
            f, J = protocol.fields.at(t)
            g = lr.gvector(k)
            state = protocol_state(float(t), g, protocol.fields)
            worst_co = max(worst_co, invariance_residual(g, state.g_dot, f, J),
                           invariance_residual(ansatz_g(p, t), ansatz_g_dot(p, t), f, J))
            drift = max(drift, abs(g.lambda3 - lam0))
            if h < t < p.period - h:
                fd = (ansatz_g(p, t + h).as_array() - ansatz_g(p, t - h).as_array()) / (2.0 * h)
                worst_fd = max(worst_fd, invariance_residual(ansatz_g(p, t), GVector.from_array(fd), f, J))
    ok = worst_fd <= 1e-5 and worst_co <= 1e-8 and drift <= 1e-8
    return CheckResult("invariant residual", PASS if ok else FAIL,
                       f"finite-difference {worst_fd:.2e}, co-integrated {worst_co:.2e}, "
                       f"lambda3 drift {drift:.2e}")


def _check_propagator(protocol: Protocol) -> CheckResult:
    grid = np.linspace(0.0, protocol.duration, 41)
    direct = integrate_propagator(protocol.fields, grid, rtol=1e-11, atol=1e-12)
    lr = integrate_lr(protocol.g0, protocol.fields, grid, rtol=1e-12, atol=1e-13, method="DOP853")
    eig0 = eigensystem(protocol.g0)
    worst = 0.0
    for k in range(grid.size):
        U = propagator(eigensystem(lr.gvector(k)), eig0, lr.accumulator(k))
        worst = max(worst, float(np.linalg.norm(U - direct[k], ord=2)))
    return CheckResult("propagator oracle", PASS if worst < 1e-6 else FAIL, f"max |U_LR - U| = {worst:.2e}")


def _check_pictures(protocol: Protocol, bath: BathParams, config: ExperimentConfig) -> CheckResult:
    rho0 = projector(basis_state("00"))
    worst = 0.0
    results = []
    for pic in (Picture.INTERACTION, Picture.SCHROEDINGER):
        options = config.evolution_options(closed_system=False, grid=20, picture=pic.value)
        results.append(evolve(rho0, protocol, bath, replace(options, method=ORACLE_METHOD)))
    for a, b in zip(results[0].lab_states, results[1].lab_states):
        worst = max(worst, float(np.max(np.abs(a - b))))
    return CheckResult("two-picture equivalence", PASS if worst <= 1e-6 else FAIL,
                       f"max |rho_I - rho_S| = {worst:.2e} at T = {bath.temperature}")


def _check_steady(protocol: Protocol) -> CheckResult:
    eig = eigensystem(protocol.g0)
    ops = lindblad_ops(eig, eig, PhaseAccumulator.zero())
    worst = 0.0
    levels = (0.0, 0.1, 1.0, 10.0)
    for n32 in levels:
        for n24 in levels:
            L = build_generator(0.0, _synthetic_rates(n32, n24), ops, None, Picture.INTERACTION, eig.states)
            rho = steady_state(L).rho.entries
            pops = [np.vdot(eig.state(n), rho @ eig.state(n)).real for n in (2, 3, 4)]
            worst = max(worst, float(np.max(np.abs(np.subtract(pops, adiabatic_steady_populations(n32, n24))))))
    pure = steady_state(build_generator(0.0, _synthetic_rates(0.0, 0.0), ops, None,
                                        Picture.INTERACTION, eig.states)).rho.entries
    pure_err = float(np.max(np.abs(pure - projector(eig.state(3)))))
    ok = worst <= 1e-8 and pure_err <= 1e-8
    return CheckResult("steady-state oracle", PASS if ok else FAIL,
                       f"balance mismatch {worst:.2e}, |rho - psi3 psi3^dag| at N=0 {pure_err:.2e}")


def _check_swapped_steady() -> CheckResult:
    total = sum(swapped_steady_populations(1.0, 0.0))
    return CheckResult("swapped-denominator normalization", XFAIL,
                       f"swapped denominator sums to {total:.6g} for N32=1, N24=0")


def _check_dark(protocol: Protocol, config: ExperimentConfig) -> CheckResult:
    state = protocol_state(0.0, protocol.g0, protocol.fields)
    bath = replace(config.bath_params(include_lamb_shift=False), temperature=0.0)
    ops = lindblad_ops(state.eig, state.eig, PhaseAccumulator.zero())
    report = dark_state_check(state.eig.state(3), rates(state, bath), ops)
    return CheckResult("dark-state criteria", PASS if report.is_dark else FAIL,
                       f"eigen residual {report.eigen_residual:.2e}, jump residual {report.jump_residual:.2e}")


def _check_dfs(protocol: Protocol, bath: BathParams) -> CheckResult:
    options = EvolutionOptions(grid=40)
    zero_t = replace(bath, temperature=0.0, include_lamb_shift=False)
    reports = [
        ("canonical", dfs_check(protocol, bath, options)),
        ("J=0", dfs_check(constant_protocol(-1.0, 0.0, 1.0), zero_t, options)),
        ("f=0", dfs_check(constant_protocol(0.0, 1.0, 1.0), replace(bath, include_lamb_shift=False), options)),
    ]
    ok = all(r.passed for _, r in reports)
    detail = ", ".join(
        f"{name}: psi1 {r.psi1_leakage:.1e}" + (f" sector {r.sector_leakage:.1e}" if r.sector_leakage is not None else "")
        for name, r in reports)
    return CheckResult("decoherence-free subspaces", PASS if ok else FAIL, detail)


def _check_xi_sum(protocol: Protocol) -> CheckResult:
    grid = np.linspace(0.0, protocol.duration, 101)
    lr = integrate_lr(protocol.g0, protocol.fields, grid)
    worst = 0.0
    for k in range(grid.size):
        xi = np.abs(matrix_elements_A(eigensystem(lr.gvector(k))))
        worst = max(worst, abs(xi[1, 2] ** 2 + xi[1, 3] ** 2 - 4.0))
    return CheckResult("xi23^2 + xi24^2 = 4", PASS if worst <= 1e-10 else FAIL, f"max deviation {worst:.2e}")


def _check_theta(protocol: Protocol) -> CheckResult:
    grid = np.linspace(0.0, protocol.duration, 2001)
    h = grid[1] - grid[0]
    theta = theta_series(protocol, grid)
    lr = integrate_lr(protocol.g0, protocol.fields, grid, rtol=1e-12, atol=1e-13, method="DOP853")
    worst, compared = 0.0, 0
    for (m, n), series in theta.items():
        if series.size != grid.size:
            # refined grid; keep the check on the original spacing
            stride = (series.size - 1) // (grid.size - 1)
            series = series[::stride]
        rate = -_five_point(series, h)
        for k in range(2, grid.size - 2):
            state = protocol_state(float(grid[k]), lr.gvector(k), protocol.fields)
            freq = instantaneous_frequencies(state)
            if (m, n) == (2, 3):
                alpha, xi = freq.alpha23.total, freq.xi23
            else:
                alpha, xi = freq.alpha24.total, freq.xi24
            # theta_mn bends sharply where A_mn approaches its zero
            if xi * xi < THETA_FD_XI2:
                continue
            worst = max(worst, abs(alpha - rate[k - 2]))
            compared += 1
    return CheckResult("alpha_mn = -d theta_mn / dt", PASS if worst <= 1e-6 and compared else FAIL,
                       f"max deviation {worst:.2e} over {compared} points")


def _check_special(bath: BathParams) -> CheckResult:
    xs = np.logspace(-4, 2, 121)
    ei_err = max(abs(exp_integral_Ei(x) - expi(x)) / abs(expi(x)) for x in xs)
    zero_t = BathParams(s32=bath.s32, cutoff_multiplier=bath.cutoff_multiplier)
    s_err = 0.0
    for alpha in (0.5, 1.0, 5.0, 20.0):
        closed, pv = lamb_shift_S0(alpha, zero_t, zero_t.s32), lamb_shift_pv(alpha, zero_t, zero_t.s32)
        s_err = max(s_err, abs(closed - pv) / abs(pv))
    ok = ei_err <= 1e-10 and s_err <= 1e-4
    return CheckResult("special functions", PASS if ok else FAIL,
                       f"Ei relative {ei_err:.2e}, Lamb shift vs PV {s_err:.2e}")


def _check_lamb_scope(config: ExperimentConfig, protocol: Protocol) -> Optional[CheckResult]:
    if not (config.include_lamb_shift and config.temperature > 0.0):
        return None
    state = protocol_state(0.0, protocol.g0, protocol.fields)
    try:
        rates(state, config.bath_params())
    except UnsupportedTemperatureError as e:
        return CheckResult("Lamb shift scope", XFAIL, str(e))
    return CheckResult("Lamb shift scope", FAIL, "finite-temperature Lamb shift was accepted")


def selfcheck(config: ExperimentConfig) -> List[CheckResult]:
    """Run the cross-module invariant suite; failures are part of the result."""
    params = config.protocol_params()
    results = [_check_admissibility(params)]
    if results[0].status == FAIL:
        return results

    protocol = synthesize(params)
    lamb_scope = _check_lamb_scope(config, protocol)
    bath = config.bath_params(include_lamb_shift=False) if lamb_scope is not None else config.bath_params()
    checks = [
        ("invariant residual", lambda: _check_lri(params)),
        ("propagator oracle", lambda: _check_propagator(protocol)),
        ("two-picture equivalence", lambda: _check_pictures(protocol, bath, config)),
        ("steady-state oracle", lambda: _check_steady(protocol)),
        ("swapped-denominator normalization", _check_swapped_steady),
        ("dark-state criteria", lambda: _check_dark(protocol, config)),
        ("decoherence-free subspaces", lambda: _check_dfs(protocol, bath)),
        ("xi23^2 + xi24^2 = 4", lambda: _check_xi_sum(protocol)),
        ("alpha_mn = -d theta_mn / dt", lambda: _check_theta(protocol)),
        ("special functions", lambda: _check_special(bath)),
    ]
    for name, check in checks:
        logger.debug("running check: %s", name)
        try:
            results.append(check())
        except DMMEError as e:
            results.append(CheckResult(name, FAIL, f"{type(e).__name__}: {e}"))
    if lamb_scope is not None:
        results.append(lamb_scope)
    return results


# =============================================================================
# MAIN
# =============================================================================

def _config_dict(config: ExperimentConfig) -> Dict:
    d = asdict(config)
    if d["initial_amplitudes"] is not None:
        d["initial_amplitudes"] = [[z.real, z.imag] for z in d["initial_amplitudes"]]
    return d


def _print_checks(results: Sequence[CheckResult]) -> None:
    marks = {PASS: "✓", FAIL: "✗", XFAIL: "~"}
    for r in results:
        suffix = " (expected)" if r.status == XFAIL else ""
        print(f"  {marks[r.status]} {r.name}: {r.detail}{suffix}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Driven Markovian master equation experiments")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("figure1", "Infidelity, control fields and rates"),
                            ("figure2", "Lamb shift on/off comparison"),
                            ("simulate", "Single trajectory from the configured initial state"),
                            ("steady", "Instantaneous steady states along the protocol"),
                            ("scan-g2m", "Locate the alpha32 sign-change threshold in g2m"),
                            ("selfcheck", "Run the invariant suite")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="key = value config file")
        p.add_argument("--out", default=None, help="Output directory (default: config output_dir)")
        p.add_argument("--grid", type=int, default=None, help="Time grid intervals")
        if name == "scan-g2m":
            p.add_argument("--low", type=float, default=SCAN_RANGE[0])
            p.add_argument("--high", type=float, default=SCAN_RANGE[1])
            p.add_argument("--resolution", type=float, default=SCAN_RESOLUTION)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        if args.grid is not None:
            config = config.with_overrides(grid=args.grid)
        out_dir = args.out or config.output_dir

        print("=" * 60)
        print(f"DMME {args.command}")
        print("=" * 60)

        if args.command == "figure1":
            tables = run_figure1(config, out_dir)
            print(f"✓ figure 1 complete ({len(tables)} tables)")
        elif args.command == "figure2":
            tables = run_figure2(config, out_dir)
            print(f"✓ figure 2 complete ({len(tables)} tables)")
        elif args.command == "simulate":
            df, _ = run_simulation(config)
            save_table(df, out_dir, "simulate.csv")
            save_summary({"final_fidelity": _final_fidelity(df), "config": _config_dict(config)},
                         out_dir, "simulate_summary.json")
            print(f"✓ final fidelity {_final_fidelity(df):.6f}")
        elif args.command == "steady":
            df = run_steady(config, out_dir)
            print(f"✓ steady states at {len(df)} times")
        elif args.command == "scan-g2m":
            est = scan_alpha_sign(config, (args.low, args.high), args.resolution)
            save_summary({"threshold": est.threshold, "bracket": [est.lower, est.upper],
                          "width": est.width, "coarse": [list(p) for p in est.coarse]},
                         out_dir, "scan_g2m_summary.json")
            print(f"✓ g2m threshold {est.threshold:.6f} (bracket width {est.width:.1e})")
        elif args.command == "selfcheck":
            results = selfcheck(config)
            _print_checks(results)
            save_summary({"checks": [asdict(r) for r in results]}, out_dir, "selfcheck_summary.json")
            failed = [r for r in results if r.status == FAIL]
            if failed:
                print(f"✗ {len(failed)} check(s) failed")
                return EXIT_CHECK_FAILED
            print("✓ all checks passed")
    except (IntegrationError, ToleranceError) as e:
        print(f"ERROR: numerical failure: {e}")
        return EXIT_CHECK_FAILED
    except DMMEError as e:
        print(f"ERROR: {e}")
        return EXIT_INVALID
    return EXIT_OK
