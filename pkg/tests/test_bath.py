import math

import numpy as np
import pytest
from scipy.special import expi

from dmme.bath import (
    THETA_FD_XI2,
    BathParams,
    _channel,
    closed_form_alphas,
    exp_integral_Ei,
    gamma0,
    instantaneous_frequencies,
    lamb_shift_pv,
    lamb_shift_S0,
    matrix_elements_A,
    planck_n,
    planck_n_formal,
    rates,
    theta_series,
    xi_theta,
)
from dmme.controls import ProtocolParams, Variant, ansatz_g, constant_protocol, control_fields, protocol_state
from dmme.errors import DomainError, UnsupportedTemperatureError
from dmme.invariant import PhaseAccumulator


def _state_at(params, t, fields=None):
    fields = fields or control_fields(params)
    return protocol_state(t, ansatz_g(params, t), fields)


class TestSpecialFunctions:

    def test_ei_matches_reference(self):
        for x in np.logspace(-4, 2, 61):
            assert exp_integral_Ei(x) == pytest.approx(expi(x), rel=1e-10)

    def test_ei_negative_argument(self):
        for x in (-0.5, -3.0, -20.0):
            assert exp_integral_Ei(x) == pytest.approx(expi(x), rel=1e-10)

    def test_ei_singularity(self):
        with pytest.raises(DomainError):
            exp_integral_Ei(0.0)

    def test_planck(self):
        assert planck_n(1.0, 0.0) == 0.0
        assert planck_n(1.0, 1.0) == pytest.approx(1.0 / (math.e - 1.0))
        assert planck_n_formal(-1.0, 1.0) == pytest.approx(-(planck_n(1.0, 1.0) + 1.0))
        with pytest.raises(DomainError):
            planck_n(0.0, 1.0)

    def test_gamma0(self):
        bath = BathParams()
        assert gamma0(2.0, bath, 0.1) == pytest.approx(2.0 * math.pi * 0.1 * 2.0 * math.exp(-0.1))


class TestLambShift:

    def test_reference_value(self):
        assert lamb_shift_S0(1.0, BathParams(), 0.1) == pytest.approx(1.14684, rel=1e-5)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 5.0, 20.0])
    def test_principal_value_quadrature(self, alpha):
        bath = BathParams()
        assert lamb_shift_S0(alpha, bath, 0.1) == pytest.approx(lamb_shift_pv(alpha, bath, 0.1), rel=1e-4)

    def test_zero_temperature_only(self):
        with pytest.raises(UnsupportedTemperatureError):
            lamb_shift_S0(1.0, BathParams(temperature=0.5), 0.1)


class TestFrequencies:

    def test_initial_values(self, params):
        freq = instantaneous_frequencies(_state_at(params, 0.0))
        assert freq.alpha32 == pytest.approx(88.849, abs=1e-2)
        assert freq.alpha24.total == pytest.approx(22.212, abs=1e-2)
        assert freq.xi23 ** 2 == pytest.approx(0.8)

    def test_closed_form_agrees(self, params):
        fields = control_fields(params)
        for t in np.linspace(0.0, params.period, 13):
            state = _state_at(params, t, fields)
            freq = instantaneous_frequencies(state)
            a23, a24 = closed_form_alphas(state.eig.angles, state.rates, state.f, state.J)
            assert a23 == pytest.approx(freq.alpha23.total, abs=1e-8)
            assert a24 == pytest.approx(freq.alpha24.total, abs=1e-8)

    def test_xi_sum_rule(self, params):
        fields = control_fields(params)
        for t in np.linspace(0.0, params.period, 17):
            freq = instantaneous_frequencies(_state_at(params, t, fields))
            assert freq.xi23 ** 2 + freq.xi24 ** 2 == pytest.approx(4.0, abs=1e-10)

    def test_singlet_is_dark_to_the_bath(self, eig0):
        A = matrix_elements_A(eig0)
        assert np.allclose(A[0, :], 0.0)
        assert np.allclose(A[:, 0], 0.0)

    def test_theta_and_xi(self, eig0):
        data = xi_theta(matrix_elements_A(eig0), PhaseAccumulator(np.array([0.0, 0.1, 0.2, 0.4])))
        assert data.theta[1, 2] == pytest.approx(0.2 - 0.1 + data.phi[1, 2])
        assert np.allclose(data.xi, np.abs(data.A))

    def test_alpha_is_minus_theta_rate(self, params, protocol):
        grid = np.linspace(0.0, params.period, 2001)
        h = grid[1] - grid[0]
        theta = theta_series(protocol, grid)
        fields = control_fields(params)
        compared = 0
        for (m, n), series in theta.items():
            stride = (series.size - 1) // (grid.size - 1)
            series = series[::stride]
            for k in range(40, grid.size - 2, 97):
                freq = instantaneous_frequencies(_state_at(params, grid[k], fields))
                if (m, n) == (2, 3):
                    alpha, xi = freq.alpha23.total, freq.xi23
                else:
                    alpha, xi = freq.alpha24.total, freq.xi24
                if xi * xi < THETA_FD_XI2:
                    continue
                rate = (-series[k + 2] + 8 * series[k + 1] - 8 * series[k - 1] + series[k - 2]) / (12 * h)
                assert -rate == pytest.approx(alpha, abs=1e-6)
                compared += 1
        assert compared >= 30

    def test_alpha32_continuous_at_protocol_end(self, params):
        fields = control_fields(params)
        end = instantaneous_frequencies(_state_at(params, params.period, fields))
        near = instantaneous_frequencies(_state_at(params, params.period - 1e-3, fields))
        assert end.xi23 ** 2 < 1e-6
        assert end.alpha32 == pytest.approx(near.alpha32, abs=1.0)

    def test_sin3_alpha32_continuous_at_protocol_end(self):
        p = ProtocolParams(variant=Variant.SIN3)
        fields = control_fields(p)
        end = instantaneous_frequencies(_state_at(p, p.period, fields))
        near = instantaneous_frequencies(_state_at(p, p.period - 1e-4, fields))
        assert end.alpha32 == pytest.approx(near.alpha32, rel=1e-2, abs=0.05)


class TestRates:

    def test_zero_temperature(self, params, bath):
        r = rates(_state_at(params, 0.0), bath)
        freq = instantaneous_frequencies(_state_at(params, 0.0))
        assert r.gamma32 == pytest.approx(0.8 * gamma0(freq.alpha32, bath, bath.s32))
        assert r.channel32.absorption == 0.0
        assert r.channel32.emission == pytest.approx(r.gamma32)
        assert (r.channel32.lower, r.channel32.upper) == (3, 2)
        assert (r.channel24.lower, r.channel24.upper) == (2, 4)
        assert not r.reversed

    def test_rates_positive_along_protocol(self, params, bath):
        fields = control_fields(params)
        for t in np.linspace(0.0, params.period, 41)[:-1]:
            r = rates(_state_at(params, t, fields), bath)
            assert r.gamma32 > 0.0
            assert r.gamma24 > 0.0

    def test_transition_24_closes_at_protocol_end(self, params, bath):
        r = rates(_state_at(params, params.period), bath)
        assert r.gamma32 > 0.0
        assert r.gamma24 == pytest.approx(0.0, abs=1e-12)
        assert not r.reversed

    def test_resonant_channel_keeps_labels(self):
        ch = _channel(2, 4, -5.6e-14, 2.0, BathParams())
        assert not ch.reversed
        assert (ch.lower, ch.upper) == (2, 4)
        assert ch.gamma == 0.0
        assert _channel(2, 4, -1e-3, 2.0, BathParams()).reversed

    def test_finite_temperature_detailed_balance(self, params):
        bath = BathParams(temperature=20.0)
        r = rates(_state_at(params, 0.4), bath)
        for ch in r.channels:
            n = planck_n(abs(ch.alpha), bath.temperature)
            assert ch.emission == pytest.approx(ch.gamma * (n + 1.0))
            assert ch.absorption == pytest.approx(ch.gamma * n)

    def test_resonant_limit(self):
        bath = BathParams(temperature=1.0)
        p = constant_protocol(0.0, 1.0, duration=1.0)
        state = protocol_state(0.0, p.g0, p.fields)
        ch = rates(state, bath).channel24
        expected = 2.0 * math.pi * bath.s24 * math.exp(-1.0 / bath.cutoff_multiplier) * 4.0 * bath.temperature
        assert ch.absorption == pytest.approx(expected)
        assert ch.emission == pytest.approx(expected)

    def test_reversed_channel(self):
        params = ProtocolParams(g2m=1.0)
        r = rates(_state_at(params, 0.0), BathParams())
        assert r.alpha32 < 0.0
        assert r.channel32.reversed
        assert (r.channel32.lower, r.channel32.upper) == (2, 3)

    def test_lamb_shift_needs_zero_temperature(self, params):
        with pytest.raises(UnsupportedTemperatureError):
            rates(_state_at(params, 0.0), BathParams(temperature=1.0, include_lamb_shift=True))

    def test_lamb_shift_values(self, params):
        r = rates(_state_at(params, 0.0), BathParams(include_lamb_shift=True))
        assert r.S32 == pytest.approx(lamb_shift_S0(r.alpha32, BathParams(), 0.1))
        assert r.S24 > 0.0

    def test_invalid_bath_params(self):
        with pytest.raises(DomainError):
            BathParams(temperature=-1.0)
        with pytest.raises(DomainError):
            BathParams(cutoff_multiplier=0.0)
