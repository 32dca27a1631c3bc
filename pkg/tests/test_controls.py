import math

import numpy as np
import pytest

from dmme.algebra import system_hamiltonian
from dmme.bath import instantaneous_frequencies
from dmme.controls import (
    ControlFields,
    Orientation,
    ProtocolParams,
    Variant,
    adiabatic_alphas,
    adiabatic_g,
    adiabatic_xi,
    ansatz_g,
    ansatz_g_dot,
    boundary_g,
    check_admissible,
    constant_protocol,
    control_fields,
    control_fields_sin3,
    cos2_field_closed_form,
    hamiltonian_energies,
    protocol_state,
    synthesize,
)
from dmme.errors import AdmissibilityError, DomainError
from dmme.invariant import eigensystem, g_rhs


class TestBoundary:

    def test_default_boundary(self):
        start, end, lam3 = boundary_g(1.0, math.sqrt(0.1))
        assert start.g1 == pytest.approx(-4.0 / 3.0)
        assert start.g6 == pytest.approx(1.0)
        assert end.g1 == 0.0
        assert end.g6 == pytest.approx(5.0 / 3.0)
        assert lam3 == pytest.approx(-5.0 / 3.0)
        assert start.lambda3 == pytest.approx(lam3)

    def test_ansatz_hits_both_ends(self, params):
        start, end, _ = boundary_g(params.gamma, params.delta, params.g3)
        assert np.allclose(ansatz_g(params, 0.0).as_array(), start.as_array())
        assert np.allclose(ansatz_g(params, params.period).as_array(), end.as_array(), atol=1e-12)

    def test_final_state_is_target(self, params):
        eig = eigensystem(ansatz_g(params, params.period))
        target = np.array([1.0, 0.0, 0.0, -1.0]) / math.sqrt(2.0)
        assert abs(np.vdot(target, eig.state(3))) ** 2 == pytest.approx(1.0)

    def test_invalid_params(self):
        with pytest.raises(DomainError):
            ProtocolParams(delta=1.5)
        with pytest.raises(DomainError):
            ProtocolParams(g2m=0.0)
        with pytest.raises(ValueError):
            ProtocolParams(variant="quartic")


class TestFields:

    def test_canonical_values(self, protocol):
        f0, J0 = protocol.fields.at(0.0)
        assert J0 == pytest.approx(10.6103, abs=1e-4)
        assert f0 == pytest.approx(-22.2122, abs=1e-3)
        assert protocol.fields.at(0.7)[1] == pytest.approx(J0)

    def test_closed_form_field(self, params, protocol):
        for t in np.linspace(0.0, params.period, 9):
            assert protocol.fields.f(t) == pytest.approx(cos2_field_closed_form(params, t), rel=1e-9, abs=1e-9)

    @pytest.mark.parametrize("variant", [Variant.COS2, Variant.SIN3])
    @pytest.mark.parametrize("orientation", [Orientation.FORWARD, Orientation.REVERSED])
    def test_fields_reproduce_ansatz(self, variant, orientation):
        p = ProtocolParams(variant=variant, orientation=orientation)
        fields = control_fields(p)
        for t in np.linspace(0.05, p.period - 0.05, 7):
            f, J = fields.at(t)
            engineered = g_rhs(ansatz_g(p, t), f, J).as_array()
            assert np.allclose(engineered, ansatz_g_dot(p, t).as_array(), atol=1e-10)

    def test_sin3_fields(self):
        p = ProtocolParams(variant=Variant.SIN3)
        fields = control_fields_sin3(p)
        t = 0.4
        expected_J = -3.0 * p.g1_0 * p.omega_e * math.sin(p.omega_e * t) / (4.0 * math.pi * p.g2m)
        assert fields.J(t) == pytest.approx(expected_J)
        assert fields.f(0.0) == pytest.approx(p.g2m * p.omega_e / (2.0 * ansatz_g(p, 0.0).g6))

    def test_sin3_requires_variant(self, params):
        with pytest.raises(DomainError):
            control_fields_sin3(params)


class TestAdmissibility:

    def test_large_g2m_rejected(self):
        p = ProtocolParams(g2m=2.0)
        with pytest.raises(AdmissibilityError) as info:
            check_admissible(p)
        assert 0.0 < info.value.t < p.period
        with pytest.raises(AdmissibilityError):
            synthesize(p)

    def test_scan_range_is_admissible(self):
        for m in (0.1, 0.6, 1.0):
            check_admissible(ProtocolParams(g2m=m))

    def test_protocol_state(self, params, protocol):
        state = protocol_state(0.3, ansatz_g(params, 0.3), protocol.fields)
        assert np.allclose(state.g_dot.as_array(), ansatz_g_dot(params, 0.3).as_array(), atol=1e-10)


class TestAdiabaticLimit:

    def test_energies(self):
        f, J = -1.0, 0.5
        eps = np.array(hamiltonian_energies(f, J))
        assert np.allclose(np.sort(eps), np.linalg.eigvalsh(system_hamiltonian(f, J)))

    def test_invariant_commutes_and_psi3_is_ground(self):
        f, J = -0.7, 0.4
        g = adiabatic_g(f, J)
        assert np.allclose(g_rhs(g, f, J).as_array(), 0.0)
        psi3 = eigensystem(g).state(3)
        E = hamiltonian_energies(f, J)[2]
        assert np.allclose(system_hamiltonian(f, J) @ psi3, E * psi3)

    def test_alphas_match_decomposition(self):
        f, J = -0.7, 0.4
        state = protocol_state(0.0, adiabatic_g(f, J), ControlFields.constant(f, J))
        freq = instantaneous_frequencies(state)
        a23, a24 = adiabatic_alphas(f, J)
        assert freq.alpha23.total == pytest.approx(a23)
        assert freq.alpha24.total == pytest.approx(a24)
        xi23, xi24 = adiabatic_xi(f, J)
        assert freq.xi23 == pytest.approx(xi23)
        assert freq.xi24 == pytest.approx(xi24)

    def test_xi_limits(self):
        assert adiabatic_xi(-1.0, 0.0) == pytest.approx((math.sqrt(2.0), math.sqrt(2.0)))
        assert adiabatic_xi(0.0, 1.0) == pytest.approx((0.0, 2.0), abs=1e-12)

    def test_degenerate_limit(self):
        with pytest.raises(DomainError):
            adiabatic_g(0.0, 0.0)
        with pytest.raises(DomainError):
            constant_protocol(-1.0, 0.0, duration=0.0)
