import math

import numpy as np
import pytest
from scipy.special import gammaln

from djcm.dynamics import (
    AmplitudeState,
    ModelParams,
    closed_form_series,
    evolve_closed_form,
    evolve_ode_oracle,
    max_amplitude_deviation,
    mode_coefficients,
    norm,
)
from djcm.errors import (
    IntegrationFailureError,
    InvalidParameterError,
    PhysicsValidationError,
)
from djcm.field_states import (
    coherent_distribution,
    squeezed_distribution,
    thermal_distribution,
)
from djcm.nonlinearity import Nonlinearity

F_ID = Nonlinearity.identity()
F_SQ = Nonlinearity.sqrt_n()


def closed_states(params, f, dist, t_grid, initial_amplitudes=None):
    exc, gnd = closed_form_series(params, f, dist, t_grid, initial_amplitudes)
    return [
        AmplitudeState(time=float(t), excited=exc[i], ground=gnd[i], k=params.k)
        for i, t in enumerate(t_grid)
    ]


# ---------------------------------------------------------------------------
# parameter validation
# ---------------------------------------------------------------------------


def test_stark_requires_two_photon():
    with pytest.raises(PhysicsValidationError, match="k=2"):
        ModelParams(k=1, beta1=0.3)
    with pytest.raises(PhysicsValidationError, match="k=2"):
        ModelParams(k=3, beta2=0.1)
    # legal for k=2
    p = ModelParams(k=2, beta1=0.1, beta2=0.1)
    assert p.beta1 == 0.1


def test_params_domain_checks():
    with pytest.raises(PhysicsValidationError):
        ModelParams(k=0)
    with pytest.raises(PhysicsValidationError):
        ModelParams(gamma=0.0)
    with pytest.raises(PhysicsValidationError):
        ModelParams(mu=-0.1)
    with pytest.raises(PhysicsValidationError):
        ModelParams(nu=-1.0)


def test_omega_atom_implicit():
    p = ModelParams(k=2, detuning=0.5, nu=1.25)
    assert p.omega_atom == pytest.approx(0.5 + 2 * 1.25)


# ---------------------------------------------------------------------------
# mode coefficients
# ---------------------------------------------------------------------------


def test_vacuum_rabi_coefficients():
    p = ModelParams(k=1, gamma=0.7, mu=0.0)
    co = mode_coefficients(p, F_ID, 0)
    assert co.R1 == 0.0 and co.R2 == 0.0 and co.Rn == 0.0
    assert co.alpha_n == pytest.approx(0.7, rel=1e-14)
    assert co.phi_n == 0.0
    assert co.Omega_n == pytest.approx(0.35, rel=1e-14)


def test_detuning_only_survives():
    p = ModelParams(k=1, gamma=1.0, detuning=0.37)
    for n in (0, 3, 17):
        assert mode_coefficients(p, F_ID, n).Rn == pytest.approx(0.37, abs=1e-15)


def test_sqrt_alpha_collapses_to_factorial_ratio():
    # [sqrt(n)]! = sqrt(n!) makes alpha_n = gamma (n+k)!/n!
    p = ModelParams(k=1, gamma=2.5)
    assert mode_coefficients(p, F_SQ, 3).alpha_n == pytest.approx(10.0, rel=1e-12)


def test_mode_coefficients_pinned_case():
    # direct substitution, high-precision reference values
    p = ModelParams(k=2, gamma=1.0, mu=0.0, chi=0.01, beta1=0.1, beta2=0.1)
    co = mode_coefficients(p, F_SQ, 2)
    assert co.R1 == pytest.approx(0.44, rel=1e-12)
    assert co.R2 == pytest.approx(3.04, rel=1e-12)
    assert co.Rn == pytest.approx(-2.6, rel=1e-12)
    assert co.alpha_n == pytest.approx(12.0, rel=1e-12)
    assert co.phi_n == pytest.approx(1.74, rel=1e-12)
    assert co.Omega_n == pytest.approx(6.139218191268331, rel=1e-12)


def test_rn_is_difference_and_omega_definition():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = ModelParams(
            k=2,
            gamma=float(rng.uniform(0.1, 3.0)),
            mu=float(rng.uniform(0.0, 1.0)),
            detuning=float(rng.uniform(-2.0, 2.0)),
            chi=float(rng.uniform(-0.05, 0.05)),
            beta1=float(rng.uniform(-0.2, 0.2)),
            beta2=float(rng.uniform(-0.2, 0.2)),
        )
        n = int(rng.integers(0, 40))
        co = mode_coefficients(p, F_SQ, n)
        assert co.Rn == co.R1 - co.R2
        assert co.Omega_n == pytest.approx(
            0.5 * math.hypot(co.Rn - p.mu, co.alpha_n), rel=1e-14
        )
        assert co.Omega_n >= abs(co.alpha_n) / 2.0


def test_linear_limit_recovers_reference_formulas():
    # f = 1: alpha_n = gamma sqrt((n+k)!/n!), Kerr terms lose their f factors
    rng = np.random.default_rng(11)
    for k in (1, 2, 3, 4):
        p = ModelParams(
            k=k,
            gamma=1.3,
            mu=0.1,
            detuning=0.7,
            chi=0.02,
            beta1=0.05 if k == 2 else 0.0,
            beta2=0.08 if k == 2 else 0.0,
        )
        for n in rng.integers(0, 51, size=8):
            n = int(n)
            co = mode_coefficients(p, F_ID, n)
            alpha_ref = 1.3 * math.exp(0.5 * (gammaln(n + k + 1) - gammaln(n + 1)))
            r1_ref = 0.35 + n * p.beta2 + 0.02 * n * (n - 1)
            r2_ref = -0.35 + (n + k) * p.beta1 + 0.02 * (n + k) * (n + k - 1)
            assert co.alpha_n == pytest.approx(alpha_ref, rel=1e-12)
            assert co.R1 == pytest.approx(r1_ref, rel=1e-12, abs=1e-12)
            assert co.R2 == pytest.approx(r2_ref, rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------------------
# closed-form evolution
# ---------------------------------------------------------------------------


def test_identity_at_t0():
    p = ModelParams(k=1, gamma=1.0, mu=0.1)
    d = coherent_distribution(2.0)
    st = evolve_closed_form(p, F_SQ, d, 0.0)
    assert np.array_equal(st.excited, np.sqrt(d.probabilities).astype(complex))
    assert np.all(st.ground == 0.0)


def test_vacuum_rabi_population():
    p = ModelParams(k=1, gamma=1.0, mu=0.0)
    d = coherent_distribution(0.0)
    for t in (0.3, 1.1, 2.9, 7.7):
        st = evolve_closed_form(p, F_ID, d, t)
        assert abs(st.excited[0]) ** 2 == pytest.approx(math.cos(t / 2.0) ** 2, abs=1e-14)


def test_negative_time_rejected():
    p = ModelParams()
    d = coherent_distribution(0.0)
    with pytest.raises(InvalidParameterError):
        evolve_closed_form(p, F_ID, d, -0.1)


@pytest.mark.parametrize(
    "params,f,dist",
    [
        (ModelParams(k=1, gamma=1.0, mu=0.1), F_ID, coherent_distribution(25.0)),
        (ModelParams(k=1, gamma=1.0, mu=0.1), F_SQ, squeezed_distribution(5.0)),
        (
            ModelParams(k=2, gamma=0.8, mu=0.1, detuning=1.0, chi=0.03, beta1=0.1, beta2=0.1),
            F_SQ,
            thermal_distribution(2.0),
        ),
    ],
)
def test_per_doublet_unitarity(params, f, dist):
    t = np.linspace(0.0, 50.0, 123)
    exc, gnd = closed_form_series(params, f, dist, t)
    resid = np.abs(np.abs(exc) ** 2 + np.abs(gnd) ** 2 - dist.probabilities[None, :])
    assert resid.max() <= 1e-12


def test_norm_equals_captured_mass():
    p = ModelParams(k=2, gamma=1.0, mu=0.1)
    d = coherent_distribution(3.0)
    for t in (0.0, 4.2, 31.0):
        st = evolve_closed_form(p, F_SQ, d, t)
        assert norm(st) == pytest.approx(d.captured_mass, abs=1e-10)


def test_norm_quadratic_scaling():
    p = ModelParams(k=1, gamma=1.0)
    d = coherent_distribution(1.0)
    st = evolve_closed_form(p, F_ID, d, 2.0)
    doubled = AmplitudeState(st.time, 2.0 * st.excited, 2.0 * st.ground, st.k)
    assert norm(doubled) == pytest.approx(4.0 * norm(st), rel=1e-12)


def test_amplitude_magnitudes_ignore_phase_constants():
    # |c| depends only on Omega, Rn - mu and alpha; the phi_n + mu/2 phase
    # factor has unit magnitude
    p = ModelParams(k=2, gamma=1.2, mu=0.3, chi=0.02, beta1=0.07, beta2=0.11)
    d = coherent_distribution(2.0)
    t = 5.3
    st = evolve_closed_form(p, F_SQ, d, t)
    from djcm.dynamics import CoefficientTable, _sin_over_omega

    co = CoefficientTable(p, F_SQ, d.n_cut)
    c0 = np.sqrt(d.probabilities)
    s = _sin_over_omega(co.Omega, t)
    mag_e = c0 * np.hypot(np.cos(co.Omega * t), 0.5 * (co.Rn - p.mu) * s)
    mag_g = c0 * 0.5 * co.alpha * np.abs(s)
    assert np.abs(st.excited) == pytest.approx(mag_e, abs=1e-14)
    assert np.abs(st.ground) == pytest.approx(mag_g, abs=1e-14)


def test_degenerate_rabi_frequency_continuity():
    # drive Omega_0 -> 0 with a custom deformation f(1) = eps at mu = Rn
    d = coherent_distribution(0.0)
    t = 3.0
    mu = 0.4

    def excited_amp(eps):
        f = Nonlinearity.from_table([eps] + [1.0] * (d.n_cut + 2))
        p = ModelParams(k=1, gamma=1.0, mu=mu, detuning=mu)
        return evolve_closed_form(p, f, d, t).excited[0]

    # analytic limit: pure phase rotation of the initial amplitude
    limit = np.exp(-1j * (0.0 + 0.5 * mu) * t)
    for eps in (1e-5, 1e-7, 1e-9):
        assert abs(excited_amp(eps) - limit) <= 2.0 * eps * t + 1e-13


def test_custom_initial_amplitudes_supported():
    p = ModelParams(k=1, gamma=1.0, mu=0.1)
    d = coherent_distribution(1.0)
    rng = np.random.default_rng(3)
    c0 = np.sqrt(d.probabilities) * np.exp(1j * rng.uniform(0, 2 * np.pi, d.n_cut + 1))
    t = np.linspace(0.0, 10.0, 21)
    ref = closed_states(p, F_SQ, d, t, initial_amplitudes=c0)
    states = evolve_ode_oracle(p, F_SQ, d, t, initial_amplitudes=c0)
    assert max_amplitude_deviation(states, ref) <= 1e-8
    # magnitudes are insensitive to the initial per-level phases
    plain = closed_states(p, F_SQ, d, t)
    assert np.abs(ref[-1].excited) == pytest.approx(np.abs(plain[-1].excited), abs=1e-13)


def test_initial_amplitudes_shape_checked():
    p = ModelParams(k=1)
    d = coherent_distribution(1.0)
    with pytest.raises(InvalidParameterError):
        evolve_closed_form(p, F_ID, d, 1.0, initial_amplitudes=np.ones(3, complex))


# ---------------------------------------------------------------------------
# ODE oracle
# ---------------------------------------------------------------------------


def test_oracle_matches_closed_form_all_terms():
    # every coefficient exercised: k=2, sqrt deformation, Kerr, both Stark
    # coefficients, detuning, modulated coupling; full scaled-time horizon
    p = ModelParams(k=2, gamma=1.0, mu=0.1, detuning=0.3, chi=0.01, beta1=0.1, beta2=0.1)
    d = coherent_distribution(1.0)
    t = np.linspace(0.0, 50.0, 101)
    states = evolve_ode_oracle(p, F_SQ, d, t)
    assert max_amplitude_deviation(states, closed_states(p, F_SQ, d, t)) <= 1e-8


@pytest.mark.parametrize(
    "k,dist_builder,nbar",
    [(3, thermal_distribution, 0.1), (4, coherent_distribution, 0.1)],
)
def test_oracle_matches_closed_form_high_k(k, dist_builder, nbar):
    p = ModelParams(k=k, gamma=1.0, mu=0.1)
    d = dist_builder(nbar)
    t = np.linspace(0.0, 2.0, 41)
    states = evolve_ode_oracle(p, F_SQ, d, t)
    assert max_amplitude_deviation(states, closed_states(p, F_SQ, d, t)) <= 1e-8


def test_oracle_squeezed_field():
    p = ModelParams(k=2, gamma=1.0, mu=0.1, chi=0.02, beta1=0.1, beta2=0.1)
    d = squeezed_distribution(0.1)
    t = np.linspace(0.0, 50.0, 101)
    states = evolve_ode_oracle(p, F_SQ, d, t)
    assert max_amplitude_deviation(states, closed_states(p, F_SQ, d, t)) <= 1e-8


def test_counter_rotating_deviation_scales_down():
    # on k-photon resonance mu = R_0 the kept term is static and the
    # discarded one rotates at mu + R_0; its imprint shrinks as ~alpha/(mu+R_0)
    d = coherent_distribution(0.0)
    devs = {}
    for drive in (20.0, 80.0):
        p = ModelParams(k=1, gamma=1.0, mu=drive, detuning=drive)
        t = np.linspace(0.0, 30.0, 61)
        states = evolve_ode_oracle(p, F_ID, d, t, include_counter_rotating=True)
        devs[drive] = max_amplitude_deviation(states, closed_states(p, F_ID, d, t))
    assert devs[20.0] < 0.1
    assert devs[80.0] < devs[20.0]
    # scale check: deviation is of order alpha/(mu+R), not orders off
    assert devs[20.0] > 1.0 / 40.0 * 0.2


def test_rwa_flag_off_is_default_equation():
    # with mu = 0 and Rn = 0 the counter-rotating and rotating terms merge,
    # so the pre-RWA system is cos(0 t)-driven with doubled coupling
    p = ModelParams(k=1, gamma=1.0, mu=0.0)
    d = coherent_distribution(0.0)
    t = np.linspace(0.0, 6.0, 31)
    states = evolve_ode_oracle(p, F_ID, d, t, include_counter_rotating=True)
    # doubled coupling: population cos^2(gamma t) instead of cos^2(gamma t / 2)
    for st in states:
        assert abs(st.excited[0]) ** 2 == pytest.approx(math.cos(st.time) ** 2, abs=1e-8)


def test_tiny_coupling_keeps_amplitudes_constant():
    p = ModelParams(k=1, gamma=1e-12, mu=0.1)
    d = coherent_distribution(1.0)
    t = np.linspace(0.0, 20.0, 11)
    exc, gnd = closed_form_series(p, F_SQ, d, t)
    assert np.max(np.abs(np.abs(exc) - np.sqrt(d.probabilities)[None, :])) <= 1e-10
    assert np.max(np.abs(gnd)) <= 1e-10


def test_oracle_grid_validation():
    p = ModelParams()
    d = coherent_distribution(0.0)
    with pytest.raises(InvalidParameterError):
        evolve_ode_oracle(p, F_ID, d, [1.0, 2.0])
    with pytest.raises(InvalidParameterError):
        evolve_ode_oracle(p, F_ID, d, [0.0, 2.0, 1.0])


def test_integration_failure_reports_doublet_and_time():
    # detuning of 1e9 needs more than 2^24 steps for the first 10-unit segment
    p = ModelParams(k=1, gamma=1.0, mu=0.0, detuning=1e9)
    d = coherent_distribution(0.0)
    with pytest.raises(IntegrationFailureError) as err:
        evolve_ode_oracle(p, F_ID, d, [0.0, 10.0])
    assert err.value.n == 0
    assert err.value.t == pytest.approx(10.0)
