import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import main_ring
from optoring.elimination import effective_liouvillian, sigma_drift
from optoring.errors import DomainError, InstabilityError
from optoring.meanfield import solve_mean_field
from optoring.model import uniform_ring_params
from optoring.ring import (NEAR_THRESHOLD_POPULATION, RingParams, current_operator_coefficients,
                           current_range, dispersion, dispersion_first_order, effective_rates,
                           hopping_amplitudes, k_rate, ring_spectrum, stability, steady_state)


def test_hoppings_vanish_without_coupling():
    assert np.all(hopping_amplitudes(8, 0.0, -1.0, 0.2, 0.1, 1.0, +1) == 0)


@pytest.mark.parametrize("sign", [1, -1])
def test_hoppings_without_photon_hopping(sign):
    G, dt, gc = 0.02, -0.9, 0.1
    jp = hopping_amplitudes(8, G, dt, 0.0, gc, 1.0, sign)
    x = sign + dt
    assert jp[0] == pytest.approx(G ** 2 * x / (x ** 2 + gc ** 2 / 4), rel=1e-14)
    assert np.abs(jp[1:]).max() <= 1e-14 * abs(jp[0])


def test_hoppings_sign_structure_changes_across_sideband():
    # At J/gamma_c = 2 the nearest-neighbour amplitude flips sign as the
    # detuning crosses the anti-Stokes band.
    signs = {np.sign(hopping_amplitudes(8, 0.02, dt, 0.2, 0.1, 1.0, +1)[1])
             for dt in np.linspace(-1.5, -0.5, 101)}
    assert signs == {-1.0, 1.0}


def test_hoppings_symmetric_in_distance():
    jp = hopping_amplitudes(8, 0.02, -1.1, 0.2, 0.1, 1.0, +1)
    assert np.allclose(jp[1:], jp[1:][::-1], atol=1e-18)


def test_k_rate_peak():
    G, gc = 0.02, 1.0
    k, phi, J, dt = 0.7, 0.3, 0.2, -0.5
    omega = -J * np.cos(k + phi) - dt
    assert k_rate(k, omega, phi, G, dt, J, gc) == pytest.approx(4 * G ** 2 / gc)


def test_k_rate_flat_without_hopping():
    r = k_rate(np.linspace(0, 6, 13), 1.0, 0.4, 0.02, -1.0, 0.0, 0.1)
    assert np.ptp(r) == 0


@pytest.mark.parametrize("Jr", [0.5, 1, 2, 4])
def test_gain_and_loss_peaks(Jr):
    rp = main_ring(J=Jr * 0.1)
    k = np.linspace(-np.pi, np.pi, 2001)
    gain = k_rate(-k, -1.0, rp.phi, rp.G_mag, 1.0 - rp.J, rp.J, rp.gamma_c)
    loss = k_rate(k, 1.0, rp.phi, rp.G_mag, -1.0 - rp.J, rp.J, rp.gamma_c)
    assert k[np.argmax(gain)] == pytest.approx(rp.phi, abs=2e-3)
    assert k[np.argmax(loss)] == pytest.approx(-rp.phi, abs=2e-3)
    assert not np.allclose(loss, loss[::-1])


def test_dispersion_even_without_phase():
    rp = main_ring(phi=0.0)
    k = rp.k_grid
    assert np.allclose(dispersion(rp, k), dispersion(rp, -k), atol=1e-16)


def test_dispersion_flat_without_coupling():
    assert np.all(dispersion(main_ring(g=0.0)) == 1.0)


def test_dispersion_minimum_location():
    # Resolved sideband with J << gamma_c: minimum where cos(k + phi) = -1.
    rp = main_ring(J=0.005, delta_tilde=-1.005)
    assert rp.k_grid[np.argmin(dispersion(rp))] == pytest.approx(np.pi - rp.phi)
    assert rp.k_grid[np.argmin(dispersion_first_order(rp))] == pytest.approx(np.pi - rp.phi)


def test_dispersion_first_order_accuracy():
    rp = main_ring(J=0.001, delta_tilde=-1.001, gamma_c=0.1)
    exact, approx = dispersion(rp), dispersion_first_order(rp)
    spread = np.ptp(exact)
    assert np.abs((exact - exact.mean()) - (approx - approx.mean())).max() <= 0.1 * spread


def test_rates_without_coupling():
    down, up = effective_rates(main_ring(g=0.0))
    assert np.allclose(down, 1e-3 * 101) and np.allclose(up, 1e-3 * 100)


def test_rates_peaked_near_minus_phi():
    rp = main_ring(J=0.2, delta_tilde=-1.2)
    k = np.linspace(-np.pi, np.pi, 801)
    down, _ = effective_rates(rp, k)
    assert k[np.argmax(down)] == pytest.approx(-rp.phi, abs=1e-2)


def test_vacuum_bath_populations_vanish():
    rep = steady_state(main_ring(g=0.0, nbar=0.0))
    assert np.all(rep.populations_k == 0)


def test_stability_without_coupling():
    flags, ok = stability(main_ring(g=0.0))
    assert ok and flags.all()


def test_blue_sideband_unstable():
    rp = main_ring(delta_tilde=1.0 - 0.2, J=0.2)
    flags, ok = stability(rp)
    assert not ok
    with pytest.raises(InstabilityError) as exc:
        steady_state(rp)
    assert len(exc.value.unstable) == int((~flags).sum())


def test_ring_spectrum_fields(ring_main):
    spec = ring_spectrum(ring_main)
    assert spec.overall_stable
    assert np.all(ring_main.k_grid == spec.k_grid)
    down, up = effective_rates(ring_main)
    assert np.all(spec.Gamma_down_k == down) and np.all(spec.Gamma_up_k == up)
    assert np.all(k_rate(spec.k_grid, 1.0, ring_main.phi, ring_main.G_mag,
                         ring_main.delta_tilde, ring_main.J, ring_main.gamma_c) > 0)


def test_no_phase_no_current():
    rep = steady_state(main_ring(phi=0.0))
    assert abs(rep.Q_C) <= 1e-12 and np.abs(rep.Q_p).max() <= 1e-12


def test_no_coupling_thermal_state():
    rep = steady_state(main_ring(g=0.0))
    assert np.allclose(rep.populations_k, 100.0, atol=1e-12)
    assert np.abs(rep.sigma - 100 * np.eye(8)).max() <= 1e-12
    assert rep.Q_C == 0


def test_current_weights_single_term():
    rp = main_ring(phi=np.pi / 4)
    jp = np.zeros(8)
    jp[1] = 0.3
    w = current_operator_coefficients(rp, jp, np.zeros(8))
    assert np.allclose(w, -0.3 * np.sin(rp.k_grid + np.pi / 4), atol=1e-16)


def test_current_weights_odd_without_phase():
    rp = main_ring(phi=0.0)
    w = current_operator_coefficients(rp)
    n = 1.0 + np.cos(rp.k_grid)
    assert abs(w @ n) <= 1e-18


def test_current_range():
    assert current_range(8).tolist() == [1, 2, 3]
    assert current_range(7).tolist() == [1, 2, 3]
    assert current_range(2).tolist() == []


def test_report_invariants(ring_main):
    rep = steady_state(ring_main)
    assert rep.Q_C == rep.Q_p.sum()
    assert np.abs(rep.sigma - rep.sigma.conj().T).max() <= 1e-12
    assert np.linalg.eigvalsh(rep.sigma).min() >= -1e-10
    assert np.all(np.abs(rep.g1) <= 1 + 1e-10)
    assert np.all(np.diag(rep.g1) == 1)
    assert rep.Q_C_normalized == pytest.approx(rep.Q_C / 1e-3)
    assert not rep.near_threshold.any()


def test_gauge_parity(ring_main):
    a = steady_state(ring_main)
    b = steady_state(ring_main.replace(phi=-ring_main.phi))
    assert b.Q_C == -a.Q_C
    assert np.allclose(b.sigma, a.sigma.T, atol=1e-12)


def test_translation_invariance(ring_main):
    from optoring.benchmark import bond_currents
    spec = ring_spectrum(ring_main)
    flows = bond_currents(steady_state(ring_main).sigma, spec.J_p_plus, spec.J_p_minus,
                          ring_main.phi)
    assert np.abs(flows - flows[:, :1]).max() <= 1e-12


def test_steady_state_is_stationary(ring_main):
    params = ring_main.to_model()
    eff = effective_liouvillian(params, solve_mean_field(params))
    X, Y, Q = sigma_drift(eff)
    sigma = steady_state(ring_main).sigma
    # d<n_l>/dt from the full effective Lindbladian
    rate = np.diag(X @ sigma + sigma @ Y + Q)
    assert np.abs(rate).max() <= 1e-10 * np.abs(Q).max()


def test_near_threshold_flag():
    rp = main_ring(delta_tilde=1.0 - 0.2, J=0.2)
    # walk towards the instability from the stable side
    for dt in np.linspace(-0.5, 1.0, 3001):
        q = rp.replace(delta_tilde=dt)
        if not stability(q)[1]:
            break
        last = q
    rep = steady_state(last.replace(delta_tilde=last.delta_tilde))
    assert rep.populations_k.max() > 0
    assert rep.near_threshold.dtype == bool
    assert NEAR_THRESHOLD_POPULATION == 1e6


def test_from_model_round_trip(ring_main):
    params = ring_main.to_model()
    assert RingParams.from_model(params, solve_mean_field(params)) == ring_main


def test_from_model_rejects_non_uniform():
    p = uniform_ring_params(4, g=2e-3, alpha_magnitude=10.0, delta_tilde=-1.0, J=0.1,
                            gamma_c=0.1, gamma_m=1e-3, nbar=10, phi=0.0)
    p = p.replace(gamma_c=[0.1, 0.1, 0.2, 0.1])
    with pytest.raises(DomainError):
        RingParams.from_model(p, solve_mean_field(p))


@settings(max_examples=40, deadline=None)
@given(L=st.integers(3, 12), n=st.integers(0, 11), dt=st.floats(-1.6, -0.4),
       Jr=st.floats(0.0, 4.0), G=st.floats(0.0, 0.03))
def test_populations_positive_when_stable(L, n, dt, Jr, G):
    rp = RingParams(L, 2 * np.pi * (n % L) / L, G / 10, 10.0, dt, Jr * 0.1, 0.1, 1e-3, 50.0)
    if not stability(rp)[1]:
        return
    rep = steady_state(rp)
    assert np.all(rep.populations_k >= 0)
    assert np.all(np.abs(rep.g1) <= 1 + 1e-10)
