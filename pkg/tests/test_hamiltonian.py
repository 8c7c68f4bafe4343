import numpy as np
import pytest
from scipy.linalg import expm

from pulseforge import quantum as qm
from pulseforge.cr import average_amplitude, build_cr, calibrate_cr_phase, cr_rotation_time
from pulseforge.gates import cr_entry
from pulseforge.hamiltonian import (
    REPORTED,
    BranchCutError,
    basis_operator,
    coefficients_from_superop,
    extract_coefficients,
    fit_third_order,
    generator,
    model_process_fidelity,
    solve_pi_half_amplitude,
    third_order_zx,
)
from pulseforge.sim import evolve_superoperator
from pulseforge.sim.devices import zx_test_backend

J, LAM, DELTA, ANHARM = 1.87e6, -271.2e6, 115e6, -319.7e6
T_CR = 848 * 0.222e-9


def random_hamiltonian(rng, scale=2 * np.pi * 1e6):
    return {lbl: scale * rng.normal() for lbl in qm.pauli_labels(2) if lbl != "II"}


def test_basis_is_orthonormal():
    ops = [basis_operator(lbl) for lbl in qm.pauli_labels(2)]
    gram = np.array([[np.trace(a.conj().T @ b) for b in ops] for a in ops])
    assert np.allclose(gram, np.eye(16))


def test_choi_superop_round_trip(rng):
    choi = qm.kraus_choi(qm.random_kraus(4, 3, rng))
    assert np.allclose(qm.superop_to_choi(qm.choi_to_superop(choi)), choi)
    u = qm.haar_unitary(4, rng)
    assert np.allclose(qm.choi_to_superop(qm.unitary_choi(u)), np.kron(u.conj(), u))


def test_generator_of_identity_is_zero():
    assert np.abs(generator(np.eye(16), 1e-7)).max() < 1e-12
    with pytest.raises(ValueError):
        generator(np.eye(16), 0.0)


def test_generator_round_trip(rng):
    h = sum(w * basis_operator(k) for k, w in random_hamiltonian(rng).items())
    diss = [(qm.embed(qm.SM, 0, 2), 2e4), (qm.embed(qm.Z, 1, 2), 1e4)]
    lind = qm.lindblad_superop(h, diss)
    # short enough that every phase stays on the principal branch
    t = 10e-9
    g = generator(expm(lind * t), t)
    assert np.abs(g - lind).max() <= 1e-8 * np.abs(lind).max()


def test_branch_cut_rejected():
    # ZX rotation by pi puts superoperator eigenvalues at -1
    s = qm.unitary_superop(qm.zx_rotation(np.pi))
    with pytest.raises(BranchCutError):
        generator(s, 1e-7)


def test_extract_single_term():
    c = 2 * np.pi * 3e6
    s_g = qm.hamiltonian_superop(c * basis_operator("ZX"))
    coeffs = extract_coefficients(s_g)
    assert coeffs["ZX"] == pytest.approx(c, rel=1e-12)
    assert max(abs(v) for k, v in coeffs.table.items() if k != "ZX") < 1e-6 * c
    assert set(coeffs.reported) == set(REPORTED)


def test_extract_ignores_dissipator(rng):
    w = random_hamiltonian(rng)
    h = sum(v * basis_operator(k) for k, v in w.items())
    diss = [(qm.embed(qm.Z, 0, 2), 3e4), (qm.embed(qm.SM, 1, 2), 5e4)]
    t = 50e-9
    coeffs = coefficients_from_superop(expm(qm.lindblad_superop(h, diss) * t), t)
    scale = max(abs(v) for v in w.values())
    for k, v in w.items():
        assert abs(coeffs[k] - v) <= 1e-8 * scale


def test_zx_rotation_angle(rng):
    theta = 0.7
    t = 200e-9
    coeffs = coefficients_from_superop(qm.unitary_superop(qm.zx_rotation(theta)), t)
    assert coeffs["ZX"] * t == pytest.approx(theta, rel=1e-10)
    assert model_process_fidelity(coeffs, qm.unitary_choi(qm.zx_rotation(theta)), t) == pytest.approx(1.0, abs=1e-6)


def _synthetic(amps):
    return [(a, float(third_order_zx(a, J, LAM, DELTA, ANHARM))) for a in amps]


def test_fit_recovers_parameters():
    fit = fit_third_order(_synthetic(np.linspace(0.05, 0.3, 8)), DELTA, ANHARM)
    assert fit.identifiable and fit.converged
    assert fit.J == pytest.approx(J, rel=0.01)
    assert fit.lam == pytest.approx(LAM, rel=0.01)
    assert fit.residual < 1e-20
    d = fit.to_dict()
    assert d["J"] == pytest.approx(J, rel=0.01) and len(d["stderr"]) == 2


def test_fit_is_order_invariant():
    pts = _synthetic(np.linspace(0.05, 0.3, 6))
    a = fit_third_order(pts, DELTA, ANHARM)
    b = fit_third_order(pts[::-1], DELTA, ANHARM)
    assert a.J == b.J and a.lam == b.lam


def test_linear_only_data_is_flagged():
    # a cubic term of the wrong sign has no (J, lam) preimage
    pts = [(a, 2 * np.pi * (1e6 * a + 5e6 * a**3)) for a in np.linspace(0.05, 0.3, 6)]
    fit = fit_third_order(pts, DELTA, ANHARM)
    assert not fit.identifiable
    d = fit.to_dict()
    assert d["J"] is None and d["lambda"] is None
    assert fit.zx(0.1) != 0


def test_fit_input_validation():
    with pytest.raises(ValueError):
        fit_third_order(_synthetic([0.1, 0.2, 0.3]), DELTA, ANHARM)
    with pytest.raises(ValueError):
        fit_third_order(_synthetic(np.linspace(0.05, 0.3, 5)), 0.0, ANHARM)
    with pytest.raises(ValueError):
        fit_third_order(_synthetic(np.linspace(0.05, 0.3, 5)), DELTA, -DELTA)


def test_solve_scaling():
    fit = fit_third_order(_synthetic(np.linspace(0.05, 0.3, 8)), DELTA, ANHARM)
    a1 = solve_pi_half_amplitude(fit, T_CR, 1)
    a2 = solve_pi_half_amplitude(fit, T_CR, 2)
    assert abs(fit.zx(a1)) * T_CR == pytest.approx(np.pi / 2, rel=1e-9)
    # concave model: half the rotation needs a bit less than half the amplitude
    assert 0.8 * a1 / 2 < a2 < a1 / 2
    fit_lin = fit_third_order([(a, 2 * np.pi * 4e6 * a) for a in np.linspace(0.05, 0.3, 5)], DELTA, ANHARM)
    assert solve_pi_half_amplitude(fit_lin, 2 * T_CR) == pytest.approx(solve_pi_half_amplitude(fit_lin, T_CR) / 2, rel=1e-9)


@pytest.mark.parametrize("phi0", [0.0, 0.3])
def test_phase_calibration_cancels_offset(phi0):
    b = zx_test_backend(hidden_phase=phi0)
    grid = np.linspace(-np.pi / 2, np.pi / 2, 25)
    cal = calibrate_cr_phase(b, "u1", np.linspace(0.05, 1.0, 12), grid, echo=False)
    assert abs(cal.phase + phi0) <= (grid[1] - grid[0]) / 2 + 1e-12
    # strength 4 MHz, 848 cycles: <Z> of the target first vanishes at ZX(pi/2)
    e = dict(cr_entry(b, "u1"), amp=cal.amplitude)
    avg = average_amplitude(e, cal.amplitude)
    assert 2 * np.pi * 4e6 * avg * cr_rotation_time(e, b.dt, False) == pytest.approx(np.pi / 2, rel=0.05)


def test_echo_pattern(demo_backend):
    e = cr_entry(demo_backend, "u1")
    rates = {}
    for echo in (False, True):
        s = build_cr(demo_backend, e, echo=echo)
        rates[echo] = coefficients_from_superop(evolve_superoperator(s, demo_backend), s.duration * demo_backend.dt).reported
    mhz = 2 * np.pi * 1e6
    # the echo removes the Stark shift and the crosstalk, and keeps ZX
    assert abs(rates[False]["ZI"]) > 0.05 * mhz and abs(rates[False]["IX"]) > 0.05 * mhz
    assert abs(rates[True]["ZI"]) < 1e-3 * mhz and abs(rates[True]["IX"]) < 1e-3 * mhz
    assert abs(rates[True]["ZX"]) > 0.3 * mhz
