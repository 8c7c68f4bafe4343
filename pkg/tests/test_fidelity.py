import numpy as np
import pytest

from pulseforge import quantum as qm
from pulseforge.cr import build_cr
from pulseforge.fidelity import (
    LocalRotations,
    average_gate_fidelity,
    build_optimized_cnot,
    optimize_local,
    process_fidelity_superop,
    target_unitary,
)
from pulseforge.gates import cr_entry, default_instmap, rz_schedule
from pulseforge.ir import ControlChannel, DriveChannel, ShiftPhase
from pulseforge.sim import evolve_superoperator, evolve_unitary

CX = qm.cx(1, 0)


def depolarizing(p, d=4):
    # (1 - p) rho + p I/d, written as a superoperator
    return (1 - p) * np.eye(d * d) + p * np.outer(qm.vec(np.eye(d)), qm.vec(np.eye(d)).conj()) / d


def haar_average(superop, u, rng, n):
    vals = []
    for _ in range(n):
        psi = qm.haar_state(4, rng)
        rho = np.outer(psi, psi.conj())
        out = qm.apply_superop(superop, rho)
        ideal = u @ psi
        vals.append(np.real(ideal.conj() @ out @ ideal))
    return np.array(vals)


def test_perfect_gate():
    u = qm.haar_unitary(4, np.random.default_rng(0))
    assert average_gate_fidelity(qm.unitary_superop(u), u) == pytest.approx(1.0, abs=1e-12)
    assert process_fidelity_superop(qm.unitary_superop(u), u) == pytest.approx(1.0, abs=1e-12)


def test_depolarizing_closed_form(rng):
    p = 0.1
    s = depolarizing(p)
    expect = 1 - p + p / 4
    assert average_gate_fidelity(s, np.eye(4)) == pytest.approx(expect, abs=1e-12)
    assert haar_average(s, np.eye(4), rng, 100).mean() == pytest.approx(expect, abs=1e-12)


def test_haar_monte_carlo(rng):
    s = qm.choi_to_superop(qm.kraus_choi(qm.random_kraus(4, 2, rng)))
    u = qm.haar_unitary(4, rng)
    vals = haar_average(s, u, rng, 10_000)
    sem = vals.std(ddof=1) / np.sqrt(vals.size)
    assert abs(vals.mean() - average_gate_fidelity(s, u)) < max(4 * sem, 1e-3)


def test_local_error_lowers_fidelity():
    v = qm.local([qm.rx(0.2), qm.ry(-0.1)])
    assert average_gate_fidelity(qm.unitary_superop(v @ CX), CX) < 1 - 1e-3


def test_unitary_invariance(rng):
    s = qm.choi_to_superop(qm.kraus_choi(qm.random_kraus(4, 3, rng)))
    u, w = qm.haar_unitary(4, rng), qm.haar_unitary(4, rng)
    sw = qm.unitary_superop(w)
    rotated = sw @ s @ sw.conj().T
    assert average_gate_fidelity(rotated, w @ u @ w.conj().T) == pytest.approx(average_gate_fidelity(s, u), abs=1e-12)


def test_input_validation():
    with pytest.raises(ValueError):
        average_gate_fidelity(np.eye(16), np.eye(2))
    with pytest.raises(ValueError):
        average_gate_fidelity(2 * np.eye(16), np.eye(4))
    with pytest.raises(ValueError):
        target_unitary("swap")
    with pytest.raises(ValueError):
        LocalRotations((0.0,) * 11)


def test_zx_dresses_into_cnot():
    zx = target_unitary("zx")
    report = optimize_local(qm.unitary_superop(zx), "cx", restarts=4, seed=1)
    assert report.f_max >= 1 - 1e-6
    assert report.f_max >= report.f_start
    assert report.f_start < 0.9
    # the angles reproduce the fidelity
    dressed = report.theta.dressed(CX)
    assert average_gate_fidelity(qm.unitary_superop(zx), dressed) == pytest.approx(report.f_max, abs=1e-9)


def test_random_local_dressing_recovered():
    rng = np.random.default_rng(3)
    pre = qm.local([qm.haar_unitary(2, rng), qm.haar_unitary(2, rng)])
    post = qm.local([qm.haar_unitary(2, rng), qm.haar_unitary(2, rng)])
    s = qm.unitary_superop(pre @ CX @ post)
    report = optimize_local(s, "cx", restarts=8, seed=0)
    assert report.f_max >= 1 - 1e-5


def test_optimizer_is_deterministic():
    s = depolarizing(0.05) @ qm.unitary_superop(target_unitary("zx"))
    a = optimize_local(s, restarts=3, seed=11)
    b = optimize_local(s, restarts=3, seed=11)
    assert a.f_max == b.f_max and a.theta == b.theta
    assert a.to_dict()["theta"] == list(a.theta.angles)


def test_virtual_z_tracks_control_channel(demo_backend):
    sched = rz_schedule(demo_backend, 0, 0.3)
    shifts = {inst.channel: inst.phase for _, inst in sched.entries if isinstance(inst, ShiftPhase)}
    assert shifts == {DriveChannel(0): 0.3, ControlChannel(1): 0.3}


def test_zero_angles_give_bare_cr(demo_backend):
    cr = build_cr(demo_backend, cr_entry(demo_backend, "u1"))
    imap = default_instmap(demo_backend, with_cx=False)
    built = build_optimized_cnot(imap, cr, LocalRotations())
    u_a = evolve_unitary(cr, demo_backend)
    u_b = evolve_unitary(built, demo_backend)
    assert abs(np.vdot(u_a, u_b)) / 4 == pytest.approx(1.0, abs=1e-10)


@pytest.mark.slow
def test_built_cnot_matches_optimum(demo_backend):
    cr = build_cr(demo_backend, cr_entry(demo_backend, "u1"))
    report = optimize_local(evolve_superoperator(cr, demo_backend), restarts=4, seed=2)
    imap = default_instmap(demo_backend, with_cx=False)
    built = build_optimized_cnot(imap, cr, report.theta)
    # trailing virtual Z gates only take effect once the frames are undone
    f = average_gate_fidelity(evolve_superoperator(built, demo_backend, virtual_z_correction=True), CX)
    assert f >= report.f_max - 0.002
