"""Preset backends.

The cross-resonance demo device has two-level qubits at 4.857 GHz (q0,
target) and 4.972 GHz (q1, control). Its control channel ``u1`` drives the
control qubit at the target frequency and carries the effective
cross-resonance couplings directly:

    H_u1 = W * (XI + mu * ZX + eps * (cos(chi) IX + sin(chi) IY))

The detuned ``XI`` part supplies the Stark shift (ZI), ``mu`` sets the ZX
rate and ``eps`` the classical crosstalk onto the target. A hidden phase
offset on ``u1`` rotates ZX into ZY until calibrated away.
"""

from __future__ import annotations

import numpy as np

from .. import quantum as qm
from ..ir.channels import ControlChannel, DriveChannel, MeasureChannel
from ..ir.pulses import Drag, samples
from .backend import BackendModel, ReadoutIQ

DT = 0.222e-9
F_TARGET = 4.857e9
F_CONTROL = 4.972e9
ANHARMONICITY = -319.7e6
HIDDEN_PHASE = 0.166


def rotation_amplitude(angle: float, rabi: float, dt: float, duration: int = 160, sigma: float = 40) -> float:
    """Drag amplitude giving a resonant rotation ``angle`` for drive strength ``rabi`` (rad/s)."""
    area = float(np.sum(samples(Drag(duration, 1.0, sigma, 0.0)).real)) * dt
    return angle / (rabi * area)


def _qubit_calibration(rabi: float, dt: float, duration: int = 160, sigma: float = 40) -> dict:
    return {
        "duration": duration,
        "sigma": sigma,
        "beta": 0.0,
        "x_amp": rotation_amplitude(np.pi, rabi, dt, duration, sigma),
        "sx_amp": rotation_amplitude(np.pi / 2, rabi, dt, duration, sigma),
    }


def _readout(sep: float, sigma: float, tilt: float) -> ReadoutIQ:
    m0 = -sep / 2 * np.exp(1j * tilt)
    m1 = sep / 2 * np.exp(1j * tilt)
    cov = sigma**2 * np.eye(2)
    return ReadoutIQ((m0 + 0.1, m1 + 0.1), (cov, cov))


def cr_demo_backend(
    rabi: float = 2 * np.pi * 50e6,
    cr_scale: float = 2 * np.pi * 30e6,
    zx_ratio: float = 0.125,
    crosstalk: float = 0.03,
    crosstalk_angle: float = 0.6,
    hidden_phase: float = HIDDEN_PHASE,
    cr_phase: float = -HIDDEN_PHASE,
    cr_amp: float = 0.1891,
    t1: float | None = None,
    t2: float | None = None,
    substeps: int = 2,
) -> BackendModel:
    """Two-qubit backend for the cross-resonance workflow."""
    h_sys = 2 * np.pi * (F_CONTROL * qm.operator("NI") + F_TARGET * qm.operator("IN"))
    u1 = cr_scale * (
        qm.operator("XI")
        + zx_ratio * qm.operator("ZX")
        + crosstalk * (np.cos(crosstalk_angle) * qm.operator("IX") + np.sin(crosstalk_angle) * qm.operator("IY"))
    )
    dissipators = []
    for q in range(2):
        if t1:
            dissipators.append((qm.embed(qm.SM, q, 2), 1.0 / t1))
        if t2:
            # pure dephasing rate so that 1/T2 = 1/(2 T1) + gamma_phi / 2
            gphi = 2.0 / t2 - (1.0 / t1 if t1 else 0.0)
            if gphi < 0:
                raise ValueError("T2 cannot exceed 2 T1")
            dissipators.append((qm.embed(qm.Z, q, 2), gphi / 4))
    return BackendModel(
        dt=DT,
        n_qubits=2,
        h_sys=h_sys,
        control_terms={
            DriveChannel(0): rabi * qm.operator("IX"),
            DriveChannel(1): rabi * qm.operator("XI"),
            ControlChannel(1): u1,
        },
        frequencies={
            DriveChannel(0): F_TARGET,
            DriveChannel(1): F_CONTROL,
            ControlChannel(1): F_TARGET,
            MeasureChannel(0): 7.1e9,
            MeasureChannel(1): 7.2e9,
        },
        phase_offsets={ControlChannel(1): hidden_phase},
        dissipators=dissipators,
        readout=[_readout(2.0, 0.5, 0.3), _readout(1.9, 0.5, -0.4)],
        substeps=substeps,
        control_frames={ControlChannel(1): 0},
        calibration={
            "qubits": [_qubit_calibration(rabi, DT), _qubit_calibration(rabi, DT)],
            "measure": {"duration": 1200, "amp": 0.2, "sigma": 64, "square_width": 944},
            "cr": [
                {
                    "channel": "u1",
                    "control": 1,
                    "target": 0,
                    "amp": cr_amp,
                    "phase": cr_phase,
                    "duration": 848,
                    "sigma": 32,
                    "square_width": 720,
                    "echo": True,
                }
            ],
            "detuning": F_CONTROL - F_TARGET,
            "anharmonicity": ANHARMONICITY,
        },
        name="cr-demo",
    )


def zx_test_backend(hidden_phase: float = 0.0, strength: float = 2 * np.pi * 4e6, rabi: float = 2 * np.pi * 50e6) -> BackendModel:
    """Two qubits whose ``u1`` produces a pure ZX term behind a hidden phase offset."""
    h_sys = 2 * np.pi * (F_CONTROL * qm.operator("NI") + F_TARGET * qm.operator("IN"))
    return BackendModel(
        dt=DT,
        n_qubits=2,
        h_sys=h_sys,
        control_terms={
            DriveChannel(0): rabi * qm.operator("IX"),
            DriveChannel(1): rabi * qm.operator("XI"),
            ControlChannel(1): strength * qm.operator("ZX"),
        },
        frequencies={
            DriveChannel(0): F_TARGET,
            DriveChannel(1): F_CONTROL,
            ControlChannel(1): F_TARGET,
        },
        phase_offsets={ControlChannel(1): hidden_phase},
        control_frames={ControlChannel(1): 0},
        calibration={
            "qubits": [_qubit_calibration(rabi, DT), _qubit_calibration(rabi, DT)],
            "cr": [{"channel": "u1", "control": 1, "target": 0, "phase": 0.0, "duration": 848, "sigma": 32, "square_width": 720}],
        },
        name="zx-test",
    )
