"""Cross-resonance sequences and their calibration.

CR1 is a single GaussianSquare on the control channel. CR2 echoes it:
``CR(+A)``, an X180 on the control qubit, ``CR(-A)``, another X180. A
barrier after each X180 keeps the second CR pulse from overlapping the echo.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gates import u3_schedule, rz_schedule, x_pulse
from .ir.channels import Channel, DriveChannel, parse_channel
from .ir.instructions import Barrier, Delay, Play
from .ir.pulses import GaussianSquare, time_averaged_amplitude
from .ir.schedule import Schedule
from .scheduler import MiniCircuit, register_gate, schedule_circuit


class CalibrationError(RuntimeError):
    pass


def cr_pulse(amp: float, phase: float = 0.0, duration: int = 848, sigma: float = 32, square_width: float = 720, name: str = "cr") -> GaussianSquare:
    return GaussianSquare(duration, amp * np.exp(1j * phase), sigma, square_width, name=name)


def build_cr1(channel: Channel, pulse: GaussianSquare) -> Schedule:
    return Schedule(name="cr1").append(Play(pulse, channel))


def build_cr2(channel: Channel, control_drive: Channel, pulse: GaussianSquare, x180) -> Schedule:
    """Echoed sequence; the CR pulses land at ``0`` and ``t_cr + pi_dur``."""
    cr_p = pulse
    cr_m = GaussianSquare(pulse.duration, -pulse.amp, pulse.sigma, pulse.square_width, name=f"{pulse.name}_m")
    t_cr = pulse.duration
    sched = Schedule(name="cr2")
    sched += Play(cr_p, channel)
    sched += Delay(t_cr, control_drive)
    sched += Play(x180, control_drive)
    sched += Barrier((channel, control_drive))
    sched += Play(cr_m, channel)
    sched += Delay(t_cr, control_drive)
    sched += Play(x180, control_drive)
    sched += Barrier((channel, control_drive))
    return sched


def _pulse_from_entry(entry: dict, amp: Optional[float] = None) -> GaussianSquare:
    return cr_pulse(
        entry["amp"] if amp is None else amp,
        entry.get("phase", 0.0),
        int(entry.get("duration", 848)),
        entry.get("sigma", 32),
        entry.get("square_width", 720),
    )


def build_cr(backend, entry: dict, amp: Optional[float] = None, echo: Optional[bool] = None) -> Schedule:
    """CR1 or CR2 for a calibration entry ``{"channel", "control", "target", "amp", "phase", ...}``."""
    channel = parse_channel(entry["channel"])
    pulse = _pulse_from_entry(entry, amp)
    echo = entry.get("echo", True) if echo is None else echo
    if not echo:
        return build_cr1(channel, pulse)
    control = int(entry["control"])
    return build_cr2(channel, DriveChannel(control), pulse, x_pulse(backend, control, "x"))


def cr_rotation_time(entry: dict, dt: float, echo: bool) -> float:
    """Time the ZX term acts: ``n_CR * t_CR`` (echo pulses excluded)."""
    return (2 if echo else 1) * int(entry.get("duration", 848)) * dt


def average_amplitude(entry: dict, amp: float) -> float:
    return time_averaged_amplitude(_pulse_from_entry(entry, amp))


def cx_schedule(backend, entry: dict) -> Schedule:
    """CNOT from a ZX(pi/2) sequence: ``(Sdg (x) Rx(-pi/2)) ZX(pi/2)``."""
    c, t = int(entry["control"]), int(entry["target"])
    sched = build_cr(backend, entry)
    sched = sched.append(rz_schedule(backend, c, -np.pi / 2))
    sched = sched.append(u3_schedule(backend, t, -np.pi / 2, -np.pi / 2, np.pi / 2))
    return sched.with_name(f"cx{c}{t}")


# --- phase calibration -------------------------------------------------------------


@dataclass
class PhaseCalibration:
    phase: float
    amplitude: float
    amplitudes: np.ndarray
    z_target: np.ndarray
    phases: np.ndarray
    y_control0: np.ndarray
    y_control1: np.ndarray

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "amplitude": self.amplitude,
            "amplitudes": self.amplitudes.tolist(),
            "z_target": self.z_target.tolist(),
            "phases": self.phases.tolist(),
            "y_control0": self.y_control0.tolist(),
            "y_control1": self.y_control1.tolist(),
        }


def _expectations(backend, instmap, entry, control_state: int, basis: str, shots, seed):
    from .sim.engine import simulate

    c, t = int(entry["control"]), int(entry["target"])
    circ = MiniCircuit(backend.n_qubits)
    if control_state:
        circ = circ.gate("x", c)
    circ = circ.gate("crcal", c, t)
    if basis == "y":
        circ = circ.gate("u3", t, params=(-np.pi / 2, 0.0, -np.pi / 2))
    circ = circ.measure(t, 0)
    res = simulate(schedule_circuit(circ, instmap), backend, shots=shots, seed=seed)
    if shots:
        ones = sum(v for k, v in res.counts.items() if k[-1] == "1")
        return 1 - 2 * ones / shots
    return res.expectation_z(0)


def calibrate_cr_phase(
    backend,
    channel: str,
    amplitudes: Sequence[float],
    phases: Sequence[float],
    echo: bool = True,
    shots: Optional[int] = None,
    seed=None,
) -> PhaseCalibration:
    """Two-stage phase calibration of a CR drive.

    Stage one sweeps the amplitude with the register in ``|00>`` and finds the
    first zero of the target's ``<Z>``. Stage two fixes that amplitude, sweeps
    the phase and records the target's ``<Y>`` for both control states. A
    sinusoid fitted to half their difference is maximized in magnitude and
    the result is snapped to the phase grid.
    """
    from .gates import cr_entry, default_instmap

    entry = cr_entry(backend, channel)
    base = default_instmap(backend, with_cx=False)
    seeds = np.random.SeedSequence(seed).spawn(2 + 2 * len(phases)) if shots else [None] * (2 + 2 * len(phases))
    amps = np.asarray(amplitudes, dtype=float)
    z = []
    for a in amps:
        e = dict(entry, amp=float(a), phase=0.0)
        imap = register_gate(base, "crcal", (int(e["control"]), int(e["target"])), build_cr(backend, e, echo=echo))
        z.append(_expectations(backend, imap, e, 0, "z", shots, seeds[0]))
    z = np.array(z)
    cross = np.nonzero((z[:-1] > 0) & (z[1:] <= 0))[0]
    if not cross.size:
        raise CalibrationError("target <Z> has no zero crossing over the amplitude sweep")
    k = cross[0]
    a_opt = float(amps[k] + (amps[k + 1] - amps[k]) * z[k] / (z[k] - z[k + 1]))

    grid = np.asarray(phases, dtype=float)
    y0, y1 = [], []
    for i, phi in enumerate(grid):
        e = dict(entry, amp=a_opt, phase=float(phi))
        imap = register_gate(base, "crcal", (int(e["control"]), int(e["target"])), build_cr(backend, e, echo=echo))
        y0.append(_expectations(backend, imap, e, 0, "y", shots, seeds[2 + 2 * i]))
        y1.append(_expectations(backend, imap, e, 1, "y", shots, seeds[3 + 2 * i]))
    y0, y1 = np.array(y0), np.array(y1)
    signal = (y0 - y1) / 2
    design = np.column_stack([np.cos(grid), np.sin(grid), np.ones_like(grid)])
    (ca, cb, _), *_ = np.linalg.lstsq(design, signal, rcond=None)
    # |ca cos + cb sin| peaks at atan2(cb, ca) modulo pi
    best = np.arctan2(cb, ca)
    candidates = best + np.pi * np.arange(-3, 4)
    inside = candidates[(candidates >= grid.min() - 1e-12) & (candidates <= grid.max() + 1e-12)]
    if inside.size:
        target = inside[np.argmin(np.abs(inside - np.mean(grid)))]
    else:
        target = grid[np.argmax(np.abs(signal))]
    phi_opt = float(grid[np.argmin(np.abs(grid - target))])
    return PhaseCalibration(phi_opt, a_opt, amps, z, grid, y0, y1)
