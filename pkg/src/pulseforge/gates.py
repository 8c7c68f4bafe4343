"""Default gate templates derived from a backend's calibration table.

Single-qubit gates use the virtual-Z decomposition

    u3(theta, phi, lam) = Rz(phi + pi) SX Rz(theta + pi) SX Rz(lam)

where every ``Rz(a)`` is a ``ShiftPhase(a)`` on the qubit's drive channel,
mirrored onto each control channel that follows that qubit's frame.
"""

from __future__ import annotations

from typing import Dict, List, Optional

import numpy as np

from .ir.channels import AcquireChannel, Channel, DriveChannel, MeasureChannel, parse_channel
from .ir.instructions import Acquire, Play, ShiftPhase
from .ir.pulses import Drag, GaussianSquare
from .ir.schedule import Schedule
from .scheduler import InstructionScheduleMap, register_gate


def qubit_cal(backend, qubit: int) -> dict:
    try:
        return dict(backend.calibration["qubits"][qubit])
    except (KeyError, IndexError) as exc:
        raise KeyError(f"backend has no single-qubit calibration for qubit {qubit}") from exc


def tracking_channels(backend, qubit: int) -> List[Channel]:
    """Control channels whose frame follows ``qubit``."""
    return sorted(ch for ch, q in backend.control_frames.items() if q == qubit)


def x_pulse(backend, qubit: int, kind: str = "x") -> Drag:
    cal = qubit_cal(backend, qubit)
    amp = cal["x_amp"] if kind == "x" else cal["sx_amp"]
    return Drag(int(cal["duration"]), amp, cal["sigma"], cal.get("beta", 0.0), name=f"{kind}{qubit}")


def rz_schedule(backend, qubit: int, angle: float) -> Schedule:
    entries = [(0, ShiftPhase(angle, DriveChannel(qubit)))]
    entries += [(0, ShiftPhase(angle, ch)) for ch in tracking_channels(backend, qubit)]
    return Schedule(tuple(entries), f"rz{qubit}")


def u3_schedule(backend, qubit: int, theta: float, phi: float, lam: float) -> Schedule:
    if theta == 0:
        total = phi + lam
        return rz_schedule(backend, qubit, total) if total else Schedule(name=f"u3_{qubit}")
    sx = Play(x_pulse(backend, qubit, "sx"), DriveChannel(qubit))
    sched = Schedule(name=f"u3_{qubit}")
    for part in (
        rz_schedule(backend, qubit, lam),
        sx,
        rz_schedule(backend, qubit, theta + np.pi),
        sx,
        rz_schedule(backend, qubit, phi + np.pi),
    ):
        sched = sched.append(part)
    return sched


def measure_schedule(backend, qubits, slots: Optional[Dict[int, int]] = None) -> Schedule:
    cal = backend.calibration.get("measure", {})
    dur = int(cal.get("duration", 1200))
    stim = GaussianSquare(dur, cal.get("amp", 0.2), cal.get("sigma", 64), cal.get("square_width", dur - 256), name="m")
    entries = []
    for q in qubits:
        slot = q if slots is None else slots[q]
        entries.append((0, Play(stim, MeasureChannel(q))))
        entries.append((0, Acquire(dur, AcquireChannel(q), slot)))
    return Schedule(tuple(entries), "measure")


def default_instmap(backend, with_cx: bool = True) -> InstructionScheduleMap:
    """Templates for x, sx, rz, u3, h, id, measure and (if calibrated) cx."""
    imap = InstructionScheduleMap()
    for q in range(backend.n_qubits):
        if "qubits" in backend.calibration:
            imap = register_gate(imap, "x", (q,), Schedule(((0, Play(x_pulse(backend, q, "x"), DriveChannel(q))),), "x"))
            imap = register_gate(imap, "sx", (q,), Schedule(((0, Play(x_pulse(backend, q, "sx"), DriveChannel(q))),), "sx"))
            imap = register_gate(imap, "u3", (q,), lambda t, p, l, q=q: u3_schedule(backend, q, t, p, l))
            imap = register_gate(imap, "h", (q,), u3_schedule(backend, q, np.pi / 2, 0.0, np.pi))
        imap = register_gate(imap, "rz", (q,), lambda a, q=q: rz_schedule(backend, q, a))
        imap = register_gate(imap, "id", (q,), Schedule(name="id"))
        imap = register_gate(imap, "measure", (q,), measure_schedule(backend, [q]))
    if with_cx:
        from .cr import cx_schedule

        for entry in backend.calibration.get("cr", []):
            if "amp" not in entry:
                continue
            c, t = int(entry["control"]), int(entry["target"])
            imap = register_gate(imap, "cx", (c, t), cx_schedule(backend, entry))
            imap = register_gate(imap, "cr", (c, t), lambda a, entry=entry: _cr_only(backend, entry, a))
    return imap


def _cr_only(backend, entry, amp):
    from .cr import build_cr

    return build_cr(backend, dict(entry, amp=amp))


def cr_entry(backend, channel: str) -> dict:
    for entry in backend.calibration.get("cr", []):
        if parse_channel(entry["channel"]) == parse_channel(channel):
            return dict(entry)
    raise KeyError(f"no cross-resonance calibration for {channel}")
