"""Lower a schedule to per-channel sample streams with frame tracking.

Each pulse channel carries a frame ``(f, phi)``. A ``Play`` starting at
cycle ``t0`` uses the frame values at ``t0`` for its whole length and emits

    D[t0 + j] = Re(exp(1j * (2*pi*f*(t0 + j)*dt + phi)) * d[j])

The carrier phase is referenced to absolute time, so ``SetFrequency`` never
resets accumulated carrier phase. Zero-duration instructions sharing a
timestamp apply in schedule entry order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .ir.channels import Channel
from .ir.instructions import Acquire, Play, SetFrequency, ShiftPhase
from .ir.pulses import samples as pulse_samples
from .ir.schedule import Schedule


class CodegenError(ValueError):
    pass


@dataclass(frozen=True)
class Frame:
    frequency: float
    phase: float = 0.0


@dataclass
class ChannelProgram:
    """Sample stream for one channel over the whole block.

    ``samples`` holds the frame-rotated envelope ``exp(1j*phi) * d`` per
    cycle, ``frequency`` the carrier frequency in effect for that cycle, and
    ``output`` the real signal of the module docstring.
    """

    channel: Channel
    samples: np.ndarray
    frequency: np.ndarray
    output: np.ndarray
    acquire_windows: List[Tuple[int, int, int]] = field(default_factory=list)

    @property
    def duration(self) -> int:
        return len(self.samples)


def _frame_events(schedule: Schedule, channel: Channel):
    return [
        (t, inst)
        for t, inst in schedule.timed()
        if channel in inst.channels and isinstance(inst, (ShiftPhase, SetFrequency, Play, Acquire))
    ]


def lower(
    schedule: Schedule,
    dt: float,
    initial_frequencies: Mapping[Channel, float],
    channels: Optional[Mapping[Channel, object]] = None,
) -> Dict[Channel, ChannelProgram]:
    """Resolve ``schedule`` into one :class:`ChannelProgram` per channel.

    Args:
        schedule: the block to lower.
        dt: cycle time in seconds.
        initial_frequencies: starting frame frequency (Hz) of every pulse
            channel that the schedule uses.
        channels: optional extra channels to emit (all zeros if unused).
    """
    if dt <= 0:
        raise CodegenError("dt must be positive")
    n = schedule.duration
    used = set(schedule.channels) | set(channels or ())
    cycles = np.arange(n)
    programs: Dict[Channel, ChannelProgram] = {}
    for ch in sorted(used):
        stream = np.zeros(n, dtype=complex)
        freq = np.zeros(n)
        windows: List[Tuple[int, int, int]] = []
        if ch.is_pulse_channel:
            if ch not in initial_frequencies:
                raise CodegenError(f"no initial frequency for {ch}")
            f = float(initial_frequencies[ch])
            phi = 0.0
            freq[:] = f
            played = []
            for t, inst in _frame_events(schedule, ch):
                if isinstance(inst, ShiftPhase):
                    phi += inst.phase
                elif isinstance(inst, SetFrequency):
                    f = inst.frequency
                    freq[t:] = f
                elif isinstance(inst, Play):
                    env = pulse_samples(inst.pulse)
                    stream[t : t + len(env)] = np.exp(1j * phi) * env
                    played.append((t, t + len(env), f))
            # a play keeps the frequency it started with
            for lo, hi, f_play in played:
                freq[lo:hi] = f_play
        else:
            for t, inst in _frame_events(schedule, ch):
                if isinstance(inst, (ShiftPhase, SetFrequency)):
                    raise CodegenError(f"frame instruction on acquire channel {ch}")
                if isinstance(inst, Acquire):
                    windows.append((t, inst.duration, inst.register))
        carrier = np.exp(1j * 2 * np.pi * freq * cycles * dt)
        output = np.real(carrier * stream)
        programs[ch] = ChannelProgram(ch, stream, freq, output, windows)
    return programs


def frame_trace(
    schedule: Schedule, channel: Channel, initial_frequency: float = 0.0
) -> List[Tuple[int, float, float]]:
    """Piecewise-constant frame history as ``(time, frequency, phase)`` segments."""
    if not channel.is_pulse_channel:
        raise CodegenError(f"{channel} has no frame")
    f, phi = float(initial_frequency), 0.0
    trace: List[Tuple[int, float, float]] = [(0, f, phi)]
    for t, inst in _frame_events(schedule, channel):
        if isinstance(inst, ShiftPhase):
            phi += inst.phase
        elif isinstance(inst, SetFrequency):
            f = inst.frequency
        else:
            continue
        if trace[-1][0] == t:
            trace[-1] = (t, f, phi)
        else:
            trace.append((t, f, phi))
    return trace
