"""Pulse instructions. Each has a fixed duration and a set of channels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Iterable, Union

import numpy as np

from .channels import Channel
from .pulses import PARAMETRIC_TYPES, Pulse, SampledPulse


class ChannelTypeError(TypeError):
    """An instruction was given a channel of the wrong kind."""


def _require_pulse_channel(channel: Channel, op: str) -> None:
    if not isinstance(channel, Channel):
        raise ChannelTypeError(f"{op}: expected a Channel, got {channel!r}")
    if not channel.is_pulse_channel:
        raise ChannelTypeError(f"{op} cannot target acquire channel {channel}")


def _require_duration(duration, op: str) -> int:
    if not isinstance(duration, (int, np.integer)) or isinstance(duration, bool) or duration < 0:
        raise ValueError(f"{op}: duration must be a nonnegative integer, got {duration!r}")
    return int(duration)


@dataclass(frozen=True)
class Play:
    pulse: Pulse
    channel: Channel

    def __post_init__(self):
        if not isinstance(self.pulse, (SampledPulse, *PARAMETRIC_TYPES)):
            raise TypeError(f"Play needs a pulse, got {type(self.pulse).__name__}")
        _require_pulse_channel(self.channel, "Play")

    @property
    def duration(self) -> int:
        return self.pulse.duration

    @property
    def channels(self) -> FrozenSet[Channel]:
        return frozenset((self.channel,))


@dataclass(frozen=True)
class Delay:
    duration: int
    channel: Channel

    def __post_init__(self):
        object.__setattr__(self, "duration", _require_duration(self.duration, "Delay"))
        if not isinstance(self.channel, Channel):
            raise ChannelTypeError(f"Delay: expected a Channel, got {self.channel!r}")

    @property
    def channels(self) -> FrozenSet[Channel]:
        return frozenset((self.channel,))


@dataclass(frozen=True)
class ShiftPhase:
    phase: float
    channel: Channel

    def __post_init__(self):
        object.__setattr__(self, "phase", float(self.phase))
        _require_pulse_channel(self.channel, "ShiftPhase")

    duration = 0

    @property
    def channels(self) -> FrozenSet[Channel]:
        return frozenset((self.channel,))


@dataclass(frozen=True)
class SetFrequency:
    frequency: float
    channel: Channel

    def __post_init__(self):
        object.__setattr__(self, "frequency", float(self.frequency))
        if not np.isfinite(self.frequency):
            raise ValueError("SetFrequency: frequency must be finite")
        _require_pulse_channel(self.channel, "SetFrequency")

    duration = 0

    @property
    def channels(self) -> FrozenSet[Channel]:
        return frozenset((self.channel,))


@dataclass(frozen=True)
class Acquire:
    duration: int
    channel: Channel
    register: int

    def __post_init__(self):
        object.__setattr__(self, "duration", _require_duration(self.duration, "Acquire"))
        if not isinstance(self.channel, Channel) or self.channel.is_pulse_channel:
            raise ChannelTypeError(f"Acquire needs an acquire channel, got {self.channel!r}")
        if not isinstance(self.register, (int, np.integer)) or self.register < 0:
            raise ValueError(f"Acquire: memory slot must be a nonnegative integer, got {self.register!r}")
        object.__setattr__(self, "register", int(self.register))

    @property
    def channels(self) -> FrozenSet[Channel]:
        return frozenset((self.channel,))


@dataclass(frozen=True)
class Barrier:
    """Zero-duration fence: later appends on these channels start no earlier."""

    channel_set: FrozenSet[Channel]

    def __init__(self, channels: Iterable[Channel]):
        chans = frozenset(channels)
        if not chans or not all(isinstance(c, Channel) for c in chans):
            raise ChannelTypeError("Barrier needs a nonempty set of channels")
        object.__setattr__(self, "channel_set", chans)

    duration = 0

    @property
    def channels(self) -> FrozenSet[Channel]:
        return self.channel_set


Instruction = Union[Play, Delay, ShiftPhase, SetFrequency, Acquire, Barrier]
INSTRUCTION_TYPES = (Play, Delay, ShiftPhase, SetFrequency, Acquire, Barrier)
