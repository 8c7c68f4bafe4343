"""Pulse program intermediate representation."""

from .channels import (
    AcquireChannel,
    Channel,
    ChannelKind,
    ControlChannel,
    DriveChannel,
    MeasureChannel,
    parse_channel,
)
from .instructions import (
    Acquire,
    Barrier,
    ChannelTypeError,
    Delay,
    Instruction,
    Play,
    SetFrequency,
    ShiftPhase,
)
from .pulses import (
    Constant,
    Drag,
    Gaussian,
    GaussianSquare,
    PulseError,
    SampledPulse,
    sample_parametric,
    samples,
    time_averaged_amplitude,
)
from .schedule import Diagnostic, OverlapError, Schedule, append, insert, shift, validate

__all__ = [
    "Acquire",
    "AcquireChannel",
    "Barrier",
    "Channel",
    "ChannelKind",
    "ChannelTypeError",
    "Constant",
    "ControlChannel",
    "Delay",
    "Diagnostic",
    "Drag",
    "DriveChannel",
    "Gaussian",
    "GaussianSquare",
    "Instruction",
    "MeasureChannel",
    "OverlapError",
    "Play",
    "PulseError",
    "SampledPulse",
    "Schedule",
    "SetFrequency",
    "ShiftPhase",
    "append",
    "insert",
    "parse_channel",
    "sample_parametric",
    "samples",
    "shift",
    "time_averaged_amplitude",
    "validate",
]
