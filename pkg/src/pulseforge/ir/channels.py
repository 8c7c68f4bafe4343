"""Hardware channel identifiers."""

from __future__ import annotations

import enum
import functools
import re
from dataclasses import dataclass


class ChannelKind(enum.Enum):
    DRIVE = "d"
    MEASURE = "m"
    CONTROL = "u"
    ACQUIRE = "a"


@functools.total_ordering
@dataclass(frozen=True)
class Channel:
    """A signal line addressed by kind and index.

    Drive, measure and acquire indices refer to qubits. Control channel
    indices are free-standing labels.
    """

    kind: ChannelKind
    index: int

    def __post_init__(self):
        if not isinstance(self.index, int) or isinstance(self.index, bool) or self.index < 0:
            raise ValueError(f"channel index must be a nonnegative integer, got {self.index!r}")

    @property
    def name(self) -> str:
        return f"{self.kind.value}{self.index}"

    @property
    def is_pulse_channel(self) -> bool:
        """True for channels that can transmit stimulus (d, m, u)."""
        return self.kind is not ChannelKind.ACQUIRE

    def __str__(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return f"Channel({self.name})"

    def __lt__(self, other):
        if not isinstance(other, Channel):
            return NotImplemented
        return (_SORT_ORDER[self.kind], self.index) < (_SORT_ORDER[other.kind], other.index)


_SORT_ORDER = {ChannelKind.DRIVE: 0, ChannelKind.CONTROL: 1, ChannelKind.MEASURE: 2, ChannelKind.ACQUIRE: 3}
_ALIAS = re.compile(r"^([dmua])(\d+)$")


def DriveChannel(index: int) -> Channel:
    return Channel(ChannelKind.DRIVE, index)


def MeasureChannel(index: int) -> Channel:
    return Channel(ChannelKind.MEASURE, index)


def ControlChannel(index: int) -> Channel:
    return Channel(ChannelKind.CONTROL, index)


def AcquireChannel(index: int) -> Channel:
    return Channel(ChannelKind.ACQUIRE, index)


def parse_channel(alias: str) -> Channel:
    """Parse an alias such as ``"d0"`` or ``"u12"``."""
    match = _ALIAS.match(alias.strip())
    if match is None:
        raise ValueError(f"not a channel alias: {alias!r}")
    return Channel(ChannelKind(match.group(1)), int(match.group(2)))
