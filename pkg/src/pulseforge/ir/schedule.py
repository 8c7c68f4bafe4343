"""The Schedule: an immutable basic block of absolutely timed instructions."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Tuple, Union

from .channels import Channel, ChannelKind
from .instructions import INSTRUCTION_TYPES, Acquire, Instruction, Play


class OverlapError(ValueError):
    """Two instructions with nonzero duration occupy the same channel."""

    def __init__(self, channel: Channel, existing: Tuple[int, int], new: Tuple[int, int]):
        self.channel = channel
        self.existing = existing
        self.new = new
        super().__init__(
            f"overlap on {channel}: [{new[0]}, {new[1]}) conflicts with [{existing[0]}, {existing[1]})"
        )


Entry = Tuple[int, Instruction]


@dataclass(frozen=True)
class Schedule:
    """Ordered collection of ``(start_time, instruction)`` pairs.

    Times are integer cycles. All operations return new schedules.
    """

    entries: Tuple[Entry, ...] = ()
    name: str = ""

    def __post_init__(self):
        checked = []
        for t, inst in self.entries:
            if not isinstance(inst, INSTRUCTION_TYPES):
                raise TypeError(f"not an instruction: {inst!r}")
            if int(t) != t:
                raise ValueError(f"start time must be an integer, got {t!r}")
            if t < 0:
                raise ValueError(f"negative start time {t} for {inst!r}")
            checked.append((int(t), inst))
        object.__setattr__(self, "entries", tuple(checked))

    # --- timing queries -------------------------------------------------
    @property
    def duration(self) -> int:
        return max((t + inst.duration for t, inst in self.entries), default=0)

    @property
    def start_time(self) -> int:
        return min((t for t, _ in self.entries), default=0)

    @property
    def channels(self) -> FrozenSet[Channel]:
        out = set()
        for _, inst in self.entries:
            out |= inst.channels
        return frozenset(out)

    def ch_stop_time(self, *channels: Channel) -> int:
        wanted = set(channels)
        return max(
            (t + inst.duration for t, inst in self.entries if inst.channels & wanted),
            default=0,
        )

    def ch_start_time(self, *channels: Channel) -> int:
        wanted = set(channels)
        return min((t for t, inst in self.entries if inst.channels & wanted), default=0)

    def timed(self) -> List[Entry]:
        """Entries sorted by start time; ties keep entry order."""
        return sorted(self.entries, key=lambda e: e[0])

    def __iter__(self) -> Iterator[Entry]:
        return iter(self.timed())

    def __len__(self) -> int:
        return len(self.entries)

    def filter(self, channels: Iterable[Channel]) -> "Schedule":
        wanted = set(channels)
        return Schedule(tuple(e for e in self.entries if e[1].channels & wanted), self.name)

    # --- construction ---------------------------------------------------
    def append(self, other: Union["Schedule", Instruction], name: Optional[str] = None) -> "Schedule":
        return append(self, other, name)

    def insert(self, at: int, other: Union["Schedule", Instruction]) -> "Schedule":
        return insert(self, at, other)

    def shift(self, delta: int) -> "Schedule":
        return shift(self, delta)

    def __add__(self, other):
        return append(self, other)

    def __lshift__(self, delta: int) -> "Schedule":
        return shift(self, delta)

    def with_name(self, name: str) -> "Schedule":
        return Schedule(self.entries, name)


def _as_entries(other) -> Tuple[Entry, ...]:
    if isinstance(other, Schedule):
        return other.entries
    if isinstance(other, INSTRUCTION_TYPES):
        return ((0, other),)
    raise TypeError(f"cannot schedule {type(other).__name__}")


def _channels_of(entries) -> set:
    out = set()
    for _, inst in entries:
        out |= inst.channels
    return out


def append(schedule: Schedule, other, name: Optional[str] = None) -> Schedule:
    """Append ``other`` after the last use of any channel it shares with ``schedule``."""
    entries = _as_entries(other)
    shared = schedule.channels & _channels_of(entries)
    time = schedule.ch_stop_time(*shared) if shared else 0
    moved = tuple((t + time, inst) for t, inst in entries)
    return Schedule(schedule.entries + moved, schedule.name if name is None else name)


def _intervals(entries) -> Dict[Channel, List[Tuple[int, int]]]:
    out: Dict[Channel, List[Tuple[int, int]]] = defaultdict(list)
    for t, inst in entries:
        if inst.duration > 0:
            for ch in inst.channels:
                out[ch].append((t, t + inst.duration))
    return out


def insert(schedule: Schedule, at: int, other) -> Schedule:
    """Place ``other`` at absolute time ``at``; raise :class:`OverlapError` on conflict."""
    if at < 0:
        raise ValueError(f"insert time must be nonnegative, got {at}")
    moved = tuple((t + at, inst) for t, inst in _as_entries(other))
    existing = _intervals(schedule.entries)
    for ch, new_ivals in _intervals(moved).items():
        for lo, hi in new_ivals:
            for elo, ehi in existing.get(ch, ()):
                if lo < ehi and elo < hi:
                    raise OverlapError(ch, (elo, ehi), (lo, hi))
    return Schedule(schedule.entries + moved, schedule.name)


def shift(schedule: Schedule, delta: int) -> Schedule:
    if schedule.entries and schedule.start_time + delta < 0:
        raise ValueError(f"shift by {delta} would move entries before t=0")
    return Schedule(tuple((t + delta, inst) for t, inst in schedule.entries), schedule.name)


# --- validation -----------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    severity: str = "error"
    channel: Optional[Channel] = None
    time: Optional[int] = None

    def __str__(self) -> str:
        return f"{self.severity}: {self.kind}: {self.message}"


def validate(schedule: Schedule) -> List[Diagnostic]:
    """Check the schedule invariants; problems are returned, never raised."""
    diags: List[Diagnostic] = []
    for t, inst in schedule.entries:
        if t < 0:
            diags.append(Diagnostic("NegativeStart", f"{inst!r} starts at {t}", time=t))

    for ch, ivals in sorted(_intervals(schedule.entries).items()):
        ivals = sorted(ivals)
        for (alo, ahi), (blo, bhi) in zip(ivals, ivals[1:]):
            if blo < ahi:
                diags.append(
                    Diagnostic(
                        "OverlapError",
                        f"[{alo}, {ahi}) and [{blo}, {bhi}) overlap on {ch}",
                        channel=ch,
                        time=blo,
                    )
                )

    plays: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
    for t, inst in schedule.entries:
        if isinstance(inst, Play) and inst.channel.kind is ChannelKind.MEASURE:
            plays[inst.channel.index].append((t, t + inst.duration))
    for t, inst in schedule.timed():
        if not isinstance(inst, Acquire):
            continue
        lo, hi = t, t + inst.duration
        stim = plays.get(inst.channel.index, [])
        if not any(plo < hi and lo < phi for plo, phi in stim):
            diags.append(
                Diagnostic(
                    "MisalignedAcquire",
                    f"acquire on {inst.channel} at [{lo}, {hi}) has no overlapping "
                    f"measurement stimulus on m{inst.channel.index}",
                    channel=inst.channel,
                    time=t,
                )
            )
    return diags
