"""Gate-level circuits lowered to pulse schedules through an instruction-schedule map."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .ir.instructions import Acquire, Barrier
from .ir.schedule import Schedule, validate
from .ir.serialize import dump_value, schedule_from_dict, schedule_to_dict

Template = Union[Schedule, Callable[..., Schedule]]


class MissingDefinition(KeyError):
    def __init__(self, gate: str, qubits: Tuple[int, ...]):
        self.gate = gate
        self.qubits = tuple(qubits)
        super().__init__(f"no schedule registered for {gate}{list(self.qubits)}")

    def __str__(self) -> str:
        return self.args[0]


class InvalidTemplate(ValueError):
    pass


class Policy(enum.Enum):
    ALAP = "alap"
    ASAP = "asap"


@dataclass(frozen=True)
class Op:
    name: str
    qubits: Tuple[int, ...]
    params: Tuple[float, ...] = ()


@dataclass(frozen=True)
class MiniCircuit:
    """Ordered gate list on ``num_qubits`` qubits plus ``(qubit, slot)`` measurements."""

    num_qubits: int
    ops: Tuple[Op, ...] = ()
    measurements: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        ops = tuple(o if isinstance(o, Op) else Op(o[0], tuple(o[1]), tuple(o[2]) if len(o) > 2 else ()) for o in self.ops)
        ops = tuple(Op(o.name, tuple(int(q) for q in o.qubits), tuple(float(p) for p in o.params)) for o in ops)
        for o in ops:
            if any(not 0 <= q < self.num_qubits for q in o.qubits):
                raise ValueError(f"{o.name} acts on {o.qubits}, outside {self.num_qubits} qubits")
            if len(set(o.qubits)) != len(o.qubits):
                raise ValueError(f"{o.name} repeats a qubit: {o.qubits}")
        meas = tuple((int(q), int(s)) for q, s in self.measurements)
        if any(not 0 <= q < self.num_qubits for q, _ in meas):
            raise ValueError("measurement on a qubit outside the register")
        if len({q for q, _ in meas}) != len(meas):
            raise ValueError("a qubit is measured twice")
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "measurements", meas)

    def gate(self, name: str, *qubits: int, params: Sequence[float] = ()) -> "MiniCircuit":
        return MiniCircuit(self.num_qubits, self.ops + (Op(name, tuple(qubits), tuple(params)),), self.measurements)

    def measure(self, qubit: int, slot: int) -> "MiniCircuit":
        return MiniCircuit(self.num_qubits, self.ops, self.measurements + ((qubit, slot),))

    def to_dict(self) -> dict:
        return {
            "n": self.num_qubits,
            "ops": [{"g": o.name, "q": list(o.qubits), "p": list(o.params)} for o in self.ops],
            "meas": [[q, s] for q, s in self.measurements],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MiniCircuit":
        ops = tuple(Op(o["g"], tuple(o["q"]), tuple(o.get("p", ()))) for o in data.get("ops", ()))
        return cls(int(data["n"]), ops, tuple(tuple(m) for m in data.get("meas", ())))


class InstructionScheduleMap:
    """Immutable lookup ``(gate, ordered qubits) -> schedule template``.

    A template is either a fixed :class:`Schedule` or a callable taking the
    gate's real parameters and returning one.
    """

    def __init__(self, entries: Optional[Mapping[Tuple[str, Tuple[int, ...]], Template]] = None):
        self._entries: Dict[Tuple[str, Tuple[int, ...]], Template] = dict(entries or {})

    def add(self, gate: str, qubits: Iterable[int], template: Template) -> "InstructionScheduleMap":
        return register_gate(self, gate, qubits, template)

    def has(self, gate: str, qubits: Iterable[int]) -> bool:
        return (gate, tuple(qubits)) in self._entries

    def get(self, gate: str, qubits: Iterable[int], params: Sequence[float] = ()) -> Schedule:
        key = (gate, tuple(qubits))
        if key not in self._entries:
            raise MissingDefinition(*key)
        template = self._entries[key]
        if isinstance(template, Schedule):
            if params:
                raise InvalidTemplate(f"{gate}{list(key[1])} takes no parameters")
            return template
        return template(*params)

    def keys(self):
        return sorted(self._entries)

    def __contains__(self, key) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    # JSON only covers fixed templates; parameterized gates come from backends
    def to_dict(self) -> dict:
        out = []
        for (gate, qubits), template in sorted(self._entries.items()):
            if isinstance(template, Schedule):
                out.append({"gate": gate, "qubits": list(qubits), "schedule": schedule_to_dict(template)})
        return {"entries": out}

    def dumps(self) -> str:
        return dump_value(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping, base: Optional["InstructionScheduleMap"] = None) -> "InstructionScheduleMap":
        out = base or cls()
        for e in data.get("entries", ()):
            out = register_gate(out, e["gate"], e["qubits"], schedule_from_dict(e["schedule"]))
        return out

    @classmethod
    def loads(cls, text: str, base: Optional["InstructionScheduleMap"] = None) -> "InstructionScheduleMap":
        return cls.from_dict(json.loads(text), base)


def register_gate(instmap: InstructionScheduleMap, gate: str, qubits: Iterable[int], template: Template) -> InstructionScheduleMap:
    """Return a new map with ``template`` under ``(gate, qubits)``; later entries overwrite."""
    qubits = tuple(int(q) for q in qubits)
    if isinstance(template, Schedule):
        problems = [
            d for d in validate(template) if d.severity == "error" and (gate == "measure" or d.kind != "MisalignedAcquire")
        ]
        if problems:
            raise InvalidTemplate(f"{gate}{list(qubits)}: " + "; ".join(str(p) for p in problems))
    elif not callable(template):
        raise InvalidTemplate(f"{gate}{list(qubits)}: template must be a Schedule or callable")
    entries = dict(instmap._entries)
    entries[(gate, qubits)] = template
    return InstructionScheduleMap(entries)


# --- scheduling ------------------------------------------------------------------


@dataclass
class _Block:
    schedule: Schedule
    resources: frozenset
    index: int
    qubits: Tuple[int, ...] = ()

    @property
    def duration(self) -> int:
        return self.schedule.duration


@dataclass
class Placement:
    """Where each circuit op (and the measurement block) landed."""

    starts: List[int] = field(default_factory=list)
    durations: List[int] = field(default_factory=list)
    measure_start: Optional[int] = None


def _measure_block(circuit: MiniCircuit, instmap: InstructionScheduleMap) -> Optional[Schedule]:
    if not circuit.measurements:
        return None
    qubits = tuple(sorted(q for q, _ in circuit.measurements))
    slot_of = dict(circuit.measurements)
    if instmap.has("measure", qubits):
        parts = [instmap.get("measure", qubits)]
    else:
        parts = [instmap.get("measure", (q,)) for q in qubits]
    entries = []
    for part in parts:
        for t, inst in part.entries:
            if isinstance(inst, Acquire):
                q = inst.channel.index
                if q in slot_of:
                    inst = Acquire(inst.duration, inst.channel, slot_of[q])
            entries.append((t, inst))
    block = Schedule(tuple(entries), "measure")
    if block.channels:
        # fence so every stimulus starts together
        block = Schedule(((0, Barrier(block.channels)),) + block.entries, "measure")
    return block


def schedule_circuit(
    circuit: MiniCircuit,
    instmap: InstructionScheduleMap,
    policy: Union[Policy, str] = Policy.ALAP,
    name: str = "",
    placement: Optional[Placement] = None,
) -> Schedule:
    """Lower ``circuit`` to a schedule.

    Each gate is placed as a rigid block over its qubits and template
    channels. ASAP starts every block at the earliest time its resources are
    free. ALAP runs ASAP on the reversed op list and reflects the result, so
    the measurements sit flush at the end and gates on unmeasured qubits end
    with the block.
    """
    policy = Policy(policy) if not isinstance(policy, Policy) else policy
    blocks = []
    for i, op in enumerate(circuit.ops):
        sched = instmap.get(op.name, op.qubits, op.params)
        if sched.entries and sched.start_time:
            sched = sched.shift(-sched.start_time)
        res = frozenset(("q", q) for q in op.qubits) | sched.channels
        blocks.append(_Block(sched, res, i, op.qubits))
    meas = _measure_block(circuit, instmap)
    meas_res = None
    if meas is not None:
        meas_res = frozenset(("q", q) for q, _ in circuit.measurements) | meas.channels

    starts: Dict[int, int] = {}
    if policy is Policy.ASAP:
        avail: Dict[object, int] = {}
        for b in blocks:
            t = max((avail.get(r, 0) for r in b.resources), default=0)
            starts[b.index] = t
            for r in b.resources:
                avail[r] = t + b.duration
        m_start = None
        if meas is not None:
            m_start = max((avail.get(r, 0) for r in meas_res), default=0)
    else:
        avail = {}
        rev: Dict[int, int] = {}
        if meas is not None:
            for r in meas_res:
                avail[r] = meas.duration
        for b in reversed(blocks):
            t = max((avail.get(r, 0) for r in b.resources), default=0)
            rev[b.index] = t
            for r in b.resources:
                avail[r] = t + b.duration
        total = max([rev[b.index] + b.duration for b in blocks] + [0 if meas is None else meas.duration])
        for b in blocks:
            starts[b.index] = total - rev[b.index] - b.duration
        m_start = None if meas is None else total - meas.duration

    entries = []
    for b in blocks:
        entries += [(starts[b.index] + t, inst) for t, inst in b.schedule.entries]
    if meas is not None:
        entries += [(m_start + t, inst) for t, inst in meas.entries]
    if placement is not None:
        placement.starts = [starts[b.index] for b in blocks]
        placement.durations = [b.duration for b in blocks]
        placement.measure_start = m_start
    return Schedule(tuple(entries), name)
