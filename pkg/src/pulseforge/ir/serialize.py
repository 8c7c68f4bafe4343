"""JSON encoding for pulses and schedules with byte-stable float output.

Field order is fixed and floats are written with 17 significant digits, so
``dumps(loads(dumps(s))) == dumps(s)`` byte for byte.
"""

from __future__ import annotations

import json
import math
from typing import Any

from .channels import parse_channel
from .instructions import Acquire, Barrier, Delay, Play, SetFrequency, ShiftPhase
from .pulses import Constant, Drag, Gaussian, GaussianSquare, SampledPulse
from .schedule import Schedule


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x}")
    if x == 0.0:
        return "0.0" if math.copysign(1.0, x) > 0 else "-0.0"
    text = f"{x:.17g}"
    if all(c not in text for c in ".en"):
        text += ".0"
    return text


def dump_value(obj: Any) -> str:
    """Compact JSON with insertion-ordered keys and fixed float formatting."""
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dump_value(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dump_value(v) for v in obj) + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return dump_value(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cplx(z: complex) -> list:
    return [float(z.real), float(z.imag)]


def pulse_to_dict(pulse) -> dict:
    if isinstance(pulse, SampledPulse):
        return {"samples": [_cplx(s) for s in pulse.samples], "name": pulse.name}
    if isinstance(pulse, Gaussian):
        out = {"shape": "gaussian", "duration": pulse.duration, "amp": _cplx(pulse.amp), "sigma": pulse.sigma}
    elif isinstance(pulse, GaussianSquare):
        out = {
            "shape": "gaussian_square",
            "duration": pulse.duration,
            "amp": _cplx(pulse.amp),
            "sigma": pulse.sigma,
            "square_width": pulse.square_width,
        }
    elif isinstance(pulse, Drag):
        out = {
            "shape": "drag",
            "duration": pulse.duration,
            "amp": _cplx(pulse.amp),
            "sigma": pulse.sigma,
            "beta": pulse.beta,
        }
    elif isinstance(pulse, Constant):
        out = {"shape": "constant", "duration": pulse.duration, "amp": _cplx(pulse.amp)}
    else:
        raise TypeError(f"unknown pulse type {type(pulse).__name__}")
    out["name"] = pulse.name
    return out


def pulse_from_dict(data: dict):
    if "samples" in data:
        return SampledPulse([complex(re, im) for re, im in data["samples"]], name=data.get("name", ""))
    shape = data["shape"]
    amp = complex(*data["amp"])
    name = data.get("name", "")
    if shape == "gaussian":
        return Gaussian(int(data["duration"]), amp, data["sigma"], name=name)
    if shape == "gaussian_square":
        return GaussianSquare(int(data["duration"]), amp, data["sigma"], data["square_width"], name=name)
    if shape == "drag":
        return Drag(int(data["duration"]), amp, data["sigma"], data["beta"], name=name)
    if shape == "constant":
        return Constant(int(data["duration"]), amp, name=name)
    raise ValueError(f"unknown pulse shape {shape!r}")


def instruction_to_dict(inst) -> dict:
    if isinstance(inst, Play):
        return {"op": "play", "ch": inst.channel.name, "pulse": pulse_to_dict(inst.pulse)}
    if isinstance(inst, Delay):
        return {"op": "delay", "ch": inst.channel.name, "duration": inst.duration}
    if isinstance(inst, ShiftPhase):
        return {"op": "shift_phase", "ch": inst.channel.name, "phase": inst.phase}
    if isinstance(inst, SetFrequency):
        return {"op": "set_frequency", "ch": inst.channel.name, "frequency": inst.frequency}
    if isinstance(inst, Acquire):
        return {"op": "acquire", "ch": inst.channel.name, "duration": inst.duration, "slot": inst.register}
    if isinstance(inst, Barrier):
        return {"op": "barrier", "chs": [c.name for c in sorted(inst.channels)]}
    raise TypeError(f"unknown instruction {type(inst).__name__}")


def instruction_from_dict(data: dict):
    op = data["op"]
    if op == "barrier":
        return Barrier(parse_channel(c) for c in data["chs"])
    ch = parse_channel(data["ch"])
    if op == "play":
        return Play(pulse_from_dict(data["pulse"]), ch)
    if op == "delay":
        return Delay(int(data["duration"]), ch)
    if op == "shift_phase":
        return ShiftPhase(data["phase"], ch)
    if op == "set_frequency":
        return SetFrequency(data["frequency"], ch)
    if op == "acquire":
        return Acquire(int(data["duration"]), ch, int(data["slot"]))
    raise ValueError(f"unknown instruction op {op!r}")


def schedule_to_dict(schedule: Schedule) -> dict:
    return {
        "name": schedule.name,
        "entries": [{"t": t, "inst": instruction_to_dict(inst)} for t, inst in schedule.entries],
    }


def schedule_from_dict(data: dict) -> Schedule:
    entries = tuple((int(e["t"]), instruction_from_dict(e["inst"])) for e in data["entries"])
    return Schedule(entries, data.get("name", ""))


def dumps(schedule: Schedule) -> str:
    return dump_value(schedule_to_dict(schedule))


def loads(text: str) -> Schedule:
    return schedule_from_dict(json.loads(text))
