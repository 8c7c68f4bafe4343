"""Backend model: the Hamiltonian, channel bindings and readout statistics of a device.

Operator-valued fields are written in JSON as small arithmetic expressions
over Pauli strings, for example ``"2*pi*4.857e9 * IN + 2*pi*1e6 * ZZ"``.
Letters are ``I X Y Z`` plus ``N = |1><1|`` and ``S = |0><1|`` (lowering),
leftmost letter acting on the highest qubit.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .. import quantum as qm
from ..ir.channels import Channel, parse_channel


class BackendError(ValueError):
    """Non-physical or malformed backend description."""


# --- expression grammar ------------------------------------------------------
#   expr   := ['+'|'-'] term (('+'|'-') term)*
#   term   := factor (('*'|'/') factor)*
#   factor := number | 'pi' | pauli | '(' expr ')' | '-' factor

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?j?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/()]))"
)


def _tokenize(text: str) -> List[Tuple[str, str]]:
    tokens, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise BackendError(f"unexpected character {text[pos]!r} in {text!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return tokens


class _Parser:
    def __init__(self, text: str, n_qubits: int):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.n = n_qubits

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def parse(self):
        value = self.expr()
        if self.pos != len(self.tokens):
            raise BackendError(f"trailing input in {self.text!r}")
        return value

    def expr(self):
        value = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            value = _add(value, rhs if op == "+" else -rhs, self.text)
        return value

    def term(self):
        value = self.factor()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.factor()
            if op == "*":
                value = value @ rhs if _is_op(value) and _is_op(rhs) else value * rhs
            else:
                if _is_op(rhs):
                    raise BackendError(f"cannot divide by an operator in {self.text!r}")
                value = value / rhs
        return value

    def factor(self):
        kind, tok = self.take()
        if kind == "num":
            return complex(tok) if tok.endswith("j") else float(tok)
        if kind == "name":
            if tok == "pi":
                return math.pi
            if len(tok) == self.n and all(c in qm.SINGLE for c in tok):
                return qm.operator(tok)
            raise BackendError(f"unknown symbol {tok!r} in {self.text!r} (expected {self.n}-letter Pauli string)")
        if tok == "(":
            value = self.expr()
            if self.take() != ("op", ")"):
                raise BackendError(f"missing ')' in {self.text!r}")
            return value
        if tok == "-":
            return -self.factor()
        if tok == "+":
            return self.factor()
        raise BackendError(f"unexpected token {tok!r} in {self.text!r}")


def _is_op(v) -> bool:
    return isinstance(v, np.ndarray)


def _add(a, b, text):
    if _is_op(a) != _is_op(b):
        raise BackendError(f"cannot add a scalar and an operator in {text!r}")
    return a + b


def parse_operator(text: str, n_qubits: int) -> np.ndarray:
    """Evaluate an operator expression to a dense ``2**n x 2**n`` matrix."""
    value = _Parser(text, n_qubits).parse()
    if not _is_op(value):
        if value == 0:
            return np.zeros((2**n_qubits,) * 2, dtype=complex)
        raise BackendError(f"{text!r} is a scalar, expected an operator")
    return np.asarray(value, dtype=complex)


def pauli_expression(matrix: np.ndarray, n_qubits: int, tol: float = 1e-14) -> str:
    """Write a Hermitian matrix as a sum of real-weighted Pauli strings."""
    d = 2**n_qubits
    parts = []
    for label in qm.pauli_labels(n_qubits):
        c = np.trace(qm.operator(label) @ matrix) / d
        if abs(c) > tol:
            coeff = repr(float(c.real)) if abs(c.imag) <= tol else f"({float(c.real)!r}+{float(c.imag)!r}j)"
            parts.append(f"{coeff} * {label}")
    return " + ".join(parts) if parts else "0"


# --- model -------------------------------------------------------------------


@dataclass(frozen=True)
class ReadoutIQ:
    """Gaussian IQ clouds for one qubit: means and 2x2 covariances per state."""

    means: Tuple[complex, complex]
    covs: Tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        covs = tuple(np.asarray(c, dtype=float).reshape(2, 2) for c in self.covs)
        for c in covs:
            if not np.allclose(c, c.T, atol=1e-12) or np.min(np.linalg.eigvalsh(c)) < -1e-12:
                raise BackendError("readout covariance must be symmetric PSD")
        object.__setattr__(self, "means", tuple(complex(m) for m in self.means))
        object.__setattr__(self, "covs", covs)


@dataclass
class BackendModel:
    """Everything the simulator needs to stand in for a device.

    Energies are in rad/s, frequencies in Hz, ``dt`` in seconds. ``frame``
    optionally overrides the diagonal of the rotating frame (defaults to
    ``diag(h_sys)``). ``control_frames`` records which qubit frame each
    control channel follows; schedulers mirror virtual-Z shifts onto it.
    """

    dt: float
    n_qubits: int
    h_sys: np.ndarray
    control_terms: Dict[Channel, np.ndarray]
    frequencies: Dict[Channel, float]
    phase_offsets: Dict[Channel, float] = field(default_factory=dict)
    dissipators: List[Tuple[np.ndarray, float]] = field(default_factory=list)
    readout: List[ReadoutIQ] = field(default_factory=list)
    frame: Optional[np.ndarray] = None
    rwa: bool = True
    rwa_cutoff: float = 1.0e9
    substeps: int = 2
    control_frames: Dict[Channel, int] = field(default_factory=dict)
    calibration: Dict[str, object] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        d = 2**self.n_qubits
        if self.dt <= 0:
            raise BackendError("dt must be positive")
        self.h_sys = np.asarray(self.h_sys, dtype=complex)
        _check_hermitian(self.h_sys, d, "h_sys")
        self.control_terms = {ch: np.asarray(m, dtype=complex) for ch, m in self.control_terms.items()}
        for ch, m in self.control_terms.items():
            _check_hermitian(m, d, f"control term {ch}")
        for a, rate in self.dissipators:
            if rate < 0:
                raise BackendError(f"dissipator rate must be nonnegative, got {rate}")
            if np.asarray(a).shape != (d, d):
                raise BackendError("dissipator has the wrong dimension")
        self.dissipators = [(np.asarray(a, dtype=complex), float(r)) for a, r in self.dissipators]
        if self.frame is not None:
            self.frame = np.asarray(self.frame, dtype=float).ravel()
            if self.frame.shape != (d,):
                raise BackendError("frame must list one energy per basis state")
        if self.readout and len(self.readout) != self.n_qubits:
            raise BackendError("readout statistics needed for every qubit")
        if self.substeps < 1:
            raise BackendError("substeps must be at least 1")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def frame_energies(self) -> np.ndarray:
        if self.frame is not None:
            return self.frame
        return np.real(np.diag(self.h_sys)).copy()

    def qubit_frequency(self, qubit: int) -> float:
        """Transition frequency (Hz) of ``qubit`` read off the frame energies."""
        e = self.frame_energies
        return float((e[1 << qubit] - e[0]) / (2 * np.pi))

    def replace(self, **changes) -> "BackendModel":
        kwargs = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kwargs.update(changes)
        for key in ("control_terms", "frequencies", "phase_offsets", "control_frames", "calibration"):
            kwargs[key] = dict(kwargs[key])
        kwargs["dissipators"] = list(kwargs["dissipators"])
        return BackendModel(**kwargs)

    # --- JSON -------------------------------------------------------------
    def to_dict(self) -> dict:
        n = self.n_qubits
        return {
            "name": self.name,
            "dt": self.dt,
            "n_qubits": n,
            "h_sys": pauli_expression(self.h_sys, n),
            "control_terms": {ch.name: pauli_expression(m, n) for ch, m in sorted(self.control_terms.items())},
            "frequencies": {ch.name: f for ch, f in sorted(self.frequencies.items())},
            "phase_offsets": {ch.name: p for ch, p in sorted(self.phase_offsets.items())},
            "dissipators": [{"op": _dissipator_expr(a, n), "rate": r} for a, r in self.dissipators],
            "readout": [
                {
                    "means": [[m.real, m.imag] for m in r.means],
                    "covs": [c.tolist() for c in r.covs],
                }
                for r in self.readout
            ],
            "frame": None if self.frame is None else self.frame.tolist(),
            "rwa": self.rwa,
            "rwa_cutoff": self.rwa_cutoff,
            "substeps": self.substeps,
            "control_frames": {ch.name: q for ch, q in sorted(self.control_frames.items())},
            "calibration": dict(self.calibration),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "BackendModel":
        try:
            n = int(data["n_qubits"])
            return cls(
                dt=float(data["dt"]),
                n_qubits=n,
                h_sys=parse_operator(data.get("h_sys", "0"), n),
                control_terms={parse_channel(k): parse_operator(v, n) for k, v in data["control_terms"].items()},
                frequencies={parse_channel(k): float(v) for k, v in data["frequencies"].items()},
                phase_offsets={parse_channel(k): float(v) for k, v in data.get("phase_offsets", {}).items()},
                dissipators=[(parse_operator(x["op"], n), float(x["rate"])) for x in data.get("dissipators", [])],
                readout=[
                    ReadoutIQ(tuple(complex(*m) for m in r["means"]), tuple(r["covs"]))
                    for r in data.get("readout", [])
                ],
                frame=data.get("frame"),
                rwa=bool(data.get("rwa", True)),
                rwa_cutoff=float(data.get("rwa_cutoff", 1.0e9)),
                substeps=int(data.get("substeps", 2)),
                control_frames={parse_channel(k): int(v) for k, v in data.get("control_frames", {}).items()},
                calibration=dict(data.get("calibration", {})),
                name=str(data.get("name", "")),
            )
        except KeyError as exc:
            raise BackendError(f"backend JSON is missing field {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "BackendModel":
        return cls.from_dict(json.loads(text))


def _dissipator_expr(a: np.ndarray, n: int) -> str:
    # dissipators need not be Hermitian, so expand in the full matrix-unit basis
    parts = []
    for label in qm.pauli_labels(n):
        c = np.trace(qm.operator(label).conj().T @ a) / 2**n
        if abs(c) > 1e-14:
            parts.append(f"({float(c.real)!r}+{float(c.imag)!r}j) * {label}")
    return " + ".join(parts) if parts else "0"


def _check_hermitian(m: np.ndarray, d: int, label: str) -> None:
    if m.shape != (d, d):
        raise BackendError(f"{label} has shape {m.shape}, expected ({d}, {d})")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.conj().T)) > 1e-12 * scale:
        raise BackendError(f"{label} is not Hermitian")
