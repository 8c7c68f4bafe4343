"""Average gate fidelity and local-rotation optimization of two-qubit processes.

The entangler ``U_ent`` is dressed with four ``u3`` blocks,

    U(Theta) = U_pre^+ U_ent U_post^+,

``U_pre = u3(T0..T2) [control] (x) u3(T3..T5) [target]`` and likewise
``U_post`` from ``T6..T11``. Maximizing ``F[E, U(Theta)]`` over the twelve
angles finds the best gate ``U_pre E U_post`` reachable with single-qubit
corrections, so in time order the post block runs first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from . import quantum as qm
from .ir.schedule import Schedule
from .parallel import pmap
from .scheduler import InstructionScheduleMap, MiniCircuit, register_gate, schedule_circuit


def _dim(u: np.ndarray) -> int:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"target must be square, got {u.shape}")
    return u.shape[0]


def process_fidelity_superop(superop: np.ndarray, u: np.ndarray) -> float:
    """``Tr[S_U^+ S_E] / d^2``."""
    d = _dim(u)
    s = np.asarray(superop)
    if s.shape != (d * d, d * d):
        raise ValueError(f"superoperator shape {s.shape} does not match a {d}-dimensional target")
    return float(np.real(np.vdot(qm.unitary_superop(u), s))) / d**2


def average_gate_fidelity(superop: np.ndarray, u: np.ndarray, tp_tol: float = 1e-6) -> float:
    """``(d F_pro + 1) / (d + 1)`` for a trace-preserving channel."""
    d = _dim(u)
    s = np.asarray(superop)
    if s.shape != (d * d, d * d):
        raise ValueError(f"superoperator shape {s.shape} does not match a {d}-dimensional target")
    trace_row = qm.vec(np.eye(d)).conj()
    if np.abs(trace_row @ s - trace_row).max() > tp_tol:
        raise ValueError("channel is not trace preserving")
    return (d * process_fidelity_superop(s, u) + 1) / (d + 1)


def _u3_phaseless(theta, phi, lam) -> np.ndarray:
    # u3 up to a global phase, which fidelities ignore
    c, sn = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -np.exp(1j * lam) * sn], [np.exp(1j * phi) * sn, np.exp(1j * (phi + lam)) * c]])


def _pair(u_control: np.ndarray, u_target: np.ndarray, orientation: Tuple[int, int]) -> np.ndarray:
    c, t = orientation
    return np.kron(u_control, u_target) if c > t else np.kron(u_target, u_control)


@dataclass(frozen=True)
class LocalRotations:
    """Twelve angles: pre-control, pre-target, post-control, post-target ``u3`` blocks."""

    angles: Tuple[float, ...] = (0.0,) * 12

    def __post_init__(self):
        a = tuple(float(x) for x in self.angles)
        if len(a) != 12:
            raise ValueError("local rotations need exactly 12 angles")
        object.__setattr__(self, "angles", a)

    @property
    def blocks(self) -> Tuple[Tuple[float, float, float], ...]:
        a = self.angles
        return tuple(a[3 * k : 3 * k + 3] for k in range(4))

    def pre(self, orientation=(1, 0)) -> np.ndarray:
        b = self.blocks
        return _pair(qm.u3(*b[0]), qm.u3(*b[1]), orientation)

    def post(self, orientation=(1, 0)) -> np.ndarray:
        b = self.blocks
        return _pair(qm.u3(*b[2]), qm.u3(*b[3]), orientation)

    def dressed(self, target: np.ndarray, orientation=(1, 0)) -> np.ndarray:
        return self.pre(orientation).conj().T @ target @ self.post(orientation).conj().T

    def to_list(self) -> list:
        return list(self.angles)


def target_unitary(name: Union[str, np.ndarray], orientation=(1, 0)) -> np.ndarray:
    if not isinstance(name, str):
        return np.asarray(name, dtype=complex)
    c, t = orientation
    if name == "cx":
        return qm.cx(c, t)
    if name == "zx":
        label = "ZX" if c > t else "XZ"
        return np.cos(np.pi / 4) * np.eye(4) - 1j * np.sin(np.pi / 4) * qm.operator(label)
    raise ValueError(f"unknown target {name!r}; use 'cx', 'zx' or a matrix")


@dataclass
class FidelityReport:
    f_max: float
    theta: LocalRotations
    target: str
    restarts: int
    converged: bool
    f_start: float
    orientation: Tuple[int, int] = (1, 0)
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "F_max": self.f_max,
            "F_start": self.f_start,
            "theta": self.theta.to_list(),
            "target": self.target,
            "orientation": list(self.orientation),
            "restarts": self.restarts,
            "converged": self.converged,
            "evaluations": self.evaluations,
        }


def optimize_local(
    superop: np.ndarray,
    target: Union[str, np.ndarray] = "cx",
    restarts: int = 20,
    seed=None,
    orientation: Tuple[int, int] = (1, 0),
    tol: float = 1e-9,
    max_evals: int = 20000,
) -> FidelityReport:
    """Maximize ``F[E, U_pre^+ U U_post^+]`` by Nelder-Mead from the zero start plus ``restarts`` random ones."""
    u = target_unitary(target, orientation)
    s = np.asarray(superop, dtype=complex)
    d = _dim(u)
    if s.shape != (d * d, d * d) or d != 4:
        raise ValueError("local optimization needs a two-qubit channel and target")

    choi = qm.superop_to_choi(s)
    c, t = orientation
    swap = c < t

    def infidelity(x):
        pre_c, pre_t, post_c, post_t = (_u3_phaseless(*x[3 * k : 3 * k + 3]) for k in range(4))
        if swap:
            pre, post = np.kron(pre_t, pre_c), np.kron(post_t, post_c)
        else:
            pre, post = np.kron(pre_c, pre_t), np.kron(post_c, post_t)
        v = qm.vec(pre.conj().T @ u @ post.conj().T)
        f_pro = np.real(np.vdot(v, choi @ v)) / d**2
        return 1.0 - (d * f_pro + 1) / (d + 1)

    rng = np.random.default_rng(seed)
    starts = [np.zeros(12)] + [rng.uniform(-np.pi, np.pi, 12) for _ in range(restarts)]

    def run(x0):
        return minimize(
            infidelity, x0, method="Nelder-Mead",
            options={"xatol": tol, "fatol": tol, "maxfev": max_evals, "adaptive": True},
        )

    results = pmap(run, starts)
    f_start = 1.0 - infidelity(np.zeros(12))
    best = min(range(len(results)), key=lambda k: (results[k].fun, k))
    res = results[best]
    f_best = 1.0 - float(res.fun)
    theta = LocalRotations(tuple(res.x))
    if f_best < f_start:
        f_best, theta = f_start, LocalRotations()
    name = target if isinstance(target, str) else "custom"
    return FidelityReport(
        f_best, theta, name, restarts, bool(res.success), f_start, tuple(orientation),
        int(sum(r.nfev for r in results)),
    )


# --- schedules -----------------------------------------------------------------------


def build_optimized_cnot(
    instmap: InstructionScheduleMap,
    cr_schedule: Schedule,
    theta: Union[LocalRotations, Sequence[float]],
    orientation: Tuple[int, int] = (1, 0),
    n_qubits: int = 2,
) -> Schedule:
    """``U_pre . CR . U_post`` from the map's ``u3`` templates (post block first in time)."""
    if not isinstance(theta, LocalRotations):
        theta = LocalRotations(tuple(theta))
    c, t = orientation
    pre_c, pre_t, post_c, post_t = theta.blocks
    imap = register_gate(instmap, "cr_opt", (max(c, t), min(c, t)), cr_schedule)
    circ = MiniCircuit(n_qubits)
    circ = circ.gate("u3", c, params=post_c).gate("u3", t, params=post_t)
    circ = circ.gate("cr_opt", max(c, t), min(c, t))
    circ = circ.gate("u3", c, params=pre_c).gate("u3", t, params=pre_t)
    return schedule_circuit(circ, imap, name=f"cx{c}{t}")


def install_cnot(instmap: InstructionScheduleMap, schedule: Schedule, orientation: Tuple[int, int] = (1, 0)) -> InstructionScheduleMap:
    return register_gate(instmap, "cx", tuple(orientation), schedule)
