"""Two-qubit process tomography.

Each qubit is prepared in one of ``0, 1, +, i`` (the last being
``(|0> + i|1>)/sqrt(2)``) and measured in X, Y or Z, giving 144 experiments,
plus four ``cal_ij`` schedules for the readout assignment matrix. Labels read
``qpt_P{p1}{p0}_M{m1}{m0}`` with qubit 1 first, matching bitstrings.

The Choi matrix is ``sum_ij |i><j| (x) E(|i><j|)`` (input factor first). It is
estimated by weighted linear inversion in the Pauli basis and then projected
onto the CPTP set in the metric of that inversion. ``project_cptp`` offers the
plain Frobenius projection.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from . import quantum as qm
from .ir.channels import DriveChannel
from .ir.instructions import Delay
from .ir.schedule import Schedule
from .parallel import pmap
from .scheduler import InstructionScheduleMap, MiniCircuit, Policy, register_gate, schedule_circuit

PREPS = ("0", "1", "+", "i")
BASES = ("X", "Y", "Z")
CAL_LABELS = ("cal_00", "cal_01", "cal_10", "cal_11")

# gate realizations; u3 parameters are (theta, phi, lam)
PREP_GATES = {
    "0": [],
    "1": [("x", ())],
    "+": [("u3", (np.pi / 2, 0.0, 0.0))],
    "i": [("u3", (np.pi / 2, np.pi / 2, 0.0))],
}
BASIS_GATES = {
    "X": [("u3", (-np.pi / 2, 0.0, 0.0))],
    "Y": [("u3", (-np.pi / 2, 0.0, -np.pi / 2))],
    "Z": [],
}


class TomographyError(ValueError):
    pass


def qpt_labels() -> list:
    return [
        f"qpt_P{p1}{p0}_M{m1}{m0}"
        for p1, p0 in itertools.product(PREPS, repeat=2)
        for m1, m0 in itertools.product(BASES, repeat=2)
    ]


def parse_label(label: str) -> Tuple[str, str]:
    """``qpt_P+0_MXZ -> ("+0", "XZ")``."""
    try:
        head, prep, meas = label.split("_")
        assert head == "qpt" and prep[0] == "P" and meas[0] == "M"
        prep, meas = prep[1:], meas[1:]
        assert len(prep) == 2 and len(meas) == 2
        assert all(p in PREPS for p in prep) and all(m in BASES for m in meas)
    except (ValueError, AssertionError, IndexError):
        raise TomographyError(f"not a tomography label: {label!r}") from None
    return prep, meas


# --- single-qubit states and rotations -------------------------------------------


def prep_state(p: str) -> np.ndarray:
    ket = {
        "0": np.array([1, 0]),
        "1": np.array([0, 1]),
        "+": np.array([1, 1]) / np.sqrt(2),
        "i": np.array([1, 1j]) / np.sqrt(2),
    }[p].astype(complex)
    return np.outer(ket, ket.conj())


def basis_rotation(m: str) -> np.ndarray:
    u = np.eye(2, dtype=complex)
    for _, params in BASIS_GATES[m]:
        u = qm.u3(*params) @ u
    return u


# --- schedules ---------------------------------------------------------------------


def _layer(instmap: InstructionScheduleMap, table: dict, pattern: str, qubits: Tuple[int, int], n: int, width: int = 0) -> Schedule:
    """Single-qubit layer (``pattern`` is qubit-1-first), padded with delays to ``width`` cycles."""
    q0, q1 = qubits
    circ = MiniCircuit(n)
    for q, key in ((q1, pattern[0]), (q0, pattern[1])):
        for name, params in table[key]:
            circ = circ.gate(name, q, params=params)
    sched = schedule_circuit(circ, instmap, Policy.ASAP)
    for q in (q1, q0):
        ch = DriveChannel(q)
        stop = sched.ch_stop_time(ch) if ch in sched.channels else 0
        if width > stop:
            sched = sched.insert(stop, Delay(width - stop, ch))
    return sched


def _widths(instmap, qubits, n) -> Tuple[int, int]:
    prep = max(_layer(instmap, PREP_GATES, p1 + p0, qubits, n).duration for p1 in PREPS for p0 in PREPS)
    meas = max(_layer(instmap, BASIS_GATES, m1 + m0, qubits, n).duration for m1 in BASES for m0 in BASES)
    return prep, meas


def gate_start(instmap: InstructionScheduleMap, backend, qubits: Tuple[int, int] = (0, 1)) -> int:
    """Cycle at which the gate under test starts in every tomography schedule."""
    return _widths(instmap, qubits, backend.n_qubits)[0]


def qpt_schedules(
    gate_schedule: Schedule,
    instmap: InstructionScheduleMap,
    backend,
    qubits: Tuple[int, int] = (0, 1),
) -> Dict[str, Schedule]:
    """The 144 tomography schedules plus ``cal_00 .. cal_11``, keyed by label.

    ``gate_schedule`` is embedded as a custom gate on ``qubits``; qubit
    ``qubits[0]`` lands in memory slot 0. Preparation and basis layers are
    padded to a common length so the gate starts at the same cycle in every
    experiment; a drive detuned from its frame makes the channel depend on
    that start time.
    """
    n = backend.n_qubits
    q0, q1 = qubits
    p_width, m_width = _widths(instmap, qubits, n)
    imap = register_gate(instmap, "qpt_gate", (q1, q0), gate_schedule)
    for p1, p0 in itertools.product(PREPS, repeat=2):
        imap = register_gate(imap, f"qpt_prep_{p1}{p0}", (q1, q0), _layer(instmap, PREP_GATES, p1 + p0, qubits, n, p_width))
    for m1, m0 in itertools.product(BASES, repeat=2):
        imap = register_gate(imap, f"qpt_basis_{m1}{m0}", (q1, q0), _layer(instmap, BASIS_GATES, m1 + m0, qubits, n, m_width))
    out: Dict[str, Schedule] = {}
    for label in qpt_labels():
        prep, meas = parse_label(label)
        circ = MiniCircuit(n).gate(f"qpt_prep_{prep}", q1, q0).gate("qpt_gate", q1, q0).gate(f"qpt_basis_{meas}", q1, q0)
        out[label] = schedule_circuit(circ.measure(q0, 0).measure(q1, 1), imap, name=label)
    for label in CAL_LABELS:
        circ = MiniCircuit(n).gate(f"qpt_prep_{label[-2:]}", q1, q0)
        out[label] = schedule_circuit(circ.measure(q0, 0).measure(q1, 1), imap, name=label)
    return out


# --- data ----------------------------------------------------------------------------


@dataclass
class QPTData:
    """Outcome distributions per label over ``b1 b0`` (index ``2*b1 + b0``).

    ``shots=None`` marks exact probabilities.
    """

    probabilities: Dict[str, np.ndarray] = field(default_factory=dict)
    shots: Optional[int] = None

    def to_dict(self) -> dict:
        return {"shots": self.shots, "probabilities": {k: np.asarray(v).tolist() for k, v in sorted(self.probabilities.items())}}

    @classmethod
    def from_dict(cls, data: Mapping) -> "QPTData":
        return cls({k: np.asarray(v, dtype=float) for k, v in data["probabilities"].items()}, data.get("shots"))

    @classmethod
    def from_counts(cls, counts: Mapping[str, Mapping[str, int]]) -> "QPTData":
        probs, totals = {}, set()
        for label, hist in counts.items():
            vec = np.zeros(4)
            for bits, c in hist.items():
                vec[int(bits, 2)] += c
            totals.add(int(vec.sum()))
            probs[label] = vec / vec.sum()
        return cls(probs, totals.pop() if len(totals) == 1 else None)


def run_qpt(
    gate_schedule: Schedule,
    backend,
    instmap: Optional[InstructionScheduleMap] = None,
    shots: Optional[int] = 2048,
    seed=None,
    qubits: Tuple[int, int] = (0, 1),
) -> QPTData:
    """Simulate every tomography schedule (seeded per experiment)."""
    from .gates import default_instmap
    from .sim.engine import simulate

    if instmap is None:
        instmap = default_instmap(backend, with_cx=False)
    scheds = qpt_schedules(gate_schedule, instmap, backend, qubits)
    labels = list(scheds)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = root.spawn(len(labels))

    def run(k):
        res = simulate(scheds[labels[k]], backend, shots=shots, seed=seeds[k])
        if not shots:
            return res.probabilities
        vec = np.zeros(4)
        for bits, c in res.counts.items():
            vec[int(bits, 2)] += c
        return vec / shots

    probs = pmap(run, range(len(labels)))
    return QPTData(dict(zip(labels, probs)), shots or None)


def synthetic_data(
    superop: np.ndarray,
    shots: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    assignment: Optional[np.ndarray] = None,
) -> QPTData:
    """Forward model with ideal preparations and rotations."""
    if shots and rng is None:
        raise ValueError("sampling needs an rng")
    amat = np.eye(4) if assignment is None else np.asarray(assignment)
    probs = {}
    for label in qpt_labels() + list(CAL_LABELS):
        if label.startswith("cal"):
            p = np.zeros(4)
            p[int(label[-2:], 2)] = 1.0
        else:
            prep, meas = parse_label(label)
            rho = np.kron(prep_state(prep[0]), prep_state(prep[1]))
            out = qm.apply_superop(superop, rho)
            v = np.kron(basis_rotation(meas[0]), basis_rotation(meas[1]))
            p = np.clip(np.real(np.diag(v @ out @ v.conj().T)), 0, None)
            p = p / p.sum()
        p = amat @ p
        if shots:
            p = rng.multinomial(shots, p / p.sum()) / shots
        probs[label] = p
    return QPTData(probs, shots or None)


# --- readout mitigation ---------------------------------------------------------------


def assignment_matrix(data: QPTData) -> np.ndarray:
    """``M[observed, prepared]`` from the four calibration experiments."""
    missing = [c for c in CAL_LABELS if c not in data.probabilities]
    if missing:
        raise TomographyError(f"missing calibration data: {missing}")
    return np.column_stack([np.asarray(data.probabilities[c], dtype=float) for c in CAL_LABELS])


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{p >= 0, sum p = 1}``."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    return np.maximum(v - tau, 0.0)


def mitigate(observed, assignment: np.ndarray, cond_limit: float = 1e12) -> np.ndarray:
    """``M^-1 p`` clipped back onto the probability simplex.

    ``observed`` may be counts or probabilities.
    """
    m = np.asarray(assignment, dtype=float)
    p = np.asarray(observed, dtype=float)
    if p.sum() <= 0:
        raise TomographyError("no observations")
    p = p / p.sum()
    if not np.isfinite(np.linalg.cond(m)) or np.linalg.cond(m) > cond_limit:
        raise TomographyError("assignment matrix is singular")
    return project_simplex(np.linalg.solve(m, p))


def expectations(p: np.ndarray, meas: str) -> Dict[str, float]:
    """Pauli expectations implied by a ``b1 b0`` distribution measured in bases ``meas``."""
    idx = np.arange(4)
    s1 = 1 - 2 * ((idx >> 1) & 1)
    s0 = 1 - 2 * (idx & 1)
    return {
        meas[0] + meas[1]: float(np.dot(s1 * s0, p)),
        meas[0] + "I": float(np.dot(s1, p)),
        "I" + meas[1]: float(np.dot(s0, p)),
    }


def mitigated_expectations(data: QPTData, mitigation: bool = True) -> Dict[str, Dict[str, float]]:
    amat = assignment_matrix(data) if mitigation else np.eye(4)
    out = {}
    for label in qpt_labels():
        if label not in data.probabilities:
            raise TomographyError(f"incomplete tomography data: {label} missing")
        _, meas = parse_label(label)
        out[label] = expectations(mitigate(data.probabilities[label], amat), meas)
    return out


# --- reconstruction -----------------------------------------------------------------


_PAULI2 = [qm.operator(lbl) for lbl in qm.pauli_labels(2)]
_LABEL_INDEX = {lbl: k for k, lbl in enumerate(qm.pauli_labels(2))}
# vec(Lambda) = _BASIS @ r for Lambda = sum_ab r_ab P_a (x) P_b / 16
_BASIS = np.array([np.kron(pa, pb).reshape(-1) / 16 for pa in _PAULI2 for pb in _PAULI2]).T


def _to_choi(r: np.ndarray) -> np.ndarray:
    m = (_BASIS @ r).reshape(16, 16)
    return (m + m.conj().T) / 2


def _to_coeffs(choi: np.ndarray) -> np.ndarray:
    return 16 * np.real(_BASIS.conj().T @ np.asarray(choi).reshape(-1))


def _design(exp: Mapping[str, Mapping[str, float]], shots: Optional[int]):
    """Rows over ``r``: ``<P_c>_rho = sum_a r_ac Tr[rho^T P_a] / 4``, plus ``<II> = 1``."""
    rows, vals, wts = [], [], []
    preps_seen = set()
    for label in sorted(exp):
        obs = exp[label]
        prep, _ = parse_label(label)
        rho_t = np.kron(prep_state(prep[0]), prep_state(prep[1])).T
        f = np.array([np.real(np.trace(rho_t @ p)) for p in _PAULI2]) / 4
        if prep not in preps_seen:
            preps_seen.add(prep)
            obs = dict(obs, II=1.0)
        for key in sorted(obs):
            val = obs[key]
            row = np.zeros((16, 16))
            row[:, _LABEL_INDEX[key]] = f
            rows.append(row.reshape(-1))
            vals.append(val)
            if not shots:
                wts.append(1.0)
            elif key == "II":
                wts.append(float(shots))  # exact constraint, weighted like a noiseless outcome
            else:
                # binomial variance (1 - e^2)/N, floored at one count
                wts.append(np.sqrt(shots / (1 - val**2 + 1.0 / shots)))
    a = np.array(rows)
    if np.linalg.matrix_rank(a) < a.shape[1]:
        raise TomographyError("tomography design matrix is rank deficient")
    return a, np.array(vals), np.array(wts)


def linear_inversion(exp: Mapping[str, Mapping[str, float]], shots: Optional[int] = None) -> np.ndarray:
    """Weighted least-squares Choi estimate, not yet constrained to CPTP."""
    a, y, w = _design(exp, shots)
    r, *_ = np.linalg.lstsq(a * w[:, None], y * w, rcond=None)
    return _to_choi(r)


def _proj_psd(m: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh((m + m.conj().T) / 2)
    return (vecs * np.clip(evals, 0, None)) @ vecs.conj().T


def _proj_tp(m: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(m.shape[0])))
    k = qm.partial_trace_output(m)
    return m - np.kron(k - np.eye(d), np.eye(d)) / d


def _dykstra(choi: np.ndarray, max_iter: int = 500, tol: float = 1e-10) -> np.ndarray:
    x = np.asarray(choi, dtype=complex)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iter):
        y = _proj_psd(x + p)
        p = x + p - y
        x_new = _proj_tp(y + q)
        q = y + q - x_new
        change = np.linalg.norm(x_new - x)
        x = x_new
        if change < tol:
            break
    return x


def _finalize(choi: np.ndarray) -> np.ndarray:
    # exact CPTP: clip to PSD, then the congruence (K^-1/2 (x) I) . (K^-1/2 (x) I)
    # with K = Tr_out Lambda restores trace preservation and keeps positivity
    x = _proj_psd(choi)
    d = int(round(np.sqrt(x.shape[0])))
    k = qm.partial_trace_output(x)
    evals, vecs = np.linalg.eigh((k + k.conj().T) / 2)
    if evals.min() <= 0:
        raise TomographyError("projected channel annihilates an input state")
    s = np.kron((vecs / np.sqrt(evals)) @ vecs.conj().T, np.eye(d))
    out = s @ x @ s.conj().T
    return (out + out.conj().T) / 2


def project_cptp(choi: np.ndarray, max_iter: int = 500, tol: float = 1e-10) -> np.ndarray:
    """Frobenius-nearest CPTP Choi matrix by Dykstra's alternating projections."""
    return _finalize(_dykstra(choi, max_iter, tol))


# TP fixes the coefficients r_{a,II}: r_{II,II} = 4 and r_{a,II} = 0 otherwise
_TP_INDEX = np.array([16 * a for a in range(16)])
_TP_VALUE = np.array([4.0] + [0.0] * 15)
_FREE_INDEX = np.setdiff1d(np.arange(256), _TP_INDEX)


def _weighted_projection(
    r0: np.ndarray, gram: np.ndarray, max_iter: int = 5000, tol: float = 1e-10
) -> Tuple[np.ndarray, int]:
    """``argmin (r - r0)^T G (r - r0)`` over trace-preserving PSD points, by ADMM.

    Trace preservation is affine in ``r`` and eliminated exactly; positivity
    is handled by the splitting ``r = z`` with ``z`` projected onto the PSD
    cone. Returns the PSD iterate and the iteration count.
    """
    fr, tp = _FREE_INDEX, _TP_INDEX
    g_ff = gram[np.ix_(fr, fr)]
    rhs0 = g_ff @ r0[fr] - gram[np.ix_(fr, tp)] @ (_TP_VALUE - r0[tp])
    evals, vecs = np.linalg.eigh(g_ff)
    rho = float(np.sqrt(max(evals[0], 1e-12 * evals[-1]) * evals[-1]))
    z = _to_coeffs(_proj_psd(_to_choi(r0)))
    u = np.zeros(256)  # scaled dual
    r = np.empty(256)
    r[tp] = _TP_VALUE
    for k in range(max_iter):
        b = rhs0 + rho * (z[fr] - u[fr])
        r[fr] = vecs @ ((vecs.T @ b) / (evals + rho))
        z_old = z
        z = _to_coeffs(_proj_psd(_to_choi(r + u)))
        u = u + r - z
        primal = np.linalg.norm(r - z)
        dual = rho * np.linalg.norm(z - z_old)
        scale = 1 + np.linalg.norm(z)
        if primal < tol * scale and dual < tol * scale * rho:
            return z, k + 1
        # residual balancing
        if k % 20 == 19:
            if primal > 10 * dual / rho:
                rho, u = 2 * rho, u / 2
            elif dual / rho > 10 * primal:
                rho, u = rho / 2, u * 2
    return z, max_iter


def fit_choi(exp: Mapping[str, Mapping[str, float]], shots: Optional[int] = None) -> np.ndarray:
    """CPTP Choi matrix (trace ``d = 4``) from mitigated expectations keyed by label.

    The weighted linear-inversion estimate is projected onto the CPTP set in
    the metric of its own weighted normal equations, so well-determined
    expectations (outcomes near +-1) move least. The projection is solved by
    ADMM with trace preservation imposed exactly.
    """
    missing = set(qpt_labels()) - set(exp)
    if missing:
        raise TomographyError(f"incomplete tomography data: {len(missing)} experiments missing")
    a, y, w = _design(exp, shots)
    aw = a * w[:, None]
    r0, *_ = np.linalg.lstsq(aw, y * w, rcond=None)
    gram = aw.T @ aw
    r, _ = _weighted_projection(r0, gram)
    return _finalize(_to_choi(r))


def reconstruct(data: QPTData, mitigation: bool = True) -> np.ndarray:
    return fit_choi(mitigated_expectations(data, mitigation), data.shots)


# --- Choi serialization -----------------------------------------------------------------


def choi_to_dict(choi: np.ndarray, **meta) -> dict:
    choi = np.asarray(choi, dtype=complex)
    d = int(round(np.sqrt(choi.shape[0])))
    out = {"d": d, "data": [[float(z.real), float(z.imag)] for z in choi.reshape(-1)]}
    out.update(meta)
    return out


def choi_from_dict(data: Mapping) -> np.ndarray:
    d = int(data["d"])
    flat = np.asarray(data["data"], dtype=float)
    if flat.shape != (d**4, 2):
        raise TomographyError(f"Choi data has shape {flat.shape}, expected ({d**4}, 2)")
    return (flat[:, 0] + 1j * flat[:, 1]).reshape(d * d, d * d)


def dumps_choi(choi: np.ndarray, **meta) -> str:
    from .ir.serialize import dump_value

    return dump_value(choi_to_dict(choi, **meta))


def loads_choi(text: str) -> np.ndarray:
    return choi_from_dict(json.loads(text))


def check_choi(choi: np.ndarray, psd_tol: float = 1e-8, tp_tol: float = 1e-6) -> None:
    choi = np.asarray(choi)
    d = int(round(np.sqrt(choi.shape[0])))
    if not np.allclose(choi, choi.conj().T, atol=1e-10):
        raise TomographyError("Choi matrix is not Hermitian")
    if np.linalg.eigvalsh((choi + choi.conj().T) / 2).min() < -psd_tol:
        raise TomographyError("Choi matrix is not positive semidefinite")
    if np.abs(qm.partial_trace_output(choi) - np.eye(d)).max() > tp_tol:
        raise TomographyError("Choi matrix is not trace preserving")

