"""Time-domain integration of scheduled controls.

The state is propagated in the interaction frame of ``H0 = diag(frame)``.
Channel ``k`` with baseband sample ``s`` (frame-rotated envelope times the
channel's hidden phase offset) and carrier ``w = 2*pi*f`` adds

    (H_k)_mn / 2 * (s * exp(i(E_mn + w)t) + conj(s) * exp(i(E_mn - w)t))

to element ``(m, n)``, where ``E_mn = E_m - E_n``. With the rotating-wave
flag on, components whose frequency exceeds ``rwa_cutoff`` are dropped.

Cycles in which any bound channel plays are integrated with a fourth-order
Magnus step (two Gauss points per substep). Idle stretches are propagated
exactly with the lab-frame generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .. import quantum as qm
from ..codegen import lower
from ..ir.channels import ChannelKind
from ..ir.instructions import ShiftPhase
from ..ir.schedule import Schedule
from .backend import BackendModel

_GAUSS = (0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6)


class UnboundChannelError(KeyError):
    """A schedule drives a channel with no Hamiltonian term in the backend."""


# --- lowering -----------------------------------------------------------------


@dataclass
class _Drive:
    samples: np.ndarray  # baseband per cycle, hidden phase offset applied
    omega: np.ndarray  # carrier angular frequency per cycle
    term: np.ndarray


def _drives(schedule: Schedule, backend: BackendModel) -> Tuple[int, List[_Drive]]:
    freqs = dict(backend.frequencies)
    for ch in schedule.channels:
        if ch.kind is ChannelKind.MEASURE:
            freqs.setdefault(ch, 0.0)
        elif ch.is_pulse_channel and ch not in backend.control_terms:
            raise UnboundChannelError(f"{ch} is not bound to a Hamiltonian term in backend {backend.name!r}")
        elif ch.is_pulse_channel and ch not in freqs:
            raise UnboundChannelError(f"{ch} has no initial frequency in backend {backend.name!r}")
    programs = lower(schedule, backend.dt, freqs)
    drives = []
    for ch, prog in programs.items():
        if ch not in backend.control_terms or not np.any(prog.samples):
            continue
        offset = np.exp(1j * backend.phase_offsets.get(ch, 0.0))
        drives.append(_Drive(prog.samples * offset, 2 * np.pi * prog.frequency, backend.control_terms[ch]))
    return schedule.duration, drives


# --- Hamiltonian assembly -------------------------------------------------------


def _hamiltonian(times: np.ndarray, cycles: np.ndarray, drives: List[_Drive], backend: BackendModel) -> np.ndarray:
    """Interaction-frame Hamiltonian at ``times`` (seconds); ``cycles`` maps each time to its cycle."""
    d = backend.dim
    energies = backend.frame_energies
    emn = energies[:, None] - energies[None, :]
    cutoff = 2 * np.pi * backend.rwa_cutoff
    h = np.zeros((times.size, d, d), dtype=complex)

    static = backend.h_sys - np.diag(energies)
    rows, cols = np.nonzero(np.abs(static) > 0)
    for m, n in zip(rows, cols):
        h[:, m, n] += static[m, n] * np.exp(1j * emn[m, n] * times)

    for drv in drives:
        s = drv.samples[cycles]
        w = drv.omega[cycles]
        rows, cols = np.nonzero(np.abs(drv.term) > 0)
        for m, n in zip(rows, cols):
            c = drv.term[m, n] / 2
            nu_p = emn[m, n] + w
            nu_m = emn[m, n] - w
            plus = c * s * np.exp(1j * nu_p * times)
            minus = c * np.conj(s) * np.exp(1j * nu_m * times)
            if backend.rwa:
                plus = np.where(np.abs(nu_p) < cutoff, plus, 0)
                minus = np.where(np.abs(nu_m) < cutoff, minus, 0)
            h[:, m, n] += plus + minus
    return h


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def _tree_product(mats: np.ndarray) -> np.ndarray:
    """``mats[-1] @ ... @ mats[0]`` by pairwise reduction."""
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            eye = np.broadcast_to(np.eye(mats.shape[1], dtype=complex), (1,) + mats.shape[1:])
            mats = np.concatenate([mats, eye])
        mats = mats[1::2] @ mats[0::2]
    return mats[0]


def _active_step_ops(lo: int, hi: int, drives, backend: BackendModel, lindblad: bool) -> np.ndarray:
    """Per-substep propagators for cycles ``[lo, hi)`` in time order."""
    n_sub = backend.substeps
    h_step = backend.dt / n_sub
    cyc = np.arange(lo, hi)
    starts = (cyc[:, None] * n_sub + np.arange(n_sub)[None, :]).ravel() * h_step
    t1 = starts + _GAUSS[0] * h_step
    t2 = starts + _GAUSS[1] * h_step
    cyc_rep = np.repeat(cyc, n_sub)
    h1 = _hamiltonian(t1, cyc_rep, drives, backend)
    h2 = _hamiltonian(t2, cyc_rep, drives, backend)
    c = np.sqrt(3) * h_step**2 / 12
    if not lindblad:
        # Omega = -i K with K Hermitian
        k = h_step / 2 * (h1 + h2) - 1j * c * _commutator(h2, h1)
        k = (k + np.conj(np.swapaxes(k, -1, -2))) / 2
        evals, vecs = np.linalg.eigh(k)
        return (vecs * np.exp(-1j * evals)[:, None, :]) @ np.conj(np.swapaxes(vecs, -1, -2))
    diss = sum((qm.dissipator_superop(a, r) for a, r in backend.dissipators), 0)
    a1 = _ham_superop_batch(h1) + diss
    a2 = _ham_superop_batch(h2) + diss
    omega = h_step / 2 * (a1 + a2) + c * _commutator(a2, a1)
    return expm(omega)


def _ham_superop_batch(h: np.ndarray) -> np.ndarray:
    d = h.shape[-1]
    eye = np.eye(d)
    left = np.einsum("ab,nij->naibj", eye, h).reshape(-1, d * d, d * d)
    right = np.einsum("nji,ab->niajb", h, eye).reshape(-1, d * d, d * d)
    return -1j * (left - right)


def _idle_op(lo: int, hi: int, backend: BackendModel, lindblad: bool) -> np.ndarray:
    energies = backend.frame_energies
    t1, t2 = lo * backend.dt, hi * backend.dt
    f2 = np.diag(np.exp(1j * energies * t2))
    f1 = np.diag(np.exp(-1j * energies * t1))
    if not lindblad:
        static = backend.h_sys - np.diag(energies)
        if not np.any(np.abs(static) > 0):
            # lab evolution is diagonal and cancels the frame exactly
            return np.diag(np.exp(-1j * np.diag(static).real * (t2 - t1)))
        return f2 @ expm(-1j * backend.h_sys * (t2 - t1)) @ f1
    gen = qm.lindblad_superop(backend.h_sys, backend.dissipators)
    return qm.unitary_superop(f2) @ expm(gen * (t2 - t1)) @ qm.unitary_superop(f1)


def _runs(active: np.ndarray, lo: int, hi: int):
    """Split ``[lo, hi)`` into maximal runs of equal ``active`` value."""
    t = lo
    while t < hi:
        flag = bool(active[t])
        end = t + 1
        while end < hi and bool(active[end]) == flag:
            end += 1
        yield t, end, flag
        t = end


_CHUNK = 4096


def _propagate(lo: int, hi: int, active: np.ndarray, drives, backend: BackendModel, lindblad: bool) -> np.ndarray:
    size = backend.dim**2 if lindblad else backend.dim
    total = np.eye(size, dtype=complex)
    for a, b, is_active in _runs(active, lo, hi):
        if not is_active:
            total = _idle_op(a, b, backend, lindblad) @ total
            continue
        for c0 in range(a, b, _CHUNK):
            ops = _active_step_ops(c0, min(b, c0 + _CHUNK), drives, backend, lindblad)
            total = _tree_product(ops) @ total
    return total


def _is_lindblad(backend: BackendModel) -> bool:
    return any(rate > 0 for _, rate in backend.dissipators)


def _activity(n: int, drives) -> np.ndarray:
    active = np.zeros(n, dtype=bool)
    for drv in drives:
        active |= np.abs(drv.samples) > 0
    return active


def frame_phases(schedule: Schedule, n_qubits: int) -> np.ndarray:
    """Net ``ShiftPhase`` accumulated on each drive channel ``d<q>``."""
    phases = np.zeros(n_qubits)
    for _, inst in schedule.entries:
        if isinstance(inst, ShiftPhase) and inst.channel.kind is ChannelKind.DRIVE and inst.channel.index < n_qubits:
            phases[inst.channel.index] += inst.phase
    return phases


def _frame_correction(schedule: Schedule, backend: BackendModel) -> np.ndarray:
    phases = frame_phases(schedule, backend.n_qubits)
    return qm.local([qm.rz(p) for p in phases])


# --- public API -----------------------------------------------------------------


def evolve_unitary(schedule: Schedule, backend: BackendModel, virtual_z_correction: bool = False) -> np.ndarray:
    """Interaction-frame propagator of a dissipation-free backend.

    With ``virtual_z_correction`` the net frame shift of every drive channel
    is undone at the end, so each ``ShiftPhase(a)`` acts as an ``Rz(a)`` gate
    at its timestamp.
    """
    if _is_lindblad(backend):
        raise ValueError("backend has dissipation; use evolve_superoperator")
    n, drives = _drives(schedule, backend)
    u = _propagate(0, n, _activity(n, drives), drives, backend, False)
    if virtual_z_correction:
        u = _frame_correction(schedule, backend) @ u
    return u


def evolve_superoperator(schedule: Schedule, backend: BackendModel, virtual_z_correction: bool = False) -> np.ndarray:
    """Process matrix (column-stacking convention) of the whole schedule."""
    n, drives = _drives(schedule, backend)
    active = _activity(n, drives)
    if _is_lindblad(backend):
        s = _propagate(0, n, active, drives, backend, True)
    else:
        s = qm.unitary_superop(_propagate(0, n, active, drives, backend, False))
    if virtual_z_correction:
        s = qm.unitary_superop(_frame_correction(schedule, backend)) @ s
    return s


@dataclass
class SimResult:
    """Outcome of :func:`simulate`.

    ``probabilities`` is the exact distribution over memory-slot bitstrings
    (index ``int(bits, 2)``, highest slot leftmost) before readout noise.
    ``iq`` maps slot to per-shot complex level-1 values; ``memory`` holds the
    per-shot level-2 bitstrings and ``counts`` their histogram.
    """

    rho: np.ndarray
    n_slots: int
    probabilities: np.ndarray
    shots: int = 0
    iq: Dict[int, np.ndarray] = field(default_factory=dict)
    bits: Dict[int, np.ndarray] = field(default_factory=dict)
    memory: List[str] = field(default_factory=list)
    counts: Dict[str, int] = field(default_factory=dict)
    slot_qubits: Dict[int, int] = field(default_factory=dict)

    def expectation_z(self, slot: int) -> float:
        """Exact ``<Z>`` of the qubit written to ``slot``."""
        idx = np.arange(self.probabilities.size)
        sign = 1 - 2 * ((idx >> slot) & 1)
        return float(np.dot(sign, self.probabilities))


def _acquisitions(schedule: Schedule) -> List[Tuple[int, int, int]]:
    """``(end_time, qubit, slot)`` per Acquire."""
    from ..ir.instructions import Acquire

    out = []
    for t, inst in schedule.entries:
        if isinstance(inst, Acquire):
            out.append((t + inst.duration, inst.channel.index, inst.register))
    return sorted(out)


def _marginal(rho: np.ndarray, qubits: Sequence[int], n_qubits: int) -> np.ndarray:
    """Joint distribution of ``qubits`` (index bit k = qubits[k])."""
    diag = np.clip(np.real(np.diag(rho)), 0, None)
    idx = np.arange(diag.size)
    key = np.zeros_like(idx)
    for k, q in enumerate(qubits):
        key |= ((idx >> q) & 1) << k
    out = np.bincount(key, weights=diag, minlength=2 ** len(qubits))
    return out / out.sum()


def simulate(
    schedule: Schedule,
    backend: BackendModel,
    shots: Optional[int] = 1024,
    seed=None,
    rho0: Optional[np.ndarray] = None,
    discriminators=None,
) -> SimResult:
    """Run ``schedule`` and sample measurement records.

    Every Acquire samples its qubit from the state at the end of its window
    (no collapse). Acquires ending at the same time are sampled jointly.
    ``shots=None`` skips sampling and only fills the exact probabilities.
    Level-2 bits come from ``discriminators`` (one per qubit, anything with
    a ``classify`` method); by default the LDA rule implied by the backend's
    readout statistics is used.
    """
    d = backend.dim
    rho = np.zeros((d, d), dtype=complex)
    if rho0 is None:
        rho[0, 0] = 1.0
    else:
        rho = np.asarray(rho0, dtype=complex)
    n, drives = _drives(schedule, backend)
    active = _activity(n, drives)
    lindblad = _is_lindblad(backend)
    acqs = _acquisitions(schedule)
    checkpoints = sorted({t for t, _, _ in acqs} | {n})

    states: Dict[int, np.ndarray] = {}
    t_prev = 0
    for t in checkpoints:
        op = _propagate(t_prev, t, active, drives, backend, lindblad)
        rho = qm.apply_superop(op, rho) if lindblad else op @ rho @ op.conj().T
        rho = (rho + rho.conj().T) / 2
        states[t] = rho
        t_prev = t

    n_slots = max((slot for _, _, slot in acqs), default=-1) + 1
    slot_qubits = {slot: q for _, q, slot in acqs}
    probs = np.zeros(2**n_slots)
    if n_slots:
        probs = _slot_distribution(acqs, states, backend.n_qubits, n_slots)
    result = SimResult(rho=rho, n_slots=n_slots, probabilities=probs, slot_qubits=slot_qubits)
    if not shots or not acqs:
        return result

    rng = np.random.default_rng(seed)
    if discriminators is None:
        from ..readout import discriminator_from_stats

        discriminators = [discriminator_from_stats(r.means, r.covs) for r in backend.readout]
    result.shots = int(shots)
    bits_by_slot: Dict[int, np.ndarray] = {}
    for t_end in sorted({t for t, _, _ in acqs}):
        group = [(q, slot) for t, q, slot in acqs if t == t_end]
        qubits = [q for q, _ in group]
        dist = _marginal(states[t_end], qubits, backend.n_qubits)
        outcome = rng.choice(dist.size, size=shots, p=dist)
        for k, (q, slot) in enumerate(group):
            state_bits = (outcome >> k) & 1
            iq = _draw_iq(rng, backend.readout[q], state_bits) if backend.readout else state_bits.astype(complex)
            result.iq[slot] = iq
            if backend.readout:
                bits_by_slot[slot] = np.asarray(discriminators[q].classify(iq), dtype=int)
            else:
                bits_by_slot[slot] = state_bits
    result.bits = bits_by_slot
    words = np.zeros(shots, dtype=np.int64)
    for slot, b in bits_by_slot.items():
        words |= b.astype(np.int64) << slot
    result.memory = [format(int(w), f"0{n_slots}b") for w in words]
    keys, freq = np.unique(words, return_counts=True)
    result.counts = {format(int(k), f"0{n_slots}b"): int(c) for k, c in zip(keys, freq)}
    return result


def _slot_distribution(acqs, states, n_qubits: int, n_slots: int) -> np.ndarray:
    """Exact joint slot distribution; groups at different times are independent."""
    probs = np.ones(1)
    probs_slots: List[int] = []
    for t_end in sorted({t for t, _, _ in acqs}):
        group = [(q, slot) for t, q, slot in acqs if t == t_end]
        dist = _marginal(states[t_end], [q for q, _ in group], n_qubits)
        probs = np.kron(dist, probs)
        probs_slots += [slot for _, slot in group]
    # probs index bit k corresponds to probs_slots[k]; scatter onto slot order
    out = np.zeros(2**n_slots)
    idx = np.arange(probs.size)
    target = np.zeros_like(idx)
    for k, slot in enumerate(probs_slots):
        target |= ((idx >> k) & 1) << slot
    np.add.at(out, target, probs)
    return out


def _draw_iq(rng: np.random.Generator, stats, state_bits: np.ndarray) -> np.ndarray:
    out = np.empty(state_bits.size, dtype=complex)
    for b in (0, 1):
        mask = state_bits == b
        k = int(mask.sum())
        if not k:
            continue
        mean = np.array([stats.means[b].real, stats.means[b].imag])
        pts = rng.multivariate_normal(mean, stats.covs[b], size=k, method="eigh")
        out[mask] = pts[:, 0] + 1j * pts[:, 1]
    return out
