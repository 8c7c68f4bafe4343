"""Shared linear algebra: Pauli operators, vectorization and channel representations.

Conventions used throughout the package:

* Multi-qubit operators are little-endian: the label ``"ZX"`` is
  ``kron(Z, X)`` with ``Z`` acting on qubit 1 and ``X`` on qubit 0, and basis
  state ``|b1 b0>`` has index ``2*b1 + b0``.
* ``vec`` stacks columns, so ``vec(A @ X @ B) = kron(B.T, A) @ vec(X)`` and
  a unitary acts as the superoperator ``kron(U.conj(), U)``.
* The Choi matrix is ``sum_ij |i><j| (x) E(|i><j|)`` with the input space
  first; its trace is ``d``.
"""

from __future__ import annotations

import itertools
from functools import reduce
from typing import Iterable, Sequence, Tuple

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
N = np.array([[0, 0], [0, 1]], dtype=complex)
# lowering operator |0><1|
SM = np.array([[0, 1], [0, 0]], dtype=complex)

SINGLE = {"I": I2, "X": X, "Y": Y, "Z": Z, "N": N, "S": SM}
PAULI_LABELS = "IXYZ"


def operator(label: str) -> np.ndarray:
    """Tensor product of single-qubit factors named by ``label`` (leftmost = highest qubit)."""
    try:
        return reduce(np.kron, [SINGLE[c] for c in label.upper()])
    except KeyError as exc:
        raise ValueError(f"unknown operator letter in {label!r}") from exc


def pauli_labels(n_qubits: int):
    return ["".join(p) for p in itertools.product(PAULI_LABELS, repeat=n_qubits)]


def embed(op: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Place a single-qubit ``op`` on ``qubit`` of an ``n_qubits`` register."""
    factors = [I2] * n_qubits
    factors[n_qubits - 1 - qubit] = op
    return reduce(np.kron, factors)


def local(ops_by_qubit: Sequence[np.ndarray]) -> np.ndarray:
    """``kron`` of single-qubit operators given in qubit order 0, 1, ..."""
    return reduce(np.kron, list(reversed(ops_by_qubit)))


# --- rotations -----------------------------------------------------------------


def rx(theta: float) -> np.ndarray:
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * X


def ry(theta: float) -> np.ndarray:
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * Y


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def u3(theta: float, phi: float, lam: float) -> np.ndarray:
    """``Rz(phi) @ Ry(theta) @ Rz(lam)``."""
    return rz(phi) @ ry(theta) @ rz(lam)


CX10 = np.array(  # control qubit 1, target qubit 0
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CX01 = np.array(  # control qubit 0, target qubit 1
    [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
)


def cx(control: int, target: int) -> np.ndarray:
    if (control, target) == (1, 0):
        return CX10.copy()
    if (control, target) == (0, 1):
        return CX01.copy()
    raise ValueError("cx is defined on qubits {0, 1} only")


def zx_rotation(theta: float) -> np.ndarray:
    """``exp(-1j * theta * ZX / 2)``."""
    zx = operator("ZX")
    return np.cos(theta / 2) * np.eye(4) - 1j * np.sin(theta / 2) * zx


# --- vectorization and superoperators ------------------------------------------


def vec(mat: np.ndarray) -> np.ndarray:
    return np.asarray(mat).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape((d, d), order="F")


def unitary_superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u.conj(), u)


def hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> -i [H, rho]``."""
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def dissipator_superop(a: np.ndarray, rate: float = 1.0) -> np.ndarray:
    """Superoperator of ``rate * (A rho A^+ - {A^+ A, rho} / 2)``."""
    eye = np.eye(a.shape[0])
    ada = a.conj().T @ a
    return rate * (np.kron(a.conj(), a) - 0.5 * np.kron(eye, ada) - 0.5 * np.kron(ada.T, eye))


def lindblad_superop(h: np.ndarray, dissipators: Iterable[Tuple[np.ndarray, float]] = ()) -> np.ndarray:
    gen = hamiltonian_superop(h)
    for a, rate in dissipators:
        gen = gen + dissipator_superop(a, rate)
    return gen


def apply_superop(s: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return unvec(s @ vec(rho))


def _reshuffle(m: np.ndarray) -> np.ndarray:
    d2 = m.shape[0]
    d = int(round(np.sqrt(d2)))
    if m.shape != (d2, d2) or d * d != d2:
        raise ValueError(f"expected a d^2 x d^2 matrix, got shape {m.shape}")
    return m.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(d2, d2)


def choi_to_superop(choi: np.ndarray) -> np.ndarray:
    return _reshuffle(np.asarray(choi))


def superop_to_choi(superop: np.ndarray) -> np.ndarray:
    return _reshuffle(np.asarray(superop))


def unitary_choi(u: np.ndarray) -> np.ndarray:
    v = vec(u)
    return np.outer(v, v.conj())


def kraus_choi(kraus: Iterable[np.ndarray]) -> np.ndarray:
    return sum(unitary_choi(k) for k in kraus)


def partial_trace_output(choi: np.ndarray) -> np.ndarray:
    """Trace out the output (second) factor of a Choi matrix."""
    d = int(round(np.sqrt(choi.shape[0])))
    return np.einsum("iaja->ij", choi.reshape(d, d, d, d))


def process_fidelity(choi_a: np.ndarray, choi_b: np.ndarray) -> float:
    """Uhlmann fidelity between the normalized Choi states of two channels."""
    d = int(round(np.sqrt(choi_a.shape[0])))
    rho = _hermitian(choi_a) / d
    sigma = _hermitian(choi_b) / d
    sqrt_rho = _psd_sqrt(rho)
    inner = _hermitian(sqrt_rho @ sigma @ sqrt_rho)
    evals = np.clip(np.linalg.eigvalsh(inner), 0, None)
    return float(np.sum(np.sqrt(evals)) ** 2)


def _hermitian(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh(m)
    return (vecs * np.sqrt(np.clip(evals, 0, None))) @ vecs.conj().T


# --- random objects for tests and oracles --------------------------------------


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_kraus(d: int, rank: int, rng: np.random.Generator):
    """Kraus operators of a random CPTP map via a Haar-random isometry."""
    u = haar_unitary(d * rank, rng)
    iso = u[:, :d]
    return [iso[k * d : (k + 1) * d, :] for k in range(rank)]


def haar_state(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)
