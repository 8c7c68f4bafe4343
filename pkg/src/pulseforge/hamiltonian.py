"""Effective-Hamiltonian estimation from process matrices.

A measured two-qubit channel ``S_E`` is turned into a Lindblad generator by a
principal matrix logarithm, and the Hamiltonian part is projected onto the
orthonormal basis ``B_ij = P_i (x) P_j / 2``. With ``H = sum_ij w_ij B_ij``
the unitary part is ``exp(-i t sum w_ij P_ij / 2)``, so ``w_ZX * t`` is the
controlled-rotation angle.

The third-order cross-resonance model relates the ZX rate to the
time-averaged pulse amplitude ``A``; in angular units

    w_ZX(A) = 2*pi*(-(J lam A / D) * d1 / (d1 + D) + J (lam A)^3 K(d1, D))

with ``J, lam, D, d1`` in Hz.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from scipy.linalg import expm, logm
from scipy.optimize import brentq, least_squares

from . import quantum as qm

REPORTED = ("ZI", "ZX", "ZY", "ZZ", "IX", "IY", "IZ")


class BranchCutError(ValueError):
    """An eigenvalue of the process sits on the negative real axis."""


class FitError(RuntimeError):
    pass


def basis_operator(label: str) -> np.ndarray:
    """``B = P / 2`` for a two-qubit Pauli label; orthonormal under the trace inner product."""
    p = qm.operator(label)
    return p / np.sqrt(p.shape[0])


def generator(superop: np.ndarray, t: float, tol: float = 1e-10) -> np.ndarray:
    """``log(S_E) / t`` with the principal branch."""
    if t <= 0:
        raise ValueError("evolution time must be positive")
    s = np.asarray(superop, dtype=complex)
    evals = np.linalg.eigvals(s)
    bad = evals[(np.abs(evals.imag) <= tol * np.maximum(1.0, np.abs(evals))) & (evals.real < 0)]
    if bad.size:
        raise BranchCutError(
            f"eigenvalue {bad[0]:.3g} on the negative real axis: a rotation angle reaches pi, shorten the evolution"
        )
    if np.any(np.abs(evals) < 1e-300):
        raise BranchCutError("singular process matrix has no logarithm")
    log = logm(s)
    return np.asarray(log, dtype=complex) / t


def hamiltonian_superop_of(coefficients: Dict[str, float]) -> np.ndarray:
    """``S_{L_H}`` for ``H = sum w_ij B_ij``."""
    h = sum(w * basis_operator(lbl) for lbl, w in coefficients.items())
    return qm.hamiltonian_superop(np.asarray(h, dtype=complex))


@dataclass
class HamiltonianCoefficients:
    """Rates ``w_ij`` (rad/s) of ``H = sum w_ij B_ij`` over all 16 Pauli labels."""

    table: Dict[str, float]
    t_cr: Optional[float] = None
    n_cr: Optional[int] = None

    def __getitem__(self, label: str) -> float:
        return self.table[label]

    @property
    def reported(self) -> Dict[str, float]:
        return {k: self.table[k] for k in REPORTED}

    def hamiltonian(self) -> np.ndarray:
        return sum(w * basis_operator(lbl) for lbl, w in self.table.items())

    def to_dict(self) -> dict:
        return {"table": dict(self.table), "t_cr": self.t_cr, "n_cr": self.n_cr}


def extract_coefficients(s_g: np.ndarray, t_cr: Optional[float] = None, n_cr: Optional[int] = None) -> HamiltonianCoefficients:
    """Project a generator onto each ``S_{L_B}`` (squared Frobenius normalization)."""
    s_g = np.asarray(s_g, dtype=complex)
    n = int(round(np.log2(np.sqrt(s_g.shape[0]))))
    table = {}
    for label in qm.pauli_labels(n):
        sl = qm.hamiltonian_superop(basis_operator(label))
        norm = np.vdot(sl, sl).real
        table[label] = 0.0 if norm == 0 else float(np.real(np.vdot(sl, s_g)) / norm)
    return HamiltonianCoefficients(table, t_cr, n_cr)


def coefficients_from_superop(superop: np.ndarray, t: float, **meta) -> HamiltonianCoefficients:
    return extract_coefficients(generator(superop, t), t_cr=meta.get("t_cr"), n_cr=meta.get("n_cr"))


def model_process_fidelity(coeffs: HamiltonianCoefficients, choi: np.ndarray, t: float) -> float:
    """Process fidelity between ``exp(-i H t)`` and a measured Choi matrix."""
    u = expm(-1j * coeffs.hamiltonian() * t)
    return qm.process_fidelity(qm.unitary_choi(u), choi)


# --- third-order model ------------------------------------------------------------


def _model_constants(delta: float, anharm: float) -> Tuple[float, float]:
    """``(c1, c3)`` with ``w_ZX/(2 pi) = c1 * J lam A + c3 * J lam^3 A^3``."""
    d, d1 = delta, anharm
    c1 = -(1.0 / d) * d1 / (d1 + d)
    num = d1**2 * (3 * d1**3 + 11 * d1**2 * d + 15 * d1 * d**2 + 9 * d**3)
    den = 4 * d**3 * (d1 + d) ** 3 * (d1 + 2 * d) * (3 * d1 + 2 * d)
    return c1, num / den


def third_order_zx(amplitude, J: float, lam: float, delta: float, anharm: float):
    """``w_ZX`` in rad/s at time-averaged amplitude ``amplitude``; all rates in Hz."""
    a = np.asarray(amplitude, dtype=float)
    c1, c3 = _model_constants(delta, anharm)
    return 2 * np.pi * (c1 * J * lam * a + c3 * J * lam**3 * a**3)


@dataclass
class ThirdOrderFit:
    J: float
    lam: float
    delta: float
    anharm: float
    covariance: np.ndarray
    residual: float
    linear: float  # J*lam in Hz^2
    cubic: float  # J*lam^3 in Hz^4
    converged: bool = True
    n_points: int = 0
    identifiable: bool = True

    @property
    def stderr(self) -> Tuple[float, float]:
        return tuple(float(np.sqrt(max(v, 0.0))) for v in np.diag(self.covariance))

    def zx(self, amplitude):
        a = np.asarray(amplitude, dtype=float)
        c1, c3 = _model_constants(self.delta, self.anharm)
        return 2 * np.pi * (c1 * self.linear * a + c3 * self.cubic * a**3)

    def to_dict(self) -> dict:
        # NaN marks unidentifiable parameters; JSON has no NaN, so use null
        def clean(v):
            return None if v is None or not np.isfinite(v) else float(v)

        cov = np.asarray(self.covariance, dtype=float)
        return {
            "J": clean(self.J),
            "lambda": clean(self.lam),
            "delta": self.delta,
            "anharmonicity": self.anharm,
            "linear": self.linear,
            "cubic": self.cubic,
            "stderr": [clean(v) for v in np.sqrt(np.abs(np.diag(cov)))] if np.isfinite(cov).all() else [None, None],
            "covariance": [[clean(v) for v in row] for row in cov],
            "residual": self.residual,
            "converged": self.converged,
            "identifiable": self.identifiable,
            "n_points": self.n_points,
        }


_MHZ = 1e6


def fit_third_order(points: Iterable[Tuple[float, float]], delta: float, anharm: float) -> ThirdOrderFit:
    """Least-squares fit of ``(J, lam)`` to ``(A, w_ZX)`` pairs (w_ZX in rad/s).

    ``J`` and ``lam`` enter only through ``J lam`` and ``J lam^3``; the model
    is linear in those, so they are solved exactly first and then refined
    over ``(J, lam)`` with ``J > 0`` by convention. Standard errors come from
    the Jacobian at the optimum.
    """
    pts = sorted((float(a), float(w)) for a, w in points)
    if len(pts) < 4:
        raise ValueError("at least four amplitude points are needed")
    if delta == 0:
        raise ValueError("detuning must be nonzero")
    for bad in (-delta, -2 * delta, -2 * delta / 3):
        if np.isclose(anharm, bad, rtol=1e-12, atol=0):
            raise ValueError("anharmonicity sits on a pole of the model")
    amp = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts]) / (2 * np.pi * _MHZ)  # MHz
    d, d1 = delta / _MHZ, anharm / _MHZ
    c1, c3 = _model_constants(d, d1)

    design = np.column_stack([c1 * amp, c3 * amp**3])
    (lin, cub), *_ = np.linalg.lstsq(design, y, rcond=None)
    scale = float(np.dot(y, y)) or 1.0

    if lin == 0 or cub / lin <= 0:
        # the cubic term is not resolved: the (J, lam) map has no finite
        # preimage, so fall back to the nested linear model
        (lin,), *_ = np.linalg.lstsq(design[:, :1], y, rcond=None)
        res = y - design[:, 0] * lin
        return ThirdOrderFit(
            np.nan, np.nan, delta, anharm, np.full((2, 2), np.nan), float(res @ res / scale),
            lin * _MHZ**2, 0.0, True, len(pts), identifiable=False,
        )

    lam0 = np.sign(lin) * np.sqrt(cub / lin)
    j0 = lin / lam0

    def resid(p):
        J, lam = p
        return c1 * J * lam * amp + c3 * J * lam**3 * amp**3 - y

    sol = least_squares(resid, [j0, lam0], method="lm", max_nfev=200, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if sol.status <= 0:
        raise FitError(f"third-order fit did not converge: {sol.message}")
    J, lam = sol.x
    if J < 0:
        J, lam = -J, -lam
    r = resid([J, lam])
    jac = sol.jac
    dof = max(len(pts) - 2, 1)
    s2 = float(r @ r) / dof
    try:
        cov = np.linalg.inv(jac.T @ jac) * s2
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.nan)
    cov = cov * _MHZ**2
    return ThirdOrderFit(
        float(J * _MHZ), float(lam * _MHZ), delta, anharm, cov, float(r @ r / scale),
        float(J * lam * _MHZ**2), float(J * lam**3 * _MHZ**4), True, len(pts),
    )


def solve_pi_half_amplitude(fit: ThirdOrderFit, t_cr: float, n_cr: int = 1, lo: float = 1e-6, hi: float = 1.0) -> float:
    """Smallest ``A`` in ``[lo, hi]`` with ``n_cr * w_ZX(A) * t_cr = pi/2`` (in magnitude)."""
    # orientation of the rotation is set by the linear regime
    sign = np.sign(fit.zx(lo)) or 1.0

    def f(a):
        return sign * n_cr * fit.zx(a) * t_cr - np.pi / 2

    grid = np.linspace(lo, hi, 2001)
    vals = f(grid)
    idx = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if vals[0] == 0:
        return float(lo)
    if not idx.size:
        raise FitError("no pi/2 amplitude within the amplitude range")
    k = idx[0]
    return float(brentq(f, grid[k], grid[k + 1], xtol=1e-14, rtol=1e-12))
