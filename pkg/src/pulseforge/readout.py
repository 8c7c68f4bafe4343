"""Readout chain: boxcar kernel, linear discriminant, assignment fidelity and crosstalk tests."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats


class ReadoutError(ValueError):
    pass


def boxcar_kernel(trace: Sequence[complex], window: Optional[Tuple[int, int]] = None) -> complex:
    """Mean of ``trace[start:stop]`` (the whole trace when ``window`` is None)."""
    arr = np.asarray(trace, dtype=complex)
    start, stop = (0, arr.size) if window is None else window
    if not 0 <= start < stop <= arr.size:
        raise ReadoutError(f"window {window} is empty or outside a trace of length {arr.size}")
    return complex(np.mean(arr[start:stop]))


def _xy(points) -> np.ndarray:
    z = np.asarray(points, dtype=complex).ravel()
    return np.column_stack([z.real, z.imag])


@dataclass(frozen=True)
class LinearDiscriminator:
    """``classify(z) = 1`` iff ``w . [Re z, Im z] + b > 0``."""

    w: np.ndarray
    b: float
    means: Tuple[complex, complex] = (0j, 0j)
    cov: Optional[np.ndarray] = None

    def decision(self, points) -> np.ndarray:
        return _xy(points) @ np.asarray(self.w) + self.b

    def classify(self, points) -> np.ndarray:
        return (self.decision(points) > 0).astype(int)

    def boundary(self, x: np.ndarray) -> np.ndarray:
        """Q coordinate of the decision line at the given I values."""
        w0, w1 = self.w
        if w1 == 0:
            raise ReadoutError("boundary is vertical")
        return -(w0 * np.asarray(x) + self.b) / w1

    def to_dict(self) -> dict:
        return {
            "w": [float(v) for v in self.w],
            "b": float(self.b),
            "means": [[m.real, m.imag] for m in self.means],
            "cov": None if self.cov is None else np.asarray(self.cov).tolist(),
        }


def _lda(mu0: np.ndarray, mu1: np.ndarray, cov: np.ndarray, log_prior_ratio: float = 0.0) -> Tuple[np.ndarray, float]:
    scale = max(float(np.trace(cov)) / 2, 1e-300)
    if np.linalg.cond(cov) > 1e12:
        cov = cov + 1e-9 * scale * np.eye(2)
    w = np.linalg.solve(cov, mu1 - mu0)
    b = -float(w @ (mu0 + mu1)) / 2 + log_prior_ratio
    return w, b


def fit_lda(points, labels) -> LinearDiscriminator:
    """Two-class LDA with pooled covariance; priors from the class frequencies."""
    xy = _xy(points)
    y = np.asarray(labels).ravel().astype(int)
    if xy.shape[0] != y.size:
        raise ReadoutError("points and labels differ in length")
    if not (np.any(y == 0) and np.any(y == 1)):
        raise ReadoutError("both classes are needed to fit a discriminator")
    x0, x1 = xy[y == 0], xy[y == 1]
    mu0, mu1 = x0.mean(axis=0), x1.mean(axis=0)
    dof = max(xy.shape[0] - 2, 1)
    pooled = ((x0 - mu0).T @ (x0 - mu0) + (x1 - mu1).T @ (x1 - mu1)) / dof
    w, b = _lda(mu0, mu1, pooled, float(np.log(len(x1) / len(x0))))
    return LinearDiscriminator(w, b, (complex(*mu0), complex(*mu1)), pooled)


def discriminator_from_stats(means: Sequence[complex], covs: Sequence[np.ndarray]) -> LinearDiscriminator:
    """LDA rule for known Gaussian clouds with equal priors."""
    mu0 = np.array([means[0].real, means[0].imag])
    mu1 = np.array([means[1].real, means[1].imag])
    pooled = (np.asarray(covs[0], float) + np.asarray(covs[1], float)) / 2
    w, b = _lda(mu0, mu1, pooled)
    return LinearDiscriminator(w, b, (complex(means[0]), complex(means[1])), pooled)


def bayes_fidelity(mu0: complex, mu1: complex, cov: np.ndarray) -> float:
    """Assignment fidelity of the optimal linear rule for two equal-covariance Gaussians."""
    delta = np.array([mu1.real - mu0.real, mu1.imag - mu0.imag])
    mahal = float(np.sqrt(delta @ np.linalg.solve(np.asarray(cov, float), delta)))
    return float(stats.norm.cdf(mahal / 2))


def jeffreys_interval(k: int, n: int, level: float = 0.95) -> Tuple[float, float]:
    """Jeffreys interval for a binomial rate; endpoints pinned at 0 and 1 when k is 0 or n."""
    if n <= 0:
        raise ReadoutError("no trials")
    alpha = 1 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2, k + 0.5, n - k + 0.5))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - alpha / 2, k + 0.5, n - k + 0.5))
    return lo, hi


@dataclass
class AssignmentFidelityReport:
    fidelity: float
    interval: Tuple[float, float]
    p1_given_0: float
    p0_given_1: float
    shots: Dict[int, int]
    level: float = 0.95

    def to_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "interval": list(self.interval),
            "p1_given_0": self.p1_given_0,
            "p0_given_1": self.p0_given_1,
            "shots": {str(k): v for k, v in self.shots.items()},
            "level": self.level,
        }


def assignment_fidelity(discriminator, points, labels, level: float = 0.95) -> AssignmentFidelityReport:
    """``F_a = 1 - (Pr[0|1] + Pr[1|0]) / 2`` with a Jeffreys interval.

    Each error rate gets its own interval; the two are combined by interval
    arithmetic into bounds on ``F_a``.
    """
    y = np.asarray(labels).ravel().astype(int)
    pred = np.asarray(discriminator.classify(points)).ravel()
    n0, n1 = int(np.sum(y == 0)), int(np.sum(y == 1))
    if not n0 or not n1:
        raise ReadoutError("both prepared states need at least one shot")
    k10 = int(np.sum(pred[y == 0] == 1))
    k01 = int(np.sum(pred[y == 1] == 0))
    e10, e01 = k10 / n0, k01 / n1
    lo10, hi10 = jeffreys_interval(k10, n0, level)
    lo01, hi01 = jeffreys_interval(k01, n1, level)
    fa = 1 - (e10 + e01) / 2
    return AssignmentFidelityReport(
        fidelity=fa,
        interval=(1 - (hi10 + hi01) / 2, 1 - (lo10 + lo01) / 2),
        p1_given_0=e10,
        p0_given_1=e01,
        shots={0: n0, 1: n1},
        level=level,
    )


# --- crosstalk ------------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationTest:
    qubit: int
    state: int
    x: str  # component of the shots taken with the other qubit excited
    y: str  # component of the shots taken with the other qubit in ground
    r: float
    t: float
    p: float
    n: int


def pearson_test(a: np.ndarray, b: np.ndarray) -> Tuple[float, float, float]:
    """Pearson ``r`` with ``t = r sqrt((n-2)/(1-r^2))`` and a two-sided p-value on ``n-2`` dof."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n = a.size
    if n != b.size or n < 3:
        raise ReadoutError("need two equal-length samples of at least 3 shots")
    da, db = a - a.mean(), b - b.mean()
    va, vb = float(da @ da), float(db @ db)
    if va == 0 or vb == 0:
        raise ReadoutError("zero-variance component")
    r = float(np.clip(da @ db / np.sqrt(va * vb), -1.0, 1.0))
    if abs(r) == 1.0:
        return r, float(np.copysign(np.inf, r)), 0.0
    t = r * np.sqrt((n - 2) / (1 - r * r))
    p = float(2 * stats.t.sf(abs(t), n - 2))
    return r, float(t), p


def _component(z: np.ndarray, name: str) -> np.ndarray:
    return z.real if name == "I" else z.imag


def crosstalk_test(data: Mapping[str, Mapping[int, np.ndarray]], qubits: Tuple[int, int] = (0, 1)) -> List[CorrelationTest]:
    """Sixteen shot-paired correlation tests between calibration schedules.

    ``data["cal_<s_hi><s_lo>"][q]`` holds the complex level-1 shots of qubit
    ``q`` (``s_hi`` is the state of ``qubits[1]``). For qubit ``i`` in state
    ``j`` the ``X`` component of shots with the other qubit excited is paired
    shot by shot with the ``Y`` component of shots with it in ground.
    """
    lo_q, hi_q = qubits
    tests = []
    for i in (lo_q, hi_q):
        for j in (0, 1):
            if i == lo_q:
                es, gs = f"cal_1{j}", f"cal_0{j}"
            else:
                es, gs = f"cal_{j}1", f"cal_{j}0"
            try:
                z_es = np.asarray(data[es][i], dtype=complex)
                z_gs = np.asarray(data[gs][i], dtype=complex)
            except KeyError as exc:
                raise ReadoutError(f"missing calibration data {exc}") from exc
            if z_es.size != z_gs.size:
                raise ReadoutError("calibration schedules must have equal shot counts")
            for x in "IQ":
                for y in "IQ":
                    r, t, p = pearson_test(_component(z_es, x), _component(z_gs, y))
                    tests.append(CorrelationTest(i, j, x, y, r, t, p, z_es.size))
    return tests
