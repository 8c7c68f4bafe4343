"""Pulse envelopes: explicit sample lists and parametric shapes.

Every pulse is a complex envelope sampled once per cycle. Sample magnitudes
are bounded by one; constructors raise :class:`PulseError` otherwise.

Closed forms used for the parametric shapes (``j`` is the sample index,
``c = (duration - 1) / 2`` the centre):

* ``Gaussian``: ``amp * exp(-(j - c)**2 / (2 sigma**2))``, no baseline lift.
* ``GaussianSquare``: flat ``amp`` on ``[c - w/2, c + w/2]`` and Gaussian
  flanks of width ``sigma`` outside it; ``w = 0`` reproduces ``Gaussian``.
* ``Drag``: ``g_j + 1j * beta * (g_{j+1} - g_{j-1}) / 2`` with ``g`` the
  Gaussian and one-sided differences at both ends.
* ``Constant``: ``amp`` for every sample.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Union

import numpy as np

_NORM_SLACK = 1e-12


class PulseError(ValueError):
    """Invalid pulse parameters or samples exceeding unit norm."""


def _check_norm(samples: np.ndarray, label: str) -> None:
    if samples.size and np.max(np.abs(samples)) > 1.0 + _NORM_SLACK:
        raise PulseError(
            f"{label}: sample magnitude {np.max(np.abs(samples)):.6g} exceeds unit norm"
        )


@dataclass(frozen=True)
class SampledPulse:
    samples: tuple = field()
    name: str = ""

    def __post_init__(self):
        values = tuple(complex(s) for s in np.asarray(self.samples, dtype=complex).ravel())
        if not values:
            raise PulseError("a pulse needs at least one sample")
        object.__setattr__(self, "samples", values)
        _check_norm(np.asarray(values), self.name or "SampledPulse")

    @property
    def duration(self) -> int:
        return len(self.samples)

    def to_array(self) -> np.ndarray:
        return np.array(self.samples, dtype=complex)


def _validate_common(duration, sigma=None):
    if not isinstance(duration, (int, np.integer)) or isinstance(duration, bool) or duration <= 0:
        raise PulseError(f"duration must be a positive integer, got {duration!r}")
    if sigma is not None and not (np.isfinite(sigma) and sigma > 0):
        raise PulseError(f"sigma must be positive, got {sigma!r}")


def _gaussian(duration: int, amp: complex, sigma: float, width: float = 0.0) -> np.ndarray:
    j = np.arange(duration, dtype=float)
    centre = (duration - 1) / 2
    lo, hi = centre - width / 2, centre + width / 2
    dist = np.where(j < lo, lo - j, np.where(j > hi, j - hi, 0.0))
    return amp * np.exp(-(dist**2) / (2 * sigma**2))


@dataclass(frozen=True)
class Gaussian:
    duration: int
    amp: complex
    sigma: float
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "amp", complex(self.amp))
        object.__setattr__(self, "sigma", float(self.sigma))
        _validate_common(self.duration, self.sigma)
        object.__setattr__(self, "duration", int(self.duration))
        _check_norm(_sample_cached(self), self.name or "Gaussian")

    def envelope(self) -> np.ndarray:
        return _gaussian(self.duration, self.amp, self.sigma)


@dataclass(frozen=True)
class GaussianSquare:
    duration: int
    amp: complex
    sigma: float
    square_width: float
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "amp", complex(self.amp))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "square_width", float(self.square_width))
        _validate_common(self.duration, self.sigma)
        object.__setattr__(self, "duration", int(self.duration))
        if not 0 <= self.square_width <= self.duration:
            raise PulseError(
                f"square_width must lie in [0, duration={self.duration}], got {self.square_width}"
            )
        _check_norm(_sample_cached(self), self.name or "GaussianSquare")

    def envelope(self) -> np.ndarray:
        return _gaussian(self.duration, self.amp, self.sigma, self.square_width)


@dataclass(frozen=True)
class Drag:
    duration: int
    amp: complex
    sigma: float
    beta: float
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "amp", complex(self.amp))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "beta", float(self.beta))
        _validate_common(self.duration, self.sigma)
        object.__setattr__(self, "duration", int(self.duration))
        _check_norm(_sample_cached(self), self.name or "Drag")

    def envelope(self) -> np.ndarray:
        g = _gaussian(self.duration, self.amp, self.sigma)
        if self.duration == 1:
            return g
        deriv = np.empty_like(g)
        deriv[1:-1] = (g[2:] - g[:-2]) / 2
        deriv[0] = g[1] - g[0]
        deriv[-1] = g[-1] - g[-2]
        return g + 1j * self.beta * deriv


@dataclass(frozen=True)
class Constant:
    duration: int
    amp: complex
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "amp", complex(self.amp))
        _validate_common(self.duration)
        object.__setattr__(self, "duration", int(self.duration))
        _check_norm(_sample_cached(self), self.name or "Constant")

    def envelope(self) -> np.ndarray:
        return np.full(self.duration, self.amp, dtype=complex)


ParametricPulse = Union[Gaussian, GaussianSquare, Drag, Constant]
Pulse = Union[SampledPulse, Gaussian, GaussianSquare, Drag, Constant]
PARAMETRIC_TYPES = (Gaussian, GaussianSquare, Drag, Constant)


@functools.lru_cache(maxsize=4096)
def _sample_cached(pulse) -> np.ndarray:
    arr = np.asarray(pulse.envelope(), dtype=complex)
    arr.setflags(write=False)
    return arr


def samples(pulse: Pulse) -> np.ndarray:
    """Return the envelope of any pulse as a read-only complex array."""
    if isinstance(pulse, SampledPulse):
        return pulse.to_array()
    return _sample_cached(pulse)


def sample_parametric(pulse: ParametricPulse) -> SampledPulse:
    """Sample a parametric pulse into an explicit :class:`SampledPulse`."""
    if not isinstance(pulse, PARAMETRIC_TYPES):
        raise TypeError(f"not a parametric pulse: {type(pulse).__name__}")
    return SampledPulse(samples(pulse), name=pulse.name or type(pulse).__name__.lower())


def time_averaged_amplitude(pulse: Pulse) -> float:
    """Mean sample magnitude over the pulse, signed by the real part of ``amp``.

    For sampled pulses the sign follows the real part of the largest sample.
    """
    env = samples(pulse)
    mean = float(np.mean(np.abs(env)))
    ref = pulse.amp if hasattr(pulse, "amp") else env[np.argmax(np.abs(env))]
    return -mean if complex(ref).real < 0 else mean


def scaled(pulse: Pulse, factor: complex) -> Pulse:
    """Return ``pulse`` with its complex amplitude multiplied by ``factor``."""
    if isinstance(pulse, SampledPulse):
        return SampledPulse(pulse.to_array() * factor, name=pulse.name)
    kwargs = {k: getattr(pulse, k) for k in pulse.__dataclass_fields__}
    kwargs["amp"] = pulse.amp * factor
    return type(pulse)(**kwargs)
