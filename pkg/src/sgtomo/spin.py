"""Angular-momentum operators and rotations for a single spin F.

Basis ordering is m = -F, -F+1, ..., +F everywhere (index 0 is m = -F) and
hbar = 1.  Spins are stored as ``two_f`` = 2F so half-integer values stay
exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import lgamma

import numpy as np


@dataclass(frozen=True)
class SpinSystem:
    """A spin of quantum number F = two_f / 2."""

    two_f: int

    def __post_init__(self):
        if int(self.two_f) != self.two_f or self.two_f < 1:
            raise ValueError(f"two_f must be a positive integer, got {self.two_f!r}")
        object.__setattr__(self, "two_f", int(self.two_f))

    @classmethod
    def from_spin(cls, spin) -> "SpinSystem":
        """Build from F given as a number or a string such as ``"4"`` or ``"7/2"``."""
        twice = Fraction(str(spin)) * 2
        if twice.denominator != 1:
            raise ValueError(f"spin must be an integer or half-integer, got {spin!r}")
        return cls(int(twice))

    @property
    def spin(self) -> float:
        return self.two_f / 2

    @property
    def dimension(self) -> int:
        return self.two_f + 1

    @property
    def m_values(self) -> np.ndarray:
        """Projection quantum numbers in basis order."""
        return (np.arange(self.dimension) * 2 - self.two_f) / 2

    def index_of(self, m) -> int:
        """Basis index of projection ``m`` (raises ``ValueError`` if absent)."""
        twice = Fraction(str(m)) * 2
        k = (int(twice) + self.two_f) // 2
        if twice.denominator != 1 or (int(twice) + self.two_f) % 2 or not 0 <= k < self.dimension:
            raise ValueError(f"m={m} is not a valid projection for F={self.spin}")
        return k

    def label(self) -> str:
        return str(self.two_f // 2) if self.two_f % 2 == 0 else f"{self.two_f}/2"


@dataclass(frozen=True)
class SpinOperators:
    fx: np.ndarray
    fy: np.ndarray
    fz: np.ndarray

    def along(self, axis) -> np.ndarray:
        """The projection F . axis."""
        ux, uy, uz = axis
        return ux * self.fx + uy * self.fy + uz * self.fz


@dataclass(frozen=True)
class RotationSpec:
    """Rotation by ``angle`` (radians) about the unit vector ``axis``."""

    angle: float
    axis: tuple

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if axis.shape != (3,):
            raise ValueError("rotation axis must be a 3-vector")
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise ValueError("rotation axis must be non-zero")
        if abs(norm - 1) > 1e-12:
            axis = axis / norm
        object.__setattr__(self, "axis", tuple(float(a) for a in axis))
        object.__setattr__(self, "angle", float(self.angle))

    def matrix(self) -> np.ndarray:
        """The 3x3 proper rotation acting on real vectors (Rodrigues)."""
        u = np.array(self.axis)
        k = np.array([[0, -u[2], u[1]], [u[2], 0, -u[0]], [-u[1], u[0], 0]])
        return np.eye(3) + np.sin(self.angle) * k + (1 - np.cos(self.angle)) * (k @ k)

    def inverse(self) -> "RotationSpec":
        return RotationSpec(-self.angle, self.axis)


@dataclass(frozen=True)
class MeasurementAxis:
    """A quantization direction in spherical coordinates (radians)."""

    polar: float
    azimuth: float

    def __post_init__(self):
        if not -1e-12 <= self.polar <= np.pi + 1e-12:
            raise ValueError(f"polar angle {self.polar} outside [0, pi]")
        object.__setattr__(self, "polar", float(min(max(self.polar, 0.0), np.pi)))
        object.__setattr__(self, "azimuth", float(np.mod(self.azimuth, 2 * np.pi)))

    @classmethod
    def from_degrees(cls, theta_deg, phi_deg) -> "MeasurementAxis":
        return cls(np.radians(theta_deg), np.radians(phi_deg))

    @classmethod
    def from_vector(cls, vec) -> "MeasurementAxis":
        x, y, z = np.asarray(vec, dtype=float) / np.linalg.norm(vec)
        return cls(float(np.arccos(np.clip(z, -1, 1))), float(np.arctan2(y, x)))

    @property
    def direction(self) -> np.ndarray:
        st = np.sin(self.polar)
        return np.array([st * np.cos(self.azimuth), st * np.sin(self.azimuth), np.cos(self.polar)])

    def degrees(self) -> tuple:
        return float(np.degrees(self.polar)), float(np.degrees(self.azimuth))


@lru_cache(maxsize=None)
def _operators(two_f: int) -> SpinOperators:
    d = two_f + 1
    f = two_f / 2
    m = (np.arange(d) * 2 - two_f) / 2
    # <m+1|J+|m> sits just below the diagonal in ascending-m order
    raise_ = np.zeros((d, d))
    idx = np.arange(d - 1)
    raise_[idx + 1, idx] = np.sqrt(f * (f + 1) - m[:-1] * (m[:-1] + 1))
    fx = ((raise_ + raise_.T) / 2).astype(complex)
    fy = (raise_ - raise_.T) / 2j
    fz = np.diag(m).astype(complex)
    for a in (fx, fy, fz):
        a.setflags(write=False)
    return SpinOperators(fx, fy, fz)


def spin_operators(sys: SpinSystem) -> SpinOperators:
    """Cartesian spin matrices Fx, Fy, Fz from the ladder operators."""
    return _operators(sys.two_f)


def rotation_operator(sys: SpinSystem, spec: RotationSpec) -> np.ndarray:
    """``exp(-i angle F.axis)`` by spectral decomposition of the generator.

    The generator's eigenvalues are exactly the m values, so the numerical
    ones are replaced by them before exponentiating.
    """
    gen = spin_operators(sys).along(spec.axis)
    _, vecs = np.linalg.eigh(gen)
    phases = np.exp(-1j * spec.angle * sys.m_values)
    return (vecs * phases) @ vecs.conj().T


def wigner_small_d(sys: SpinSystem, theta: float) -> np.ndarray:
    """Wigner little-d matrix ``d[m', m] = <m'|exp(-i theta Fy)|m>``.

    Evaluated from the explicit factorial sum with log-factorials, as an
    independent check on :func:`rotation_operator`.
    """
    two_f = sys.two_f
    d = sys.dimension
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    out = np.zeros((d, d))
    # work with j+m, j-m etc. as integers
    for a in range(d):  # a = j + m'
        for b in range(d):  # b = j + m
            jpm, jmm = b, two_f - b
            jpmp, jmmp = a, two_f - a
            diff = a - b  # m' - m
            pref = 0.5 * (lgamma(jpmp + 1) + lgamma(jmmp + 1) + lgamma(jpm + 1) + lgamma(jmm + 1))
            total = 0.0
            for k in range(max(0, -diff), min(jpm, jmmp) + 1):
                log_den = lgamma(jpm - k + 1) + lgamma(k + 1) + lgamma(diff + k + 1) + lgamma(jmmp - k + 1)
                sign = -1.0 if (diff + k) % 2 else 1.0
                total += sign * np.exp(pref - log_den) * c ** (two_f + b - a - 2 * k) * s ** (diff + 2 * k)
            out[a, b] = total
    return out


def axis_to_rotation(axis: MeasurementAxis) -> RotationSpec:
    """Rotation carrying z onto the measurement direction.

    The rotation is by the polar angle about (-sin phi, cos phi, 0), the
    in-plane axis perpendicular to the direction.  For a polar angle of zero
    the axis is taken as y; the rotation is the identity either way.
    """
    if axis.polar == 0.0:
        return RotationSpec(0.0, (0.0, 1.0, 0.0))
    return RotationSpec(axis.polar, (-np.sin(axis.azimuth), np.cos(axis.azimuth), 0.0))


def rotation_to(direction) -> RotationSpec:
    """Rotation carrying z onto an arbitrary unit vector."""
    return axis_to_rotation(MeasurementAxis.from_vector(direction))
