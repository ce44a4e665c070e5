"""Time-of-flight traces for a Stern-Gerlach drop and their peak fit.

The gradient pulse is treated as an impulsive momentum kick
``m g_F mu_B |grad B| tau`` followed by free fall, so sublevel m arrives at
``t_free + m * dt`` with ``dt = g_F mu_B |grad B| tau / (M g)``.  The thermal
velocity spread gives every peak the same Gaussian width ``sqrt(kT/M) / g``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import constants
from scipy.optimize import least_squares
from scipy.special import ndtr

from .errors import FitDiverged, PeakOverlapWarning

CESIUM_MASS = 132.905451933 * constants.atomic_mass
BOHR_MAGNETON = constants.physical_constants["Bohr magneton"][0]


@dataclass(frozen=True)
class TofGeometry:
    drop_height: float = 0.069
    pulse_duration: float = 0.015
    gradient_magnitude: float = 1.0
    field_magnitude: float = 0.01
    g_factor: float = 0.25
    bohr_magneton: float = BOHR_MAGNETON
    atom_mass: float = CESIUM_MASS
    temperature: float = 3.5e-6
    gravity: float = constants.g

    def __post_init__(self):
        for name in ("drop_height", "pulse_duration", "gradient_magnitude", "field_magnitude",
                     "bohr_magneton", "atom_mass", "temperature", "gravity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.g_factor == 0:
            raise ValueError("g_factor must be non-zero")

    @property
    def free_fall_time(self) -> float:
        return float(np.sqrt(2 * self.drop_height / self.gravity))

    @property
    def delta_t(self) -> float:
        """Arrival-time shift per unit of m (sign follows g_F)."""
        kick = self.g_factor * self.bohr_magneton * self.gradient_magnitude * self.pulse_duration / self.atom_mass
        return float(kick / self.gravity)

    @property
    def width(self) -> float:
        sigma_v = np.sqrt(constants.k * self.temperature / self.atom_mass)
        return float(sigma_v / self.gravity)

    def centers(self, two_f: int) -> np.ndarray:
        m = (np.arange(two_f + 1) * 2 - two_f) / 2
        return self.free_fall_time + m * self.delta_t


@dataclass(frozen=True, eq=False)
class TofTrace:
    time: np.ndarray
    signal: np.ndarray
    two_f: int
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_s", "signal"])
            for t, s in zip(self.time, self.signal):
                writer.writerow([repr(float(t)), repr(float(s))])

    @classmethod
    def from_csv(cls, path, two_f: int) -> "TofTrace":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], two_f)


def _peaks(time, centers, width, amplitudes):
    shape = np.exp(-0.5 * ((time[:, None] - centers[None, :]) / width) ** 2) / (width * np.sqrt(2 * np.pi))
    return shape @ amplitudes


def simulate_tof(
    populations,
    geom: TofGeometry | None = None,
    noise_floor: float = 0.0,
    rng: np.random.Generator | None = None,
    samples_per_width: int = 20,
) -> TofTrace:
    """Arrival-time signal: one Gaussian of area ``pi_m`` per sublevel.

    ``noise_floor`` is the standard deviation of additive Gaussian noise as
    a fraction of the tallest peak; the noisy signal is clipped at zero.
    """
    geom = geom or TofGeometry()
    pops = np.asarray(populations, dtype=float)
    two_f = pops.size - 1
    centers = geom.centers(two_f)
    width = geom.width
    if two_f > 0 and abs(geom.delta_t) < 3 * width:
        warnings.warn(
            f"adjacent peaks are {abs(geom.delta_t) / width:.2f} widths apart (< 3)", PeakOverlapWarning, stacklevel=2
        )
    lo, hi = centers.min() - 6 * width, centers.max() + 6 * width
    step = width / samples_per_width
    time = lo + step * np.arange(int(np.ceil((hi - lo) / step)) + 1)
    signal = _peaks(time, centers, width, pops)
    if noise_floor > 0:
        rng = np.random.default_rng() if rng is None else rng
        signal = np.clip(signal + rng.normal(0, noise_floor * signal.max(), size=signal.shape), 0, None)
    meta = {
        "model": "impulsive-gradient kick, free fall, Gaussian thermal width",
        "centers_s": centers.tolist(),
        "width_s": width,
        "noise_floor": noise_floor,
    }
    return TofTrace(time, signal, two_f, meta)


def _censored_mean(mu, sigma):
    """Mean of ``max(0, mu + n)`` for Gaussian ``n`` of standard deviation ``sigma``."""
    if sigma <= 0:
        return np.clip(mu, 0, None)
    z = mu / sigma
    return mu * ndtr(z) + sigma * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)


def fit_tof(trace: TofTrace, geom: TofGeometry | None = None) -> np.ndarray:
    """Sublevel populations from a least-squares fit of the peak model.

    Centers are fixed by the geometry; the shared width, a constant baseline,
    the noise level and the non-negative peak areas are free.  The model is
    the mean of the zero-clipped noisy signal whenever the trace looks
    clipped (no negative samples, some exact zeros), so clipping does not
    bias the areas.  The areas are returned normalized.
    """
    geom = geom or TofGeometry()
    time = np.asarray(trace.time, dtype=float)
    signal = np.asarray(trace.signal, dtype=float)
    if not np.all(np.isfinite(signal)) or signal.max(initial=0) <= 0:
        raise FitDiverged("trace carries no signal")
    d = trace.two_f + 1
    centers = geom.centers(trace.two_f)
    width0 = geom.width
    peak = signal.max()
    scale = peak * width0 * np.sqrt(2 * np.pi)
    # start from the signal height at each center
    idx = np.clip(np.searchsorted(time, centers), 0, time.size - 1)
    amp0 = np.clip(signal[idx], 0, None) * width0 * np.sqrt(2 * np.pi) / scale

    clipped = signal.min() >= 0 and np.any(signal == 0)

    def residual(x):
        amps, width, base = x[:d], x[d], x[d + 1]
        mu = _peaks(time, centers, width * width0, amps * scale) / peak + base
        if clipped:
            mu = _censored_mean(mu, x[d + 2])
        return mu - signal / peak

    x0 = np.concatenate([amp0 + 1e-3, [1.0, 0.0], [1e-3] if clipped else []])
    lower = np.concatenate([np.zeros(d), [0.2, -np.inf], [0.0] if clipped else []])
    upper = np.concatenate([np.full(d, np.inf), [5.0, np.inf], [np.inf] if clipped else []])
    try:
        res = least_squares(residual, x0, bounds=(lower, upper), x_scale="jac", xtol=1e-12, ftol=1e-12, gtol=1e-12)
    except ValueError as exc:
        raise FitDiverged(f"peak fit failed: {exc}") from exc
    amps = res.x[:d]
    if res.status <= 0 or not np.all(np.isfinite(amps)) or amps.sum() <= 0:
        raise FitDiverged(f"peak fit did not converge: {res.message}")
    return amps / amps.sum()
