"""Synthetic Stern-Gerlach data: noise models and a Monte-Carlo fidelity harness."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .density import DensityMatrix, fidelity
from .errors import TomographyError
from .spin import MeasurementAxis
from .tomography import AxisSet, FitOptions, MeasurementRecord, forward_model, ml_reconstruct

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseModel:
    """Relative population noise and axis-orientation jitter.

    ``population_rel_sigma`` is the standard deviation of the multiplicative
    error on each population; ``axis_jitter_sigma`` (radians) sets the
    half-normal distribution of the tilt between the nominal and the actual
    quantization axis.
    """

    population_rel_sigma: float = 0.03
    axis_jitter_sigma: float = np.radians(0.5)
    seed: int = 0

    def __post_init__(self):
        if self.population_rel_sigma < 0 or self.axis_jitter_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def perturb_records(records, noise: NoiseModel, rng: np.random.Generator | None = None) -> list:
    """Multiply every population by ``1 + eps``, clip at 0, renormalize per axis."""
    rng = noise.rng() if rng is None else rng
    out = []
    for rec in records:
        pops = rec.populations
        if noise.population_rel_sigma > 0:
            eps = rng.normal(0.0, noise.population_rel_sigma, size=pops.shape)
            pops = np.clip(pops * (1 + eps), 0, None)
            if pops.sum() == 0:
                pops = rec.populations
        out.append(MeasurementRecord.from_raw(rec.axis_index, pops, rec.provenance))
    return out


def tilt(direction, angle: float, azimuth: float) -> np.ndarray:
    """Tilt a unit vector by ``angle`` towards the azimuth ``azimuth`` around it."""
    n = np.asarray(direction, dtype=float)
    helper = np.array([1.0, 0, 0]) if abs(n[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = np.cross(n, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    out = np.cos(angle) * n + np.sin(angle) * (np.cos(azimuth) * e1 + np.sin(azimuth) * e2)
    return out / np.linalg.norm(out)


def perturb_axes(axes: AxisSet, noise: NoiseModel, rng: np.random.Generator | None = None) -> AxisSet:
    """Tilt each axis by a half-normal angle in a uniformly random direction."""
    if noise.axis_jitter_sigma == 0:
        return axes
    rng = noise.rng() if rng is None else rng
    tilted = []
    for axis in axes:
        angle = abs(rng.normal(0.0, noise.axis_jitter_sigma))
        azimuth = rng.uniform(0, 2 * np.pi)
        tilted.append(MeasurementAxis.from_vector(tilt(axis.direction, angle, azimuth)))
    return AxisSet(tuple(tilted))


def simulate_records(state: DensityMatrix, axes: AxisSet, noise: NoiseModel, rng=None) -> list:
    """Noisy records as taken along jittered axes, indexed by the nominal axes."""
    rng = noise.rng() if rng is None else rng
    actual = perturb_axes(axes, noise, rng)
    return perturb_records(forward_model(state, actual), noise, rng)


@dataclass
class MonteCarloResult:
    fidelities: list
    failures: int = 0
    not_converged: int = 0
    errors: list = field(default_factory=list)

    @property
    def trials(self) -> int:
        return len(self.fidelities) + self.failures

    def summary(self) -> dict:
        if not self.fidelities:
            return {"trials": self.trials, "failures": self.failures}
        f = np.sort(np.asarray(self.fidelities))
        q1, med, q3 = np.percentile(f, [25, 50, 75])
        return {
            "trials": self.trials,
            "succeeded": len(f),
            "failures": self.failures,
            "not_converged": self.not_converged,
            "median": float(med),
            "q1": float(q1),
            "q3": float(q3),
            "min": float(f[0]),
            "max": float(f[-1]),
            "mean": float(f.mean()),
        }

    @property
    def median(self) -> float:
        return float(np.median(self.fidelities))


def _trial(state, axes, noise, options, seed_seq):
    rng = np.random.default_rng(seed_seq)
    records = simulate_records(state, axes, noise, rng)
    estimate, report = ml_reconstruct(records, axes, state.system, options)
    return fidelity(state, estimate), report.converged


def monte_carlo(
    state: DensityMatrix,
    axes: AxisSet,
    noise: NoiseModel,
    trials: int,
    options: FitOptions | None = None,
    workers: int = 1,
) -> MonteCarloResult:
    """Repeat simulate -> reconstruct (against the nominal axes) -> fidelity.

    Every trial draws from its own child of ``SeedSequence(noise.seed)``, so
    results do not depend on the number of workers or their scheduling.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = np.random.SeedSequence(noise.seed).spawn(trials)

    def run(k):
        try:
            return k, _trial(state, axes, noise, options, seeds[k]), None
        except TomographyError as exc:
            return k, None, exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, range(trials)))
    else:
        outcomes = [run(k) for k in range(trials)]
    result = MonteCarloResult([])
    for k, value, exc in sorted(outcomes, key=lambda o: o[0]):
        if exc is not None:
            log.warning("trial %d failed: %s", k, exc)
            result.failures += 1
            result.errors.append({"trial": k, "error": exc.code, "message": str(exc)})
            continue
        fid, converged = value
        result.fidelities.append(fid)
        result.not_converged += int(not converged)
    return result


def noise_config(noise: NoiseModel) -> dict:
    cfg = asdict(noise)
    cfg["axis_jitter_deg"] = float(np.degrees(cfg.pop("axis_jitter_sigma")))
    return cfg
