import numpy as np
import pytest

from sgtomo.density import make_stretched, maximally_mixed
from sgtomo.experiment import (
    NoiseModel,
    monte_carlo,
    noise_config,
    perturb_axes,
    perturb_records,
    simulate_records,
    tilt,
)
from sgtomo.tomography import forward_model


def test_population_noise_statistics(spin4, axes4):
    recs = forward_model(maximally_mixed(spin4), axes4) * 200
    noisy = perturb_records(recs, NoiseModel(0.03, 0.0), np.random.default_rng(1))
    ratio = np.concatenate([n.populations for n in noisy]) * 1.0 / (1 / 9)
    # renormalization shrinks the spread slightly: sqrt(1 - 1/d)
    assert np.std(ratio) == pytest.approx(0.03 * np.sqrt(8 / 9), abs=0.002)
    assert all(n.populations.sum() == pytest.approx(1) for n in noisy)


def test_populations_stay_non_negative(spin4, axes4):
    recs = forward_model(make_stretched(spin4, -4), axes4)
    noisy = perturb_records(recs, NoiseModel(2.0, 0.0), np.random.default_rng(2))
    assert all(np.all(n.populations >= 0) for n in noisy)


def test_axis_jitter_is_half_normal(axes4):
    sigma = np.radians(0.5)
    big = type(axes4)(tuple(axes4) * 200)
    tilted = perturb_axes(big, NoiseModel(0, sigma), np.random.default_rng(3))
    angles = [np.arccos(np.clip(a.direction @ b.direction, -1, 1)) for a, b in zip(big, tilted)]
    assert np.mean(angles) == pytest.approx(sigma * np.sqrt(2 / np.pi), rel=0.05)


def test_tilt_geometry(rng):
    from conftest import random_unit

    for _ in range(20):
        n = random_unit(rng)
        out = tilt(n, 0.2, rng.uniform(0, 6.3))
        assert np.isclose(np.linalg.norm(out), 1) and np.isclose(out @ n, np.cos(0.2))


def test_zero_noise_is_identity(spin4, axes4):
    rho = make_stretched(spin4, 1)
    recs = simulate_records(rho, axes4, NoiseModel(0.0, 0.0))
    for a, b in zip(recs, forward_model(rho, axes4)):
        assert np.allclose(a.populations, b.populations, rtol=0, atol=1e-15)


def test_seeded_simulation_is_deterministic(spin4, axes4):
    a = simulate_records(make_stretched(spin4, -4), axes4, NoiseModel(seed=9))
    b = simulate_records(make_stretched(spin4, -4), axes4, NoiseModel(seed=9))
    c = simulate_records(make_stretched(spin4, -4), axes4, NoiseModel(seed=10))
    assert all(np.array_equal(x.populations, y.populations) for x, y in zip(a, b))
    assert not all(np.array_equal(x.populations, y.populations) for x, y in zip(a, c))


def test_monte_carlo_independent_of_workers(spin4, axes4):
    state = make_stretched(spin4, -4)
    serial = monte_carlo(state, axes4, NoiseModel(seed=4), trials=6)
    threaded = monte_carlo(state, axes4, NoiseModel(seed=4), trials=6, workers=3)
    assert serial.fidelities == threaded.fidelities
    s = serial.summary()
    assert s["trials"] == 6 and s["failures"] == 0 and s["q1"] <= s["median"] <= s["q3"]


def test_fidelity_degrades_with_noise(spin4, axes4):
    state = make_stretched(spin4, -4)
    medians = [
        monte_carlo(state, axes4, NoiseModel(sigma, np.radians(0.5), seed=11), trials=100).median
        for sigma in (0.01, 0.03, 0.06)
    ]
    assert medians[0] > medians[1] > medians[2]


def test_noise_model_validation_and_config():
    with pytest.raises(ValueError):
        NoiseModel(-0.1)
    cfg = noise_config(NoiseModel())
    assert cfg["axis_jitter_deg"] == pytest.approx(0.5) and cfg["population_rel_sigma"] == 0.03
    with pytest.raises(ValueError):
        monte_carlo(maximally_mixed(__import__("sgtomo").SpinSystem(1)), None, NoiseModel(), 0)
