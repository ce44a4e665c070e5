"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the lines are repeated in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""

import time

import numpy as np

from sgtomo.density import (
    fidelity,
    make_m_eigenstate,
    make_stretched,
    maximally_mixed,
    precess,
    random_mixed,
    random_pure,
    validate,
)
from sgtomo.experiment import NoiseModel, monte_carlo, simulate_records
from sgtomo.spin import RotationSpec, SpinSystem, rotation_operator, spin_operators, wigner_small_d
from sgtomo.tof import fit_tof, simulate_tof
from sgtomo.tomography import (
    AxisSet,
    TParameters,
    build_measurement_matrix,
    conditioning,
    default_axis_set,
    fit_cost,
    fit_gradient,
    forward_model,
    ml_reconstruct,
    model_jacobian,
    model_populations,
    pseudoinverse_reconstruct,
    rho_from_t,
)
from sgtomo.wigner import default_grid, wigner_function

F4 = SpinSystem(8)
AXES = default_axis_set(F4)
RESULTS = {}


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def test_criterion_1_noiseless_round_trip():
    rng = np.random.default_rng(1)
    states = [random_pure(F4, rng) for _ in range(50)] + [random_mixed(F4, rng) for _ in range(50)]
    start = time.perf_counter()
    worst_err, worst_fid = 0.0, 1.0
    for rho in states:
        recs = forward_model(rho, AXES)
        est = pseudoinverse_reconstruct(recs, AXES, F4)
        worst_err = max(worst_err, np.abs(est.matrix - rho.entries).max())
        ml, _ = ml_reconstruct(recs, AXES, F4)
        worst_fid = min(worst_fid, fidelity(rho, ml))
    elapsed = time.perf_counter() - start
    ok = worst_err < 1e-8 and worst_fid >= 0.9999 and elapsed < 60
    report(1, ok, f"max entry error {worst_err:.2e} (< 1e-8), min ML fidelity {worst_fid:.6f} (>= 0.9999), {elapsed:.1f} s (< 60 s)")


def _benchmark_states():
    down = make_stretched(F4, -4)
    states = {"m_z=-4": (down, 0.93)}
    for deg in (30, 60, 90, 120):
        states[f"larmor {deg}"] = (precess(down, RotationSpec(np.radians(deg), (1, 0, 0))), 0.90)
    states["m_y=0"] = (make_m_eigenstate(F4, 0, (0, 1, 0)), 0.90)
    return states


def test_criterion_2_noisy_benchmark_fidelity():
    start = time.perf_counter()
    noise = NoiseModel(0.03, np.radians(0.5), seed=2024)
    parts, ok = [], True
    for name, (state, low) in _benchmark_states().items():
        result = monte_carlo(state, AXES, noise, trials=100)
        med = result.median
        ok &= result.failures == 0 and low <= med <= 1.0
        parts.append(f"{name} {med:.4f} (>= {low})")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 600
    report(2, ok, "medians: " + ", ".join(parts) + f"; {elapsed:.0f} s (< 600 s)")


def test_criterion_3_physicality():
    rng = np.random.default_rng(3)
    bad = 0
    for _ in range(1000):
        d = int(rng.integers(2, 10))
        try:
            validate(rho_from_t(TParameters.from_vector(rng.normal(size=d * d), d)).entries)
        except Exception:
            bad += 1
    noise = NoiseModel(0.03, np.radians(0.5))
    bad_ml = 0
    for k in range(30):
        recs = simulate_records(random_mixed(F4, rng, rank=int(rng.integers(1, 10))), AXES, noise, np.random.default_rng(k))
        est, _ = ml_reconstruct(recs, AXES, F4)
        try:
            validate(est.entries)
        except Exception:
            bad_ml += 1
    report(3, bad == 0 and bad_ml == 0, f"{bad}/1000 TParameters and {bad_ml}/30 noisy ML outputs fail validate")


def test_criterion_4_conditioning():
    full = conditioning(build_measurement_matrix(AXES, F4), 1e-10)
    degenerate = conditioning(build_measurement_matrix(AxisSet.from_degrees([(0, 0)] * 17), F4), 1e-10)
    ok = full.rank == 81 and degenerate.rank == 9
    report(4, ok, f"default set rank {full.rank} (81), all-z set rank {degenerate.rank} (9)")


def test_criterion_5_half_spin_bloch_oracle():
    half = SpinSystem(1)
    axes = AxisSet.from_degrees([(0, 0), (90, 0), (90, 90)])
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        rho = random_mixed(half, rng)
        recs = forward_model(rho, axes)
        rz, rx, ry = (r.populations[1] - r.populations[0] for r in recs)
        # ascending basis (m=-1/2, m=+1/2)
        bloch = 0.5 * np.array([[1 - rz, rx + 1j * ry], [rx - 1j * ry, 1 + rz]])
        worst = max(worst, np.abs(pseudoinverse_reconstruct(recs, axes, half).matrix - bloch).max())
    report(5, worst < 1e-10, f"max deviation from Bloch inversion {worst:.2e} (< 1e-10)")


def test_criterion_6_rotations():
    worst_d = 0.0
    for two_f in range(1, 21):
        sys = SpinSystem(two_f)
        for theta in np.linspace(0, 2 * np.pi, 100):
            worst_d = max(worst_d, np.abs(rotation_operator(sys, RotationSpec(theta, (0, 1, 0))) - wigner_small_d(sys, theta)).max())
    rng = np.random.default_rng(6)
    worst_u = worst_c = worst_flip = 0.0
    for _ in range(1000):
        sys = SpinSystem(int(rng.integers(1, 11)))
        axis = rng.normal(size=3)
        a, b = rng.uniform(-2 * np.pi, 2 * np.pi, 2)
        ra = rotation_operator(sys, RotationSpec(a, axis))
        worst_u = max(worst_u, np.abs(ra @ ra.conj().T - np.eye(sys.dimension)).max())
        rab = rotation_operator(sys, RotationSpec(a + b, axis))
        worst_c = max(worst_c, np.abs(ra @ rotation_operator(sys, RotationSpec(b, axis)) - rab).max())
    for _ in range(20):
        r = rotation_operator(SpinSystem(1), RotationSpec(2 * np.pi, rng.normal(size=3)))
        worst_flip = max(worst_flip, np.abs(r + np.eye(2)).max())
    ops = spin_operators(F4)
    comm = np.abs(ops.fx @ ops.fy - ops.fy @ ops.fx - 1j * ops.fz).max()
    ok = worst_d < 1e-10 and worst_u < 1e-11 and worst_c < 1e-10 and worst_flip < 1e-12 and comm < 1e-12
    report(
        6,
        ok,
        f"d-matrix {worst_d:.1e}, unitarity {worst_u:.1e}, composition {worst_c:.1e}, "
        f"2pi sign flip {worst_flip:.1e}, [Fx,Fy]-iFz {comm:.1e}",
    )


def test_criterion_7_jacobian():
    rng = np.random.default_rng(7)
    mm = build_measurement_matrix(AXES, F4)
    measured = mm.apply(random_mixed(F4, rng))
    worst = 0.0
    h = 1e-6
    for _ in range(20):
        vec = rng.normal(size=81)
        eye = np.eye(81) * h
        fd_pop = np.array([(model_populations(vec + e, mm) - model_populations(vec - e, mm)) / (2 * h) for e in eye]).T
        fd_cost = np.array([(fit_cost(vec + e, mm, measured) - fit_cost(vec - e, mm, measured)) / (2 * h) for e in eye])
        _, jac = model_jacobian(vec, mm)
        worst = max(
            worst,
            np.abs(jac - fd_pop).max() / np.abs(fd_pop).max(),
            np.abs(fit_gradient(vec, mm, measured) - fd_cost).max() / np.abs(fd_cost).max(),
        )
    report(7, worst < 1e-5, f"max relative deviation from central differences {worst:.2e} (< 1e-5)")


def test_criterion_8_wigner_negativity():
    grid = default_grid()
    target = make_m_eigenstate(F4, 0, (0, 1, 0))
    clean, _ = ml_reconstruct(forward_model(target, AXES), AXES, F4)
    clean_min = wigner_function(clean, grid).values.min()
    noise = NoiseModel(0.03, np.radians(0.5))
    seeds = np.random.SeedSequence(8).spawn(100)
    minima = []
    for seq in seeds:
        est, _ = ml_reconstruct(simulate_records(target, AXES, noise, np.random.default_rng(seq)), AXES, F4)
        minima.append(wigner_function(est, grid).values.min())
    noisy_min = float(np.median(minima))
    flat = np.ptp(wigner_function(maximally_mixed(F4), grid).values)
    ok = clean_min < 0 and noisy_min < 0 and flat < 1e-10
    report(8, ok, f"min W noiseless {clean_min:.4f}, noisy median {noisy_min:.4f} (< 0); mixed-state spread {flat:.1e} (< 1e-10)")


def test_criterion_9_tof_round_trip():
    rng = np.random.default_rng(9)
    clean = noisy = 0.0
    for _ in range(50):
        pops = rng.dirichlet(np.ones(9))
        clean = max(clean, np.abs(fit_tof(simulate_tof(pops)) - pops).max())
        noisy = max(noisy, np.abs(fit_tof(simulate_tof(pops, noise_floor=0.01, rng=rng)) - pops).max())
    report(9, clean < 1e-3 and noisy < 1e-2, f"max population error noiseless {clean:.1e} (< 1e-3), 1% noise {noisy:.1e} (< 1e-2)")


if __name__ == "__main__":
    failed = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    raise SystemExit(1 if failed else 0)
