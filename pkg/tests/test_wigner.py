import numpy as np
import pytest
from scipy.special import sph_harm_y
from sympy import S
from sympy.physics.quantum.cg import CG

from sgtomo.density import make_m_eigenstate, make_stretched, maximally_mixed, precess, random_mixed
from sgtomo.spin import RotationSpec, SpinSystem
from sgtomo.wigner import (
    CONVENTION_ID,
    MultipoleSet,
    WignerMap,
    clebsch_gordan,
    default_grid,
    grid_from_points,
    reassemble,
    rotate_grid,
    spherical_harmonics,
    state_multipoles,
    tensor_operator,
    wigner_function,
)


def sympy_cg(j1_2, m1_2, j2_2, m2_2, j_2, m_2):
    h = lambda n: S(n) / 2
    return float(CG(h(j1_2), h(m1_2), h(j2_2), h(m2_2), h(j_2), h(m_2)).doit())


@pytest.mark.parametrize("two_f", [1, 2, 3, 8])
def test_clebsch_gordan_matches_sympy(two_f):
    worst = 0.0
    for k in range(0, two_f + 1):
        for m2 in range(-two_f, two_f + 1, 2):
            for mp2 in range(-two_f, two_f + 1, 2):
                q2 = m2 - mp2
                if abs(q2) > 2 * k:
                    continue
                ours = clebsch_gordan(two_f, m2, two_f, -mp2, 2 * k, q2)
                worst = max(worst, abs(ours - sympy_cg(two_f, m2, two_f, -mp2, 2 * k, q2)))
    assert worst < 1e-12


def test_clebsch_gordan_selection_rules():
    assert clebsch_gordan(2, 2, 2, 0, 2, 0) == 0.0
    assert clebsch_gordan(2, 0, 2, 0, 6, 0) == 0.0
    assert clebsch_gordan(1, 1, 1, -1, 0, 0) == pytest.approx(np.sqrt(0.5))


def test_spherical_harmonics_match_scipy(rng):
    theta = rng.uniform(0, np.pi, 40)
    phi = rng.uniform(0, 2 * np.pi, 40)
    ylm = spherical_harmonics(8, theta, phi)
    for l in range(9):
        for m in range(-l, l + 1):
            assert np.abs(ylm[l, 8 + m] - sph_harm_y(l, m, theta, phi)).max() < 1e-12


@pytest.mark.parametrize("two_f", [1, 4, 8])
def test_tensor_operators_orthonormal(two_f):
    sys = SpinSystem(two_f)
    ops = [(k, q, tensor_operator(sys, k, q)) for k in range(two_f + 1) for q in range(-k, k + 1)]
    gram = np.array([[np.trace(a.conj().T @ b) for *_, b in ops] for *_, a in ops])
    assert np.allclose(gram, np.eye(len(ops)), atol=1e-12)
    assert np.allclose(tensor_operator(sys, 0, 0), np.eye(two_f + 1) / np.sqrt(two_f + 1))


def test_tensor_operator_hermitian_conjugate_symmetry():
    sys = SpinSystem(8)
    for k in range(1, 5):
        for q in range(-k, k + 1):
            assert np.allclose(tensor_operator(sys, k, q).conj().T, (-1) ** q * tensor_operator(sys, k, -q))
    with pytest.raises(ValueError):
        tensor_operator(sys, 9, 0)


def test_multipole_round_trip(spin4, rng):
    rho = random_mixed(spin4, rng)
    mp = state_multipoles(rho)
    assert mp.get(0, 0) == pytest.approx(1 / 3)
    assert np.abs(reassemble(mp).entries - rho.entries).max() < 1e-12
    assert isinstance(mp, MultipoleSet) and len(mp.coefficients) == 9


def test_mixed_state_wigner_is_constant(spin4):
    w = wigner_function(maximally_mixed(spin4))
    assert np.ptp(w.values) < 1e-10
    assert w.values[0] == pytest.approx(1 / np.sqrt(4 * np.pi * 9))
    assert w.convention_id == CONVENTION_ID


def test_wigner_integrates_to_normalization(spin4, rng):
    grid = default_grid()
    for rho in (random_mixed(spin4, rng), make_stretched(spin4, 2)):
        w = wigner_function(rho, grid)
        assert np.dot(grid.weights, w.values) == pytest.approx(np.sqrt(4 * np.pi / 9), abs=1e-10)


def test_stretched_state_peaks_at_pole(spin4):
    grid = default_grid()
    up = wigner_function(make_stretched(spin4, 4), grid)
    down = wigner_function(make_stretched(spin4, -4), grid)
    assert up.theta[np.argmax(up.values)] < 0.1
    assert down.theta[np.argmax(down.values)] > np.pi - 0.1


def test_m_y_zero_has_negative_values(spin4):
    w = wigner_function(make_m_eigenstate(spin4, 0, (0, 1, 0)))
    assert w.values.min() < -0.1


def test_rotation_covariance(spin4, rng):
    spec = RotationSpec(1.1, (0.3, -0.5, 0.8))
    rho = random_mixed(spin4, rng)
    rotated = precess(rho, spec)
    grid = grid_from_points(rng.uniform(0, np.pi, 200), rng.uniform(0, 2 * np.pi, 200))
    # W_rot(n) = W(R^-1 n)
    back = rotate_grid(grid, spec.inverse().matrix())
    assert np.allclose(wigner_function(rotated, grid).values, wigner_function(rho, back).values, atol=1e-10)


def test_wigner_csv_round_trip(tmp_path, spin4):
    w = wigner_function(make_stretched(spin4, 0), default_grid(10, 20))
    path = tmp_path / "w.csv"
    w.to_csv(path)
    assert path.read_text().splitlines()[0] == "theta,phi,value"
    back = WignerMap.from_csv(path)
    assert np.array_equal(back.values, w.values) and np.array_equal(back.theta, w.theta)
