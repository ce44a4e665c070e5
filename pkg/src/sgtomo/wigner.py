"""State multipoles and the spherical Wigner function of a spin state.

The state is expanded in orthonormal spherical tensor operators
``T_KQ = sum (-1)**(F-m') <F m; F -m'|K Q> |m><m'|`` and the Wigner function
is ``W = sum rho_KQ Y_KQ`` with orthonormal, Condon-Shortley spherical
harmonics.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from math import lgamma

import numpy as np

from .density import DensityMatrix, validate
from .spin import SpinSystem

CONVENTION_ID = "multipole-orthonormal-ylm-cs/v1"


def _lf(n2: int) -> float:
    # log factorial of n2/2; n2 is always even where it is called
    return lgamma(n2 // 2 + 1)


def clebsch_gordan(j1_2: int, m1_2: int, j2_2: int, m2_2: int, j_2: int, m_2: int) -> float:
    """``<j1 m1; j2 m2 | J M>`` by the Racah formula.

    All arguments are doubled (2j, 2m) so half-integer spins are exact.
    """
    if m1_2 + m2_2 != m_2:
        return 0.0
    if not (abs(j1_2 - j2_2) <= j_2 <= j1_2 + j2_2) or (j1_2 + j2_2 + j_2) % 2:
        return 0.0
    if abs(m1_2) > j1_2 or abs(m2_2) > j2_2 or abs(m_2) > j_2:
        return 0.0
    if (j1_2 + m1_2) % 2 or (j2_2 + m2_2) % 2 or (j_2 + m_2) % 2:
        return 0.0
    log_pref = 0.5 * (
        np.log(j_2 + 1)
        + _lf(j_2 + j1_2 - j2_2)
        + _lf(j_2 - j1_2 + j2_2)
        + _lf(j1_2 + j2_2 - j_2)
        - _lf(j1_2 + j2_2 + j_2 + 2)
        + _lf(j_2 + m_2)
        + _lf(j_2 - m_2)
        + _lf(j1_2 - m1_2)
        + _lf(j1_2 + m1_2)
        + _lf(j2_2 - m2_2)
        + _lf(j2_2 + m2_2)
    )
    # summation limits in undoubled units
    a = (j1_2 + j2_2 - j_2) // 2
    b = (j1_2 - m1_2) // 2
    c = (j2_2 + m2_2) // 2
    e = (j_2 - j2_2 + m1_2) // 2
    f = (j_2 - j1_2 - m2_2) // 2
    total = 0.0
    for k in range(max(0, -e, -f), min(a, b, c) + 1):
        log_den = lgamma(k + 1) + lgamma(a - k + 1) + lgamma(b - k + 1) + lgamma(c - k + 1) + lgamma(e + k + 1) + lgamma(f + k + 1)
        term = np.exp(log_pref - log_den)
        total += -term if k % 2 else term
    return float(total)


@lru_cache(maxsize=None)
def _tensor_operators(two_f: int, k: int) -> np.ndarray:
    """Stack of T_KQ for Q = -K..K, shape (2K+1, d, d)."""
    d = two_f + 1
    out = np.zeros((2 * k + 1, d, d))
    for a in range(d):
        m2 = 2 * a - two_f
        for b in range(d):
            mp2 = 2 * b - two_f
            q2 = m2 - mp2
            if abs(q2) > 2 * k:
                continue
            sign = -1.0 if ((two_f - mp2) // 2) % 2 else 1.0
            out[q2 // 2 + k, a, b] = sign * clebsch_gordan(two_f, m2, two_f, -mp2, 2 * k, q2)
    out.setflags(write=False)
    return out


def tensor_operator(sys: SpinSystem, k: int, q: int) -> np.ndarray:
    """The spherical tensor operator T_KQ as a d x d matrix."""
    if not 0 <= k <= sys.two_f or abs(q) > k:
        raise ValueError(f"invalid multipole indices K={k}, Q={q}")
    return _tensor_operators(sys.two_f, k)[q + k]


@dataclass(frozen=True)
class MultipoleSet:
    """Coefficients ``rho_KQ``; ``coefficients[K]`` is a length 2K+1 array over Q = -K..K."""

    two_f: int
    coefficients: tuple

    def get(self, k: int, q: int) -> complex:
        return complex(self.coefficients[k][q + k])


def state_multipoles(rho: DensityMatrix) -> MultipoleSet:
    """``rho_KQ = Tr[rho T_KQ^+]`` for 0 <= K <= 2F."""
    mat = np.asarray(rho)
    two_f = mat.shape[0] - 1
    coeffs = []
    for k in range(two_f + 1):
        ops = _tensor_operators(two_f, k)
        # T is real, so Tr[rho T^+] = sum_ab rho_ab T_ab
        coeffs.append(np.einsum("qab,ab->q", ops, mat))
    return MultipoleSet(two_f, tuple(coeffs))


def reassemble(multipoles: MultipoleSet) -> DensityMatrix:
    """Inverse of :func:`state_multipoles`."""
    two_f = multipoles.two_f
    d = two_f + 1
    rho = np.zeros((d, d), dtype=complex)
    for k, c in enumerate(multipoles.coefficients):
        rho += np.einsum("q,qab->ab", c, _tensor_operators(two_f, k))
    return validate(rho)


def spherical_harmonics(lmax: int, theta, phi) -> np.ndarray:
    """Orthonormal ``Y_lm`` for all l <= lmax.

    Returns an array of shape (lmax+1, 2*lmax+1, npoints) with m stored at
    index ``m + lmax``; unused slots are zero.  Associated Legendre functions
    are built with the standard normalized three-term recurrence in l.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    x = np.cos(theta)
    sx = np.sin(theta)
    n = theta.size
    plm = np.zeros((lmax + 1, lmax + 1, n))
    pmm = np.full(n, np.sqrt(1 / (4 * np.pi)))
    for m in range(lmax + 1):
        if m > 0:
            pmm = -np.sqrt((2 * m + 1) / (2 * m)) * sx * pmm
        plm[m, m] = pmm
        if m < lmax:
            plm[m + 1, m] = np.sqrt(2 * m + 3) * x * pmm
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = np.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            plm[l, m] = a * (x * plm[l - 1, m] - b * plm[l - 2, m])
    out = np.zeros((lmax + 1, 2 * lmax + 1, n), dtype=complex)
    for m in range(lmax + 1):
        phase = np.exp(1j * m * phi)
        for l in range(m, lmax + 1):
            y = plm[l, m] * phase
            out[l, lmax + m] = y
            if m:
                out[l, lmax - m] = (-1) ** m * y.conj()
    return out


@dataclass(frozen=True)
class SphereGrid:
    """Sample points on the sphere with quadrature weights (flattened)."""

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    shape: tuple = ()


def default_grid(n_theta: int = 50, n_phi: int = 100) -> SphereGrid:
    """Gauss-Legendre nodes in cos(theta) times a uniform azimuth grid."""
    nodes, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(nodes[::-1])
    w = w[::-1]
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    weights = np.outer(w, np.full(n_phi, 2 * np.pi / n_phi))
    return SphereGrid(tt.ravel(), pp.ravel(), weights.ravel(), (n_theta, n_phi))


def grid_from_points(theta, phi) -> SphereGrid:
    theta = np.asarray(theta, dtype=float).ravel()
    phi = np.asarray(phi, dtype=float).ravel()
    return SphereGrid(theta, phi, np.full(theta.size, np.nan), (theta.size,))


@dataclass(frozen=True)
class WignerMap:
    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray
    convention_id: str = CONVENTION_ID

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["theta", "phi", "value"])
            for t, p, v in zip(self.theta, self.phi, self.values):
                writer.writerow([repr(float(t)), repr(float(p)), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "WignerMap":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2])


def wigner_function(rho: DensityMatrix, grid: SphereGrid | None = None) -> WignerMap:
    """Evaluate ``W(theta, phi) = sum_KQ rho_KQ Y_KQ(theta, phi)`` on a grid."""
    grid = default_grid() if grid is None else grid
    if grid.theta.size == 0:
        raise ValueError("grid is empty")
    mp = state_multipoles(rho)
    kmax = mp.two_f
    ylm = spherical_harmonics(kmax, grid.theta, grid.phi)
    values = np.zeros(grid.theta.size, dtype=complex)
    for k, c in enumerate(mp.coefficients):
        values += c @ ylm[k, kmax - k : kmax + k + 1]
    scale = max(1.0, np.abs(values.real).max())
    if np.abs(values.imag).max() > 1e-10 * scale:
        raise ValueError("Wigner function has a non-negligible imaginary part")
    return WignerMap(grid.theta.copy(), grid.phi.copy(), values.real)


def rotate_grid(grid: SphereGrid, rotation: np.ndarray) -> SphereGrid:
    """Apply a 3x3 rotation to every grid point."""
    st = np.sin(grid.theta)
    pts = np.stack([st * np.cos(grid.phi), st * np.sin(grid.phi), np.cos(grid.theta)])
    x, y, z = rotation @ pts
    theta = np.arccos(np.clip(z, -1, 1))
    phi = np.mod(np.arctan2(y, x), 2 * np.pi)
    return SphereGrid(theta, phi, grid.weights, grid.shape)
