"""Density matrices, test-state factories and fidelity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AllZero,
    DimensionMismatch,
    MOutOfRange,
    NegativeEigenvalue,
    NotHermitian,
    TraceNotOne,
)
from .spin import RotationSpec, SpinSystem, rotation_operator, rotation_to

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
EIGEN_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated d x d state.  Build through :func:`validate`."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def system(self) -> SpinSystem:
        return SpinSystem(self.dim - 1)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def populations(self) -> np.ndarray:
        return self.entries.diagonal().real.copy()

    def purity(self) -> float:
        return float(np.real(np.vdot(self.entries, self.entries)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def validate(rho, hermitian_tol=HERMITIAN_TOL, trace_tol=TRACE_TOL, eigen_tol=EIGEN_TOL) -> DensityMatrix:
    """Check Hermiticity, unit trace and positivity and wrap the matrix.

    The stored matrix is the Hermitian part of the input, so tiny asymmetry
    allowed by ``hermitian_tol`` does not leak into later computations.
    """
    rho = np.array(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatch(f"density matrix must be square, got shape {rho.shape}")
    asym = np.abs(rho - rho.conj().T).max()
    if asym > hermitian_tol:
        raise NotHermitian(f"matrix is not Hermitian (max |rho - rho^+| = {asym:.3g})", asym)
    rho = (rho + rho.conj().T) / 2
    trace_err = abs(np.trace(rho).real - 1)
    if trace_err > trace_tol:
        raise TraceNotOne(f"trace differs from 1 by {trace_err:.3g}", trace_err)
    lowest = np.linalg.eigvalsh(rho)[0]
    if lowest < -eigen_tol:
        raise NegativeEigenvalue(f"negative eigenvalue {lowest:.3g}", lowest)
    rho.setflags(write=False)
    return DensityMatrix(rho)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    if vals[0] < -EIGEN_TOL:
        raise NegativeEigenvalue(f"negative eigenvalue {vals[0]:.3g}", vals[0])
    vals = np.clip(vals, 0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def fidelity(input_state: DensityMatrix, reconstructed: DensityMatrix) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))**2``, clipped to [0, 1].

    Evaluated as the squared nuclear norm of ``sqrt(a) sqrt(b)``: the
    singular values of rank-deficient factors stay at round-off level instead
    of picking up its square root.
    """
    a = np.asarray(input_state)
    b = np.asarray(reconstructed)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot compare states of shape {a.shape} and {b.shape}")
    sv = np.linalg.svd(_psd_sqrt(a) @ _psd_sqrt(b), compute_uv=False)
    return float(np.clip(sv.sum() ** 2, 0.0, 1.0))


def pure_state(vec) -> DensityMatrix:
    """Projector onto a (not necessarily normalized) state vector."""
    vec = np.asarray(vec, dtype=complex)
    vec = vec / np.linalg.norm(vec)
    return validate(np.outer(vec, vec.conj()))


def _check_m(sys: SpinSystem, m) -> int:
    try:
        return sys.index_of(m)
    except ValueError:
        raise MOutOfRange(f"m={m} outside [-{sys.label()}, {sys.label()}]") from None


def make_stretched(sys: SpinSystem, m) -> DensityMatrix:
    """Pure sublevel ``|m_z = m>`` (the stretched states are m = +-F)."""
    k = _check_m(sys, m)
    rho = np.zeros((sys.dimension, sys.dimension), dtype=complex)
    rho[k, k] = 1.0
    return validate(rho)


def precess(rho: DensityMatrix, spec: RotationSpec) -> DensityMatrix:
    """Rotate a state: ``R rho R^+``."""
    r = rotation_operator(rho.system, spec)
    return validate(r @ np.asarray(rho) @ r.conj().T)


def make_m_eigenstate(sys: SpinSystem, m, axis) -> DensityMatrix:
    """Projector onto the eigenstate of F.axis with eigenvalue ``m``."""
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0:
        raise ValueError("axis must be non-zero")
    return precess(make_stretched(sys, m), rotation_to(axis / norm))


def make_diagonal_mixed(populations) -> DensityMatrix:
    """Incoherent mixture of sublevels with the given (unnormalized) weights."""
    pops = np.asarray(populations, dtype=float)
    if pops.ndim != 1 or pops.size < 2:
        raise ValueError("populations must be a 1-d sequence of length >= 2")
    if np.any(pops < 0):
        raise ValueError("populations must be non-negative")
    total = pops.sum()
    if total <= 0:
        raise AllZero("all populations are zero")
    return validate(np.diag(pops / total).astype(complex))


def maximally_mixed(sys: SpinSystem) -> DensityMatrix:
    return make_diagonal_mixed(np.ones(sys.dimension))


def random_pure(sys: SpinSystem, rng: np.random.Generator) -> DensityMatrix:
    vec = rng.normal(size=sys.dimension) + 1j * rng.normal(size=sys.dimension)
    return pure_state(vec)


def random_mixed(sys: SpinSystem, rng: np.random.Generator, rank=None) -> DensityMatrix:
    """Random state from the Ginibre ensemble; full rank by default."""
    d = sys.dimension
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return validate(rho / np.trace(rho).real)
