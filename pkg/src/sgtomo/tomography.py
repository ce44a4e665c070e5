"""Reconstruction of a spin density matrix from Stern-Gerlach populations.

Along each quantization axis n_k the measured populations are the diagonal
of ``R_k^+ rho R_k``, where ``R_k`` rotates z onto n_k.  Stacking all axes
gives a linear map ``pi = M vec(rho)`` that is inverted either directly
(spectral pseudoinverse of ``M^+ M``) or, when that estimate is not a valid
state, by a least-squares fit over ``rho = T T^+`` with T lower triangular.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .density import DensityMatrix, validate
from .errors import (
    AllEigenvaluesClipped,
    FactorizationFailed,
    RankDeficient,
    RecordMismatch,
)
from .spin import MeasurementAxis, SpinSystem, axis_to_rotation, rotation_operator

DEFAULT_CONE_DEG = 82.0
DEFAULT_RANK_THRESHOLD = 1e-10
CHOLESKY_EPS = 1e-12


@dataclass(frozen=True)
class AxisSet:
    axes: tuple

    def __post_init__(self):
        axes = tuple(self.axes)
        if not axes:
            raise ValueError("an axis set needs at least one axis")
        object.__setattr__(self, "axes", axes)

    def __len__(self):
        return len(self.axes)

    def __iter__(self):
        return iter(self.axes)

    def __getitem__(self, k):
        return self.axes[k]

    @classmethod
    def from_degrees(cls, pairs) -> "AxisSet":
        return cls(tuple(MeasurementAxis.from_degrees(t, p) for t, p in pairs))

    def degrees(self) -> list:
        return [a.degrees() for a in self.axes]


def default_axis_set(sys: SpinSystem, cone_deg: float = DEFAULT_CONE_DEG) -> AxisSet:
    """One axis along z plus 4F axes on a cone of half-angle ``cone_deg``.

    The cone azimuths are ``2 pi k / (4F + 1)`` for k = 0..4F-1.  Spacing the
    4F cone axes exactly ``2 pi / 4F`` apart aliases the Q = +-2F multipoles
    and leaves the set one short of full rank, so one slot of a (4F+1)-fold
    spacing is left empty instead.
    """
    n_cone = 2 * sys.two_f
    cone = np.radians(cone_deg)
    axes = [MeasurementAxis(0.0, 0.0)]
    axes += [MeasurementAxis(cone, 2 * np.pi * k / (n_cone + 1)) for k in range(n_cone)]
    return AxisSet(tuple(axes))


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """Populations observed along one axis, normalized to unit sum.

    ``raw_sum`` keeps the total before normalization (counts, or 1 for
    simulated probabilities).
    """

    axis_index: int
    populations: np.ndarray
    raw_sum: float = 1.0
    provenance: str | None = None

    @classmethod
    def from_raw(cls, axis_index, values, provenance=None) -> "MeasurementRecord":
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 1:
            raise RecordMismatch(f"record {axis_index}: populations must be a flat list")
        if not np.all(np.isfinite(vals)):
            raise RecordMismatch(f"record {axis_index}: populations must be finite")
        if np.any(vals < 0):
            raise RecordMismatch(f"record {axis_index}: populations must be non-negative")
        total = float(vals.sum())
        if total <= 0:
            raise RecordMismatch(f"record {axis_index}: populations sum to zero")
        pops = vals / total
        pops.setflags(write=False)
        return cls(int(axis_index), pops, total, provenance)


def check_records(records, axes: AxisSet, sys: SpinSystem) -> list:
    """Order records by axis index and check one record of length d per axis."""
    by_axis = {}
    for rec in records:
        if rec.axis_index in by_axis:
            raise RecordMismatch(f"duplicate record for axis {rec.axis_index}")
        if not 0 <= rec.axis_index < len(axes):
            raise RecordMismatch(f"record refers to axis {rec.axis_index}, but the axis set has {len(axes)} axes")
        if len(rec.populations) != sys.dimension:
            raise RecordMismatch(
                f"record for axis {rec.axis_index} has {len(rec.populations)} populations, expected {sys.dimension}"
            )
        by_axis[rec.axis_index] = rec
    missing = [k for k in range(len(axes)) if k not in by_axis]
    if missing:
        raise RecordMismatch(f"no record for axis index {', '.join(map(str, missing))}")
    return [by_axis[k] for k in range(len(axes))]


def stack_populations(records) -> np.ndarray:
    return np.concatenate([r.populations for r in records])


def _hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal basis of d x d Hermitian matrices as columns of vec(.)

    Order: the d diagonal units, then for each i < j the symmetric and
    antisymmetric (imaginary) off-diagonal pairs, scaled by 1/sqrt(2).
    """
    basis = np.zeros((d * d, d * d), dtype=complex)
    col = 0
    for i in range(d):
        basis[i * d + i, col] = 1
        col += 1
    s = 1 / np.sqrt(2)
    for i in range(d):
        for j in range(i + 1, d):
            basis[i * d + j, col] = s
            basis[j * d + i, col] = s
            basis[i * d + j, col + 1] = 1j * s
            basis[j * d + i, col + 1] = -1j * s
            col += 2
    return basis


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """The stacked linear map from vec(rho) to populations.

    Rows run over (axis k, sublevel m) and columns over (i, j), both
    lexicographic.  ``states[r]`` is the eigenvector ``R_k |m>`` behind row r.
    """

    two_f: int
    n_axes: int
    states: np.ndarray

    @property
    def dim(self) -> int:
        return self.two_f + 1

    @cached_property
    def entries(self) -> np.ndarray:
        s = self.states
        return (s.conj()[:, :, None] * s[:, None, :]).reshape(len(s), -1)

    @cached_property
    def basis(self) -> np.ndarray:
        return _hermitian_basis(self.dim)

    @cached_property
    def real_entries(self) -> np.ndarray:
        """M expressed on the real orthonormal Hermitian basis."""
        return (self.entries @ self.basis).real

    def to_real(self, rho) -> np.ndarray:
        return (self.basis.conj().T @ np.asarray(rho).ravel()).real

    def from_real(self, x) -> np.ndarray:
        return (self.basis @ x).reshape(self.dim, self.dim)

    def apply(self, rho) -> np.ndarray:
        """Model populations for a Hermitian matrix, as a flat real vector."""
        rho = np.asarray(rho)
        return np.einsum("ri,ij,rj->r", self.states.conj(), rho, self.states).real


def build_measurement_matrix(axes: AxisSet, sys: SpinSystem) -> MeasurementMatrix:
    blocks = [rotation_operator(sys, axis_to_rotation(a)).T for a in axes]
    states = np.concatenate(blocks)
    states.setflags(write=False)
    return MeasurementMatrix(sys.two_f, len(axes), states)


def forward_model(rho: DensityMatrix, axes: AxisSet) -> list:
    """Populations ``<m| R_k^+ rho R_k |m>`` along each axis."""
    sys = rho.system
    mm = build_measurement_matrix(axes, sys)
    pops = np.clip(mm.apply(np.asarray(rho)), 0, None).reshape(len(axes), sys.dimension)
    return [MeasurementRecord.from_raw(k, p) for k, p in enumerate(pops)]


@dataclass(frozen=True)
class ConditioningReport:
    eigenvalues: np.ndarray
    rank: int
    threshold: float
    n_params: int

    @property
    def full_rank(self) -> bool:
        return self.rank == self.n_params

    @property
    def condition_number(self) -> float:
        lam = self.eigenvalues
        return float(np.sqrt(lam[0] / lam[-1])) if lam[-1] > 0 else float("inf")


def _spectrum(mm: MeasurementMatrix):
    a = mm.real_entries
    lam, w = np.linalg.eigh(a.T @ a)
    order = np.argsort(lam)[::-1]
    return np.clip(lam[order], 0, None), w[:, order]


def conditioning(mm: MeasurementMatrix, rel_threshold: float = DEFAULT_RANK_THRESHOLD) -> ConditioningReport:
    """Eigenvalues of ``M^+ M`` and the rank at a relative threshold."""
    if not 0 < rel_threshold < 1:
        raise ValueError("rel_threshold must lie in (0, 1)")
    lam, _ = _spectrum(mm)
    rank = int(np.sum(lam > rel_threshold * lam[0]))
    return ConditioningReport(lam, rank, rel_threshold, mm.dim**2)


def pseudoinverse(mm: MeasurementMatrix, rel_threshold: float = DEFAULT_RANK_THRESHOLD):
    """``M^+ = sum_i w_i v_i^T / sqrt(lambda_i)`` over the retained spectrum.

    ``w_i`` are eigenvectors of ``M^T M`` and ``v_i = M w_i / sqrt(lambda_i)``
    the matching eigenvectors of ``M M^T``.
    """
    lam, w = _spectrum(mm)
    keep = lam > rel_threshold * lam[0]
    lam, w = lam[keep], w[:, keep]
    v = mm.real_entries @ w / np.sqrt(lam)
    return (w / np.sqrt(lam)) @ v.T


@dataclass(frozen=True, eq=False)
class PseudoinverseResult:
    matrix: np.ndarray
    report: ConditioningReport
    hermiticity_deviation: float
    raw_trace: float
    residual: float

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    @property
    def physical(self) -> bool:
        return self.min_eigenvalue >= -1e-10


def pseudoinverse_reconstruct(records, axes: AxisSet, sys: SpinSystem, rel_threshold: float = DEFAULT_RANK_THRESHOLD):
    """Linear least-squares estimate; refuses rank-deficient axis sets.

    The result is Hermitian with unit trace but may have negative
    eigenvalues.
    """
    records = check_records(records, axes, sys)
    mm = build_measurement_matrix(axes, sys)
    report = conditioning(mm, rel_threshold)
    if not report.full_rank:
        raise RankDeficient(
            f"measurement matrix has rank {report.rank}, {report.n_params} needed for spin {sys.label()}", report
        )
    pi = stack_populations(records)
    x = pseudoinverse(mm, rel_threshold) @ pi
    rho = mm.from_real(x)
    deviation = float(np.abs(rho - rho.conj().T).max())
    rho = (rho + rho.conj().T) / 2
    raw_trace = float(np.trace(rho).real)
    rho = rho / raw_trace
    residual = float(np.sum((mm.apply(rho) - pi) ** 2))
    return PseudoinverseResult(rho, report, deviation, raw_trace, residual)


def project_to_physical(h) -> DensityMatrix:
    """Clip negative eigenvalues to zero and renormalize the trace."""
    h = np.asarray(h, dtype=complex)
    h = (h + h.conj().T) / 2
    vals, vecs = np.linalg.eigh(h)
    vals = np.clip(vals, 0, None)
    total = vals.sum()
    if total <= 0:
        raise AllEigenvaluesClipped("no positive eigenvalue left after clipping")
    return validate((vecs * (vals / total)) @ vecs.conj().T)


# --- T T^+ parameterization -------------------------------------------------


def _tril_indices(d):
    rows, cols = np.tril_indices(d, -1)
    return rows, cols


@dataclass(frozen=True, eq=False)
class TParameters:
    """Lower-triangular factor with real diagonal and unit Frobenius norm.

    The real parameter vector holds the d diagonal entries followed by the
    real and imaginary parts of each strictly-lower entry (row-major), d**2
    numbers with one norm constraint.
    """

    t: np.ndarray

    @property
    def dim(self) -> int:
        return self.t.shape[0]

    @property
    def n_free(self) -> int:
        return self.dim**2 - 1

    def vector(self) -> np.ndarray:
        return t_to_vector(self.t)

    @classmethod
    def from_vector(cls, vec, d: int) -> "TParameters":
        vec = np.asarray(vec, dtype=float)
        norm = np.linalg.norm(vec)
        if vec.size != d * d or norm == 0:
            raise ValueError(f"parameter vector must be non-zero with {d * d} entries")
        t = vector_to_t(vec / norm, d)
        t.setflags(write=False)
        return cls(t)


def t_to_vector(t) -> np.ndarray:
    d = t.shape[0]
    rows, cols = _tril_indices(d)
    low = t[rows, cols]
    return np.concatenate([t.diagonal().real, np.column_stack([low.real, low.imag]).ravel()])


def vector_to_t(vec, d: int) -> np.ndarray:
    rows, cols = _tril_indices(d)
    t = np.zeros((d, d), dtype=complex)
    t[np.arange(d), np.arange(d)] = vec[:d]
    pairs = vec[d:].reshape(-1, 2)
    t[rows, cols] = pairs[:, 0] + 1j * pairs[:, 1]
    return t


def t_from_rho(rho: DensityMatrix, eps: float = CHOLESKY_EPS) -> TParameters:
    """Cholesky factor of ``rho + eps I``, rescaled to unit norm."""
    mat = np.asarray(rho) + eps * np.eye(rho.dim)
    try:
        t = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailed(f"Cholesky factorization failed: {exc}") from exc
    t = t / np.linalg.norm(t)
    t.setflags(write=False)
    return TParameters(t)


def rho_from_t(params: TParameters) -> DensityMatrix:
    t = params.t
    return validate(t @ t.conj().T / np.vdot(t, t).real)


# --- constrained least-squares fit --------------------------------------------


@lru_cache(maxsize=None)
def _tril_layout(d: int):
    """Complex map from the real parameter vector to vec(T), column-major."""
    rows, cols = _tril_indices(d)
    layout = np.zeros((d * d, d * d), dtype=complex)
    diag = np.arange(d)
    layout[diag * d + diag, diag] = 1
    p = np.arange(len(rows))
    layout[cols * d + rows, d + 2 * p] = 1
    layout[cols * d + rows, d + 2 * p + 1] = 1j
    layout.setflags(write=False)
    return rows, cols, layout


def model_populations(vec, mm: MeasurementMatrix) -> np.ndarray:
    """Populations of ``T T^+ / |T|^2`` for a raw (unnormalized) parameter vector."""
    t = vector_to_t(vec, mm.dim)
    a = mm.states @ t.conj()
    return np.sum(np.abs(a) ** 2, axis=1) / np.dot(vec, vec)


def model_jacobian(vec, mm: MeasurementMatrix):
    """Populations and their exact derivatives with respect to ``vec``.

    With ``a = T^+ psi`` for each row's state psi, the unnormalized
    population ``|a|^2`` has derivative ``2 Re(conj(psi_i) a_j)`` with respect
    to Re T_ij and ``-2 Im(conj(psi_i) a_j)`` with respect to Im T_ij.  The
    norm factor then contributes ``-2 p vec / |vec|^2``.
    """
    d = mm.dim
    rows, cols, _ = _tril_layout(d)
    t = vector_to_t(vec, d)
    psi_c = mm.states.conj()
    a = mm.states @ t.conj()
    raw = np.einsum("ij,ij->i", a.real, a.real) + np.einsum("ij,ij->i", a.imag, a.imag)
    jac = np.empty((len(a), d * d))
    jac[:, :d] = 2 * (psi_c * a).real
    low = psi_c[:, rows] * a[:, cols]
    jac[:, d::2] = 2 * low.real
    jac[:, d + 1 :: 2] = -2 * low.imag
    s = np.dot(vec, vec)
    pops = raw / s
    jac /= s
    jac -= (2 / s) * np.outer(pops, vec)
    return pops, jac


def fit_cost(vec, mm: MeasurementMatrix, measured) -> float:
    r = model_populations(vec, mm) - measured
    return float(r @ r)


def fit_gradient(vec, mm: MeasurementMatrix, measured) -> np.ndarray:
    pops, jac = model_jacobian(vec, mm)
    return 2 * jac.T @ (pops - measured)


def fit_hessian(vec, mm: MeasurementMatrix, measured, pops=None, jac=None) -> np.ndarray:
    """Exact Hessian of the fit cost at a unit-norm parameter vector.

    Each population is a Rayleigh quotient ``v.Q_k.v / v.v``, so the
    residual-weighted curvature term only needs ``Q_r = sum_k r_k Q_k``,
    the real form of ``v -> sum_j T[:, j]^+ A T[:, j]`` with
    ``A = sum_k r_k psi_k psi_k^+``.
    """
    if pops is None or jac is None:
        pops, jac = model_jacobian(vec, mm)
    d = mm.dim
    r = pops - measured
    _, _, layout = _tril_layout(d)
    weighted = np.einsum("k,ki,kj->ij", r, mm.states, mm.states.conj())
    q = (layout.conj().T @ np.kron(np.eye(d), weighted) @ layout).real
    rp = float(r @ pops)
    qv = q @ vec
    curv = 2 * q - 4 * (np.outer(qv, vec) + np.outer(vec, qv)) - 2 * rp * np.eye(d * d) + 8 * rp * np.outer(vec, vec)
    return 2 * jac.T @ jac + 2 * curv


@dataclass(frozen=True)
class FitOptions:
    max_iters: int = 5000
    rtol: float = 1e-12
    gtol: float = 1e-10
    initial_damping: float = 1e-3
    rel_threshold: float = DEFAULT_RANK_THRESHOLD


@dataclass(frozen=True)
class FitReport:
    initial_cost: float
    final_cost: float
    iterations: int
    converged: bool
    reason: str
    gradient_norm: float
    pseudoinverse: PseudoinverseResult = field(repr=False, default=None)

    @property
    def pseudoinverse_physical(self) -> bool:
        return self.pseudoinverse is not None and self.pseudoinverse.physical


def _levenberg_marquardt(vec, mm, measured, opts: FitOptions):
    """Damped Newton iteration on the unit sphere of parameter vectors.

    Gauss-Newton alone stalls here: the optimum is usually rank deficient,
    so J^T J is singular along directions that only the residual curvature
    controls.  The step therefore uses the exact Hessian, projected onto the
    tangent space of the sphere, with Levenberg damping and Nielsen's update
    rule.  Each trial point is renormalized to unit length; the model is
    scale invariant, so this keeps T normalized without changing the cost.
    Only decreasing steps are accepted.
    """
    n = vec.size
    vec = vec / np.linalg.norm(vec)
    pops, jac = model_jacobian(vec, mm)
    r = pops - measured
    cost = float(r @ r)
    mu, nu = opts.initial_damping, 2.0
    it = 0
    reason, converged = "max_iters", False
    grad = 2 * jac.T @ r
    while it < opts.max_iters:
        if np.linalg.norm(grad) < opts.gtol:
            reason, converged = "gtol", True
            break
        it += 1
        radial = np.outer(vec, vec)
        proj = np.eye(n) - radial
        hess = proj @ fit_hessian(vec, mm, measured, pops, jac) @ proj
        scale = max(hess.diagonal().max(), 1e-300)
        try:
            step = np.linalg.solve(hess + mu * scale * np.eye(n) + radial, -grad)
        except np.linalg.LinAlgError:
            mu, nu = mu * nu, nu * 2
            continue
        predicted = -(grad @ step + 0.5 * step @ hess @ step)
        trial = vec + step
        trial /= np.linalg.norm(trial)
        t_pops, t_jac = model_jacobian(trial, mm)
        t_r = t_pops - measured
        t_cost = float(t_r @ t_r)
        if t_cost < cost and predicted > 0:
            gain = (cost - t_cost) / predicted
            rel = (cost - t_cost) / max(cost, 1e-300)
            vec, pops, jac, r, cost = trial, t_pops, t_jac, t_r, t_cost
            grad = 2 * jac.T @ r
            mu *= max(1 / 3, 1 - (2 * gain - 1) ** 3)
            nu = 2.0
            if rel < opts.rtol:
                reason, converged = "rtol", True
                break
        else:
            mu, nu = mu * nu, nu * 2
            if mu > 1e20:
                reason, converged = "stalled", True
                break
    return vec, cost, it, converged, reason, float(np.linalg.norm(grad))


def ml_reconstruct(records, axes: AxisSet, sys: SpinSystem, options: FitOptions | None = None):
    """Best-fit physical state over ``rho = T T^+``.

    Minimizes the sum of squared differences between measured and model
    populations, starting from the clipped pseudoinverse estimate.  Returns
    the state and a :class:`FitReport`; if the iteration budget runs out the
    best iterate is returned with ``converged=False``.
    """
    opts = options or FitOptions()
    records = check_records(records, axes, sys)
    lin = pseudoinverse_reconstruct(records, axes, sys, opts.rel_threshold)
    mm = build_measurement_matrix(axes, sys)
    measured = stack_populations(records)
    start = t_from_rho(project_to_physical(lin.matrix)).vector()
    initial_cost = fit_cost(start, mm, measured)
    vec, cost, iters, converged, reason, gnorm = _levenberg_marquardt(start, mm, measured, opts)
    if cost > initial_cost:
        vec, cost = start, initial_cost
    params = TParameters.from_vector(vec, sys.dimension)
    report = FitReport(initial_cost, cost, iters, converged, reason, gnorm, lin)
    return rho_from_t(params), report
