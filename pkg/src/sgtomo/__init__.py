"""Density-matrix tomography of a large spin from Stern-Gerlach populations."""

from .density import (
    DensityMatrix,
    fidelity,
    make_diagonal_mixed,
    make_m_eigenstate,
    make_stretched,
    maximally_mixed,
    precess,
    validate,
)
from .experiment import NoiseModel, monte_carlo, perturb_axes, perturb_records
from .spin import (
    MeasurementAxis,
    RotationSpec,
    SpinSystem,
    axis_to_rotation,
    rotation_operator,
    spin_operators,
    wigner_small_d,
)
from .tof import TofGeometry, fit_tof, simulate_tof
from .tomography import (
    AxisSet,
    FitOptions,
    MeasurementRecord,
    build_measurement_matrix,
    conditioning,
    default_axis_set,
    forward_model,
    ml_reconstruct,
    project_to_physical,
    pseudoinverse_reconstruct,
    rho_from_t,
    t_from_rho,
)
from .wigner import default_grid, state_multipoles, wigner_function

__version__ = "0.1.0"
