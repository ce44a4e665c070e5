"""Named test states, e.g. ``"coherent:60:x"`` or ``"mixed:uniform"``.

Grammar::

    stretched:M              pure |m_z = M>
    coherent:THETA:AXIS      |m_z = -F> rotated by THETA degrees about AXIS
    m-eigenstate:M:AXIS      eigenstate of F.AXIS with eigenvalue M
    mixed:uniform            maximally mixed state
    mixed:P0,P1,...          diagonal state with the given weights
    <path>                   density-matrix JSON file

AXIS is ``x``, ``y``, ``z`` (optionally signed) or a triple ``a,b,c``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .density import (
    DensityMatrix,
    make_diagonal_mixed,
    make_m_eigenstate,
    make_stretched,
    maximally_mixed,
    precess,
)
from .spin import RotationSpec, SpinSystem

_NAMED_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


def parse_axis(text: str) -> tuple:
    token = text.strip().lower()
    sign = 1.0
    if token[:1] in "+-" and token[1:] in _NAMED_AXES:
        sign = -1.0 if token[0] == "-" else 1.0
        token = token[1:]
    if token in _NAMED_AXES:
        return tuple(sign * c for c in _NAMED_AXES[token])
    parts = token.split(",")
    if len(parts) != 3:
        raise ValueError(f"cannot parse axis {text!r}")
    vec = np.array([float(p) for p in parts])
    if not np.linalg.norm(vec):
        raise ValueError("axis must be non-zero")
    return tuple(vec / np.linalg.norm(vec))


def parse_state(spec: str, sys: SpinSystem) -> DensityMatrix:
    """Build a test state from its name (see module docstring)."""
    kind, _, rest = spec.partition(":")
    if kind == "stretched":
        return make_stretched(sys, rest)
    if kind == "coherent":
        theta, _, axis = rest.partition(":")
        start = make_stretched(sys, -sys.spin)
        return precess(start, RotationSpec(np.radians(float(theta)), parse_axis(axis or "x")))
    if kind == "m-eigenstate":
        m, _, axis = rest.partition(":")
        return make_m_eigenstate(sys, m, parse_axis(axis or "z"))
    if kind == "mixed":
        if rest == "uniform":
            return maximally_mixed(sys)
        weights = [float(w) for w in rest.split(",")]
        if len(weights) != sys.dimension:
            raise ValueError(f"mixed state needs {sys.dimension} weights, got {len(weights)}")
        return make_diagonal_mixed(weights)
    if Path(spec).is_file():
        from .io import load_density

        rho = load_density(spec)
        if rho.dim != sys.dimension:
            raise ValueError(f"state file is for dimension {rho.dim}, spin needs {sys.dimension}")
        return rho
    raise ValueError(f"unknown state {spec!r}")
