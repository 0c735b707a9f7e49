"""Four dimensional extension of a conservative system.

The 3D operator is padded with an extra coordinate s and a closed vector
field D.  The s column carries the coefficients (a, b, c) = D + s curl(w),
which makes the extended flow

    X = (w x grad H,  -(D + s curl w) . grad H)

divergence free for any D, and makes the operator, once rescaled by the
conformal factor r = w . D + s (w . curl w), satisfy the Jacobi identity
whenever D is divergence free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import consys
from .fieldcore import (
    Box,
    Point3,
    PoissonizeError,
    UNIT_BOX,
    Vec3,
    VectorField3,
    curl,
    div,
    grad,
    halton_points,
    helicity_density,
)


class ConformalFactorVanished(PoissonizeError):
    """|w . D + s h| fell below the configured floor."""


class NotClosedError(PoissonizeError):
    """The extension field D failed the divergence-free probe."""


@dataclass(slots=True)
class ExtendedState:
    """Point of the extended phase space: spatial position plus s."""

    p: Point3
    s: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p.x, self.p.y, self.p.z, self.s)


def state_from_tuple(values) -> ExtendedState:
    x, y, z, s = values
    return ExtendedState(Point3(x, y, z), s)


class ExtensionSpec:
    """Choice of extension field D plus numerical guards.

    D is probed for div D = 0 on a deterministic low-discrepancy sample at
    construction.  Passing require_closed=False records the residual but
    keeps a non-solenoidal D: the extended flow and its volume identities
    hold regardless, only the Jacobi repair needs closedness.
    """

    def __init__(self, d_field: VectorField3, r_floor: float = 1e-10,
                 require_closed: bool = True, probe: Box = UNIT_BOX,
                 probe_count: int = 200, closed_tol: float = 1e-8) -> None:
        if r_floor <= 0.0:
            raise ValueError("r_floor must be positive")
        self.d_field = d_field
        self.r_floor = r_floor
        residual = max(abs(div(d_field, p)) for p in halton_points(probe_count, probe))
        self.max_div_residual = residual
        self.closed = residual <= closed_tol
        if require_closed and not self.closed:
            raise NotClosedError(
                f"div D residual {residual:.3e} exceeds {closed_tol:.1e} on the probe set")


def default_extension(sys: consys.ConservativeSystem, r_floor: float = 1e-10,
                      probe: Box = UNIT_BOX) -> ExtensionSpec:
    """D = B for drift systems, else D = w (keeps r(s=0) = |w|^2 > 0)."""
    if sys.b_field is not None:
        return ExtensionSpec(sys.b_field, r_floor, probe=probe)
    try:
        return ExtensionSpec(sys.operator_vector, r_floor, probe=probe)
    except NotClosedError:
        return ExtensionSpec(sys.operator_vector, r_floor, require_closed=False, probe=probe)


def abc_coefficients(sys: consys.ConservativeSystem, ext: ExtensionSpec,
                     state: ExtendedState) -> Vec3:
    """Coefficients of the s column: D + s curl(w)."""
    return ext.d_field.eval(state.p) + state.s * curl(sys.operator_vector, state.p)


def extended_velocity(sys: consys.ConservativeSystem, ext: ExtensionSpec,
                      state: ExtendedState) -> tuple[Vec3, float]:
    """(spatial velocity, ds/dt); the spatial part is untouched by the extension."""
    v = consys.velocity(sys, state.p)
    sdot = -abc_coefficients(sys, ext, state).dot(grad(sys.hamiltonian, state.p))
    if not math.isfinite(sdot):
        raise PoissonizeError(f"non-finite ds/dt at {state}")
    return v, sdot


class ConformalFactor(NamedTuple):
    value: float  # signed: w . D + s (w . curl w)
    magnitude: float


def conformal_factor(sys: consys.ConservativeSystem, ext: ExtensionSpec,
                     state: ExtendedState) -> ConformalFactor:
    """Time reparametrization rate at a state; errors below the floor.

    The signed value is returned alongside its magnitude so integrators can
    watch for sign changes instead of silently flowing backwards.
    """
    p = state.p
    w = sys.operator_vector.eval(p)
    value = w.dot(ext.d_field.eval(p)) + state.s * helicity_density(sys.operator_vector, p)
    if abs(value) < ext.r_floor:
        raise ConformalFactorVanished(f"|r| = {abs(value):.3e} < {ext.r_floor:.1e} at {state}")
    return ConformalFactor(value, abs(value))


def extended_operator(sys: consys.ConservativeSystem, ext: ExtensionSpec,
                      state: ExtendedState) -> np.ndarray:
    """Antisymmetric 4x4 operator in coordinates (x, y, z, s)."""
    w = sys.operator_vector.eval(state.p)
    a = abc_coefficients(sys, ext, state)
    return np.array([
        [0.0, -w.z, w.y, a.x],
        [w.z, 0.0, -w.x, a.y],
        [-w.y, w.x, 0.0, a.z],
        [-a.x, -a.y, -a.z, 0.0],
    ])


def extended_velocity_tuple(sys: consys.ConservativeSystem, ext: ExtensionSpec,
                            values) -> tuple[float, float, float, float]:
    v, sdot = extended_velocity(sys, ext, state_from_tuple(values))
    return (v.x, v.y, v.z, sdot)


def extended_divergence(sys: consys.ConservativeSystem, ext: ExtensionSpec,
                        state: ExtendedState, scale: float = 1e-5) -> float:
    """Central-difference 4-divergence of the extended flow; ~0 analytically."""
    base = state.as_tuple()
    total = 0.0
    for i in range(4):
        h = scale * max(1.0, abs(base[i]))
        hi = list(base)
        lo = list(base)
        hi[i] += h
        lo[i] -= h
        total += (extended_velocity_tuple(sys, ext, hi)[i]
                  - extended_velocity_tuple(sys, ext, lo)[i]) / (2.0 * h)
    return total


def jacobi_defect_4d(sys: consys.ConservativeSystem, ext: ExtensionSpec,
                     state: ExtendedState, rescale: bool = True,
                     step: float = 1e-5) -> float:
    """Worst cyclic-sum residual of the (optionally rescaled) operator.

    For each index triple (i, j, k) the residual sums J^im d_m J^jk over
    cyclic permutations; all of them vanish exactly when the operator is
    Poisson.  Entry derivatives are taken by central differences over the
    four extended coordinates.
    """

    def op(values) -> np.ndarray:
        st = state_from_tuple(values)
        mat = extended_operator(sys, ext, st)
        if rescale:
            mat = mat / conformal_factor(sys, ext, st).value
        return mat

    base = state.as_tuple()
    m0 = op(base)
    deriv = np.empty((4, 4, 4))
    for m in range(4):
        h = step * max(1.0, abs(base[m]))
        hi = list(base)
        lo = list(base)
        hi[m] += h
        lo[m] -= h
        deriv[m] = (op(hi) - op(lo)) / (2.0 * h)
    cyc = np.einsum("im,mjk->ijk", m0, deriv)
    defect = cyc + cyc.transpose(2, 0, 1) + cyc.transpose(1, 2, 0)
    return float(np.abs(defect).max())


# ---------------------------------------------------------------------------
# Physical reading of s for drift systems: s is a rescaled parallel velocity.

_SQRT2 = math.sqrt(2.0)


def s_of_vparallel(vpar: float, m: float) -> float:
    """s = (exp(sqrt(2) m v) - 1) / 2; monotone, s(0) = 0."""
    if m <= 0.0:
        raise ValueError("mass must be positive")
    return 0.5 * math.expm1(_SQRT2 * m * vpar)


def vparallel_of_s(s: float, m: float) -> float:
    """Inverse of s_of_vparallel; defined for s > -1/2."""
    if m <= 0.0:
        raise ValueError("mass must be positive")
    if 1.0 + 2.0 * s <= 0.0:
        raise ValueError(f"s = {s} is outside the image of the map (needs s > -1/2)")
    return math.log1p(2.0 * s) / (_SQRT2 * m)
