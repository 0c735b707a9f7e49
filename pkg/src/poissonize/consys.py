"""Conservative systems v = w x grad(H) and their Jacobi diagnostics.

A system pairs an antisymmetric operator (represented by its vector w)
with a conserved Hamiltonian.  The helicity density w . curl(w) decides
whether the operator brackets satisfy the Jacobi identity: zero means a
genuine Poisson structure, anything else is a nonholonomic constraint
in disguise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fieldcore import (
    Box,
    FuncScalarField,
    FuncVectorField,
    NonFiniteResult,
    Point3,
    PoissonizeError,
    ScalarField3,
    UNIT_BOX,
    Vec3,
    VectorField3,
    curl,
    grad,
    halton_points,
    helicity_density,
)


class UnknownSystem(PoissonizeError):
    pass


class ZeroFieldError(PoissonizeError):
    """A drift construction was given a magnetic field with |B| ~ 0."""


@dataclass(slots=True)
class ConservativeSystem:
    """3D system x' = w x grad(H)."""

    name: str
    operator_vector: VectorField3
    hamiltonian: ScalarField3
    # Magnetic field behind a drift system, when there is one; used as the
    # default closed extension field.
    b_field: VectorField3 | None = None


def velocity(sys: ConservativeSystem, p: Point3) -> Vec3:
    """Phase velocity w x grad(H) at p."""
    w = sys.operator_vector.eval(p)
    g = grad(sys.hamiltonian, p)
    v = w.cross(g)
    if not (math.isfinite(v.x) and math.isfinite(v.y) and math.isfinite(v.z)):
        raise NonFiniteResult(f"velocity of {sys.name} non-finite at {p}")
    return v


def constraint_residual(sys: ConservativeSystem, p: Point3) -> float:
    """w . v, identically zero for exact arithmetic; returns the raw residual."""
    return sys.operator_vector.eval(p).dot(velocity(sys, p))


def velocity_divergence(sys: ConservativeSystem, p: Point3) -> float:
    """div(w x grad H) = grad(H) . curl(w); needs no second derivatives of H."""
    return curl(sys.operator_vector, p).dot(grad(sys.hamiltonian, p))


@dataclass(slots=True)
class JacobiReport:
    kind: str  # "hamiltonian" or "nonholonomic"
    max_abs_helicity: float
    argmax: Point3
    samples: int


def classify_jacobi(sys: ConservativeSystem, region: Box = UNIT_BOX,
                    samples: int = 512, tol_h: float = 1e-9) -> JacobiReport:
    """Sample w . curl(w) over a box and classify the operator.

    Uses a deterministic low-discrepancy point set, so repeated runs agree
    exactly.
    """
    worst = -1.0
    argmax = region.lo
    for p in halton_points(samples, region):
        h = abs(helicity_density(sys.operator_vector, p))
        if h > worst:
            worst, argmax = h, p
    kind = "hamiltonian" if worst < tol_h else "nonholonomic"
    return JacobiReport(kind, worst, argmax, samples)


def casimir_drift(sys: ConservativeSystem, candidate: ScalarField3, traj) -> float:
    """Max |C(x(t)) - C(x(0))| along a trajectory.

    `traj` is either a recorded trajectory (anything with .samples whose
    entries carry .state.p) or a plain sequence of points.
    """
    if hasattr(traj, "samples"):
        points = [s.state.p for s in traj.samples]
    else:
        points = list(traj)
    if not points:
        raise ValueError("empty trajectory")
    c0 = candidate.eval(points[0])
    return max(abs(candidate.eval(p) - c0) for p in points)


# ---------------------------------------------------------------------------
# Built-in systems.

def plasma_particle() -> ConservativeSystem:
    """Charged particle drifting in the helical unit field.

    w = (cos z + sin z, cos z - sin z, 0) with H = (x^2 + y^2 + z^2)/2.
    The operator vector equals its own curl, so the helicity density is
    |w|^2 = 2 everywhere: this system never satisfies Jacobi.
    """

    def w_eval(p: Point3) -> Vec3:
        c, s = math.cos(p.z), math.sin(p.z)
        return Vec3(c + s, c - s, 0.0)

    def w_jac(p: Point3) -> np.ndarray:
        c, s = math.cos(p.z), math.sin(p.z)
        return np.array([[0.0, 0.0, c - s], [0.0, 0.0, -c - s], [0.0, 0.0, 0.0]])

    w = FuncVectorField(w_eval, w_jac, "helical unit drift")
    ham = FuncScalarField(
        lambda p: 0.5 * (p.x * p.x + p.y * p.y + p.z * p.z),
        lambda p: Vec3(p.x, p.y, p.z),
        "quadratic well",
    )
    # w = B / B^2 with B^2 = 1/2, hence B = w / 2.
    b = FuncVectorField(lambda p: w_eval(p) * 0.5, lambda p: w_jac(p) * 0.5, "helical B")
    return ConservativeSystem("plasma_particle", w, ham, b)


def rigid_body(ix: float, iy: float, iz: float) -> ConservativeSystem:
    """Free rotor: w = x (angular momentum) and H the kinetic energy."""
    if min(ix, iy, iz) <= 0.0:
        raise ValueError("moments of inertia must be positive")
    identity = np.eye(3)
    w = FuncVectorField(lambda p: Vec3(p.x, p.y, p.z), lambda p: identity, "momentum")
    ham = FuncScalarField(
        lambda p: 0.5 * (p.x * p.x / ix + p.y * p.y / iy + p.z * p.z / iz),
        lambda p: Vec3(p.x / ix, p.y / iy, p.z / iz),
        "kinetic energy",
    )
    return ConservativeSystem(f"rigid_body({ix},{iy},{iz})", w, ham)


def drift_operator_field(b_field: VectorField3) -> VectorField3:
    """w = B / |B|^2, with the exact quotient-rule Jacobian."""

    def w_eval(p: Point3) -> Vec3:
        b = b_field.eval(p)
        inv = 1.0 / b.dot(b)
        return b * inv

    def w_jac(p: Point3) -> np.ndarray:
        b = np.array(b_field.eval(p).as_tuple())
        jb = b_field.jacobian(p)
        b2 = float(b @ b)
        return jb / b2 - np.outer(b, 2.0 * (b @ jb)) / (b2 * b2)

    return FuncVectorField(w_eval, w_jac, f"drift of {b_field.name}")


def exb(b_field: VectorField3, potential: ScalarField3,
        probe: Box = UNIT_BOX, probe_count: int = 200,
        name: str = "exb") -> ConservativeSystem:
    """E x B drift system: w = B / B^2, H the electrostatic potential.

    The field is probed on a low-discrepancy sample of `probe` and rejected
    if its magnitude ever falls below 1e-12.
    """
    for p in halton_points(probe_count, probe):
        if b_field.eval(p).norm() < 1e-12:
            raise ZeroFieldError(f"|B| < 1e-12 at {p}")
    return ConservativeSystem(name, drift_operator_field(b_field), potential, b_field)


def nonintegrable_exb() -> ConservativeSystem:
    """Drift in B = (1, 0, (y - sin y cos y)/2 - sin x) with zero potential.

    The helicity density works out to sin(y)^2 / (1 + Bz^2)^2, strictly
    positive off the planes sin y = 0, so no choice of coordinates makes
    this drift Hamiltonian in 3D.
    """

    def bz(x: float, y: float) -> float:
        return 0.5 * (y - math.sin(y) * math.cos(y)) - math.sin(x)

    def b_eval(p: Point3) -> Vec3:
        return Vec3(1.0, 0.0, bz(p.x, p.y))

    def b_jac(p: Point3) -> np.ndarray:
        sy = math.sin(p.y)
        return np.array([[0.0, 0.0, 0.0],
                         [0.0, 0.0, 0.0],
                         [-math.cos(p.x), sy * sy, 0.0]])

    b = FuncVectorField(b_eval, b_jac, "shear B")
    zero = FuncScalarField(lambda p: 0.0, lambda p: Vec3(0.0, 0.0, 0.0), "vanishing potential")
    return ConservativeSystem("nonintegrable_exb", drift_operator_field(b), zero, b)


_BUILTINS = {
    "plasma_particle": lambda params: plasma_particle(),
    "rigid_body": lambda params: rigid_body(params["Ix"], params["Iy"], params["Iz"]),
    "nonintegrable_exb": lambda params: nonintegrable_exb(),
}


def builtin(name: str, params: dict | None = None) -> ConservativeSystem:
    """Look up a built-in system by name ('exb' needs fields, use exb())."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise UnknownSystem(f"no built-in system named '{name}'") from None
    return factory(params or {})
