"""Geometric field primitives on R^3.

Points, vectors, scalar and vector fields with exact first derivatives,
and the differential operators (gradient, divergence, curl, helicity
density) built on top of them.  Derivatives on the field interface are
always analytic; central finite differences are provided separately as
an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class PoissonizeError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteResult(PoissonizeError):
    """A field or operator produced NaN or Inf."""


@dataclass(slots=True)
class Vec3:
    """Vector (or point) in R^3 with finite components."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise NonFiniteResult(f"non-finite components ({self.x}, {self.y}, {self.z})")

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, a: float) -> "Vec3":
        return Vec3(self.x * a, self.y * a, self.z * a)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


# A point is a vector anchored at the origin; both views are useful.
Point3 = Vec3


class ScalarField3:
    """Scalar field f: R^3 -> R with an exact gradient."""

    name = ""

    def eval(self, p: Point3) -> float:
        raise NotImplementedError

    def gradient(self, p: Point3) -> Vec3:
        raise NotImplementedError


class VectorField3:
    """Vector field u: R^3 -> R^3 with an exact Jacobian J[i][j] = d(u_i)/d(x_j)."""

    name = ""

    def eval(self, p: Point3) -> Vec3:
        raise NotImplementedError

    def jacobian(self, p: Point3) -> np.ndarray:
        raise NotImplementedError


class FuncScalarField(ScalarField3):
    """Scalar field from a value closure and a gradient closure."""

    def __init__(self, fn: Callable[[Point3], float], grad_fn: Callable[[Point3], Vec3],
                 name: str = "") -> None:
        self._fn = fn
        self._grad = grad_fn
        self.name = name

    def eval(self, p: Point3) -> float:
        return self._fn(p)

    def gradient(self, p: Point3) -> Vec3:
        return self._grad(p)


class FuncVectorField(VectorField3):
    """Vector field from a value closure and a Jacobian closure."""

    def __init__(self, fn: Callable[[Point3], Vec3], jac_fn: Callable[[Point3], np.ndarray],
                 name: str = "") -> None:
        self._fn = fn
        self._jac = jac_fn
        self.name = name

    def eval(self, p: Point3) -> Vec3:
        return self._fn(p)

    def jacobian(self, p: Point3) -> np.ndarray:
        return self._jac(p)


def constant_vector_field(v: Vec3, name: str = "") -> VectorField3:
    zero = np.zeros((3, 3))
    return FuncVectorField(lambda p: v, lambda p: zero, name)


def grad(f: ScalarField3, p: Point3) -> Vec3:
    """Exact gradient of f at p."""
    g = f.gradient(p)
    # Vec3 construction already rejects non-finite components; g may come
    # from user code returning a raw object, so re-wrap defensively.
    if not isinstance(g, Vec3):
        g = Vec3(*g)
    return g

def div(u: VectorField3, p: Point3) -> float:
    """Divergence of u at p (trace of the exact Jacobian)."""
    jac = u.jacobian(p)
    out = jac[0][0] + jac[1][1] + jac[2][2]
    if not math.isfinite(out):
        raise NonFiniteResult(f"div({u.name}) is {out} at {p}")
    return float(out)

def curl(u: VectorField3, p: Point3) -> Vec3:
    """Curl of u at p from the exact Jacobian."""
    jac = u.jacobian(p)
    return Vec3(
        float(jac[2][1] - jac[1][2]),
        float(jac[0][2] - jac[2][0]),
        float(jac[1][0] - jac[0][1]),
    )

def helicity_density(u: VectorField3, p: Point3) -> float:
    """u . curl(u) at p; zero exactly when u admits an integrating factor."""
    out = u.eval(p).dot(curl(u, p))
    if not math.isfinite(out):
        raise NonFiniteResult(f"helicity of {u.name} is {out} at {p}")
    return out


# ---------------------------------------------------------------------------
# Finite-difference cross-checks.  Step scales with coordinate magnitude so
# the stencil stays well conditioned for large points.

def fd_step(coord: float, scale: float = 1e-5) -> float:
    return scale * max(1.0, abs(coord))


def fd_gradient(fn: Callable[[Point3], float], p: Point3, scale: float = 1e-5) -> Vec3:
    comps = []
    base = p.as_tuple()
    for i in range(3):
        h = fd_step(base[i], scale)
        hi = list(base)
        lo = list(base)
        hi[i] += h
        lo[i] -= h
        comps.append((fn(Point3(*hi)) - fn(Point3(*lo))) / (2.0 * h))
    return Vec3(*comps)


def fd_jacobian(fn: Callable[[Point3], Vec3], p: Point3, scale: float = 1e-5) -> np.ndarray:
    jac = np.empty((3, 3))
    base = p.as_tuple()
    for j in range(3):
        h = fd_step(base[j], scale)
        hi = list(base)
        lo = list(base)
        hi[j] += h
        lo[j] -= h
        dv = (fn(Point3(*hi)) - fn(Point3(*lo))) * (1.0 / (2.0 * h))
        jac[0][j], jac[1][j], jac[2][j] = dv.x, dv.y, dv.z
    return jac


def fd_divergence(fn: Callable[[Sequence[float]], Sequence[float]],
                  state: Sequence[float], scale: float = 1e-5) -> float:
    """Central-difference divergence of an R^n -> R^n map at state."""
    total = 0.0
    base = list(state)
    for i in range(len(base)):
        h = fd_step(base[i], scale)
        hi = list(base)
        lo = list(base)
        hi[i] += h
        lo[i] -= h
        total += (fn(hi)[i] - fn(lo)[i]) / (2.0 * h)
    return total


# ---------------------------------------------------------------------------
# Sampling.

@dataclass(slots=True)
class Box:
    """Axis-aligned box [lo, hi] in R^3."""

    lo: Point3
    hi: Point3


UNIT_BOX = Box(Point3(-1.0, -1.0, -1.0), Point3(1.0, 1.0, 1.0))


def _radical_inverse(index: int, base: int) -> float:
    out, frac = 0.0, 1.0 / base
    while index > 0:
        out += (index % base) * frac
        index //= base
        frac /= base
    return out


def halton_points(count: int, box: Box = UNIT_BOX) -> list[Point3]:
    """Deterministic low-discrepancy sample of a box (Halton, bases 2/3/5)."""
    lo = box.lo.as_tuple()
    hi = box.hi.as_tuple()
    pts = []
    for k in range(1, count + 1):
        u = (_radical_inverse(k, 2), _radical_inverse(k, 3), _radical_inverse(k, 5))
        pts.append(Point3(*(lo[i] + (hi[i] - lo[i]) * u[i] for i in range(3))))
    return pts
