"""Equilibrium statistics of the extended flow.

The invariant measure of the proper-time flow is not the naive phase
space volume: pulled back to (x, y, z, s) it carries the Jacobian weight
w . D + s h.  The equilibrium density therefore reads

    f = exp(-beta H) / Z * (w . D + s h),

and integrating out the s window [0, delta_s] gives the spatial marginal

    F = delta_s / Z * (w . D + delta_s/2 * h) * exp(-beta H),

a Boltzmann factor deformed by the helicity density.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import consys
from .extension import ExtendedState, ExtensionSpec
from .fieldcore import Point3, PoissonizeError, helicity_density


class NegativeDensity(PoissonizeError):
    """w . D + s h went negative somewhere in the configured s window."""


@dataclass(slots=True, frozen=True)
class EquilibriumSpec:
    beta: float
    delta_s: float
    Z: float = 1.0

    def __post_init__(self) -> None:
        if self.delta_s <= 0.0:
            raise ValueError("delta_s must be positive")
        if self.Z <= 0.0:
            raise ValueError("Z must be positive")

    def normalized(self, z_value: float) -> "EquilibriumSpec":
        return replace(self, Z=z_value)


def gibbs_weight(energy: float, spec: EquilibriumSpec) -> float:
    """exp(-beta H) / Z."""
    return math.exp(-spec.beta * energy) / spec.Z


def _density_parts(sys: consys.ConservativeSystem, ext: ExtensionSpec,
                   p: Point3) -> tuple[float, float]:
    w = sys.operator_vector.eval(p)
    return w.dot(ext.d_field.eval(p)), helicity_density(sys.operator_vector, p)


def f_density(sys: consys.ConservativeSystem, ext: ExtensionSpec,
              state: ExtendedState, spec: EquilibriumSpec) -> float:
    """Equilibrium density on the extended space at one state."""
    wd, h = _density_parts(sys, ext, state.p)
    weight = wd + state.s * h
    if weight < 0.0:
        raise NegativeDensity(f"w.D + s h = {weight} < 0 at {state}")
    return gibbs_weight(sys.hamiltonian.eval(state.p), spec) * weight


def marginal_density(sys: consys.ConservativeSystem, ext: ExtensionSpec,
                     p: Point3, spec: EquilibriumSpec) -> float:
    """Spatial density after integrating s over [0, delta_s] in closed form."""
    wd, h = _density_parts(sys, ext, p)
    ds = spec.delta_s
    return ds / spec.Z * (wd + 0.5 * ds * h) * math.exp(-spec.beta * sys.hamiltonian.eval(p))


def simpson_weights(count: int, spacing: float) -> np.ndarray:
    """Composite Simpson weights for `count` uniform nodes (count odd, >= 3)."""
    if count < 3 or count % 2 == 0:
        raise ValueError("Simpson quadrature needs an odd node count >= 3")
    w = np.ones(count)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (spacing / 3.0)


@dataclass(slots=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int

    def __post_init__(self) -> None:
        if self.name not in ("x", "y", "z"):
            raise ValueError(f"axis name must be x, y or z, got '{self.name}'")
        if self.hi <= self.lo:
            raise ValueError("axis range is empty")
        if self.count < 3 or self.count % 2 == 0:
            raise ValueError("axis count must be odd and >= 3 for the quadrature")

    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)

    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)


@dataclass(slots=True)
class EquilibriumGrid:
    """Normalized spatial marginal tabulated on a 2D slice."""

    axis1: Axis
    axis2: Axis
    fixed_name: str
    fixed_value: float
    values: np.ndarray  # shape (axis1.count, axis2.count)
    spec: EquilibriumSpec

    def quadrature_integral(self) -> float:
        w1 = simpson_weights(self.axis1.count, self.axis1.spacing())
        w2 = simpson_weights(self.axis2.count, self.axis2.spacing())
        return float(w1 @ self.values @ w2)

    def write_csv(self, path) -> None:
        n1 = self.axis1.nodes()
        n2 = self.axis2.nodes()
        with open(path, "w") as out:
            out.write(f"{self.axis1.name},{self.axis2.name},F\n")
            for i, a in enumerate(n1):
                for j, b in enumerate(n2):
                    out.write(f"{a:.17g},{b:.17g},{self.values[i, j]:.17g}\n")

    def write_sidecar(self, path) -> None:
        meta = {
            "beta": self.spec.beta,
            "delta_s": self.spec.delta_s,
            "Z": self.spec.Z,
            "axes": {
                self.axis1.name: [self.axis1.lo, self.axis1.hi, self.axis1.count],
                self.axis2.name: [self.axis2.lo, self.axis2.hi, self.axis2.count],
            },
            "fixed": {self.fixed_name: self.fixed_value},
        }
        with open(path, "w") as out:
            json.dump(meta, out, indent=2)
            out.write("\n")


def _grid_point(axis1: Axis, axis2: Axis, fixed_name: str, fixed_value: float,
                a: float, b: float) -> Point3:
    coords = {fixed_name: fixed_value, axis1.name: a, axis2.name: b}
    return Point3(coords["x"], coords["y"], coords["z"])


def equilibrium_grid(sys: consys.ConservativeSystem, ext: ExtensionSpec,
                     spec: EquilibriumSpec, axis1: Axis, axis2: Axis,
                     fixed_value: float = 0.0, threads: int = 1) -> EquilibriumGrid:
    """Tabulate the normalized marginal on a 2D slice.

    Z comes from composite Simpson quadrature over the slice and a 3-node
    Simpson rule in s (exact: the density is linear in s).  The admissibility
    guard raises NegativeDensity as soon as w . D + s h dips below zero at
    either end of the s window.
    """
    names = {axis1.name, axis2.name}
    if len(names) != 2:
        raise ValueError("the two axes must differ")
    fixed_name = ({"x", "y", "z"} - names).pop()
    n1, n2 = axis1.nodes(), axis2.nodes()
    ds = spec.delta_s

    def row(i: int) -> tuple[np.ndarray, np.ndarray]:
        unnorm = np.empty(axis2.count)
        s_int = np.empty(axis2.count)
        for j in range(axis2.count):
            p = _grid_point(axis1, axis2, fixed_name, fixed_value, float(n1[i]), float(n2[j]))
            wd, h = _density_parts(sys, ext, p)
            if wd < 0.0 or wd + ds * h < 0.0:
                raise NegativeDensity(
                    f"w.D + s h < 0 within s in [0, {ds}] at {p}")
            boltz = math.exp(-spec.beta * sys.hamiltonian.eval(p))
            unnorm[j] = ds * (wd + 0.5 * ds * h) * boltz
            # 3-node Simpson in s; equals the closed form to roundoff.
            s_int[j] = (ds / 6.0) * (wd + 4.0 * (wd + 0.5 * ds * h) + (wd + ds * h)) * boltz
        return unnorm, s_int

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, range(axis1.count)))
    else:
        rows = [row(i) for i in range(axis1.count)]

    unnorm = np.array([r[0] for r in rows])
    s_int = np.array([r[1] for r in rows])
    w1 = simpson_weights(axis1.count, axis1.spacing())
    w2 = simpson_weights(axis2.count, axis2.spacing())
    z_value = float(w1 @ s_int @ w2)
    if z_value <= 0.0:
        raise NegativeDensity("normalization integral is not positive")
    normalized = spec.normalized(z_value)
    return EquilibriumGrid(axis1, axis2, fixed_name, fixed_value,
                           unnorm / z_value, normalized)


def entropy(p_values: np.ndarray, weights: np.ndarray | float) -> float:
    """-sum w p log p over the grid; cells with p = 0 contribute nothing."""
    p = np.asarray(p_values, dtype=float)
    if (p < 0.0).any():
        raise ValueError("probability values must be non-negative")
    logs = np.where(p > 0.0, np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return float(-(np.asarray(weights) * p * logs).sum())


def gibbs_maximality_check(energies: np.ndarray, weights: np.ndarray | float,
                           beta: float, trials: int = 100, eps: float = 1e-3,
                           seed: int = 20260814) -> float:
    """Worst entropy gain over constrained perturbations of the Gibbs state.

    Each perturbation is projected onto { sum w d = 0, sum w d H = 0 } and
    scaled to unit sup norm, so P + eps d keeps both the normalization and
    the mean energy.  For the Gibbs distribution every gain is negative;
    the return value is the maximum (closest to zero) gain observed.
    """
    h = np.asarray(energies, dtype=float).ravel()
    w = np.broadcast_to(np.asarray(weights, dtype=float), h.shape).ravel()
    p = np.exp(-beta * h)
    p = p / float((w * p).sum())
    if (p <= eps).any():
        raise ValueError("grid too wide: Gibbs weights fall below the perturbation size")
    base = float(-(w * p * np.log(p)).sum())

    def project(d: np.ndarray) -> np.ndarray:
        ones = np.ones_like(d)
        d = d - (w * d).sum() / (w * ones).sum() * ones
        h2 = h - (w * h).sum() / (w * ones).sum() * ones
        denom = (w * h2 * h2).sum()
        if denom > 0.0:
            d = d - (w * d * h2).sum() / denom * h2
        return d

    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(trials):
        d = project(rng.standard_normal(h.shape))
        peak = np.abs(d).max()
        if peak == 0.0:
            continue
        d /= peak
        perturbed = p + eps * d
        gain = float(-(w * perturbed * np.log(perturbed)).sum()) - base
        worst = max(worst, gain)
    return worst
