"""Trajectory integration in physical and proper time.

The extended flow X has a companion clock: proper time tau with
d(tau)/dt = r, the conformal factor.  Integrating X in t and X/r in tau
trace the same orbit; both clocks are carried along so either
parametrization can be reported.  Fixed-step RK4 is the reference
integrator (deterministic output); an embedded RKF45 with PI step
control is available when adaptivity matters more than reproducibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import consys
from .extension import (
    ConformalFactorVanished,
    ExtendedState,
    ExtensionSpec,
    conformal_factor,
    extended_velocity,
)
from .fieldcore import Point3, PoissonizeError, helicity_density


class StepFailure(PoissonizeError):
    """The adaptive integrator could not meet the tolerance above dt_min."""


@dataclass(slots=True)
class IntegratorConfig:
    method: str = "rk4"
    clock: str = "physical"
    dt: float = 1e-3
    t_end: float | None = None
    tau_end: float | None = None
    record_every: int = 1
    # rkf45 only:
    tol_rel: float = 1e-8
    tol_abs: float = 1e-10
    dt_min: float = 1e-10
    dt_max: float = 1.0
    safety: float = 0.9

    def __post_init__(self) -> None:
        if self.method not in ("rk4", "rkf45"):
            raise ValueError(f"unknown method '{self.method}'")
        if self.clock not in ("physical", "proper"):
            raise ValueError(f"unknown clock '{self.clock}'")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.clock == "physical" and self.t_end is None:
            raise ValueError("physical clock requires t_end")
        if self.clock == "proper" and self.tau_end is None:
            raise ValueError("proper clock requires tau_end")
        end = self.span()
        if end <= 0.0:
            raise ValueError("integration span must be positive")

    def span(self) -> float:
        return self.t_end if self.clock == "physical" else self.tau_end


@dataclass(slots=True)
class TrajectorySample:
    t: float
    tau: float
    state: ExtendedState
    energy: float
    r: float
    helicity: float
    constraint_residual: float


@dataclass(slots=True)
class TrajectoryRecord:
    system: str
    clock: str
    method: str
    dt: float
    samples: list[TrajectorySample] = field(default_factory=list)
    status: str = "completed"

    def final(self) -> TrajectorySample:
        return self.samples[-1]

    def write_csv(self, path) -> None:
        with open(path, "w") as out:
            out.write("tau,t,x,y,z,s,H,r,h,constraint_residual\n")
            for s in self.samples:
                st = s.state
                row = (s.tau, s.t, st.p.x, st.p.y, st.p.z, st.s,
                       s.energy, s.r, s.helicity, s.constraint_residual)
                out.write(",".join(f"{v:.17g}" for v in row) + "\n")


def rk4_step(f, y: tuple, h: float) -> tuple:
    """One classical Runge-Kutta step for a tuple-valued state."""
    k1 = f(y)
    k2 = f(tuple(yi + 0.5 * h * ki for yi, ki in zip(y, k1)))
    k3 = f(tuple(yi + 0.5 * h * ki for yi, ki in zip(y, k2)))
    k4 = f(tuple(yi + h * ki for yi, ki in zip(y, k3)))
    return tuple(yi + (h / 6.0) * (a + 2.0 * (b + c) + d)
                 for yi, a, b, c, d in zip(y, k1, k2, k3, k4))


def fixed_steps(span: float, dt: float) -> list[float]:
    """Uniform steps covering [0, span], with a trailing remainder if needed."""
    n = int(round(span / dt))
    if n >= 1 and abs(n * dt - span) <= 1e-9 * max(1.0, span):
        return [dt] * n
    n = int(span / dt)
    steps = [dt] * n
    rem = span - n * dt
    if rem > 1e-12 * dt:
        steps.append(rem)
    return steps


def _make_rhs(sys: consys.ConservativeSystem, ext: ExtensionSpec, clock: str):
    """State is (x, y, z, s, other_clock)."""

    def physical(y: tuple) -> tuple:
        st = ExtendedState(Point3(y[0], y[1], y[2]), y[3])
        v, sdot = extended_velocity(sys, ext, st)
        r = conformal_factor(sys, ext, st).value
        return (v.x, v.y, v.z, sdot, r)

    def proper(y: tuple) -> tuple:
        st = ExtendedState(Point3(y[0], y[1], y[2]), y[3])
        v, sdot = extended_velocity(sys, ext, st)
        inv = 1.0 / conformal_factor(sys, ext, st).value
        return (v.x * inv, v.y * inv, v.z * inv, sdot * inv, inv)

    return physical if clock == "physical" else proper


def _sample(sys, ext, clock: str, primary: float, y: tuple) -> TrajectorySample:
    st = ExtendedState(Point3(y[0], y[1], y[2]), y[3])
    r = conformal_factor(sys, ext, st).value
    h = helicity_density(sys.operator_vector, st.p)
    res = consys.constraint_residual(sys, st.p)
    energy = sys.hamiltonian.eval(st.p)
    if clock == "physical":
        return TrajectorySample(primary, y[4], st, energy, r, h, res)
    return TrajectorySample(y[4], primary, st, energy, r, h, res)


def integrate(sys: consys.ConservativeSystem, ext: ExtensionSpec,
              init: ExtendedState, cfg: IntegratorConfig) -> TrajectoryRecord:
    """Integrate the extended flow; returns the recorded trajectory.

    The conformal factor is evaluated at every accepted step.  If it drops
    below the floor or changes sign the record is truncated and returned
    with status 'conformal_factor_vanished' instead of raising, so partial
    output can still be written.  A vanishing r at the initial state is a
    precondition violation and does raise.
    """
    r0 = conformal_factor(sys, ext, init).value  # raises if already vanished
    rhs = _make_rhs(sys, ext, cfg.clock)
    record = TrajectoryRecord(sys.name, cfg.clock, cfg.method, cfg.dt)
    y = init.as_tuple() + (0.0,)
    primary = 0.0
    record.samples.append(_sample(sys, ext, cfg.clock, primary, y))

    if cfg.method == "rk4":
        steps = fixed_steps(cfg.span(), cfg.dt)
        for k, h in enumerate(steps):
            try:
                y_new = rk4_step(rhs, y, h)
                st = ExtendedState(Point3(y_new[0], y_new[1], y_new[2]), y_new[3])
                r_new = conformal_factor(sys, ext, st).value
            except ConformalFactorVanished:
                record.status = "conformal_factor_vanished"
                return record
            if r_new * r0 < 0.0:
                record.status = "conformal_factor_vanished"
                return record
            y = y_new
            primary += h
            if (k + 1) % cfg.record_every == 0 or k == len(steps) - 1:
                record.samples.append(_sample(sys, ext, cfg.clock, primary, y))
        return record

    return _integrate_rkf45(sys, ext, cfg, rhs, record, y, r0)


# Fehlberg 4(5) tableau.
_A = (
    (),
    (0.25,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
_B5 = (16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0)
_ERR = (1.0 / 360.0, 0.0, -128.0 / 4275.0, -2197.0 / 75240.0, 1.0 / 50.0, 2.0 / 55.0)


def rkf45_step(f, y: tuple, h: float) -> tuple[tuple, float]:
    """One Fehlberg step: returns the 5th order update and the error estimate."""
    k = [f(y)]
    for row in _A[1:]:
        stage = tuple(yi + h * sum(a * kj[i] for a, kj in zip(row, k))
                      for i, yi in enumerate(y))
        k.append(f(stage))
    y_new = tuple(yi + h * sum(b * kj[i] for b, kj in zip(_B5, k))
                  for i, yi in enumerate(y))
    err = tuple(h * sum(e * kj[i] for e, kj in zip(_ERR, k)) for i in range(len(y)))
    return y_new, err


def _integrate_rkf45(sys, ext, cfg: IntegratorConfig, rhs, record: TrajectoryRecord,
                     y: tuple, r0: float) -> TrajectoryRecord:
    span = cfg.span()
    primary = 0.0
    h = min(cfg.dt, cfg.dt_max)
    err_prev = 1.0
    accepted = 0
    while primary < span * (1.0 - 1e-12):
        h = min(h, span - primary)
        try:
            y_new, err = rkf45_step(rhs, y, h)
        except ConformalFactorVanished:
            record.status = "conformal_factor_vanished"
            return record
        scale = tuple(cfg.tol_abs + cfg.tol_rel * max(abs(a), abs(b))
                      for a, b in zip(y, y_new))
        norm = math.sqrt(sum((e / s) ** 2 for e, s in zip(err, scale)) / len(y))
        if norm <= 1.0:
            try:
                st = ExtendedState(Point3(y_new[0], y_new[1], y_new[2]), y_new[3])
                r_new = conformal_factor(sys, ext, st).value
            except ConformalFactorVanished:
                record.status = "conformal_factor_vanished"
                return record
            if r_new * r0 < 0.0:
                record.status = "conformal_factor_vanished"
                return record
            y = y_new
            primary += h
            accepted += 1
            if accepted % cfg.record_every == 0 or primary >= span * (1.0 - 1e-12):
                record.samples.append(_sample(sys, ext, cfg.clock, primary, y))
            # PI controller (order 5).
            fac = cfg.safety * (norm ** -0.14) * (err_prev ** 0.08) if norm > 0.0 else 5.0
            err_prev = max(norm, 1e-10)
            h = min(max(h * min(max(fac, 0.2), 5.0), cfg.dt_min), cfg.dt_max)
        else:
            h *= min(max(cfg.safety * norm ** -0.2, 0.1), 0.5)
            if h < cfg.dt_min:
                raise StepFailure(f"step size {h:.3e} below dt_min at clock {primary}")
    return record


def jacobian_g(sys: consys.ConservativeSystem, ext: ExtensionSpec,
               state: ExtendedState) -> float:
    """Jacobian weight g = 1/r of the proper-time reparametrization."""
    return 1.0 / conformal_factor(sys, ext, state).value


def volume_preservation_check(sys: consys.ConservativeSystem, ext: ExtensionSpec,
                              cloud: list[ExtendedState], cfg: IntegratorConfig) -> float:
    """|V(t_end)/V(0) - 1| for the 4-simplex spanned by the first 5 states.

    The extended flow is divergence free, so for a small simplex the mapped
    vertex volume is preserved to leading order in the edge length.
    """
    if len(cloud) < 5:
        raise ValueError("need at least 5 vertices for a 4-simplex")
    if cfg.clock != "physical":
        raise ValueError("volume check runs in the physical clock")

    def simplex_volume(vertices: list[tuple]) -> float:
        base = np.array(vertices[0])
        edges = np.array([np.array(v) - base for v in vertices[1:5]])
        return abs(float(np.linalg.det(edges)))

    start = [st.as_tuple() for st in cloud[:5]]
    v0 = simplex_volume(start)
    if v0 == 0.0:
        raise ValueError("degenerate simplex")
    moved = []
    for st in cloud[:5]:
        rec = integrate(sys, ext, st, cfg)
        if rec.status != "completed":
            raise ConformalFactorVanished("conformal factor vanished while moving the simplex")
        moved.append(rec.final().state.as_tuple())
    return abs(simplex_volume(moved) / v0 - 1.0)
