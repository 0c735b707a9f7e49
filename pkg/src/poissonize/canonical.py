"""Canonical chart for the extended helical drift system.

On the branch z in (-pi/2, pi/2), s > -1/2, the proper-time flow of the
extended plasma system is the Hamiltonian flow of

    H(q, p) = (px^2 + py^2 + arcsin(u)^2) / 2,
    u = (qx - qy) / sqrt(2 (qx^2 + qy^2)),

under the chart qx = (s + 1/2)(cos z + sin z), px = -x,
qy = (s + 1/2)(cos z - sin z), py = -y.  The chart is a local
diffeomorphism; crossing the branch is reported, never glued over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import consys
from .extension import ConformalFactorVanished, ExtendedState, ExtensionSpec
from .fieldcore import Point3, PoissonizeError
from .propertime import IntegratorConfig, fixed_steps, integrate, rk4_step


class ChartSingularity(PoissonizeError):
    """The chart degenerates where qx^2 + qy^2 = 0."""


class BranchViolation(PoissonizeError):
    """A state left the principal branch z in (-pi/2, pi/2), s > -1/2."""


_HALF_PI = 0.5 * math.pi


@dataclass(slots=True)
class CanonicalState:
    qx: float
    px: float
    qy: float
    py: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.qx, self.px, self.qy, self.py)


def to_canonical(state: ExtendedState) -> CanonicalState:
    """Map an extended state into the chart; rejects out-of-branch input."""
    z, s = state.p.z, state.s
    if not (-_HALF_PI < z < _HALF_PI):
        raise BranchViolation(f"z = {z} outside (-pi/2, pi/2)")
    if s <= -0.5:
        raise BranchViolation(f"s = {s} not above -1/2")
    c, sn = math.cos(z), math.sin(z)
    amp = s + 0.5
    return CanonicalState(amp * (c + sn), -state.p.x, amp * (c - sn), -state.p.y)


def from_canonical(cs: CanonicalState) -> ExtendedState:
    """Inverse chart (principal branch, positive amplitude root)."""
    sq = cs.qx * cs.qx + cs.qy * cs.qy
    if sq <= 0.0:
        raise ChartSingularity("qx^2 + qy^2 = 0")
    u = (cs.qx - cs.qy) / math.sqrt(2.0 * sq)
    u = max(-1.0, min(1.0, u))  # roundoff guard; |u| <= 1 analytically
    z = math.asin(u)
    s = math.sqrt(0.5 * sq) - 0.5
    return ExtendedState(Point3(-cs.px, -cs.py, z), s)


def hamiltonian_canonical(cs: CanonicalState) -> float:
    sq = cs.qx * cs.qx + cs.qy * cs.qy
    if sq <= 0.0:
        raise ChartSingularity("qx^2 + qy^2 = 0")
    u = max(-1.0, min(1.0, (cs.qx - cs.qy) / math.sqrt(2.0 * sq)))
    z = math.asin(u)
    return 0.5 * (cs.px * cs.px + cs.py * cs.py + z * z)


def hamilton_rhs(cs: CanonicalState) -> tuple[float, float, float, float]:
    """Right-hand side of the canonical equations in proper time."""
    sq = cs.qx * cs.qx + cs.qy * cs.qy
    if sq <= 0.0:
        raise ChartSingularity("qx^2 + qy^2 = 0")
    u = max(-1.0, min(1.0, (cs.qx - cs.qy) / math.sqrt(2.0 * sq)))
    z = math.asin(u)
    return (cs.px, -cs.qy * z / sq, cs.py, cs.qx * z / sq)


def noncanonical_t_rhs(cs: CanonicalState, r: float) -> tuple[float, float, float, float]:
    """The canonical field scaled by 1/r.

    With the factor in place the equations lose the canonical pairing: the
    response to the same energy gradient varies from point to point.  Note
    that the honest physical-time velocity of the chart coordinates is
    r * hamilton_rhs (the clocks satisfy dtau/dt = r); see chart_velocity.
    """
    if r == 0.0:
        raise ConformalFactorVanished("r = 0 in the scaled chart equations")
    qx_dot, px_dot, qy_dot, py_dot = hamilton_rhs(cs)
    return (qx_dot / r, px_dot / r, qy_dot / r, py_dot / r)


def chart_velocity(state: ExtendedState, spatial: "Point3", sdot: float
                   ) -> tuple[float, float, float, float]:
    """d/dt of (qx, px, qy, py) by the chain rule through the chart."""
    c, sn = math.cos(state.p.z), math.sin(state.p.z)
    amp = state.s + 0.5
    return (
        sdot * (c + sn) + amp * (c - sn) * spatial.z,
        -spatial.x,
        sdot * (c - sn) + amp * (-c - sn) * spatial.z,
        -spatial.y,
    )


@dataclass(slots=True)
class CanonicalSample:
    tau: float
    state: CanonicalState
    energy: float


@dataclass(slots=True)
class CanonicalTrajectory:
    dt: float
    samples: list[CanonicalSample] = field(default_factory=list)

    def final(self) -> CanonicalSample:
        return self.samples[-1]

    def write_csv(self, path) -> None:
        with open(path, "w") as out:
            out.write("tau,qx,px,qy,py,H\n")
            for s in self.samples:
                row = (s.tau, s.state.qx, s.state.px, s.state.qy, s.state.py, s.energy)
                out.write(",".join(f"{v:.17g}" for v in row) + "\n")


def integrate_hamilton(init: CanonicalState, dt: float, tau_end: float,
                       record_every: int = 1) -> CanonicalTrajectory:
    """Fixed-step RK4 on the canonical equations."""

    def rhs(y: tuple) -> tuple:
        return hamilton_rhs(CanonicalState(*y))

    traj = CanonicalTrajectory(dt)
    y = init.as_tuple()
    tau = 0.0
    traj.samples.append(CanonicalSample(tau, init, hamiltonian_canonical(init)))
    steps = fixed_steps(tau_end, dt)
    for k, h in enumerate(steps):
        y = rk4_step(rhs, y, h)
        tau += h
        if (k + 1) % record_every == 0 or k == len(steps) - 1:
            cs = CanonicalState(*y)
            traj.samples.append(CanonicalSample(tau, cs, hamiltonian_canonical(cs)))
    return traj


def flow_equivalence_gap(sys: consys.ConservativeSystem, ext: ExtensionSpec,
                         init: ExtendedState, tau_end: float, dt: float) -> float:
    """Sup-norm gap between the mapped extended flow and the canonical flow.

    The extended system is integrated in proper time and pushed through the
    chart sample by sample; the canonical equations are integrated from the
    mapped initial state on the same step sequence.  Both runs are fourth
    order, so the gap measures how exactly the chart transforms one flow
    into the other.
    """
    cfg = IntegratorConfig(method="rk4", clock="proper", dt=dt, tau_end=tau_end,
                           record_every=1)
    rec = integrate(sys, ext, init, cfg)
    if rec.status != "completed":
        raise ConformalFactorVanished("conformal factor vanished during the equivalence run")
    mapped = [to_canonical(s.state) for s in rec.samples]  # BranchViolation if outside
    direct = integrate_hamilton(mapped[0], dt, tau_end, record_every=1)
    assert len(direct.samples) == len(mapped)
    gap = 0.0
    for m, d in zip(mapped, direct.samples):
        for a, b in zip(m.as_tuple(), d.state.as_tuple()):
            gap = max(gap, abs(a - b))
    return gap
