import math

import pytest

from poissonize.consys import ConservativeSystem, plasma_particle, rigid_body
from poissonize.exprlang import ExprScalarField, ExprVectorField
from poissonize.extension import (
    ConformalFactorVanished,
    ExtendedState,
    ExtensionSpec,
    conformal_factor,
    extended_velocity,
)
from poissonize.fieldcore import Point3
from poissonize.propertime import (
    IntegratorConfig,
    StepFailure,
    fixed_steps,
    integrate,
    jacobian_g,
    rk4_step,
    volume_preservation_check,
)


def plasma_setup():
    sys = plasma_particle()
    return sys, ExtensionSpec(sys.b_field)


def rigid_setup():
    sys = rigid_body(1.0, 2.0, 3.0)
    return sys, ExtensionSpec(sys.operator_vector, require_closed=False)


def expression_system(name, w, ham):
    return ConservativeSystem(name, ExprVectorField(w), ExprScalarField(ham))


# A system whose conformal factor r = z changes sign along the flow:
# w = e_x, H = y gives the constant velocity v = e_z, and D = (z, 0, 0)
# is solenoidal with w . D = z.
def sign_crossing_setup():
    sys = expression_system("crossing", ("1", "0", "0"), "y")
    ext = ExtensionSpec(ExprVectorField(("z", "0", "0")))
    return sys, ext


PLASMA_INIT = ExtendedState(Point3(1.0, 1.0, 0.5), 0.0)


# ---------------------------------------------------------------------------
# configuration and step plumbing


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler", t_end=1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(clock="wall", t_end=1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0.0, t_end=1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(record_every=0, t_end=1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(clock="physical")  # no t_end
    with pytest.raises(ValueError):
        IntegratorConfig(clock="proper")  # no tau_end
    with pytest.raises(ValueError):
        IntegratorConfig(t_end=-1.0)


def test_config_span_picks_the_active_clock():
    assert IntegratorConfig(t_end=3.0).span() == 3.0
    assert IntegratorConfig(clock="proper", tau_end=2.0).span() == 2.0


def test_fixed_steps_exact_division():
    steps = fixed_steps(1.0, 0.1)
    assert len(steps) == 10
    assert all(h == 0.1 for h in steps)


def test_fixed_steps_remainder():
    steps = fixed_steps(1.0, 0.3)
    assert len(steps) == 4
    assert steps[:3] == [0.3, 0.3, 0.3]
    assert math.isclose(steps[3], 0.1, rel_tol=0, abs_tol=1e-12)
    assert math.isclose(sum(steps), 1.0, rel_tol=0, abs_tol=1e-12)


def test_fixed_steps_cover_span():
    for span, dt in ((10.0, 1e-3), (math.pi, 0.05), (0.7, 0.7)):
        assert math.isclose(sum(fixed_steps(span, dt)), span, rel_tol=1e-12)


def test_rk4_step_exact_on_constant_rhs():
    y = rk4_step(lambda y: (2.0, -1.0), (0.0, 5.0), 0.25)
    assert y == (0.5, 4.75)


def test_rk4_step_exponential_accuracy():
    # y' = y over one step of h = 0.1: local error is O(h^5).
    (y,) = rk4_step(lambda y: (y[0],), (1.0,), 0.1)
    assert abs(y - math.exp(0.1)) < 1e-7


# ---------------------------------------------------------------------------
# integration in both clocks


def test_record_metadata_and_monotone_clocks():
    sys, ext = plasma_setup()
    cfg = IntegratorConfig(t_end=1.0, dt=1e-2, record_every=10)
    rec = integrate(sys, ext, PLASMA_INIT, cfg)
    assert rec.system == "plasma_particle"
    assert rec.clock == "physical"
    assert rec.method == "rk4"
    assert rec.status == "completed"
    # initial sample plus one every 10 steps
    assert len(rec.samples) == 11
    ts = [s.t for s in rec.samples]
    taus = [s.tau for s in rec.samples]
    assert all(b > a for a, b in zip(ts, ts[1:]))
    assert all(b > a for a, b in zip(taus, taus[1:]))
    assert math.isclose(rec.final().t, 1.0, rel_tol=0, abs_tol=1e-12)


def test_energy_and_constraint_stay_put():
    sys, ext = plasma_setup()
    cfg = IntegratorConfig(t_end=2.0, dt=1e-3, record_every=100)
    rec = integrate(sys, ext, PLASMA_INIT, cfg)
    h0 = rec.samples[0].energy
    assert max(abs(s.energy - h0) for s in rec.samples) < 1e-10
    assert max(abs(s.constraint_residual) for s in rec.samples) < 1e-10


def test_rk4_halving_dt_cuts_endpoint_error_sixteen_fold():
    sys, ext = plasma_setup()

    def endpoint(dt):
        cfg = IntegratorConfig(t_end=1.0, dt=dt, record_every=10 ** 9)
        return integrate(sys, ext, PLASMA_INIT, cfg).final().state.as_tuple()

    ref = endpoint(0.02 / 8.0)
    coarse = max(abs(a - b) for a, b in zip(endpoint(0.02), ref))
    fine = max(abs(a - b) for a, b in zip(endpoint(0.01), ref))
    ratio = coarse / fine
    assert 12.0 < ratio < 20.0


def test_proper_clock_round_trips_the_physical_clock():
    sys, ext = plasma_setup()
    fwd = integrate(sys, ext, PLASMA_INIT, IntegratorConfig(t_end=2.0, dt=1e-3))
    tau_end = fwd.final().tau
    back = integrate(sys, ext, PLASMA_INIT,
                     IntegratorConfig(clock="proper", tau_end=tau_end, dt=1e-3))
    assert abs(back.final().t - 2.0) < 1e-6
    end_fwd = fwd.final().state.as_tuple()
    end_back = back.final().state.as_tuple()
    assert max(abs(a - b) for a, b in zip(end_fwd, end_back)) < 1e-6


def test_stationary_point_makes_the_clocks_linear():
    # At a critical point of H nothing moves and r is constant, so the
    # two clocks are proportional: t = tau / r exactly.
    sys, ext = plasma_setup()
    frozen = ExtendedState(Point3(0.0, 0.0, 0.0), 0.5)  # r = 1 + 2s = 2
    rec = integrate(sys, ext, frozen, IntegratorConfig(clock="proper", tau_end=3.0, dt=0.01))
    assert rec.final().state.as_tuple() == frozen.as_tuple()
    assert abs(rec.final().t - 1.5) < 1e-12
    for s in rec.samples:
        assert abs(s.t - s.tau / 2.0) < 1e-12

    fwd = integrate(sys, ext, frozen, IntegratorConfig(t_end=3.0, dt=0.01))
    assert abs(fwd.final().tau - 6.0) < 1e-12


def test_physical_spatial_flow_ignores_the_extension():
    # In the physical clock the spatial components integrate w x grad(H)
    # alone, so a plain 3D run must reproduce them.
    sys, ext = rigid_setup()
    init = ExtendedState(Point3(1.0, 1.0, 1.0), 0.0)
    cfg = IntegratorConfig(t_end=5.0, dt=1e-3, record_every=500)
    rec = integrate(sys, ext, init, cfg)

    def rhs3(y):
        v = sys.operator_vector.eval(Point3(*y)).cross(
            sys.hamiltonian.gradient(Point3(*y)))
        return (v.x, v.y, v.z)

    y = (1.0, 1.0, 1.0)
    positions = [y]
    for _ in range(5000):
        y = rk4_step(rhs3, y, 1e-3)
        positions.append(y)
    for sample, k in zip(rec.samples, range(0, 5001, 500)):
        p = sample.state.p
        gap = max(abs(a - b) for a, b in zip((p.x, p.y, p.z), positions[k]))
        assert gap < 1e-10


def test_integration_raises_when_r_vanishes_at_the_start():
    sys, ext = sign_crossing_setup()
    dead = ExtendedState(Point3(0.0, 0.0, 0.0), 0.0)  # r = z = 0
    with pytest.raises(ConformalFactorVanished):
        integrate(sys, ext, dead, IntegratorConfig(t_end=1.0, dt=0.01))


def test_integration_truncates_when_r_crosses_zero():
    # r = z starts at -0.5 and crosses zero at t = 0.5.
    sys, ext = sign_crossing_setup()
    init = ExtendedState(Point3(0.0, 0.0, -0.5), 0.0)
    rec = integrate(sys, ext, init, IntegratorConfig(t_end=1.0, dt=0.01))
    assert rec.status == "conformal_factor_vanished"
    assert rec.samples  # partial output survives
    assert rec.final().t <= 0.5 + 1e-9
    assert all(s.r < 0.0 for s in rec.samples)


def test_truncation_also_guards_the_adaptive_method():
    sys, ext = sign_crossing_setup()
    init = ExtendedState(Point3(0.0, 0.0, -0.5), 0.0)
    cfg = IntegratorConfig(method="rkf45", t_end=1.0, dt=0.01, dt_max=0.05)
    rec = integrate(sys, ext, init, cfg)
    assert rec.status == "conformal_factor_vanished"
    assert rec.final().t <= 0.5 + 1e-9


def test_rkf45_matches_rk4_endpoint():
    sys, ext = plasma_setup()
    fine = integrate(sys, ext, PLASMA_INIT,
                     IntegratorConfig(t_end=2.0, dt=1e-4, record_every=10 ** 9))
    adaptive = integrate(sys, ext, PLASMA_INIT,
                         IntegratorConfig(method="rkf45", t_end=2.0, dt=1e-2,
                                          tol_rel=1e-10, tol_abs=1e-12))
    a = fine.final().state.as_tuple()
    b = adaptive.final().state.as_tuple()
    assert abs(adaptive.final().t - 2.0) < 1e-9
    assert max(abs(x - y) for x, y in zip(a, b)) < 1e-6


def test_rkf45_gives_up_below_dt_min():
    sys, ext = plasma_setup()
    cfg = IntegratorConfig(method="rkf45", t_end=1.0, dt=0.1,
                           tol_rel=1e-16, tol_abs=1e-16, dt_min=0.09)
    with pytest.raises(StepFailure):
        integrate(sys, ext, PLASMA_INIT, cfg)


# ---------------------------------------------------------------------------
# CSV output


def test_csv_header_and_shape(tmp_path):
    sys, ext = plasma_setup()
    rec = integrate(sys, ext, PLASMA_INIT, IntegratorConfig(t_end=0.1, dt=0.01))
    path = tmp_path / "traj.csv"
    rec.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "tau,t,x,y,z,s,H,r,h,constraint_residual"
    assert len(lines) == 1 + len(rec.samples)
    assert all(len(line.split(",")) == 10 for line in lines[1:])
    first = [float(v) for v in lines[1].split(",")]
    assert first[2:6] == [1.0, 1.0, 0.5, 0.0]


def test_csv_output_is_deterministic(tmp_path):
    sys, ext = plasma_setup()
    cfg = IntegratorConfig(t_end=0.5, dt=1e-3, record_every=10)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    integrate(sys, ext, PLASMA_INIT, cfg).write_csv(a)
    integrate(sys, ext, PLASMA_INIT, cfg).write_csv(b)
    assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------------------
# reparametrization weight


def test_jacobian_g_values():
    sys, ext = plasma_setup()
    assert jacobian_g(sys, ext, ExtendedState(Point3(1.0, 0.0, 0.0), 0.0)) == 1.0
    g = jacobian_g(sys, ext, ExtendedState(Point3(1.0, 0.0, 0.0), 0.25))
    assert abs(g - 1.0 / 1.5) < 1e-15

    rsys, rext = rigid_setup()
    g = jacobian_g(rsys, rext, ExtendedState(Point3(1.0, 1.0, 1.0), 0.0))
    assert abs(g - 1.0 / 3.0) < 1e-15  # 1 / |w|^2


def test_g_is_the_reciprocal_of_r_along_a_trajectory():
    sys, ext = plasma_setup()
    rec = integrate(sys, ext, PLASMA_INIT, IntegratorConfig(t_end=1.0, dt=1e-2))
    for sample in rec.samples:
        g = jacobian_g(sys, ext, sample.state)
        assert abs(g * sample.r - 1.0) < 1e-12


# ---------------------------------------------------------------------------
# volume transport


def simplex_cloud(base, edge):
    states = [ExtendedState(Point3(*base[:3]), base[3])]
    for k in range(4):
        shifted = list(base)
        shifted[k] += edge
        states.append(ExtendedState(Point3(*shifted[:3]), shifted[3]))
    return states


def test_small_simplex_volume_is_preserved():
    sys, ext = plasma_setup()
    cloud = simplex_cloud((1.0, 1.0, 0.5, 0.0), 1e-5)
    cfg = IntegratorConfig(t_end=1.0, dt=1e-3, record_every=10 ** 9)
    deviation = volume_preservation_check(sys, ext, cloud, cfg)
    assert deviation < 1e-4


def test_translation_flow_preserves_volume_exactly():
    # w = e_x with H = x stalls the spatial motion entirely while s drifts
    # at unit rate, a rigid translation of the simplex.
    sys = expression_system("stalled", ("1", "0", "0"), "x")
    ext = ExtensionSpec(ExprVectorField(("1", "0", "0")))
    st = ExtendedState(Point3(0.2, 0.1, 0.3), 0.0)
    v, sdot = extended_velocity(sys, ext, st)
    assert (v.x, v.y, v.z) == (0.0, 0.0, 0.0)
    assert sdot == -1.0
    cloud = simplex_cloud((0.2, 0.1, 0.3, 0.0), 0.5)
    cfg = IntegratorConfig(t_end=0.4, dt=0.01)

    deviation = volume_preservation_check(sys, ext, cloud, cfg)
    assert deviation == 0.0


def test_volume_check_input_validation():
    sys, ext = plasma_setup()
    cfg = IntegratorConfig(t_end=1.0, dt=1e-2)
    with pytest.raises(ValueError):
        volume_preservation_check(sys, ext, simplex_cloud((1, 1, 0.5, 0), 1e-5)[:4], cfg)
    flat = [ExtendedState(Point3(1.0, 1.0, 0.5), 0.0)] * 5
    with pytest.raises(ValueError):
        volume_preservation_check(sys, ext, flat, cfg)
    proper = IntegratorConfig(clock="proper", tau_end=1.0, dt=1e-2)
    with pytest.raises(ValueError):
        volume_preservation_check(sys, ext, simplex_cloud((1, 1, 0.5, 0), 1e-5), proper)


def test_spatial_volume_alone_contracts():
    # Divergence freedom lives in four dimensions: the projected spatial
    # parallelepiped of the plasma flow shrinks by an O(1) factor by t = 10.
    sys, ext = plasma_setup()
    base = (1.0, 1.0, 0.5)
    edge = 1e-4

    def advance(p0):
        st = ExtendedState(Point3(*p0), 0.0)
        cfg = IntegratorConfig(t_end=10.0, dt=1e-3, record_every=10 ** 9)
        q = integrate(sys, ext, st, cfg).final().state.p
        return (q.x, q.y, q.z)

    corners = [advance(base)]
    for k in range(3):
        shifted = list(base)
        shifted[k] += edge
        corners.append(advance(tuple(shifted)))
    b = corners[0]
    edges = [[c[i] - b[i] for i in range(3)] for c in corners[1:]]
    det = (edges[0][0] * (edges[1][1] * edges[2][2] - edges[1][2] * edges[2][1])
           - edges[0][1] * (edges[1][0] * edges[2][2] - edges[1][2] * edges[2][0])
           + edges[0][2] * (edges[1][0] * edges[2][1] - edges[1][1] * edges[2][0]))
    ratio = abs(det) / edge ** 3
    assert ratio < 0.9


def test_conformal_factor_follows_s_along_the_flow():
    # For the plasma extension r = 1 + 2s pointwise, so recorded r values
    # must track the recorded s values with no lag.
    sys, ext = plasma_setup()
    rec = integrate(sys, ext, PLASMA_INIT, IntegratorConfig(t_end=2.0, dt=1e-3, record_every=50))
    for sample in rec.samples:
        assert abs(sample.r - (1.0 + 2.0 * sample.state.s)) < 1e-12
        assert abs(sample.r - conformal_factor(sys, ext, sample.state).value) < 1e-15
