import math

import numpy as np
import pytest

from poissonize.consys import nonintegrable_exb, plasma_particle, rigid_body, velocity
from poissonize.exprlang import ExprVectorField
from poissonize.extension import (
    ConformalFactorVanished,
    ExtendedState,
    ExtensionSpec,
    NotClosedError,
    abc_coefficients,
    conformal_factor,
    default_extension,
    extended_divergence,
    extended_operator,
    extended_velocity,
    jacobi_defect_4d,
    s_of_vparallel,
    state_from_tuple,
    vparallel_of_s,
)
from poissonize.fieldcore import Box, Point3, constant_vector_field, Vec3, halton_points

HALF_PI = math.pi / 2.0
EXT_BOX = Box(Point3(-1, -1, -1), Point3(1, 1, 1))


def plasma_setup():
    sys = plasma_particle()
    return sys, ExtensionSpec(sys.b_field)


def rigid_setup():
    sys = rigid_body(1.0, 2.0, 3.0)
    return sys, ExtensionSpec(sys.operator_vector, require_closed=False)


def extended_states(count):
    pts = halton_points(count, EXT_BOX)
    return [ExtendedState(Point3(p.x, p.y, p.z), 0.5 * (k % 3)) for k, p in enumerate(pts)]


# ---------------------------------------------------------------------------
# Coefficients and the assembled operator.

def test_abc_plasma_worked_point():
    sys, ext = plasma_setup()
    abc = abc_coefficients(sys, ext, ExtendedState(Point3(1.0, 0.0, HALF_PI), 0.0))
    assert abc.x == pytest.approx(0.5, abs=1e-15)
    assert abc.y == pytest.approx(-0.5, abs=1e-15)
    assert abc.z == 0.0


def test_abc_at_zero_s_is_d():
    sys, ext = rigid_setup()
    st = ExtendedState(Point3(0.7, -0.2, 1.4), 0.0)
    assert abc_coefficients(sys, ext, st).as_tuple() == st.p.as_tuple()


def test_abc_rigid_independent_of_s():
    # curl of the radial field is zero, so the s-term never contributes
    sys, ext = rigid_setup()
    p = Point3(1.0, 2.0, 3.0)
    for s in (0.0, 0.5, -0.3, 4.0):
        assert abc_coefficients(sys, ext, ExtendedState(p, s)).as_tuple() == (1.0, 2.0, 3.0)


def test_extended_operator_layout_and_antisymmetry():
    sys, ext = plasma_setup()
    st = ExtendedState(Point3(0.4, -0.9, 0.3), 0.7)
    mat = extended_operator(sys, ext, st)
    w = sys.operator_vector.eval(st.p)
    abc = abc_coefficients(sys, ext, st)
    assert np.array_equal(mat, -mat.T)
    assert mat[0, 1] == -w.z and mat[0, 2] == w.y and mat[1, 2] == -w.x
    assert mat[0, 3] == abc.x and mat[1, 3] == abc.y and mat[2, 3] == abc.z


def test_extended_velocity_is_operator_contraction():
    # X must equal the matrix product of the operator with (grad H, 0).
    for sys, ext in (plasma_setup(), rigid_setup()):
        for st in extended_states(20):
            mat = extended_operator(sys, ext, st)
            g = sys.hamiltonian.gradient(st.p)
            contracted = mat @ np.array([g.x, g.y, g.z, 0.0])
            spatial, sdot = extended_velocity(sys, ext, st)
            assert abs(contracted[0] - spatial.x) < 1e-12
            assert abs(contracted[1] - spatial.y) < 1e-12
            assert abs(contracted[2] - spatial.z) < 1e-12
            assert abs(contracted[3] - sdot) < 1e-12


def test_spatial_part_unchanged_by_extension():
    for sys, ext in (plasma_setup(), rigid_setup()):
        for st in extended_states(20):
            spatial, _ = extended_velocity(sys, ext, st)
            assert spatial.as_tuple() == velocity(sys, st.p).as_tuple()


def test_sdot_plasma_worked_point():
    sys, ext = plasma_setup()
    _, sdot = extended_velocity(sys, ext, ExtendedState(Point3(1.0, 0.0, HALF_PI), 0.0))
    assert sdot == pytest.approx(-0.5, abs=1e-15)


def test_sdot_rigid_worked_point():
    sys, ext = rigid_setup()
    for s in (0.0, 1.0, -0.4):
        _, sdot = extended_velocity(sys, ext, ExtendedState(Point3(1.0, 1.0, 1.0), s))
        assert sdot == pytest.approx(-11.0 / 6.0, abs=1e-15)


def test_extended_velocity_zero_at_critical_point():
    sys, ext = plasma_setup()
    spatial, sdot = extended_velocity(sys, ext, ExtendedState(Point3(0.0, 0.0, 0.0), 0.3))
    assert spatial.as_tuple() == (0.0, 0.0, 0.0)
    assert sdot == 0.0


# ---------------------------------------------------------------------------
# Conformal factor.

def test_conformal_plasma_linear_in_s():
    sys, ext = plasma_setup()
    for st in extended_states(30):
        r = conformal_factor(sys, ext, st)
        assert r.value == pytest.approx(1.0 + 2.0 * st.s, abs=1e-12)
        assert r.magnitude == abs(r.value)


def test_conformal_d_equals_w_at_zero_s():
    sys = plasma_particle()
    ext = ExtensionSpec(sys.operator_vector, require_closed=False)
    st = ExtendedState(Point3(0.3, 0.1, -1.2), 0.0)
    assert conformal_factor(sys, ext, st).value == pytest.approx(2.0, abs=1e-14)


def test_conformal_drift_worked_point():
    sys = nonintegrable_exb()
    ext = ExtensionSpec(sys.b_field)
    st = ExtendedState(Point3(0.0, HALF_PI, 0.4), 1.0)
    expected = 1.0 + 1.0 / (1.0 + (math.pi / 4.0) ** 2) ** 2
    assert conformal_factor(sys, ext, st).value == pytest.approx(expected, rel=1e-13)


def test_conformal_linearity_in_s_generic():
    sys = nonintegrable_exb()
    ext = ExtensionSpec(sys.b_field)
    from poissonize.fieldcore import helicity_density
    for p in halton_points(20, EXT_BOX):
        h = helicity_density(sys.operator_vector, p)
        r0 = conformal_factor(sys, ext, ExtendedState(p, 0.0)).value
        for s in (0.25, 1.5):
            rs = conformal_factor(sys, ext, ExtendedState(p, s)).value
            assert rs - r0 == pytest.approx(s * h, abs=1e-13)


def test_conformal_vanished_below_floor():
    sys, ext = plasma_setup()
    with pytest.raises(ConformalFactorVanished):
        conformal_factor(sys, ext, ExtendedState(Point3(1.0, 1.0, 0.0), -0.5))


def test_signed_value_kept_for_negative_r():
    sys, ext = plasma_setup()
    r = conformal_factor(sys, ext, ExtendedState(Point3(1.0, 1.0, 0.0), -0.8))
    assert r.value == pytest.approx(-0.6, abs=1e-14)
    assert r.magnitude == pytest.approx(0.6, abs=1e-14)


# ---------------------------------------------------------------------------
# Closedness of D.

def test_closed_d_accepted_and_probed():
    sys = plasma_particle()
    ext = ExtensionSpec(sys.b_field)
    assert ext.closed
    assert ext.max_div_residual < 1e-8


def test_open_d_rejected_unless_waived():
    sys = rigid_body(1.0, 2.0, 3.0)
    with pytest.raises(NotClosedError):
        ExtensionSpec(sys.operator_vector)
    ext = ExtensionSpec(sys.operator_vector, require_closed=False)
    assert not ext.closed
    assert ext.max_div_residual == pytest.approx(3.0, abs=1e-6)


def test_default_extension_prefers_b():
    sys = plasma_particle()
    ext = default_extension(sys)
    assert ext.d_field is sys.b_field


def test_default_extension_falls_back_to_w():
    sys = rigid_body(1.0, 2.0, 3.0)
    ext = default_extension(sys)
    assert ext.d_field is sys.operator_vector
    assert not ext.closed


def test_r_floor_must_be_positive():
    sys = plasma_particle()
    with pytest.raises(ValueError):
        ExtensionSpec(sys.b_field, r_floor=0.0)


# ---------------------------------------------------------------------------
# Divergence and Jacobi defect.

def test_extended_divergence_vanishes():
    setups = [plasma_setup(), rigid_setup()]
    drift = nonintegrable_exb()
    setups.append((drift, ExtensionSpec(drift.b_field)))
    for sys, ext in setups:
        for st in extended_states(30):
            assert abs(extended_divergence(sys, ext, st)) < 1e-6


def test_extended_divergence_constant_fields_exact():
    from poissonize.consys import ConservativeSystem
    from poissonize.fieldcore import FuncScalarField

    w = constant_vector_field(Vec3(1.0, 2.0, 0.5))
    ham = FuncScalarField(lambda p: p.x + 2.0 * p.y, lambda p: Vec3(1.0, 2.0, 0.0))
    sys = ConservativeSystem("const", w, ham)
    ext = ExtensionSpec(constant_vector_field(Vec3(0.3, 0.0, 1.0)))
    st = ExtendedState(Point3(0.2, 0.4, 0.6), 0.5)
    assert extended_divergence(sys, ext, st) == 0.0


def test_jacobi_defect_repaired_by_rescaling():
    sys, ext = plasma_setup()
    for st in extended_states(25):
        assert jacobi_defect_4d(sys, ext, st, rescale=True) < 1e-6


def test_jacobi_defect_present_without_rescaling():
    sys, ext = plasma_setup()
    worst = max(jacobi_defect_4d(sys, ext, st, rescale=False) for st in extended_states(10))
    assert worst >= 0.1


def test_jacobi_defect_constant_operator_exactly_zero():
    from poissonize.consys import ConservativeSystem
    from poissonize.fieldcore import FuncScalarField

    w = constant_vector_field(Vec3(1.0, 0.0, 0.0))
    ham = FuncScalarField(lambda p: p.y, lambda p: Vec3(0.0, 1.0, 0.0))
    sys = ConservativeSystem("const", w, ham)
    ext = ExtensionSpec(constant_vector_field(Vec3(0.0, 2.0, 0.0)))
    st = ExtendedState(Point3(0.0, 0.0, 0.0), 0.3)
    assert jacobi_defect_4d(sys, ext, st, rescale=False) == 0.0


# ---------------------------------------------------------------------------
# s as a rescaled parallel velocity.

def test_s_of_vparallel_anchors():
    assert s_of_vparallel(0.0, 1.0) == 0.0
    v_half = math.log(2.0) / math.sqrt(2.0)
    assert s_of_vparallel(v_half, 1.0) == pytest.approx(0.5, abs=1e-15)


def test_s_vparallel_round_trip():
    for m in (0.5, 1.0, 3.0):
        for s in (-0.49, -0.2, 0.0, 0.7, 10.0):
            assert vparallel_of_s(s_of_vparallel(vparallel_of_s(s, m), m), m) == pytest.approx(
                vparallel_of_s(s, m), rel=1e-12)
            assert s_of_vparallel(vparallel_of_s(s, m), m) == pytest.approx(s, abs=1e-12)


def test_s_map_domain_guards():
    with pytest.raises(ValueError):
        s_of_vparallel(1.0, 0.0)
    with pytest.raises(ValueError):
        vparallel_of_s(-0.5, 1.0)
    with pytest.raises(ValueError):
        vparallel_of_s(-0.7, 1.0)


def test_proper_rate_taylor_expansion():
    # dtau/dt = exp(sqrt(2) m v) agrees with 1 + sqrt(2) m v to second
    # order: the error tracks u^2/2 and drops a hundredfold per decade.
    sys, ext = plasma_setup()
    errors = {}
    for u in (1e-2, 1e-3):
        v = u / math.sqrt(2.0)
        s = s_of_vparallel(v, 1.0)
        r = conformal_factor(sys, ext, ExtendedState(Point3(0.2, -0.4, 0.9), s)).value
        errors[u] = abs(r - (1.0 + u))
        assert errors[u] <= u * u
    ratio = errors[1e-2] / errors[1e-3]
    assert 50.0 <= ratio <= 200.0


def test_state_round_trip_tuple():
    st = ExtendedState(Point3(1.0, -2.0, 3.0), 0.25)
    assert state_from_tuple(st.as_tuple()).as_tuple() == st.as_tuple()
