"""Drift operator and conformal factor in magnetic flux coordinates.

Coordinates are (ell, psi, zeta): arc length along the field, flux label,
toroidal angle.  A geometry supplies seven scalar functions of these
coordinates, each with exact first derivatives: the field-form
coefficients alpha, beta, i, the density rho, the local pitch q, the
radius R and gpp = |grad psi|^2.  The coefficients must close the field
2-form: d(alpha)/d(ell) - d(i)/d(zeta) + d(beta)/d(psi) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exprlang import ExprScalarField
from .extension import ConformalFactorVanished
from .fieldcore import Box, Point3, PoissonizeError, ScalarField3, halton_points


class InvalidGeometry(PoissonizeError):
    """A geometry failed the positivity or closedness probe."""


MAG_VARIABLES = ("ell", "psi", "zeta")

# Components of gradients returned by the geometry functions are read as
# (d/d ell, d/d psi, d/d zeta).
_L, _P, _Z = 0, 1, 2


@dataclass(slots=True)
class MagPoint:
    ell: float
    psi: float
    zeta: float
    s: float = 0.0

    def base(self) -> Point3:
        return Point3(self.ell, self.psi, self.zeta)


class MagGeometry:
    """Validated bundle of geometry functions.

    Positivity of rho and R and closedness of the (alpha, beta, i) triple
    are probed on a low-discrepancy sample of `probe` at construction.
    """

    def __init__(self, alpha: ScalarField3, beta: ScalarField3, i: ScalarField3,
                 rho: ScalarField3, q: ScalarField3, R: ScalarField3,
                 gpp: ScalarField3, probe: Box, probe_count: int = 200,
                 closed_tol: float = 1e-8) -> None:
        self.alpha = alpha
        self.beta = beta
        self.i = i
        self.rho = rho
        self.q = q
        self.R = R
        self.gpp = gpp
        worst = 0.0
        for p in halton_points(probe_count, probe):
            if rho.eval(p) <= 0.0:
                raise InvalidGeometry(f"rho <= 0 at {p}")
            if R.eval(p) <= 0.0:
                raise InvalidGeometry(f"R <= 0 at {p}")
            residual = (alpha.gradient(p).as_tuple()[_L]
                        - i.gradient(p).as_tuple()[_Z]
                        + beta.gradient(p).as_tuple()[_P])
            worst = max(worst, abs(residual))
        self.max_closure_residual = worst
        if worst > closed_tol:
            raise InvalidGeometry(
                f"closedness residual {worst:.3e} exceeds {closed_tol:.1e} on the probe set")


def geometry_from_expressions(sources: dict[str, str], probe: Box,
                              probe_count: int = 200) -> MagGeometry:
    """Build a geometry from expression strings in (ell, psi, zeta)."""
    required = ("alpha", "beta", "i", "rho", "q", "R", "gpp")
    missing = [k for k in required if k not in sources]
    if missing:
        raise InvalidGeometry(f"geometry is missing {', '.join(missing)}")
    fields = {k: ExprScalarField(sources[k], MAG_VARIABLES) for k in required}
    return MagGeometry(probe=probe, probe_count=probe_count, **fields)


class OperatorCoefficients(NamedTuple):
    """Bivector components of the drift operator in (ell, psi, zeta)."""

    zeta_psi: float
    ell_zeta: float
    ell_psi: float


def mag_operator(geo: MagGeometry, p: Point3) -> OperatorCoefficients:
    """rho [ (a - b q) dzeta^dpsi + (b gpp - a q) dell^dzeta + i R^2 dell^dpsi ]."""
    rho = geo.rho.eval(p)
    alpha = geo.alpha.eval(p)
    beta = geo.beta.eval(p)
    q = geo.q.eval(p)
    r2 = geo.R.eval(p) ** 2
    return OperatorCoefficients(
        rho * (alpha - beta * q),
        rho * (beta * geo.gpp.eval(p) - alpha * q),
        rho * geo.i.eval(p) * r2,
    )


def mag_operator_matrix(geo: MagGeometry, p: Point3) -> np.ndarray:
    """Antisymmetric matrix of the operator in coordinate order (ell, psi, zeta)."""
    c = mag_operator(geo, p)
    return np.array([
        [0.0, c.ell_psi, c.ell_zeta],
        [-c.ell_psi, 0.0, -c.zeta_psi],
        [-c.ell_zeta, c.zeta_psi, 0.0],
    ])


def mag_kernel_covector(geo: MagGeometry, p: Point3) -> tuple[float, float, float]:
    """Covector annihilated by the operator: the direction of no motion."""
    c = mag_operator(geo, p)
    return (c.zeta_psi, c.ell_zeta, -c.ell_psi)


def mag_conformal_factor(geo: MagGeometry, mp: MagPoint,
                         r_floor: float = 1e-10) -> float:
    """Conformal factor of the extended flux-coordinate operator.

    r = rho [ alpha A + beta G + i^2 R^2 + s * bracket ] with A = alpha - beta q,
    G = beta gpp - alpha q, K = i R^2 and

        bracket = A (-(K rho)_psi - (rho G)_zeta)
                + G ( (rho A)_zeta + (K rho)_ell)
                - K ( (rho G)_ell  - (rho A)_psi).
    """
    p = mp.base()
    alpha, d_alpha = geo.alpha.eval(p), geo.alpha.gradient(p)
    beta, d_beta = geo.beta.eval(p), geo.beta.gradient(p)
    i_val, d_i = geo.i.eval(p), geo.i.gradient(p)
    rho, d_rho = geo.rho.eval(p), geo.rho.gradient(p)
    q, d_q = geo.q.eval(p), geo.q.gradient(p)
    big_r, d_r = geo.R.eval(p), geo.R.gradient(p)
    gpp, d_gpp = geo.gpp.eval(p), geo.gpp.gradient(p)

    a_cf = alpha - beta * q
    g_cf = beta * gpp - alpha * q
    k_cf = i_val * big_r * big_r
    d_a = d_alpha - q * d_beta - beta * d_q
    d_g = gpp * d_beta + beta * d_gpp - q * d_alpha - alpha * d_q
    d_k = (big_r * big_r) * d_i + (2.0 * i_val * big_r) * d_r

    d_rho_a = a_cf * d_rho + rho * d_a
    d_rho_g = g_cf * d_rho + rho * d_g
    d_k_rho = k_cf * d_rho + rho * d_k

    bracket = (a_cf * (-d_k_rho.as_tuple()[_P] - d_rho_g.as_tuple()[_Z])
               + g_cf * (d_rho_a.as_tuple()[_Z] + d_k_rho.as_tuple()[_L])
               - k_cf * (d_rho_g.as_tuple()[_L] - d_rho_a.as_tuple()[_P]))
    value = rho * (alpha * a_cf + beta * g_cf + i_val * k_cf + mp.s * bracket)
    if abs(value) < r_floor:
        raise ConformalFactorVanished(f"|r| = {abs(value):.3e} below floor at {mp}")
    return value
