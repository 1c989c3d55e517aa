"""Differential, nonlocal, linearized, velocity and nonlinear operators.

Radial derivatives are taken in u = log z, so ``d_z`` (= z d/dz) is a plain
derivative on a uniform mesh. All stencils are five-point (fourth order),
one-sided near the ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Field, Grid, Parameters, RadialFunction, integrate_theta
from .profiles import gamma_profile, k_profile


@dataclass(frozen=True)
class OperatorReport:
    name: str
    residual_norm: float
    convergence_order: float = float("nan")

    def __post_init__(self):
        if not self.residual_norm >= 0.0:
            raise ValueError("residual_norm must be non-negative")


def convergence_order(err_coarse: float, err_fine: float, ratio: float = 2.0) -> float:
    if err_fine <= 0.0:
        return float("inf")
    return math.log(err_coarse / err_fine) / math.log(ratio)


def _check_grid(grid: Grid):
    if grid.nz < 5 or grid.ntheta < 5:
        raise ValueError("derivatives need at least 5 nodes per direction")


def _like(f, values):
    return type(f)(values, f.grid)


def d_z(f):
    """z * df/dz for a Field or RadialFunction."""
    _check_grid(f.grid)
    return _like(f, f.grid.Du @ f.values)


def d_zz(f):
    """(z d/dz)^2 f."""
    _check_grid(f.grid)
    return _like(f, f.grid.Duu @ f.values)


def partial_theta(f: Field) -> Field:
    _check_grid(f.grid)
    return Field(f.values @ f.grid.Dt.T, f.grid)


def partial_theta2(f: Field) -> Field:
    _check_grid(f.grid)
    return Field(f.values @ f.grid.Dtt.T, f.grid)


def d_theta(f: Field) -> Field:
    """sin(2 theta) * df/dtheta."""
    return partial_theta(f) * f.grid.sin2t


def upwind_correction(f: Field, speed: np.ndarray, axis: str) -> Field:
    """speed * (D_centred - D_upwind) f for a transport term -speed * D f.

    Adding this to a right-hand side that contains -speed * D f with the
    centred derivative swaps in the upwind-biased one (left-biased stencil
    where speed > 0). D is z d/dz for axis="z" and d/dtheta for axis="theta".
    """
    _check_grid(f.grid)
    g = f.grid
    speed = np.broadcast_to(speed, g.shape)
    if axis == "z":
        left, right = g.upwind_u[0] @ f.values, g.upwind_u[1] @ f.values
        centred = g.Du @ f.values
    elif axis == "theta":
        left, right = f.values @ g.upwind_t[0].T, f.values @ g.upwind_t[1].T
        centred = f.values @ g.Dt.T
    else:
        raise ValueError("axis must be 'z' or 'theta'")
    return Field(speed * (centred - np.where(speed > 0.0, left, right)), g)


def k_moment(f: Field) -> RadialFunction:
    """int_0^{pi/2} f(z, t) K(t) dt."""
    return integrate_theta(f * k_profile(f.grid.theta))


def _tail(grid: Grid, m: np.ndarray, terms: int = 3) -> float:
    # closes int_{z_max}^inf m(z)/z dz assuming m = sum_j a_j z^-j beyond z_max
    zs = grid.z[-terms:]
    ms = m[-terms:]
    if not np.any(ms):
        return 0.0
    powers = np.arange(1, terms + 1)
    x = grid.z[-1] / zs
    coef = np.linalg.solve(x[:, None] ** powers[None, :], ms)
    return float(np.sum(coef / powers))


def radial_tail_integral(m: RadialFunction, tail: str = "power") -> RadialFunction:
    """int_z^inf m(z')/z' dz' = int_{log z}^inf m du, fourth order.

    Cumulative trapezoid plus the Euler-Maclaurin end correction. ``tail``
    selects how the part beyond z_max is closed: "zero" drops it, "power"
    extrapolates m with a three-term expansion in 1/z.
    """
    g = m.grid
    v = m.values
    h = g.h
    seg = 0.5 * h * (v[1:] + v[:-1])
    cum = np.zeros_like(v)
    cum[:-1] = np.cumsum(seg[::-1])[::-1]
    dv = g.Du @ v
    cum -= h * h / 12.0 * (dv[-1] - dv)
    if tail == "power":
        cum += _tail(g, v)
    elif tail != "zero":
        raise ValueError(f"unknown tail closure {tail!r}")
    return RadialFunction(cum, g)


def l_k(f: Field, tail: str = "power") -> RadialFunction:
    """L_K(f)(z) = int_z^inf int f(z', t) K(t) / z' dt dz'."""
    return radial_tail_integral(k_moment(f), tail)


def l_k_at_zero(f: Field, tail: str = "power") -> float:
    """L_K(f)(0), approximated by the value at z_min."""
    return float(l_k(f, tail).values[0])


def op_L(f):
    """f + z f_z - 2 f/(1+z), on a Field or a RadialFunction."""
    g = f.grid
    zf = g.z[:, None] if isinstance(f, Field) else g.z
    return _like(f, f.values + (g.Du @ f.values) - 2.0 * f.values / (1.0 + zf))


def op_L_Fstar(f: Field, params: Parameters) -> Field:
    g = f.grid
    coef = (2.0 * g.z / (params.c * (1.0 + g.z) ** 2))[:, None] * gamma_profile(g.theta, params)
    return op_L(f) - Field(coef, g) * l_k(f)


def projector_P(f: Field, params: Parameters) -> Field:
    """f - (Gamma/c) 2z^2/(1+z)^2 L_K(f)(0)."""
    g = f.grid
    shape = (2.0 * g.z**2 / (1.0 + g.z) ** 2)[:, None] * (gamma_profile(g.theta, params) / params.c)
    return f - shape * l_k_at_zero(f)


def project_lk_zero(f: Field, params: Parameters) -> Field:
    """Subtract a multiple of (Gamma/c) 4z^4/(1+z)^5 so L_K(.)(z_min) = 0.

    The shape has L_K(shape)(0) = 1, vanishes like z^4 at 0 (so w * shape
    stays small at z_min) and decays like 1/z. The coefficient uses the
    discrete L_K of the shape, so the result is annihilated to round-off on
    this grid.
    """
    g = f.grid
    shape = Field((4.0 * g.z**4 / (1.0 + g.z) ** 5)[:, None] * (gamma_profile(g.theta, params) / params.c), g)
    return f - shape * (l_k_at_zero(f) / l_k_at_zero(shape))


def op_L_Fstar_T(f: Field, params: Parameters) -> Field:
    g = f.grid
    transport = partial_theta(f) * (3.0 / (1.0 + g.z))[:, None] * g.sin2t
    return op_L_Fstar(f, params) - projector_P(transport, params)


def op_S_delta(f, params: Parameters):
    """f + (1 + delta) z f_z."""
    return f + d_z(f) * (1.0 + params.delta)


def velocity_functionals(psi: Field, params: Parameters) -> tuple[Field, Field, Field]:
    """U = -3 psi - a z psi_z, V = psi_t - tan t psi,
    R = (2 sin t psi + a sin t z psi_z + cos t psi_t) / cos t."""
    g = psi.grid
    a = params.alpha
    zp = d_z(psi)
    pt = partial_theta(psi)
    tan = np.tan(g.theta)
    U = psi * -3.0 - zp * a
    V = pt - psi * tan
    R = (psi * 2.0 + zp * a) * tan + pt
    return U, V, R


def op_M_G(G: Field, phi_F: Field, params: Parameters) -> Field:
    U, V, _ = velocity_functionals(phi_F, params)
    return op_S_delta(G, params) + U * partial_theta(G) + V * d_z(G) * params.alpha


def op_M_G_reduced(G: Field, params: Parameters) -> Field:
    """L(G) - 3 sin2t/(1+z) G_t + 2G/(1+z): the operator with its leading velocities."""
    g = G.grid
    inv = (1.0 / (1.0 + g.z))[:, None]
    return op_L(G) - partial_theta(G) * (3.0 * inv * g.sin2t) + G * (2.0 * inv)


def op_M(eps: Field, phi_F: Field, phi_eps: Field, F: Field, params: Parameters) -> Field:
    a = params.alpha
    UF, VF, RF = velocity_functionals(phi_F, params)
    Ue, Ve, Re = velocity_functionals(phi_eps, params)
    return (
        op_S_delta(eps, params)
        + UF * partial_theta(eps)
        + VF * d_z(eps) * a
        + Ue * partial_theta(F)
        + Ve * d_z(F) * a
        - RF * eps
        - Re * F
    )


def nonlinear_terms(eps: Field, G: Field, Pi: Field, phi_eps: Field, params: Parameters):
    """(N1(eps), N2(Pi, G), N3(eps, G))."""
    a = params.alpha
    Ue, Ve, Re = velocity_functionals(phi_eps, params)
    Gt = partial_theta(G)
    zG = d_z(G)
    N1 = -(Ue * eps) - Ve * d_z(eps) * a + Re * eps
    N2 = d_z(Pi) * Gt * a - zG * partial_theta(Pi) * a + Gt * Pi * 2.0
    N3 = -(Ue * Gt) - Ve * zG * a
    return N1, N2, N3


def error_term(F: Field, lambda_rate: float, mu_rate: float, params: Parameters) -> Field:
    """E = -(mu_s/mu) z F_z + (1 + lambda_s/lambda) S_delta(F)."""
    return d_z(F) * (-mu_rate) + op_S_delta(F, params) * (1.0 + lambda_rate)
