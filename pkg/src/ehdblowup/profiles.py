"""Closed-form profile functions: angular weights, radial weight, cutoff,
the approximate steady vorticity profile and the explicit potential profile."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Field, Grid, Parameters


def _check_open_angle(theta):
    t = np.asarray(theta, dtype=float)
    if np.any((t <= 0.0) | (t >= np.pi / 2)):
        raise ValueError("theta must lie strictly inside (0, pi/2)")
    return t


def gamma_profile(theta, params: Parameters):
    """(sin t cos^2 t)^(alpha/3)."""
    t = _check_open_angle(theta)
    return (np.sin(t) * np.cos(t) ** 2) ** (params.alpha / 3.0)


def k_profile(theta):
    """3 sin t cos^2 t, the kernel of the nonlocal operator."""
    t = np.asarray(theta, dtype=float)
    return 3.0 * np.sin(t) * np.cos(t) ** 2


def weight_w(z):
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0.0):
        raise ValueError("weight_w requires z > 0")
    return (1.0 + z) ** 2 / z**2


def f_star(z, theta, params: Parameters, scaled: bool = True):
    """Approximate steady profile (Gamma/c) * 4 z/(1+z)^2.

    The dynamics uses the alpha-scaled version (``scaled=True``); the
    unscaled one enters the nonlocal identities.
    """
    z = np.asarray(z, dtype=float)
    amp = params.alpha if scaled else 1.0
    return amp * gamma_profile(theta, params) / params.c * 4.0 * z / (1.0 + z) ** 2


def f_star_field(grid: Grid, params: Parameters, scaled: bool = True) -> Field:
    return grid.sample(lambda z, t: f_star(z, t, params, scaled))


def _smoothstep(t):
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def cutoff_chi(z, derivative: int = 0):
    """C^2 cutoff: 0 for z <= 1/2, 1 for z >= 1, quintic smoothstep between.

    ``derivative`` in {0, 1, 2} returns d^n chi / dz^n.
    """
    z = np.asarray(z, dtype=float)
    t = np.clip(2.0 * z - 1.0, 0.0, 1.0)
    if derivative == 0:
        return _smoothstep(t)
    if derivative == 1:
        return 2.0 * 30.0 * t**2 * (1.0 - t) ** 2
    if derivative == 2:
        return 4.0 * 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
    raise ValueError("derivative must be 0, 1 or 2")


def pi_angular(theta, derivative: int = 0):
    """cos^2 t - 2/3 and its first two derivatives."""
    t = np.asarray(theta, dtype=float)
    if derivative == 0:
        return np.cos(t) ** 2 - 2.0 / 3.0
    if derivative == 1:
        return -np.sin(2.0 * t)
    if derivative == 2:
        return -2.0 * np.cos(2.0 * t)
    raise ValueError("derivative must be 0, 1 or 2")


def pi_radial(z, params: Parameters, derivative: int = 0):
    """z^beta and its first two z-derivatives."""
    z = np.asarray(z, dtype=float)
    b = params.beta
    if derivative == 0:
        return z**b
    if derivative == 1:
        return b * z ** (b - 1.0)
    if derivative == 2:
        return b * (b - 1.0) * z ** (b - 2.0)
    raise ValueError("derivative must be 0, 1 or 2")


def sturm_liouville_residual(theta):
    """d_tt P2 - tan t d_t P2 + 6 P2 from analytic derivatives."""
    t = np.asarray(theta, dtype=float)
    return pi_angular(t, 2) - np.tan(t) * pi_angular(t, 1) + 6.0 * pi_angular(t)


def euler_ode_residual(z, params: Parameters):
    """alpha^2 z^2 P1'' + alpha(5+alpha) z P1' + P1, analytic."""
    a = params.alpha
    z = np.asarray(z, dtype=float)
    return (
        a**2 * z**2 * pi_radial(z, params, 2)
        + a * (5.0 + a) * z * pi_radial(z, params, 1)
        + pi_radial(z, params)
    )


@dataclass(frozen=True)
class SpecialPi:
    """amplitude * chi(z) * c1 * z^beta * (cos^2 t - 2/3)."""

    amplitude: float
    params: Parameters
    c1: float = 1.0

    def radial(self, z, derivative: int = 0):
        """d^n/dz^n of amplitude * c1 * chi(z) z^beta, safe where chi = 0."""
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        on = z > 0.5
        zz = z[on]
        chi = [cutoff_chi(zz, i) for i in range(3)]
        p = [pi_radial(zz, self.params, i) for i in range(3)]
        if derivative == 0:
            val = chi[0] * p[0]
        elif derivative == 1:
            val = chi[1] * p[0] + chi[0] * p[1]
        elif derivative == 2:
            val = chi[2] * p[0] + 2.0 * chi[1] * p[1] + chi[0] * p[2]
        else:
            raise ValueError("derivative must be 0, 1 or 2")
        out[on] = self.amplitude * self.c1 * val
        return out

    def potential_image(self, z, theta):
        """Exact P(Pi) with analytic derivatives, P the potential operator."""
        a = self.params.alpha
        z = np.asarray(z, dtype=float)
        r1, r2 = self.radial(z, 1), self.radial(z, 2)
        # the angular part annihilates cos^2 - 2/3
        return (a**2 * z**2 * r2 + a * (5.0 + a) * z * r1) * pi_angular(theta)


def special_pi(sp: SpecialPi, grid: Grid) -> Field:
    return grid.field(sp.radial(grid.z)[:, None] * pi_angular(grid.theta)[None, :])


def special_pi_image(sp: SpecialPi, grid: Grid) -> Field:
    """P applied analytically to the sampled special solution."""
    return grid.field(sp.potential_image(grid.z[:, None], grid.theta[None, :]))
