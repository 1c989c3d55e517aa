"""Parameters, the truncated (z, theta) grid, sampled fields and quadrature."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad

ETA = 0.99
SQRT21 = math.sqrt(21.0)
ALPHA_MAX = 0.2


@dataclass(frozen=True)
class Parameters:
    alpha: float
    delta: float
    k: int
    eta: float
    gamma: float
    c: float
    beta: float


def angular_constant(alpha: float) -> float:
    """c = int_0^{pi/2} Gamma(theta) K(theta) dtheta."""
    def integrand(t):
        sc2 = math.sin(t) * math.cos(t) ** 2
        return 3.0 * sc2 ** (1.0 + alpha / 3.0)

    val, _ = quad(integrand, 0.0, math.pi / 2, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def make_parameters(alpha: float = 0.05, delta: float | None = None, k: int = 0) -> Parameters:
    if not (0.0 < alpha <= ALPHA_MAX):
        raise ValueError(f"alpha must satisfy 0 < alpha <= {ALPHA_MAX}, got {alpha}")
    if delta is None:
        delta = alpha / 2
    if not (0.0 <= delta < 1.0):
        raise ValueError(f"delta must satisfy 0 <= delta < 1, got {delta}")
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a non-negative integer, got {k}")
    return Parameters(
        alpha=float(alpha),
        delta=float(delta),
        k=int(k),
        eta=ETA,
        gamma=1.0 + alpha / 10.0,
        c=angular_constant(alpha),
        beta=(SQRT21 - 5.0) / (2.0 * alpha),
    )


def fd_weights(x0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Fornberg finite-difference weights for derivatives 0..m at x0.

    Returns an array of shape (m + 1, len(x)).
    """
    n = len(x)
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for kk in range(mn, 0, -1):
                    c[kk, i] = c1 * (kk * c[kk - 1, i - 1] - c5 * c[kk, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for kk in range(mn, 0, -1):
                c[kk, j] = (c4 * c[kk, j] - kk * c[kk - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def diff_matrices(x: np.ndarray, width: int = 5, bias: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Dense first/second derivative matrices from `width`-point stencils.

    Stencils are centred where possible and shift to one-sided at the ends.
    ``bias`` moves each stencil that many nodes to the right (negative: left),
    which gives upwind-biased advection stencils.
    """
    n = len(x)
    d1 = np.zeros((n, n))
    d2 = np.zeros((n, n))
    half = width // 2
    for i in range(n):
        lo = min(max(i - half + bias, 0), n - width)
        idx = slice(lo, lo + width)
        w = fd_weights(x[i], x[idx], 2)
        d1[i, idx] = w[1]
        d2[i, idx] = w[2]
    return d1, d2


@dataclass(frozen=True, eq=False)
class Grid:
    """Tensor grid: log-spaced z nodes times Gauss-Legendre theta nodes on (0, pi/2)."""

    z: np.ndarray
    theta: np.ndarray
    z_weights: np.ndarray
    theta_weights: np.ndarray
    u: np.ndarray = field(repr=False)
    h: float = field(repr=False)

    @property
    def nz(self) -> int:
        return len(self.z)

    @property
    def ntheta(self) -> int:
        return len(self.theta)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nz, self.ntheta)

    @cached_property
    def Z(self) -> np.ndarray:
        return np.broadcast_to(self.z[:, None], self.shape)

    @cached_property
    def T(self) -> np.ndarray:
        return np.broadcast_to(self.theta[None, :], self.shape)

    @cached_property
    def sin2t(self) -> np.ndarray:
        return np.sin(2.0 * self.theta)

    @cached_property
    def _u_mats(self):
        # banded in u, so kept sparse: the radial dimension is the long one
        return tuple(sp.csr_matrix(m) for m in diff_matrices(self.u))

    @cached_property
    def _t_mats(self):
        return diff_matrices(self.theta)

    @cached_property
    def upwind_u(self) -> tuple[np.ndarray, np.ndarray]:
        """(left-biased, right-biased) first-derivative matrices in u."""
        return sp.csr_matrix(diff_matrices(self.u, bias=-1)[0]), sp.csr_matrix(diff_matrices(self.u, bias=1)[0])

    @cached_property
    def upwind_t(self) -> tuple[np.ndarray, np.ndarray]:
        """(left-biased, right-biased) first-derivative matrices in theta."""
        return diff_matrices(self.theta, bias=-1)[0], diff_matrices(self.theta, bias=1)[0]

    @property
    def Du(self) -> np.ndarray:
        return self._u_mats[0]

    @property
    def Duu(self) -> np.ndarray:
        return self._u_mats[1]

    @property
    def Dt(self) -> np.ndarray:
        return self._t_mats[0]

    @property
    def Dtt(self) -> np.ndarray:
        return self._t_mats[1]

    def same_as(self, other: "Grid") -> bool:
        if self is other:
            return True
        return (
            self.shape == other.shape
            and np.array_equal(self.z, other.z)
            and np.array_equal(self.theta, other.theta)
        )

    def field(self, values) -> "Field":
        return Field(np.broadcast_to(np.asarray(values, dtype=float), self.shape).copy(), self)

    def radial(self, values) -> "RadialFunction":
        return RadialFunction(np.broadcast_to(np.asarray(values, dtype=float), (self.nz,)).copy(), self)

    def sample(self, func) -> "Field":
        """Evaluate func(z, theta) on the mesh."""
        return self.field(func(self.Z, self.T))


def log_nodes(z_min: float, z_max: float, n: int) -> np.ndarray:
    """Geometric nodes with exact end points."""
    z = np.exp(np.linspace(math.log(z_min), math.log(z_max), n))
    z[0], z[-1] = z_min, z_max
    return z


def make_grid(z_min: float = 1e-2, z_max: float = 1e4, nz: int = 512, ntheta: int = 128) -> Grid:
    if not (0.0 < z_min < 1.0 < z_max):
        raise ValueError(f"need 0 < z_min < 1 < z_max, got z_min={z_min}, z_max={z_max}")
    if nz < 8 or ntheta < 8:
        raise ValueError(f"need nz, ntheta >= 8, got nz={nz}, ntheta={ntheta}")
    u = np.linspace(math.log(z_min), math.log(z_max), nz)
    z = log_nodes(z_min, z_max, nz)
    h = u[1] - u[0]
    tw = np.full(nz, h)
    tw[0] = tw[-1] = h / 2
    x, wx = np.polynomial.legendre.leggauss(ntheta)
    theta = (x + 1.0) * (math.pi / 4)
    theta_w = wx * (math.pi / 4)
    for a in (z, u, tw * z, theta, theta_w):
        a.setflags(write=False)
    return Grid(z=z, theta=theta, z_weights=tw * z, theta_weights=theta_w, u=u, h=h)


class _Sampled:
    __slots__ = ("values", "grid")
    __array_priority__ = 100

    def __init__(self, values, grid: Grid):
        self.values = np.asarray(values, dtype=float)
        self.grid = grid

    def _coerce(self, other):
        if isinstance(other, _Sampled):
            if not self.grid.same_as(other.grid):
                raise ValueError("cannot combine samples from different grids")
            if isinstance(other, RadialFunction) and isinstance(self, Field):
                return other.values[:, None]
            if isinstance(other, Field) and isinstance(self, RadialFunction):
                raise TypeError("RadialFunction op Field: put the Field on the left")
            return other.values
        return other

    def _new(self, values):
        return type(self)(values, self.grid)

    def __add__(self, other):
        return self._new(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._new(self.values - self._coerce(other))

    def __rsub__(self, other):
        return self._new(self._coerce(other) - self.values)

    def __mul__(self, other):
        return self._new(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._new(self.values / self._coerce(other))

    def __neg__(self):
        return self._new(-self.values)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.values.shape}, max|.|={self.max_abs():.3e})"


class Field(_Sampled):
    """Samples on the (z, theta) mesh, shape (nz, ntheta)."""

    __slots__ = ()

    def __init__(self, values, grid: Grid):
        super().__init__(values, grid)
        if self.values.shape != grid.shape:
            raise ValueError(f"Field shape {self.values.shape} does not match grid {grid.shape}")


class RadialFunction(_Sampled):
    """Samples on the z nodes, shape (nz,)."""

    __slots__ = ()

    def __init__(self, values, grid: Grid):
        super().__init__(values, grid)
        if self.values.shape != (grid.nz,):
            raise ValueError(f"RadialFunction shape {self.values.shape} does not match nz={grid.nz}")

    def at_zmin(self) -> float:
        return float(self.values[0])


def integrate_theta(f: Field) -> RadialFunction:
    return RadialFunction(f.values @ f.grid.theta_weights, f.grid)


def integrate_z(f: RadialFunction, z_lo: float | None = None, z_hi: float | None = None) -> float:
    """int f dz, trapezoid in log z.

    With limits, the piecewise-linear interpolant of z*f in log z is integrated
    over [z_lo, z_hi], which must lie inside the grid.
    """
    g = f.grid
    if z_lo is None and z_hi is None:
        return float(f.values @ g.z_weights)
    ulo = g.u[0] if z_lo is None else math.log(z_lo)
    uhi = g.u[-1] if z_hi is None else math.log(z_hi)
    if not (g.u[0] - 1e-12 <= ulo < uhi <= g.u[-1] + 1e-12):
        raise ValueError("integration limits outside the grid")
    y = g.z * f.values
    inner = (g.u > ulo) & (g.u < uhi)
    uu = np.concatenate(([ulo], g.u[inner], [uhi]))
    yy = np.interp(uu, g.u, y)
    return float(np.trapezoid(yy, uu))


def integrate(f: Field) -> float:
    """Double integral over the grid, measure dtheta dz."""
    return integrate_z(integrate_theta(f))
