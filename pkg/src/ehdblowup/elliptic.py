"""Solvers for the two variant spherical Laplacians.

stream:     -a^2 z^2 Psi_zz - a(5+a) z Psi_z - Psi_tt + (tan t Psi)_t - 6 Psi = F
            Psi = 0 at t = 0, pi/2 and z = z_max; z Psi_z = 0 at z = z_min
potential:   a^2 z^2 Pi_zz + a(5+a) z Pi_z + Pi_tt - tan t Pi_t + 6 Pi = G
            Pi_t = 0 at t = 0, pi/2; Pi = 0 at z = z_max, and Pi vanishes at z_min

In u = log z the radial part is a^2 d_uu + 5a d_u. Both directions use
five-point stencils; in theta they act on the Gauss nodes extended by the two
end points, with the boundary values eliminated.

The potential problem is solved mode by mode in theta. Its angular operator
has eigenvalues 6 - l(l+1), l even. For l = 0 both radial solutions decay as
z grows, so the decay condition at infinity selects nothing and a Dirichlet
pair (z_min, z_max) is exponentially ill-conditioned; that mode is instead
integrated outward from z_min with Pi = z Pi_z = 0 by an exponential
integrator. All other modes take
Dirichlet conditions at both ends.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm, solve_banded
from scipy.sparse.linalg import splu

from .core import Field, Grid, Parameters, diff_matrices, fd_weights
from .operators import d_z, d_zz, partial_theta, partial_theta2

KINDS = ("stream", "potential")
RESIDUAL_TOL = 1e-8


class EllipticSolveError(RuntimeError):
    def __init__(self, message, residual_history):
        super().__init__(f"{message}; residual history {residual_history}")
        self.residual_history = residual_history


def angular_matrices(theta: np.ndarray, bc: str) -> tuple[np.ndarray, np.ndarray]:
    """d/dt and d^2/dt^2 on interior nodes with boundary values eliminated.

    bc="dirichlet": f = 0 at both ends; bc="neumann": f_t = 0 at both ends.
    """
    n = len(theta)
    x = np.concatenate(([0.0], theta, [math.pi / 2]))
    d1 = np.zeros((n, n + 2))
    d2 = np.zeros((n, n + 2))
    for i in range(n):
        j = i + 1
        lo = min(max(j - 2, 0), n + 2 - 5)
        w = fd_weights(x[j], x[lo:lo + 5], 2)
        d1[i, lo:lo + 5] = w[1]
        d2[i, lo:lo + 5] = w[2]
    if bc == "dirichlet":
        return d1[:, 1:-1], d2[:, 1:-1]
    if bc != "neumann":
        raise ValueError(f"unknown boundary condition {bc!r}")
    # end value as a linear combination of interior values: f_t(end) = 0
    e0 = np.zeros(n)
    w0 = fd_weights(x[0], x[:5], 1)[1]
    e0[:4] = -w0[1:] / w0[0]
    e1 = np.zeros(n)
    w1 = fd_weights(x[-1], x[-5:], 1)[1]
    e1[-4:] = -w1[:-1] / w1[-1]
    out = []
    for d in (d1, d2):
        out.append(d[:, 1:-1] + np.outer(d[:, 0], e0) + np.outer(d[:, -1], e1))
    return out[0], out[1]


def radial_matrix(nz: int, h: float, alpha: float) -> sp.csr_matrix:
    """a^2 d_uu + 5a d_u with five-point stencils; first and last rows empty."""
    d1, d2 = diff_matrices(np.arange(nz) * h)
    R = alpha**2 * d2 + 5.0 * alpha * d1
    R[0] = R[-1] = 0.0
    return sp.csr_matrix(R)


def neumann_row(nz: int, h: float) -> np.ndarray:
    """One-sided five-point d_u at the first node."""
    return diff_matrices(np.arange(5) * h)[0][0]


def _banded(A, lower: int, upper: int) -> np.ndarray:
    A = sp.csr_matrix(A)
    n = A.shape[0]
    ab = np.zeros((lower + upper + 1, n))
    for k in range(-lower, upper + 1):
        d = A.diagonal(k)
        if k >= 0:
            ab[upper - k, k:] = d
        else:
            ab[upper - k, : n + k] = d
    return ab


def stream_angular(theta: np.ndarray) -> np.ndarray:
    """-f_tt + (tan t f)_t - 6 f with f = 0 at both ends."""
    d1, d2 = angular_matrices(theta, "dirichlet")
    tan = np.tan(theta)
    return -d2 + tan[:, None] * d1 + np.diag(1.0 / np.cos(theta) ** 2) - 6.0 * np.eye(len(theta))


def potential_angular(theta: np.ndarray) -> np.ndarray:
    """f_tt - tan t f_t + 6 f with f_t = 0 at both ends."""
    d1, d2 = angular_matrices(theta, "neumann")
    return d2 - np.tan(theta)[:, None] * d1 + 6.0 * np.eye(len(theta))


def _assemble_stream(grid: Grid, params: Parameters) -> sp.csc_matrix:
    nz, nt = grid.shape
    rad = -radial_matrix(nz, grid.h, params.alpha)
    interior = np.ones(nz)
    interior[0] = interior[-1] = 0.0
    A = sp.kron(rad, sp.identity(nt)) + sp.kron(sp.diags(interior), sp.csr_matrix(stream_angular(grid.theta)))
    A = A.tolil()
    w = neumann_row(nz, grid.h)
    for j in range(nt):
        top = (nz - 1) * nt + j
        A[top, top] = 1.0
        # z Psi_z = 0 at z_min, one-sided
        for m in range(5):
            A[j, m * nt + j] = w[m]
    return A.tocsc()


@dataclass(frozen=True, eq=False)
class StreamDiscretisation:
    grid: Grid
    params: Parameters
    matrix: sp.csc_matrix
    lu: object

    def boundary_rows(self) -> np.ndarray:
        rows = np.zeros(self.grid.shape, dtype=bool)
        rows[0] = rows[-1] = True
        return rows.ravel()

    def solve(self, b: np.ndarray) -> np.ndarray:
        scale = max(np.linalg.norm(b), 1e-300)
        x = self.lu.solve(b)
        history = [np.linalg.norm(self.matrix @ x - b) / scale]
        for _ in range(3):
            if history[-1] <= RESIDUAL_TOL or not np.any(b):
                return x
            x = x + self.lu.solve(b - self.matrix @ x)
            history.append(np.linalg.norm(self.matrix @ x - b) / scale)
        if history[-1] <= RESIDUAL_TOL:
            return x
        raise EllipticSolveError("stream solve did not converge", history)


@functools.lru_cache(maxsize=16)
def stream_discretisation(grid: Grid, params: Parameters) -> StreamDiscretisation:
    A = _assemble_stream(grid, params)
    return StreamDiscretisation(grid, params, A, splu(A))


# modes whose angular eigenvalue exceeds this are marched from z_min
CAUSAL_EIGENVALUE = 3.0


@dataclass(eq=False)
class PotentialDiscretisation:
    grid: Grid
    params: Parameters
    eigenvalues: np.ndarray
    modes: np.ndarray
    modes_inv: np.ndarray
    radial: sp.csr_matrix
    _cache: dict = field(default_factory=dict, repr=False)

    @functools.cached_property
    def _dirichlet_bands(self) -> np.ndarray:
        return _banded(self.radial, 3, 3)

    def _dirichlet(self, mu: float, g: np.ndarray) -> np.ndarray:
        ab = self._dirichlet_bands.copy()
        ab[3] += mu
        ab[3, 0] = ab[3, -1] = 1.0
        rhs = g.copy()
        rhs[0] = rhs[-1] = 0.0
        return solve_banded((3, 3), ab, rhs)

    def _propagator(self, mu: float):
        """Exact one-step propagator and forcing weights for the causal mode.

        With y = (a, a_u), y_u = J y + (0, g / a^2). The forcing is replaced by
        its cubic interpolant on four nodes, so each step is fourth order and
        stable for any h since both roots of the mode decay outward.
        """
        if mu not in self._cache:
            a = self.params.alpha
            h = self.grid.h
            J = np.array([[0.0, 1.0], [-mu / a**2, -5.0 / a]])
            x, w = np.polynomial.legendre.leggauss(24)
            tau = 0.5 * h * (x + 1.0)
            w = 0.5 * h * w
            kernels = np.array([expm(J * (h - t))[:, 1] for t in tau]) / a**2
            weights = {}
            for offsets in ((0, 1, 2, 3), (-1, 0, 1, 2), (-2, -1, 0, 1)):
                nodes = np.array(offsets, dtype=float) * h
                W = np.zeros((2, 4))
                for m in range(4):
                    others = np.delete(nodes, m)
                    basis = np.prod((tau[:, None] - others) / (nodes[m] - others), axis=1)
                    W[:, m] = (kernels * (w * basis)[:, None]).sum(axis=0)
                weights[offsets] = W
            self._cache[mu] = (expm(J * h), weights)
        return self._cache[mu]

    def _causal(self, mu: float, g: np.ndarray) -> np.ndarray:
        E, weights = self._propagator(mu)
        n = len(g)
        y = np.zeros(2)
        out = np.zeros(n)
        for i in range(n - 1):
            offsets = (0, 1, 2, 3) if i == 0 else (-2, -1, 0, 1) if i == n - 2 else (-1, 0, 1, 2)
            idx = [i + o for o in offsets]
            y = E @ y + weights[offsets] @ g[idx]
            out[i + 1] = y[0]
        return out

    def solve(self, G: np.ndarray) -> np.ndarray:
        coeff = G @ self.modes_inv.T
        out = np.zeros_like(coeff)
        for k, mu in enumerate(self.eigenvalues):
            if mu > CAUSAL_EIGENVALUE:
                out[:, k] = self._causal(mu, coeff[:, k])
            else:
                out[:, k] = self._dirichlet(mu, coeff[:, k])
        return out @ self.modes.T


@functools.lru_cache(maxsize=16)
def potential_discretisation(grid: Grid, params: Parameters) -> PotentialDiscretisation:
    ev, V = np.linalg.eig(potential_angular(grid.theta))
    if np.max(np.abs(ev.imag)) > 1e-8 * np.max(np.abs(ev)):
        raise RuntimeError("angular operator has complex spectrum; refine ntheta")
    ev, V = ev.real, V.real
    return PotentialDiscretisation(
        grid, params, ev, V, np.linalg.inv(V), radial_matrix(grid.nz, grid.h, params.alpha)
    )


@dataclass(frozen=True)
class EllipticProblem:
    kind: str
    rhs: Field
    parameters: Parameters

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not self.rhs.is_finite():
            raise ValueError("right-hand side has non-finite values")

    def solve(self) -> Field:
        grid = self.rhs.grid
        if self.kind == "stream":
            disc = stream_discretisation(grid, self.parameters)
            b = self.rhs.values.ravel().copy()
            b[disc.boundary_rows()] = 0.0
            x = disc.solve(b).reshape(grid.shape)
        else:
            x = potential_discretisation(grid, self.parameters).solve(self.rhs.values)
        return Field(x, grid)


def solve_stream(F: Field, params: Parameters) -> Field:
    return EllipticProblem("stream", F, params).solve()


def solve_potential(G: Field, params: Parameters) -> Field:
    return EllipticProblem("potential", G, params).solve()


def solve_stream_discrete(b: Field, params: Parameters) -> Field:
    """Invert the full discrete stream operator, boundary rows included."""
    disc = stream_discretisation(b.grid, params)
    return Field(disc.solve(b.values.ravel()).reshape(b.grid.shape), b.grid)


def apply_stream_discrete(x: Field, params: Parameters) -> Field:
    """The stream solver's matrix applied to x; boundary rows give the boundary data."""
    disc = stream_discretisation(x.grid, params)
    return Field((disc.matrix @ x.values.ravel()).reshape(x.grid.shape), x.grid)


def _radial_part(f: Field, params: Parameters) -> Field:
    a = params.alpha
    # a^2 z^2 f_zz + a(5+a) z f_z = a^2 (z d_z)^2 f + 5a (z d_z) f
    return d_zz(f) * a**2 + d_z(f) * (5.0 * a)


def apply_potential_operator(Pi: Field, params: Parameters) -> Field:
    """P Pi by fourth-order differences on the grid nodes."""
    tan = np.tan(Pi.grid.theta)
    return _radial_part(Pi, params) + partial_theta2(Pi) - partial_theta(Pi) * tan + Pi * 6.0


def apply_stream_operator(Psi: Field, params: Parameters) -> Field:
    """Left-hand side of the stream problem by fourth-order differences."""
    th = Psi.grid.theta
    tan = np.tan(th)
    sec2 = 1.0 / np.cos(th) ** 2
    return (
        -_radial_part(Psi, params)
        - partial_theta2(Psi)
        + Psi * sec2
        + partial_theta(Psi) * tan
        - Psi * 6.0
    )
