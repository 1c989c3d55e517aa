"""Monte-Carlo coercivity measurements for the linearised charge operator M_G."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Grid, Parameters
from .elliptic import solve_stream
from .norms import weighted_l2
from .operators import d_theta, d_z, op_M_G
from .profiles import f_star_field
from .testfields import random_fields

K1_WEIGHTS = (1.0, 9.0, 1.0)


@dataclass(frozen=True)
class CoercivityReport:
    alpha: float
    k0_ratios: np.ndarray
    k1_ratios: np.ndarray

    @property
    def samples(self) -> int:
        return len(self.k0_ratios)

    @property
    def k0_bound(self) -> float:
        return 0.5 - 10.0 * self.alpha

    @property
    def passed(self) -> bool:
        return bool(np.min(self.k0_ratios) >= self.k0_bound and np.all(self.k1_ratios > 0.0))

    def summary(self) -> str:
        k0, k1 = self.k0_ratios, self.k1_ratios
        return "\n".join(
            [
                f"samples: {self.samples}  alpha: {self.alpha:g}",
                f"k=0 ratio   min {np.min(k0):.6f}  median {np.median(k0):.6f}  bound {self.k0_bound:.6f}",
                f"k=1 (1,9,1) min {np.min(k1):.6f}  median {np.median(k1):.6f}  bound 0",
                f"overall: {'PASS' if self.passed else 'FAIL'}",
            ]
        )


def pairing_ratios(G, MG, params: Parameters) -> tuple[float, float]:
    """k=0 ratio (M_G G, G)/||G||^2 and the k=1 combination over the same denominator.

    Both pairings use the weights w^2 sin(2t)^-eta (radial) and
    w^2 sin(2t)^-gamma (angular derivative).
    """
    eta, gam = params.eta, params.gamma
    norm0 = weighted_l2(G, G, eta)
    k0 = weighted_l2(MG, G, eta)
    a, b, c = K1_WEIGHTS
    k1 = a * k0 + b * weighted_l2(d_theta(MG), d_theta(G), gam) + c * weighted_l2(d_z(MG), d_z(G), eta)
    denom = norm0 + weighted_l2(d_theta(G), d_theta(G), gam) + weighted_l2(d_z(G), d_z(G), eta)
    return k0 / norm0, k1 / denom


def measure_coercivity(grid: Grid, params: Parameters, samples: int = 100, seed: int = 0) -> CoercivityReport:
    phi_F = solve_stream(f_star_field(grid, params), params)
    k0, k1 = [], []
    for G in random_fields(grid, seed, samples):
        r0, r1 = pairing_ratios(G, op_M_G(G, phi_F, params), params)
        k0.append(r0)
        k1.append(r1)
    return CoercivityReport(params.alpha, np.array(k0), np.array(k1))
