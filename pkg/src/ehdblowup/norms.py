"""Weighted inner products, the H^k norm family and the energy functional."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Field, Grid, Parameters, integrate
from .operators import d_theta, d_z
from .profiles import SpecialPi, special_pi_image, weight_w


def _weight(grid: Grid, exponent: float) -> np.ndarray:
    return weight_w(grid.z)[:, None] ** 2 * grid.sin2t[None, :] ** (-exponent)


def weighted_l2(f: Field, g: Field, weight_exponent: float) -> float:
    """int int f g w^2 sin(2t)^-e dt dz."""
    if not f.grid.same_as(g.grid):
        raise ValueError("fields live on different grids")
    return integrate(Field(f.values * g.values * _weight(f.grid, weight_exponent), f.grid))


def _hk_terms(f: Field, k: int):
    """Yield (label, field, which-exponent) for every term of the H^k sum."""
    dz = [f]
    for _ in range(k):
        dz.append(d_z(dz[-1]))
    for i in range(k + 1):
        yield f"Dz^{i}", dz[i], "eta"
    th = f
    for i in range(1, k + 1):
        th = d_theta(th)
        mixed = th
        for j in range(0, k - i + 1):
            yield f"Dz^{j} Dt^{i}", mixed, "gamma"
            mixed = d_z(mixed)


@dataclass(frozen=True)
class NormBreakdown:
    """Squared contributions of the H^k norm; ``total`` is the squared norm."""

    contributions: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.contributions.values()))

    @property
    def norm(self) -> float:
        return math.sqrt(self.total)


def h_k_norm(f: Field, params: Parameters, k: int | None = None) -> NormBreakdown:
    k = params.k if k is None else k
    out = {}
    for idx, (label, term, which) in enumerate(_hk_terms(f, k)):
        e = params.eta if which == "eta" else params.gamma
        val = weighted_l2(term, term, e)
        if not math.isfinite(val):
            raise FloatingPointError(f"non-finite H^k contribution at term {idx} ({label})")
        out[label] = val
    return NormBreakdown(out)


def hk_inner(f: Field, g: Field, params: Parameters, k: int | None = None) -> float:
    """(f, g)_{H^k}, the bilinear form behind h_k_norm."""
    k = params.k if k is None else k
    total = 0.0
    for (_, a, which), (_, b, _) in zip(_hk_terms(f, k), _hk_terms(g, k)):
        total += weighted_l2(a, b, params.eta if which == "eta" else params.gamma)
    return total


@functools.lru_cache(maxsize=16)
def pi_normalization(grid: Grid, params: Parameters) -> float:
    """||P(Pi_s)||_{H^k} for the unit-amplitude special solution on this grid."""
    return h_k_norm(special_pi_image(SpecialPi(1.0, params), grid), params).norm


def pi_amplitude(G: Field, params: Parameters) -> float:
    """Amplitude whose square is the normalised G-energy."""
    return h_k_norm(G, params).norm / pi_normalization(G.grid, params)


def energy(eps: Field, G: Field, params: Parameters) -> float:
    """||eps||^2_{H^k} + ||G||^2_{H^k} / C^2, C = pi_normalization."""
    return h_k_norm(eps, params).total + pi_amplitude(G, params) ** 2
