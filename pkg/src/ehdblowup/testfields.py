"""Seeded smooth test fields z^p/(1+z)^q sin^m(2t) (1 + a cos(k log z + phase)).

Every member has finite H^k norms and decays at both ends of the z range.
"""

from __future__ import annotations

import numpy as np

from .core import Field, Grid


def bump(grid: Grid, p: float, q: float, m: int, amp: float = 0.0, freq: float = 0.0, phase: float = 0.0) -> Field:
    z = grid.z[:, None]
    radial = z**p / (1.0 + z) ** q * (1.0 + amp * np.cos(freq * np.log(z) + phase))
    return grid.field(radial * np.sin(2.0 * grid.theta)[None, :] ** m)


def random_field(grid: Grid, rng: np.random.Generator, terms: int = 3, p_min: int = 3, q_gap: int = 1) -> Field:
    out = grid.field(0.0)
    for _ in range(terms):
        p = int(rng.integers(p_min, p_min + 2))
        q = p + q_gap + int(rng.integers(0, 3))
        m = int(rng.integers(1, 4))
        out = out + bump(
            grid,
            p,
            q,
            m,
            amp=float(rng.uniform(0.0, 0.9)),
            freq=float(rng.uniform(0.0, 2.0)),
            phase=float(rng.uniform(0.0, 2.0 * np.pi)),
        ) * float(rng.normal())
    return out


def random_fields(grid: Grid, seed: int, count: int, **kwargs) -> list[Field]:
    rng = np.random.default_rng(seed)
    return [random_field(grid, rng, **kwargs) for _ in range(count)]
