import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehdblowup.core import (
    Field,
    RadialFunction,
    diff_matrices,
    integrate,
    integrate_theta,
    integrate_z,
    log_nodes,
    make_grid,
    make_parameters,
)
from ehdblowup.profiles import k_profile

# mpmath at 30 digits
BETA = {0.01: -20.871215252207999, 0.05: -4.1742430504415999, 0.1: -2.0871215252207999, 0.2: -1.0435607626103999}
C = {0.01: 0.99565463891368644, 0.05: 0.97848734840191516, 0.1: 0.95750060513280127, 0.2: 0.91704385852801882}
ALPHA_BETA = -0.20871215252207999


@pytest.mark.parametrize("alpha", sorted(BETA))
def test_parameter_constants_match_high_precision(alpha):
    p = make_parameters(alpha)
    assert p.beta == pytest.approx(BETA[alpha], rel=1e-14)
    assert p.c == pytest.approx(C[alpha], rel=1e-10)
    assert abs(p.alpha * p.beta - ALPHA_BETA) <= 1e-12
    assert p.eta == 0.99
    assert p.gamma == 1.0 + alpha / 10.0


def test_gamma_at_alpha_tenth():
    p = make_parameters(0.1)
    assert p.gamma == pytest.approx(1.01, abs=1e-15)
    assert p.eta == 0.99


def test_default_delta_and_k():
    p = make_parameters(0.05)
    assert p.delta == 0.025 and p.k == 0


def test_c_tends_to_one():
    assert make_parameters(1e-8).c == pytest.approx(1.0, abs=1e-7)


@given(st.floats(min_value=1e-4, max_value=0.2))
@settings(max_examples=30, deadline=None)
def test_parameter_invariants(alpha):
    p = make_parameters(alpha)
    assert p.beta < 0.0
    assert abs(p.alpha * p.beta - ALPHA_BETA) <= 1e-12
    assert 0.0 < p.c < 1.0


def test_parameters_deterministic():
    assert make_parameters(0.07, 0.01, 2) == make_parameters(0.07, 0.01, 2)


@pytest.mark.parametrize(
    "kwargs",
    [dict(alpha=0.0), dict(alpha=-0.1), dict(alpha=0.5), dict(alpha=0.05, delta=1.0), dict(alpha=0.05, delta=-0.1), dict(alpha=0.05, k=-1)],
)
def test_parameter_rejections(kwargs):
    with pytest.raises(ValueError):
        make_parameters(**kwargs)


def test_geometric_nodes_four_points():
    z = log_nodes(0.01, 100.0, 4)
    np.testing.assert_allclose(z, [0.01, 0.21544346900318837, 4.6415888336127789, 100.0], rtol=1e-14)
    np.testing.assert_allclose(z[1:] / z[:-1], 10 ** (4 / 3), rtol=1e-13)


def test_grid_structure(grid):
    assert grid.shape == (512, 128)
    assert np.all(np.diff(grid.z) > 0) and grid.z[0] == 1e-2 and grid.z[-1] == 1e4
    assert np.all((grid.theta > 0) & (grid.theta < math.pi / 2))
    np.testing.assert_allclose(np.diff(np.log(grid.z)), grid.h, rtol=1e-10)


def test_theta_quadrature(grid):
    assert abs(grid.theta_weights.sum() - math.pi / 2) / (math.pi / 2) <= 1e-12
    assert abs(grid.theta_weights @ np.sin(2 * grid.theta) - 1.0) <= 1e-10
    assert abs(grid.theta_weights @ k_profile(grid.theta) - 1.0) <= 1e-10


@pytest.mark.parametrize(
    "args", [(1.0, 10.0, 64, 16), (0.0, 10.0, 64, 16), (0.1, 1.0, 64, 16), (0.5, 0.1, 64, 16), (0.01, 100.0, 4, 16), (0.01, 100.0, 64, 7)]
)
def test_grid_rejections(args):
    with pytest.raises(ValueError):
        make_grid(*args)


def _inverse_square(nz):
    g = make_grid(nz=nz, ntheta=8)
    return abs(integrate_z(g.radial(1.0 / g.z**2), 1.0, 100.0) - 0.99)


def test_integrate_z_inverse_square_and_order():
    assert _inverse_square(512) <= 1e-4
    errs = [_inverse_square(n) for n in (128, 256, 512)]
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_zero_integrals(small_grid):
    assert integrate(small_grid.field(0.0)) == 0.0
    assert integrate_z(small_grid.radial(0.0)) == 0.0


def test_integrate_theta_is_radial(small_grid):
    r = integrate_theta(small_grid.sample(lambda z, t: np.sin(2 * t) / (1 + z)))
    assert isinstance(r, RadialFunction)
    np.testing.assert_allclose(r.values, 1.0 / (1.0 + small_grid.z), rtol=1e-10)


def test_integrate_limits_rejected(small_grid):
    with pytest.raises(ValueError):
        integrate_z(small_grid.radial(1.0), 1e-3, 10.0)


def test_fields_refuse_mixed_grids(small_grid, mid_grid):
    other = make_grid(nz=128, ntheta=32, z_max=1e3)
    with pytest.raises(ValueError):
        small_grid.field(1.0) + other.field(1.0)
    with pytest.raises(ValueError):
        Field(np.zeros((3, 3)), small_grid)
    # identical construction counts as the same grid
    assert (small_grid.field(1.0) + make_grid(nz=128, ntheta=32).field(1.0)).max_abs() == 2.0


def test_field_radial_broadcast(small_grid):
    f = small_grid.field(1.0) * small_grid.radial(small_grid.z)
    np.testing.assert_array_equal(f.values[:, 3], small_grid.z)
    with pytest.raises(TypeError):
        small_grid.radial(1.0) * small_grid.field(1.0)


def test_diff_matrices_exact_on_quartics():
    x = np.sort(np.random.default_rng(3).uniform(0, 1, 12))
    d1, d2 = diff_matrices(x)
    for bias in (-1, 1):
        b1, _ = diff_matrices(x, bias=bias)
        np.testing.assert_allclose(b1 @ x**4, 4 * x**3, atol=1e-9)
    np.testing.assert_allclose(d1 @ x**4, 4 * x**3, atol=1e-9)
    np.testing.assert_allclose(d2 @ x**3, 6 * x, atol=1e-7)
