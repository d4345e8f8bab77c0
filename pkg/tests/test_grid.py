import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsground import (ConfigError, RadialFunction, grad_norm_sq, integrate, make_grid, mass,
                       radial_laplacian, tail_mass_fraction)

import oracles as O

GRIDS = [("uniform", 6), ("graded", 6), ("uniform", 2), ("graded", 4)]


def gaussian(grid, width=1.0):
    return grid.sample(lambda r: np.exp(-0.5 * (r / width) ** 2))


@pytest.mark.parametrize("spacing", ["uniform", "graded"])
def test_gaussian_moments_order6(spacing):
    g = make_grid(12.0, 2048, spacing)
    u = gaussian(g)
    assert mass(u) == pytest.approx(O.GAUSS_MASS, rel=1e-13)
    assert grad_norm_sq(u) == pytest.approx(O.GAUSS_MASS, rel=1e-12)
    for p in (2, 4, 6):
        assert g.integrate_values(u.values**p) == pytest.approx(2 * np.pi / p, rel=1e-13)


def test_weights_positive_and_exact_area():
    for spacing in ("uniform", "graded"):
        g = make_grid(7.5, 300, spacing)
        assert np.all(g.weights > 0)
        assert g.weights.sum() == pytest.approx(np.pi * 7.5**2, rel=1e-14)
        assert g.area == pytest.approx(np.pi * 7.5**2, rel=1e-14)


@pytest.mark.parametrize("spacing,order", GRIDS)
def test_refinement_reduces_kinetic_error(spacing, order):
    ns = (256, 512, 1024) if order == 6 else (256, 512, 1024, 2048)
    errs = [abs(grad_norm_sq(gaussian(make_grid(12.0, n, spacing, order=order))) - np.pi)
            for n in ns]
    assert all(b < a for a, b in zip(errs, errs[1:])), errs
    # observed rate close to the stencil order
    rate = np.log2(errs[0] / errs[1])
    assert rate > order - 1.0


def test_laplacian_of_gaussian():
    for spacing, tol in (("uniform", 1e-10), ("graded", 1e-9)):
        g = make_grid(12.0, 2048, spacing)
        u = gaussian(g)
        exact = (g.nodes**2 - 2.0) * u.values
        assert np.max(np.abs(radial_laplacian(u).values - exact)) < tol


def test_centre_laplacian_is_twice_second_derivative():
    g = make_grid(10.0, 1001)
    u = g.nodes**2  # Lap r^2 = 4 everywhere
    assert g.laplacian_values(u)[0] == pytest.approx(4.0, abs=1e-9)
    assert np.allclose(g.laplacian_values(u), 4.0, atol=1e-8)


@pytest.mark.parametrize("n", [64, 256])
def test_constants_have_zero_derivatives(n):
    g = make_grid(12.0, n)
    one = np.ones(n)
    assert np.max(np.abs(g.derivative_values(one))) < 1e-12
    # row sums are zeroed; what remains is rounding in the matvec
    assert np.max(np.abs(g.laplacian_values(one))) < 1e-11


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), w1=st.floats(0.3, 3), w2=st.floats(0.3, 3))
def test_quadrature_is_linear(a, b, w1, w2):
    g = make_grid(12.0, 257, "graded")
    f, h = gaussian(g, w1).values, gaussian(g, w2).values
    lhs = g.integrate_values(a * f + b * h)
    rhs = a * g.integrate_values(f) + b * g.integrate_values(h)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(width=st.floats(0.5, 2.0), spacing=st.sampled_from(["uniform", "graded"]))
def test_discrete_integration_by_parts(width, spacing):
    g = make_grid(16.0, 2048, spacing)
    u = gaussian(g, width).values
    lhs = -g.inner(g.laplacian_values(u), u)
    du = g.derivative_values(u)
    rhs = g.integrate_values(du * du)
    assert lhs == pytest.approx(rhs, rel=1e-8)
    assert rhs == pytest.approx(np.pi, rel=1e-8)  # scale invariant in 2D


def test_laplacian_matrix_matches_values():
    g = make_grid(12.0, 128, "graded")
    u = gaussian(g).values
    assert np.allclose(g.laplacian_matrix @ u, g.laplacian_values(u), rtol=0, atol=1e-13)


def test_graded_nodes_cluster_at_centre():
    u, gr = make_grid(12.0, 512), make_grid(12.0, 512, "graded")
    assert gr.nodes[1] < u.nodes[1]
    assert gr.nodes[-1] == u.nodes[-1] == 12.0
    assert np.all(np.diff(gr.nodes) > 0)
    assert gr.spacing_max > u.spacing_max


def test_radial_function_arithmetic_and_validation():
    g = make_grid(5.0, 32)
    f = g.sample(lambda r: r)
    assert np.allclose((2 * f + f - f).values, 2 * g.nodes, rtol=1e-15, atol=0)
    assert np.array_equal((-f).values, -g.nodes)
    assert len(f) == 32
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(ConfigError):
        RadialFunction(g, np.zeros(31))
    with pytest.raises(ConfigError):
        RadialFunction(g, np.full(32, np.nan))


@pytest.mark.parametrize("kwargs", [
    dict(R=0.0, n=64), dict(R=-1.0, n=64), dict(R=np.inf, n=64), dict(R=1.0, n=15),
    dict(R=1.0, n=64, spacing="log"), dict(R=1.0, n=64, order=8),
    dict(R=1.0, n=64, spacing="graded", grading=0.0), dict(R=1.0, n=64.5),
])
def test_grid_rejects_bad_parameters(kwargs):
    with pytest.raises(ConfigError):
        make_grid(**kwargs)


def test_digest_and_identity():
    a, b = make_grid(12.0, 100), make_grid(12.0, 100)
    assert a.digest() == b.digest() and a.same_as(b)
    c = make_grid(12.0, 100, "graded")
    assert a.digest() != c.digest() and not a.same_as(c)
    assert a.describe() == {"R": 12.0, "n": 100, "spacing": "uniform", "grading": 2.0, "order": 6}


def test_tail_mass_fraction():
    g = make_grid(12.0, 512)
    assert tail_mass_fraction(gaussian(g)) < 1e-40
    assert tail_mass_fraction(gaussian(g, 4.0)) > 1e-4
    assert tail_mass_fraction(g.zeros()) == 0.0
    assert integrate(g.zeros()) == 0.0
