import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsground import (ConfigError, DegenerateStateError, MassConstraint, NoMaximizerError,
                       NonUniquenessError, NonlinearityModel, StatePair, fiber_derivative,
                       fiber_energy, fiber_maximizer, fiber_second_derivative, gaussian_pair,
                       make_grid, pohozaev, project_mass, project_pohozaev, resample_scaled)
from nlsground.functional import kinetic
from nlsground.manifold import AdmissibilityWarning, fiber_scan

import oracles as O

GRID = make_grid(12.0, 512, "graded")


def bumps(cu, cv, wu, wv, grid=GRID):
    r2 = grid.nodes**2
    return StatePair.from_arrays(grid, cu * np.exp(-r2 / wu), cv * np.exp(-r2 / wv))


states = st.builds(bumps, st.floats(0.2, 2.0), st.floats(0.2, 2.0),
                   st.floats(0.5, 4.0), st.floats(0.5, 4.0))
models = st.sampled_from([NonlinearityModel("pure_power", 1.0, 6.0),
                          NonlinearityModel("pure_power", 0.5, 8.0),
                          NonlinearityModel("coupled_exp", 5.0, 6.0, 1.0)])


class Wavy:
    """Stand-in model whose fiber derivative oscillates in ``s``."""

    exponential = False

    def __init__(self, scale):
        self.scale = scale

    def tilde_H(self, u, v):
        rho = np.asarray(u) ** 2 + np.asarray(v) ** 2
        safe = np.where(rho > 0, rho, 1.0)
        return self.scale * rho**2 * (1 + 0.9 * np.sin(2 * np.log(safe)))


def test_constraint_window_and_warning():
    c = MassConstraint(1.0, 1.0, gamma0=1.0)
    assert c.window == pytest.approx(2 * np.pi) and c.admissible and c.warning() is None
    big = MassConstraint(2.0, 2.0, gamma0=1.0)
    assert not big.admissible
    with pytest.warns(AdmissibilityWarning, match="not below"):
        big.warn_if_inadmissible()
    assert MassConstraint(9.0, 9.0).admissible  # no gamma0, no window
    for bad in ((0.0, 1.0), (1.0, -1.0), (np.nan, 1.0)):
        with pytest.raises(ConfigError):
            MassConstraint(*bad)
    with pytest.raises(ConfigError):
        MassConstraint(1.0, 1.0, gamma0=0.0)


@settings(max_examples=50, deadline=None)
@given(w=states, a=st.floats(0.05, 3.0), b=st.floats(0.05, 3.0))
def test_mass_projection_is_exact(w, a, b):
    x = project_mass(w, MassConstraint(a, b))
    mu_, mv_ = x.masses()
    assert abs(np.sqrt(mu_) - a) <= 1e-10 * a
    assert abs(np.sqrt(mv_) - b) <= 1e-10 * b


def test_mass_projection_rejects_zero_component():
    w = bumps(1.0, 1.0, 1.0, 1.0).replace(v=np.zeros(GRID.n))
    with pytest.raises(DegenerateStateError):
        project_mass(w, MassConstraint(1.0, 1.0))


def test_gaussian_maximizer(gauss, power):
    s = fiber_maximizer(gauss, power)
    assert s == pytest.approx(O.S_STAR, abs=1e-12)
    assert fiber_energy(gauss, power, s) == pytest.approx(O.FIBER_MAX, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(w=states, model=models)
def test_maximizer_is_the_fiber_maximum(w, model):
    s = fiber_maximizer(w, model)
    assert abs(fiber_derivative(w, model, s)) <= 1e-9 * np.exp(2 * s) * kinetic(w)
    top = fiber_energy(w, model, s)
    grid = s + np.linspace(-3, 3, 121)
    grid = grid[grid < s + 1.5] if model.exponential else grid
    assert np.all(fiber_energy(w, model, grid) <= top + 1e-12 * abs(top))
    assert fiber_energy(w, model, s) > 0
    assert fiber_second_derivative(w, model, s) < 0


@settings(max_examples=20, deadline=None)
@given(w=states, model=models)
def test_pohozaev_projection_lands_and_is_idempotent(w, model):
    c = MassConstraint(0.6, 0.5)
    w = project_mass(w, c)
    p = project_pohozaev(w, model, c, full_output=True)
    x = p.state
    assert abs(pohozaev(x, model)) <= 1e-6 * kinetic(x)
    assert np.allclose(np.sqrt(x.masses()), (0.6, 0.5), rtol=1e-10, atol=0)
    again = project_pohozaev(x, model, c, full_output=True)
    assert again.state is x and again.rounds == 0 and again.s_star == 0.0


def test_projection_defaults_to_incoming_masses(gauss, power):
    x = project_pohozaev(gauss, power)
    assert np.allclose(x.masses(), gauss.masses(), rtol=1e-10, atol=0)


def test_maximizer_is_dilation_equivariant(power):
    g = make_grid(12.0, 2048)
    w = gaussian_pair(g, 1.0, 0.7, 0.6)
    s0 = fiber_maximizer(w, power)
    for t in (-0.7, 0.4):
        assert fiber_maximizer(resample_scaled(w, t), power) == pytest.approx(s0 - t, abs=1e-6)


def test_no_maximizer_cases(gauss, power):
    with pytest.raises(NoMaximizerError):
        fiber_maximizer(gauss, power.with_mu(0.0))
    flat = StatePair.from_arrays(gauss.grid, np.ones(2048), np.ones(2048))
    with pytest.raises(NoMaximizerError):
        fiber_maximizer(flat, power)


def test_several_sign_changes_raise_with_brackets():
    g = make_grid(12.0, 512)
    w = gaussian_pair(g)
    base = g.integrate_values((w.u.values**2 + w.v.values**2) ** 2)
    with pytest.raises(NonUniquenessError) as info:
        fiber_maximizer(w, Wavy(kinetic(w) / base))
    assert len(info.value.brackets) > 1
    assert all(lo < hi for lo, hi in info.value.brackets)


def test_scan_marks_overflow_region(coupled):
    w = gaussian_pair(GRID, 1.0, 1.0, 1.0)
    s, d = fiber_scan(w, coupled)
    assert np.isneginf(d[-1]) and np.isfinite(d[0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fiber_maximizer(w, coupled)
