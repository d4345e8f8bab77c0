"""Energy, Pohozaev functional, multipliers and the fiber map.

For a state ``w = (u, v)`` with kinetic part ``K = |grad u|^2 + |grad v|^2``:

    J(w) = K/2 - int H(w)
    P(w) = K - int H~(w)

The fiber map ``F(w, s) = e^s w(e^s x)`` preserves both masses, and its
energy profile has the closed form

    J(F(w, s)) = e^{2s} K/2 - e^{-2s} int H(e^s w)

which is evaluated pointwise on the unscaled grid (no interpolation).  Its
derivative in ``s`` is ``P(F(w, s))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, DegenerateStateError, RangeError
from .grid import RadialFunction, grad_norm_sq

S_MAX = 5.0


@dataclass(frozen=True, eq=False)
class StatePair:
    """The unknown ``w = (u, v)``; both components share one grid."""

    u: RadialFunction
    v: RadialFunction

    def __post_init__(self):
        if not self.u.grid.same_as(self.v.grid):
            raise ConfigError("state components live on different grids")

    @classmethod
    def from_arrays(cls, grid, u, v):
        return cls(RadialFunction(grid, u), RadialFunction(grid, v))

    @property
    def grid(self):
        return self.u.grid

    def stacked(self):
        return np.concatenate([self.u.values, self.v.values])

    def replace(self, u=None, v=None):
        g = self.grid
        return StatePair(RadialFunction(g, self.u.values if u is None else u),
                         RadialFunction(g, self.v.values if v is None else v))

    def masses(self):
        g = self.grid
        return g.inner(self.u.values, self.u.values), g.inner(self.v.values, self.v.values)

    def distance(self, other):
        """L2 distance between two states on the same grid."""
        du = self.u.values - other.u.values
        dv = self.v.values - other.v.values
        return float(np.sqrt(self.grid.inner(du, du) + self.grid.inner(dv, dv)))


@dataclass(frozen=True)
class FunctionalValues:
    J: float
    P: float
    kinetic: float
    potential: float
    nl_pairing: float

    def as_dict(self):
        return {"J": self.J, "P": self.P, "kinetic": self.kinetic,
                "potential": self.potential, "nl_pairing": self.nl_pairing}


def kinetic(w):
    return grad_norm_sq(w.u) + grad_norm_sq(w.v)


def potential(w, model):
    return w.grid.integrate_values(model.H(w.u.values, w.v.values))


def evaluate(w, model):
    """All scalar functionals of ``w`` from one set of pointwise evaluations."""
    K = kinetic(w)
    pot = potential(w, model)
    pair = w.grid.integrate_values(model.pairing(w.u.values, w.v.values))
    return FunctionalValues(J=0.5 * K - pot, P=K + 2.0 * pot - pair,
                            kinetic=K, potential=pot, nl_pairing=pair)


def energy(w, model):
    return 0.5 * kinetic(w) - potential(w, model)


def pohozaev(w, model):
    return kinetic(w) - w.grid.integrate_values(model.tilde_H(w.u.values, w.v.values))


def _gradient_arrays(w, model):
    g = w.grid
    hu, hv = model.grad_H(w.u.values, w.v.values)
    gu = -g.laplacian_values(w.u.values) - hu
    gv = -g.laplacian_values(w.v.values) - hv
    # Dirichlet truncation at r = R
    gu[-1] = 0.0
    gv[-1] = 0.0
    return gu, gv


def energy_gradient(w, model):
    """Unconstrained L2 gradient ``(-Lap u - H_u, -Lap v - H_v)``."""
    gu, gv = _gradient_arrays(w, model)
    return StatePair.from_arrays(w.grid, gu, gv)


def _multipliers(w, gu, gv):
    g = w.grid
    mu_, mv_ = w.masses()
    if not (mu_ > 0 and mv_ > 0):
        raise DegenerateStateError(
            f"zero-mass component (|u|^2={mu_:.3g}, |v|^2={mv_:.3g})")
    return -g.inner(gu, w.u.values) / mu_, -g.inner(gv, w.v.values) / mv_


def lagrange_multipliers(w, model):
    """``(lambda1, lambda2)`` making the residual orthogonal to ``(u,0)``, ``(0,v)``.

    The pairing uses the same discrete operator as the residual, so the
    orthogonality is exact up to rounding.
    """
    gu, gv = _gradient_arrays(w, model)
    return _multipliers(w, gu, gv)


def residual(w, model):
    """``(lambda1, lambda2, g)`` with ``g = (-Lap u + l1 u - H_u, -Lap v + l2 v - H_v)``."""
    gu, gv = _gradient_arrays(w, model)
    l1, l2 = _multipliers(w, gu, gv)
    gu = gu + l1 * w.u.values
    gv = gv + l2 * w.v.values
    gu[-1] = 0.0
    gv[-1] = 0.0
    return l1, l2, StatePair.from_arrays(w.grid, gu, gv)


def residual_norm(g):
    grid = g.grid
    return float(np.sqrt(grid.inner(g.u.values, g.u.values)
                         + grid.inner(g.v.values, g.v.values)))


# -- fiber map ----------------------------------------------------------------

def _fiber_parts(w, model, s, fn):
    s = np.asarray(s, dtype=float)
    es = np.exp(s)[..., None]
    vals = fn(es * w.u.values, es * w.v.values)
    return np.exp(2 * s), np.exp(-2 * s) * (vals @ w.grid.weights)


def fiber_energy(w, model, s):
    """``J(F(w, s))``; ``s`` may be a scalar or an array."""
    up, down = _fiber_parts(w, model, s, model.H)
    out = 0.5 * up * kinetic(w) - down
    return float(out) if np.ndim(out) == 0 else out


def fiber_derivative(w, model, s):
    """``d/ds J(F(w, s)) = P(F(w, s))``."""
    up, down = _fiber_parts(w, model, s, model.tilde_H)
    out = up * kinetic(w) - down
    return float(out) if np.ndim(out) == 0 else out


def fiber_second_derivative(w, model, s):
    """``d^2/ds^2 J(F(w, s))``; reduces to ``int 4 H~ - grad H~ . w`` on the manifold."""
    up, a = _fiber_parts(w, model, s, model.tilde_H)
    _, b = _fiber_parts(w, model, s, model.tilde_pairing)
    out = 2 * up * kinetic(w) + 2 * a - b
    return float(out) if np.ndim(out) == 0 else out


def _even_pchip(r, values):
    return PchipInterpolator(np.concatenate([-r[:0:-1], r]),
                             np.concatenate([values[:0:-1], values]), extrapolate=False)


def resample_scaled(w, s, s_max=S_MAX):
    """Materialize ``F(w, s)`` on the original grid by monotone cubic interpolation.

    Radii mapped beyond ``R`` read zero.
    """
    if not np.isfinite(s) or abs(s) > s_max:
        raise RangeError(f"dilation |s|={abs(s):.4g} exceeds s_max={s_max}")
    if s == 0.0:
        return w
    g = w.grid
    r = g.nodes
    x = np.exp(s) * r
    inside = x <= g.R
    out = []
    for comp in (w.u.values, w.v.values):
        vals = np.zeros(g.n)
        # slope averaging in the far tail can underflow harmlessly
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            vals[inside] = np.exp(s) * _even_pchip(r, comp)(x[inside])
        out.append(vals)
    return StatePair.from_arrays(g, *out)


def gaussian_pair(grid, cu=1.0, cv=1.0, width=1.0):
    """``(cu e^{-r^2/(2 width^2)}, cv e^{-r^2/(2 width^2)})`` sampled on ``grid``."""
    base = np.exp(-0.5 * (grid.nodes / width) ** 2)
    return StatePair.from_arrays(grid, cu * base, cv * base)


__all__ = [
    "StatePair", "FunctionalValues", "kinetic", "potential", "evaluate", "energy",
    "pohozaev", "energy_gradient", "lagrange_multipliers", "residual", "residual_norm",
    "fiber_energy", "fiber_derivative", "fiber_second_derivative", "resample_scaled",
    "gaussian_pair",
]
