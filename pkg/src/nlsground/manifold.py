"""Projections onto the mass torus and the Pohozaev manifold.

The Pohozaev projection dilates a state to the maximizer of its fiber energy
``s -> J(F(w, s))``, whose derivative changes sign exactly once from + to -
when ``H~`` satisfies the monotonicity hypothesis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import (ConfigError, DegenerateStateError, NoMaximizerError,
                     NonUniquenessError)
from .functional import (StatePair, fiber_derivative, kinetic, pohozaev,
                         resample_scaled)
from .nonlinearity import EXP_LIMIT

SCAN_HALF_WIDTH = 8.0
SCAN_STEP = 0.05


class AdmissibilityWarning(UserWarning):
    """Masses outside the window ``a^2 + b^2 < 2 pi / gamma0``."""


@dataclass(frozen=True)
class MassConstraint:
    """Target L2 norms ``|u|_2 = a``, ``|v|_2 = b``.

    ``gamma0`` (optional) enables the admissibility flag; leaving the window
    only warns.
    """

    a: float
    b: float
    gamma0: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0 and np.isfinite(self.b) and self.b > 0):
            raise ConfigError(f"masses must be positive, got a={self.a}, b={self.b}")
        if self.gamma0 is not None and not self.gamma0 > 0:
            raise ConfigError(f"gamma0 must be positive, got {self.gamma0}")

    @property
    def window(self):
        return np.inf if self.gamma0 is None else 2 * np.pi / self.gamma0

    @property
    def admissible(self):
        return self.a**2 + self.b**2 < self.window

    def warning(self):
        if self.admissible:
            return None
        return (f"a^2 + b^2 = {self.a**2 + self.b**2:.6g} is not below "
                f"2 pi/gamma0 = {self.window:.6g}")

    def warn_if_inadmissible(self):
        msg = self.warning()
        if msg:
            warnings.warn(msg, AdmissibilityWarning, stacklevel=2)
        return msg


def project_mass(w, c):
    """Scale each component onto its target L2 norm."""
    mu_, mv_ = w.masses()
    if not (mu_ > 0 and mv_ > 0):
        raise DegenerateStateError(
            f"cannot project a zero-mass component (|u|^2={mu_:.3g}, |v|^2={mv_:.3g})")
    return w.replace(u=w.u.values * (c.a / np.sqrt(mu_)),
                     v=w.v.values * (c.b / np.sqrt(mv_)))


def _overflow_edge(w, model):
    """Smallest ``s`` at which ``gamma0 |e^s w|^2`` leaves the guarded range."""
    if not model.exponential:
        return np.inf
    rho = float(np.max(w.u.values**2 + w.v.values**2))
    if rho == 0.0:
        return np.inf
    return 0.5 * np.log(EXP_LIMIT / (model.gamma0 * rho))


def fiber_scan(w, model, half_width=SCAN_HALF_WIDTH, step=SCAN_STEP):
    """Fiber derivative on a uniform ``s`` grid.

    Past the overflow edge the nonlinearity dominates, so the derivative is
    recorded as ``-inf`` there.
    """
    m = int(round(2 * half_width / step))
    s = np.linspace(-half_width, half_width, m + 1)
    d = np.full(s.shape, -np.inf)
    ok = s < _overflow_edge(w, model) - 1e-9
    if np.any(ok):
        with np.errstate(over="ignore", invalid="ignore"):
            d[ok] = fiber_derivative(w, model, s[ok])
    d[np.isnan(d)] = -np.inf
    return s, d


def fiber_maximizer(w, model, half_width=SCAN_HALF_WIDTH, step=SCAN_STEP, tol=1e-10):
    """Unique ``s*`` with ``P(F(w, s*)) = 0`` and the fiber energy maximal there.

    Raises :class:`NoMaximizerError` when the scan sees no + to - change and
    :class:`NonUniquenessError` when it sees more than one.
    """
    if kinetic(w) == 0.0:
        raise NoMaximizerError("state has zero kinetic energy")
    s, d = fiber_scan(w, model, half_width, step)
    sign = np.sign(d)
    nz = np.flatnonzero(sign != 0)
    changes = [(nz[k], nz[k + 1]) for k in range(len(nz) - 1)
               if sign[nz[k]] != sign[nz[k + 1]]]
    down = [(i, j) for i, j in changes if sign[i] > 0]
    if len(changes) > 1:
        raise NonUniquenessError(
            f"fiber derivative changes sign {len(changes)} times on [-{half_width}, {half_width}]",
            brackets=[(float(s[i]), float(s[j])) for i, j in changes])
    if not down:
        raise NoMaximizerError(
            f"fiber derivative has no + to - sign change on [-{half_width}, {half_width}]")
    i, j = down[0]
    lo, hi = float(s[i]), float(s[j])
    if not np.isfinite(d[j]):
        # shrink the bracket to the representable side of the overflow edge
        hi = min(hi, _overflow_edge(w, model) - 1e-9)
        if not fiber_derivative(w, model, hi) < 0:
            raise NoMaximizerError("fiber maximizer lies beyond the overflow edge")
    K = kinetic(w)

    def f(x):
        # scaled so that the tolerance is relative to e^{2s} K
        return fiber_derivative(w, model, x) / (np.exp(2 * x) * K)

    root = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(f(root)) > tol:
        raise NoMaximizerError(f"fiber root not resolved to {tol:g} (|P|/e^2s K = {abs(f(root)):.3g})")
    return float(root)


@dataclass(frozen=True, eq=False)
class Projection:
    state: StatePair
    s_star: float
    rounds: int
    pohozaev: float


def project_pohozaev(w, model, constraint=None, *, tol=1e-6, max_rounds=6,
                     half_width=SCAN_HALF_WIDTH, step=SCAN_STEP, tol_fiber=1e-10,
                     s_max=5.0, full_output=False):
    """Dilate ``w`` onto ``P = 0`` and restore the masses.

    ``constraint`` defaults to the incoming masses.  Rounds repeat until
    ``|P| <= tol * kinetic`` (a state already there is returned as is);
    ``s*`` accumulates over rounds.
    """
    if constraint is None:
        ma, mb = w.masses()
        constraint = MassConstraint(float(np.sqrt(ma)), float(np.sqrt(mb)))
    total = 0.0
    state = w
    P = pohozaev(state, model)
    k = 0
    while abs(P) > tol * kinetic(state):
        k += 1
        if k > max_rounds:
            break
        s_star = fiber_maximizer(state, model, half_width, step, tol_fiber)
        if s_star != 0.0:
            state = project_mass(resample_scaled(state, s_star, s_max), constraint)
        total += s_star
        P = pohozaev(state, model)
    if full_output:
        return Projection(state, total, k, P)
    return state
