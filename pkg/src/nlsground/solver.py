"""Normalized ground states by minimizing the energy over the Pohozaev manifold.

Each start runs a mass-constrained descent flow with a Sobolev preconditioner
``(-Lap + c)^-1``, backtracking so that the energy after mass projection
never rises, and a fiber reprojection onto ``P = 0`` every
``reproject_every`` steps (the energy is unbounded below on the torus, so the
flow has to be held on the manifold).  Once the residual is small a Newton
iteration on the bordered system ``(u, v, lambda1, lambda2)`` finishes the
solve to the discrete critical point.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import (ConfigError, DegenerateStateError, InvalidPathError,
                     NlsError, NonConvergenceError, RangeError)
from .functional import (StatePair, energy, evaluate, fiber_energy, fiber_second_derivative,
                         residual, residual_norm)
from .grid import make_grid, tail_mass_fraction
from .manifold import MassConstraint, project_mass, project_pohozaev
from .nonlinearity import NonlinearityModel
from .verify import check_bounds

TIE_TOL = 1e-10
DESCENT_SLACK = 1e-12
TAIL_LIMIT = 1e-6


@dataclass(frozen=True)
class VerifySettings:
    """Knobs for the verifier, the auditor and the path bound."""

    gn_p: float = 4.0
    gn_cap: float = 1.0
    tm_gamma: float | None = None
    probe_samples: int = 32
    audit_box: float = 4.0
    audit_samples: int = 4096
    axis_margin: float = 0.0
    strict_axes: bool = False
    envelope_eps: float = 0.1
    envelope_q: float = 4.0
    path_s1: float = -3.0
    path_s2: float = 1.0
    path_points: int = 1024

    def __post_init__(self):
        if not self.gn_p > 2:
            raise ConfigError("gn_p must exceed 2")
        if not self.gn_cap > 0:
            raise ConfigError("gn_cap must be positive")
        if self.tm_gamma is not None and not self.tm_gamma > 0:
            raise ConfigError("tm_gamma must be positive")
        if self.probe_samples < 1:
            raise ConfigError("probe_samples must be >= 1")
        if self.path_points < 16:
            raise ConfigError("path_points must be >= 16")
        if not self.path_s1 < self.path_s2:
            raise ConfigError("path_s1 must be below path_s2")


@dataclass(frozen=True)
class SolverConfig:
    """Everything a solve depends on; reruns with equal configs are bitwise equal."""

    constraint: MassConstraint
    model: NonlinearityModel = field(default_factory=NonlinearityModel)
    R: float = 12.0
    n: int = 1024
    spacing: str = "graded"
    grading: float = 2.0
    order: int = 6
    dt0: float = 1.0
    tol_grad: float = 1e-6
    tol_pohozaev: float = 1e-6
    max_iters: int = 400
    reproject_every: int = 1
    n_starts: int = 4
    seed: int = 0
    scan_range: float = 8.0
    scan_step: float = 0.05
    tol_fiber: float = 1e-10
    s_max: float = 5.0
    newton: bool = True
    newton_switch: float = 1e-2
    newton_iters: int = 40
    verify: VerifySettings = field(default_factory=VerifySettings)

    def __post_init__(self):
        checks = [
            (self.dt0 > 0, "dt0 must be positive"),
            (self.tol_grad > 0, "tol_grad must be positive"),
            (self.tol_pohozaev > 0, "tol_pohozaev must be positive"),
            (self.tol_fiber > 0, "tol_fiber must be positive"),
            (self.newton_switch > 0, "newton_switch must be positive"),
            (self.max_iters >= 1, "max_iters must be >= 1"),
            (self.n_starts >= 1, "n_starts must be >= 1"),
            (self.reproject_every >= 1, "reproject_every must be >= 1"),
            (self.newton_iters >= 0, "newton_iters must be >= 0"),
            (self.scan_range > 0 and self.scan_step > 0, "fiber scan range and step must be positive"),
            (self.s_max > 0, "s_max must be positive"),
            (int(self.seed) == self.seed and self.seed >= 0, "seed must be a non-negative integer"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        if self.model.exponential and self.constraint.gamma0 != self.model.gamma0:
            object.__setattr__(self, "constraint", replace(self.constraint, gamma0=self.model.gamma0))
        # validates the grid parameters eagerly
        self.make_grid()

    def make_grid(self):
        return make_grid(self.R, self.n, self.spacing, grading=self.grading, order=self.order)

    def with_(self, **changes):
        return replace(self, **changes)

    def admissibility_warning(self):
        return self.constraint.warning()


@dataclass(eq=False)
class SolveReport:
    """Outcome of :func:`solve_ground_state` (or of wrapping a given state)."""

    state: StatePair
    lambda1: float
    lambda2: float
    energy: float
    kinetic: float
    potential: float
    nl_pairing: float
    pohozaev: float
    pohozaev_residual: float
    grad_residual: float
    fiber_curvature: float
    tail_mass: float
    iterations: int
    start_index: int
    status: str
    trail: list = field(default_factory=list)
    starts: list = field(default_factory=list)
    bound_checks: object = None
    warnings: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def converged(self):
        return self.status == "converged"

    def masses(self):
        return self.state.masses()

    def summary(self):
        return (f"status={self.status} energy={self.energy:.12g} lambda1={self.lambda1:.10g} "
                f"lambda2={self.lambda2:.10g} grad_residual={self.grad_residual:.3g} "
                f"pohozaev_residual={self.pohozaev_residual:.3g} start={self.start_index} "
                f"iterations={self.iterations}")

    def result_dict(self):
        return {k: getattr(self, k) for k in (
            "status", "energy", "lambda1", "lambda2", "kinetic", "potential", "nl_pairing",
            "pohozaev", "pohozaev_residual", "grad_residual", "fiber_curvature", "tail_mass",
            "iterations", "start_index")}


def _status(grad, p_rel, config):
    ok = grad <= config.tol_grad and p_rel <= config.tol_pohozaev
    return "converged" if ok else "not-converged"


def report_from_state(w, config, **extra):
    """Wrap a state in a :class:`SolveReport` with freshly computed diagnostics."""
    model = config.model
    l1, l2, g = residual(w, model)
    vals = evaluate(w, model)
    grad = residual_norm(g)
    p_rel = abs(vals.P) / vals.kinetic if vals.kinetic > 0 else np.inf
    # J~''(0); equals int 4 H~ - grad H~.w on the manifold, negative at a fiber maximum
    curv = fiber_second_derivative(w, model, 0.0)
    tail = max(tail_mass_fraction(w.u), tail_mass_fraction(w.v))
    kw = dict(iterations=0, start_index=-1, status=_status(grad, p_rel, config))
    kw.update(extra)
    return SolveReport(state=w, lambda1=l1, lambda2=l2, energy=vals.J, kinetic=vals.kinetic,
                       potential=vals.potential, nl_pairing=vals.nl_pairing, pohozaev=vals.P,
                       pohozaev_residual=p_rel, grad_residual=grad, fiber_curvature=curv,
                       tail_mass=tail, **kw)


# -- one start ---------------------------------------------------------------

@dataclass
class _Run:
    index: int
    state: StatePair | None = None
    report: SolveReport | None = None
    trail: list = field(default_factory=list)
    iterations: int = 0
    error: str | None = None


def initial_state(grid, constraint, seed, index):
    """Randomized Gaussian bumps ``alpha e^{-beta r^2}`` on the mass torus."""
    rng = np.random.default_rng([int(seed), int(index)])
    r2 = grid.nodes**2
    while True:
        alpha = rng.uniform(0.5, 2.0, 2)
        beta = rng.uniform(0.25, 1.0, 2)
        u = alpha[0] * np.exp(-beta[0] * r2)
        v = alpha[1] * np.exp(-beta[1] * r2)
        u[-1] = v[-1] = 0.0
        w = StatePair.from_arrays(grid, u, v)
        try:
            return project_mass(w, constraint)
        except DegenerateStateError:
            continue


class _Flow:
    def __init__(self, config, grid):
        self.c = config
        self.g = grid
        self.model = config.model
        self.cons = config.constraint
        self.W = grid.weights
        self.L = grid.laplacian_matrix
        self._lu = {}

    def project(self, w):
        c = self.c
        return project_pohozaev(w, self.model, self.cons, tol=c.tol_pohozaev,
                                half_width=c.scan_range, step=c.scan_step,
                                tol_fiber=c.tol_fiber, s_max=c.s_max)

    def monitor(self, it, phase, w, dt=None, j_before=None):
        l1, l2, g = residual(w, self.model)
        vals = evaluate(w, self.model)
        grad = residual_norm(g)
        entry = {"iter": it, "phase": phase, "J": vals.J, "P_abs": abs(vals.P),
                 "grad": grad, "kinetic": vals.kinetic, "lambda1": l1, "lambda2": l2}
        if dt is not None:
            entry["dt"] = dt
        if j_before is not None:
            entry["J_before"] = j_before
        return entry, g, (l1, l2)

    def _solver(self, shift):
        key = float(shift)
        if key not in self._lu:
            n = self.g.n
            A = (-self.L + key * sp.identity(n)).tolil()
            A[n - 1, :] = 0.0
            A[n - 1, n - 1] = 1.0
            self._lu[key] = splu(A.tocsc())
        return self._lu[key]

    def direction(self, w, g, shifts):
        out = []
        for comp, gc, sh in ((w.u.values, g.u.values, shifts[0]), (w.v.values, g.v.values, shifts[1])):
            lu = self._solver(sh)
            dg = lu.solve(gc)
            du = lu.solve(comp)
            # tangent to the mass sphere in the preconditioned metric
            dg -= (self.g.inner(dg, comp) / self.g.inner(du, comp)) * du
            dg[-1] = 0.0
            out.append(dg)
        return out

    def flow(self, w, run):
        c = self.c
        entry, g, lam = self.monitor(0, "init", w)
        run.trail.append(entry)
        scale = max(abs(lam[0]), abs(lam[1]), 1e-3)
        shifts = tuple(max(l_, 0.1 * scale) for l_ in lam)
        dt = c.dt0
        target = c.newton_switch if c.newton else c.tol_grad
        J = entry["J"]
        for it in range(1, c.max_iters + 1):
            run.iterations = it
            if entry["grad"] <= target and (c.newton or entry["P_abs"] <= c.tol_pohozaev * entry["kinetic"]):
                break
            du, dv = self.direction(w, g, shifts)
            accepted = None
            while dt > 1e-14:
                try:
                    trial = project_mass(w.replace(u=w.u.values - dt * du, v=w.v.values - dt * dv), self.cons)
                    Jt = energy(trial, self.model)
                except (RangeError, DegenerateStateError):
                    Jt = np.inf
                if Jt <= J + DESCENT_SLACK:
                    accepted = (trial, Jt)
                    break
                dt *= 0.5
            if accepted is None:
                run.error = "line search stalled"
                return w, entry
            w, j_step = accepted
            if it % c.reproject_every == 0:
                w = self.project(w)
            entry, g, lam = self.monitor(it, "flow", w, dt=dt, j_before=J)
            entry["J_step"] = j_step
            run.trail.append(entry)
            J = entry["J"]
            dt = min(2.0 * dt, 4.0 * c.dt0)
        return w, entry

    def newton(self, w, run):
        """Bordered Newton on ``(-Lap + lambda_i) w_i = H_{w_i}``, ``|w_i|^2 = targets``."""
        c, n, W, L = self.c, self.g.n, self.W, self.L
        a2, b2 = self.cons.a**2, self.cons.b**2
        model = self.model
        u, v = w.u.values.copy(), w.v.values.copy()
        l1, l2, _ = residual(w, model)
        eye = sp.identity(n, format="csr")
        dmask = np.ones(n)
        dmask[-1] = 0.0
        D = sp.diags(dmask)
        last = sp.csr_matrix(([1.0], ([n - 1], [n - 1])), shape=(n, n))

        def F(u, v, l1, l2):
            hu, hv = model.grad_H(u, v)
            fu = -(L @ u) + l1 * u - hu
            fv = -(L @ v) + l2 * v - hv
            fu[-1], fv[-1] = u[-1], v[-1]
            return np.concatenate([fu, fv, [0.5 * (W @ (u * u) - a2), 0.5 * (W @ (v * v) - b2)]])

        def norm(f):
            return np.sqrt(W @ f[:n] ** 2 + W @ f[n:2 * n] ** 2 + f[-2] ** 2 + f[-1] ** 2)

        f = F(u, v, l1, l2)
        it0 = run.iterations
        for k in range(1, c.newton_iters + 1):
            huu, huv, hvv = model.hess_H(u, v)
            Auu = D @ (-L + l1 * eye - sp.diags(huu)) + last
            Avv = D @ (-L + l2 * eye - sp.diags(hvv)) + last
            Auv = D @ sp.diags(-huv)
            cu = sp.csr_matrix((u * dmask)[:, None])
            cv = sp.csr_matrix((v * dmask)[:, None])
            J = sp.bmat([[Auu, Auv, cu, None],
                         [Auv, Avv, None, cv],
                         [sp.csr_matrix((W * u)[None, :]), None, None, None],
                         [None, sp.csr_matrix((W * v)[None, :]), None, None]], format="csc")
            step = spsolve(J, -f)
            if not np.all(np.isfinite(step)):
                run.error = "singular Newton system"
                break
            f0 = norm(f)
            t = 1.0
            while t > 1e-4:
                cand = (u + t * step[:n], v + t * step[n:2 * n], l1 + t * step[-2], l2 + t * step[-1])
                try:
                    fc = F(*cand)
                except RangeError:
                    fc = None
                if fc is not None and norm(fc) < (1 - 0.25 * t) * f0:
                    break
                t *= 0.5
            else:
                break
            u, v, l1, l2 = cand
            f = fc
            ws = project_mass(StatePair.from_arrays(self.g, u, v), self.cons)
            entry, _, _ = self.monitor(it0 + k, "newton", ws, dt=t)
            run.trail.append(entry)
            run.iterations = it0 + k
            if entry["grad"] <= 1e-3 * c.tol_grad or np.max(np.abs(step)) < 1e-14:
                break
        return project_mass(StatePair.from_arrays(self.g, u, v), self.cons)

    def run(self, index, start=None):
        run = _Run(index)
        try:
            w = start if start is not None else initial_state(self.g, self.cons, self.c.seed, index)
            w = self.project(project_mass(w, self.cons))
            w, entry = self.flow(w, run)
            if self.c.newton and entry["grad"] <= self.c.newton_switch:
                w = self.newton(w, run)
            run.state = w
            run.report = report_from_state(w, self.c, iterations=run.iterations, start_index=index,
                                           trail=run.trail)
        except NlsError as exc:
            run.error = f"{type(exc).__name__}: {exc}"
        return run


def _tail_note(report, config):
    if report.tail_mass <= TAIL_LIMIT:
        return None
    return (f"{report.tail_mass:.3g} of the mass lies in the outer 10% of [0, R={config.R:g}]; "
            "the truncation radius may be too small")


def solve_ground_state(config, initial=None, attach_bounds=True):
    """Multi-start solve; the winner is the converged run of least energy.

    ``initial`` (a state on the config's grid) replaces the first random start.
    Raises :class:`NonConvergenceError` carrying the best trail when no start
    converges.
    """
    t0 = time.perf_counter()
    grid = config.make_grid()
    notes = []
    msg = config.admissibility_warning()
    if msg:
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    flow = _Flow(config, grid)
    runs = []
    for i in range(config.n_starts):
        start = initial if (i == 0 and initial is not None) else None
        if start is not None and not start.grid.same_as(grid):
            raise ConfigError("initial state lives on a different grid")
        runs.append(flow.run(i, start))

    starts = [{"index": r.index,
               "status": r.report.status if r.report else "failed",
               "energy": r.report.energy if r.report else None,
               "grad_residual": r.report.grad_residual if r.report else None,
               "iterations": r.iterations, "error": r.error} for r in runs]
    best = None
    for r in runs:
        if r.report is None or not r.report.converged:
            continue
        if best is None or r.report.energy < best.report.energy - TIE_TOL:
            best = r
    if best is None:
        scored = [r for r in runs if r.report is not None]
        fallback = min(scored, key=lambda r: r.report.grad_residual) if scored else runs[0]
        detail = "; ".join(s["status"] + (": " + s["error"] if s["error"] else "") for s in starts)
        hint = _tail_note(fallback.report, config) if fallback.report else None
        if hint:
            fallback.report.warnings = notes + [hint]
        raise NonConvergenceError(f"no start converged ({detail})" + (f"; {hint}" if hint else ""),
                                  trail=fallback.trail, best=fallback.report)
    rep = best.report
    rep.starts = starts
    hint = _tail_note(rep, config)
    if hint:
        warnings.warn(hint, stacklevel=2)
        notes.append(hint)
    rep.warnings = notes
    if attach_bounds:
        rep.bound_checks = check_bounds(rep, config)
    rep.elapsed = time.perf_counter() - t0
    return rep


# -- path bound and sweeps ---------------------------------------------------

def mountain_pass_upper_bound(w0, model, s1, s2, m=1024):
    """Maximum of the energy along the fiber path ``t -> F(w0, (1-t) s1 + t s2)``."""
    if m < 16:
        raise InvalidPathError(f"path resolution m={m} < 16")
    if not s1 < s2:
        raise InvalidPathError("path needs s1 < s2")
    e1 = fiber_energy(w0, model, s1)
    e2 = fiber_energy(w0, model, s2)
    if not e1 > 0:
        raise InvalidPathError(f"path start has J = {e1:.6g}, needs J > 0")
    if not e2 < 0:
        raise InvalidPathError(f"path end has J = {e2:.6g}, needs J < 0")
    t = np.arange(m + 1) / m
    return float(np.max(fiber_energy(w0, model, (1 - t) * s1 + t * s2)))


@dataclass
class SweepResult:
    rows: list
    slope: float
    intercept: float
    partial: bool
    reports: list = field(default_factory=list, repr=False)

    def first_positive_mu(self):
        """Smallest swept mu with both multipliers positive (None if none)."""
        for row in self.rows:
            if row["converged"] and row["lambda1"] > 0 and row["lambda2"] > 0:
                return row["mu"]
        return None


def sweep_mu(config, mu_values, warm_starts=1):
    """Solve along ascending ``mu``, warm-starting each solve from the previous one.

    After the first value only ``warm_starts`` starts are run.  The slope is the
    least-squares fit of ``log m`` against ``log mu`` over converged rows.
    """
    mus = [float(m) for m in mu_values]
    if len(mus) < 4:
        raise ConfigError("sweep needs at least 4 values of mu")
    if any(b <= a for a, b in zip(mus, mus[1:])) or mus[0] <= 0:
        raise ConfigError("mu values must be positive and strictly ascending")
    rows, reports = [], []
    prev = None
    for k, mu in enumerate(mus):
        cfg = config.with_(model=config.model.with_mu(mu))
        if prev is not None:
            cfg = cfg.with_(n_starts=warm_starts)
        try:
            rep = solve_ground_state(cfg, initial=prev, attach_bounds=False)
            prev = project_mass(rep.state, cfg.constraint)
            rows.append({"mu": mu, "energy": rep.energy, "lambda1": rep.lambda1,
                         "lambda2": rep.lambda2, "converged": True})
        except NonConvergenceError as exc:
            rep = exc.best
            rows.append({"mu": mu, "energy": rep.energy if rep else float("nan"),
                         "lambda1": rep.lambda1 if rep else float("nan"),
                         "lambda2": rep.lambda2 if rep else float("nan"), "converged": False})
        reports.append(rep)
    ok = [r for r in rows if r["converged"] and r["energy"] > 0]
    if len(ok) >= 2:
        slope, intercept = np.polyfit(np.log([r["mu"] for r in ok]),
                                      np.log([r["energy"] for r in ok]), 1)
    else:
        slope = intercept = float("nan")
    partial = any(not r["converged"] for r in rows)
    return SweepResult(rows, float(slope), float(intercept), partial, reports)


# -- estimator facade ----------------------------------------------------------

class GroundStateSolver(TransformerMixin, BaseEstimator):
    """Estimator-style wrapper around :func:`solve_ground_state`.

    ``fit`` ignores ``X`` unless it is an ``(n, 2)`` array of initial profiles;
    ``transform`` maps ``(n, 2)`` profiles onto the Pohozaev manifold of the
    fitted constraint; ``score`` is minus the ground-state energy.
    """

    def __init__(self, a=1.0, b=1.0, kind="pure_power", mu=1.0, sigma=6.0, gamma0=1.0,
                 R=12.0, n=1024, order=6, tol_grad=1e-6, tol_pohozaev=1e-6,
                 max_iters=400, n_starts=4, seed=0):
        self.a = a
        self.b = b
        self.kind = kind
        self.mu = mu
        self.sigma = sigma
        self.gamma0 = gamma0
        self.R = R
        self.n = n
        self.order = order
        self.tol_grad = tol_grad
        self.tol_pohozaev = tol_pohozaev
        self.max_iters = max_iters
        self.n_starts = n_starts
        self.seed = seed

    def make_config(self):
        model = NonlinearityModel(self.kind, self.mu, self.sigma, self.gamma0)
        return SolverConfig(constraint=MassConstraint(self.a, self.b), model=model,
                            R=self.R, n=self.n, order=self.order, tol_grad=self.tol_grad,
                            tol_pohozaev=self.tol_pohozaev, max_iters=self.max_iters,
                            n_starts=self.n_starts, seed=self.seed)

    def _profiles(self, X, grid):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape != (grid.n, 2):
            raise ValueError(f"expected profiles of shape ({grid.n}, 2), got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("profiles contain non-finite values")
        return StatePair.from_arrays(grid, X[:, 0], X[:, 1])

    def fit(self, X=None, y=None):
        config = self.make_config()
        grid = config.make_grid()
        initial = None if X is None else project_mass(self._profiles(X, grid), config.constraint)
        rep = solve_ground_state(config, initial=initial)
        self.config_ = config
        self.grid_ = grid
        self.report_ = rep
        self.state_ = rep.state
        self.energy_ = rep.energy
        self.lambda1_ = rep.lambda1
        self.lambda2_ = rep.lambda2
        self.r_ = grid.nodes
        return self

    def _check_fitted(self):
        if not hasattr(self, "report_"):
            raise AttributeError("GroundStateSolver is not fitted yet; call fit first")

    def transform(self, X):
        self._check_fitted()
        w = project_mass(self._profiles(X, self.grid_), self.config_.constraint)
        out = project_pohozaev(w, self.config_.model, self.config_.constraint,
                               tol=self.config_.tol_pohozaev)
        return np.column_stack([out.u.values, out.v.values])

    def score(self, X=None, y=None):
        self._check_fitted()
        return -self.energy_

