"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are printed
even when output capture is on.
"""

import math
import time

import numpy as np
import pytest

from nlsground import (MassConstraint, NonlinearityModel, StatePair, audit_hypotheses,
                       check_bounds, fiber_derivative, fiber_energy, fiber_maximizer, gaussian_pair,
                       grad_norm_sq, make_grid, mass, mountain_pass_upper_bound, project_mass,
                       resample_scaled, solve_ground_state, tm_integral)
from nlsground.functional import kinetic
from nlsground.verify import random_torus_state

from cases import MATRIX, coupled_config, power_config

FIBER_MAX = 3 * math.pi / 32
S_STAR = 0.5 * math.log(3 / 16)


@pytest.fixture
def verdict(capsys):
    def emit(number, title, checks):
        """``checks`` is a list of ``(label, ok, detail)``."""
        ok = all(c[1] for c in checks)
        failed = [f"{c[0]} ({c[2]})" for c in checks if not c[1]]
        detail = "; ".join(failed) if failed else "; ".join(c[2] for c in checks[:3])
        with capsys.disabled():
            print(f"\ncriterion {number} {title}: {'PASS' if ok else 'FAIL'} | {detail}")
        assert ok, failed
    return emit


def rel(x, ref):
    return abs(x - ref) / abs(ref)


def five_point(f, s, h=3e-4):
    return (f(s - 2 * h) - 8 * f(s - h) + 8 * f(s + h) - f(s + 2 * h)) / (12 * h)


def test_criterion_1_gaussian_oracles(verdict):
    t0 = time.perf_counter()
    g = make_grid(12.0, 2048)
    u = g.sample(lambda r: np.exp(-r * r / 2))
    checks = [("mass", rel(mass(u), math.pi) <= 1e-4, f"mass rel err {rel(mass(u), math.pi):.1e}"),
              ("kinetic", rel(grad_norm_sq(u), math.pi) <= 1e-4,
               f"kinetic rel err {rel(grad_norm_sq(u), math.pi):.1e}")]
    for p in (2, 3, 4, 6, 8):
        e = rel(g.integrate_values(np.abs(u.values) ** p), 2 * math.pi / p)
        checks.append((f"L{p}", e <= 1e-4, f"L{p} rel err {e:.1e}"))
    dt = time.perf_counter() - t0
    checks.append(("runtime", dt < 1.0, f"{dt:.3f} s"))
    verdict(1, "Gaussian oracle suite", checks)


def test_criterion_2_fiber_calculus(verdict):
    t0 = time.perf_counter()
    g = make_grid(12.0, 2048)
    w = gaussian_pair(g)
    model = NonlinearityModel("pure_power", 1.0, 6.0)
    s_star = fiber_maximizer(w, model)
    top = fiber_energy(w, model, s_star)
    s = np.linspace(-2.0, 2.0, 401)
    fd = five_point(lambda x: fiber_energy(w, model, x), s)
    fd_err = float(np.max(np.abs(fd - fiber_derivative(w, model, s))))
    dt = time.perf_counter() - t0
    verdict(2, "fiber calculus", [
        ("maximizer", abs(s_star - S_STAR) <= 1e-6, f"|s*-ln(3/16)/2| = {abs(s_star - S_STAR):.1e}"),
        ("maximum", abs(top - FIBER_MAX) <= 1e-3, f"|max-3pi/32| = {abs(top - FIBER_MAX):.1e}"),
        ("derivative", fd_err <= 1e-5, f"max |FD - derivative| = {fd_err:.1e} on [-2,2]"),
        ("runtime", dt < 5.0, f"{dt:.2f} s"),
    ])


def test_criterion_3_scaling_identities(verdict):
    g = make_grid(12.0, 2048)
    w = gaussian_pair(g, 1.0, 0.7, 0.4)
    K = kinetic(w)
    m0 = np.array(w.masses())

    def lxi(x, xi):
        return g.integrate_values(np.abs(x.u.values) ** xi + np.abs(x.v.values) ** xi)

    base = {xi: lxi(w, xi) for xi in (2, 4, 6)}
    worst = {"mass": 0.0, "kinetic": 0.0, "Lxi": 0.0}
    for s in np.linspace(-2.0, 2.0, 17):
        x = resample_scaled(w, s)
        worst["mass"] = max(worst["mass"], float(np.max(np.abs(np.array(x.masses()) / m0 - 1))))
        worst["kinetic"] = max(worst["kinetic"], rel(kinetic(x), np.exp(2 * s) * K))
        for xi in (2, 4, 6):
            worst["Lxi"] = max(worst["Lxi"], rel(lxi(x, xi), np.exp((xi - 2) * s) * base[xi]))
    verdict(3, "scaling identities",
            [(k, v <= 2e-3, f"{k} worst rel err {v:.1e}") for k, v in worst.items()])


@pytest.mark.parametrize("case", ["pure_power", "coupled_exp"])
def test_criterion_4_solver_stationarity(verdict, case):
    config = power_config() if case == "pure_power" else coupled_config()
    assert config.n == 1024
    t0 = time.perf_counter()
    rep = solve_ground_state(config)
    dt = time.perf_counter() - t0
    again = solve_ground_state(config)
    a, b = np.sqrt(rep.masses())
    mass_err = max(abs(a - config.constraint.a), abs(b - config.constraint.b))
    same = (np.array_equal(rep.state.stacked(), again.state.stacked())
            and rep.result_dict() == again.result_dict() and rep.trail == again.trail)
    verdict(f"4 [{case}]", "solver stationarity", [
        ("status", rep.status == "converged", rep.status),
        ("grad", rep.grad_residual <= 1e-6, f"grad residual {rep.grad_residual:.1e}"),
        ("pohozaev", abs(rep.pohozaev) <= 1e-6 * rep.kinetic, f"|P|/K {rep.pohozaev_residual:.1e}"),
        ("masses", mass_err <= 1e-10, f"mass err {mass_err:.1e}"),
        ("lambdas", rep.lambda1 > 0 and rep.lambda2 > 0,
         f"lambda = ({rep.lambda1:.6g}, {rep.lambda2:.6g})"),
        ("deterministic", same, "reruns bitwise identical" if same else "reruns differ"),
        ("runtime", dt < 60.0, f"{dt:.2f} s"),
    ])


def test_criterion_5_mu_rate(verdict, sweeps):
    checks = []
    total = 0.0
    for sigma, target, tol in ((6.0, -1.0, 0.02), (8.0, -0.5, 0.05)):
        res, _, dt = sweeps[sigma]
        total += dt
        assert target == pytest.approx(-2 / (sigma - 4))
        checks.append((f"sigma={sigma:g}", not res.partial and abs(res.slope - target) <= tol,
                       f"sigma={sigma:g} slope {res.slope:.6f} (target {target})"
                       + (" partial" if res.partial else "")))
    checks.append(("runtime", total < 300.0, f"{total:.1f} s"))
    verdict(5, "mu-sweep rate", checks)


def test_criterion_6_level_bounds(verdict, solved, sweeps):
    reports = [(name, *solved(name)) for name in sorted(MATRIX)]
    for sigma, (res, config, _) in sweeps.items():
        for row, rep in zip(res.rows, res.reports):
            if rep.converged:
                reports.append((f"sweep sigma={sigma:g} mu={row['mu']:g}", rep,
                                config.with_(model=config.model.with_mu(row["mu"]))))
    names = ("potential_bound", "gradient_bound", "multiplier_bound", "tm_window")
    checks = []
    margins = {k: np.inf for k in names}
    for label, rep, config in reports:
        b = check_bounds(rep, config)
        for k in names:
            r = b[k]
            if r.applicable:
                margins[k] = min(margins[k], r.margin)
                checks.append((f"{label}/{k}", r.passed, f"{label} {k} margin {r.margin:.3g}"))
    applied = len(checks)
    summary = ", ".join(f"{k} min margin {v:.3g}" for k, v in margins.items())
    ok = all(c[1] for c in checks)
    verdict(6, "level bounds", [c for c in checks if not c[1]]
            + [("summary", ok, f"{len(reports)} reports, {applied} checks; {summary}")])


def test_criterion_7_trudinger_moser(verdict, rng):
    g = make_grid(12.0, 2048)
    w = StatePair.from_arrays(g, np.exp(-g.nodes**2 / 2), np.zeros(g.n))
    series = math.pi * sum(1.0 / (k * math.factorial(k)) for k in range(1, 40))
    val = tm_integral(w, 1.0)
    gammas = np.linspace(0.1, 4.0, 40)
    grid = make_grid(12.0, 512, "graded")
    monotone = 0
    for _ in range(20):
        x = random_torus_state(grid, MassConstraint(*rng.uniform(0.3, 1.5, 2)), rng)
        vals = np.array([tm_integral(x, gm) for gm in gammas])
        monotone += bool(np.all(np.diff(vals) > 0))
    verdict(7, "Trudinger-Moser", [
        ("value", abs(val - series) <= 1e-3, f"tm = {val:.10f} vs {series:.10f}"),
        ("monotone", monotone == 20, f"monotone in gamma on {monotone}/20 states"),
    ])


def test_criterion_8_auditor(verdict):
    add = NonlinearityModel("additive_exp", 1.0, 6.0, 1.0)
    rep = audit_hypotheses(add)
    h3 = rep.verdicts["H3"]
    w = h3.witnesses[0] if h3.witnesses else None
    witness_ok = w is not None and w["v"] == 0.0 and abs(add.grad_H(w["u"], 0.0)[0]) > 0 \
        and add.grad_H(w["u"], 0.0)[0] == pytest.approx(w["lhs"], rel=1e-14)

    pp = NonlinearityModel("pure_power", 1.0, 6.0)
    pp_rep = audit_hypotheses(pp)
    pts = np.random.default_rng(0).uniform(-4, 4, (4096, 2))
    identity = pp.theta == pp.sigma and np.array_equal(
        pp.theta * pp.H(pts[:, 0], pts[:, 1]), pp.pairing(pts[:, 0], pts[:, 1]))

    ce = NonlinearityModel("coupled_exp", 1.0, 6.0, 1.0)
    ce_rep = audit_hypotheses(ce)
    rho = np.hypot(pts[:, 0], pts[:, 1]) ** 2
    f = ce.sigma - 2 + 2 * ce.gamma0 * rho
    h5_direct = bool(np.all(f * (ce.sigma + 2 * ce.gamma0 * rho) >= 4 * f))

    rng = np.random.default_rng(1)
    pts = rng.uniform(-2, 2, (4000, 2))
    pts = pts[np.min(np.abs(pts), axis=1) > 0.05][:1000]
    u, v = pts[:, 0], pts[:, 1]
    worst = 0.0
    for model in (pp, ce, add):
        hu, hv = model.grad_H(u, v)
        hx, hy = 1e-6 * np.maximum(1, np.abs(u)), 1e-6 * np.maximum(1, np.abs(v))
        fu = (model.H(u + hx, v) - model.H(u - hx, v)) / (2 * hx)
        fv = (model.H(u, v + hy) - model.H(u, v - hy)) / (2 * hy)
        worst = max(worst, float(np.max(np.abs(hu - fu) / np.abs(hu))),
                    float(np.max(np.abs(hv - fv) / np.abs(hv))))
    verdict(8, "auditor", [
        ("additive H3", h3.verdict == "fail" and witness_ok,
         f"additive_exp H3 {h3.verdict.upper()} witness {(w['u'], w['v']) if w else None}"),
        ("pure_power H2", pp_rep.verdicts["H2"].verdict == "pass" and identity,
         f"pure_power H2 {pp_rep.verdicts['H2'].verdict.upper()}, theta*H == grad H.w exactly"),
        ("coupled H5", ce_rep.verdicts["H5"].verdict == "pass" and h5_direct,
         f"coupled_exp H5 {ce_rep.verdicts['H5'].verdict.upper()}"),
        ("gradient", worst <= 1e-6 and len(u) == 1000, f"grad vs FD worst rel {worst:.1e} on 10^3 points"),
    ])


def test_criterion_9_path_bound(verdict, solved):
    g = make_grid(12.0, 2048)
    model = NonlinearityModel("pure_power", 1.0, 6.0)
    top = mountain_pass_upper_bound(gaussian_pair(g), model, -3.0, 1.0, m=1024)
    rep, config = solved("power_sym")
    w0 = project_mass(gaussian_pair(config.make_grid()), config.constraint)
    from_gauss = mountain_pass_upper_bound(w0, config.model, -3.0, 3.0, m=1024)
    from_state = mountain_pass_upper_bound(rep.state, config.model, -3.0, 1.0, m=1024)
    verdict(9, "mountain-pass path bound", [
        ("closed form", abs(top - FIBER_MAX) <= 1e-4, f"|path max - 3pi/32| = {abs(top - FIBER_MAX):.1e}"),
        ("dominance (Gaussian path)", from_gauss >= rep.energy - 1e-6,
         f"path max {from_gauss:.8g} >= energy {rep.energy:.8g}"),
        ("dominance (ground-state path)", from_state >= rep.energy - 1e-6,
         f"path max {from_state:.8g} - energy = {from_state - rep.energy:.1e}"),
    ])
