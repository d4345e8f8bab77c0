"""Coupling nonlinearities ``H(u, v)`` and a sampling auditor for (H1)-(H7).

Three models are built in, all written in terms of ``rho = u^2 + v^2`` and
``p = sigma/2``:

* ``pure_power``   ``H = mu * rho^p``
* ``coupled_exp``  ``H = mu * |u v|^p * exp(gamma0 * rho)``
* ``additive_exp`` ``H = mu * (|u|^sigma + |v|^sigma) * exp(gamma0 * rho)``

For the exponential models ``grad H . w = (sigma + 2 gamma0 rho) H`` and
``H~ = (sigma - 2 + 2 gamma0 rho) H``; ``H~`` is always evaluated in that
factored form.  Everything accepts scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import ConfigError, RangeError

KINDS = ("pure_power", "coupled_exp", "additive_exp")
EXP_LIMIT = 700.0


@dataclass(frozen=True)
class NonlinearityModel:
    """Parameterized coupling ``H``.

    ``theta`` defaults to ``sigma`` (the Ambrosetti-Rabinowitz constant is
    exact for these models) and ``tau`` to ``(sigma + 2)/2``, which lies
    strictly between 3 and ``sigma - 1`` so the small-``|w|`` condition holds
    as a little-o.  ``mu = 0`` is accepted and switches the potential off.
    """

    kind: str = "pure_power"
    mu: float = 1.0
    sigma: float = 6.0
    gamma0: float = 1.0
    theta: float | None = None
    tau: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind '{self.kind}' (expected one of {KINDS})")
        if self.theta is None:
            object.__setattr__(self, "theta", float(self.sigma))
        if self.tau is None:
            object.__setattr__(self, "tau", (self.sigma + 2.0) / 2.0)
        checks = [
            (self.mu >= 0, f"mu must be >= 0, got {self.mu}"),
            (self.sigma > 4, f"sigma must be > 4, got {self.sigma}"),
            (self.gamma0 > 0, f"gamma0 must be > 0, got {self.gamma0}"),
            (self.theta > 4, f"theta must be > 4, got {self.theta}"),
            (self.tau > 3, f"tau must be > 3, got {self.tau}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @property
    def exponential(self):
        return self.kind != "pure_power"

    def params(self):
        return {"kind": self.kind, "mu": self.mu, "sigma": self.sigma,
                "gamma0": self.gamma0, "theta": self.theta, "tau": self.tau}

    def with_mu(self, mu):
        return NonlinearityModel(self.kind, mu, self.sigma, self.gamma0, self.theta, self.tau)

    # -- guarded building blocks -------------------------------------------

    def _exp(self, rho):
        if not self.exponential:
            return 1.0
        arg = self.gamma0 * rho
        if np.max(arg, initial=0.0) > EXP_LIMIT:
            raise RangeError(
                f"gamma0*|w|^2 = {float(np.max(arg)):.4g} exceeds {EXP_LIMIT}; "
                "reduce the step or the dilation")
        return np.exp(arg)

    def _odd(self, x, k):
        """``|x|^(k-1) * x``, i.e. the odd power ``x|x|^(k-1)``."""
        return np.abs(x) ** (k - 1.0) * x

    def H(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        rho = u * u + v * v
        p = self.sigma / 2.0
        if self.kind == "pure_power":
            return self.mu * rho**p
        e = self._exp(rho)
        if self.kind == "coupled_exp":
            return self.mu * np.abs(u * v) ** p * e
        return self.mu * (np.abs(u) ** self.sigma + np.abs(v) ** self.sigma) * e

    def grad_H(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        rho = u * u + v * v
        s, g = self.sigma, self.gamma0
        p = s / 2.0
        if self.kind == "pure_power":
            c = s * self.mu * rho ** (p - 1.0)
            return c * u, c * v
        e = self._exp(rho)
        if self.kind == "coupled_exp":
            fu = self._f_coupled(u)
            fv = self._f_coupled(v)
            return (self.mu * e * np.abs(v) ** p * fu,
                    self.mu * e * np.abs(u) ** p * fv)
        S = np.abs(u) ** s + np.abs(v) ** s
        return (self.mu * e * (s * self._odd(u, s - 1.0) + 2 * g * u * S),
                self.mu * e * (s * self._odd(v, s - 1.0) + 2 * g * v * S))

    def _f_coupled(self, x):
        # d/dx (|x|^p e^{g x^2}) / e^{g x^2}
        p = self.sigma / 2.0
        return self._odd(x, p - 1.0) * (p + 2 * self.gamma0 * x * x)

    def hess_H(self, u, v):
        """Second derivatives ``(H_uu, H_uv, H_vv)``."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        rho = u * u + v * v
        s, g, mu = self.sigma, self.gamma0, self.mu
        p = s / 2.0
        if self.kind == "pure_power":
            a = s * mu * rho ** (p - 1.0)
            b = s * mu * (p - 1.0) * 2.0 * rho ** (p - 2.0)
            return a + b * u * u, b * u * v, a + b * v * v
        e = self._exp(rho)
        if self.kind == "coupled_exp":
            fu, fv = self._f_coupled(u), self._f_coupled(v)

            def fprime(x):
                ax = np.abs(x)
                return p * (p - 1.0) * ax ** (p - 2.0) + 2 * g * (p + 1.0) * ax**p

            huu = mu * e * np.abs(v) ** p * (2 * g * u * fu + fprime(u))
            hvv = mu * e * np.abs(u) ** p * (2 * g * v * fv + fprime(v))
            return huu, mu * e * fu * fv, hvv
        S = np.abs(u) ** s + np.abs(v) ** s
        su = s * self._odd(u, s - 1.0)
        sv = s * self._odd(v, s - 1.0)
        huu = mu * e * (2 * g * u * (su + 2 * g * u * S)
                        + s * (s - 1.0) * np.abs(u) ** (s - 2.0) + 2 * g * S + 2 * g * u * su)
        hvv = mu * e * (2 * g * v * (sv + 2 * g * v * S)
                        + s * (s - 1.0) * np.abs(v) ** (s - 2.0) + 2 * g * S + 2 * g * v * sv)
        huv = mu * e * (2 * g * v * (su + 2 * g * u * S) + 2 * g * u * sv)
        return huu, huv, hvv

    def pairing(self, u, v):
        """``grad H(w) . w``."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind == "pure_power":
            return self.sigma * self.H(u, v)
        rho = u * u + v * v
        return (self.sigma + 2 * self.gamma0 * rho) * self.H(u, v)

    def tilde_H(self, u, v):
        """``H~ = grad H . w - 2 H`` in factored form."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind == "pure_power":
            return (self.sigma - 2.0) * self.H(u, v)
        rho = u * u + v * v
        return (self.sigma - 2.0 + 2 * self.gamma0 * rho) * self.H(u, v)

    def tilde_pairing(self, u, v):
        """``grad H~(w) . w``."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind == "pure_power":
            return self.sigma * (self.sigma - 2.0) * self.H(u, v)
        rho = u * u + v * v
        gr = 2 * self.gamma0 * rho
        return ((self.sigma + gr) * (self.sigma - 2.0 + gr) + 2 * gr) * self.H(u, v)

    def log_abs_grad_u(self, u, v):
        """``log |H_u|`` without forming ``exp(gamma0 rho)`` (exponential kinds)."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        rho = u * u + v * v
        s, g, p = self.sigma, self.gamma0, self.sigma / 2.0
        if self.kind == "pure_power":
            with np.errstate(divide="ignore"):
                return np.log(s * self.mu * rho ** (p - 1.0) * np.abs(u))
        if self.kind == "coupled_exp":
            pref = np.abs(v) ** p * np.abs(self._f_coupled(u))
        else:
            S = np.abs(u) ** s + np.abs(v) ** s
            pref = np.abs(s * self._odd(u, s - 1.0) + 2 * g * u * S)
        with np.errstate(divide="ignore"):
            return np.log(self.mu * pref) + g * rho


def eval_H(model, u, v):
    return model.H(u, v)


def eval_grad_H(model, u, v):
    return model.grad_H(u, v)


def eval_tilde_H(model, u, v):
    return model.tilde_H(u, v)


# -- auditor ---------------------------------------------------------------

PASS, FAIL, NA = "pass", "fail", "not-applicable"
HYPOTHESES = ("H1", "H2", "H3", "H4", "H5", "H6", "H7")

H3_NOTE = ("H3 is audited as the axis condition H_u(u,0)=0 for all u and "
           "H_v(0,v)=0 for all v.")


@dataclass
class Verdict:
    name: str
    verdict: str
    detail: str = ""
    witnesses: list = field(default_factory=list)

    def as_dict(self):
        return {"name": self.name, "verdict": self.verdict, "detail": self.detail,
                "witnesses": self.witnesses}


@dataclass
class AuditReport:
    """Per-hypothesis verdicts plus the fitted growth envelope."""

    model: dict
    domain: dict
    verdicts: dict
    envelope: dict
    notes: list = field(default_factory=list)

    @property
    def failed(self):
        return [k for k, v in self.verdicts.items() if v.verdict == FAIL]

    @property
    def passed(self):
        return not self.failed

    def as_dict(self):
        return {"model": self.model, "domain": self.domain,
                "verdicts": {k: v.as_dict() for k, v in self.verdicts.items()},
                "envelope": self.envelope, "notes": self.notes}

    def table(self):
        lines = [f"{'hyp':<4} {'verdict':<15} detail"]
        for name in HYPOTHESES:
            v = self.verdicts[name]
            lines.append(f"{name:<4} {v.verdict.upper():<15} {v.detail}")
            for w in v.witnesses[:1]:
                lines.append(f"{'':<4} {'witness':<15} (u, v)=({w['u']:.6g}, {w['v']:.6g}) "
                             f"lhs={w['lhs']:.6g} rhs={w['rhs']:.6g}")
        env = self.envelope
        lines.append(f"envelope: kappa_eps={env['kappa']:.6g} (eps={env['eps']}, "
                     f"gamma={env['gamma']:.4g}, q={env['q']}, tau={env['tau']:.4g}) "
                     f"holds={env['holds']}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def _witness(u, v, lhs, rhs):
    return {"u": float(u), "v": float(v), "lhs": float(lhs), "rhs": float(rhs)}


def _witnesses(mask, u, v, lhs, rhs, limit=5):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    # points nearest |w| = 1 first, then the positive quadrant, for readable witnesses
    order = np.lexsort((-(u[idx] + v[idx]), np.abs(np.hypot(u[idx], v[idx]) - 1.0)))
    return [_witness(u[i], v[i], lhs[i], rhs[i]) for i in idx[order[:limit]]]


def _verdict(name, bad, u, v, lhs, rhs, detail):
    if np.any(bad):
        return Verdict(name, FAIL, detail + f"; {int(np.sum(bad))} violations",
                       _witnesses(bad, u, v, lhs, rhs))
    return Verdict(name, PASS, detail)


def audit_hypotheses(model, box=4.0, n_samples=4096, axis_margin=0.0, *,
                     strict_axes=False, seed=0, eps=0.1, q=4.0, gamma=None,
                     rtol=1e-12):
    """Sample ``[-box, box]^2`` and test (H1)-(H7) pointwise or along shells.

    ``axis_margin`` excludes points with ``min(|u|, |v|) <= axis_margin`` from
    the axis-sensitive checks (positivity in H2, H4, H6).  With a zero margin
    the sample set is augmented with points on the coordinate axes, and
    ``strict_axes`` feeds those axis points to the axis-sensitive checks too.
    Asking for ``strict_axes`` while a positive margin hides the axes makes H4
    and H6 not-applicable.
    """
    M = float(box)
    if not M > 0:
        raise ConfigError("audit box must be positive")
    if n_samples < 1000:
        raise ConfigError("audit needs at least 1000 samples")
    if not 0 <= axis_margin < M:
        raise ConfigError("axis margin must satisfy 0 <= margin < box")
    if model.exponential and 2 * model.gamma0 * M * M > EXP_LIMIT:
        raise ConfigError(
            f"audit box {M} overflows the exponential guard for gamma0={model.gamma0}")
    gamma = 1.1 * model.gamma0 if gamma is None else gamma

    pts = qmc.Halton(d=2, scramble=True, seed=seed).random(n_samples) * 2 * M - M
    u, v = pts[:, 0], pts[:, 1]
    if axis_margin == 0.0:
        t = np.linspace(-M, M, 41)
        t = np.concatenate([t[t != 0.0], [1.0, -1.0]] if M >= 1 else [t[t != 0.0]])
        z = np.zeros_like(t)
        u = np.concatenate([u, t, z])
        v = np.concatenate([v, z, t])
    nz = np.hypot(u, v) > 0
    u, v = u[nz], v[nz]
    off_axis = np.minimum(np.abs(u), np.abs(v)) > axis_margin
    if strict_axes and axis_margin == 0.0:
        off_axis = np.ones_like(off_axis)
    if not np.any(off_axis):
        raise ConfigError("no sample points left after axis-margin filtering")

    H = model.H(u, v)
    Hu, Hv = model.grad_H(u, v)
    pair = model.pairing(u, v)
    Ht = model.tilde_H(u, v)
    Htp = model.tilde_pairing(u, v)
    absw = np.hypot(u, v)
    slack = rtol * (np.abs(pair) + np.abs(H) + 1e-300)

    verdicts = {}
    verdicts["H1"] = _audit_h1(model, M)

    th = model.theta
    bad_ineq = th * H > pair + slack
    bad_pos = off_axis & ~(H > 0)
    lhs = np.where(bad_pos & ~bad_ineq, 0.0, th * H)
    rhs = np.where(bad_pos & ~bad_ineq, H, pair)
    verdicts["H2"] = _verdict("H2", bad_ineq | bad_pos, u, v, lhs, rhs,
                              f"0 < theta*H <= grad H.w with theta={th:g}")

    t = np.linspace(-M, M, 201)
    t = np.concatenate([t, [1.0]]) if M >= 1 else t
    z = np.zeros_like(t)
    hu_axis, _ = model.grad_H(t, z)
    _, hv_axis = model.grad_H(z, t)
    au = np.concatenate([t, z])
    av = np.concatenate([z, t])
    aval = np.abs(np.concatenate([hu_axis, hv_axis]))
    verdicts["H3"] = _verdict("H3", aval > 0, au, av, aval, np.zeros_like(aval),
                              "H_u(u,0) = 0 and H_v(0,v) = 0 on the axes")

    na_axes = strict_axes and axis_margin > 0
    if na_axes:
        verdicts["H4"] = Verdict("H4", NA, "axes excluded by margin under strict axis testing")
    else:
        su, sv = Hu * u, Hv * v
        bad = off_axis & ((su <= 0) | (sv <= 0))
        lhs = np.minimum(su, sv)
        verdicts["H4"] = _verdict("H4", bad, u, v, lhs, np.zeros_like(lhs),
                                  f"H_u u > 0, H_v v > 0 where min(|u|,|v|) > {axis_margin:g}")

    bad = Htp < 4 * Ht - rtol * np.abs(Htp)
    verdicts["H5"] = _verdict("H5", bad, u, v, Htp, 4 * Ht, "grad H~.w >= 4 H~")

    if na_axes:
        verdicts["H6"] = Verdict("H6", NA, "axes excluded by margin under strict axis testing")
    else:
        low = model.mu * absw**model.sigma
        bad = off_axis & (H < low * (1 - rtol))
        verdicts["H6"] = _verdict("H6", bad, u, v, H, low,
                                  f"H >= mu |w|^sigma with mu={model.mu:g}, sigma={model.sigma:g}"
                                  f" where min(|u|,|v|) > {axis_margin:g}")

    verdicts["H7"] = _audit_h7(model)

    envelope = _fit_envelope(model, u, v, Hu, Hv, absw, eps, gamma, q)
    return AuditReport(
        model=model.params(),
        domain={"box": M, "n_samples": int(n_samples), "axis_margin": float(axis_margin),
                "strict_axes": bool(strict_axes), "seed": seed, "points": int(u.size)},
        verdicts=verdicts, envelope=envelope, notes=[H3_NOTE])


def _audit_h1(model, M, shells=24, angles=64):
    theta = np.linspace(0, 2 * np.pi, angles, endpoint=False) + 0.1
    radii = M * 0.5 ** np.arange(1, shells + 1)
    ratios = []
    for t in radii:
        Hu, Hv = model.grad_H(t * np.cos(theta), t * np.sin(theta))
        ratios.append(float(np.max(np.abs(Hu) + np.abs(Hv))) / t**model.tau)
    ratios = np.array(ratios)
    threshold = 1e-3 * max(ratios[0], np.finfo(float).tiny)
    tail = ratios[-6:]
    ok = ratios[-1] <= threshold and np.all(np.diff(tail) <= 1e-12 * tail[:-1])
    detail = (f"|grad H|/|w|^tau over shells |w|={radii[0]:.3g}..{radii[-1]:.3g}: "
              f"{ratios[0]:.3g} -> {ratios[-1]:.3g} (tau={model.tau:g})")
    if ok:
        return Verdict("H1", PASS, detail)
    t = radii[-1]
    return Verdict("H1", FAIL, detail,
                   [_witness(t * np.cos(0.1), t * np.sin(0.1), ratios[-1], threshold)])


def _audit_h7(model, delta=0.2, n=24):
    if not model.exponential:
        return Verdict("H7", NA, "model has no exponential growth")
    g0 = model.gamma0
    t = np.linspace(1.0, np.sqrt(900.0 / g0), n)
    theta = np.linspace(0, 2 * np.pi, 64, endpoint=False) + 0.05
    logs = []
    for tk in t:
        lu = model.log_abs_grad_u(tk * np.cos(theta), tk * np.sin(theta))
        logs.append(float(np.max(lu)))
    logs = np.array(logs)
    rho = t * t
    above = logs - (g0 + delta) * rho
    below = logs - (g0 - delta) * rho
    ok_above = above[-1] < above[0] - 10 and np.all(np.diff(above[-5:]) < 0)
    ok_below = below[-1] > below[0] + 10 and np.all(np.diff(below[-5:]) > 0)
    detail = (f"log(|H_u|/e^(gamma|w|^2)) for gamma=gamma0+{delta}: {above[0]:.3g} -> {above[-1]:.3g}; "
              f"gamma0-{delta}: {below[0]:.3g} -> {below[-1]:.3g}")
    if ok_above and ok_below:
        return Verdict("H7", PASS, detail)
    wit = []
    tk = t[-1]
    if not ok_above:
        wit.append(_witness(tk, 0.0, above[-1], above[0] - 10))
    if not ok_below:
        wit.append(_witness(tk, 0.0, below[0] + 10, below[-1]))
    return Verdict("H7", FAIL, detail, wit)


def _fit_envelope(model, u, v, Hu, Hv, absw, eps, gamma, q):
    lhs = np.abs(Hu) + np.abs(Hv)
    small = eps * absw**model.tau
    growth = absw ** (q - 1.0) * np.expm1(gamma * absw**2)
    excess = np.maximum(lhs - small, 0.0)
    kappa = float(np.max(excess / growth))
    rhs = small + kappa * growth
    holds = bool(np.all(lhs <= rhs * (1 + 1e-12)))
    return {"eps": eps, "gamma": gamma, "q": q, "tau": model.tau,
            "kappa": kappa, "holds": holds}
