"""Config files, report persistence, CSV export and the command-line driver.

Config files are line-oriented ``key = value`` text with ``[grid]``,
``[model]``, ``[constraint]``, ``[solver]`` and ``[verify]`` sections.  Keys
are the field names of the corresponding objects; keys placed before any
section header are looked up by name.  Unknown keys, duplicate keys and
unparsable values are errors.

Exit codes: 0 success, 1 check failure, 2 configuration error,
3 nonconvergence.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import platform
import sys
import time
import warnings
from dataclasses import fields

import numpy as np

from . import __version__
from .errors import (ConfigError, NlsError, NonConvergenceError, ParseError,
                     RangeError, RefusedError)
from .functional import StatePair
from .manifold import MassConstraint
from .nonlinearity import NonlinearityModel, audit_hypotheses
from .solver import (SolverConfig, VerifySettings, report_from_state,
                     solve_ground_state, sweep_mu)
from .verify import BoundsReport, check_bounds, geometry_probe

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NONCONV = 0, 1, 2, 3

GRID_KEYS = ("R", "n", "spacing", "grading", "order")
SOLVER_KEYS = ("dt0", "tol_grad", "tol_pohozaev", "max_iters", "reproject_every",
               "n_starts", "seed", "scan_range", "scan_step", "tol_fiber", "s_max",
               "newton", "newton_switch", "newton_iters")
SECTIONS = {
    "grid": GRID_KEYS,
    "model": tuple(f.name for f in fields(NonlinearityModel)),
    "constraint": ("a", "b"),
    "solver": SOLVER_KEYS,
    "verify": tuple(f.name for f in fields(VerifySettings)),
}
ALIASES = {("model", "model"): "kind"}
REQUIRED = {("constraint", "a"), ("constraint", "b")}

_TYPES = {f.name: f.type for cls in (SolverConfig, NonlinearityModel, VerifySettings,
                                      MassConstraint) for f in fields(cls)}


def _owner(key):
    hits = [s for s, keys in SECTIONS.items() if key in keys]
    if key == "model":
        hits = ["model"]
    return hits


def _convert(key, raw, line):
    typ = str(_TYPES.get(key, "str")).replace(" ", "")
    text = raw.strip()
    optional = "None" in typ
    if optional and text.lower() in ("", "none"):
        return None
    try:
        if typ.startswith("bool"):
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(text)
        if typ.startswith("int"):
            f = float(text)
            if not f.is_integer():
                raise ValueError(text)
            return int(f)
        if typ.startswith("float"):
            return float(text)
        if not text:
            raise ValueError("empty value")
        return text
    except ValueError:
        raise ParseError(f"cannot parse value '{text}'", line=line, key=key) from None


def _split_config(text):
    """``{section: {key: (value, line)}}`` plus section header lines."""
    data = {s: {} for s in SECTIONS}
    headers = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError("malformed section header", line=lineno)
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ParseError(f"unknown section [{section}]", line=lineno)
            headers.setdefault(section, lineno)
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if section is None:
            owners = _owner(key)
            if len(owners) != 1:
                raise ParseError("unknown key" if not owners else "ambiguous key outside a section",
                                 line=lineno, key=key)
            sec = owners[0]
        else:
            sec = section
            if key not in SECTIONS[sec] and (sec, key) not in ALIASES:
                raise ParseError("unknown key", line=lineno, key=key)
        name = ALIASES.get((sec, key), key)
        if name in data[sec]:
            raise ParseError("duplicate key", line=lineno, key=key)
        data[sec][name] = (_convert(name, value, lineno), lineno)
    return data, headers


def _build(cls, section, entries, headers, **extra):
    kwargs = {k: v for k, (v, _) in entries.items()}
    kwargs.update(extra)
    try:
        return cls(**kwargs)
    except (ConfigError, TypeError) as exc:
        msg = str(exc)
        for key, (_, line) in entries.items():
            if key in msg:
                raise ParseError(msg, line=line, key=key) from None
        raise ParseError(msg, line=headers.get(section)) from None


def parse_config(text):
    """Parse config text into a :class:`SolverConfig`; warns when masses are inadmissible."""
    data, headers = _split_config(text)
    for sec, key in sorted(REQUIRED):
        if key not in data[sec]:
            raise ParseError("missing required key", line=headers.get(sec), key=key)
    model = _build(NonlinearityModel, "model", data["model"], headers)
    verify = _build(VerifySettings, "verify", data["verify"], headers)
    gamma0 = model.gamma0 if model.exponential else None
    constraint = _build(MassConstraint, "constraint", data["constraint"], headers, gamma0=gamma0)
    entries = dict(data["grid"])
    entries.update(data["solver"])
    sec = "grid" if data["grid"] else "solver"
    config = _build(SolverConfig, sec, entries, headers,
                    constraint=constraint, model=model, verify=verify)
    constraint.warn_if_inadmissible()
    return config


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_to_dict(config):
    """Sectioned plain dict of every config field (the report's config echo)."""
    m = config.model
    return {
        "grid": {k: getattr(config, k) for k in GRID_KEYS},
        "model": {k: getattr(m, k) for k in SECTIONS["model"]},
        "constraint": {"a": config.constraint.a, "b": config.constraint.b},
        "solver": {k: getattr(config, k) for k in SOLVER_KEYS},
        "verify": {k: getattr(config.verify, k) for k in SECTIONS["verify"]},
    }


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(config):
    lines = []
    for sec, entries in config_to_dict(config).items():
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {_fmt(v)}" for k, v in entries.items())
        lines.append("")
    return "\n".join(lines)


def config_from_dict(d):
    lines = []
    for sec, entries in d.items():
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {_fmt(v)}" for k, v in entries.items())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return parse_config("\n".join(lines))


# -- reports -----------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_to_doc(report, config):
    grid = report.state.grid
    result = report.result_dict()
    result.update({
        "masses": list(report.masses()),
        "warnings": list(report.warnings),
        "starts": report.starts,
        "profile": {"r": grid.nodes.tolist(), "u": report.state.u.values.tolist(),
                    "v": report.state.v.values.tolist()},
    })
    meta = {
        "artifact": "nlsground",
        "version": __version__,
        "seed": config.seed,
        "grid_hash": grid.digest(),
        "wall_clock_s": report.elapsed,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    bounds = report.bound_checks.as_dict() if report.bound_checks is not None else None
    return _clean({"meta": meta, "config_echo": config_to_dict(config), "result": result,
                   "trail": report.trail, "bounds": bounds})


def write_report(report, config, path):
    doc = report_to_doc(report, config)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    return doc


def doc_to_report(doc):
    """Rebuild ``(SolveReport, SolverConfig)`` from a report document."""
    try:
        config = config_from_dict(doc["config_echo"])
        res = doc["result"]
        prof = res["profile"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed report document: missing {exc}") from None
    grid = config.make_grid()
    if not np.array_equal(np.asarray(prof["r"], dtype=float), grid.nodes):
        raise ConfigError("report profile does not match the grid of its config echo")
    state = StatePair.from_arrays(grid, prof["u"], prof["v"])
    rep = report_from_state(state, config)
    for k in ("status", "iterations", "start_index"):
        setattr(rep, k, res[k])
    for k in ("energy", "lambda1", "lambda2", "kinetic", "potential", "nl_pairing",
              "pohozaev", "pohozaev_residual", "grad_residual", "fiber_curvature", "tail_mass"):
        setattr(rep, k, float(res[k]))
    rep.starts = res.get("starts", [])
    rep.warnings = res.get("warnings", [])
    rep.trail = doc.get("trail", [])
    rep.elapsed = float(doc.get("meta", {}).get("wall_clock_s", 0.0))
    if doc.get("bounds") is not None:
        rep.bound_checks = BoundsReport.from_dict(doc["bounds"])
    return rep, config


def read_report(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"report is not valid JSON: {exc}") from None
    return doc_to_report(doc)


# -- CSV ---------------------------------------------------------------------

def export_csv(state, path):
    """Per-node ``r,u,v`` table at full precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "u", "v"])
        for row in zip(state.grid.nodes, state.u.values, state.v.values):
            w.writerow([repr(float(x)) for x in row])


def read_profile_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]


def write_sweep_csv(result, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["mu", "energy", "lambda1", "lambda2"])
        for row in result.rows:
            w.writerow([repr(float(row[k])) for k in ("mu", "energy", "lambda1", "lambda2")])
        fh.write(f"# slope={result.slope!r}\n")
        fh.write(f"# partial={str(result.partial).lower()}\n")
        bad = [repr(r["mu"]) for r in result.rows if not r["converged"]]
        if bad:
            fh.write(f"# nonconverged_mu={' '.join(bad)}\n")


def read_sweep_csv(path):
    rows, footer = [], {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                footer[k] = v
            elif line and not line.startswith("mu"):
                rows.append([float(x) for x in line.split(",")])
    return np.array(rows), footer


# -- command line ------------------------------------------------------------

def _mu_list(text):
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad mu list '{text}'") from None


def _parser():
    p = argparse.ArgumentParser(prog="nlsground",
                                description="Normalized ground states of coupled planar NLS systems.")
    sub = p.add_subparsers(dest="command", required=True)

    def overrides(sp):
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--starts", type=int, help="override n_starts")

    sp = sub.add_parser("solve", help="compute a ground state and write a JSON report")
    sp.add_argument("config")
    sp.add_argument("--out", default="report.json")
    overrides(sp)
    sp = sub.add_parser("audit", help="audit the model hypotheses")
    sp.add_argument("config")
    sp = sub.add_parser("sweep-mu", help="solve along a list of mu values")
    sp.add_argument("config")
    sp.add_argument("--mu", type=_mu_list, required=True, help="comma separated ascending values")
    sp.add_argument("--csv", help="output table (default: --out or sweep.csv)")
    sp.add_argument("--out", default="sweep.csv")
    overrides(sp)
    sp = sub.add_parser("verify", help="re-run the bound checks on a stored report")
    sp.add_argument("report")
    sp = sub.add_parser("probe-geometry", help="probe the energy separation at kinetic level K")
    sp.add_argument("config")
    sp.add_argument("--K", type=float, required=True)
    sp.add_argument("--samples", type=int)
    overrides(sp)
    sp = sub.add_parser("export", help="write the profile of a report as r,u,v CSV")
    sp.add_argument("report")
    sp.add_argument("--csv", required=True)
    return p


def _apply_overrides(config, args):
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "starts", None) is not None:
        changes["n_starts"] = args.starts
    return config.with_(**changes) if changes else config


def _cmd_solve(args, out):
    config = _apply_overrides(load_config(args.config), args)
    t0 = time.perf_counter()
    try:
        rep = solve_ground_state(config)
    except NonConvergenceError as exc:
        if exc.best is not None:
            exc.best.trail = exc.trail
            exc.best.elapsed = time.perf_counter() - t0
            write_report(exc.best, config, args.out)
        print(f"nonconvergence: {exc}", file=out)
        return EXIT_NONCONV
    write_report(rep, config, args.out)
    print(rep.summary(), file=out)
    if not rep.bound_checks.passed:
        print(f"bound checks failed: {', '.join(rep.bound_checks.failed)}", file=out)
        return EXIT_CHECK
    return EXIT_OK


def _cmd_audit(args, out):
    config = load_config(args.config)
    s = config.verify
    rep = audit_hypotheses(config.model, box=s.audit_box, n_samples=s.audit_samples,
                           axis_margin=s.axis_margin, strict_axes=s.strict_axes,
                           seed=config.seed, eps=s.envelope_eps, q=s.envelope_q)
    print(rep.table(), file=out)
    return EXIT_CHECK if rep.failed else EXIT_OK


def _cmd_sweep(args, out):
    config = _apply_overrides(load_config(args.config), args)
    res = sweep_mu(config, args.mu)
    path = args.csv or args.out
    write_sweep_csv(res, path)
    for row in res.rows:
        flag = "" if row["converged"] else "  (not converged)"
        print(f"mu={row['mu']:<10.6g} energy={row['energy']:.12g} lambda1={row['lambda1']:.10g} "
              f"lambda2={row['lambda2']:.10g}{flag}", file=out)
    print(f"slope={res.slope:.6f} partial={str(res.partial).lower()} -> {path}", file=out)
    return EXIT_NONCONV if res.partial else EXIT_OK


def _cmd_verify(args, out):
    rep, config = read_report(args.report)
    bounds = check_bounds(rep, config)
    print(bounds.table(), file=out)
    return EXIT_OK if bounds.passed else EXIT_CHECK


def _cmd_probe(args, out):
    config = _apply_overrides(load_config(args.config), args)
    n = args.samples if args.samples is not None else config.verify.probe_samples
    probe = geometry_probe(config, args.K, n_samples=n)
    print(probe.summary(), file=out)
    return EXIT_OK if probe.passed else EXIT_CHECK


def _cmd_export(args, out):
    rep, _ = read_report(args.report)
    export_csv(rep.state, args.csv)
    print(f"wrote {rep.state.grid.n} rows to {args.csv}", file=out)
    return EXIT_OK


_COMMANDS = {"solve": _cmd_solve, "audit": _cmd_audit, "sweep-mu": _cmd_sweep,
             "verify": _cmd_verify, "probe-geometry": _cmd_probe, "export": _cmd_export}


def run_cli(argv=None, out=None, err=None):
    """Run one subcommand; returns the exit status instead of exiting."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            status = _COMMANDS[args.command](args, out)
        for w in caught:
            if issubclass(w.category, UserWarning):
                print(f"warning: {w.message}", file=err)
        return status
    except (ConfigError, RangeError, OSError) as exc:
        print(f"configuration error: {exc}", file=err)
        return EXIT_CONFIG
    except RefusedError as exc:
        print(f"refused: {exc}", file=err)
        return EXIT_CHECK
    except NonConvergenceError as exc:
        print(f"nonconvergence: {exc}", file=err)
        return EXIT_NONCONV
    except NlsError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=err)
        return EXIT_NONCONV


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
