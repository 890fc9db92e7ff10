"""Command-line front end.

Exit codes: 0 success, 1 error (one JSON line on stderr), 2 quantitative
failure (e.g. a verdict contradicting ``--expect``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .burgers1d import Burgers1DModel, burgers_residual, phi_consistency, u_from_bundle, u_from_potential
from .config import Config, load_config
from .errors import ConfigError, KPZLabError
from .girsanov import density_process, martingale_check, terminal_zhat
from .kpz import GridField, cole_hopf_solve, gradient_form_check, interior_mask
from .sde import simulate_ensemble
from .verify import PATH_DEPENDENT, PATH_INDEPENDENT, run_verification

log = logging.getLogger("girsanov_kpz")

COMMANDS = ("simulate", "verify", "kpz-solve", "burgers-check", "gradient-check", "martingale-check")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _error_record("UsageError", message)
        raise SystemExit(1)


def _error_record(kind, message, field=None):
    rec = {"error": kind, "message": str(message)}
    if field is not None:
        rec["field"] = field
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)


def fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o)}")


def _path_rows(ens, series, residual=None):
    times = ens.grid.times
    zhat = series.zhat
    weights = series.weights
    for p, pid in enumerate(ens.path_ids):
        for n, t in enumerate(times):
            row = [int(pid), float(t)] + [float(v) for v in ens.states[p, n]]
            row += [float(zhat[p, n]), float(weights[p, n])]
            if residual is not None:
                row.append(float(residual[p, n]))
            yield row


def _outcome(expect, passed):
    """Map a pass/fail check onto the exit-code contract."""
    if expect is None:
        return 0 if passed else 2
    return 0 if passed == (expect == "independent") else 2


def cmd_simulate(cfg: Config, args):
    ens = simulate_ensemble(cfg.fields, cfg.x0, cfg.grid, cfg.seed, cfg.n_paths, threads=args.threads)
    series = density_process(cfg.fields, ens)
    header = ["path_id", "t"] + [f"x{i + 1}" for i in range(cfg.dimension)] + ["zhat", "weight"]
    write_csv(os.path.join(args.out, "paths.csv"), header, _path_rows(ens, series))
    return 0, {"n_paths": cfg.n_paths, "n_steps": cfg.grid.N, "failures": ens.failures}


def cmd_verify(cfg: Config, args):
    rep = run_verification(cfg.fields, cfg.potential, cfg.x0, cfg.T, cfg.refinement_dts,
                           cfg.n_paths, cfg.seed, cfg.region, cfg.thresholds,
                           threads=args.threads, n_curl_samples=cfg.gradient_check.n_samples,
                           keep_finest=True)
    rows = []
    for i, lv in enumerate(rep.study.levels):
        order = rep.study.orders[i - 1] if i and rep.study.orders else float("nan")
        rows.append([lv.dt, lv.n_steps, lv.rms_residual, lv.max_abs_residual, lv.rms_zhat,
                     lv.n_failed, order])
    write_csv(os.path.join(args.out, "refinement.csv"),
              ["dt", "n_steps", "rms_residual", "max_abs_residual", "rms_zhat", "n_failed", "order"],
              rows)
    fin = rep.study.finest
    header = (["path_id", "t"] + [f"x{i + 1}" for i in range(cfg.dimension)]
              + ["zhat", "weight", "residual"])
    write_csv(os.path.join(args.out, "residuals.csv"), header,
              _path_rows(fin["ensemble"], fin["series"], fin["residual"]))
    doc = rep.to_dict()
    label = rep.verdict.label
    if args.expect is None:
        code = 0
    else:
        want = PATH_INDEPENDENT if args.expect == "independent" else PATH_DEPENDENT
        code = 0 if label == want else 2
    return code, doc


def cmd_kpz_solve(cfg: Config, args):
    if cfg.fields.constant_sigma is None:
        raise ConfigError("kpz-solve needs a constant sigma", field="fields.sigma")
    if cfg.dimension > 2:
        raise ConfigError("kpz-solve supports dimension 1 or 2", field="dimension")
    k = cfg.kpz
    terminal = GridField.from_potential(cfg.potential, cfg.T, k.x_min, k.x_max, k.n_points)
    sigma = cfg.fields.constant_sigma
    snaps = cole_hopf_solve(terminal, sigma, steps=k.steps, n_out=k.n_out)
    cols = [f"x{i + 1}" for i in range(cfg.dimension)]
    a_max = float(np.max(np.diag(sigma @ sigma.T)))
    margin = k.margin if k.margin is not None else 3.0 * np.sqrt(2.0 * a_max * cfg.T)
    errors = []
    for i, snap in enumerate(snaps):
        pts = snap.points.reshape(-1, cfg.dimension)
        vals = snap.values.reshape(-1)
        write_csv(os.path.join(args.out, f"kpz_{i:03d}.csv"), cols + ["t", "v"],
                  ([*map(float, p), float(snap.t), float(v)] for p, v in zip(pts, vals)))
        mask = interior_mask(snap, margin)
        ref = np.asarray(cfg.potential(snap.t, snap.points), dtype=float)
        err = float(np.max(np.abs(snap.values - ref)[mask])) if np.any(mask) else float("nan")
        errors.append({"t": snap.t, "sup_error_interior": err})
    vT = terminal.values
    maxp = all(vT.min() - 1e-12 <= s.values.min() and s.values.max() <= vT.max() + 1e-12
               for s in snaps)
    doc = {"snapshots": errors, "margin": margin, "max_principle": maxp,
           "steps": k.steps, "n_out": k.n_out}
    return 0, doc


def cmd_burgers_check(cfg: Config, args):
    if cfg.dimension != 1:
        raise ConfigError("burgers-check needs dimension 1", field="dimension")
    if cfg.phi is None:
        raise ConfigError("give burgers.phi (scenario has no structure function)", field="burgers.phi")
    b = cfg.burgers
    if b.source == "coefficients":
        u = u_from_bundle(cfg.fields)
    elif b.source == "potential":
        u = u_from_potential(cfg.potential)
    else:
        raise ConfigError("source must be 'coefficients' or 'potential'", field="burgers.source")
    model = Burgers1DModel.from_phi(u, cfg.phi, r_ref=b.r_ref)
    xs = np.linspace(b.x_min, b.x_max, b.n_points)
    res = np.array([float(burgers_residual(model, b.t, x, h=b.h)) for x in xs])
    us = np.asarray(u(b.t, xs), dtype=float)
    write_csv(os.path.join(args.out, "burgers.csv"), ["t", "x", "u", "residual"],
              ([float(b.t), float(x), float(uu), float(r)] for x, uu, r in zip(xs, us, res)))
    consistency = phi_consistency(
        lambda t, x: cfg.fields.b(t, np.asarray(x)[..., None])[..., 0],
        lambda t, x: cfg.fields.sig(t, np.asarray(x)[..., None])[..., 0, 0],
        cfg.phi, b.t, xs)
    max_res = float(np.max(np.abs(res)))
    passed = max_res <= b.tol and consistency <= b.tol
    return _outcome(args.expect, passed), {
        "max_abs_residual": max_res, "phi_consistency": consistency, "tol": b.tol, "passed": passed}


def cmd_gradient_check(cfg: Config, args):
    g = cfg.gradient_check
    res = gradient_form_check(cfg.fields, g.t, cfg.region, g.n_samples, tol=g.tol, seed=cfg.seed)
    doc = {"max_asym": res.max_asym, "tol": res.tol, "passed": res.passed,
           "n_samples": res.n_samples, "region": cfg.region}
    write_csv(os.path.join(args.out, "gradient_check.csv"), ["max_asym", "tol", "passed"],
              [[res.max_asym, res.tol, int(res.passed)]])
    return _outcome(args.expect, res.passed), doc


def cmd_martingale_check(cfg: Config, args):
    z, ok = terminal_zhat(cfg.fields, cfg.x0, cfg.grid, cfg.seed, cfg.n_paths, threads=args.threads)
    w = np.exp(-z[ok])
    res = martingale_check(w)
    write_csv(os.path.join(args.out, "martingale.csv"), ["n", "mean", "stderr", "passed"],
              [[res.n, res.mean, res.stderr, int(res.passed)]])
    return (0 if res.passed else 2), {"mean": res.mean, "stderr": res.stderr, "n": res.n,
                                      "passed": res.passed, "excluded": int((~ok).sum())}


HANDLERS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "kpz-solve": cmd_kpz_solve,
    "burgers-check": cmd_burgers_check,
    "gradient-check": cmd_gradient_check,
    "martingale-check": cmd_martingale_check,
}


def build_parser():
    parser = _Parser(prog="girsanov-kpz",
                     description="Path-independence experiments for Girsanov densities.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND",
                                parser_class=_Parser)
    helps = {
        "simulate": "simulate paths; writes paths.csv",
        "verify": "refinement study and verdict; writes report.json, refinement.csv, residuals.csv",
        "kpz-solve": "Cole-Hopf grid solve; writes kpz_NNN.csv per snapshot",
        "burgers-check": "generalized Burgers residual scan (d = 1); writes burgers.csv",
        "gradient-check": "curl test of a^-1 b; writes gradient_check.csv",
        "martingale-check": "E[exp(-Zhat_T)] = 1 check; writes martingale.csv",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        p.add_argument("--config", required=True, help="YAML configuration file")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--expect", choices=("independent", "dependent"),
                       help="expected outcome; a mismatch exits with status 2")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    started = time.perf_counter()
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1", field="--threads")
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        os.makedirs(args.out, exist_ok=True)
        code, doc = HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        _error_record("ConfigError", exc, exc.field)
        return 1
    except KPZLabError as exc:
        _error_record(type(exc).__name__, exc)
        return 1
    except OSError as exc:
        _error_record("OSError", exc)
        return 1
    report = {
        "command": args.command,
        "config": os.path.abspath(args.config),
        "seed": cfg.seed,
        "exit_status": code,
        "runtime_seconds": round(time.perf_counter() - started, 3),
        "result": doc,
    }
    if args.command == "verify":
        report["verdict"] = doc["verdict"]
    write_json(os.path.join(args.out, "report.json"), report)
    summary = doc.get("verdict") if isinstance(doc, dict) and "verdict" in doc else (
        "pass" if doc.get("passed", code == 0) else "fail")
    print(f"{args.command}: {summary} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
