"""Acceptance gate: one check per criterion, each at its stated tolerance.

Every check prints a single ``criterion N: PASS|FAIL`` line (also collected
into the pytest terminal summary).  Run directly with
``python3 -m tests.test_acceptance`` for the lines alone.
"""

import filecmp
import json
import math
import tempfile
from pathlib import Path

import numpy as np
import pytest

from girsanov_kpz import expr as E
from girsanov_kpz.burgers1d import (
    Burgers1DModel,
    burgers_residual,
    classical_phi,
    porous_phi,
    psi_from_phi,
    u_from_potential,
)
from girsanov_kpz.cli import main
from girsanov_kpz.fields import FieldBundle, Potential, build_scenario, constant_matrix
from girsanov_kpz.girsanov import density_process, martingale_check, terminal_zhat
from girsanov_kpz.kpz import GridField, cole_hopf_solve, gradient_form_check, interior_mask, kpz_residual
from girsanov_kpz.sde import TimeGrid, simulate_ensemble
from girsanov_kpz.verify import PATH_DEPENDENT, refinement_study, residual_series, run_verification

from .test_expr import ABC, PRECEDENCE

RESULTS = []
DTS = [1e-2, 5e-3, 2.5e-3]


def report(n, passed, detail):
    line = f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    return passed


def criterion_1():
    sc = build_scenario("linear", c=(0.7, -0.4), sigma=((1.0, 0.3), (0.0, 0.9)))
    ens = simulate_ensemble(sc.fields, sc.x0, TimeGrid.from_dt(1.0, 1e-3), 42, 100)
    R = residual_series(ens, density_process(sc.fields, ens), sc.potential)
    worst = float(np.max(np.abs(R)))
    return report(1, worst <= 1e-9, f"max|R_n| = {worst:.3e} (tol 1e-9)")


def criterion_2():
    sc = build_scenario("bridge", dim=1, sigma0=1.0, T0=2.0)
    study = refinement_study(sc.fields, sc.potential, sc.x0, 1.0, DTS, 200, 42)
    rms = study.rms
    ratios = [a / b for a, b in zip(rms, rms[1:])]
    monotone = all(r > 1.0 for r in ratios)
    ok = monotone and all(r >= 1.6 for r in ratios) and study.fitted_order >= 0.7
    return report(2, ok, "RMS " + ", ".join(f"{r:.4g}" for r in rms)
                  + "; ratios " + ", ".join(f"{r:.3f}" for r in ratios)
                  + f"; order {study.fitted_order:.3f} (need ratio >= 1.6, order >= 0.7)")


def criterion_3():
    sc = build_scenario("rotational", kappa=1.0)
    region = [(-1.0, 3.0), (-2.0, 2.0)]
    rep = run_verification(sc.fields, sc.potential, sc.x0, 1.0, DTS, 200, 42, region)
    rms = rep.study.rms
    ok = (min(rms) >= 0.1 and abs(rep.curl.max_asym - 2.0) <= 1e-4
          and rep.verdict.label == PATH_DEPENDENT)
    return report(3, ok, "RMS " + ", ".join(f"{r:.4g}" for r in rms)
                  + f"; asym {rep.curl.max_asym:.10f}; verdict {rep.verdict.label}")


def criterion_4():
    sc = build_scenario("linear")
    z, ok_paths = terminal_zhat(sc.fields, sc.x0, TimeGrid.from_dt(1.0, 1e-3), 42, 20000)
    res = martingale_check(np.exp(-z[ok_paths]))
    dev = abs(res.mean - 1.0)
    return report(4, res.passed,
                  f"mean {res.mean:.6f}, |mean-1| {dev:.2e} vs 3*stderr {3 * res.stderr:.2e}")


def criterion_5():
    T, sigma0 = 0.5, 1.0
    margin = 3.0 * math.sqrt(2.0 * sigma0 ** 2 * T)
    details, ok = [], True
    cases = [("linear", build_scenario("linear", c=(1.0,), sigma=((1.0,),)).potential),
             ("bridge", build_scenario("bridge").potential)]
    for name, v in cases:
        term = GridField.from_potential(v, T, -5.0, 5.0, 201)
        snaps = cole_hopf_solve(term, sigma0, n_out=5)
        worst, worst_all = 0.0, 0.0
        maxp = True
        for s in snaps[1:]:
            err = np.abs(s.values - v(s.t, s.points))
            worst = max(worst, float(err[interior_mask(s, margin)].max()))
            worst_all = max(worst_all, float(err[interior_mask(s)].max()))
            maxp &= term.values.min() <= s.values.min() and s.values.max() <= term.values.max()
        ok &= worst <= 1e-3 and maxp
        details.append(f"{name}: sup err {worst:.2e} on |x| <= {5 - margin:g}"
                       f" ({worst_all:.2e} incl. boundary layer), max principle {maxp}")
    return report(5, ok, "; ".join(details))


def criterion_6():
    rng = np.random.default_rng(42)
    worst = {}
    for name in ("linear", "bridge"):
        sc = build_scenario(name)
        t = rng.uniform(0.0, 1.0, 100)
        x = rng.uniform(-3.0, 3.0, (100, sc.fields.dim))
        worst[name] = float(np.max(np.abs(kpz_residual(sc.potential, sc.fields, t, x))))
    square = Potential(lambda t, x: np.asarray(x)[..., 0] ** 2,
                       gradient=lambda t, x: 2 * np.asarray(x),
                       hessian=lambda t, x: np.full(np.shape(x) + (1,), 2.0),
                       time_derivative=lambda t, x: np.zeros(np.shape(x)[:-1]))
    one = FieldBundle(1, lambda t, x: np.zeros(np.shape(x)), constant_matrix([[1.0]]))
    r = float(kpz_residual(square, one, 0.0, np.array([1.0])))
    ok = max(worst.values()) <= 1e-8 and abs(r - 3.0) <= 1e-10
    return report(6, ok, f"linear {worst['linear']:.1e}, bridge {worst['bridge']:.1e};"
                  f" x^2 at x=1 -> {r!r}")


def criterion_7():
    r = np.linspace(0.1, 5.0, 200)
    s0 = 1.3
    p1, p2 = psi_from_phi(classical_phi(s0))
    ex1 = max(np.max(np.abs(p1(r) - s0 ** 2 * r)), np.max(np.abs(p2(r) - s0 ** 2 * r ** 2)))
    ex2, quad = 0.0, 0.0
    for m in (2, 3):
        c1, c2 = psi_from_phi(porous_phi(m))
        n1, _ = psi_from_phi(porous_phi(m), numeric=True)
        ex2 = max(ex2, np.max(np.abs(c1(r) - r ** m)), np.max(np.abs(c2(r) - m * r ** (m + 1))))
        quad = max(quad, float(np.max(np.abs(n1(r) - r ** m))))
    n1, _ = psi_from_phi(classical_phi(s0), numeric=True)
    quad = max(quad, float(np.max(np.abs(n1(r) - s0 ** 2 * r))))
    bridge = build_scenario("bridge")
    model = Burgers1DModel.from_phi(u_from_potential(bridge.potential), classical_phi(1.0))
    xs = np.linspace(-3.0, 3.0, 31)
    res = max(float(np.max(np.abs(burgers_residual(model, t, xs)))) for t in (0.0, 0.5, 1.0))
    ok = ex1 <= 1e-12 and ex2 <= 1e-9 and quad <= 1e-7 and res <= 1e-4
    return report(7, ok, f"classical psi err {ex1:.1e}, porous psi err {ex2:.1e},"
                  f" numeric vs closed psi1 {quad:.1e}, bridge Burgers residual {res:.1e}")


CRITERION_8_CONFIG = """\
scenario: bridge
T: 1.0
dt_list: [0.01, 0.005, 0.0025]
n_paths: 1200
seed: 42
"""


def _run_verify(cfg, out, threads):
    code = main(["verify", "--config", str(cfg), "--out", str(out), "--threads", str(threads)])
    doc = json.loads((out / "report.json").read_text())
    doc.pop("runtime_seconds")
    return code, doc


def criterion_8():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cfg = tmp / "verify.yaml"
        cfg.write_text(CRITERION_8_CONFIG)
        runs = [_run_verify(cfg, tmp / name, th) for name, th in (("a", 1), ("b", 1), ("c", 4))]
        same = True
        for other in ("b", "c"):
            for f in ("refinement.csv", "residuals.csv"):
                same &= filecmp.cmp(tmp / "a" / f, tmp / other / f, shallow=False)
        reports_equal = runs[0] == runs[1] == runs[2]
        size = (tmp / "a" / "residuals.csv").stat().st_size
    return report(8, same and reports_equal,
                  f"CSVs byte-identical across reruns and --threads 4: {same};"
                  f" reports equal (runtime excluded): {reports_equal}; residuals.csv {size} bytes")


MALFORMED = [("1+", 2), ("(1+2", 4), ("1 2", 2), ("2*", 2), ("", 0), ("1+*2", 2), (")", 0),
             ("3 $ 4", 2), ("x1 + (x2", 8), ("sin 1", 4)]


def criterion_9():
    passed = 0
    for text, value in PRECEDENCE:
        node = E.parse(text, extra_names=("a", "b", "c"))
        got = E.evaluate(node, dict(ABC, t=0.25, x=np.array([1.0, 2.0])))
        passed += math.isclose(got, value, rel_tol=1e-14, abs_tol=1e-15)
    positioned = 0
    for text, offset in MALFORMED:
        try:
            E.parse(text)
        except E.ExprSyntaxError as exc:
            positioned += exc.offset == offset
    special = E.evaluate(E.parse("-2^2"), {}) == -4.0
    ok = passed == len(PRECEDENCE) >= 20 and positioned == len(MALFORMED) and special
    return report(9, ok, f"precedence {passed}/{len(PRECEDENCE)}; positioned syntax errors"
                  f" {positioned}/{len(MALFORMED)}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 10)])
def test_acceptance(check):
    assert check()


if __name__ == "__main__":
    for check in CRITERIA:
        check()
