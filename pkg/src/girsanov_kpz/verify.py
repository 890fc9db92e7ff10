"""Pathwise test of Zhat_t = v(t, X_t) - v(0, X_0) with refinement studies
and a three-way verdict.

The residual checks sufficiency for a given candidate v; the curl test on
a^{-1} b checks the necessary gradient form.  Both are evidence on the region
the ensemble actually visits, not a global certificate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .fields import FieldBundle, Potential
from .girsanov import density_process
from .kpz import CurlResult, gradient_form_check
from .sde import GaussianStream, TimeGrid, coarsen, simulate_ensemble

PATH_INDEPENDENT = "path_independent"
PATH_DEPENDENT = "path_dependent"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Thresholds:
    tau_abs: float = 1e-3
    tau_rel: float = 0.1
    min_order: float = 0.35
    exact_tol: float = 1e-10
    floor_factor: float = 10.0
    curl_fail: float = 0.1
    max_blowup_fraction: float = 0.01


def residual_series(path, series, v: Potential):
    """R_n = Zhat_n - (v(t_n, X_n) - v(0, X_0)); works on a single path or
    an ensemble (path axis first).  R_0 is exactly zero."""
    states = np.asarray(path.states)
    values = np.asarray(v(path.grid.times, states), dtype=float)
    return series.zhat - (values - values[..., :1])


@dataclass
class LevelResult:
    dt: float
    n_steps: int
    rms_residual: float
    max_abs_residual: float
    rms_zhat: float
    n_paths: int
    n_failed: int


@dataclass
class RefinementStudy:
    levels: list
    orders: list
    fitted_order: Optional[float]
    exact: bool
    finest: Optional[dict] = field(default=None, repr=False)

    @property
    def rms(self):
        return [lv.rms_residual for lv in self.levels]


def check_dt_list(dt_list, T):
    dts = [float(d) for d in dt_list]
    if len(dts) < 1:
        raise ConfigError("dt_list is empty", field="dt_list")
    grids = [TimeGrid.from_dt(T, d) for d in dts]
    for a, b in zip(grids, grids[1:]):
        if not b.N > a.N or b.N % a.N:
            raise ConfigError(
                f"dt_list must be strictly decreasing and nested (got {dts})", field="dt_list"
            )
    return grids


def _slope(x0, x1, y0, y1):
    if y0 <= 0 or y1 <= 0:
        return math.inf
    return math.log(y0 / y1) / math.log(x0 / x1)


def refinement_study(fb: FieldBundle, v: Potential, x0, T, dt_list, n_paths, seed,
                     threads=1, exact_tol=1e-10, keep_finest=False) -> RefinementStudy:
    """Residual statistics at t = T for each dt, with Brownian paths coupled
    across levels: coarse increments are sums of the finest ones."""
    grids = check_dt_list(dt_list, T)
    fine = grids[-1]
    stream = GaussianStream(seed)
    fine_inc = stream.batch_increments(range(n_paths), fine, fb.dim)
    levels = []
    finest = None
    for grid in grids:
        inc = coarsen(fine_inc, fine.N // grid.N) if grid.N != fine.N else fine_inc
        ens = simulate_ensemble(fb, x0, grid, seed, n_paths, threads=threads, increments=inc)
        series = density_process(fb, ens)
        R = residual_series(ens, series, v)
        ok = ens.ok
        rT = R[ok, -1]
        zT = series.zhat[ok, -1]
        levels.append(LevelResult(
            dt=grid.dt,
            n_steps=grid.N,
            rms_residual=float(np.sqrt(np.mean(rT ** 2))) if rT.size else math.nan,
            max_abs_residual=float(np.max(np.abs(R[ok]))) if rT.size else math.nan,
            rms_zhat=float(np.sqrt(np.mean(zT ** 2))) if zT.size else math.nan,
            n_paths=n_paths,
            n_failed=len(ens.failures),
        ))
        if keep_finest and grid is fine:
            finest = {"ensemble": ens, "series": series, "residual": R}
    exact = all(lv.max_abs_residual <= exact_tol for lv in levels)
    orders = []
    fitted = None
    if not exact and len(levels) > 1:
        for a, b in zip(levels, levels[1:]):
            orders.append(_slope(a.dt, b.dt, a.rms_residual, b.rms_residual))
        dts = np.log([lv.dt for lv in levels])
        rms = np.array([lv.rms_residual for lv in levels])
        if np.all(rms > 0):
            fitted = float(np.polyfit(dts, np.log(rms), 1)[0])
        else:
            fitted = math.inf
    return RefinementStudy(levels, orders, fitted, exact, finest)


@dataclass
class Verdict:
    label: str
    reasons: list

    @property
    def explanation(self):
        return "; ".join(self.reasons)


def verdict(study: RefinementStudy, curl: CurlResult, thresholds: Thresholds = Thresholds()) -> Verdict:
    """Three-way decision.

    path_independent: the finest RMS residual is below
    tau_abs + tau_rel * RMS(Zhat_T), the residual converges (order >=
    min_order, or it vanishes to rounding at every dt) and the curl test passes.
    path_dependent: the curl test fails by more than ``curl_fail``, or the
    residual sits on a floor above floor_factor * tau_abs at every dt without
    converging.  Anything else is inconclusive.
    """
    th = thresholds
    reasons = []
    if len(study.levels) < 3:
        raise ConfigError("a verdict needs a study over at least 3 dt values", field="dt_list")
    if min(lv.n_paths for lv in study.levels) < 100:
        raise ConfigError("a verdict needs at least 100 paths per dt", field="n_paths")
    worst_blowup = max(lv.n_failed / lv.n_paths for lv in study.levels)
    if worst_blowup > th.max_blowup_fraction:
        return Verdict(INCONCLUSIVE, [f"{worst_blowup:.1%} of paths blew up"])
    finest = study.levels[-1]
    bound = th.tau_abs + th.tau_rel * finest.rms_zhat
    small = finest.rms_residual <= bound
    converging = study.exact or (study.fitted_order is not None and study.fitted_order >= th.min_order)
    reasons.append(
        f"finest RMS residual {finest.rms_residual:.3e} vs bound {bound:.3e}"
    )
    if study.exact:
        reasons.append("residual vanishes to rounding at every dt (exact)")
    else:
        reasons.append(f"fitted order {study.fitted_order:.3f} (min {th.min_order})")
    reasons.append(f"curl asymmetry {curl.max_asym:.3e} (tol {curl.tol:.1e})")
    if small and converging and curl.passed:
        return Verdict(PATH_INDEPENDENT, reasons)
    floor = all(lv.rms_residual > th.floor_factor * th.tau_abs for lv in study.levels)
    if (floor and not converging) or (not curl.passed and curl.max_asym > th.curl_fail):
        return Verdict(PATH_DEPENDENT, reasons)
    return Verdict(INCONCLUSIVE, reasons)


@dataclass
class VerificationReport:
    study: RefinementStudy
    curl: CurlResult
    verdict: Verdict
    thresholds: Thresholds

    def to_dict(self):
        return {
            "verdict": self.verdict.label,
            "explanation": self.verdict.explanation,
            "note": "evidence covers the region sampled by the ensemble, not all of R^d",
            "levels": [asdict(lv) for lv in self.study.levels],
            "orders": self.study.orders,
            "fitted_order": self.study.fitted_order,
            "exact": self.study.exact,
            "curl": {"max_asym": self.curl.max_asym, "tol": self.curl.tol,
                     "passed": self.curl.passed, "n_samples": self.curl.n_samples},
            "thresholds": asdict(self.thresholds),
        }


def run_verification(fb: FieldBundle, v: Potential, x0, T, dt_list, n_paths, seed,
                     region, thresholds: Thresholds = Thresholds(), threads=1,
                     n_curl_samples=64, keep_finest=False) -> VerificationReport:
    study = refinement_study(fb, v, x0, T, dt_list, n_paths, seed, threads=threads,
                             exact_tol=thresholds.exact_tol, keep_finest=keep_finest)
    curl = gradient_form_check(fb, 0.0, region, n_curl_samples, seed=seed)
    return VerificationReport(study, curl, verdict(study, curl, thresholds), thresholds)
