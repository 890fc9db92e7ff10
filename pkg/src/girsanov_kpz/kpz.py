"""Time-reversed KPZ equation: pointwise residual, curl test and a
Cole-Hopf grid solver for constant diffusion.

The equation is

    dv/dt = -1/2 [ Tr(a Hess v) + |sigma^T grad v|^2 ],   a = sigma sigma^T,

and w = exp(v) turns it into the backward heat equation
dw/dt = -1/2 Tr(a Hess w).  With s = T - t this is an ordinary forward heat
equation, solved here from terminal data at t = T down to earlier times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import ConfigError, NonPositiveW, UnstableParameters
from .fields import FieldBundle, Potential, eval_a

STABILITY = 0.25


def kpz_residual(v: Potential, fb: FieldBundle, t, x):
    """dv/dt + 1/2 [Tr(a Hess v) + |sigma^T grad v|^2]; zero iff v solves the
    equation at (t, x)."""
    x = np.asarray(x, dtype=float)
    a = eval_a(fb, t, x)
    g = v.grad(t, x)
    st_g = nm.matvec(nm.transpose(fb.sig(t, x)), g)
    return v.dt(t, x) + 0.5 * (nm.trace(nm.matmul(a, v.hess(t, x))) + nm.inner(st_g, st_g))


@dataclass(frozen=True)
class CurlResult:
    max_asym: float
    tol: float
    n_samples: int

    @property
    def passed(self):
        return self.max_asym <= self.tol


def scaled_drift_field(fb: FieldBundle):
    """F = a^{-1} b, which equals grad v for a gradient-form drift."""

    def F(t, x):
        return nm.matvec(nm.mat_inverse(eval_a(fb, t, x)), fb.b(t, x))

    return F


def gradient_form_check(fb: FieldBundle, t, region, n_samples=64, tol=None, seed=0) -> CurlResult:
    """Largest |dF_i/dx_j - dF_j/dx_i| of F = a^{-1} b over random points in
    the box ``region`` (one (lo, hi) pair per axis).

    Default tolerance: 1e-8 for exact drifts, 1e-4 for drifts that are
    themselves finite-difference approximations.  Rounding in the Jacobian
    grows like cond(a) * eps / h, so badly conditioned diffusions need a
    looser ``tol``.
    """
    lo, hi = np.asarray(region, dtype=float).T
    if lo.shape != (fb.dim,) or np.any(hi <= lo):
        raise ConfigError(f"region must give {fb.dim} nondegenerate (lo, hi) pairs",
                          field="gradient_check.region")
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1", field="gradient_check.n_samples")
    if tol is None:
        tol = 1e-8 if fb.exact_drift else 1e-4
    rng = np.random.default_rng(seed)
    x = lo + (hi - lo) * rng.random((n_samples, fb.dim))
    F = scaled_drift_field(fb)
    d = fb.dim
    h = nm.GRAD_STEP * np.maximum(1.0, np.max(np.abs(x), axis=-1))[:, None]
    J = np.empty((n_samples, d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        J[:, :, j] = (F(t, x + h * e) - F(t, x - h * e)) / (2 * h)
    asym = np.abs(J - np.swapaxes(J, -1, -2))
    return CurlResult(float(asym.max()) if d > 1 else 0.0, float(tol), int(n_samples))


@dataclass(frozen=True)
class GridField:
    """Values of v(t, .) on a tensor grid (d = 1 or 2)."""

    axes: tuple
    values: np.ndarray
    t: float

    def __post_init__(self):
        if len(self.axes) not in (1, 2):
            raise ConfigError("grid solver supports d = 1 or 2", field="kpz")
        for ax in self.axes:
            if len(ax) < 3:
                raise ConfigError("need at least 3 grid points per axis", field="kpz.n_points")
        if self.values.shape != tuple(len(a) for a in self.axes):
            raise ConfigError("values do not match the grid shape", field="kpz")

    @classmethod
    def from_potential(cls, v: Potential, t, lo, hi, n_points):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        n = np.broadcast_to(np.atleast_1d(n_points), lo.shape)
        axes = tuple(np.linspace(a, b, int(k)) for a, b, k in zip(lo, hi, n))
        pts = cls.points_of(axes)
        return cls(axes, np.asarray(v(t, pts), dtype=float), float(t))

    @staticmethod
    def points_of(axes):
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    @property
    def points(self):
        return self.points_of(self.axes)

    @property
    def spacing(self):
        return tuple(float(a[1] - a[0]) for a in self.axes)

    @property
    def dim(self):
        return len(self.axes)


def interior_mask(field: GridField, margin=0.0):
    """Nodes that are not on the boundary and lie at least ``margin`` away
    from every boundary face."""
    masks = []
    for ax in field.axes:
        m = np.zeros(len(ax), dtype=bool)
        m[1:-1] = True
        m &= (ax - ax[0] >= margin - 1e-12) & (ax[-1] - ax >= margin - 1e-12)
        masks.append(m)
    if field.dim == 1:
        return masks[0]
    return masks[0][:, None] & masks[1][None, :]


def _diffusion_matrix(sigma0, dim):
    S = np.asarray(sigma0, dtype=float)
    if S.ndim == 0:
        if not S > 0:
            raise ConfigError("sigma0 must be positive", field="sigma")
        S = float(S) * np.eye(dim)
    if S.shape != (dim, dim):
        raise ConfigError(f"sigma must be a constant {dim}x{dim} matrix", field="sigma")
    return S @ S.T


def _heat_step(w, a, ds, spacing):
    """One explicit step of dw/ds = 1/2 Tr(a Hess w) with reflecting ghosts."""
    if w.ndim == 1:
        (dx,) = spacing
        g = np.pad(w, 1, mode="reflect")
        lam = 0.5 * a[0, 0] * ds / dx ** 2
        return w + lam * ((g[:-2] - w) + (g[2:] - w))
    dx, dy = spacing
    g = np.pad(w, 1, mode="reflect")
    c = g[1:-1, 1:-1]
    out = w + (0.5 * a[0, 0] * ds / dx ** 2) * ((g[:-2, 1:-1] - c) + (g[2:, 1:-1] - c))
    out = out + (0.5 * a[1, 1] * ds / dy ** 2) * ((g[1:-1, :-2] - c) + (g[1:-1, 2:] - c))
    if a[0, 1] != 0.0:
        wxy = (g[2:, 2:] - g[2:, :-2] - g[:-2, 2:] + g[:-2, :-2]) / (4 * dx * dy)
        out = out + a[0, 1] * ds * wxy
    return out


def stable_step(field: GridField, sigma0):
    a = _diffusion_matrix(sigma0, field.dim)
    return STABILITY * min(field.spacing) ** 2 / float(np.max(np.diag(a)))


def cole_hopf_solve(terminal: GridField, sigma0, steps=None, n_out=1, t_end=0.0):
    """Solve backward from ``terminal`` (at t = T) to ``t_end``.

    ``sigma0`` is a positive scalar or a constant d x d matrix.  ``steps``
    internal steps of size (T - t_end)/steps are taken (the smallest stable
    count when omitted).  Returns ``n_out + 1`` snapshots ordered from t = T
    down to t_end.
    """
    d = terminal.dim
    a = _diffusion_matrix(sigma0, d)
    span = terminal.t - t_end
    if span <= 0:
        raise ConfigError("the solver only runs backward from terminal data (t_end < T)",
                          field="kpz.t_end")
    bound = stable_step(terminal, sigma0)
    if steps is None:
        steps = max(1, math.ceil(span / bound * (1 - 1e-12)))
    ds = span / steps
    if ds > bound * (1 + 1e-12):
        raise UnstableParameters(
            f"step {ds:.3g} exceeds stability bound {bound:.3g}; need steps >= {math.ceil(span / bound)}"
        )
    if n_out < 1 or n_out > steps:
        raise ConfigError("need 1 <= n_out <= steps", field="kpz.n_out")
    vT = np.asarray(terminal.values, dtype=float)
    if not np.all(np.isfinite(vT)):
        raise ConfigError("terminal values must be finite", field="kpz")
    shift = float(vT.max())
    w = np.exp(vT - shift)
    if np.any(w <= 0.0):
        raise NonPositiveW("exp(v) underflows on the grid; terminal data too negative for the range")
    save = {round(k * steps / n_out): k for k in range(n_out + 1)}
    out = [terminal]
    for n in range(1, steps + 1):
        w = _heat_step(w, a, ds, terminal.spacing)
        if n in save:
            if np.any(w <= 0.0):
                raise NonPositiveW(f"w underflowed to 0 at step {n}")
            t = t_end if n == steps else terminal.t - n * ds
            out.append(GridField(terminal.axes, np.log(w) + shift, t))
    return out


def grid_kpz_residual(earlier: GridField, later: GridField, sigma0):
    """KPZ residual between two snapshots, centred in time; boundary nodes
    are set to NaN."""
    a = _diffusion_matrix(sigma0, earlier.dim)
    dt = later.t - earlier.t
    dvdt = (later.values - earlier.values) / dt

    def spatial(v, spacing):
        inner = [slice(1, -1)] * v.ndim
        if v.ndim == 1:
            (dx,) = spacing
            vx = (v[2:] - v[:-2]) / (2 * dx)
            vxx = (v[2:] - 2 * v[1:-1] + v[:-2]) / dx ** 2
            return 0.5 * a[0, 0] * (vxx + vx ** 2)
        dx, dy = spacing
        c = v[tuple(inner)]
        vx = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * dx)
        vy = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * dy)
        vxx = (v[2:, 1:-1] - 2 * c + v[:-2, 1:-1]) / dx ** 2
        vyy = (v[1:-1, 2:] - 2 * c + v[1:-1, :-2]) / dy ** 2
        vxy = (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4 * dx * dy)
        tr = a[0, 0] * vxx + 2 * a[0, 1] * vxy + a[1, 1] * vyy
        grad2 = a[0, 0] * vx ** 2 + 2 * a[0, 1] * vx * vy + a[1, 1] * vy ** 2
        return 0.5 * (tr + grad2)

    inner = tuple([slice(1, -1)] * earlier.dim)
    s = 0.5 * (spatial(earlier.values, earlier.spacing) + spatial(later.values, later.spacing))
    out = np.full(earlier.values.shape, np.nan)
    out[inner] = dvdt[inner] + s
    return out
