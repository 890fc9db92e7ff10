"""One-dimensional reduction: u = b / sigma^2 and the generalized,
time-reversed Burgers equation

    du/dt = -1/2 d2/dx2 Psi1(u) - 1/2 d/dx Psi2(u),
    Psi1(r) = int Phi(r)/r dr,  Psi2(r) = r Phi(r),

for a structure function Phi with b = Phi(u).  Scalar fields here take a
scalar (or array) ``x`` rather than a state vector.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from . import numerics as nm
from .errors import QuadratureFailure, ZeroDiffusion

BURGERS_STEP = 1e-3


@dataclass(frozen=True)
class Monomial:
    """Phi(r) = coef * r**power; recognised for closed-form Psi1."""

    coef: float
    power: int

    def __call__(self, r):
        return self.coef * np.asarray(r, dtype=float) ** self.power


def classical_phi(sigma0):
    return Monomial(float(sigma0) ** 2, 1)


def porous_phi(m):
    return Monomial(float(m), int(m))


def u_from_coefficients(b: Callable, sigma: Callable) -> Callable:
    """u(t, x) = b(t, x) / sigma(t, x)^2."""

    def u(t, x):
        s = np.asarray(sigma(t, x), dtype=float)
        if np.any(np.abs(s) < 1e-12):
            raise ZeroDiffusion("sigma vanishes; u = b / sigma^2 is undefined")
        return np.asarray(b(t, x), dtype=float) / s ** 2

    return u


def u_from_bundle(fb) -> Callable:
    """The 1-D ratio for a FieldBundle with dim 1."""
    return u_from_coefficients(
        lambda t, x: fb.b(t, np.asarray(x, dtype=float)[..., None])[..., 0],
        lambda t, x: fb.sig(t, np.asarray(x, dtype=float)[..., None])[..., 0, 0],
    )


def u_from_potential(v) -> Callable:
    """u = dv/dx, the Burgers field attached to a 1-D KPZ solution."""
    return lambda t, x: v.grad(t, np.asarray(x, dtype=float)[..., None])[..., 0]


def _numeric_psi1(phi, r_ref):
    def integrand(s):
        if s == 0.0:
            eps = 1e-6
            return float((phi(eps) - phi(-eps)) / (2 * eps))
        return float(phi(s)) / s

    phi0 = float(phi(0.0))

    def one(r):
        lo, hi = min(r_ref, r), max(r_ref, r)
        if lo <= 0.0 <= hi and abs(phi0) > 1e-14 and lo != hi:
            raise QuadratureFailure(
                f"Phi(0) = {phi0:g} != 0 makes Phi(r)/r non-integrable on [{lo:g}, {hi:g}]"
            )
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, _ = integrate.quad(integrand, r_ref, r, epsabs=1e-13, epsrel=1e-12, limit=200)
            except integrate.IntegrationWarning as exc:
                raise QuadratureFailure(f"quadrature of Phi(r)/r on [{r_ref:g}, {r:g}]: {exc}") from None
        return val

    def psi1(r):
        r = np.asarray(r, dtype=float)
        if r.ndim == 0:
            return one(float(r))
        return np.array([one(float(s)) for s in r.ravel()]).reshape(r.shape)

    return psi1


def psi_from_phi(phi: Callable, r_ref: float = 0.0, numeric: bool = False):
    """Return (Psi1, Psi2) with Psi1(r_ref) = 0.

    A Monomial with power >= 1 gets the closed form coef (r^k - r_ref^k) / k
    unless ``numeric`` forces adaptive quadrature.
    """
    if isinstance(phi, Monomial) and phi.power >= 1 and not numeric:
        k = phi.power
        c = phi.coef / k

        def psi1(r):
            return c * (np.asarray(r, dtype=float) ** k - r_ref ** k)
    else:
        psi1 = _numeric_psi1(phi, float(r_ref))

    def psi2(r):
        r = np.asarray(r, dtype=float)
        return r * phi(r)

    return psi1, psi2


@dataclass(frozen=True)
class Burgers1DModel:
    u: Callable
    phi: Callable
    psi1: Callable
    psi2: Callable

    @classmethod
    def from_phi(cls, u, phi, r_ref=0.0, numeric=False):
        psi1, psi2 = psi_from_phi(phi, r_ref, numeric)
        return cls(u, phi, psi1, psi2)


def _outer_derivatives(model, t, x, h):
    x = np.asarray(x, dtype=float)
    u_m, u_0, u_p = (model.u(t, x - h), model.u(t, x), model.u(t, x + h))
    p1 = [model.psi1(u) for u in (u_m, u_0, u_p)]
    p2m, p2p = model.psi2(u_m), model.psi2(u_p)
    d2_psi1 = (p1[2] - 2.0 * p1[1] + p1[0]) / h ** 2
    d1_psi2 = (p2p - p2m) / (2.0 * h)
    return d2_psi1, d1_psi2


def burgers_residual(model: Burgers1DModel, t, x, h=BURGERS_STEP):
    """du/dt + 1/2 d2/dx2 Psi1(u) + 1/2 d/dx Psi2(u) by central differences
    applied to x -> Psi(u(t, x))."""
    x = np.asarray(x, dtype=float)
    dudt = nm.fd_time_derivative(lambda s, y: model.u(s, y[..., 0]), t, x[..., None])
    d2_psi1, d1_psi2 = _outer_derivatives(model, t, x, h)
    return dudt + 0.5 * d2_psi1 + 0.5 * d1_psi2


def harmonic_residual(model: Burgers1DModel, x, h=BURGERS_STEP):
    """Stationary residual 1/2 d2/dx2 Psi1(u) + 1/2 d/dx Psi2(u) for a
    time-independent u (evaluated at t = 0)."""
    d2_psi1, d1_psi2 = _outer_derivatives(model, 0.0, x, h)
    return 0.5 * d2_psi1 + 0.5 * d1_psi2


def phi_consistency(b: Callable, sigma: Callable, phi: Callable, t, x):
    """max |b - Phi(b / sigma^2)| over the sample points."""
    u = u_from_coefficients(b, sigma)
    return float(np.max(np.abs(np.asarray(b(t, x)) - phi(u(t, x)))))
