"""SDE coefficients, potentials and the built-in scenarios.

A field is any callable ``f(t, x)`` taking a batch of states ``x[..., d]``;
drifts return ``[..., d]``, diffusion matrices ``[..., d, d]`` and scalar
potentials ``[...]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import numerics as nm
from .errors import ConfigError


@dataclass(frozen=True)
class Potential:
    """Scalar field v(t, x) with optional analytic derivatives.

    Missing derivatives fall back to the finite-difference operators, which
    presume v is C^1 in t and C^2 in x.
    """

    value: Callable
    gradient: Optional[Callable] = None
    hessian: Optional[Callable] = None
    time_derivative: Optional[Callable] = None
    name: str = "v"

    def __call__(self, t, x):
        return self.value(t, x)

    def grad(self, t, x):
        if self.gradient is not None:
            return np.asarray(self.gradient(t, x), dtype=float)
        return nm.fd_gradient(self.value, t, x)

    def hess(self, t, x):
        if self.hessian is not None:
            return np.asarray(self.hessian(t, x), dtype=float)
        return nm.fd_hessian(self.value, t, x)

    def dt(self, t, x):
        if self.time_derivative is not None:
            return np.asarray(self.time_derivative(t, x), dtype=float)
        return nm.fd_time_derivative(self.value, t, x)

    @property
    def is_analytic(self):
        return self.gradient is not None


@dataclass(frozen=True)
class FieldBundle:
    """Drift b and diffusion sigma of dX = b dt + sigma dB.

    ``exact_drift`` marks drifts whose values are exact up to rounding
    (closed forms, or built from an analytic gradient); it selects the strict
    tolerance of the curl test.  ``constant_sigma`` is set when sigma is known
    not to depend on (t, x).
    """

    dim: int
    drift: Callable
    sigma: Callable
    name: str = ""
    exact_drift: bool = True
    constant_sigma: Optional[np.ndarray] = None

    def b(self, t, x):
        return np.asarray(self.drift(t, x), dtype=float)

    def sig(self, t, x):
        return np.asarray(self.sigma(t, x), dtype=float)


def constant_matrix(M):
    M = np.array(M, dtype=float)
    M.setflags(write=False)

    def sigma(t, x):
        x = np.asarray(x)
        shape = np.broadcast_shapes(np.shape(t), x.shape[:-1])
        return np.broadcast_to(M, shape + M.shape)

    return sigma


def eval_a(fb: FieldBundle, t, x):
    """Diffusion matrix a = sigma sigma^T, exactly symmetric."""
    S = fb.sig(t, x)
    A = nm.matmul(S, nm.transpose(S))
    return 0.5 * (A + nm.transpose(A))


def drift_from_potential(v: Potential, sigma: Callable) -> Callable:
    """Gradient-form drift b = sigma sigma^T grad v."""

    def drift(t, x):
        S = np.asarray(sigma(t, x), dtype=float)
        A = nm.matmul(S, nm.transpose(S))
        A = 0.5 * (A + nm.transpose(A))
        return nm.matvec(A, v.grad(t, x))

    return drift


def gamma_field(fb: FieldBundle) -> Callable:
    """gamma = -sigma^{-1} b, the integrand of the Girsanov exponent."""

    def gamma(t, x):
        return -nm.matvec(nm.mat_inverse(fb.sig(t, x)), fb.b(t, x))

    return gamma


@dataclass
class SelfCheckReport:
    max_deviation: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures


def potential_self_check(v: Potential, sample, rtol=1e-4) -> SelfCheckReport:
    """Compare analytic derivatives of ``v`` against finite differences at
    each ``(t, x)`` in ``sample``.  A point fails when the deviation exceeds
    ``rtol * (1 + |analytic|)``.
    """
    report = SelfCheckReport()
    checks = [
        ("gradient", v.gradient, nm.fd_gradient),
        ("hessian", v.hessian, nm.fd_hessian),
        ("time_derivative", v.time_derivative, nm.fd_time_derivative),
    ]
    for kind, analytic, fd in checks:
        if analytic is None:
            continue
        worst = 0.0
        for t, x in sample:
            x = np.asarray(x, dtype=float)
            exact = np.asarray(analytic(t, x), dtype=float)
            approx = fd(v.value, t, x)
            dev = np.abs(exact - approx)
            worst = max(worst, float(np.max(dev)))
            if np.any(dev > rtol * (1.0 + np.abs(exact))):
                report.failures.append((kind, float(t), x.tolist(), float(np.max(dev))))
        report.max_deviation[kind] = worst
    return report


# ---------------------------------------------------------------------------
# Built-in scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """A field bundle together with its candidate potential.

    ``expect`` records what theory predicts for the pair: "independent" when
    the drift is gradient-form and the potential solves the KPZ equation.
    """

    name: str
    fields: FieldBundle
    potential: Potential
    x0: np.ndarray
    expect: str
    params: dict
    phi: Optional[Callable] = None
    horizon_limit: float = np.inf


def _zeros(t, x):
    x = np.asarray(x, dtype=float)
    return np.zeros(np.broadcast_shapes(np.shape(t), x.shape[:-1]))


def zero_potential(dim):
    return Potential(
        value=_zeros,
        gradient=lambda t, x: np.zeros(np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]) + (dim,)),
        hessian=lambda t, x: np.zeros(np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]) + (dim, dim)),
        time_derivative=_zeros,
        name="zero",
    )


def linear_scenario(c=(0.7, -0.4), sigma=((1.0, 0.3), (0.0, 0.9)), x0=None):
    """v = <c, x> - |sigma^T c|^2 t / 2 with constant sigma."""
    c = np.array(c, dtype=float)
    S = np.array(sigma, dtype=float)
    d = c.size
    if S.shape != (d, d):
        raise ConfigError(f"sigma must be {d}x{d}", field="params.sigma")
    rate = 0.5 * float(np.sum((S.T @ c) ** 2))

    def value(t, x):
        return nm.inner(np.asarray(x, dtype=float), c) - rate * np.asarray(t, dtype=float)

    v = Potential(
        value=value,
        gradient=lambda t, x: np.broadcast_to(c, np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]) + (d,)),
        hessian=lambda t, x: np.zeros(np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]) + (d, d)),
        time_derivative=lambda t, x: np.full(np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]), -rate),
        name="linear",
    )
    sigma_f = constant_matrix(S)
    fb = FieldBundle(d, drift_from_potential(v, sigma_f), sigma_f, "linear", True, S)
    x0 = np.zeros(d) if x0 is None else np.array(x0, dtype=float)
    return Scenario("linear", fb, v, x0, "independent",
                    {"c": c.tolist(), "sigma": S.tolist()})


def bridge_potential(dim=1, sigma0=1.0, T0=2.0):
    """Log of the centred Gaussian density with variance sigma0^2 (T0 - t)."""
    s2 = float(sigma0) ** 2

    def tau(t):
        return T0 - np.asarray(t, dtype=float)

    def value(t, x):
        x = np.asarray(x, dtype=float)
        return -nm.inner(x, x) / (2 * s2 * tau(t)) - 0.5 * dim * np.log(2 * np.pi * s2 * tau(t))

    def gradient(t, x):
        x = np.asarray(x, dtype=float)
        return -x / (s2 * np.asarray(tau(t))[..., None])

    def hessian(t, x):
        shape = np.broadcast_shapes(np.shape(t), np.shape(x)[:-1])
        k = np.broadcast_to(-1.0 / (s2 * tau(t)), shape)
        return k[..., None, None] * np.eye(dim)

    def time_derivative(t, x):
        x = np.asarray(x, dtype=float)
        return -nm.inner(x, x) / (2 * s2 * tau(t) ** 2) + 0.5 * dim / tau(t)

    return Potential(value, gradient, hessian, time_derivative, name="bridge")


def bridge_scenario(dim=1, sigma0=1.0, T0=2.0, x0=None):
    """Brownian bridge to 0 at T0: b = -x / (T0 - t), sigma = sigma0 I."""
    if sigma0 <= 0 or T0 <= 0:
        raise ConfigError("sigma0 and T0 must be positive", field="params")
    v = bridge_potential(dim, sigma0, T0)
    S = float(sigma0) * np.eye(dim)
    sigma_f = constant_matrix(S)
    fb = FieldBundle(dim, drift_from_potential(v, sigma_f), sigma_f, "bridge", True, S)
    x0 = np.zeros(dim) if x0 is None else np.array(x0, dtype=float)
    return Scenario("bridge", fb, v, x0, "independent",
                    {"dim": dim, "sigma0": sigma0, "T0": T0}, horizon_limit=T0)


def rotational_scenario(kappa=1.0, x0=(1.0, 0.0)):
    """b = kappa (-x2, x1), sigma = I: curl 2 kappa, no potential exists."""

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        b = np.stack([-kappa * x[..., 1], kappa * x[..., 0]], axis=-1)
        return np.broadcast_to(b, np.broadcast_shapes(np.shape(t), x.shape[:-1]) + (2,))

    S = np.eye(2)
    fb = FieldBundle(2, drift, constant_matrix(S), "rotational", True, S)
    return Scenario("rotational", fb, zero_potential(2), np.array(x0, dtype=float),
                    "dependent", {"kappa": kappa})


def ou1d_scenario(theta=1.0, sigma0=1.0, x0=(1.0,)):
    """Stationary Ornstein-Uhlenbeck drift -theta x.

    The drift is a gradient, b = sigma0^2 d/dx v with v = -theta x^2/(2 sigma0^2),
    but no time-dependent correction of v solves the KPZ equation, so the
    density stays path dependent even though the curl test passes.
    """
    s2 = float(sigma0) ** 2

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(-theta * x, np.broadcast_shapes(np.shape(t), x.shape[:-1]) + (1,))

    v = Potential(
        value=lambda t, x: np.broadcast_to(
            -theta * np.asarray(x, dtype=float)[..., 0] ** 2 / (2 * s2),
            np.broadcast_shapes(np.shape(t), np.shape(x)[:-1])),
        gradient=lambda t, x: np.broadcast_to(
            -theta * np.asarray(x, dtype=float) / s2,
            np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]) + (1,)),
        hessian=lambda t, x: np.full(
            np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]) + (1, 1), -theta / s2),
        time_derivative=_zeros,
        name="ou1d",
    )
    S = np.array([[float(sigma0)]])
    fb = FieldBundle(1, drift, constant_matrix(S), "ou1d", True, S)
    return Scenario("ou1d", fb, v, np.array(x0, dtype=float), "dependent",
                    {"theta": theta, "sigma0": sigma0},
                    phi=lambda r: s2 * np.asarray(r, dtype=float))


def porous1d_scenario(m=2, c=0.5, x0=(0.0,)):
    """Porous-media structure function Phi(r) = m r^m with the constant
    solution u = c: sigma = sqrt(m) c^((m-1)/2), b = m c^m and
    v = c x - m c^(m+1) t / 2.
    """
    if m < 1 or c <= 0:
        raise ConfigError("porous1d needs m >= 1 and c > 0", field="params")
    sig = np.sqrt(m) * c ** ((m - 1) / 2)
    rate = 0.5 * m * c ** (m + 1)
    b = m * c ** m

    def drift(t, x):
        return np.full(np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]) + (1,), b)

    v = Potential(
        value=lambda t, x: c * np.asarray(x, dtype=float)[..., 0] - rate * np.asarray(t, dtype=float),
        gradient=lambda t, x: np.full(np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]) + (1,), c),
        hessian=lambda t, x: np.zeros(np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]) + (1, 1)),
        time_derivative=lambda t, x: np.full(np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]), -rate),
        name="porous1d",
    )
    S = np.array([[sig]])
    fb = FieldBundle(1, drift, constant_matrix(S), "porous1d", True, S)
    return Scenario("porous1d", fb, v, np.array(x0, dtype=float), "independent",
                    {"m": m, "c": c},
                    phi=lambda r: m * np.asarray(r, dtype=float) ** m)


SCENARIOS = {
    "linear": linear_scenario,
    "bridge": bridge_scenario,
    "rotational": rotational_scenario,
    "ou1d": ou1d_scenario,
    "porous1d": porous1d_scenario,
}


def build_scenario(name, **params) -> Scenario:
    try:
        factory = SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}",
                          field="scenario") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(str(exc), field="params") from None
