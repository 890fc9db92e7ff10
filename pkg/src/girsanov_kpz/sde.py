"""Euler-Maruyama simulation with a reproducible Gaussian stream."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .errors import ConfigError, NonFiniteState
from .fields import FieldBundle

log = logging.getLogger(__name__)

DEFAULT_CHUNK = 512


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0 or self.N < 1:
            raise ConfigError(f"need T > 0 and N >= 1, got T={self.T}, N={self.N}", field="T")

    @classmethod
    def from_dt(cls, T, dt):
        if not dt > 0:
            raise ConfigError(f"dt must be positive, got {dt}", field="dt")
        N = int(round(T / dt))
        if N < 1 or abs(N * dt - T) > 1e-12 * T:
            raise ConfigError(f"dt={dt!r} does not divide T={T!r}", field="dt")
        return cls(float(T), N)

    @property
    def dt(self):
        return self.T / self.N

    @property
    def times(self):
        return np.arange(self.N + 1) * self.dt

    def refine(self, factor):
        return TimeGrid(self.T, self.N * factor)


@dataclass(frozen=True)
class GaussianStream:
    """Standard normals keyed by (seed, path, step, component).

    Each path owns an independent Philox stream seeded from the pair
    ``(seed, path_id)``; step ``n`` component ``k`` is the value at offset
    ``n * d + k`` of that stream.  Values therefore never depend on which
    other paths are drawn, or in what order.
    """

    seed: int

    def normals(self, path_id, n_steps, dim):
        ss = np.random.SeedSequence([int(self.seed) & (2**64 - 1), int(path_id)])
        rng = np.random.Generator(np.random.Philox(ss))
        return rng.standard_normal((n_steps, dim))

    def increments(self, path_id, grid: TimeGrid, dim):
        """Brownian increments dB_n ~ N(0, dt I) for one path."""
        return self.normals(path_id, grid.N, dim) * np.sqrt(grid.dt)

    def batch_increments(self, path_ids, grid: TimeGrid, dim):
        return np.stack([self.increments(p, grid, dim) for p in path_ids])


def coarsen(increments, factor):
    """Sum groups of ``factor`` consecutive fine increments (axis -2)."""
    inc = np.asarray(increments)
    n = inc.shape[-2]
    if n % factor:
        raise ConfigError(f"{n} steps cannot be coarsened by {factor}", field="dt_list")
    shaped = inc.reshape(inc.shape[:-2] + (n // factor, factor, inc.shape[-1]))
    out = shaped[..., 0, :]
    for j in range(1, factor):
        out = out + shaped[..., j, :]
    return out


@dataclass(frozen=True)
class PathRecord:
    grid: TimeGrid
    states: np.ndarray  # (N+1, d)
    increments: np.ndarray  # (N, d)
    path_id: int = 0


@dataclass
class Ensemble:
    """Paths stacked along axis 0; blown-up paths are listed in ``failures``
    (path id -> step index) and excluded via ``ok``."""

    grid: TimeGrid
    states: np.ndarray  # (P, N+1, d)
    increments: np.ndarray  # (P, N, d)
    path_ids: np.ndarray
    failures: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.path_ids)

    def __getitem__(self, i):
        return PathRecord(self.grid, self.states[i], self.increments[i], int(self.path_ids[i]))

    @property
    def ok(self):
        if not self.failures:
            return np.ones(len(self), dtype=bool)
        return ~np.isin(self.path_ids, list(self.failures))


def em_step(fb: FieldBundle, t, x, dt, dB):
    """x + b(t, x) dt + sigma(t, x) dB, evaluated at the left endpoint."""
    x = np.asarray(x, dtype=float)
    out = x + fb.b(t, x) * dt + nm.matvec(fb.sig(t, x), dB)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("Euler-Maruyama update is not finite")
    return out


def _integrate(fb, x0, grid, increments):
    """Vectorised EM over a batch; returns states and the first bad step per row
    (-1 if none).  Rows freeze at their last finite state after a blow-up."""
    P = increments.shape[0]
    d = fb.dim
    states = np.empty((P, grid.N + 1, d))
    states[:, 0] = x0
    bad = np.full(P, -1)
    x = states[:, 0].copy()
    dt = grid.dt
    with np.errstate(all="ignore"):
        for n in range(grid.N):
            t = n * dt
            nxt = x + fb.b(t, x) * dt + nm.matvec(fb.sig(t, x), increments[:, n])
            finite = np.all(np.isfinite(nxt), axis=-1)
            if not np.all(finite):
                fresh = (~finite) & (bad < 0)
                bad[fresh] = n
                nxt = np.where(finite[:, None], nxt, x)
            states[:, n + 1] = nxt
            x = nxt
    return states, bad


def simulate_path(fb: FieldBundle, x0, grid: TimeGrid, stream: GaussianStream,
                  path_id: int = 0, increments=None) -> PathRecord:
    x0 = np.asarray(x0, dtype=float).reshape(fb.dim)
    if increments is None:
        increments = stream.increments(path_id, grid, fb.dim)
    states, bad = _integrate(fb, x0, grid, increments[None])
    if bad[0] >= 0:
        raise NonFiniteState(f"path {path_id} blew up at step {bad[0]}",
                             step=int(bad[0]), path_id=path_id)
    return PathRecord(grid, states[0], np.asarray(increments), path_id)


def _chunks(n, size):
    return [np.arange(s, min(s + size, n)) for s in range(0, n, size)]


def simulate_ensemble(fb: FieldBundle, x0, grid: TimeGrid, seed: int, n_paths: int,
                      threads: int = 1, increments=None, chunk: int = DEFAULT_CHUNK,
                      first_path: int = 0) -> Ensemble:
    """Simulate paths ``first_path .. first_path + n_paths - 1``; path p draws
    from the stream keyed (seed, p).

    ``increments`` (shape (P, N, d)) overrides the stream, e.g. for coupled
    refinement.  The result does not depend on ``threads`` or ``chunk``.
    """
    if n_paths < 1:
        raise ConfigError("n_paths must be >= 1", field="n_paths")
    x0 = np.asarray(x0, dtype=float).reshape(fb.dim)
    stream = GaussianStream(seed)
    ids = np.arange(first_path, first_path + n_paths)

    def work(block):
        if increments is None:
            inc = stream.batch_increments(ids[block], grid, fb.dim)
        else:
            inc = increments[block]
        states, bad = _integrate(fb, x0, grid, inc)
        return inc, states, bad

    blocks = _chunks(n_paths, chunk)
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(b) for b in blocks]
    inc = np.concatenate([r[0] for r in results])
    states = np.concatenate([r[1] for r in results])
    bad = np.concatenate([r[2] for r in results])
    failures = {int(p): int(s) for p, s in zip(ids, bad) if s >= 0}
    if failures:
        log.warning("%d of %d paths blew up and are excluded", len(failures), n_paths)
    return Ensemble(grid, states, inc, ids, failures)
