"""Small dense linear algebra and finite differences.

Every routine accepts a leading batch shape, so a whole ensemble of states
``x[..., d]`` can be pushed through at once.  Reductions are written as
explicit loops over the (tiny) matrix dimension so that a given row gives
bitwise-identical results no matter how many other rows share the batch.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NonFiniteValue, SingularMatrix

PIVOT_RTOL = 1e-13
GRAD_STEP = 1e-5
HESS_STEP = 1e-4
TIME_STEP = 1e-5


def _square(M):
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise DimensionMismatch(f"expected square matrix, got shape {M.shape}")
    return M


def mat_inverse(M):
    """Invert ``M`` (shape ``(..., d, d)``) by Gauss-Jordan elimination with
    partial pivoting.

    Raises SingularMatrix when a pivot is at most ``1e-13`` times the largest
    absolute row sum of the original matrix.
    """
    M = _square(M)
    d = M.shape[-1]
    batch = M.shape[:-2]
    A = M.reshape(-1, d, d).copy()
    n = A.shape[0]
    inv = np.broadcast_to(np.eye(d), (n, d, d)).copy()
    scale = np.abs(A).sum(axis=-1).max(axis=-1)
    rows = np.arange(n)
    for col in range(d):
        piv = col + np.argmax(np.abs(A[:, col:, col]), axis=-1)
        bad = np.abs(A[rows, piv, col]) <= PIVOT_RTOL * scale
        if np.any(bad) or not np.all(np.isfinite(A[rows, piv, col])):
            raise SingularMatrix(
                f"pivot below {PIVOT_RTOL:g} x row norm in column {col} "
                f"(batch entries {np.flatnonzero(bad)[:5].tolist()})"
            )
        swap = piv != col
        if np.any(swap):
            r = rows[swap]
            p = piv[swap]
            A[r, col], A[r, p] = A[r, p].copy(), A[r, col].copy()
            inv[r, col], inv[r, p] = inv[r, p].copy(), inv[r, col].copy()
        pivot = A[:, col, col][:, None].copy()
        A[:, col] = A[:, col] / pivot
        inv[:, col] = inv[:, col] / pivot
        for row in range(d):
            if row == col:
                continue
            factor = A[:, row, col][:, None].copy()
            A[:, row] = A[:, row] - factor * A[:, col]
            inv[:, row] = inv[:, row] - factor * inv[:, col]
    return inv.reshape(batch + (d, d))


def matmul(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim < 2 or B.ndim < 2 or A.shape[-1] != B.shape[-2]:
        raise DimensionMismatch(f"cannot multiply {A.shape} by {B.shape}")
    out = A[..., :, 0, None] * B[..., None, 0, :]
    for k in range(1, A.shape[-1]):
        out = out + A[..., :, k, None] * B[..., None, k, :]
    return out


def matvec(A, v):
    A = np.asarray(A, dtype=float)
    v = np.asarray(v, dtype=float)
    if A.ndim < 2 or v.ndim < 1 or A.shape[-1] != v.shape[-1]:
        raise DimensionMismatch(f"cannot apply {A.shape} to {v.shape}")
    out = A[..., :, 0] * v[..., 0, None]
    for k in range(1, A.shape[-1]):
        out = out + A[..., :, k] * v[..., k, None]
    return out


def inner(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-1:] != v.shape[-1:]:
        raise DimensionMismatch(f"cannot pair {u.shape} with {v.shape}")
    out = u[..., 0] * v[..., 0]
    for k in range(1, u.shape[-1]):
        out = out + u[..., k] * v[..., k]
    return out


def transpose(M):
    M = np.asarray(M, dtype=float)
    if M.ndim < 2:
        raise DimensionMismatch(f"transpose needs a matrix, got shape {M.shape}")
    return np.swapaxes(M, -1, -2)


def trace(M):
    M = _square(M)
    out = M[..., 0, 0]
    for i in range(1, M.shape[-1]):
        out = out + M[..., i, i]
    return out


def _finite(values, what):
    if not np.all(np.isfinite(values)):
        raise NonFiniteValue(f"non-finite value in {what} stencil")
    return values


def _default_step(x, base):
    x = np.asarray(x, dtype=float)
    return base * np.maximum(1.0, np.max(np.abs(x), axis=-1))


def fd_gradient(f, t, x, h=None):
    """Central-difference gradient of the scalar field ``f(t, x)``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    h = _default_step(x, GRAD_STEP) if h is None else np.broadcast_to(h, x.shape[:-1])
    hcol = np.asarray(h)[..., None]
    grad = np.empty(x.shape)
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        fp = _finite(f(t, x + hcol * e), "gradient")
        fm = _finite(f(t, x - hcol * e), "gradient")
        grad[..., i] = (fp - fm) / (2.0 * h)
    return grad


def fd_hessian(f, t, x, h=None):
    """Central-difference Hessian, symmetric by construction."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    h = _default_step(x, HESS_STEP) if h is None else np.broadcast_to(h, x.shape[:-1])
    hcol = np.asarray(h)[..., None]
    h2 = np.asarray(h) ** 2
    eye = np.eye(d)
    f0 = _finite(f(t, x), "hessian")
    H = np.empty(x.shape + (d,))
    for i in range(d):
        fp = _finite(f(t, x + hcol * eye[i]), "hessian")
        fm = _finite(f(t, x - hcol * eye[i]), "hessian")
        H[..., i, i] = (fp - 2.0 * f0 + fm) / h2
        for j in range(i + 1, d):
            step_p = hcol * (eye[i] + eye[j])
            step_m = hcol * (eye[i] - eye[j])
            fpp = _finite(f(t, x + step_p), "hessian")
            fpm = _finite(f(t, x + step_m), "hessian")
            fmp = _finite(f(t, x - step_m), "hessian")
            fmm = _finite(f(t, x - step_p), "hessian")
            mixed = (fpp - fpm - fmp + fmm) / (4.0 * h2)
            H[..., i, j] = mixed
            H[..., j, i] = mixed
    return H


def fd_time_derivative(f, t, x, h=None):
    """Time derivative by central differences, or a three-point forward
    stencil where ``t < h`` (the field may be undefined for negative times).
    """
    x = np.asarray(x, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
    if h is None:
        h = TIME_STEP * np.maximum(1.0, np.abs(t))
    h = np.broadcast_to(np.asarray(h, dtype=float), t.shape)
    forward = t < h
    f0 = f(t, x)
    fp = _finite(f(t + h, x), "time-derivative")
    if np.all(forward):
        fpp = _finite(f(t + 2.0 * h, x), "time-derivative")
        _finite(f0, "time-derivative")
        return (-3.0 * f0 + 4.0 * fp - fpp) / (2.0 * h)
    tm = np.where(forward, t, t - h)
    fm = _finite(f(tm, x), "time-derivative")
    central = (fp - fm) / (2.0 * h)
    if not np.any(forward):
        return central
    fpp = _finite(f(t + 2.0 * h, x), "time-derivative")
    _finite(f0, "time-derivative")
    one_sided = (-3.0 * f0 + 4.0 * fp - fpp) / (2.0 * h)
    return np.where(forward, one_sided, central)
