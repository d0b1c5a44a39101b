"""Compositional data primitives on the unit simplex.

All functions work along the last axis, so a 2-D array is treated as a stack
of compositions (one per row).  Inputs are validated; outputs are new arrays.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import (
    DeltaTooLarge,
    DimensionMismatch,
    NegativeDetectionLimit,
    NonPositiveEntry,
    TooShort,
)

# parts below this are rejected: log of denormals wrecks clr accuracy
TINY = 1e-300
# floor used when clamping an infeasible inverse alpha-transform
CLAMP_FLOOR = 1e-15


def _positive(v, name="v"):
    v = np.asarray(v, dtype=float)
    if v.ndim == 0 or v.shape[-1] < 2:
        raise TooShort(f"{name} needs at least 2 parts, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonPositiveEntry(f"{name} has non-finite entries")
    if np.any(v < TINY):
        raise NonPositiveEntry(f"{name} has entries <= {TINY:g}")
    return v


def _same_dim(x, y):
    if x.shape[-1] != y.shape[-1]:
        raise DimensionMismatch(f"dimension {x.shape[-1]} != {y.shape[-1]}")


def closure(v):
    """Rescale positive vector(s) to unit sum."""
    v = _positive(v)
    return v / v.sum(axis=-1, keepdims=True)


def uniform(D):
    return np.full(D, 1.0 / D)


def perturb(x, y):
    x, y = _positive(x, "x"), _positive(y, "y")
    _same_dim(x, y)
    return closure(x * y)


def power(x, a):
    return closure(_positive(x) ** a)


def perturb_sub(x, y):
    """Negative perturbation ``x (-) y``."""
    x, y = _positive(x, "x"), _positive(y, "y")
    _same_dim(x, y)
    return closure(x / y)


def aitchison_inner(x, y):
    """Aitchison inner product from the pairwise log-ratio double sum."""
    x, y = _positive(x, "x"), _positive(y, "y")
    _same_dim(x, y)
    lx, ly = np.log(x), np.log(y)
    rx = lx[..., :, None] - lx[..., None, :]
    ry = ly[..., :, None] - ly[..., None, :]
    D = x.shape[-1]
    return (rx * ry).sum(axis=(-1, -2)) / (2 * D)


def aitchison_norm(x):
    return np.sqrt(aitchison_inner(x, x))


def aitchison_distance(x, y):
    return aitchison_norm(perturb_sub(x, y))


def clr(x):
    lx = np.log(_positive(x, "x"))
    return lx - lx.mean(axis=-1, keepdims=True)


def clr_inv(w):
    w = np.asarray(w, dtype=float)
    if w.shape[-1] < 2:
        raise TooShort("clr coordinates need at least 2 entries")
    e = np.exp(w - w.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@lru_cache(maxsize=None)
def _helmert(D):
    H = np.zeros((D - 1, D))
    for k in range(1, D):
        c = 1.0 / np.sqrt(k * (k + 1))
        H[k - 1, :k] = c
        H[k - 1, k] = -k * c
    H.setflags(write=False)
    return H


def helmert_sub(D):
    """(D-1) x D Helmert sub-matrix with orthonormal, zero-sum rows.

    Row k holds k equal positive entries, a negative pivot, then zeros.
    The returned array is read-only and shared between calls.
    """
    D = int(D)
    if D < 2:
        raise TooShort(f"Helmert sub-matrix needs D >= 2, got {D}")
    return _helmert(D)


def ilr(x):
    w = clr(x)
    return w @ helmert_sub(w.shape[-1]).T


def ilr_inv(z):
    z = np.asarray(z, dtype=float)
    return clr_inv(z @ helmert_sub(z.shape[-1] + 1))


def _check_alpha(a):
    a = float(a)
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {a}")
    return a


def alpha_transform(x, a):
    """Box-Cox type power transform of the simplex into R^(D-1).

    ``a == 0`` is the isometric log-ratio transform.
    """
    a = _check_alpha(a)
    if a == 0.0:
        return ilr(x)
    x = _positive(x, "x")
    D = x.shape[-1]
    u = x**a
    u = u / u.sum(axis=-1, keepdims=True)
    return (D * u - 1.0) @ helmert_sub(D).T / a


def alpha_inverse(z, a, D=None, clamp=False):
    """Inverse of :func:`alpha_transform`.

    Raises NegativeDetectionLimit when ``a * H'z + 1`` has a non-positive
    component.  With ``clamp=True`` those components are floored at
    ``CLAMP_FLOOR`` instead and ``(composition, n_clamped)`` is returned.
    """
    a = _check_alpha(a)
    z = np.asarray(z, dtype=float)
    if D is None:
        D = z.shape[-1] + 1
    if z.shape[-1] != D - 1:
        raise DimensionMismatch(f"z has {z.shape[-1]} coordinates, expected {D - 1}")
    if a == 0.0:
        out = ilr_inv(z)
        return (out, 0) if clamp else out
    y = a * (z @ helmert_sub(D)) + 1.0
    bad = ~(y > 0)
    n_bad = int(bad.sum())
    if n_bad:
        if not clamp:
            raise NegativeDetectionLimit(
                f"{n_bad} component(s) of alpha*H'z + 1 are non-positive (alpha={a:g})"
            )
        y = np.where(bad, CLAMP_FLOOR, y)
    # rescale before the power so large 1/a exponents stay in range
    y = y / y.max(axis=-1, keepdims=True)
    p = y ** (1.0 / a)
    p = np.maximum(p, TINY) if clamp else p
    out = p / p.sum(axis=-1, keepdims=True)
    return (out, n_bad) if clamp else out


def multiplicative_replace(x, delta):
    """Multiplicative zero replacement.

    Zeros become ``delta``; positive entries shrink by ``1 - z*delta/sum(x)``
    so the total is unchanged and ratios among positive parts are kept.
    Works on a single vector.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("multiplicative_replace expects a 1-D vector")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if np.any(x < 0) or not np.any(x > 0):
        raise NonPositiveEntry("x must be nonnegative with at least one positive entry")
    zeros = x == 0
    z = int(zeros.sum())
    if z == 0:
        return x.copy()
    total = x.sum()
    if z * delta >= total:
        raise DeltaTooLarge(f"{z} zeros x delta {delta:g} >= total {total:g}")
    return np.where(zeros, delta, (1.0 - z * delta / total) * x)
