"""Input validation helpers shared by the public API."""

from __future__ import annotations

import numpy as np


def as_vector(x, name="x", n=None, finite=True):
    """Return ``x`` as a 1-D float array, promoting scalars to length one."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {arr.shape}")
    if n is not None and arr.size != n:
        raise ValueError(f"{name} must have length {n}, got {arr.size}")
    if finite and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_matrix(a, name="A", shape=None):
    """Return ``a`` as a 2-D float array; scalars become 1x1 matrices."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_square(a, name="A", n=None):
    arr = as_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} must be {n}x{n}, got {arr.shape}")
    return arr


def check_symmetric(a, name="A", tol=1e-12):
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > tol * scale:
        raise ValueError(f"{name} must be symmetric")
    return a


def symmetrize(a):
    return 0.5 * (a + a.T)


def readonly(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr
