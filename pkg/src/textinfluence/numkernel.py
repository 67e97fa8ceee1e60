"""Small dense-vector helpers shared by every other module.

Feature vectors and matrices are plain float64 numpy arrays; the functions
here validate shape and finiteness once at the boundary so the numeric code
downstream can stay free of checks.
"""

import numpy as np

from .errors import DimMismatch, NonFinite, ZeroNorm

ZERO_NORM = 1e-12


def as_vector(values, name="vector"):
    v = np.array(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimMismatch(f"{name} must be a non-empty 1-D array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFinite(f"{name} contains NaN or Inf")
    return v


def as_matrix(values, name="matrix", shape=None):
    """Coerce to a finite 2-D float64 array.

    ``shape`` reshapes a flat row-major sequence, which is how matrices are
    stored in the JSON formats.
    """
    M = np.array(values, dtype=np.float64)
    if shape is not None:
        if M.size != shape[0] * shape[1]:
            raise DimMismatch(f"{name} has {M.size} entries, expected {shape[0]}x{shape[1]}")
        M = M.reshape(shape)
    if M.ndim != 2:
        raise DimMismatch(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFinite(f"{name} contains NaN or Inf")
    return M


def check_dim(v, dim, name="vector"):
    if v.shape != (dim,):
        raise DimMismatch(f"{name} has shape {v.shape}, expected ({dim},)")


def norm(v):
    return float(np.linalg.norm(v))


def normalize(v):
    """Scale ``v`` to unit L2 norm.

    Raises ZeroNorm when ``||v|| < 1e-12``.
    """
    v = np.asarray(v, dtype=np.float64)
    n = norm(v)
    if n < ZERO_NORM:
        raise ZeroNorm(f"cannot normalize vector with norm {n:.3g}")
    return v / n


def cosine(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatch(f"cosine of shapes {a.shape} and {b.shape}")
    na, nb = norm(a), norm(b)
    if na < ZERO_NORM or nb < ZERO_NORM:
        raise ZeroNorm("cosine undefined for a zero-norm vector")
    # normalize each side first so the result is symmetric in (a, b)
    c = float(np.dot(a / na, b / nb))
    return min(1.0, max(-1.0, c))
