"""Text-induced directions in classifier feature space and their influence.

For a text embedding ``t`` the direction is the gradient, with respect to the
classifier feature ``z``, of the cosine similarity between ``h(z)`` and ``t``.
Its influence on class ``c`` is the directional derivative of the class logit
along the normalized direction.
"""

from dataclasses import dataclass

import numpy as np

from .aligner import apply, similarity
from .errors import DegenerateDirection, DimMismatch
from .heads import DEFAULT_FD_DELTA
from .numkernel import ZERO_NORM, check_dim, norm, normalize


@dataclass(frozen=True)
class DirectionVector:
    raw: np.ndarray
    unit: np.ndarray
    similarity_at_point: float = float("nan")

    @classmethod
    def from_raw(cls, raw, similarity_at_point=float("nan")):
        raw = np.asarray(raw, dtype=np.float64)
        if norm(raw) < ZERO_NORM:
            raise DegenerateDirection(f"direction norm {norm(raw):.3g} is below {ZERO_NORM:g}")
        return cls(raw, normalize(raw), similarity_at_point)


@dataclass(frozen=True)
class InfluenceConfig:
    # step size of the exact finite influence; ranking uses the derivative
    epsilon: float = 1.0
    fd_delta: float = DEFAULT_FD_DELTA

    def __post_init__(self):
        if not (self.epsilon > 0 and self.fd_delta > 0):
            raise ValueError("epsilon and fd_delta must be strictly positive")


def direction_closed_form(al, z, t_hat):
    """Gradient of ``cos(h(z), t_hat)`` with respect to ``z``.

    ``W^T (t_hat - s * h_hat) / ||h||`` with ``h = W z + b`` and ``s`` the
    cosine at ``z``. Raises DegenerateDirection when the gradient vanishes,
    e.g. when ``t_hat`` is already parallel to ``h``.
    """
    h = apply(al, z)
    s = similarity(al, z, t_hat)
    r = norm(h)
    raw = al.W.T @ ((np.asarray(t_hat, dtype=np.float64) - s * (h / r)) / r)
    return DirectionVector.from_raw(raw, s)


def direction_finite_diff(al, z, t_hat, delta=1e-6):
    """Central-difference gradient of the similarity; an oracle for the closed form."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    z = np.asarray(z, dtype=np.float64)
    check_dim(z, al.dim_in, "z")
    g = np.empty_like(z)
    for i in range(z.size):
        zp = z.copy()
        zm = z.copy()
        zp[i] += delta
        zm[i] -= delta
        g[i] = (similarity(al, zp, t_hat) - similarity(al, zm, t_hat)) / (2 * delta)
    return g


def directional_score(head, c, z, direction):
    """Directional derivative of logit ``c`` at ``z`` along ``direction.unit``."""
    head.check_class(c)
    if direction.unit.shape != (head.dim,):
        raise DimMismatch(f"direction has shape {direction.unit.shape}, head expects ({head.dim},)")
    return float(np.dot(head.grad(z, c), direction.unit))


def influence_score(head, c, z, direction, cfg=InfluenceConfig()):
    """Exact finite change ``g_c(z + eps * unit) - g_c(z)``."""
    head.check_class(c)
    if direction.unit.shape != (head.dim,):
        raise DimMismatch(f"direction has shape {direction.unit.shape}, head expects ({head.dim},)")
    z = np.asarray(z, dtype=np.float64)
    return head.logit(z + cfg.epsilon * direction.unit, c) - head.logit(z, c)
