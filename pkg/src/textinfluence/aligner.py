"""Affine map from classifier feature space into the joint image/text space.

The aligner ``h(z) = W z + b`` is fit by least squares against image
embeddings of the same inputs, then used to compare classifier features
with text embeddings by cosine similarity.
"""

from dataclasses import dataclass

import numpy as np

from . import jsonio
from .errors import DimMismatch, SingularSystem, ZeroNorm
from .numkernel import ZERO_NORM, as_matrix, as_vector, check_dim, cosine, norm

DEFAULT_RIDGE = 1e-8

# condition number above which the normal equations are treated as singular
_MAX_COND = 1e14


@dataclass(frozen=True)
class AffineAligner:
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        W = as_matrix(self.W, "W")
        b = as_vector(self.b, "b")
        if W.shape[0] != b.shape[0]:
            raise DimMismatch(f"W is {W.shape} but b has length {b.shape[0]}")
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def dim_in(self):
        return self.W.shape[1]

    @property
    def dim_out(self):
        return self.W.shape[0]

    def __call__(self, z):
        return apply(self, z)

    def to_dict(self):
        return {
            "dim_in": self.dim_in,
            "dim_out": self.dim_out,
            "W": self.W.ravel().tolist(),
            "b": self.b.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        shape = (int(d["dim_out"]), int(d["dim_in"]))
        return cls(as_matrix(d["W"], "W", shape=shape), as_vector(d["b"], "b"))

    def save(self, path):
        jsonio.dump(self.to_dict(), path)

    @classmethod
    def load(cls, path):
        return cls.from_dict(jsonio.load(path))


@dataclass(frozen=True)
class AlignmentDataset:
    features: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = as_matrix(self.features, "features")
        Y = as_matrix(self.targets, "targets")
        if X.shape[0] != Y.shape[0]:
            raise DimMismatch(
                f"features have {X.shape[0]} rows but targets have {Y.shape[0]}")
        if X.shape[0] < 1:
            raise DimMismatch("alignment dataset is empty")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", Y)

    def __len__(self):
        return self.features.shape[0]


def train_aligner(data, ridge=DEFAULT_RIDGE):
    """Least-squares fit of ``W z + b`` to the targets.

    Solves the normal equations on features augmented with a constant-1
    column. ``ridge`` is added to the diagonal of the feature block only;
    the bias is left unpenalized so a constant offset is always fit exactly.
    """
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    X, Y = data.features, data.targets
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    A = Xa.T @ Xa
    A[np.arange(d), np.arange(d)] += ridge
    rhs = Xa.T @ Y
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > _MAX_COND:
        raise SingularSystem(
            f"normal equations are singular (n={n}, d={d}, ridge={ridge:g}); "
            "use a positive ridge or more samples")
    try:
        theta = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    return AffineAligner(theta[:d].T.copy(), theta[d].copy())


def mse(al, data):
    """Mean over samples of the squared L2 residual."""
    R = data.features @ al.W.T + al.b - data.targets
    return float(np.mean(np.sum(R * R, axis=1)))


def apply(al, z):
    z = np.asarray(z, dtype=np.float64)
    check_dim(z, al.dim_in, "z")
    return al.W @ z + al.b


def similarity(al, z, t_hat):
    """Cosine between the aligned feature and a unit text embedding."""
    h = apply(al, z)
    if norm(h) < ZERO_NORM:
        raise ZeroNorm("aligned feature has zero norm; similarity is undefined")
    return cosine(h, t_hat)
