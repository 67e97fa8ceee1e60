"""Classifier heads: maps from feature space to class logits.

Shipped heads (linear, one-hidden-layer tanh MLP) have analytic gradients.
Any other head can subclass :class:`ClassifierHead` and implement only
``logits``; ``grad`` then falls back to central finite differences.
"""

import numpy as np

from . import jsonio
from .errors import DimMismatch, InvalidClass, ValidationError
from .numkernel import as_matrix, as_vector, check_dim

DEFAULT_FD_DELTA = 1e-5


class ClassifierHead:
    dim = None
    num_classes = None
    classes = None
    fd_delta = DEFAULT_FD_DELTA

    def logits(self, z):
        raise NotImplementedError

    def logit(self, z, c):
        self.check_class(c)
        return float(self.logits(z)[c])

    def grad(self, z, c):
        """Central-difference gradient of logit ``c``; override when analytic."""
        self.check_class(c)
        z = self._check_z(z)
        h = self.fd_delta
        g = np.empty_like(z)
        for i in range(z.size):
            zp = z.copy()
            zm = z.copy()
            zp[i] += h
            zm[i] -= h
            g[i] = (self.logits(zp)[c] - self.logits(zm)[c]) / (2 * h)
        return g

    def check_class(self, c):
        if not isinstance(c, (int, np.integer)) or not 0 <= c < self.num_classes:
            raise InvalidClass(f"class index {c!r} outside [0, {self.num_classes})")

    def class_index(self, c):
        """Resolve a class given as an index, a digit string, or a name."""
        if isinstance(c, str):
            if self.classes and c in self.classes:
                return self.classes.index(c)
            if c.lstrip("-").isdigit():
                c = int(c)
            else:
                raise InvalidClass(f"unknown class name {c!r}")
        self.check_class(c)
        return int(c)

    def _check_z(self, z):
        z = np.asarray(z, dtype=np.float64)
        check_dim(z, self.dim, "z")
        return z

    def _set_classes(self, classes):
        if self.num_classes < 2:
            raise ValidationError(f"a head needs at least 2 classes, got {self.num_classes}")
        if classes is None:
            classes = [str(i) for i in range(self.num_classes)]
        classes = [str(x) for x in classes]
        if len(classes) != self.num_classes:
            raise DimMismatch(f"{len(classes)} class names for {self.num_classes} classes")
        self.classes = classes


class LinearHead(ClassifierHead):
    """``logits(z) = W z + bias``."""

    def __init__(self, W, bias, classes=None):
        self.W = as_matrix(W, "W_head")
        self.bias = as_vector(bias, "bias")
        if self.bias.shape[0] != self.W.shape[0]:
            raise DimMismatch("head bias length must equal number of rows of W")
        self.num_classes, self.dim = self.W.shape
        self._set_classes(classes)

    def logits(self, z):
        return self.W @ self._check_z(z) + self.bias

    def grad(self, z, c):
        self.check_class(c)
        self._check_z(z)
        return self.W[c].copy()

    def to_dict(self):
        return {"type": "linear", "W": self.W.ravel().tolist(),
                "bias": self.bias.tolist(), "classes": list(self.classes)}


class MlpHead(ClassifierHead):
    """``logits(z) = W2 tanh(W1 z + b1) + b2``."""

    def __init__(self, W1, b1, W2, b2, classes=None):
        self.W1 = as_matrix(W1, "W1")
        self.b1 = as_vector(b1, "b1")
        self.W2 = as_matrix(W2, "W2")
        self.b2 = as_vector(b2, "b2")
        hidden, self.dim = self.W1.shape
        if self.b1.shape[0] != hidden or self.W2.shape[1] != hidden:
            raise DimMismatch("hidden layer sizes of W1, b1, W2 disagree")
        if self.b2.shape[0] != self.W2.shape[0]:
            raise DimMismatch("b2 length must equal number of rows of W2")
        self.num_classes = self.W2.shape[0]
        self._set_classes(classes)

    def logits(self, z):
        return self.W2 @ np.tanh(self.W1 @ self._check_z(z) + self.b1) + self.b2

    def grad(self, z, c):
        self.check_class(c)
        a = np.tanh(self.W1 @ self._check_z(z) + self.b1)
        return self.W1.T @ (self.W2[c] * (1.0 - a * a))

    def to_dict(self):
        return {"type": "mlp",
                "W1": self.W1.ravel().tolist(), "b1": self.b1.tolist(),
                "W2": self.W2.ravel().tolist(), "b2": self.b2.tolist(),
                "activation": "tanh", "classes": list(self.classes)}


def _rows(flat, n_rows, name):
    """Accept either a nested list or a flat row-major list with known row count."""
    arr = np.asarray(flat, dtype=np.float64)
    if arr.ndim == 2:
        return as_matrix(arr, name)
    if n_rows == 0 or arr.size % n_rows:
        raise DimMismatch(f"{name} has {arr.size} entries, not divisible by {n_rows} rows")
    return as_matrix(arr, name, shape=(n_rows, arr.size // n_rows))


def head_from_dict(d):
    kind = d.get("type")
    if kind == "linear":
        bias = as_vector(d["bias"], "bias")
        return LinearHead(_rows(d["W"], bias.size, "W"), bias, d.get("classes"))
    if kind == "mlp":
        act = d.get("activation", "tanh")
        if act != "tanh":
            raise ValidationError(f"unsupported activation {act!r}; only tanh is shipped")
        b1 = as_vector(d["b1"], "b1")
        b2 = as_vector(d["b2"], "b2")
        return MlpHead(_rows(d["W1"], b1.size, "W1"), b1,
                       _rows(d["W2"], b2.size, "W2"), b2, d.get("classes"))
    raise ValidationError(f"unknown head type {kind!r}")


def save_head(head, path):
    jsonio.dump(head.to_dict(), path)


def load_head(path):
    return head_from_dict(jsonio.load(path))
