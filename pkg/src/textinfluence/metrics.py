"""Faithfulness metrics for retrieved explanations.

Directional scores are pooled into a mean and a negative rate. Influence
curves move the feature a finite distance along (insertion) and against
(deletion) the explanation direction and record the change of a class
score, by default the sigmoid of the class margin.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDirection, DimMismatch, EmptyInput
from .numkernel import ZERO_NORM, norm

DEFAULT_RHOS = (0.01, 0.02, 0.04, 0.08, 0.16, 0.32)

# curve sums are conventionally displayed in units of 1e-1
DISPLAY_SCALE = 10.0


@dataclass(frozen=True)
class CurveConfig:
    rhos: tuple = DEFAULT_RHOS
    use_margin_confidence: bool = True

    def __post_init__(self):
        rhos = tuple(float(r) for r in self.rhos)
        if not rhos:
            raise ValueError("at least one relative step size is required")
        if any(r <= 0 for r in rhos) or any(b <= a for a, b in zip(rhos, rhos[1:])):
            raise ValueError(f"relative step sizes must be positive and strictly increasing: {rhos}")
        object.__setattr__(self, "rhos", rhos)


@dataclass(frozen=True)
class InfluenceCurve:
    rhos: tuple
    insertion: np.ndarray
    deletion: np.ndarray

    @property
    def insertion_sum(self):
        return float(np.sum(self.insertion))

    @property
    def deletion_sum(self):
        return float(np.sum(self.deletion))

    def to_dict(self):
        return {"rhos": list(self.rhos), "insertion": self.insertion.tolist(),
                "deletion": self.deletion.tolist(),
                "insertion_sum": self.insertion_sum, "deletion_sum": self.deletion_sum}


def sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def margin(head, z, c=None):
    """Class margin ``g_c(z) - max_{j != c} g_j(z)``.

    Returns the margin of class ``c``, or the vector of margins of every
    class when ``c`` is None.
    """
    y = head.logits(z)
    if c is not None:
        head.check_class(c)
        return float(y[c] - np.max(np.delete(y, c)))
    order = np.argsort(y)
    best, second = order[-1], order[-2]
    m = y - y[best]
    m[best] = y[best] - y[second]
    return m


def margin_confidence(head, z, c):
    return sigmoid(margin(head, z, c))


def influence_curve(head, c, z, direction, cfg=CurveConfig()):
    """Insertion/deletion deltas at steps ``rho_k * ||z||`` along ``direction.unit``."""
    head.check_class(c)
    z = np.asarray(z, dtype=np.float64)
    unit = direction.unit
    if unit.shape != z.shape or z.shape != (head.dim,):
        raise DimMismatch(f"direction {unit.shape}, feature {z.shape}, head dim {head.dim}")
    if norm(unit) < ZERO_NORM:
        raise DegenerateDirection("influence curve needs a nondegenerate direction")
    if cfg.use_margin_confidence:
        def phi(x):
            return margin_confidence(head, x, c)
    else:
        def phi(x):
            return head.logit(x, c)
    base = phi(z)
    alphas = np.asarray(cfg.rhos) * norm(z)
    ins = np.array([phi(z + a * unit) - base for a in alphas])
    dele = np.array([base - phi(z - a * unit) for a in alphas])
    return InfluenceCurve(cfg.rhos, ins, dele)


@dataclass
class SampleRecord:
    """Scores (and optionally curves) of the explanations retrieved for one sample."""
    sample_id: str
    class_index: int
    scores: list
    curves: list = field(default_factory=list)
    texts: list = field(default_factory=list)

    def to_dict(self):
        d = {"sample_id": self.sample_id, "class": self.class_index,
             "scores": list(self.scores)}
        if self.texts:
            d["texts"] = list(self.texts)
        if self.curves:
            d["curves"] = [cv.to_dict() for cv in self.curves]
        return d


@dataclass
class EvaluationReport:
    method: str
    top_k: int
    mean_directional_score: float
    negative_rate: float
    n_items: int
    per_sample: list
    rhos: tuple = ()
    mean_insertion: np.ndarray = None
    mean_deletion: np.ndarray = None

    @property
    def curve_sums(self):
        if self.mean_insertion is None:
            return None
        return float(np.sum(self.mean_insertion)), float(np.sum(self.mean_deletion))

    def to_dict(self, per_sample=True):
        d = {"method": self.method, "top_k": self.top_k,
             "mean_directional_score": self.mean_directional_score,
             "negative_rate": self.negative_rate, "n_items": self.n_items,
             "pooling": "pairs"}
        if self.mean_insertion is not None:
            ins, dele = self.curve_sums
            d["curves"] = {"rhos": list(self.rhos),
                           "insertion": self.mean_insertion.tolist(),
                           "deletion": self.mean_deletion.tolist(),
                           "insertion_sum": ins, "deletion_sum": dele,
                           "display_scale": DISPLAY_SCALE}
        if per_sample:
            d["per_sample"] = [r.to_dict() for r in self.per_sample]
        return d


def aggregate(records, method="", top_k=None):
    """Pool every (sample, retrieved text) pair into one report.

    The mean and negative rate are taken over all pairs; curves are averaged
    over all pairs step by step, and the curve sums add those averages over
    the steps.
    """
    records = list(records)
    scores = np.array([s for r in records for s in r.scores], dtype=np.float64)
    if scores.size == 0:
        raise EmptyInput("no scored explanations to aggregate")
    curves = [cv for r in records for cv in r.curves]
    report = EvaluationReport(
        method=method,
        top_k=top_k if top_k is not None else max(len(r.scores) for r in records),
        mean_directional_score=float(np.mean(scores)),
        negative_rate=float(np.count_nonzero(scores < 0)) / scores.size,
        n_items=int(scores.size),
        per_sample=records,
    )
    if curves:
        rhos = curves[0].rhos
        if any(cv.rhos != rhos for cv in curves):
            raise DimMismatch("curves were computed with different step sizes")
        report.rhos = rhos
        report.mean_insertion = np.mean([cv.insertion for cv in curves], axis=0)
        report.mean_deletion = np.mean([cv.deletion for cv in curves], axis=0)
    return report


def write_curves_csv(reports, path):
    """One row per (method, rho) with the pair-averaged insertion/deletion deltas."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "rho", "insertion", "deletion"])
        for rep in reports:
            if rep.mean_insertion is None:
                continue
            for rho, ins, dele in zip(rep.rhos, rep.mean_insertion, rep.mean_deletion):
                w.writerow([rep.method, format(rho, ".17g"), format(ins, ".17g"),
                            format(dele, ".17g")])
