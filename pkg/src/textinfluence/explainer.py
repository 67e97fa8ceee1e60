"""Rank concept texts for one prediction.

Three rankers share one output type: the influence ranker ("faithtrace"),
which orders candidates by the directional derivative of the class logit
along their text-induced direction; a similarity baseline ("t2c") that
orders by cosine between the aligned feature and the text; and a seeded
uniform random baseline.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .aligner import apply
from .errors import (AllDegenerate, DegenerateDirection, DuplicateConcept,
                     EmptyBank, KTooLarge, ValidationError)
from .influence import DirectionVector, direction_closed_form, directional_score
from .numkernel import as_vector, cosine, normalize

log = logging.getLogger(__name__)

SOURCES = ("llm", "vlm", "manual")
METHODS = ("faithtrace", "t2c", "random")


@dataclass(frozen=True)
class ConceptEntry:
    text: str
    embedding: np.ndarray
    source: str = "manual"

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValidationError("concept text must be nonempty")
        if self.source not in SOURCES:
            raise ValidationError(f"concept source must be one of {SOURCES}, got {self.source!r}")
        emb = as_vector(self.embedding, f"embedding of {self.text!r}")
        # leave already-unit vectors bit-identical so save/load round-trips
        if abs(np.linalg.norm(emb) - 1.0) > 1e-12:
            emb = normalize(emb)
        emb.setflags(write=False)
        object.__setattr__(self, "embedding", emb)


@dataclass(frozen=True)
class ConceptBank:
    entries: tuple
    class_label: str = ""
    sample_id: str = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        seen = set()
        for e in entries:
            key = e.text.casefold()
            if key in seen:
                raise DuplicateConcept(f"duplicate concept text {e.text!r}")
            seen.add(key)
        if len({e.embedding.shape for e in entries}) > 1:
            raise ValidationError("concept embeddings have inconsistent dimensions")

    def __len__(self):
        return len(self.entries)

    @property
    def texts(self):
        return [e.text for e in self.entries]

    def to_dict(self):
        d = {"class": self.class_label, "sample_id": self.sample_id,
             "concepts": [{"text": e.text, "source": e.source,
                           "embedding": e.embedding.tolist()} for e in self.entries]}
        if self.metadata:
            d["metadata"] = self.metadata
        return d

    @classmethod
    def from_dict(cls, d):
        entries = [ConceptEntry(c["text"], c["embedding"], c.get("source", "manual"))
                   for c in d.get("concepts", [])]
        return cls(entries, str(d.get("class", "")), d.get("sample_id"), d.get("metadata", {}))

    def save(self, path):
        jsonio.dump(self.to_dict(), path)

    @classmethod
    def load(cls, path):
        return cls.from_dict(jsonio.load(path))


@dataclass(frozen=True)
class Explanation:
    text: str
    score: float
    rank: int
    direction: DirectionVector = None
    bank_index: int = -1

    def to_json(self, method):
        return {"rank": self.rank, "text": self.text, "score": self.score,
                "method": method, "positive": self.score > 0}


def _top_k(scored, k):
    # python's sort is stable, so equal scores keep bank order
    scored = sorted(scored, key=lambda item: -item[1])[:k]
    return [Explanation(e.text, s, r, d, i) for r, (i, s, d, e) in enumerate(scored, 1)]


def _check_k(k):
    if k < 1:
        raise ValidationError(f"top-k must be at least 1, got {k}")


def score_entry(entry, al, head, c, z):
    """Directional score of one concept, or ``(0.0, None)`` if its direction is degenerate."""
    try:
        d = direction_closed_form(al, z, entry.embedding)
    except DegenerateDirection:
        return 0.0, None
    return directional_score(head, c, z, d), d


def rank_faithtrace(bank, al, head, c, z, k):
    """Top-k concepts by directional score of logit ``c`` along their direction.

    Candidates whose direction vanishes are skipped. When fewer than ``k``
    candidates score positively the remainder is still returned, with
    ``positive`` false in its JSON form.
    """
    _check_k(k)
    if not bank.entries:
        raise EmptyBank("concept bank is empty")
    head.check_class(c)
    scored = []
    for i, e in enumerate(bank.entries):
        try:
            d = direction_closed_form(al, z, e.embedding)
        except DegenerateDirection:
            log.info("skipping %r: degenerate text-induced direction", e.text)
            continue
        scored.append((i, directional_score(head, c, z, d), d, e))
    if not scored:
        raise AllDegenerate("every candidate in the bank has a degenerate direction")
    out = _top_k(scored, k)
    if out[-1].score <= 0:
        log.info("only %d of top-%d candidates have a positive score",
                 sum(x.score > 0 for x in out), k)
    return out


def rank_text_to_concept(bank, al, z, k):
    """Top-k concepts by cosine between ``h(z)`` and the text embedding."""
    _check_k(k)
    if not bank.entries:
        raise EmptyBank("concept bank is empty")
    h_hat = normalize(apply(al, z))
    scored = [(i, cosine(h_hat, e.embedding), None, e) for i, e in enumerate(bank.entries)]
    return _top_k(scored, k)


def rank_random(bank, k, seed, *, al=None, head=None, c=None, z=None):
    """k distinct concepts drawn uniformly without replacement.

    Rank is draw order. When ``al``, ``head``, ``c`` and ``z`` are given each
    pick carries its directional score so it can be evaluated like the other
    rankers; otherwise the score is NaN.
    """
    _check_k(k)
    if not bank.entries:
        raise EmptyBank("concept bank is empty")
    if k > len(bank):
        raise KTooLarge(f"cannot draw {k} concepts from a bank of {len(bank)}")
    rng = np.random.Generator(np.random.PCG64(seed))
    picks = rng.permutation(len(bank))[:k]
    scoring = head is not None
    out = []
    for r, i in enumerate(picks, 1):
        e = bank.entries[i]
        s, d = score_entry(e, al, head, c, z) if scoring else (float("nan"), None)
        out.append(Explanation(e.text, s, r, d, int(i)))
    return out


def rescore(explanations, bank, al, head, c, z):
    """Replace each explanation's score with its directional score for class ``c``."""
    out = []
    for x in explanations:
        s, d = score_entry(bank.entries[x.bank_index], al, head, c, z)
        out.append(Explanation(x.text, s, x.rank, d, x.bank_index))
    return out


def explain(method, bank, al, head, c, z, k, seed=0):
    if method == "faithtrace":
        return rank_faithtrace(bank, al, head, c, z, k)
    if method == "t2c":
        return rank_text_to_concept(bank, al, z, k)
    if method == "random":
        return rank_random(bank, k, seed, al=al, head=head, c=c, z=z)
    raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")
