"""Binary feature files, sample directories and synthetic fixtures.

FTM1 layout (all little-endian)::

    bytes 0..3   b"FTM1"
    bytes 4..7   rows  (uint32)
    bytes 8..11  cols  (uint32)
    bytes 12..   rows*cols float32, row-major

Files hold float32; everything is widened to float64 on read.
"""

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .aligner import AffineAligner, AlignmentDataset
from .errors import (BadMagic, DimMismatch, EmptyInput, NonFinite, TrailingData,
                     TruncatedFile, ValidationError)
from .explainer import ConceptBank, ConceptEntry
from .heads import LinearHead, MlpHead, load_head, save_head
from .numkernel import normalize

MAGIC = b"FTM1"
_HEADER = struct.Struct("<4sII")

# fixtures are drawn from this generator only, so they are reproducible
# across platforms for a given numpy major version
GENERATOR = "numpy.random.PCG64"
GENERATOR_VERSION = 1


def write_features(path, matrix):
    M = np.asarray(matrix, dtype=np.float64)
    if M.ndim == 1:
        M = M[None, :]
    if M.ndim != 2:
        raise DimMismatch(f"feature matrix must be 2-D, got shape {M.shape}")
    with np.errstate(over="ignore"):
        M32 = M.astype("<f4")
    bad = np.flatnonzero(~np.isfinite(M32))
    if bad.size:
        raise NonFinite(f"entry {bad[0]} is not finite as float32 (value {M.ravel()[bad[0]]!r})")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, M.shape[0], M.shape[1]))
        fh.write(M32.tobytes(order="C"))


def read_features(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise TruncatedFile(f"{path}: {len(data)} bytes is shorter than the 12-byte header")
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = _HEADER.size + 4 * rows * cols
    if len(data) < expected:
        raise TruncatedFile(f"{path}: header declares {rows}x{cols} ({expected} bytes) "
                            f"but file has {len(data)} bytes")
    if len(data) > expected:
        raise TrailingData(f"{path}: {len(data) - expected} unexpected bytes after payload")
    payload = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=_HEADER.size)
    bad = np.flatnonzero(~np.isfinite(payload))
    if bad.size:
        offset = _HEADER.size + 4 * int(bad[0])
        raise NonFinite(f"{path}: non-finite value at byte offset {offset} "
                        f"(row {bad[0] // cols}, col {bad[0] % cols})")
    return payload.astype(np.float64).reshape(rows, cols)


@dataclass
class Sample:
    sample_id: str
    z: np.ndarray
    class_index: int
    bank: ConceptBank
    planted: list = field(default_factory=list)


def save_sample(sample, root):
    d = os.path.join(root, sample.sample_id)
    os.makedirs(d, exist_ok=True)
    write_features(os.path.join(d, "features.ftm"), sample.z)
    sample.bank.save(os.path.join(d, "bank.json"))
    jsonio.dump({"sample_id": sample.sample_id, "class": sample.class_index,
                 "planted": list(sample.planted)}, os.path.join(d, "meta.json"))


def load_sample(path):
    meta = jsonio.load(os.path.join(path, "meta.json"))
    X = read_features(os.path.join(path, "features.ftm"))
    row = int(meta.get("row", 0))
    if not 0 <= row < X.shape[0]:
        raise DimMismatch(f"{path}: row {row} outside features with {X.shape[0]} rows")
    bank = ConceptBank.load(os.path.join(path, "bank.json"))
    sid = str(meta.get("sample_id", os.path.basename(os.path.normpath(path))))
    return Sample(sid, X[row], int(meta["class"]), bank, list(meta.get("planted", [])))


def load_samples(root):
    """Every ``<sample_id>/`` under ``root`` holding a meta.json, sorted by id."""
    if not os.path.isdir(root):
        raise EmptyInput(f"sample directory {root!r} does not exist")
    names = sorted(n for n in os.listdir(root)
                   if os.path.isfile(os.path.join(root, n, "meta.json")))
    if not names:
        raise EmptyInput(f"no samples found under {root!r}")
    return [load_sample(os.path.join(root, n)) for n in names]


@dataclass
class SyntheticWorld:
    seed: int
    d: int
    m: int
    C: int
    true_aligner: AffineAligner
    head: object
    bank_size: int
    noise: float = 0.0


@dataclass
class SynthBundle:
    world: SyntheticWorld
    dataset: AlignmentDataset
    samples: list

    @property
    def features(self):
        return np.vstack([s.z for s in self.samples])


_ADJ = ["striped", "glossy", "pointed", "curved", "spotted", "fuzzy", "bright", "dark",
        "long", "short", "round", "jagged", "smooth", "rough", "pale", "iridescent",
        "wet", "sandy", "grassy", "snowy", "rocky", "wooden", "metallic", "translucent"]
_NOUN = ["fur", "tail", "beak", "scales", "wings", "ears", "eyes", "snout", "fins",
         "plumage", "background", "branch", "water", "shell", "legs", "pattern",
         "horns", "feathers", "mane", "leaves", "sky", "floor", "stripes", "paws"]


def _phrases(rng, n):
    if n > len(_ADJ) * len(_NOUN):
        raise ValidationError(f"bank size {n} exceeds the synthetic vocabulary")
    idx = rng.choice(len(_ADJ) * len(_NOUN), size=n, replace=False)
    return [f"{_ADJ[i // len(_NOUN)]} {_NOUN[i % len(_NOUN)]}" for i in idx]


def _f32(a):
    # features are stored as float32, so draw them on that grid
    return a.astype(np.float32).astype(np.float64)


def _planted_embedding(al, head, c, z, rng):
    """A unit text embedding whose direction has a positive directional score."""
    h_hat = normalize(al.W @ z + al.b)
    p = al.W @ head.grad(z, c)
    p_perp = p - np.dot(p, h_hat) * h_hat
    theta = rng.uniform(np.radians(40), np.radians(80))
    return normalize(np.cos(theta) * h_hat + np.sin(theta) * normalize(p_perp))


def synth_world(seed=0, d=16, m=12, C=3, n_samples=50, bank_size=20, *, n_train=None,
                noise=0.0, head_type="mlp", hidden=16, planted=1):
    """Deterministic desk-scale stand-in for classifier, encoders and data.

    Training targets are ``A z + c`` plus optional Gaussian noise. Each sample
    is explained for its predicted class and gets its own concept bank of
    random unit embeddings, ``planted`` of which are built to have a positive
    directional score under the true aligner.
    """
    if d < 2 or m < 2 or C < 2:
        raise ValidationError("synthetic worlds need d, m >= 2 and C >= 2")
    if n_samples < 1 or bank_size < 1 or not 0 <= planted <= bank_size:
        raise ValidationError("need n_samples >= 1, bank_size >= 1, 0 <= planted <= bank_size")
    rng = np.random.Generator(np.random.PCG64(seed))
    A = rng.normal(size=(m, d)) / np.sqrt(d)
    c0 = rng.normal(size=m) * 0.5
    true_al = AffineAligner(A, c0)
    classes = [f"class_{i}" for i in range(C)]
    if head_type == "mlp":
        head = MlpHead(rng.normal(size=(hidden, d)) / np.sqrt(d), rng.normal(size=hidden) * 0.1,
                       2.0 * rng.normal(size=(C, hidden)) / np.sqrt(hidden),
                       rng.normal(size=C) * 0.1, classes)
    elif head_type == "linear":
        head = LinearHead(rng.normal(size=(C, d)) / np.sqrt(d), rng.normal(size=C) * 0.1, classes)
    else:
        raise ValidationError(f"unknown head type {head_type!r}")

    if n_train is None:
        n_train = max(200, 4 * (d + 1))
    X = _f32(rng.normal(size=(n_train, d)))
    Y = X @ A.T + c0
    if noise > 0:
        Y = Y + noise * rng.normal(size=Y.shape)
    dataset = AlignmentDataset(X, Y)

    samples = []
    for i in range(n_samples):
        z = _f32(rng.normal(size=d))
        c = int(np.argmax(head.logits(z)))
        texts = _phrases(rng, bank_size)
        embs = [normalize(rng.normal(size=m)) for _ in range(bank_size)]
        slots = sorted(rng.choice(bank_size, size=planted, replace=False).tolist())
        for j in slots:
            embs[j] = _planted_embedding(true_al, head, c, z, rng)
        sid = f"s{i:04d}"
        bank = ConceptBank([ConceptEntry(t, e, "manual") for t, e in zip(texts, embs)],
                           classes[c], sid)
        samples.append(Sample(sid, z, c, bank, [texts[j] for j in slots]))

    world = SyntheticWorld(seed, d, m, C, true_al, head, bank_size, noise)
    return SynthBundle(world, dataset, samples)


def save_bundle(bundle, out):
    """Write a synthetic bundle as files; returns the list of paths written."""
    os.makedirs(out, exist_ok=True)
    paths = {
        "train_features": os.path.join(out, "train_features.ftm"),
        "train_targets": os.path.join(out, "train_targets.ftm"),
        "sample_features": os.path.join(out, "sample_features.ftm"),
        "head": os.path.join(out, "head.json"),
        "true_aligner": os.path.join(out, "true_aligner.json"),
        "samples": os.path.join(out, "samples"),
    }
    write_features(paths["train_features"], bundle.dataset.features)
    write_features(paths["train_targets"], bundle.dataset.targets)
    write_features(paths["sample_features"], bundle.features)
    save_head(bundle.world.head, paths["head"])
    bundle.world.true_aligner.save(paths["true_aligner"])
    for s in bundle.samples:
        save_sample(s, paths["samples"])
    return paths


__all__ = ["read_features", "write_features", "load_head", "synth_world", "save_bundle",
           "load_samples", "load_sample", "save_sample", "Sample", "SyntheticWorld",
           "SynthBundle"]
