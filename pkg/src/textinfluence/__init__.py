"""Concept-text explanations for image classifiers, ranked by directional influence.

Works on precomputed classifier features, image/text embeddings and
classifier heads loaded from files.
"""

__version__ = "0.1.0"

from .aligner import AffineAligner, AlignmentDataset, apply, mse, similarity, train_aligner
from .explainer import (ConceptBank, ConceptEntry, Explanation, rank_faithtrace, rank_random,
                        rank_text_to_concept)
from .heads import ClassifierHead, LinearHead, MlpHead, load_head, save_head
from .influence import (DirectionVector, InfluenceConfig, direction_closed_form,
                        direction_finite_diff, directional_score, influence_score)
from .metrics import (CurveConfig, EvaluationReport, InfluenceCurve, aggregate,
                      influence_curve, margin, margin_confidence)
from .modelio import read_features, synth_world, write_features
from .numkernel import cosine, normalize
