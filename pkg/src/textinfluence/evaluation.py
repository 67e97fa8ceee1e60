"""Evaluate rankers over many samples.

Each method retrieves its top explanations per sample once, at the largest
requested k; smaller settings use prefixes, which is exact because every
ranker's top-k is a prefix of its top-(k+1). All retrieved texts are
re-scored with the directional score so the methods share one metric.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import EmptyInput
from .explainer import METHODS, explain, rescore
from .metrics import CurveConfig, InfluenceCurve, SampleRecord, aggregate, influence_curve

log = logging.getLogger(__name__)

DEFAULT_KS = (1, 3, 5)
CURVE_TOP_K = 3


def sample_seed(seed, index):
    """Per-sample seed for the random baseline, independent of worker scheduling."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _retrieve(sample, index, al, head, methods, k_max, curve_cfg, seed):
    out = {}
    for method in methods:
        k = min(k_max, len(sample.bank))
        exps = explain(method, sample.bank, al, head, sample.class_index, sample.z, k,
                       seed=sample_seed(seed, index))
        if method == "t2c":
            exps = rescore(exps, sample.bank, al, head, sample.class_index, sample.z)
        curves = []
        if curve_cfg is not None:
            for x in exps:
                if x.direction is None:
                    n = len(curve_cfg.rhos)
                    curves.append(InfluenceCurve(curve_cfg.rhos, np.zeros(n), np.zeros(n)))
                else:
                    curves.append(influence_curve(head, sample.class_index, sample.z,
                                                  x.direction, curve_cfg))
        out[method] = (exps, curves)
    return out


def evaluate_samples(samples, al, head, methods=METHODS, ks=DEFAULT_KS, curve_cfg=CurveConfig(),
                     seed=0, jobs=1):
    """Returns a list of EvaluationReport, one per (method, k), ordered method-major.

    Pass ``curve_cfg=None`` to skip influence curves.
    """
    samples = sorted(samples, key=lambda s: s.sample_id)
    if not samples:
        raise EmptyInput("no samples to evaluate")
    ks = sorted(set(int(k) for k in ks))
    k_max = ks[-1]

    def work(args):
        i, s = args
        return _retrieve(s, i, al, head, methods, k_max, curve_cfg, seed)

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, enumerate(samples)))
    else:
        results = [work(a) for a in enumerate(samples)]

    reports = []
    for method in methods:
        for k in ks:
            records = []
            for s, res in zip(samples, results):
                exps, curves = res[method]
                records.append(SampleRecord(s.sample_id, s.class_index,
                                            [x.score for x in exps[:k]], curves[:k],
                                            [x.text for x in exps[:k]]))
            reports.append(aggregate(records, method, k))
    return reports


def summary_table(reports):
    """``{method: {"top{k}": {"mean": ..., "nr": ...}}}`` in the layout of a results table."""
    table = {}
    for r in reports:
        table.setdefault(r.method, {})[f"top{r.top_k}"] = {
            "mean": r.mean_directional_score, "nr": r.negative_rate}
    return table


def report_document(reports, curve_cfg, curve_top_k=CURVE_TOP_K, per_sample=True):
    doc = {"pooling": "pairs",
           "pooling_note": "mean and NR pool all (sample, retrieved text) pairs",
           "table": summary_table(reports)}
    if curve_cfg is not None:
        doc["curve_score"] = "margin_confidence" if curve_cfg.use_margin_confidence else "logit"
        doc["rhos"] = list(curve_cfg.rhos)
        doc["curve_top_k"] = curve_top_k
        doc["display_scale"] = 10.0
        doc["curves"] = {r.method: r.to_dict(per_sample=False)["curves"]
                         for r in reports if r.top_k == curve_top_k and r.mean_insertion is not None}
    doc["reports"] = [r.to_dict(per_sample=per_sample) for r in reports]
    return doc
