# %% [markdown]
# # Faithfulness metrics
#
# Directional scores are pooled into a mean and a negative rate (the
# fraction of explanations that push the class logit down). Influence curves
# track how margin confidence moves when z is nudged along the direction by
# growing fractions of its norm.

# %%
import numpy as np

from textinfluence import CurveConfig, influence_curve, synth_world, train_aligner
from textinfluence.evaluation import evaluate_samples, summary_table

bundle = synth_world(seed=5, n_samples=30, bank_size=20)
al = train_aligner(bundle.dataset)
head = bundle.world.head

# %%
reports = evaluate_samples(bundle.samples, al, head, methods=("faithtrace", "t2c", "random"),
                           ks=(1, 3, 5), curve_cfg=CurveConfig(), seed=0)
table = summary_table(reports)
print(f"{'method':<12}" + "".join(f"{k:>18}" for k in ("top1", "top3", "top5")))
for method, row in table.items():
    cells = "".join(f"  {v['mean']:+.3f} / NR {v['nr']:.2f}" for v in row.values())
    print(f"{method:<12}{cells}")

# %% [markdown]
# One curve in detail: insertion moves toward the concept, deletion away.

# %%
from textinfluence import rank_faithtrace

s = bundle.samples[0]
top = rank_faithtrace(s.bank, al, head, s.class_index, s.z, 1)[0]
curve = influence_curve(head, s.class_index, s.z, top.direction, CurveConfig())
for rho, ins, dele in zip(curve.rhos, curve.insertion, curve.deletion):
    print(f"rho={rho:<5} insertion {ins:+.4f}  deletion {dele:+.4f}")
print("sums:", np.round([curve.insertion_sum, curve.deletion_sum], 4))
