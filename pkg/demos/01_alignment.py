# %% [markdown]
# # Fitting an affine aligner
#
# Classifier features live in one space and text embeddings in another.
# An affine map h(z) = Wz + b, fit by least squares on paired samples,
# bridges the two. Here the pairs are synthetic so the true map is known.

# %%
import numpy as np

from textinfluence import AlignmentDataset, mse, similarity, train_aligner

rng = np.random.default_rng(0)
d, m, n = 16, 12, 200
A = rng.normal(size=(m, d)) / np.sqrt(d)
c = 0.5 * rng.normal(size=m)
X = rng.normal(size=(n, d))

# %% [markdown]
# Noiseless targets: the fit should recover (A, c) to rounding error.

# %%
al = train_aligner(AlignmentDataset(X, X @ A.T + c), ridge=0.0)
print("max |W - A| =", np.abs(al.W - A).max())
print("max |b - c| =", np.abs(al.b - c).max())

# %% [markdown]
# With noisy targets the residual MSE settles near the noise variance.

# %%
noisy = AlignmentDataset(X, X @ A.T + c + 0.05 * rng.normal(size=(n, m)))
al_noisy = train_aligner(noisy)
print("train MSE with noise sd 0.05:", mse(al_noisy, noisy), "(per-sample squared norm, ~", m * 0.05**2, ")")

# %% [markdown]
# Once aligned, a feature can be compared with any unit text embedding.

# %%
t = rng.normal(size=m)
t /= np.linalg.norm(t)
print("cos(h(z), t) =", similarity(al, X[0], t))
