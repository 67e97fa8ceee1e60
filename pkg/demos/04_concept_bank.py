# %% [markdown]
# # Building a concept bank
#
# Concept phrases come from a chat-completions endpoint queried in batches
# until enough unique phrases accumulate. A scripted client stands in for
# the endpoint here so the demo runs offline.

# %%
import numpy as np

from textinfluence.conceptbank_gen import (GenConfig, ScriptedClient, attach_embeddings,
                                           generate_bank, render_prompt)

print(render_prompt("lemur", ["long tail", "gray fur"], mode="llm", batch_size=5))

# %% [markdown]
# Replies are parsed as bullets. Case-insensitive repeats, phrases naming the
# class and phrases over five words are dropped.

# %%
client = ScriptedClient([
    "- long tail\n- gray fur\n- Long Tail\n- ring-tailed lemur\n- large orange eyes",
    "- tree branches\n- black and white striped tail rings on a long body\n- wet nose",
])
cfg = GenConfig("http://localhost:8000", llm_target_count=6, backoff=0.0)
texts = generate_bank(cfg, "lemur", client=client, modes=("llm",))
print(texts)

# %% [markdown]
# Embeddings are computed outside this package (one row per phrase) and
# attached afterwards.

# %%
import tempfile, os
from textinfluence import write_features

emb = np.random.default_rng(0).normal(size=(len(texts), 8))
with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "emb.ftm")
    write_features(path, emb)
    bank = attach_embeddings(texts, path, class_label="lemur")
print(len(bank), "concepts, embedding dim", bank.entries[0].embedding.size)
