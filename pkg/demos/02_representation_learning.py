"""
Training span representations with contrastive and variational losses
=====================================================================

Three objectives shape the space: seed-labelled spans of one attribute
attract each other (supervised InfoNCE), spans sharing a bullet attract
each other (self-supervised InfoNCE), and a latent-attribute model
reconstructs each product's candidate spans from its context
(variational negative ELBO). All gradients are analytic.
"""

import numpy as np

from amacer.corpus import match_seed_occurrences
from amacer.embed import init_trainable_store, span_embedding
from amacer.posgen import generate_corpus_candidates, induce_patterns
from amacer.stopwords import STOPWORDS
from amacer.synth import build_synthetic_corpus
from amacer.train import TrainConfig, train

bundle = build_synthetic_corpus(n_products=120, seed=7)
occurrences = match_seed_occurrences(bundle.products, bundle.seed_attributes)
patterns = induce_patterns(occurrences, bundle.products, min_support=2)
candidates = generate_corpus_candidates(bundle.products, patterns, STOPWORDS, max_span_len=8)

# A trainable token table stands in for a frozen encoder: one 24-dim
# row per distinct token, shared across all its occurrences.
store = init_trainable_store(bundle.products, dim=24, seed=7)
print(f"token table: {store.table.shape[0]} tokens x {store.table.shape[1]} dims")

config = TrainConfig(
    dim_out=24,
    n_latent=6,
    tau=0.1,
    lambda_ss=0.5,   # weight of the same-bullet objective
    lambda_un=0.05,  # weight of the variational objective
    lr=0.01,
    batch_size=32,
    epochs=20,
    warmup_ratio=0.05,
    clip_norm=5.0,
    seed=7,
)


def neighbour(surface, cands, store, head):
    """Nearest candidate surface by cosine, excluding itself."""
    by_surface = {}
    for c in cands:
        by_surface.setdefault(c.surface, c.location)
    vecs = {s: span_embedding(loc, store, head).vector for s, loc in by_surface.items()}
    v = vecs[surface]
    best = max((s for s in vecs if s != surface), key=lambda s: vecs[s] @ v)
    return best, float(vecs[best] @ v)


result = train(bundle.products, occurrences, candidates, store, config)
print("\nepoch  loss")
for epoch, loss in enumerate(result.loss_history):
    if epoch % 4 == 0 or epoch == len(result.loss_history) - 1:
        print(f"{epoch:5d}  {loss:8.3f}")

# After training, a value's nearest neighbour should share its family,
# including for families no seed ever mentioned.
print("\nnearest neighbours after training:")
for surface in ("sweet", "crimson tint", "himalayan", "resealable sachet"):
    other, sim = neighbour(surface, candidates, store, result.head)
    fam = bundle.value_family[surface]
    fam_other = bundle.value_family[other]
    print(f"  {surface!r} ({fam}) -> {other!r} ({fam_other}), cosine {sim:.3f}")

# The latent attributes learned by the variational term can be read as
# soft topics over candidate spans; their pairwise cosine stays well
# below 1, i.e. they have not collapsed onto a single direction.
attr = result.latent.attr / np.linalg.norm(result.latent.attr, axis=1, keepdims=True)
cos = attr @ attr.T
np.fill_diagonal(cos, -1.0)
print(f"\nmax pairwise cosine between latent attributes: {cos.max():.3f}")
