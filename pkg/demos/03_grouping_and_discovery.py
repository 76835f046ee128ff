"""
Expanding seed attributes and discovering new ones
==================================================

Trained span embeddings are collapsed to one point per distinct
surface. Points similar enough to a seed attribute's support set are
absorbed into it (the threshold adapts to how tight the support set
is); everything left over is clustered by DBSCAN, and each dense
cluster becomes a newly discovered attribute.
"""

from collections import Counter

from amacer.corpus import match_seed_occurrences
from amacer.embed import init_trainable_store
from amacer.grouping import GroupingConfig, adaptive_threshold, group_candidates
from amacer.posgen import generate_corpus_candidates, induce_patterns
from amacer.stopwords import STOPWORDS
from amacer.synth import build_synthetic_corpus
from amacer.train import TrainConfig, train

bundle = build_synthetic_corpus(n_products=120, seed=7)
occurrences = match_seed_occurrences(bundle.products, bundle.seed_attributes)
patterns = induce_patterns(occurrences, bundle.products, min_support=2)
candidates = generate_corpus_candidates(bundle.products, patterns, STOPWORDS, max_span_len=8)
store = init_trainable_store(bundle.products, dim=24, seed=7)
config = TrainConfig(
    dim_out=24, n_latent=6, lambda_ss=0.5, lambda_un=0.05,
    lr=0.01, batch_size=32, epochs=20, warmup_ratio=0.05, clip_norm=5.0, seed=7,
)
result = train(bundle.products, occurrences, candidates, store, config)

# delta scales the admission threshold; eps/min_samples control the
# density clustering of whatever expansion does not absorb.
grouping = GroupingConfig(delta=0.75, eps=0.25, min_samples=4, expansion=True)
clusters = group_candidates(candidates, occurrences, store, result.head, grouping)

print("clusters (label, origin, members):")
for cluster in clusters:
    sample = ", ".join(m.surface for m in cluster.members[:4])
    print(f"  {cluster.label:10s} {cluster.origin:15s} {len(cluster.members):3d}  e.g. {sample}")

# How pure is each cluster against the planted families?
print("\nmajority family per cluster:")
for cluster in clusters:
    families = Counter(bundle.value_family[m.surface] for m in cluster.members)
    family, count = families.most_common(1)[0]
    print(f"  {cluster.label:10s} -> {family:9s} ({count}/{len(cluster.members)})")

# The discovered clusters should be the two families the seeds never
# mentioned: they were reachable only through the learned geometry.
discovered = [c for c in clusters if c.origin == "discovered"]
print(f"\n{len(discovered)} discovered clusters (seeds only covered 4 of the 6 families)")

# The admission threshold is not a global constant: a tight support set
# demands more similarity than a loose one. Compare two seed attributes.
from amacer.embed import span_embedding
import numpy as np

for attr in bundle.seed_attributes[:2]:
    vectors = []
    for occ in occurrences:
        if occ.attribute == attr.type_name:
            vectors.append(span_embedding(occ.location, store, result.head).vector)
    support = np.stack(vectors[:12])
    print(f"threshold for {attr.type_name!r}: {adaptive_threshold(support, grouping.delta):.3f}")
