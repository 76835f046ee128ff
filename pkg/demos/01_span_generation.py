"""
Finding candidate attribute spans with induced POS patterns
===========================================================

Seed values are matched in product text, their POS shapes become
patterns, and the patterns license candidate spans everywhere else.
"""

from amacer.corpus import match_seed_occurrences
from amacer.posgen import generate_corpus_candidates, induce_patterns
from amacer.stopwords import STOPWORDS
from amacer.synth import build_synthetic_corpus

# A small planted corpus: 4 seeded attribute families (flavor, color,
# material, benefit) and 2 unseeded ones (origin, pack) that the seeds
# know nothing about.
bundle = build_synthetic_corpus(n_products=60, seed=7)
print(f"{len(bundle.products)} products, {len(bundle.seed_attributes)} seeded attribute types")

product = bundle.products[0]
print("\nA product title:", " ".join(product.title.tokens))
print("POS tags:       ", " ".join(product.title.pos))

# Step 1: find every occurrence of a seed value in the text.
# Matching is token-aligned and case-insensitive; longer values win
# when they overlap shorter ones.
occurrences = match_seed_occurrences(bundle.products, bundle.seed_attributes)
print(f"\n{len(occurrences)} seed occurrences, e.g.")
for occ in occurrences[:3]:
    print(f"  {occ.value!r} ({occ.attribute}) at {occ.location}")

# Step 2: the POS tags of each occurrence, with consecutive duplicates
# compacted, become the patterns. "sweet floral aroma" has tags
# [ADJ, ADJ, NOUN], which compacts to [ADJ, NOUN] -- the same pattern
# a two-word value produces, so lengths generalize.
patterns = induce_patterns(occurrences, bundle.products, min_support=2)
print("\nInduced patterns (tags, support):")
for pat in patterns:
    print(f"  {list(pat.tags)}  support={pat.support}")

# Step 3: enumerate every span whose compacted tags match a pattern.
# Spans that start or end on a stopword or punctuation are dropped,
# and overlapping spans are resolved longest-first.
candidates = generate_corpus_candidates(bundle.products, patterns, STOPWORDS, max_span_len=8)
print(f"\n{len(candidates)} candidate spans in total")

# The candidates now include values of the *unseeded* families too:
# the patterns transfer, even though no seed listed these strings.
unseeded = [c for c in candidates if bundle.value_family[c.surface] in ("origin", "pack")]
print(f"{len(unseeded)} of them belong to families the seeds never mentioned, e.g.")
for c in unseeded[:5]:
    print(f"  {c.surface!r} ({bundle.value_family[c.surface]})")
