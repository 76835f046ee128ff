"""Weakly-supervised open-world attribute mining.

Pipeline: seed values are matched in product text, their POS shapes
license candidate spans everywhere, span representations are trained
with contrastive and variational objectives, candidates are grouped
into seeded and newly discovered attributes, and the grouping is scored
against gold spans.
"""

__version__ = "0.1.0"

from .corpus import (
    GoldAnnotation,
    Location,
    Product,
    RawProfileEntry,
    SeedAttribute,
    SeedOccurrence,
    TokenSequence,
    load_corpus,
    load_gold,
    load_raw_profiles,
    load_seed_set,
    match_seed_occurrences,
    sanitize_seed_set,
)
from .embed import (
    EmbeddingStore,
    ProjectionHead,
    TrainableTokenStore,
    init_trainable_store,
    load_store,
    product_context,
    save_store,
    span_embedding,
)
from .evaluation import EvalReport, align_spans, evaluate
from .grouping import (
    AttributeCluster,
    GroupingConfig,
    ValuePoint,
    adaptive_expand,
    dbscan,
    group_candidates,
)
from .posgen import (
    CandidateSpan,
    PosPattern,
    compact_pos,
    generate_candidates,
    generate_corpus_candidates,
    induce_patterns,
)
from .train import (
    LatentAttributeModel,
    TrainConfig,
    TrainResult,
    inspect_latents,
    latent_forward,
    load_checkpoint,
    save_checkpoint,
    train,
)
