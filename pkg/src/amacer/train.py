"""Representation learning: contrastive and variational objectives.

All losses are plain numpy float64 forward passes paired with
hand-derived analytic gradients (verified against finite differences in
the test suite), so training is exactly reproducible: same inputs, same
seed, bitwise-identical parameters.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import KIND_BULLET, Location, Product, SeedOccurrence
from .embed import (
    EmbeddingStore,
    ProjectionHead,
    TrainableTokenStore,
    product_context,
    span_mean,
)
from .posgen import CandidateSpan

__all__ = [
    "Checkpoint",
    "LatentAttributeModel",
    "LatentGrads",
    "LatentInspection",
    "LatentState",
    "TrainConfig",
    "TrainResult",
    "TrainingBatch",
    "TrainingError",
    "build_batch",
    "inspect_latents",
    "kl_standard_normal",
    "latent_forward",
    "load_checkpoint",
    "save_checkpoint",
    "span_likelihoods",
    "store_from_checkpoint",
    "supervised_contrastive_loss",
    "total_loss",
    "train",
    "unsupervised_loss",
    "window_contrastive_loss",
]


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss, degenerate embedding, bad state)."""


# ---------------------------------------------------------------------------
# contrastive losses


def _infonce(
    embeddings: np.ndarray,
    groups: Sequence[tuple[int, np.ndarray, np.ndarray]],
    tau: float,
) -> tuple[float, np.ndarray, int]:
    """Shared InfoNCE core over unit-norm rows of ``embeddings``.

    ``groups`` lists (anchor, positive indices, negative indices). Each
    positive p of anchor i contributes ``-log softmax`` where the
    denominator runs over {p} plus the anchor's negatives, averaged over
    positives and summed over anchors. Anchors lacking a positive or a
    negative are skipped. Returns (loss, dloss/dembeddings, n_anchors).
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    sims = emb @ emb.T
    dsims = np.zeros_like(sims)
    loss = 0.0
    used = 0
    for anchor, pos, neg in groups:
        if pos.size == 0 or neg.size == 0:
            continue
        used += 1
        logits = sims[anchor] / tau
        lneg = logits[neg]
        mx = lneg.max()
        lse_neg = mx + math.log(float(np.exp(lneg - mx).sum()))
        lpos = logits[pos]
        lse_each = np.logaddexp(lpos, lse_neg)
        loss += float(np.mean(lse_each - lpos))
        coef = 1.0 / (pos.size * tau)
        dsims[anchor, pos] += coef * (np.exp(lpos - lse_each) - 1.0)
        dsims[anchor, neg] += coef * np.exp(lneg[None, :] - lse_each[:, None]).sum(axis=0)
    demb = dsims @ emb + dsims.T @ emb
    return loss, demb, used


def supervised_contrastive_loss(
    embeddings: np.ndarray, labels: Sequence[str], tau: float
) -> tuple[float, np.ndarray]:
    """Seed-label InfoNCE: positives share the anchor's attribute label.

    Per anchor the term is averaged over its positives; anchors whose
    label is unique in the batch are skipped (they still serve as
    negatives for others).

    Raises:
        ValueError: If fewer than two distinct labels are present, or
            lengths disagree, or ``tau`` is not positive.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    if tau <= 0:
        raise ValueError("tau must be positive")
    if emb.ndim != 2 or emb.shape[0] != len(labels):
        raise ValueError(f"{emb.shape[0]} embeddings but {len(labels)} labels")
    distinct = set(labels)
    if len(distinct) < 2:
        raise ValueError("supervised contrastive loss needs >= 2 distinct labels")
    labels = list(labels)
    idx_by_label: dict[str, np.ndarray] = {
        lab: np.array([i for i, l in enumerate(labels) if l == lab], dtype=np.intp)
        for lab in distinct
    }
    all_idx = np.arange(len(labels), dtype=np.intp)
    groups = []
    for i, lab in enumerate(labels):
        same = idx_by_label[lab]
        pos = same[same != i]
        neg = all_idx[np.array([l != lab for l in labels])]
        groups.append((i, pos, neg))
    loss, demb, _ = _infonce(emb, groups, tau)
    return loss, demb


def window_contrastive_loss(
    embeddings: np.ndarray,
    product_ids: Sequence[str],
    bullet_ids: Sequence[int],
    tau: float,
) -> tuple[float, np.ndarray]:
    """Same-bullet InfoNCE over candidate spans found in bullets.

    Positives are other spans of the anchor's bullet; negatives are
    spans from the same product's other bullets. A product with fewer
    than two non-empty bullets contributes 0.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    if tau <= 0:
        raise ValueError("tau must be positive")
    if emb.shape[0] != len(product_ids) or len(product_ids) != len(bullet_ids):
        raise ValueError("embeddings, product_ids and bullet_ids must align")
    by_product: dict[str, list[int]] = {}
    for i, pid in enumerate(product_ids):
        by_product.setdefault(pid, []).append(i)
    groups = []
    for pid, items in by_product.items():
        items_arr = np.array(items, dtype=np.intp)
        bullets = np.array([bullet_ids[i] for i in items], dtype=np.int64)
        for local, i in enumerate(items):
            same = items_arr[(bullets == bullets[local]) & (items_arr != i)]
            other = items_arr[bullets != bullets[local]]
            groups.append((i, same, other))
    loss, demb, _ = _infonce(emb, groups, tau)
    return loss, demb


# ---------------------------------------------------------------------------
# latent attribute model


@dataclass
class LatentAttributeModel:
    """Variational latent-attribute parameters.

    Attributes:
        attr: (K, dim_out) latent attribute embeddings.
        w_mu: (K, ctx_dim) linear map from context to posterior mean.
        w_logvar: (K, ctx_dim) linear map from context to posterior log-variance.
    """

    attr: np.ndarray
    w_mu: np.ndarray
    w_logvar: np.ndarray

    def __post_init__(self) -> None:
        self.attr = np.asarray(self.attr, dtype=np.float64)
        self.w_mu = np.asarray(self.w_mu, dtype=np.float64)
        self.w_logvar = np.asarray(self.w_logvar, dtype=np.float64)
        if self.attr.ndim != 2 or self.attr.shape[0] < 2:
            raise ValueError("need at least 2 latent attributes")
        if self.w_mu.shape != self.w_logvar.shape or self.w_mu.shape[0] != self.attr.shape[0]:
            raise ValueError("w_mu / w_logvar must be (K, ctx_dim)")

    @property
    def n_latent(self) -> int:
        return self.attr.shape[0]

    @property
    def ctx_dim(self) -> int:
        return self.w_mu.shape[1]

    @classmethod
    def create(cls, n_latent: int, dim_out: int, ctx_dim: int, seed: int) -> "LatentAttributeModel":
        rng = np.random.default_rng(seed)
        return cls(
            attr=rng.standard_normal((n_latent, dim_out)) / np.sqrt(dim_out),
            w_mu=rng.standard_normal((n_latent, ctx_dim)) / np.sqrt(ctx_dim),
            w_logvar=rng.standard_normal((n_latent, ctx_dim)) / (10.0 * np.sqrt(ctx_dim)),
        )


@dataclass
class LatentState:
    """One product's latent forward pass.

    ``alpha`` sums to 1 over the K latent attributes; each row of
    ``beta`` sums to 1 over the batch candidate set.
    """

    mu: np.ndarray
    logvar: np.ndarray
    alpha_tilde: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray


def _log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    mx = x.max(axis=axis, keepdims=True)
    return x - (mx + np.log(np.exp(x - mx).sum(axis=axis, keepdims=True)))


def latent_forward(
    context: np.ndarray,
    model: LatentAttributeModel,
    cand_embeddings: np.ndarray,
    noise: np.ndarray,
) -> LatentState:
    """Reparameterized forward pass for one product context.

    ``alpha = softmax(mu + exp(logvar/2) * noise)`` over K latents;
    ``beta[k]`` is the softmax over candidates of ``attr[k] . g_c``.

    Raises:
        ValueError: On shape mismatch, an empty candidate set, or
            non-finite inputs.
    """
    context = np.asarray(context, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if context.shape != (model.ctx_dim,):
        raise ValueError(f"context shape {context.shape}, expected ({model.ctx_dim},)")
    if noise.shape != (model.n_latent,):
        raise ValueError(f"noise shape {noise.shape}, expected ({model.n_latent},)")
    if cand_embeddings.ndim != 2 or cand_embeddings.shape[0] < 1:
        raise ValueError("candidate set must be non-empty")
    if not (np.isfinite(context).all() and np.isfinite(noise).all()):
        raise ValueError("non-finite context or noise")
    mu = model.w_mu @ context
    logvar = model.w_logvar @ context
    alpha_tilde = mu + np.exp(0.5 * logvar) * noise
    alpha = np.exp(_log_softmax(alpha_tilde))
    beta = np.exp(_log_softmax(model.attr @ cand_embeddings.T, axis=1))
    return LatentState(mu=mu, logvar=logvar, alpha_tilde=alpha_tilde, alpha=alpha, beta=beta)


def span_likelihoods(state: LatentState) -> np.ndarray:
    """P(c | p) for every batch candidate: mixture of beta rows by alpha."""
    return state.alpha @ state.beta


def kl_standard_normal(mu: np.ndarray, logvar: np.ndarray) -> float:
    """KL( N(mu, diag(exp(logvar))) || N(0, I) ), exactly 0 at (0, 0)."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    if mu.shape != logvar.shape:
        raise ValueError(f"mu shape {mu.shape} != logvar shape {logvar.shape}")
    return 0.5 * float(np.sum(np.exp(logvar) + mu * mu - 1.0 - logvar))


@dataclass
class LatentGrads:
    """Gradients of the unsupervised loss w.r.t. every input it touches."""

    attr: np.ndarray
    w_mu: np.ndarray
    w_logvar: np.ndarray
    cand: np.ndarray
    context: np.ndarray


def unsupervised_loss(
    span_columns: Sequence[np.ndarray],
    model: LatentAttributeModel,
    cand_embeddings: np.ndarray,
    contexts: np.ndarray,
    noise: np.ndarray,
) -> tuple[float, LatentGrads, list[LatentState]]:
    """Negative ELBO over a batch of products.

    For product p with candidate columns ``span_columns[p]`` (indices
    into the batch candidate set, repeated per occurrence), the loss is
    ``-sum_c log P(c|p) + KL(q(alpha~|p) || N(0,I))``. Products with no
    candidates contribute only the KL term.

    Returns the scalar loss, gradients, and the per-product states.
    """
    cand = np.asarray(cand_embeddings, dtype=np.float64)
    contexts = np.asarray(contexts, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    n_products = len(span_columns)
    if contexts.shape != (n_products, model.ctx_dim):
        raise ValueError(f"contexts shape {contexts.shape}")
    if noise.shape != (n_products, model.n_latent):
        raise ValueError(f"noise shape {noise.shape}")
    if cand.ndim != 2 or cand.shape[0] < 1:
        raise ValueError("candidate set must be non-empty")

    n_latent = model.n_latent
    logits_beta = model.attr @ cand.T  # (K, C)
    log_beta = _log_softmax(logits_beta, axis=1)
    beta = np.exp(log_beta)

    d_logits_beta = np.zeros_like(logits_beta)
    resp_total = np.zeros(n_latent)
    d_w_mu = np.zeros_like(model.w_mu)
    d_w_logvar = np.zeros_like(model.w_logvar)
    d_context = np.zeros_like(contexts)

    loss = 0.0
    states: list[LatentState] = []
    for p in range(n_products):
        h = contexts[p]
        mu = model.w_mu @ h
        logvar = model.w_logvar @ h
        sigma = np.exp(0.5 * logvar)
        alpha_tilde = mu + sigma * noise[p]
        log_alpha = _log_softmax(alpha_tilde)
        alpha = np.exp(log_alpha)
        states.append(
            LatentState(mu=mu, logvar=logvar, alpha_tilde=alpha_tilde, alpha=alpha, beta=beta)
        )

        d_alpha_tilde = np.zeros(n_latent)
        cols = np.asarray(span_columns[p], dtype=np.intp)
        if cols.size:
            joint = log_alpha[:, None] + log_beta[:, cols]  # (K, T)
            mx = joint.max(axis=0)
            log_prob = mx + np.log(np.exp(joint - mx).sum(axis=0))  # (T,)
            loss -= float(log_prob.sum())
            resp = np.exp(joint - log_prob[None, :])  # responsibilities, columns sum to 1
            resp_sum = resp.sum(axis=1)
            resp_total += resp_sum
            d_alpha_tilde = cols.size * alpha - resp_sum
            np.add.at(d_logits_beta.T, cols, -resp.T)

        loss += kl_standard_normal(mu, logvar)
        d_mu = d_alpha_tilde + mu
        d_logvar = 0.5 * d_alpha_tilde * noise[p] * sigma + 0.5 * (np.exp(logvar) - 1.0)
        d_w_mu += np.outer(d_mu, h)
        d_w_logvar += np.outer(d_logvar, h)
        d_context[p] = model.w_mu.T @ d_mu + model.w_logvar.T @ d_logvar

    d_logits_beta += beta * resp_total[:, None]
    grads = LatentGrads(
        attr=d_logits_beta @ cand,
        w_mu=d_w_mu,
        w_logvar=d_w_logvar,
        cand=d_logits_beta.T @ model.attr,
        context=d_context,
    )
    return loss, grads, states


# ---------------------------------------------------------------------------
# batched total loss over the full computation graph


@dataclass
class TrainConfig:
    """Optimization settings; defaults follow the published recipe."""

    dim_out: int = 64
    n_latent: int = 50
    tau: float = 0.1
    lambda_ss: float = 0.01
    lambda_un: float = 0.02
    lr: float = 2e-5
    batch_size: int = 128
    epochs: int = 10
    warmup_ratio: float = 0.01
    clip_norm: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim_out < 1 or self.n_latent < 2:
            raise ValueError("dim_out must be >= 1 and n_latent >= 2")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.lambda_ss < 0 or self.lambda_un < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lr < 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("lr must be >= 0, batch_size and epochs >= 1")
        if not (0.0 <= self.warmup_ratio <= 1.0):
            raise ValueError("warmup_ratio must be in [0, 1]")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        known = {k: v for k, v in obj.items() if k in cls.__dataclass_fields__}
        unknown = set(obj) - set(known)
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**known)


@dataclass
class TrainingBatch:
    """One optimization step's inputs, all scoped to ``products``."""

    products: list[Product]
    seed_items: list[SeedOccurrence]
    window_items: list[CandidateSpan]
    candidates: list[CandidateSpan]


def build_batch(
    products: Sequence[Product],
    occurrences_by_product: dict[str, list[SeedOccurrence]],
    candidates_by_product: dict[str, list[CandidateSpan]],
) -> TrainingBatch:
    """Assembles a batch; window items are the bullet-located candidates."""
    seed_items: list[SeedOccurrence] = []
    candidates: list[CandidateSpan] = []
    for p in products:
        seed_items.extend(occurrences_by_product.get(p.product_id, ()))
        candidates.extend(candidates_by_product.get(p.product_id, ()))
    window_items = [c for c in candidates if c.location[1] == KIND_BULLET]
    return TrainingBatch(
        products=list(products),
        seed_items=seed_items,
        window_items=window_items,
        candidates=candidates,
    )


@dataclass
class BatchGrads:
    """Weighted total-loss gradients for every trainable parameter."""

    head: np.ndarray
    attr: np.ndarray
    w_mu: np.ndarray
    w_logvar: np.ndarray
    tokens: np.ndarray | None  # dense table gradient, trainable stores only

    def arrays(self) -> list[np.ndarray]:
        out = [self.head, self.attr, self.w_mu, self.w_logvar]
        if self.tokens is not None:
            out.append(self.tokens)
        return out


def total_loss(
    batch: TrainingBatch,
    store,
    head: ProjectionHead,
    latent: LatentAttributeModel,
    config: TrainConfig,
    noise: np.ndarray,
) -> tuple[float, dict[str, float], BatchGrads]:
    """Weighted sum of the three objectives with full backpropagation.

    Every span embedding is recomputed from the current parameters:
    token rows -> span mean -> projection -> unit norm. Terms whose
    preconditions fail contribute 0 (single seed label, no bullet pairs,
    no candidates) rather than raising.

    Returns (total, per-term components, parameter gradients).
    """
    weights = head.weights
    node_index: dict[Location, int] = {}
    node_locs: list[Location] = []

    def node_of(loc: Location) -> int:
        idx = node_index.get(loc)
        if idx is None:
            idx = len(node_locs)
            node_index[loc] = idx
            node_locs.append(loc)
        return idx

    seed_nodes = np.array([node_of(o.location) for o in batch.seed_items], dtype=np.intp)
    window_nodes = np.array([node_of(c.location) for c in batch.window_items], dtype=np.intp)
    cand_nodes = np.array([node_of(c.location) for c in batch.candidates], dtype=np.intp)

    if node_locs:
        means = np.stack([span_mean(store, loc) for loc in node_locs])
    else:
        means = np.zeros((0, store.dim))
    projected = means @ weights
    norms = np.linalg.norm(projected, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise TrainingError(f"degenerate span embedding at {node_locs[bad[0]]}")
    unit = projected / norms[:, None]

    d_unit = np.zeros_like(unit)
    components = {"supervised": 0.0, "window": 0.0, "unsupervised": 0.0}

    labels = [o.attribute for o in batch.seed_items]
    if len(set(labels)) >= 2:
        l_su, d_su = supervised_contrastive_loss(unit[seed_nodes], labels, config.tau)
        components["supervised"] = l_su
        np.add.at(d_unit, seed_nodes, d_su)

    if config.lambda_ss > 0 and batch.window_items:
        l_ss, d_ss = window_contrastive_loss(
            unit[window_nodes],
            [c.location[0] for c in batch.window_items],
            [c.location[2] for c in batch.window_items],
            config.tau,
        )
        components["window"] = l_ss
        np.add.at(d_unit, window_nodes, config.lambda_ss * d_ss)

    attr_grad = np.zeros_like(latent.attr)
    w_mu_grad = np.zeros_like(latent.w_mu)
    w_logvar_grad = np.zeros_like(latent.w_logvar)
    token_grad = np.zeros_like(store.table) if store.trainable else None

    if config.lambda_un > 0 and batch.candidates:
        surfaces = sorted({c.surface for c in batch.candidates})
        surf_col = {s: i for i, s in enumerate(surfaces)}
        occ_nodes: list[list[int]] = [[] for _ in surfaces]
        for c, node in zip(batch.candidates, cand_nodes):
            occ_nodes[surf_col[c.surface]].append(int(node))
        cand_vecs = np.empty((len(surfaces), head.dim_out))
        cand_norms = np.empty(len(surfaces))
        for ci, nodes in enumerate(occ_nodes):
            mean_vec = unit[nodes].mean(axis=0)
            nrm = float(np.linalg.norm(mean_vec))
            if nrm == 0.0:
                raise TrainingError(f"degenerate canonical embedding for {surfaces[ci]!r}")
            cand_vecs[ci] = mean_vec / nrm
            cand_norms[ci] = nrm

        span_columns = []
        by_product: dict[str, list[int]] = {p.product_id: [] for p in batch.products}
        for c in batch.candidates:
            by_product[c.location[0]].append(surf_col[c.surface])
        for p in batch.products:
            span_columns.append(np.array(by_product[p.product_id], dtype=np.intp))
        contexts = np.stack([product_context(p, store) for p in batch.products])

        l_un, lg, _ = unsupervised_loss(span_columns, latent, cand_vecs, contexts, noise)
        components["unsupervised"] = l_un
        lam = config.lambda_un
        attr_grad = lam * lg.attr
        w_mu_grad = lam * lg.w_mu
        w_logvar_grad = lam * lg.w_logvar
        # chain canonical-candidate gradients back to occurrence embeddings
        dot = np.sum(lg.cand * cand_vecs, axis=1, keepdims=True)
        d_mean_vec = lam * (lg.cand - dot * cand_vecs) / cand_norms[:, None]
        for ci, nodes in enumerate(occ_nodes):
            np.add.at(d_unit, nodes, d_mean_vec[ci] / len(nodes))
        # context vectors bypass the head: they feed token rows directly
        if token_grad is not None:
            for pi, p in enumerate(batch.products):
                seqs = list(p.sequences())
                share = lam / len(seqs)
                for seq in seqs:
                    rows = store.rows_for(seq.key)
                    np.add.at(token_grad, rows, share * lg.context[pi] / len(rows))

    # backprop normalize -> projection -> span mean
    dot = np.sum(d_unit * unit, axis=1, keepdims=True)
    d_projected = (d_unit - dot * unit) / norms[:, None]
    head_grad = means.T @ d_projected
    if token_grad is not None:
        d_means = d_projected @ weights.T
        for ni, loc in enumerate(node_locs):
            pid, kind, index, start, end = loc
            rows = store.rows_for((pid, kind, index))[start:end]
            np.add.at(token_grad, rows, d_means[ni] / (end - start))

    total = (
        components["supervised"]
        + config.lambda_ss * components["window"]
        + config.lambda_un * components["unsupervised"]
    )
    components["total"] = total
    grads = BatchGrads(
        head=head_grad,
        attr=attr_grad,
        w_mu=w_mu_grad,
        w_logvar=w_logvar_grad,
        tokens=token_grad,
    )
    return total, components, grads


# ---------------------------------------------------------------------------
# optimizer and training loop


class _AdamSlot:
    def __init__(self, shape: tuple[int, ...]) -> None:
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def update(self, param: np.ndarray, grad: np.ndarray, lr: float, cfg: TrainConfig) -> None:
        self.t += 1
        self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * grad
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * grad * grad
        m_hat = self.m / (1.0 - cfg.beta1**self.t)
        v_hat = self.v / (1.0 - cfg.beta2**self.t)
        param -= lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def _lr_at(step: int, total_steps: int, warmup_steps: int, base: float) -> float:
    """Linear warmup to ``base`` then linear decay toward 0."""
    if step < warmup_steps:
        return base * (step + 1) / warmup_steps
    if total_steps == warmup_steps:
        return base
    return base * (total_steps - step) / (total_steps - warmup_steps)


@dataclass
class TrainResult:
    head: ProjectionHead
    latent: LatentAttributeModel
    store: object
    loss_history: list[float]
    component_history: list[dict[str, float]]


def train(
    products: Sequence[Product],
    seed_occurrences: Sequence[SeedOccurrence],
    candidates: Sequence[CandidateSpan],
    store,
    config: TrainConfig,
    head: ProjectionHead | None = None,
    on_epoch: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Runs the deterministic mini-batch training loop.

    Products are shuffled per epoch with the config seed; reparameterized
    noise is drawn per batch from the same generator, so two runs with
    identical inputs produce bitwise-identical parameters. Gradients are
    clipped to ``clip_norm`` by global norm. Trainable stores are
    updated in place alongside the head and latent model.

    Raises:
        TrainingError: On a non-finite loss, with epoch/step context.
    """
    if not products:
        raise ValueError("empty corpus")
    if head is None:
        head = ProjectionHead.create(store.dim, config.dim_out, seed=config.seed)
    if head.dim_in != store.dim or head.dim_out != config.dim_out:
        raise ValueError(
            f"head maps {head.dim_in}->{head.dim_out}, need {store.dim}->{config.dim_out}"
        )
    latent = LatentAttributeModel.create(
        config.n_latent, config.dim_out, ctx_dim=store.dim, seed=config.seed + 1
    )

    occ_by_product: dict[str, list[SeedOccurrence]] = {}
    for o in seed_occurrences:
        occ_by_product.setdefault(o.location[0], []).append(o)
    cand_by_product: dict[str, list[CandidateSpan]] = {}
    for c in candidates:
        cand_by_product.setdefault(c.location[0], []).append(c)

    params: list[np.ndarray] = [head.weights, latent.attr, latent.w_mu, latent.w_logvar]
    if store.trainable:
        params.append(store.table)
    slots = [_AdamSlot(p.shape) for p in params]

    rng = np.random.default_rng(config.seed)
    n_batches = math.ceil(len(products) / config.batch_size)
    total_steps = config.epochs * n_batches
    warmup_steps = max(1, round(config.warmup_ratio * total_steps))

    loss_history: list[float] = []
    component_history: list[dict[str, float]] = []
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(products))
        epoch_losses = []
        epoch_components: dict[str, float] = {}
        for b in range(n_batches):
            chosen = order[b * config.batch_size : (b + 1) * config.batch_size]
            batch = build_batch([products[i] for i in chosen], occ_by_product, cand_by_product)
            noise = rng.standard_normal((len(batch.products), config.n_latent))
            loss, comps, grads = total_loss(batch, store, head, latent, config, noise)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch} step {step}")
            garrays = grads.arrays()
            gnorm = math.sqrt(sum(float(np.sum(g * g)) for g in garrays))
            if gnorm > config.clip_norm:
                scale = config.clip_norm / gnorm
                for g in garrays:
                    g *= scale
            lr = _lr_at(step, total_steps, warmup_steps, config.lr)
            for param, slot, grad in zip(params, slots, garrays):
                slot.update(param, grad, lr, config)
            epoch_losses.append(loss)
            for k, v in comps.items():
                epoch_components[k] = epoch_components.get(k, 0.0) + v / n_batches
            step += 1
        mean_loss = float(np.mean(epoch_losses))
        loss_history.append(mean_loss)
        component_history.append(epoch_components)
        if on_epoch is not None:
            on_epoch(epoch, mean_loss)
    return TrainResult(
        head=head,
        latent=latent,
        store=store,
        loss_history=loss_history,
        component_history=component_history,
    )


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_MAGIC = b"AMCK"
CHECKPOINT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sIQ")


@dataclass
class Checkpoint:
    config: TrainConfig
    head: ProjectionHead
    latent: LatentAttributeModel
    loss_history: list[float]
    token_table: np.ndarray | None
    vocabulary: list[str] | None


def save_checkpoint(path: str | Path, result: TrainResult, config: TrainConfig) -> None:
    """Serializes parameters to a little-endian float64 binary file."""
    arrays: list[tuple[str, np.ndarray]] = [
        ("head", result.head.weights),
        ("attr", result.latent.attr),
        ("w_mu", result.latent.w_mu),
        ("w_logvar", result.latent.w_logvar),
    ]
    vocabulary = None
    if result.store is not None and getattr(result.store, "trainable", False):
        arrays.append(("tokens", result.store.table))
        vocabulary = result.store.vocabulary
    header = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "loss_history": result.loss_history,
        "vocabulary": vocabulary,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    raw_header = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(_CKPT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(raw_header)))
        fh.write(raw_header)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Reads a checkpoint written by ``save_checkpoint``."""
    data = Path(path).read_bytes()
    if len(data) < _CKPT_HEADER.size:
        raise ValueError("checkpoint: file too short for header")
    magic, version, header_len = _CKPT_HEADER.unpack_from(data, 0)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"checkpoint: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"checkpoint: unsupported version {version}")
    offset = _CKPT_HEADER.size
    header = json.loads(data[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    arrays: dict[str, np.ndarray] = {}
    for meta in header["arrays"]:
        shape = tuple(meta["shape"])
        n = int(np.prod(shape))
        arrays[meta["name"]] = (
            np.frombuffer(data, dtype="<f8", count=n, offset=offset)
            .reshape(shape)
            .astype(np.float64)
        )
        offset += n * 8
    if offset != len(data):
        raise ValueError(f"checkpoint: {len(data) - offset} trailing bytes")
    return Checkpoint(
        config=TrainConfig.from_dict(header["config"]),
        head=ProjectionHead(weights=arrays["head"]),
        latent=LatentAttributeModel(
            attr=arrays["attr"], w_mu=arrays["w_mu"], w_logvar=arrays["w_logvar"]
        ),
        loss_history=[float(x) for x in header["loss_history"]],
        token_table=arrays.get("tokens"),
        vocabulary=header.get("vocabulary"),
    )


def store_from_checkpoint(ckpt: Checkpoint, products: Sequence[Product]) -> TrainableTokenStore:
    """Rebinds a checkpointed token table to a corpus.

    Raises:
        ValueError: If the checkpoint has no token table or the corpus
            contains a token outside the checkpoint vocabulary.
    """
    if ckpt.token_table is None or ckpt.vocabulary is None:
        raise ValueError("checkpoint has no trainable token table")
    token_ids = {tok: i for i, tok in enumerate(ckpt.vocabulary)}
    seq_rows: dict[tuple, np.ndarray] = {}
    for p in products:
        for seq in p.sequences():
            try:
                seq_rows[seq.key] = np.array([token_ids[t] for t in seq.tokens], dtype=np.int64)
            except KeyError as exc:
                raise ValueError(
                    f"sequence {seq.key}: token {exc.args[0]!r} not in checkpoint vocabulary"
                ) from None
    return TrainableTokenStore(
        dim=ckpt.token_table.shape[1],
        table=np.array(ckpt.token_table),
        token_ids=token_ids,
        seq_rows=seq_rows,
    )


# ---------------------------------------------------------------------------
# latent inspection


@dataclass
class LatentInspection:
    """Top-scoring spans per latent attribute plus a collapse diagnostic."""

    rows: list[list[tuple[str, float]]]
    max_pairwise_cosine: float


def inspect_latents(
    latent: LatentAttributeModel,
    surfaces: Sequence[str],
    vectors: np.ndarray,
    top_m: int = 5,
) -> LatentInspection:
    """Ranks candidate surfaces for each latent attribute by dot score.

    Ties break on the surface string. The collapse diagnostic is the
    maximum pairwise cosine between latent attribute embeddings; values
    near 1 mean latents have degenerated onto one direction.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != len(surfaces):
        raise ValueError("one vector per surface required")
    if top_m < 1:
        raise ValueError("top_m must be >= 1")
    scores = latent.attr @ vectors.T  # (K, n)
    rows = []
    for k in range(latent.n_latent):
        ranked = sorted(zip(surfaces, scores[k]), key=lambda t: (-t[1], t[0]))
        rows.append([(s, float(v)) for s, v in ranked[:top_m]])
    unit = latent.attr / np.linalg.norm(latent.attr, axis=1, keepdims=True)
    cos = unit @ unit.T
    np.fill_diagonal(cos, -np.inf)
    return LatentInspection(rows=rows, max_pairwise_cosine=float(cos.max()))
