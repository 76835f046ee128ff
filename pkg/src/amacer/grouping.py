"""Value grouping: adaptive seed expansion plus density clustering.

Candidate surfaces are first pulled into seed attributes whose support
they resemble strongly enough (the threshold adapts to how tight each
support set is); whatever remains is clustered with a deterministic
DBSCAN to surface new, unseeded attribute groups.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import CorpusError, Location, SeedOccurrence
from .embed import ProjectionHead, span_embedding
from .posgen import CandidateSpan

__all__ = [
    "AttributeCluster",
    "GroupingConfig",
    "ORIGIN_DISCOVERED",
    "ORIGIN_SEED",
    "ValuePoint",
    "adaptive_expand",
    "adaptive_threshold",
    "build_value_points",
    "canonical_value_embedding",
    "dbscan",
    "group_candidates",
    "load_clusters",
    "save_clusters",
    "support_similarity",
]

ORIGIN_SEED = "seed_expansion"
ORIGIN_DISCOVERED = "discovered"


@dataclass
class GroupingConfig:
    """Expansion and clustering knobs.

    ``expansion=False`` skips the seed-expansion pass entirely and sends
    every candidate to DBSCAN (used by the ablation comparison).
    """

    delta: float = 0.8
    eps: float = 0.05
    min_samples: int = 4
    expansion: bool = True

    def __post_init__(self) -> None:
        if not (0.0 < self.delta <= 1.0):
            raise ValueError("delta must be in (0, 1]")
        if not (0.0 <= self.eps <= 2.0):
            raise ValueError("eps must be in [0, 2] (cosine distance range)")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, obj: dict) -> "GroupingConfig":
        known = {k: v for k, v in obj.items() if k in cls.__dataclass_fields__}
        unknown = set(obj) - set(known)
        if unknown:
            raise ValueError(f"unknown grouping config keys: {sorted(unknown)}")
        return cls(**known)


@dataclass(frozen=True)
class ValuePoint:
    """One candidate value: a unique surface, its embedding, its spans."""

    surface: str
    vector: np.ndarray
    occurrences: tuple[Location, ...]


@dataclass(frozen=True)
class AttributeCluster:
    """A named group of value points.

    Seed-expansion clusters are labelled with the seed attribute's type
    name; discovered clusters are labelled ``new-<k>`` in creation
    order. Every cluster has at least one member.
    """

    label: str
    origin: str
    members: tuple[ValuePoint, ...]

    def __post_init__(self) -> None:
        if self.origin not in (ORIGIN_SEED, ORIGIN_DISCOVERED):
            raise ValueError(f"bad cluster origin {self.origin!r}")
        if not self.members:
            raise ValueError(f"cluster {self.label!r} has no members")


def canonical_value_embedding(occurrence_vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Mean of a value's occurrence embeddings, re-normalized to unit length.

    Raises:
        ValueError: On an empty list or a zero-norm mean.
    """
    if len(occurrence_vectors) == 0:
        raise ValueError("a value needs at least one occurrence")
    mean = np.mean(np.asarray(occurrence_vectors, dtype=np.float64), axis=0)
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        raise ValueError("occurrence embeddings cancel out (zero-norm mean)")
    return mean / norm


def support_similarity(vector: np.ndarray, support: np.ndarray) -> float:
    """Mean cosine between a candidate vector and a support set's rows."""
    if support.ndim != 2 or support.shape[0] < 1:
        raise ValueError("support set must be a non-empty matrix")
    sims = support @ np.asarray(vector, dtype=np.float64)
    return float(np.clip(sims, -1.0, 1.0).mean())


def adaptive_threshold(support: np.ndarray, delta: float) -> float:
    """Admission threshold: delta times the support set's mean self-similarity.

    The mean runs over all ordered pairs including the diagonal, so a
    single-value support set yields exactly ``delta``.
    """
    if support.ndim != 2 or support.shape[0] < 1:
        raise ValueError("support set must be a non-empty matrix")
    gram = support @ support.T
    return float(delta * np.clip(gram, -1.0, 1.0).mean())


def adaptive_expand(
    points: Sequence[ValuePoint],
    supports: Mapping[str, np.ndarray],
    delta: float,
) -> tuple[dict[str, list[ValuePoint]], list[ValuePoint]]:
    """Single-pass seed expansion.

    A point is admitted to every attribute whose support similarity
    meets that attribute's adaptive threshold, then assigned to the one
    with the highest similarity (ties break on attribute name). Support
    sets are not updated during the pass, so admission order is
    irrelevant. Returns (assignments, leftovers).
    """
    names = sorted(supports)
    thresholds = {name: adaptive_threshold(supports[name], delta) for name in names}
    assignments: dict[str, list[ValuePoint]] = {name: [] for name in names}
    leftovers: list[ValuePoint] = []
    for point in points:
        best_name = None
        best_sim = -np.inf
        for name in names:
            sim = support_similarity(point.vector, supports[name])
            if sim >= thresholds[name] and sim > best_sim:
                best_name, best_sim = name, sim
        if best_name is None:
            leftovers.append(point)
        else:
            assignments[best_name].append(point)
    return assignments, leftovers


def dbscan(vectors: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Deterministic DBSCAN under cosine distance ``1 - x . y``.

    Vectors must be unit-norm rows. A point is core when at least
    ``min_samples`` points (itself included) lie within ``eps``.
    Clusters are grown by scan-order breadth-first expansion, so label
    ``k`` is the cluster whose first core point has the k-th smallest
    index; a border point reachable from several clusters joins the
    earliest-created one. Noise points get label -1.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    n = vectors.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels
    dist = 1.0 - np.clip(vectors @ vectors.T, -1.0, 1.0)
    within = dist <= eps
    neighbor_lists = [np.flatnonzero(within[i]) for i in range(n)]
    core = np.array([len(nb) >= min_samples for nb in neighbor_lists])

    cluster = 0
    for start in range(n):
        if labels[start] != -1 or not core[start]:
            continue
        labels[start] = cluster
        queue: deque[int] = deque([start])
        while queue:
            j = queue.popleft()
            for k in neighbor_lists[j]:
                if labels[k] == -1:
                    labels[k] = cluster
                    if core[k]:
                        queue.append(int(k))
        cluster += 1
    return labels


def build_value_points(
    candidates: Sequence[CandidateSpan],
    embed: Callable[[Location], np.ndarray],
) -> list[ValuePoint]:
    """Collapses candidate occurrences into one point per surface.

    Points are ordered by surface string; each vector is the canonical
    (re-normalized mean) embedding of the surface's occurrences.
    """
    by_surface: dict[str, list[Location]] = {}
    for c in candidates:
        by_surface.setdefault(c.surface, []).append(c.location)
    points = []
    for surface in sorted(by_surface):
        locs = sorted(by_surface[surface])
        vecs = [embed(loc) for loc in locs]
        points.append(
            ValuePoint(
                surface=surface,
                vector=canonical_value_embedding(vecs),
                occurrences=tuple(locs),
            )
        )
    return points


def group_candidates(
    candidates: Sequence[CandidateSpan],
    seed_occurrences: Sequence[SeedOccurrence],
    store,
    head: ProjectionHead,
    config: GroupingConfig,
) -> list[AttributeCluster]:
    """Full grouping stage: expansion into seed attributes, then discovery.

    Support sets are the canonical embeddings of each seed value's
    matched occurrences; attributes with no matched seed value cannot
    admit anything. Leftover points are clustered by DBSCAN; noise is
    dropped. Output order: seed clusters by attribute name, then
    discovered clusters ``new-0, new-1, ...`` in creation order.
    """

    def embed(loc: Location) -> np.ndarray:
        return span_embedding(loc, store, head).vector

    points = build_value_points(candidates, embed)

    supports: dict[str, np.ndarray] = {}
    by_attr_value: dict[str, dict[str, list[Location]]] = {}
    for occ in seed_occurrences:
        by_attr_value.setdefault(occ.attribute, {}).setdefault(occ.value, []).append(
            occ.location
        )
    for attr in sorted(by_attr_value):
        rows = []
        for value in sorted(by_attr_value[attr]):
            vecs = [embed(loc) for loc in sorted(by_attr_value[attr][value])]
            rows.append(canonical_value_embedding(vecs))
        supports[attr] = np.stack(rows)

    if config.expansion and supports:
        assignments, leftovers = adaptive_expand(points, supports, config.delta)
    else:
        assignments, leftovers = {}, list(points)

    clusters: list[AttributeCluster] = []
    for name in sorted(assignments):
        members = assignments[name]
        if members:
            clusters.append(
                AttributeCluster(label=name, origin=ORIGIN_SEED, members=tuple(members))
            )

    if leftovers:
        labels = dbscan(np.stack([p.vector for p in leftovers]), config.eps, config.min_samples)
        for k in range(labels.max() + 1 if labels.size else 0):
            members = tuple(p for p, lab in zip(leftovers, labels) if lab == k)
            clusters.append(
                AttributeCluster(label=f"new-{k}", origin=ORIGIN_DISCOVERED, members=members)
            )
    return clusters


def save_clusters(path: str | Path, clusters: Sequence[AttributeCluster]) -> None:
    """Writes clusters as JSONL; embeddings are not persisted."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for cluster in clusters:
            row = {
                "label": cluster.label,
                "origin": cluster.origin,
                "members": [
                    {
                        "surface": m.surface,
                        "occurrences": [
                            {"id": loc[0], "kind": loc[1], "index": loc[2], "start": loc[3], "end": loc[4]}
                            for loc in m.occurrences
                        ],
                    }
                    for m in cluster.members
                ],
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_clusters(path: str | Path) -> list[AttributeCluster]:
    """Reads a cluster file written by ``save_clusters``.

    Loaded value points carry a zero-dimensional placeholder vector;
    only labels, surfaces and occurrences are round-tripped.
    """
    clusters = []
    empty = np.zeros(0)
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                members = tuple(
                    ValuePoint(
                        surface=str(m["surface"]),
                        vector=empty,
                        occurrences=tuple(
                            (
                                str(o["id"]),
                                str(o["kind"]),
                                int(o["index"]),
                                int(o["start"]),
                                int(o["end"]),
                            )
                            for o in m["occurrences"]
                        ),
                    )
                    for m in obj["members"]
                )
                clusters.append(
                    AttributeCluster(label=str(obj["label"]), origin=str(obj["origin"]), members=members)
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{Path(path).name} line {lineno}: {exc}") from exc
    return clusters
