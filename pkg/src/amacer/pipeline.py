"""File-to-file pipeline stages and run manifests.

Every stage reads and writes artifacts on disk, so partial reruns and
cross-language interop only depend on the documented file formats. All
primary outputs are byte-deterministic for a fixed config and seed; the
manifest written beside them is the only artifact containing wall-clock
timestamps.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from platform import python_version
from typing import Sequence

import numpy as np

from . import __version__
from .corpus import (
    CorpusError,
    Product,
    SeedAttribute,
    load_corpus,
    load_gold,
    load_raw_profiles,
    load_seed_set,
    match_seed_occurrences,
    read_seed_category,
    sanitize_seed_set,
    save_seed_set,
)
from .embed import init_trainable_store, load_store
from .evaluation import MODE_EXACT, MODE_PARTIAL, evaluate
from .grouping import GroupingConfig, group_candidates, load_clusters, save_clusters
from .posgen import (
    generate_corpus_candidates,
    induce_patterns,
    load_candidates,
    load_patterns,
    save_candidates,
    save_patterns,
)
from .stopwords import STOPWORDS, load_stopwords
from .train import (
    TrainConfig,
    inspect_latents,
    load_checkpoint,
    save_checkpoint,
    store_from_checkpoint,
    train,
)

logger = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_CONFIG",
    "RunManifest",
    "file_digest",
    "load_config",
    "stage_candidates",
    "stage_eval",
    "stage_group",
    "stage_latents",
    "stage_patterns",
    "stage_run",
    "stage_sanitize",
    "stage_train",
]

# Paper-scale defaults; desk-scale runs override via --config.
DEFAULT_CONFIG: dict = {
    "seed": 0,
    "embed": {"dim": 64, "trainable": True},
    "posgen": {"min_support": 2, "max_span_len": 8, "include_punct": False},
    "train": TrainConfig().to_dict(),
    "grouping": GroupingConfig().to_dict(),
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None, seed_override: int | None = None) -> dict:
    """Merges a JSON config file over the defaults.

    Unknown section names are rejected. ``seed_override`` (the --seed
    flag) wins over both; it also replaces the train-section seed so one
    flag controls the whole run.
    """
    config = dict(DEFAULT_CONFIG)
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{Path(path).name}: invalid JSON ({exc.msg})") from exc
        if not isinstance(loaded, dict):
            raise CorpusError(f"{Path(path).name}: config must be a JSON object")
        unknown = set(loaded) - set(DEFAULT_CONFIG)
        if unknown:
            raise CorpusError(f"{Path(path).name}: unknown config sections {sorted(unknown)}")
        config = _merge(config, loaded)
    if seed_override is not None:
        config["seed"] = seed_override
        config["train"] = {**config["train"], "seed": seed_override}
    # validate eagerly so bad values fail before any work happens
    TrainConfig.from_dict(config["train"])
    GroupingConfig.from_dict(config["grouping"])
    if not isinstance(config["embed"].get("dim"), int) or config["embed"]["dim"] < 1:
        raise CorpusError("config: embed.dim must be a positive integer")
    return config


def file_digest(path: str | Path) -> str:
    """SHA-256 hex digest of a file's bytes."""
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Reproducibility record written beside each stage's outputs."""

    command: str
    config: dict
    rng_seed: int
    inputs: dict[str, dict] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    versions: dict[str, str] = field(default_factory=dict)
    started_at: str = ""
    finished_at: str = ""

    @classmethod
    def begin(cls, command: str, config: dict) -> "RunManifest":
        return cls(
            command=command,
            config=config,
            rng_seed=int(config.get("seed", 0)),
            versions={
                "amacer": __version__,
                "numpy": np.__version__,
                "python": python_version(),
            },
            started_at=datetime.now(timezone.utc).isoformat(),
        )

    def add_input(self, name: str, path: str | Path) -> None:
        self.inputs[name] = {"path": str(path), "sha256": file_digest(path)}

    def add_output(self, name: str, path: str | Path) -> None:
        self.outputs[name] = str(path)

    def write(self, out_dir: str | Path) -> Path:
        self.finished_at = datetime.now(timezone.utc).isoformat()
        path = Path(out_dir) / f"{self.command}.manifest.json"
        payload = {
            "command": self.command,
            "config": self.config,
            "rng_seed": self.rng_seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "versions": self.versions,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _out_dir(out: str | Path) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_products_and_seeds(
    products_path: str | Path, seeds_path: str | Path
) -> tuple[list[Product], list[SeedAttribute]]:
    return load_corpus(products_path), load_seed_set(seeds_path)


def _resolve_store(store_path, config, products, checkpoint=None):
    """Store precedence: explicit binary file, then checkpoint table, then fresh."""
    if store_path is not None:
        return load_store(store_path)
    if checkpoint is not None and checkpoint.token_table is not None:
        return store_from_checkpoint(checkpoint, products)
    if not config["embed"].get("trainable", True):
        raise CorpusError("config: embed.trainable is false but no --store was given")
    return init_trainable_store(products, dim=config["embed"]["dim"], seed=config["seed"])


def stage_sanitize(profiles_path, category: str | None, out: str | Path, config: dict) -> Path:
    """Raw profile rows -> sanitized seeds.json."""
    out = _out_dir(out)
    manifest = RunManifest.begin("sanitize-seeds", config)
    manifest.add_input("profiles", profiles_path)
    entries = load_raw_profiles(profiles_path)
    if category is not None:
        entries = [e for e in entries if e.category == category]
    elif entries:
        categories = sorted({e.category for e in entries})
        if len(categories) > 1:
            raise CorpusError(
                f"profiles mix categories {categories}; pass --category to choose one"
            )
        category = categories[0]
    seeds = sanitize_seed_set(entries)
    seeds_path = out / "seeds.json"
    save_seed_set(seeds_path, category or "", seeds)
    manifest.add_output("seeds", seeds_path)
    manifest.write(out)
    logger.info("sanitized %d attribute types -> %s", len(seeds), seeds_path)
    return seeds_path


def stage_patterns(products_path, seeds_path, out: str | Path, config: dict) -> Path:
    """Products + seeds -> patterns.jsonl."""
    out = _out_dir(out)
    manifest = RunManifest.begin("induce-patterns", config)
    manifest.add_input("products", products_path)
    manifest.add_input("seeds", seeds_path)
    products, seeds = _load_products_and_seeds(products_path, seeds_path)
    occurrences = match_seed_occurrences(products, seeds)
    patterns = induce_patterns(
        occurrences,
        products,
        min_support=config["posgen"]["min_support"],
        include_punct=config["posgen"]["include_punct"],
    )
    patterns_path = out / "patterns.jsonl"
    save_patterns(patterns_path, patterns)
    manifest.add_output("patterns", patterns_path)
    manifest.write(out)
    logger.info("%d occurrences -> %d patterns", len(occurrences), len(patterns))
    return patterns_path


def stage_candidates(
    products_path, patterns_path, stopwords_path, out: str | Path, config: dict
) -> Path:
    """Products + patterns -> candidates.jsonl."""
    out = _out_dir(out)
    manifest = RunManifest.begin("candidates", config)
    manifest.add_input("products", products_path)
    manifest.add_input("patterns", patterns_path)
    stopwords = STOPWORDS
    if stopwords_path is not None:
        manifest.add_input("stopwords", stopwords_path)
        stopwords = load_stopwords(stopwords_path)
    products = load_corpus(products_path)
    patterns = load_patterns(patterns_path)
    candidates = generate_corpus_candidates(
        products, patterns, stopwords, max_span_len=config["posgen"]["max_span_len"]
    )
    candidates_path = out / "candidates.jsonl"
    save_candidates(candidates_path, candidates)
    manifest.add_output("candidates", candidates_path)
    manifest.write(out)
    logger.info("%d candidate spans", len(candidates))
    return candidates_path


def stage_train(
    products_path, seeds_path, candidates_path, store_path, out: str | Path, config: dict
) -> Path:
    """Products + seeds + candidates (+ optional store) -> model.bin."""
    out = _out_dir(out)
    manifest = RunManifest.begin("train", config)
    manifest.add_input("products", products_path)
    manifest.add_input("seeds", seeds_path)
    manifest.add_input("candidates", candidates_path)
    if store_path is not None:
        manifest.add_input("store", store_path)
    products, seeds = _load_products_and_seeds(products_path, seeds_path)
    occurrences = match_seed_occurrences(products, seeds)
    candidates = load_candidates(candidates_path)
    store = _resolve_store(store_path, config, products)
    train_config = TrainConfig.from_dict(config["train"])
    result = train(products, occurrences, candidates, store, train_config)
    model_path = out / "model.bin"
    save_checkpoint(model_path, result, train_config)
    manifest.add_output("model", model_path)
    manifest.write(out)
    logger.info(
        "trained %d epochs, loss %.4f -> %.4f",
        train_config.epochs,
        result.loss_history[0],
        result.loss_history[-1],
    )
    return model_path


def stage_group(
    products_path, seeds_path, candidates_path, model_path, store_path, out: str | Path, config: dict
) -> Path:
    """Candidates + trained model -> clusters.jsonl."""
    out = _out_dir(out)
    manifest = RunManifest.begin("group", config)
    manifest.add_input("products", products_path)
    manifest.add_input("seeds", seeds_path)
    manifest.add_input("candidates", candidates_path)
    manifest.add_input("model", model_path)
    if store_path is not None:
        manifest.add_input("store", store_path)
    products, seeds = _load_products_and_seeds(products_path, seeds_path)
    occurrences = match_seed_occurrences(products, seeds)
    candidates = load_candidates(candidates_path)
    checkpoint = load_checkpoint(model_path)
    store = _resolve_store(store_path, config, products, checkpoint)
    clusters = group_candidates(
        candidates,
        occurrences,
        store,
        checkpoint.head,
        GroupingConfig.from_dict(config["grouping"]),
    )
    clusters_path = out / "clusters.jsonl"
    save_clusters(clusters_path, clusters)
    manifest.add_output("clusters", clusters_path)
    manifest.write(out)
    logger.info("%d clusters", len(clusters))
    return clusters_path


def stage_eval(
    clusters_path, gold_path, seeds_path, mode: str, out: str | Path, config: dict
) -> Path:
    """Clusters + gold -> report.json."""
    out = _out_dir(out)
    manifest = RunManifest.begin("eval", config)
    manifest.add_input("clusters", clusters_path)
    manifest.add_input("gold", gold_path)
    manifest.add_input("seeds", seeds_path)
    seeds = load_seed_set(seeds_path)
    gold = load_gold(gold_path, seed_types=[a.type_name for a in seeds])
    clusters = load_clusters(clusters_path)
    if mode == "both":
        modes = (MODE_EXACT, MODE_PARTIAL)
    elif mode in (MODE_EXACT, MODE_PARTIAL):
        modes = (mode,)
    else:
        raise CorpusError(f"unknown eval mode {mode!r} (use exact, partial, or both)")
    report = evaluate(clusters, gold, modes=modes)
    report_path = out / "report.json"
    report.save(report_path)
    manifest.add_output("report", report_path)
    manifest.write(out)
    for name, scores in report.modes.items():
        logger.info("%s pseudo-F1 %.4f", name, scores.pseudo_f1)
    return report_path


def stage_latents(
    model_path, products_path, candidates_path, store_path, top_m: int, out: str | Path, config: dict
) -> Path:
    """Trained model + candidates -> latents.json diagnostic table."""
    from .grouping import build_value_points

    out = _out_dir(out)
    manifest = RunManifest.begin("latents", config)
    manifest.add_input("model", model_path)
    manifest.add_input("products", products_path)
    manifest.add_input("candidates", candidates_path)
    if store_path is not None:
        manifest.add_input("store", store_path)
    products = load_corpus(products_path)
    candidates = load_candidates(candidates_path)
    checkpoint = load_checkpoint(model_path)
    if checkpoint.latent.n_latent != config["train"]["n_latent"]:
        raise CorpusError(
            f"config n_latent {config['train']['n_latent']} != "
            f"checkpoint n_latent {checkpoint.latent.n_latent}"
        )
    store = _resolve_store(store_path, config, products, checkpoint)
    points = build_value_points(
        candidates, lambda loc: _span_vector(loc, store, checkpoint.head)
    )
    surfaces = [p.surface for p in points]
    vectors = np.stack([p.vector for p in points]) if points else np.zeros((0, 0))
    inspection = inspect_latents(checkpoint.latent, surfaces, vectors, top_m=top_m)
    latents_path = out / "latents.json"
    payload = {
        "max_pairwise_cosine": inspection.max_pairwise_cosine,
        "attributes": [
            [{"surface": s, "score": v} for s, v in row] for row in inspection.rows
        ],
    }
    latents_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    manifest.add_output("latents", latents_path)
    manifest.write(out)
    return latents_path


def _span_vector(loc, store, head):
    from .embed import span_embedding

    return span_embedding(loc, store, head).vector


def stage_run(
    products_path,
    seeds_path,
    profiles_path,
    gold_path,
    store_path,
    mode: str,
    out: str | Path,
    config: dict,
) -> dict[str, Path]:
    """Full pipeline: (sanitize) -> patterns -> candidates -> train -> group -> (eval)."""
    out = _out_dir(out)
    manifest = RunManifest.begin("run", config)
    manifest.add_input("products", products_path)

    if seeds_path is None:
        if profiles_path is None:
            raise CorpusError("run needs --seeds or --profiles")
        seeds_path = stage_sanitize(profiles_path, None, out, config)
        manifest.add_input("profiles", profiles_path)
    else:
        manifest.add_input("seeds", seeds_path)
    if gold_path is not None:
        manifest.add_input("gold", gold_path)
    if store_path is not None:
        manifest.add_input("store", store_path)

    artifacts: dict[str, Path] = {"seeds": Path(seeds_path)}
    artifacts["patterns"] = stage_patterns(products_path, seeds_path, out, config)
    artifacts["candidates"] = stage_candidates(
        products_path, artifacts["patterns"], None, out, config
    )
    artifacts["model"] = stage_train(
        products_path, seeds_path, artifacts["candidates"], store_path, out, config
    )
    artifacts["clusters"] = stage_group(
        products_path,
        seeds_path,
        artifacts["candidates"],
        artifacts["model"],
        store_path,
        out,
        config,
    )
    if gold_path is not None:
        artifacts["report"] = stage_eval(
            artifacts["clusters"], gold_path, seeds_path, mode, out, config
        )
    for name, path in artifacts.items():
        manifest.add_output(name, path)
    manifest.write(out)
    return artifacts
