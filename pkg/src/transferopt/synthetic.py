"""Synthetic evaluation data with a known ground truth.

Each task gets a latent unit vector; the noise-free quality of a transfer
``(S -> t)`` is the negated distance between the coordinate-wise mean of
the source vectors and the target vector, so composite sources can
genuinely complement each other. Per-image Gaussian noise turns these into
record streams, and a truth file freezes the noise-free scores so tests
can derive expected tournaments and rankings independently.

``dominant_source=True`` plants a recoverable structure: one source-only
task sits close to every (target-only) target while decoy sources sit far
away, so the planted task should win every tournament and any sensible
budget-1 policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .domain import (
    FORMAT_VERSION,
    EvaluationRecord,
    RecordStore,
    TaskDictionary,
    TransferEdge,
    save_dictionary,
    save_records,
    validate_dictionary,
)
from .errors import SchemaError

_TARGET_SPREAD = 0.15
_MIN_DECOY_GAP = 0.8


@dataclass(frozen=True)
class SyntheticSpec:
    n_tasks: int
    n_images: int
    latent_dim: int = 8
    noise_sigma: float = 0.0
    seed: int = 0
    max_order: int = 2
    dominant_source: bool = False

    def __post_init__(self):
        if self.n_tasks < 2:
            raise SchemaError(f"n_tasks must be >= 2, got {self.n_tasks}")
        if self.n_images < 1:
            raise SchemaError(f"n_images must be >= 1, got {self.n_images}")
        if self.latent_dim < 1:
            raise SchemaError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.noise_sigma < 0:
            raise SchemaError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.max_order < 1:
            raise SchemaError(f"max_order must be >= 1, got {self.max_order}")
        if self.dominant_source and self.n_tasks < 3:
            raise SchemaError("dominant_source layout needs at least 3 tasks")


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _task_names(n: int) -> list[str]:
    return [f"task{i:02d}" for i in range(n)]


def _latents(spec: SyntheticSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    names = _task_names(spec.n_tasks)
    latents: dict[str, np.ndarray] = {}
    if not spec.dominant_source:
        for name in names:
            latents[name] = _unit(rng.standard_normal(spec.latent_dim))
        return latents
    planted = _unit(rng.standard_normal(spec.latent_dim))
    latents[names[0]] = planted
    n_decoys = max(1, (spec.n_tasks - 1) // 3)
    n_targets = spec.n_tasks - 1 - n_decoys
    target_names = names[1 : 1 + n_targets]
    for name in target_names:
        latents[name] = _unit(planted + _TARGET_SPREAD * rng.standard_normal(spec.latent_dim))
    for name in names[1 + n_targets :]:
        for _ in range(1000):
            candidate = _unit(rng.standard_normal(spec.latent_dim))
            gaps = [np.linalg.norm(candidate - latents[t]) for t in target_names]
            if min(gaps) >= _MIN_DECOY_GAP:
                latents[name] = candidate
                break
        else:
            raise SchemaError(
                "could not place a decoy source away from the planted cluster; "
                "increase latent_dim"
            )
    return latents


def _dictionary(spec: SyntheticSpec) -> TaskDictionary:
    names = _task_names(spec.n_tasks)
    if not spec.dominant_source:
        return validate_dictionary([(n, True, True) for n in names])
    n_decoys = max(1, (spec.n_tasks - 1) // 3)
    n_targets = spec.n_tasks - 1 - n_decoys
    entries = [(names[0], True, False)]
    entries += [(n, False, True) for n in names[1 : 1 + n_targets]]
    entries += [(n, True, False) for n in names[1 + n_targets :]]
    return validate_dictionary(entries)


def _candidate_edges(spec: SyntheticSpec, dictionary: TaskDictionary) -> list[TransferEdge]:
    """All first-order edges plus every order-k source combination, k <= max_order."""
    edges: list[TransferEdge] = []
    for target in dictionary.targets:
        cross = [s for s in dictionary.sources if s != target]
        for s in cross:
            edges.append(TransferEdge(sources=(s,), target=target))
        if dictionary.is_source(target):
            edges.append(TransferEdge(sources=(target,), target=target))
        for k in range(2, spec.max_order + 1):
            for subset in combinations(sorted(cross), k):
                edges.append(TransferEdge(sources=subset, target=target))
    return sorted(edges, key=lambda e: e.sort_key)


def expected_score(latents: dict[str, np.ndarray], edge: TransferEdge) -> float:
    combined = np.mean([latents[s] for s in edge.sources], axis=0)
    return -float(np.linalg.norm(combined - latents[edge.target]))


def generate(
    spec: SyntheticSpec,
) -> tuple[TaskDictionary, list[EvaluationRecord], dict]:
    """In-memory dataset: dictionary, record stream, and truth metadata."""
    rng = np.random.default_rng(spec.seed)
    dictionary = _dictionary(spec)
    latents = _latents(spec, rng)
    edges = _candidate_edges(spec, dictionary)
    image_ids = [f"img{i:05d}" for i in range(spec.n_images)]
    records: list[EvaluationRecord] = []
    truth_scores: dict[str, dict[str, float]] = {}
    for edge in edges:
        clean = expected_score(latents, edge)
        truth_scores.setdefault(edge.target, {})[str(edge)] = clean
        if spec.noise_sigma > 0:
            noise = rng.normal(0.0, spec.noise_sigma, size=spec.n_images)
        else:
            noise = np.zeros(spec.n_images)
        for img, eps in zip(image_ids, noise):
            records.append(
                EvaluationRecord(edge=edge, image_id=img, score=clean + float(eps))
            )
    names = _task_names(spec.n_tasks)
    truth = {
        "format_version": FORMAT_VERSION,
        "spec": {
            "n_tasks": spec.n_tasks,
            "n_images": spec.n_images,
            "latent_dim": spec.latent_dim,
            "noise_sigma": spec.noise_sigma,
            "seed": spec.seed,
            "max_order": spec.max_order,
            "dominant_source": spec.dominant_source,
        },
        "latents": {name: [float(v) for v in latents[name]] for name in names},
        "expected_scores": truth_scores,
        "planted_source": names[0] if spec.dominant_source else None,
    }
    return dictionary, records, truth


def gen_synthetic(spec: SyntheticSpec, out_dir: str | Path) -> dict[str, Path]:
    """Write dictionary.json, records.ndjson, and truth.json into a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dictionary, records, truth = generate(spec)
    paths = {
        "dictionary": out / "dictionary.json",
        "records": out / "records.ndjson",
        "truth": out / "truth.json",
    }
    save_dictionary(dictionary, paths["dictionary"])
    store = RecordStore.ingest(records, dictionary)
    save_records(store, paths["records"])
    paths["truth"].write_text(json.dumps(truth, sort_keys=True) + "\n")
    return paths
