"""Shared builders for dictionaries, stores, and random solver instances."""

from __future__ import annotations

import numpy as np
import pytest

from transferopt.ahp import AffinityMatrix
from transferopt.bip import SolverConfig, build_instance
from transferopt.domain import (
    EvaluationRecord,
    RecordStore,
    TaskDictionary,
    TransferEdge,
    validate_dictionary,
)


def make_dictionary(n: int, source_only: int = 0, target_only: int = 0) -> TaskDictionary:
    """n tasks named task00..; the first source_only / last target_only get one role."""
    entries = []
    for i in range(n):
        name = f"task{i:02d}"
        if i < source_only:
            entries.append((name, True, False))
        elif i >= n - target_only:
            entries.append((name, False, True))
        else:
            entries.append((name, True, True))
    return validate_dictionary(entries)


def store_from_scores(
    dictionary: TaskDictionary,
    per_edge_scores: dict[TransferEdge, list[float]],
) -> RecordStore:
    """Build a store where score lists are aligned over shared image ids."""
    records = []
    for edge, scores in per_edge_scores.items():
        for i, score in enumerate(scores):
            records.append(
                EvaluationRecord(edge=edge, image_id=f"img{i:05d}", score=float(score))
            )
    return RecordStore.ingest(records, dictionary)


def affinity_from_values(values: dict[str, dict[TransferEdge, float]]) -> AffinityMatrix:
    """Normalize raw positive values per target into a valid AffinityMatrix."""
    entries = {}
    for target, edge_values in values.items():
        total = sum(edge_values.values())
        pairs = sorted(
            ((e, v / total) for e, v in edge_values.items()),
            key=lambda ep: ep[0].sort_key,
        )
        entries[target] = tuple(pairs)
    return AffinityMatrix(entries=entries)


def random_small_instance(rng: np.random.Generator, max_vars: int = 18):
    """Random dictionary + edges + affinities, sized for the brute-force oracle."""
    n_tasks = int(rng.integers(3, 6))
    names = [f"t{i}" for i in range(n_tasks)]
    dictionary = validate_dictionary([(name, True, True) for name in names])
    edges: set[TransferEdge] = set()
    for t in names:
        others = [s for s in names if s != t]
        s = others[int(rng.integers(len(others)))]
        edges.add(TransferEdge((s,), t))
    target_count = int(rng.integers(n_tasks, max_vars - n_tasks + 1))
    attempts = 0
    while len(edges) < target_count and attempts < 200:
        attempts += 1
        t = names[int(rng.integers(n_tasks))]
        pool = [s for s in names if s != t]
        k = int(rng.integers(1, min(3, len(pool)) + 1))
        srcs = tuple(sorted(rng.choice(pool, size=k, replace=False)))
        edges.add(TransferEdge(srcs, t))
    edge_list = sorted(edges, key=lambda e: e.sort_key)
    values: dict[str, dict[TransferEdge, float]] = {}
    for t in names:
        incoming = [e for e in edge_list if e.target == t]
        raw = rng.random(len(incoming)) + 0.01
        values[t] = dict(zip(incoming, raw))
    affinity = affinity_from_values(values)
    gamma = float(rng.integers(1, n_tasks + 1))
    cfg = SolverConfig(gamma=gamma)
    inst = build_instance(affinity, dictionary, edge_list, cfg)
    assert inst.n_vars <= 24
    return inst, affinity, dictionary, edge_list, cfg


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
