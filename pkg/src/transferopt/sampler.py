"""Candidate transfer-edge enumeration with beam-limited higher orders.

All first-order source-target combinations are always candidates (plus the
self-edge for every task that is both source and target). Because the
number of order-k subsets explodes combinatorially, higher orders are
restricted per target: orders 2..4 take every k-subset of the target's
``beam_width`` best first-order sources, and orders >= 5 fall back to a
width-``high_order_beam`` beam over the ranked source list (width 1 keeps
exactly the top-k prefix).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ahp import AffinityMatrix
from .domain import TaskDictionary, TransferEdge, parse_edge
from .errors import SchemaError, UnknownTaskError

logger = logging.getLogger(__name__)

_COMBINATION_ORDER_CAP = 4


@dataclass(frozen=True)
class SamplerConfig:
    max_order: int = 1
    beam_width: int = 5
    high_order_beam: int = 1

    def __post_init__(self):
        if self.max_order < 1:
            raise SchemaError(f"max_order must be >= 1, got {self.max_order}")
        if self.beam_width < 1:
            raise SchemaError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.high_order_beam < 1:
            raise SchemaError(f"high_order_beam must be >= 1, got {self.high_order_beam}")


def first_order_edges(dictionary: TaskDictionary) -> list[TransferEdge]:
    """Every (source, target) pair plus self-edges for dual-role tasks."""
    edges = []
    for target in dictionary.targets:
        for source in dictionary.sources:
            if source == target:
                continue
            edges.append(TransferEdge(sources=(source,), target=target))
        if dictionary.is_source(target):
            edges.append(TransferEdge(sources=(target,), target=target))
    edges.sort(key=lambda e: e.sort_key)
    return edges


def rank_sources(affinity: AffinityMatrix, target: str) -> list[str]:
    """Sources by descending first-order affinity; self-edge excluded.

    Ties break lexicographically so the ranking is deterministic.
    """
    pairs = affinity.entries.get(target)
    if pairs is None:
        raise UnknownTaskError(f"no first-order affinities for target {target!r}")
    ranked = [
        (edge.sources[0], p)
        for edge, p in pairs
        if edge.order == 1 and not edge.is_self
    ]
    if not ranked:
        raise SchemaError(f"target {target!r} has no first-order cross transfers")
    ranked.sort(key=lambda sp: (-sp[1], sp[0]))
    return [s for s, _ in ranked]


def _beam_subsets(ranked: Sequence[str], k: int, width: int) -> list[tuple[str, ...]]:
    """Width-limited beam over the ranked list; score = sum of rank positions."""
    beams: list[tuple[tuple[int, ...], int]] = [((), 0)]
    for _ in range(k):
        grown: list[tuple[tuple[int, ...], int]] = []
        for positions, score in beams:
            start = positions[-1] + 1 if positions else 0
            for nxt in range(start, len(ranked)):
                grown.append((positions + (nxt,), score + nxt))
        grown.sort(key=lambda ps: (ps[1], ps[0]))
        beams = grown[:width]
    return [tuple(ranked[i] for i in positions) for positions, _ in beams]


def higher_order_edges(
    ranked_sources: Mapping[str, Sequence[str]], cfg: SamplerConfig
) -> list[TransferEdge]:
    """Order 2..max_order candidates from per-target source rankings."""
    edges: set[TransferEdge] = set()
    for target in sorted(ranked_sources):
        ranked = list(ranked_sources[target])
        for k in range(2, cfg.max_order + 1):
            if k > len(ranked):
                logger.warning(
                    "target %s: only %d ranked sources, skipping order %d",
                    target, len(ranked), k,
                )
                continue
            if k <= _COMBINATION_ORDER_CAP:
                pool = ranked[: cfg.beam_width]
                if k > len(pool):
                    logger.warning(
                        "target %s: beam of %d sources cannot form order %d",
                        target, len(pool), k,
                    )
                    continue
                subsets = combinations(pool, k)
            else:
                subsets = _beam_subsets(ranked, k, cfg.high_order_beam)
            for subset in subsets:
                edges.add(TransferEdge(sources=tuple(subset), target=target))
    return sorted(edges, key=lambda e: e.sort_key)


def save_edge_list(edges: Iterable[TransferEdge], path: str | Path) -> None:
    """One ``src1+src2->target`` line per edge, in canonical order."""
    ordered = sorted(edges, key=lambda e: e.sort_key)
    Path(path).write_text("".join(f"{e}\n" for e in ordered))


def load_edge_list(path: str | Path) -> list[TransferEdge]:
    edges = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line:
            edges.append(parse_edge(line))
    return edges


def candidate_edges(
    dictionary: TaskDictionary,
    first_order_affinity: AffinityMatrix | None,
    cfg: SamplerConfig,
) -> list[TransferEdge]:
    """All candidates up to ``cfg.max_order`` for the given dictionary."""
    edges = first_order_edges(dictionary)
    if cfg.max_order >= 2:
        if first_order_affinity is None:
            raise SchemaError("higher-order sampling needs first-order affinities")
        ranked = {}
        for t in dictionary.targets:
            pairs = first_order_affinity.entries.get(t, ())
            if any(e.order == 1 and not e.is_self for e, _ in pairs):
                ranked[t] = rank_sources(first_order_affinity, t)
        edges.extend(higher_order_edges(ranked, cfg))
    return sorted(set(edges), key=lambda e: e.sort_key)
