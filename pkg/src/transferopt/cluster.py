"""Agglomerative average-linkage clustering of transfer-out columns.

Each source task is described by its column of first-order affinities
toward every target; tasks whose representations help the same targets in
the same proportions end up close. Merging is deterministic: equal-distance
pairs are broken by the lexicographically smallest member leaf names.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ahp import AffinityMatrix
from .domain import FORMAT_VERSION
from .errors import SchemaError


@dataclass(frozen=True)
class ClusterNode:
    """Leaf (name set, no children) or internal merge at a given height."""

    height: float
    name: str | None = None
    children: tuple["ClusterNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.name is not None

    def leaves(self) -> tuple[str, ...]:
        if self.is_leaf:
            return (self.name,)
        return tuple(leaf for child in self.children for leaf in child.leaves())

    def min_leaf(self) -> str:
        return min(self.leaves())


@dataclass(frozen=True)
class Dendrogram:
    root: ClusterNode
    leaves: tuple[str, ...]
    merge_heights: tuple[float, ...]

    def to_newick(self) -> str:
        def render(node: ClusterNode, parent_height: float) -> str:
            branch = parent_height - node.height
            if node.is_leaf:
                return f"{node.name}:{branch:.9g}"
            kids = sorted(node.children, key=lambda c: c.min_leaf())
            inner = ",".join(render(k, node.height) for k in kids)
            return f"({inner}):{branch:.9g}"

        if self.root.is_leaf:
            return f"{self.root.name};"
        kids = sorted(self.root.children, key=lambda c: c.min_leaf())
        inner = ",".join(render(k, self.root.height) for k in kids)
        return f"({inner});"

    def to_json_dict(self) -> dict:
        def as_dict(node: ClusterNode) -> dict:
            if node.is_leaf:
                return {"name": node.name, "height": node.height}
            kids = sorted(node.children, key=lambda c: c.min_leaf())
            return {"height": node.height, "children": [as_dict(k) for k in kids]}

        return {
            "format_version": FORMAT_VERSION,
            "newick": self.to_newick(),
            "root": as_dict(self.root),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), sort_keys=True) + "\n")


def average_linkage(labels: list[str], points: np.ndarray) -> Dendrogram:
    """Bottom-up clustering with average linkage on Euclidean distances."""
    n = len(labels)
    if n < 2:
        raise SchemaError(f"clustering needs at least 2 items, got {n}")
    if points.shape[0] != n:
        raise SchemaError("one feature row per label required")
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))

    clusters: dict[int, ClusterNode] = {
        i: ClusterNode(height=0.0, name=labels[i]) for i in range(n)
    }
    sizes = {i: 1 for i in range(n)}
    pair_dist: dict[tuple[int, int], float] = {
        (i, j): float(dist[i, j]) for i in range(n) for j in range(i + 1, n)
    }
    next_id = n
    heights: list[float] = []

    while len(clusters) > 1:
        best_key = min(
            pair_dist,
            key=lambda ij: (
                pair_dist[ij],
                min(clusters[ij[0]].min_leaf(), clusters[ij[1]].min_leaf()),
                max(clusters[ij[0]].min_leaf(), clusters[ij[1]].min_leaf()),
            ),
        )
        i, j = best_key
        height = pair_dist[best_key]
        merged = ClusterNode(height=height, children=(clusters[i], clusters[j]))
        heights.append(height)
        size_i, size_j = sizes[i], sizes[j]
        del clusters[i], clusters[j], sizes[i], sizes[j]
        # Lance-Williams update for average linkage
        new_dist: dict[int, float] = {}
        for k in clusters:
            d_ik = pair_dist[(min(i, k), max(i, k))]
            d_jk = pair_dist[(min(j, k), max(j, k))]
            new_dist[k] = (size_i * d_ik + size_j * d_jk) / (size_i + size_j)
        pair_dist = {
            (a, b): d for (a, b), d in pair_dist.items() if {a, b}.isdisjoint({i, j})
        }
        for k, d in new_dist.items():
            pair_dist[(min(k, next_id), max(k, next_id))] = d
        clusters[next_id] = merged
        sizes[next_id] = size_i + size_j
        next_id += 1

    root = next(iter(clusters.values()))
    return Dendrogram(
        root=root, leaves=tuple(sorted(labels)), merge_heights=tuple(heights)
    )


def similarity_tree(affinity: AffinityMatrix) -> Dendrogram:
    """Cluster source tasks by their first-order transfer-out columns."""
    _, sources, table = affinity.first_order_table()
    if len(sources) < 2:
        raise SchemaError("similarity tree needs at least 2 source tasks")
    return average_linkage(list(sources), table.T.copy())
