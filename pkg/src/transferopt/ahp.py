"""Ordinal normalization of transfer evaluations into affinities.

Raw evaluation scores for different transfers live on incomparable scales,
so they are aggregated ordinally: for every target, each pair of competing
transfers is compared image-by-image, producing a tournament matrix of win
fractions. The clipped win/loss ratio matrix is positive reciprocal, and
the components of its principal eigenvector (a centrality measure) give
each transfer a normalized affinity. Only the ordering of scores matters;
any strictly increasing rescaling of one target's scores leaves the result
unchanged.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import FORMAT_VERSION, RecordStore, TaskDictionary, TransferEdge
from .errors import ConvergenceError, SchemaError, UnknownTaskError

# Laplace-smoothing clip bounds for tournament win fractions.
CLIP_LO = 0.001
CLIP_HI = 0.999

POWER_TOL = 1e-12
POWER_MAX_ITER = 10_000

_IMAGE_CHUNK = 4096


@dataclass(frozen=True)
class TournamentMatrix:
    """Pairwise win fractions among one target's competing transfers.

    ``wins[i, j]`` is the fraction of test images on which competitor ``i``
    scored strictly higher than competitor ``j``; ties count for neither
    side, and the diagonal is fixed at 0.5 by convention.
    """

    target: str
    competitors: tuple[TransferEdge, ...]
    wins: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = len(self.competitors)
        if self.wins.shape != (n, n):
            raise SchemaError(
                f"tournament matrix shape {self.wins.shape} does not match "
                f"{n} competitors"
            )

    @property
    def size(self) -> int:
        return len(self.competitors)


@dataclass(frozen=True)
class RatioMatrix:
    """Positive reciprocal win/loss ratio matrix (clipped tournament)."""

    target: str
    competitors: tuple[TransferEdge, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = self.values
        if np.any(v <= 0):
            raise SchemaError("ratio matrix must be strictly positive")
        if np.max(np.abs(v * v.T - 1.0)) > 1e-9:
            raise SchemaError("ratio matrix is not reciprocal within 1e-9")
        lo, hi = CLIP_LO / CLIP_HI, CLIP_HI / CLIP_LO
        if np.min(v) < lo - 1e-12 or np.max(v) > hi + 1e-12:
            raise SchemaError(
                f"ratio matrix entries outside [{lo:.6g}, {hi:.6g}]"
            )


def build_tournament(
    store: RecordStore,
    target: str,
    competitors: Sequence[TransferEdge] | None = None,
) -> TournamentMatrix:
    """Count per-image pairwise wins among a target's transfers."""
    if competitors is None:
        competitors = store.edges(target)
    competitors = tuple(sorted(competitors, key=lambda e: e.sort_key))
    if not competitors:
        raise SchemaError(f"target {target!r} has no competitors")
    images = store.image_ids(target)
    if not images:
        raise SchemaError(f"target {target!r} has an empty image set")
    n = len(competitors)
    scores = np.empty((n, len(images)))
    for i, edge in enumerate(competitors):
        if edge.target != target:
            raise SchemaError(f"edge {edge} does not target {target!r}")
        if not store.has_edge(edge):
            raise UnknownTaskError(f"competitor {edge} missing from store")
        per_image = store.scores(edge)
        scores[i] = [per_image[img] for img in images]

    wins = np.zeros((n, n))
    for start in range(0, len(images), _IMAGE_CHUNK):
        chunk = scores[:, start : start + _IMAGE_CHUNK]
        wins += np.count_nonzero(chunk[:, None, :] > chunk[None, :, :], axis=2)
    wins /= len(images)
    np.fill_diagonal(wins, 0.5)
    return TournamentMatrix(target=target, competitors=competitors, wins=wins)


def clip_smooth(tournament: TournamentMatrix) -> TournamentMatrix:
    """Clamp off-diagonal win fractions into [CLIP_LO, CLIP_HI]."""
    clipped = np.clip(tournament.wins, CLIP_LO, CLIP_HI)
    np.fill_diagonal(clipped, 0.5)
    return TournamentMatrix(
        target=tournament.target, competitors=tournament.competitors, wins=clipped
    )


def ratio_matrix(tournament: TournamentMatrix) -> RatioMatrix:
    """Element-wise win/loss ratio of a clipped tournament; diagonal 1."""
    w = tournament.wins
    off_diag = ~np.eye(w.shape[0], dtype=bool)
    if np.any((w[off_diag] < CLIP_LO) | (w[off_diag] > CLIP_HI)):
        raise SchemaError("tournament must be clipped before taking ratios")
    values = w / w.T
    np.fill_diagonal(values, 1.0)
    return RatioMatrix(
        target=tournament.target, competitors=tournament.competitors, values=values
    )


def principal_eigenvector(
    matrix: RatioMatrix | np.ndarray,
    *,
    tol: float = POWER_TOL,
    max_iter: int = POWER_MAX_ITER,
) -> np.ndarray:
    """Perron eigenvector of a positive matrix, normalized to sum to 1.

    Power iteration from the uniform vector; the iterate is renormalized to
    unit sum each step, so convergence is measured directly on the output
    scale. Deterministic for a given matrix.
    """
    w = matrix.values if isinstance(matrix, RatioMatrix) else np.asarray(matrix, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise SchemaError(f"expected a square matrix, got shape {w.shape}")
    if np.any(w <= 0):
        raise SchemaError("principal eigenvector requires a strictly positive matrix")
    n = w.shape[0]
    if n == 1:
        return np.array([1.0])
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        y = w @ x
        y /= y.sum()
        residual = float(np.max(np.abs(y - x)))
        if residual <= tol * float(np.max(y)):
            return y
        x = y
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(residual {residual:.3e})",
        residual=residual,
    )


@dataclass(frozen=True)
class AffinityMatrix:
    """Per-target normalized transferabilities over candidate edges.

    ``entries[target]`` holds ``(edge, p)`` pairs in canonical edge order;
    each target's affinities are positive and sum to 1.
    """

    entries: Mapping[str, tuple[tuple[TransferEdge, float], ...]]

    def __post_init__(self):
        for target, pairs in self.entries.items():
            if not pairs:
                raise SchemaError(f"target {target!r} has no affinity entries")
            total = math.fsum(p for _, p in pairs)
            if abs(total - 1.0) > 1e-9:
                raise SchemaError(
                    f"affinities for target {target!r} sum to {total!r}, not 1"
                )
            for edge, p in pairs:
                if edge.target != target:
                    raise SchemaError(f"edge {edge} filed under target {target!r}")
                if not (0.0 < p < 1.0 + 1e-12):
                    raise SchemaError(f"affinity {p!r} for edge {edge} outside (0, 1]")

    def targets(self) -> tuple[str, ...]:
        return tuple(sorted(self.entries))

    def edges(self, target: str | None = None, *, max_order: int | None = None) -> tuple[TransferEdge, ...]:
        if target is not None:
            pairs = self.entries.get(target)
            if pairs is None:
                raise UnknownTaskError(f"no affinities for target {target!r}")
            edges = [e for e, _ in pairs]
        else:
            edges = [e for t in self.targets() for e, _ in self.entries[t]]
        if max_order is not None:
            edges = [e for e in edges if e.order <= max_order]
        return tuple(edges)

    def p(self, edge: TransferEdge) -> float:
        pairs = self.entries.get(edge.target, ())
        for candidate, value in pairs:
            if candidate == edge:
                return value
        raise UnknownTaskError(f"edge {edge} has no affinity")

    def orders(self) -> tuple[int, ...]:
        return tuple(sorted({e.order for t in self.entries for e, _ in self.entries[t]}))

    def first_order_table(self) -> tuple[tuple[str, ...], tuple[str, ...], np.ndarray]:
        """(targets, sources, matrix) over order-1 edges; absent pairs are 0."""
        targets = self.targets()
        sources = tuple(
            sorted({e.sources[0] for t in targets for e, _ in self.entries[t] if e.order == 1})
        )
        index = {s: j for j, s in enumerate(sources)}
        table = np.zeros((len(targets), len(sources)))
        for i, t in enumerate(targets):
            for edge, p in self.entries[t]:
                if edge.order == 1:
                    table[i, index[edge.sources[0]]] = p
        return targets, sources, table

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "targets": {
                t: [{"sources": list(e.sources), "p": p} for e, p in self.entries[t]]
                for t in self.targets()
            },
        }

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["target", "sources", "p"])
            for t in self.targets():
                for edge, p in self.entries[t]:
                    writer.writerow([t, "+".join(edge.sources), repr(p)])


def assemble_affinity(
    per_target: Mapping[str, tuple[Sequence[TransferEdge], np.ndarray]],
) -> AffinityMatrix:
    """Stack per-target eigenvectors into an affinity matrix."""
    entries: dict[str, tuple[tuple[TransferEdge, float], ...]] = {}
    for target, (competitors, vector) in per_target.items():
        if len(competitors) != len(vector):
            raise SchemaError(
                f"target {target!r}: {len(competitors)} competitors but "
                f"{len(vector)} eigenvector components"
            )
        pairs = sorted(zip(competitors, vector), key=lambda ep: ep[0].sort_key)
        entries[target] = tuple((edge, float(p)) for edge, p in pairs)
    return AffinityMatrix(entries=entries)


def normalize_store(
    store: RecordStore,
    dictionary: TaskDictionary,
    *,
    edges: Iterable[TransferEdge] | None = None,
    max_order: int | None = None,
) -> AffinityMatrix:
    """Full normalization pipeline: tournament, clip, ratio, eigenvector.

    Uses every target of the dictionary; a target with no evaluated
    transfers is an error. When ``edges`` is given, only those candidates
    (intersected with the store) compete.
    """
    candidates: dict[str, list[TransferEdge]] = {}
    if edges is not None:
        for edge in edges:
            candidates.setdefault(edge.target, []).append(edge)
    per_target: dict[str, tuple[tuple[TransferEdge, ...], np.ndarray]] = {}
    for target in dictionary.targets:
        if target not in store.targets():
            raise SchemaError(f"no evaluation records for target {target!r}")
        competitors = candidates.get(target) if edges is not None else store.edges(target)
        if edges is not None:
            competitors = [e for e in (competitors or []) if store.has_edge(e)]
        if max_order is not None:
            competitors = [e for e in competitors if e.order <= max_order]
        if not competitors:
            raise SchemaError(f"target {target!r} has no evaluated candidate edges")
        tournament = clip_smooth(build_tournament(store, target, competitors))
        vector = principal_eigenvector(ratio_matrix(tournament))
        per_target[target] = (tournament.competitors, vector)
    return assemble_affinity(per_target)


def load_affinity(path: str | Path) -> AffinityMatrix:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict) or "targets" not in data:
        raise SchemaError(f"{path}: expected an object with a 'targets' map")
    version = data.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise SchemaError(f"{path}: unsupported format_version {version}")
    entries: dict[str, tuple[tuple[TransferEdge, float], ...]] = {}
    for target, items in data["targets"].items():
        pairs = []
        for item in items:
            edge = TransferEdge(sources=tuple(item["sources"]), target=target)
            pairs.append((edge, float(item["p"])))
        entries[target] = tuple(sorted(pairs, key=lambda ep: ep[0].sort_key))
    return AffinityMatrix(entries=entries)


def save_affinity(affinity: AffinityMatrix, path: str | Path) -> None:
    Path(path).write_text(json.dumps(affinity.to_json_dict(), sort_keys=True) + "\n")


@dataclass(frozen=True)
class DistanceConfig:
    """Affinity-to-distance transform ``dist = exp(-beta * p)``."""

    beta: float = 20.0

    def __post_init__(self):
        if not self.beta > 0:
            raise SchemaError(f"beta must be positive, got {self.beta}")


def to_distance(
    affinity: AffinityMatrix, cfg: DistanceConfig = DistanceConfig()
) -> tuple[tuple[str, ...], tuple[str, ...], np.ndarray]:
    """First-order affinity table mapped through ``exp(-beta * p)``."""
    targets, sources, table = affinity.first_order_table()
    return targets, sources, np.exp(-cfg.beta * table)


def save_distance_csv(
    affinity: AffinityMatrix, path: str | Path, cfg: DistanceConfig = DistanceConfig()
) -> None:
    targets, sources, dist = to_distance(affinity, cfg)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["target"] + list(sources))
        for i, t in enumerate(targets):
            writer.writerow([t] + [repr(v) for v in dist[i]])
