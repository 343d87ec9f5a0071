"""Task dictionaries, transfer edges, and per-image evaluation records.

A task dictionary partitions named tasks into sources (trainable) and
targets (to be solved). A transfer edge maps a set of source tasks to one
target; its order is the number of sources, and the special self-edge
``({t}, t)`` stands for solving ``t`` by full supervision. Evaluation
records hold one scalar quality score per (edge, image); all edges that
compete for one target must be scored on the same image set, otherwise
their pairwise win fractions are meaningless.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import ImageSetError, SchemaError, UnknownTaskError

FORMAT_VERSION = 1

# Characters that would collide with the text/CSV edge syntax "a+b->t".
_FORBIDDEN_IN_NAMES = ("+", "->", ",", "\n", "\r", "\t")


def _check_task_name(name: str) -> str:
    if not isinstance(name, str) or not name:
        raise SchemaError("task name must be a non-empty string")
    if name != name.strip():
        raise SchemaError(f"task name {name!r} has surrounding whitespace")
    for bad in _FORBIDDEN_IN_NAMES:
        if bad in name:
            raise SchemaError(f"task name {name!r} contains forbidden sequence {bad!r}")
    return name


@dataclass(frozen=True)
class TransferEdge:
    """A (source set -> target) transfer; sources are kept sorted."""

    sources: tuple[str, ...]
    target: str

    def __post_init__(self):
        if not self.sources:
            raise SchemaError("edge must have at least one source")
        object.__setattr__(self, "sources", tuple(sorted(self.sources)))
        if len(set(self.sources)) != len(self.sources):
            raise SchemaError(f"edge sources must be distinct: {self.sources}")
        if self.target in self.sources and self.sources != (self.target,):
            raise SchemaError(
                f"target {self.target!r} may appear in sources only as the "
                f"order-1 self-edge, got sources {self.sources}"
            )

    @property
    def order(self) -> int:
        return len(self.sources)

    @property
    def is_self(self) -> bool:
        return self.sources == (self.target,)

    @property
    def sort_key(self) -> tuple:
        return (self.target, self.order, self.sources)

    def __str__(self) -> str:
        return "+".join(self.sources) + "->" + self.target


def parse_edge(text: str) -> TransferEdge:
    """Parse the ``src1+src2->target`` text form."""
    if "->" not in text:
        raise SchemaError(f"malformed edge {text!r}: expected 'sources->target'")
    lhs, _, target = text.rpartition("->")
    sources = tuple(s for s in lhs.split("+") if s)
    if not sources or not target:
        raise SchemaError(f"malformed edge {text!r}")
    return TransferEdge(sources=sources, target=target)


@dataclass(frozen=True)
class TaskDictionary:
    """Validated task set with per-task source/target role flags."""

    tasks: tuple[str, ...]
    source_set: frozenset[str]
    target_set: frozenset[str]

    @property
    def sources(self) -> tuple[str, ...]:
        return tuple(t for t in self.tasks if t in self.source_set)

    @property
    def targets(self) -> tuple[str, ...]:
        return tuple(t for t in self.tasks if t in self.target_set)

    @property
    def source_only(self) -> tuple[str, ...]:
        return tuple(t for t in self.tasks if t in self.source_set and t not in self.target_set)

    @property
    def target_only(self) -> tuple[str, ...]:
        return tuple(t for t in self.tasks if t in self.target_set and t not in self.source_set)

    def is_source(self, name: str) -> bool:
        return name in self.source_set

    def is_target(self, name: str) -> bool:
        return name in self.target_set

    def __contains__(self, name: str) -> bool:
        return name in self.source_set or name in self.target_set

    def validate_edge(self, edge: TransferEdge) -> None:
        """Check that an edge's tasks exist and carry the required roles."""
        for s in edge.sources:
            if s not in self:
                raise UnknownTaskError(f"unknown task {s!r} in edge {edge}")
            if not self.is_source(s):
                raise SchemaError(f"task {s!r} is not source-capable (edge {edge})")
        if edge.target not in self:
            raise UnknownTaskError(f"unknown task {edge.target!r} in edge {edge}")
        if not self.is_target(edge.target):
            raise SchemaError(f"task {edge.target!r} is not a target (edge {edge})")

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "tasks": [
                {"name": t, "source": t in self.source_set, "target": t in self.target_set}
                for t in self.tasks
            ],
        }


def validate_dictionary(raw: Iterable[Mapping | tuple]) -> TaskDictionary:
    """Build a TaskDictionary from ``{"name", "source", "target"}`` entries.

    Entries may also be ``(name, is_source, is_target)`` tuples. Raises on
    duplicate names, tasks with no role, and empty source or target sets.
    """
    tasks: list[str] = []
    sources: set[str] = set()
    targets: set[str] = set()
    seen: set[str] = set()
    for entry in raw:
        if isinstance(entry, Mapping):
            name = entry.get("name")
            is_source = bool(entry.get("source", False))
            is_target = bool(entry.get("target", False))
        else:
            name, is_source, is_target = entry
            is_source, is_target = bool(is_source), bool(is_target)
        name = _check_task_name(name)
        if name in seen:
            raise SchemaError(f"duplicate task name {name!r}")
        seen.add(name)
        if not is_source and not is_target:
            raise SchemaError(f"task {name!r} has neither source nor target role")
        tasks.append(name)
        if is_source:
            sources.add(name)
        if is_target:
            targets.add(name)
    if not tasks:
        raise SchemaError("task list is empty")
    if not targets:
        raise SchemaError("dictionary has zero targets")
    if not sources:
        raise SchemaError("dictionary has zero sources")
    return TaskDictionary(tasks=tuple(tasks), source_set=frozenset(sources), target_set=frozenset(targets))


def dictionary_with_novel_target(base: TaskDictionary, name: str) -> TaskDictionary:
    """Extend a dictionary with a target-only task (all-for-one setting)."""
    name = _check_task_name(name)
    if name in base:
        raise SchemaError(f"task {name!r} already exists in the dictionary")
    entries = [(t, base.is_source(t), base.is_target(t)) for t in base.tasks]
    entries.append((name, False, True))
    return validate_dictionary(entries)


def load_dictionary(path: str | Path) -> TaskDictionary:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict) or "tasks" not in data:
        raise SchemaError(f"{path}: expected an object with a 'tasks' list")
    version = data.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise SchemaError(f"{path}: unsupported format_version {version}")
    return validate_dictionary(data["tasks"])


def save_dictionary(dictionary: TaskDictionary, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dictionary.to_json_dict(), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class EvaluationRecord:
    """Quality score of one transfer edge's output on one test image."""

    edge: TransferEdge
    image_id: str
    score: float

    def __post_init__(self):
        if not isinstance(self.image_id, str) or not self.image_id:
            raise SchemaError(f"record for edge {self.edge} has an empty image id")
        if not math.isfinite(self.score):
            raise SchemaError(
                f"non-finite score for edge {self.edge}, image {self.image_id!r}"
            )


class RecordStore:
    """Evaluation records grouped by target, validated for image-set parity.

    Immutable after construction; all per-target edges are guaranteed to
    share one image set, so tournaments can be computed directly.
    """

    def __init__(self, by_target: dict[str, dict[TransferEdge, dict[str, float]]]):
        self._by_target = by_target
        self._images: dict[str, tuple[str, ...]] = {}
        for target, edges in by_target.items():
            image_sets = {edge: frozenset(scores) for edge, scores in edges.items()}
            reference_edge = next(iter(edges))
            reference = image_sets[reference_edge]
            for edge, imgs in image_sets.items():
                if imgs != reference:
                    diff = sorted(imgs.symmetric_difference(reference))[:5]
                    raise ImageSetError(
                        f"target {target!r}: edge {edge} was scored on a different "
                        f"image set than {reference_edge} (sample difference: {diff})"
                    )
            if not reference:
                raise ImageSetError(f"target {target!r} has an empty image set")
            self._images[target] = tuple(sorted(reference))

    @classmethod
    def ingest(
        cls, records: Iterable[EvaluationRecord], dictionary: TaskDictionary
    ) -> "RecordStore":
        by_target: dict[str, dict[TransferEdge, dict[str, float]]] = {}
        for rec in records:
            dictionary.validate_edge(rec.edge)
            edges = by_target.setdefault(rec.edge.target, {})
            scores = edges.setdefault(rec.edge, {})
            if rec.image_id in scores:
                raise SchemaError(
                    f"duplicate record for edge {rec.edge}, image {rec.image_id!r}"
                )
            scores[rec.image_id] = rec.score
        if not by_target:
            raise SchemaError("record stream is empty")
        return cls(by_target)

    def targets(self) -> tuple[str, ...]:
        return tuple(sorted(self._by_target))

    def edges(self, target: str) -> tuple[TransferEdge, ...]:
        if target not in self._by_target:
            raise UnknownTaskError(f"no records for target {target!r}")
        return tuple(sorted(self._by_target[target], key=lambda e: e.sort_key))

    def image_ids(self, target: str) -> tuple[str, ...]:
        if target not in self._by_target:
            raise UnknownTaskError(f"no records for target {target!r}")
        return self._images[target]

    def scores(self, edge: TransferEdge) -> Mapping[str, float]:
        try:
            return self._by_target[edge.target][edge]
        except KeyError:
            raise UnknownTaskError(f"no records for edge {edge}") from None

    def has_edge(self, edge: TransferEdge) -> bool:
        return edge.target in self._by_target and edge in self._by_target[edge.target]

    def record_count(self, target: str | None = None) -> int:
        if target is not None:
            return sum(len(s) for s in self._by_target.get(target, {}).values())
        return sum(self.record_count(t) for t in self._by_target)

    def records(self) -> Iterator[EvaluationRecord]:
        """Yield records in canonical (target, edge, image) order."""
        for target in self.targets():
            for edge in self.edges(target):
                scores = self._by_target[target][edge]
                for image_id in sorted(scores):
                    yield EvaluationRecord(edge=edge, image_id=image_id, score=scores[image_id])

    def __eq__(self, other) -> bool:
        if not isinstance(other, RecordStore):
            return NotImplemented
        return self._by_target == other._by_target

    def __repr__(self) -> str:
        return (
            f"RecordStore(targets={len(self._by_target)}, records={self.record_count()})"
        )


def _parse_record_line(line: str, locator: str, negate: bool) -> EvaluationRecord:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{locator}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{locator}: expected a JSON object")
    for key in ("sources", "target", "image", "score"):
        if key not in data:
            raise SchemaError(f"{locator}: missing field {key!r}")
    sources = data["sources"]
    if not isinstance(sources, list) or not all(isinstance(s, str) for s in sources):
        raise SchemaError(f"{locator}: 'sources' must be a list of strings")
    score = data["score"]
    if isinstance(score, bool) or not isinstance(score, (int, float)):
        raise SchemaError(f"{locator}: 'score' must be a number")
    score = float(score)
    if not math.isfinite(score):
        raise SchemaError(f"{locator}: 'score' must be finite")
    edge = TransferEdge(sources=tuple(sources), target=data["target"])
    return EvaluationRecord(
        edge=edge, image_id=str(data["image"]), score=-score if negate else score
    )


def load_records(
    path: str | Path,
    dictionary: TaskDictionary,
    *,
    scores_are_losses: bool = False,
) -> RecordStore:
    """Read newline-delimited JSON records and build a validated store.

    With ``scores_are_losses`` every score is negated at ingestion so the
    store is uniformly higher-is-better.
    """
    path = Path(path)

    def _iter() -> Iterator[EvaluationRecord]:
        with path.open() as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                yield _parse_record_line(line, f"{path}:{lineno}", scores_are_losses)

    return RecordStore.ingest(_iter(), dictionary)


def save_records(store: RecordStore, path: str | Path) -> None:
    """Write a store back to NDJSON; round-trips bit-exactly."""
    with Path(path).open("w") as fh:
        for rec in store.records():
            fh.write(
                json.dumps(
                    {
                        "sources": list(rec.edge.sources),
                        "target": rec.edge.target,
                        "image": rec.image_id,
                        "score": rec.score,
                    }
                )
                + "\n"
            )
