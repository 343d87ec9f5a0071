"""The selected transfer policy: source nodes plus one edge per target."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .domain import FORMAT_VERSION, TransferEdge
from .errors import SchemaError

_BUDGET_TOL = 1e-9


def canonical_json(data) -> str:
    """Stable compact JSON used for every taxonomy-bearing payload."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class TaskRole:
    name: str
    source: bool
    target: bool


@dataclass(frozen=True)
class Taxonomy:
    """Optimal (or sampled) subgraph: who gets trained, who transfers from whom."""

    sources: tuple[str, ...]
    policy: tuple[tuple[str, TransferEdge, float], ...]  # (target, edge, p)
    objective: float
    gamma: float
    cost_mode: str = "nodes"
    max_order: int | None = None
    importance: Mapping[str, float] = field(default_factory=dict)
    label_cost: Mapping[str, float] = field(default_factory=dict)
    tasks: tuple[TaskRole, ...] = ()
    nodes_explored: int = 0
    origin: str = "solver"

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(sorted(self.sources)))
        object.__setattr__(
            self, "policy", tuple(sorted(self.policy, key=lambda row: row[0]))
        )
        seen = set()
        source_set = set(self.sources)
        for target, edge, p in self.policy:
            if target in seen:
                raise SchemaError(f"target {target!r} has more than one policy edge")
            seen.add(target)
            if edge.target != target:
                raise SchemaError(f"policy edge {edge} filed under target {target!r}")
            if not set(edge.sources) <= source_set:
                raise SchemaError(
                    f"policy edge {edge} uses sources outside the selected set"
                )
            if not math.isfinite(p):
                raise SchemaError(f"non-finite affinity for edge {edge}")
        if self.cost_mode == "nodes":
            spent = sum(self.label_cost.get(s, 1.0) for s in self.sources)
        else:
            spent = sum(
                sum(self.label_cost.get(s, 1.0) for s in edge.sources)
                for _, edge, _ in self.policy
            )
        if spent > self.gamma + _BUDGET_TOL:
            raise SchemaError(
                f"selected sources cost {spent}, exceeding the budget {self.gamma}"
            )

    def chosen_edge(self, target: str) -> TransferEdge:
        for t, edge, _ in self.policy:
            if t == target:
                return edge
        raise SchemaError(f"no policy entry for target {target!r}")

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "objective": self.objective,
            "sources": list(self.sources),
            "policy": {
                target: {"sources": list(edge.sources), "p": p, "order": edge.order}
                for target, edge, p in self.policy
            },
            "config": {
                "budget": self.gamma,
                "max_order": self.max_order,
                "cost_mode": self.cost_mode,
                "importance": dict(sorted(self.importance.items())),
                "label_cost": dict(sorted(self.label_cost.items())),
            },
            "tasks": [
                {"name": r.name, "source": r.source, "target": r.target}
                for r in self.tasks
            ],
            "stats": {"nodes_explored": self.nodes_explored, "origin": self.origin},
        }

    def to_json(self) -> str:
        return canonical_json(self.to_json_dict())

    def to_dot(self) -> str:
        """Graphviz rendering: fan-in edges per hyperedge, source-only dimmed."""
        roles = {r.name: r for r in self.tasks}
        selected = set(self.sources)
        lines = [
            "digraph transfer_policy {",
            f'  label="objective = {self.objective:.6f}  budget = {self.gamma:g}";',
            "  labelloc=t;",
            "  rankdir=LR;",
            '  node [shape=ellipse, style=filled, fillcolor=white];',
        ]
        names = sorted(roles) if roles else sorted(
            selected | {t for t, _, _ in self.policy}
        )
        for name in names:
            attrs = []
            role = roles.get(name)
            if role is not None and role.source and not role.target:
                attrs.append('color=gray70 fontcolor=gray50 fillcolor=gray95')
            if name in selected:
                attrs.append("penwidth=2")
            attr_text = f" [{' '.join(attrs)}]" if attrs else ""
            lines.append(f'  "{name}"{attr_text};')
        for target, edge, p in self.policy:
            for source in edge.sources:
                lines.append(
                    f'  "{source}" -> "{target}" [label="{p:.3f}" order={edge.order}];'
                )
        lines.append("}")
        return "\n".join(lines) + "\n"


def load_taxonomy(path: str | Path) -> Taxonomy:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    version = data.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise SchemaError(f"{path}: unsupported format_version {version}")
    try:
        policy = tuple(
            (
                target,
                TransferEdge(sources=tuple(entry["sources"]), target=target),
                float(entry["p"]),
            )
            for target, entry in data["policy"].items()
        )
        cfg = data["config"]
        return Taxonomy(
            sources=tuple(data["sources"]),
            policy=policy,
            objective=float(data["objective"]),
            gamma=float(cfg["budget"]),
            cost_mode=cfg.get("cost_mode", "nodes"),
            max_order=cfg.get("max_order"),
            importance=dict(cfg.get("importance", {})),
            label_cost=dict(cfg.get("label_cost", {})),
            tasks=tuple(
                TaskRole(t["name"], bool(t["source"]), bool(t["target"]))
                for t in data.get("tasks", [])
            ),
            nodes_explored=int(data.get("stats", {}).get("nodes_explored", 0)),
            origin=data.get("stats", {}).get("origin", "solver"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed taxonomy: {exc}") from exc


def save_taxonomy(taxonomy: Taxonomy, path: str | Path) -> None:
    Path(path).write_text(taxonomy.to_json() + "\n")
