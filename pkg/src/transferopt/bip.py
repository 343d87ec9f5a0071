"""Exact binary integer program for budgeted transfer-policy selection.

Variables are all candidate edges followed by all task nodes. Edge
variables earn ``importance(target) * affinity``; node variables earn
nothing but carry label cost against the supervision budget. Three
constraint families make a 0/1 vector a valid policy:

  I.  selecting an edge forces all of its source nodes,
  II. every target selects exactly one incoming edge (a pair of <= rows),
  III. total label cost of selected nodes (or edges) stays within budget.

``solve`` runs a deterministic best-first branch and bound with unit
propagation; its bound is, per target, the best still-affordable edge
value, which never underestimates any completion. ``brute_force`` is the
independent enumeration oracle for small instances.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ahp import AffinityMatrix
from .domain import FORMAT_VERSION, TaskDictionary, TransferEdge
from .errors import SchemaError
from .taxonomy import TaskRole, Taxonomy

OBJECTIVE_TOL = 1e-9

COST_MODES = ("nodes", "edges")


@dataclass(frozen=True)
class SolverConfig:
    """Budget and optional per-task weights; unspecified tasks default to 1."""

    gamma: float
    importance: Mapping[str, float] = field(default_factory=dict)
    label_cost: Mapping[str, float] = field(default_factory=dict)
    cost_mode: str = "nodes"

    def __post_init__(self):
        if not self.gamma > 0:
            raise SchemaError(f"budget must be positive, got {self.gamma}")
        for name, value in self.importance.items():
            if not value > 0:
                raise SchemaError(f"importance for {name!r} must be positive, got {value}")
        for name, value in self.label_cost.items():
            if not value > 0:
                raise SchemaError(f"label cost for {name!r} must be positive, got {value}")
        if self.cost_mode not in COST_MODES:
            raise SchemaError(f"cost_mode must be one of {COST_MODES}, got {self.cost_mode!r}")

    def r(self, target: str) -> float:
        return float(self.importance.get(target, 1.0))

    def ell(self, task: str) -> float:
        return float(self.label_cost.get(task, 1.0))


@dataclass(frozen=True)
class Row:
    """Sparse constraint row ``sum(coef * x[idx]) <= bound``."""

    coeffs: tuple[tuple[int, float], ...]
    bound: float
    tag: str


@dataclass(frozen=True)
class BIPInstance:
    edges: tuple[TransferEdge, ...]
    tasks: tuple[str, ...]
    task_roles: tuple[TaskRole, ...]
    c: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    rows: tuple[Row, ...]
    gamma: float
    cost_mode: str
    node_costs: np.ndarray = field(repr=False)
    edge_costs: np.ndarray = field(repr=False)
    importance: Mapping[str, float] = field(default_factory=dict)
    label_cost: Mapping[str, float] = field(default_factory=dict)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_nodes(self) -> int:
        return len(self.tasks)

    @property
    def n_vars(self) -> int:
        return len(self.edges) + len(self.tasks)

    def variable_names(self) -> list[str]:
        return [f"edge:{e}" for e in self.edges] + [f"node:{t}" for t in self.tasks]

    def targets(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.task_roles if r.target)

    def dense_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """(A, b) with one dense row per constraint, for audits and oracles."""
        a = np.zeros((len(self.rows), self.n_vars))
        b = np.empty(len(self.rows))
        for i, row in enumerate(self.rows):
            for idx, coef in row.coeffs:
                a[i, idx] = coef
            b[i] = row.bound
        return a, b

    def check_feasible(self, x: np.ndarray, tol: float = OBJECTIVE_TOL) -> bool:
        a, b = self.dense_matrix()
        return bool(np.all(a @ x.astype(float) <= b + tol))

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "variables": [
                {"name": name, "kind": "edge" if i < self.n_edges else "node"}
                for i, name in enumerate(self.variable_names())
            ],
            "c": list(map(float, self.c)),
            "rows": [
                {"coeffs": [[i, v] for i, v in row.coeffs], "b": row.bound, "tag": row.tag}
                for row in self.rows
            ],
            "budget": self.gamma,
            "cost_mode": self.cost_mode,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), sort_keys=True) + "\n")


@dataclass(frozen=True)
class BIPSolution:
    x: np.ndarray | None
    objective: float | None
    status: str  # "optimal" | "infeasible"
    node_count: int = 0


def build_instance(
    affinity: AffinityMatrix,
    dictionary: TaskDictionary,
    edges: Iterable[TransferEdge],
    cfg: SolverConfig,
) -> BIPInstance:
    """Assemble objective and constraint rows from affinities and a budget."""
    edge_list = sorted(set(edges), key=lambda e: e.sort_key)
    targets = dictionary.targets
    if not targets:
        raise SchemaError("empty target set")
    for edge in edge_list:
        dictionary.validate_edge(edge)
    n_edges = len(edge_list)
    tasks = dictionary.tasks
    task_index = {t: i for i, t in enumerate(tasks)}
    n = n_edges + len(tasks)

    c = np.zeros(n)
    p = np.empty(n_edges)
    for i, edge in enumerate(edge_list):
        p[i] = affinity.p(edge)
        c[i] = cfg.r(edge.target) * p[i]

    node_costs = np.array([cfg.ell(t) for t in tasks])
    edge_costs = np.array(
        [sum(cfg.ell(s) for s in e.sources) for e in edge_list]
    ) if n_edges else np.zeros(0)

    rows: list[Row] = []
    for i, edge in enumerate(edge_list):
        coeffs = [(i, float(edge.order))]
        coeffs += [(n_edges + task_index[s], -1.0) for s in edge.sources]
        rows.append(Row(coeffs=tuple(coeffs), bound=0.0, tag="constraint-I"))
    for target in targets:
        incoming = tuple(i for i, e in enumerate(edge_list) if e.target == target)
        rows.append(
            Row(coeffs=tuple((i, 1.0) for i in incoming), bound=1.0, tag="constraint-II-upper")
        )
        rows.append(
            Row(coeffs=tuple((i, -1.0) for i in incoming), bound=-1.0, tag="constraint-II-lower")
        )
    if cfg.cost_mode == "nodes":
        budget_coeffs = tuple(
            (n_edges + k, float(node_costs[k])) for k in range(len(tasks))
        )
    else:
        budget_coeffs = tuple((i, float(edge_costs[i])) for i in range(n_edges))
    rows.append(Row(coeffs=budget_coeffs, bound=float(cfg.gamma), tag="budget"))

    roles = tuple(
        TaskRole(t, dictionary.is_source(t), dictionary.is_target(t)) for t in tasks
    )
    return BIPInstance(
        edges=tuple(edge_list),
        tasks=tasks,
        task_roles=roles,
        c=c,
        p=p,
        rows=tuple(rows),
        gamma=float(cfg.gamma),
        cost_mode=cfg.cost_mode,
        node_costs=node_costs,
        edge_costs=edge_costs,
        importance=dict(cfg.importance),
        label_cost=dict(cfg.label_cost),
    )


class _Search:
    """Best-first branch and bound over a single instance."""

    def __init__(self, inst: BIPInstance, tol: float):
        self.inst = inst
        self.tol = tol
        self.n_edges = inst.n_edges
        self.n = inst.n_vars
        self.c = inst.c
        self.c_edges = inst.c[: inst.n_edges]
        self.nodes_mode = inst.cost_mode == "nodes"
        task_index = {t: i for i, t in enumerate(inst.tasks)}
        self.edge_srcs = [
            np.array([self.n_edges + task_index[s] for s in e.sources])
            for e in inst.edges
        ]
        # edge-source incidence over node indices, for vectorized cost math
        self.src_matrix = np.zeros((inst.n_edges, inst.n_nodes))
        for i, e in enumerate(inst.edges):
            for s in e.sources:
                self.src_matrix[i, task_index[s]] = 1.0
        self.target_order = sorted(inst.targets())
        self.target_edges = {
            t: np.array([i for i, e in enumerate(inst.edges) if e.target == t], dtype=int)
            for t in self.target_order
        }
        self.node_costs = inst.node_costs
        self.edge_costs = inst.edge_costs
        self.gamma = inst.gamma
        self.dense_a, self.dense_b = inst.dense_matrix()
        self.best_x: np.ndarray | None = None
        self.best_obj = -np.inf
        self.node_count = 0

    def spent(self, a: np.ndarray) -> float:
        if self.nodes_mode:
            return float(self.node_costs[a[self.n_edges:] == 1].sum())
        return float(self.edge_costs[a[: self.n_edges] == 1].sum())

    def unpaid_costs(self, a: np.ndarray) -> np.ndarray:
        """Per edge: label cost of its sources not yet selected."""
        if not self.nodes_mode:
            return self.edge_costs
        unpaid = self.node_costs * (a[self.n_edges:] != 1)
        return self.src_matrix @ unpaid

    def propagate(self, a: np.ndarray) -> bool:
        """Unit propagation to fixpoint; False on contradiction."""
        while True:
            changed = False
            spent = self.spent(a)
            if spent > self.gamma + self.tol:
                return False
            remaining = self.gamma - spent
            edges = a[: self.n_edges]
            nodes = a[self.n_edges:]
            if self.nodes_mode:
                over = np.flatnonzero((nodes == -1) & (self.node_costs > remaining + self.tol))
                if over.size:
                    a[self.n_edges + over] = 0
                    changed = True
            else:
                over = np.flatnonzero((edges == -1) & (self.edge_costs > remaining + self.tol))
                if over.size:
                    a[over] = 0
                    changed = True
            dead = (self.src_matrix @ (nodes == 0)) > 0
            if np.any(dead & (edges == 1)):
                return False
            kill = dead & (edges == -1)
            if np.any(kill):
                a[: self.n_edges][kill] = 0
                changed = True
            for target in self.target_order:
                eidx = self.target_edges[target]
                vals = a[eidx]
                ones = eidx[vals == 1]
                if ones.size > 1:
                    return False
                if ones.size == 1:
                    undecided = eidx[vals == -1]
                    if undecided.size:
                        a[undecided] = 0
                        changed = True
                    srcs = self.edge_srcs[ones[0]]
                    if np.any(a[srcs] == 0):
                        return False
                    unfixed = srcs[a[srcs] == -1]
                    if unfixed.size:
                        a[unfixed] = 1
                        changed = True
                else:
                    undecided = eidx[vals == -1]
                    if undecided.size == 0:
                        return False
                    if undecided.size == 1:
                        a[undecided[0]] = 1
                        changed = True
            if not changed:
                return True

    def bound(self, a: np.ndarray) -> float | None:
        """Upper bound: fixed value plus each open target's best affordable edge.

        Any completion keeps total extra cost within the remaining budget, so
        each target's chosen edge is individually affordable; taking the per-
        target maximum over such edges can only overestimate.
        """
        edges = a[: self.n_edges]
        value = float(self.c_edges[edges == 1].sum())
        remaining = self.gamma - self.spent(a)
        affordable = (edges == -1) & (self.unpaid_costs(a) <= remaining + self.tol)
        for target in self.target_order:
            eidx = self.target_edges[target]
            if np.any(edges[eidx] == 1):
                continue
            options = eidx[affordable[eidx]]
            if options.size == 0:
                return None
            value += float(self.c_edges[options].max())
        return value

    def greedy_complete(self, a: np.ndarray) -> tuple[np.ndarray, float] | None:
        """Deterministic greedy completion used to seed the incumbent.

        Exactly optimal whenever every node variable is already fixed: all
        remaining candidates are then zero-incremental-cost and each target
        independently takes its best edge.
        """
        x = a.copy()
        spent = self.spent(x)
        unpaid = self.unpaid_costs(x)
        for target in self.target_order:
            eidx = self.target_edges[target]
            vals = x[eidx]
            if np.any(vals == 1):
                continue
            open_idx = eidx[vals == -1]
            fits = open_idx[spent + unpaid[open_idx] <= self.gamma + self.tol]
            if fits.size == 0:
                return None
            best_i = int(fits[int(np.argmax(self.c_edges[fits]))])
            x[best_i] = 1
            spent += float(unpaid[best_i])
            srcs = self.edge_srcs[best_i]
            newly = srcs[x[srcs] == -1]
            if newly.size:
                x[newly] = 1
                unpaid = self.unpaid_costs(x)
        x[x == -1] = 0
        if not self.feasible(x):
            return None
        return x, self.objective(x)

    def exact_closure(self, a: np.ndarray) -> tuple[np.ndarray, float] | None:
        """Exact subtree optimum when at most one more node fits the budget.

        Evaluates the completion for "no further node" and for each single
        affordable free node; every such completion is solved exactly by the
        greedy (all nodes fixed). Returns the best, ties to the earliest.
        """
        remaining = self.gamma - self.spent(a)
        free = np.flatnonzero(a[self.n_edges:] == -1)
        best: tuple[np.ndarray, float] | None = None
        choices: list[int | None] = [None]
        choices += [int(k) for k in free if self.node_costs[k] <= remaining + self.tol]
        for choice in choices:
            trial = a.copy()
            others = free if choice is None else free[free != choice]
            if choice is not None:
                trial[self.n_edges + choice] = 1
            trial[self.n_edges + others] = 0
            if not self.propagate(trial):
                continue
            completed = (
                (trial, self.objective(trial))
                if np.all(trial != -1) and self.feasible(trial)
                else self.greedy_complete(trial)
            )
            if completed is not None and (best is None or completed[1] > best[1]):
                best = completed
        return best

    def feasible(self, x: np.ndarray) -> bool:
        return bool(np.all(self.dense_a @ x.astype(float) <= self.dense_b + self.tol))

    def objective(self, x: np.ndarray) -> float:
        return float(np.dot(self.c, x.astype(float)))

    def consider(self, x: np.ndarray, obj: float) -> None:
        if obj > self.best_obj + self.tol:
            self.best_obj = obj
            self.best_x = x.copy()

    def handle_leaf(self, a: np.ndarray) -> None:
        if self.feasible(a):
            self.consider(a, self.objective(a))

    def branch_var(self, a: np.ndarray) -> int:
        """Lowest-index unfixed variable, node variables first.

        Once every node is decided the targets decouple (each takes its best
        supported edge independently), so deciding nodes first collapses the
        edge layer; the order within each block is fixed by index.
        """
        free_nodes = np.flatnonzero(a[self.n_edges :] == -1)
        if free_nodes.size:
            return self.n_edges + int(free_nodes[0])
        return int(np.flatnonzero(a == -1)[0])

    def process(self, a: np.ndarray, heap: list, counter: int) -> int:
        """Propagated assignment -> leaf, exact decomposition, or heap entry."""
        if np.all(a != -1):
            self.handle_leaf(a)
            return counter
        if self.nodes_mode:
            free = np.flatnonzero(a[self.n_edges :] == -1)
            if free.size == 0:
                # all nodes fixed: the greedy completion picks each target's
                # best supported edge, which is exactly optimal here
                g = self.greedy_complete(a)
                if g is not None:
                    self.consider(*g)
                return counter
            free_costs = np.sort(self.node_costs[free])
            remaining = self.gamma - self.spent(a)
            if free.size == 1 or free_costs[0] + free_costs[1] > remaining + self.tol:
                # at most one more node fits: enumerate those completions
                g = self.exact_closure(a)
                if g is not None:
                    self.consider(*g)
                return counter
        a_bound = self.bound(a)
        if a_bound is None or a_bound <= self.best_obj + self.tol:
            return counter
        g = self.greedy_complete(a)
        if g is not None:
            self.consider(*g)
        if a_bound > self.best_obj + self.tol:
            heapq.heappush(heap, (-a_bound, counter, a))
            counter += 1
        return counter

    def run(self) -> BIPSolution:
        root = np.full(self.n, -1, dtype=np.int8)
        heap: list[tuple[float, int, np.ndarray]] = []
        counter = 0
        if self.propagate(root):
            counter = self.process(root, heap, counter)
        while heap:
            neg_bound, _, a = heapq.heappop(heap)
            if -neg_bound <= self.best_obj + self.tol:
                break
            self.node_count += 1
            var = self.branch_var(a)
            for value in (1, 0):
                child = a.copy()
                child[var] = value
                if not self.propagate(child):
                    continue
                counter = self.process(child, heap, counter)
        if self.best_x is None:
            return BIPSolution(x=None, objective=None, status="infeasible", node_count=self.node_count)
        return BIPSolution(
            x=self.best_x.astype(np.int8),
            objective=self.best_obj,
            status="optimal",
            node_count=self.node_count,
        )


def solve(inst: BIPInstance, *, tol: float = OBJECTIVE_TOL) -> BIPSolution:
    """Globally optimal solution by best-first branch and bound."""
    return _Search(inst, tol).run()


BRUTE_FORCE_LIMIT = 24


def brute_force(inst: BIPInstance, *, tol: float = OBJECTIVE_TOL) -> BIPSolution:
    """Exhaustive enumeration oracle for instances of at most 24 variables."""
    n = inst.n_vars
    if n > BRUTE_FORCE_LIMIT:
        raise SchemaError(
            f"brute force limited to {BRUTE_FORCE_LIMIT} variables, instance has {n}"
        )
    a, b = inst.dense_matrix()
    best_obj = None
    best_x = None
    chunk = 1 << min(n, 18)
    total = 1 << n
    bits = np.arange(n, dtype=np.uint32)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.uint32)
        x = ((codes[:, None] >> bits) & 1).astype(np.float64)
        feasible = np.all(x @ a.T <= b + tol, axis=1)
        if not feasible.any():
            continue
        objs = x[feasible] @ inst.c
        k = int(np.argmax(objs))
        if best_obj is None or objs[k] > best_obj:
            best_x = x[feasible][k]
            best_obj = float(objs[k])
    if best_x is None:
        return BIPSolution(x=None, objective=None, status="infeasible")
    x_int = best_x.astype(np.int8)
    # same dot-product path as solve() so equal selections give equal floats
    return BIPSolution(
        x=x_int, objective=float(np.dot(inst.c, x_int.astype(float))), status="optimal"
    )


def extract_taxonomy(
    sol: BIPSolution,
    inst: BIPInstance,
    edges: Sequence[TransferEdge] | None = None,
    *,
    max_order: int | None = None,
) -> Taxonomy:
    """Turn an optimal solution vector into a validated policy."""
    if sol.status != "optimal" or sol.x is None:
        raise SchemaError("cannot extract a taxonomy from a non-optimal solution")
    edge_list = tuple(edges) if edges is not None else inst.edges
    if len(edge_list) != inst.n_edges:
        raise SchemaError("edge list does not match the instance")
    x = sol.x
    selected_nodes = tuple(
        inst.tasks[k] for k in range(inst.n_nodes) if x[inst.n_edges + k] == 1
    )
    policy: list[tuple[str, TransferEdge, float]] = []
    per_target: dict[str, int] = {}
    for i, edge in enumerate(edge_list):
        if x[i] == 1:
            per_target[edge.target] = per_target.get(edge.target, 0) + 1
            policy.append((edge.target, edge, float(inst.p[i])))
    targets = set(inst.targets())
    if set(per_target) != targets or any(v != 1 for v in per_target.values()):
        raise RuntimeError(
            "solver returned a structurally invalid selection "
            f"(per-target edge counts: {per_target})"
        )
    node_set = set(selected_nodes)
    for _, edge, _ in policy:
        if not set(edge.sources) <= node_set:
            raise RuntimeError(f"solver selected edge {edge} without its sources")
    # exactly-rounded sum over the sorted policy: the reported objective is a
    # function of the policy alone, not of the candidate-set layout, so equal
    # policies from different instances compare bit-identically
    policy.sort(key=lambda row: row[0])
    importance = dict(inst.importance)
    objective = math.fsum(importance.get(t, 1.0) * p for t, _, p in policy)
    return Taxonomy(
        sources=selected_nodes,
        policy=tuple(policy),
        objective=objective,
        gamma=inst.gamma,
        cost_mode=inst.cost_mode,
        max_order=max_order,
        importance=importance,
        label_cost=dict(inst.label_cost),
        tasks=inst.task_roles,
        nodes_explored=sol.node_count,
    )
