"""Pipeline orchestration and the analyses built on top of the solver.

``solve_policy`` chains the full pipeline (normalize, sample candidates,
build the program, solve, extract). ``taxonomy_family`` reuses a single
normalization across a budget/order grid so the objectives are comparable
cell to cell; with per-cell renormalization the candidate-inclusion
monotonicity arguments would not hold.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import ahp, bip, sampler
from .ahp import AffinityMatrix
from .domain import (
    FORMAT_VERSION,
    RecordStore,
    TaskDictionary,
    TransferEdge,
    dictionary_with_novel_target,
    validate_dictionary,
)
from .errors import ImageSetError, InfeasibleError, SchemaError
from .sampler import SamplerConfig
from .bip import SolverConfig
from .taxonomy import TaskRole, Taxonomy

RANDOM_POLICY_CAP = 10_000


def candidate_affinity(
    store: RecordStore, dictionary: TaskDictionary, sampler_cfg: SamplerConfig
) -> AffinityMatrix:
    """Normalize the store over beam-sampled candidates up to max_order.

    First-order affinities are computed first; they rank each target's
    sources for the higher-order beam. Candidates that were never evaluated
    are dropped rather than imputed.
    """
    first_order = ahp.normalize_store(store, dictionary, max_order=1)
    if sampler_cfg.max_order == 1:
        return first_order
    edges = sampler.candidate_edges(dictionary, first_order, sampler_cfg)
    evaluated = [e for e in edges if store.has_edge(e)]
    return ahp.normalize_store(store, dictionary, edges=evaluated)


def solve_from_affinity(
    affinity: AffinityMatrix,
    dictionary: TaskDictionary,
    solver_cfg: SolverConfig,
    *,
    max_order: int | None = None,
    edges: Sequence[TransferEdge] | None = None,
) -> Taxonomy:
    """Build and solve the program over the affinity's candidate edges."""
    if edges is None:
        edges = affinity.edges(max_order=max_order)
    elif max_order is not None:
        edges = [e for e in edges if e.order <= max_order]
    inst = bip.build_instance(affinity, dictionary, edges, solver_cfg)
    sol = bip.solve(inst)
    if sol.status != "optimal":
        raise InfeasibleError(
            f"no feasible policy within budget {solver_cfg.gamma:g} "
            f"(cost mode: {solver_cfg.cost_mode})"
        )
    return bip.extract_taxonomy(sol, inst, max_order=max_order)


def solve_policy(
    store: RecordStore,
    dictionary: TaskDictionary,
    sampler_cfg: SamplerConfig,
    solver_cfg: SolverConfig,
) -> Taxonomy:
    """Records to taxonomy: normalize, sample, build, solve, extract."""
    affinity = candidate_affinity(store, dictionary, sampler_cfg)
    return solve_from_affinity(
        affinity, dictionary, solver_cfg, max_order=sampler_cfg.max_order
    )


def taxonomy_family(
    store: RecordStore,
    dictionary: TaskDictionary,
    budgets: Sequence[float],
    orders: Sequence[int],
    *,
    sampler_cfg: SamplerConfig | None = None,
    solver_cfg: SolverConfig | None = None,
) -> dict[tuple[float, int], Taxonomy]:
    """One taxonomy per (budget, order) cell over a shared normalization."""
    if not budgets or not orders:
        raise SchemaError("family needs at least one budget and one order")
    base_sampler = sampler_cfg or SamplerConfig()
    shared_cfg = SamplerConfig(
        max_order=max(orders),
        beam_width=base_sampler.beam_width,
        high_order_beam=base_sampler.high_order_beam,
    )
    affinity = candidate_affinity(store, dictionary, shared_cfg)
    family: dict[tuple[float, int], Taxonomy] = {}
    for order in orders:
        for budget in budgets:
            cfg = SolverConfig(
                gamma=float(budget),
                importance=solver_cfg.importance if solver_cfg else {},
                label_cost=solver_cfg.label_cost if solver_cfg else {},
                cost_mode=solver_cfg.cost_mode if solver_cfg else "nodes",
            )
            family[(float(budget), int(order))] = solve_from_affinity(
                affinity, dictionary, cfg, max_order=order
            )
    return family


def localize_novel_task(
    store: RecordStore,
    base_dictionary: TaskDictionary,
    target: str,
    solver_cfg: SolverConfig,
    *,
    max_order: int | None = None,
) -> Taxonomy:
    """All-for-one: best transfer policy for one out-of-dictionary target.

    The target enters as target-only (no self-edge); candidates are exactly
    the evaluated edges in its record store.
    """
    if target in base_dictionary:
        dictionary = base_dictionary
        if base_dictionary.is_source(target):
            raise SchemaError(
                f"novel target {target!r} must be target-only, but it is a source"
            )
    else:
        dictionary = dictionary_with_novel_target(base_dictionary, target)
    if target not in store.targets():
        raise SchemaError(f"no records for novel target {target!r}")
    edges = [e for e in store.edges(target) if max_order is None or e.order <= max_order]
    if not edges:
        raise SchemaError(f"no candidate edges of order <= {max_order} for {target!r}")
    solo = validate_single_target_dictionary(dictionary, target)
    tournament = ahp.clip_smooth(ahp.build_tournament(store, target, edges))
    vector = ahp.principal_eigenvector(ahp.ratio_matrix(tournament))
    affinity = ahp.assemble_affinity({target: (tournament.competitors, vector)})
    return solve_from_affinity(affinity, solo, solver_cfg, max_order=max_order)


def validate_single_target_dictionary(
    dictionary: TaskDictionary, target: str
) -> TaskDictionary:
    """Restrict a dictionary to one target while keeping every source."""
    entries = [
        (t, dictionary.is_source(t), t == target)
        for t in dictionary.tasks
        if dictionary.is_source(t) or t == target
    ]
    return validate_dictionary(entries)


def sample_random_policy(
    affinity: AffinityMatrix,
    dictionary: TaskDictionary,
    gamma: float,
    rng: np.random.Generator | int,
    *,
    max_order: int | None = None,
    solver_cfg: SolverConfig | None = None,
) -> Taxonomy:
    """Uniform feasible policy: one random candidate edge per target.

    Rejection sampling against the budget; raises after 10,000 attempts.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    cfg = solver_cfg or SolverConfig(gamma=float(gamma))
    candidates: dict[str, tuple[tuple[TransferEdge, float], ...]] = {}
    for target in sorted(dictionary.targets):
        pairs = tuple(
            (e, p)
            for e, p in affinity.entries.get(target, ())
            if max_order is None or e.order <= max_order
        )
        if not pairs:
            raise SchemaError(f"target {target!r} has no candidate edges")
        candidates[target] = pairs
    for _ in range(RANDOM_POLICY_CAP):
        policy: list[tuple[str, TransferEdge, float]] = []
        for target, pairs in candidates.items():
            edge, p = pairs[int(rng.integers(len(pairs)))]
            policy.append((target, edge, p))
        if cfg.cost_mode == "nodes":
            chosen_nodes = sorted({s for _, e, _ in policy for s in e.sources})
            spent = sum(cfg.ell(s) for s in chosen_nodes)
        else:
            chosen_nodes = sorted({s for _, e, _ in policy for s in e.sources})
            spent = sum(sum(cfg.ell(s) for s in e.sources) for _, e, _ in policy)
        if spent <= gamma + bip.OBJECTIVE_TOL:
            objective = math.fsum(cfg.r(t) * p for t, _, p in policy)
            roles = tuple(
                TaskRole(t, dictionary.is_source(t), dictionary.is_target(t))
                for t in dictionary.tasks
            )
            return Taxonomy(
                sources=tuple(chosen_nodes),
                policy=tuple(policy),
                objective=objective,
                gamma=float(gamma),
                cost_mode=cfg.cost_mode,
                max_order=max_order,
                importance=dict(cfg.importance),
                label_cost=dict(cfg.label_cost),
                tasks=roles,
                origin="random",
            )
    raise InfeasibleError(
        f"no feasible random policy found in {RANDOM_POLICY_CAP} attempts "
        f"(budget {gamma:g} is too tight for rejection sampling)"
    )


@dataclass(frozen=True)
class SignificanceReport:
    """Optimal objective against a random-connectivity baseline."""

    optimal_objective: float
    random_objectives: tuple[float, ...]
    percentile_5: float | None
    percentile_95: float | None
    sample_count: int

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "optimal_objective": self.optimal_objective,
            "sample_count": self.sample_count,
            "percentile_5": self.percentile_5,
            "percentile_95": self.percentile_95,
            "random_objectives": list(self.random_objectives),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), sort_keys=True) + "\n")

    def save_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample", "objective"])
            for i, obj in enumerate(self.random_objectives):
                writer.writerow([i, repr(obj)])


def significance_from_affinity(
    affinity: AffinityMatrix,
    dictionary: TaskDictionary,
    gamma: float,
    n_samples: int,
    *,
    seed: int = 0,
    max_order: int | None = None,
    solver_cfg: SolverConfig | None = None,
    progress=None,
) -> SignificanceReport:
    """Optimal objective vs seeded random feasible policies on shared c."""
    cfg = solver_cfg or SolverConfig(gamma=float(gamma))
    optimal = solve_from_affinity(affinity, dictionary, cfg, max_order=max_order)
    streams = np.random.SeedSequence(seed).spawn(n_samples)
    randoms: list[float] = []
    for i, stream in enumerate(streams):
        taxonomy = sample_random_policy(
            affinity,
            dictionary,
            gamma,
            np.random.default_rng(stream),
            max_order=max_order,
            solver_cfg=cfg,
        )
        randoms.append(taxonomy.objective)
        if progress is not None:
            progress(i + 1)
    if randoms:
        p5, p95 = (float(v) for v in np.percentile(randoms, [5, 95]))
    else:
        p5 = p95 = None
    return SignificanceReport(
        optimal_objective=optimal.objective,
        random_objectives=tuple(randoms),
        percentile_5=p5,
        percentile_95=p95,
        sample_count=n_samples,
    )


def significance_test(
    store: RecordStore,
    dictionary: TaskDictionary,
    gamma: float,
    n_samples: int,
    *,
    seed: int = 0,
    sampler_cfg: SamplerConfig | None = None,
    solver_cfg: SolverConfig | None = None,
    progress=None,
) -> SignificanceReport:
    sampler_cfg = sampler_cfg or SamplerConfig()
    affinity = candidate_affinity(store, dictionary, sampler_cfg)
    return significance_from_affinity(
        affinity,
        dictionary,
        gamma,
        n_samples,
        seed=seed,
        max_order=sampler_cfg.max_order,
        solver_cfg=solver_cfg,
        progress=progress,
    )


def win_rate(
    policy_scores: Mapping[str, float], baseline_scores: Mapping[str, float]
) -> float:
    """Fraction of shared images where the policy strictly beats the baseline."""
    if set(policy_scores) != set(baseline_scores):
        diff = sorted(set(policy_scores).symmetric_difference(baseline_scores))[:5]
        raise ImageSetError(f"image sets differ (sample: {diff})")
    if not policy_scores:
        raise ImageSetError("empty image set")
    wins = sum(1 for img, s in policy_scores.items() if s > baseline_scores[img])
    return wins / len(policy_scores)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(
    ranking_a: Mapping[str, float], ranking_b: Mapping[str, float]
) -> float:
    """Rank correlation with average ranks for ties."""
    if set(ranking_a) != set(ranking_b):
        raise ValueError("rankings cover different item sets")
    items = sorted(ranking_a)
    if len(items) < 2:
        raise ValueError("rank correlation needs at least 2 items")
    a = _average_ranks(np.array([ranking_a[i] for i in items], dtype=float))
    b = _average_ranks(np.array([ranking_b[i] for i in items], dtype=float))
    a -= a.mean()
    b -= b.mean()
    denom = math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    if denom == 0:
        raise ValueError("rank correlation undefined for constant rankings")
    return float(np.dot(a, b)) / denom
