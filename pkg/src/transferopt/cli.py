"""Command-line surface: one subcommand per pipeline stage.

Every subcommand is deterministic under fixed seeds and inputs, and all
validation failures exit with status 1 after printing a single
machine-parseable line ``E:<code>: <message>`` to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import ahp, engine
from .bip import SolverConfig
from .cluster import similarity_tree
from .domain import dictionary_with_novel_target, load_dictionary, load_records
from .errors import SchemaError, TransferOptError, UnknownTaskError
from .sampler import SamplerConfig
from .synthetic import SyntheticSpec, gen_synthetic
from .taxonomy import save_taxonomy


def _load_weights(path: str | None) -> dict[str, float]:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: expected an object mapping task names to numbers")
    weights = {}
    for name, value in data.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"{path}: weight for {name!r} must be a number")
        weights[str(name)] = float(value)
    return weights


def _parse_range(text: str, kind=float) -> list:
    """Accept 'a..b' (inclusive integer steps) or a comma list."""
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            lo_i, hi_i = int(lo), int(hi)
        except ValueError as exc:
            raise SchemaError(f"bad range {text!r}: expected integers around '..'") from exc
        if hi_i < lo_i:
            raise SchemaError(f"bad range {text!r}: end below start")
        return [kind(v) for v in range(lo_i, hi_i + 1)]
    try:
        return [kind(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise SchemaError(f"bad list {text!r}") from exc


def _solver_config(args, dictionary=None) -> SolverConfig:
    importance = _load_weights(getattr(args, "importance", None))
    costs = _load_weights(getattr(args, "costs", None))
    if dictionary is not None:
        for name in list(importance) + list(costs):
            if name not in dictionary:
                raise UnknownTaskError(f"unknown task {name!r} in weight file")
    return SolverConfig(
        gamma=args.budget,
        importance=importance,
        label_cost=costs,
        cost_mode=getattr(args, "cost_mode", "nodes"),
    )


def _cmd_normalize(args) -> int:
    dictionary = load_dictionary(args.dict)
    store = load_records(args.records, dictionary, scores_are_losses=args.losses)
    affinity = ahp.normalize_store(store, dictionary, max_order=args.max_order)
    ahp.save_affinity(affinity, args.out)
    if args.csv:
        affinity.to_csv(args.csv)
    if args.distance_csv:
        ahp.save_distance_csv(affinity, args.distance_csv)
    print(f"wrote affinities for {len(affinity.targets())} targets to {args.out}")
    return 0


def _cmd_solve(args) -> int:
    dictionary = load_dictionary(args.dict)
    affinity = ahp.load_affinity(args.affinity)
    taxonomy = engine.solve_from_affinity(
        affinity, dictionary, _solver_config(args, dictionary), max_order=args.max_order
    )
    save_taxonomy(taxonomy, args.out)
    if args.dot:
        Path(args.dot).write_text(taxonomy.to_dot())
    print(f"objective {taxonomy.objective:.6f}, sources: {', '.join(taxonomy.sources)}")
    return 0


def _cmd_family(args) -> int:
    dictionary = load_dictionary(args.dict)
    store = load_records(args.records, dictionary, scores_are_losses=args.losses)
    budgets = _parse_range(args.budgets, float)
    orders = _parse_range(args.orders, int)
    family = engine.taxonomy_family(
        store,
        dictionary,
        budgets,
        orders,
        sampler_cfg=SamplerConfig(max_order=max(orders), beam_width=args.beam_width),
        solver_cfg=_solver_config_family(args, dictionary),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    for (budget, order), taxonomy in sorted(family.items()):
        name = f"taxonomy_b{budget:g}_o{order}.json"
        save_taxonomy(taxonomy, out / name)
        index.append({"budget": budget, "order": order, "objective": taxonomy.objective, "file": name})
    (out / "index.json").write_text(json.dumps({"format_version": 1, "cells": index}, sort_keys=True) + "\n")
    with (out / "index.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["budget", "order", "objective", "file"])
        for cell in index:
            writer.writerow([cell["budget"], cell["order"], repr(cell["objective"]), cell["file"]])
    print(f"wrote {len(index)} taxonomies to {out}")
    return 0


def _solver_config_family(args, dictionary) -> SolverConfig:
    # budget placeholder; the family loop substitutes each cell's value
    importance = _load_weights(getattr(args, "importance", None))
    costs = _load_weights(getattr(args, "costs", None))
    for name in list(importance) + list(costs):
        if name not in dictionary:
            raise UnknownTaskError(f"unknown task {name!r} in weight file")
    return SolverConfig(
        gamma=1.0,
        importance=importance,
        label_cost=costs,
        cost_mode=getattr(args, "cost_mode", "nodes"),
    )


def _cmd_localize(args) -> int:
    base = load_dictionary(args.dict)
    combined = base if args.target in base else dictionary_with_novel_target(base, args.target)
    store = load_records(args.records, combined, scores_are_losses=args.losses)
    taxonomy = engine.localize_novel_task(
        store, base, args.target, _solver_config(args, combined), max_order=args.max_order
    )
    save_taxonomy(taxonomy, args.out)
    if args.dot:
        Path(args.dot).write_text(taxonomy.to_dot())
    edge = taxonomy.chosen_edge(args.target)
    print(f"{args.target}: transfer from {'+'.join(edge.sources)} (objective {taxonomy.objective:.6f})")
    return 0


def _cmd_significance(args) -> int:
    dictionary = load_dictionary(args.dict)
    store = load_records(args.records, dictionary, scores_are_losses=args.losses)
    report = engine.significance_test(
        store,
        dictionary,
        args.budget,
        args.samples,
        seed=args.seed,
        sampler_cfg=SamplerConfig(max_order=args.max_order, beam_width=args.beam_width),
        solver_cfg=_solver_config(args, dictionary),
    )
    report.save(args.out)
    if args.csv:
        report.save_csv(args.csv)
    band = (
        f"5th-95th percentile [{report.percentile_5:.6f}, {report.percentile_95:.6f}]"
        if report.sample_count
        else "no samples"
    )
    print(f"optimal {report.optimal_objective:.6f} vs {report.sample_count} random policies ({band})")
    return 0


def _cmd_tree(args) -> int:
    affinity = ahp.load_affinity(args.affinity)
    dendrogram = similarity_tree(affinity)
    Path(args.out).write_text(dendrogram.to_newick() + "\n")
    if args.json:
        dendrogram.save(args.json)
    print(f"wrote tree over {len(dendrogram.leaves)} tasks to {args.out}")
    return 0


def _cmd_gen_synthetic(args) -> int:
    spec = SyntheticSpec(
        n_tasks=args.tasks,
        n_images=args.images,
        latent_dim=args.latent_dim,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
        max_order=args.max_order,
        dominant_source=args.dominant,
    )
    paths = gen_synthetic(spec, args.out)
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.data))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transferopt",
        description="Compute transfer affinities and budget-optimal supervision policies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="records -> affinity matrix")
    p.add_argument("--records", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None, help="also write affinities as CSV")
    p.add_argument("--distance-csv", default=None, help="also write exp(-beta*p) distances")
    p.add_argument("--max-order", type=int, default=None)
    p.add_argument("--losses", action="store_true", help="input scores are losses; negate them")
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("solve", help="affinity + budget -> taxonomy")
    p.add_argument("--affinity", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--max-order", type=int, default=1)
    p.add_argument("--importance", default=None, help="JSON file: target -> weight")
    p.add_argument("--costs", default=None, help="JSON file: task -> label cost")
    p.add_argument("--cost-mode", choices=["nodes", "edges"], default="nodes")
    p.add_argument("--out", required=True)
    p.add_argument("--dot", default=None, help="also write a Graphviz rendering")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("family", help="taxonomies over a budget x order grid")
    p.add_argument("--records", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--budgets", required=True, help="e.g. 1..5 or 1,2.5,4")
    p.add_argument("--orders", required=True, help="e.g. 1..2 or 1,2,4")
    p.add_argument("--beam-width", type=int, default=5)
    p.add_argument("--importance", default=None)
    p.add_argument("--costs", default=None)
    p.add_argument("--cost-mode", choices=["nodes", "edges"], default="nodes")
    p.add_argument("--losses", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_family)

    p = sub.add_parser("localize", help="best policy for a single (novel) target")
    p.add_argument("--target", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--max-order", type=int, default=None)
    p.add_argument("--importance", default=None)
    p.add_argument("--costs", default=None)
    p.add_argument("--cost-mode", choices=["nodes", "edges"], default="nodes")
    p.add_argument("--losses", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--dot", default=None)
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("significance", help="optimal vs random-policy objectives")
    p.add_argument("--records", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--max-order", type=int, default=1)
    p.add_argument("--beam-width", type=int, default=5)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--importance", default=None)
    p.add_argument("--costs", default=None)
    p.add_argument("--cost-mode", choices=["nodes", "edges"], default="nodes")
    p.add_argument("--losses", action="store_true")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", default=None, help="also write sampled objectives as CSV")
    p.set_defaults(func=_cmd_significance)

    p = sub.add_parser("tree", help="similarity tree from transfer-out columns")
    p.add_argument("--affinity", required=True)
    p.add_argument("--out", required=True, help="Newick output path")
    p.add_argument("--json", default=None)
    p.set_defaults(func=_cmd_tree)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic dataset directory")
    p.add_argument("--tasks", type=int, required=True)
    p.add_argument("--images", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--latent-dim", type=int, default=8)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--max-order", type=int, default=2)
    p.add_argument("--dominant", action="store_true", help="plant a dominant source")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("serve", help="run the HTTP solver service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data", required=True, help="dataset directory")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TransferOptError as exc:
        print(f"E:{exc.code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
