"""HTTP facade over the solver and analyses for the explorer UI.

Datasets are loaded read-only at startup from a data directory; every
response is a pure function of (dataset content, request parameters), so
identical requests always produce identical bodies. Solve responses use
the same canonical serializer as the CLI for byte-level parity.
"""

from __future__ import annotations

import json
import os
import queue
import threading
import time
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Iterator

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, Field

from . import ahp, engine
from .ahp import AffinityMatrix
from .bip import SolverConfig
from .cluster import similarity_tree
from .domain import RecordStore, TaskDictionary, load_dictionary, load_records
from .errors import InfeasibleError, TransferOptError
from .sampler import SamplerConfig
from .taxonomy import canonical_json


@dataclass(frozen=True)
class SessionDataset:
    """Immutable dataset: dictionary plus affinities, optionally raw records."""

    id: str
    dictionary: TaskDictionary
    affinity: AffinityMatrix
    store: RecordStore | None = None
    loaded_at: float = dataclass_field(default_factory=time.time)

    def metadata(self) -> dict:
        orders = self.affinity.orders()
        return {
            "format_version": 1,
            "id": self.id,
            "tasks": [
                {
                    "name": t,
                    "source": self.dictionary.is_source(t),
                    "target": self.dictionary.is_target(t),
                }
                for t in self.dictionary.tasks
            ],
            "n_sources": len(self.dictionary.sources),
            "n_targets": len(self.dictionary.targets),
            "orders": list(orders) if orders else [1],
            "edge_count": len(self.affinity.edges()),
            "has_records": self.store is not None,
        }


def load_dataset(path: Path, dataset_id: str | None = None) -> SessionDataset:
    """Load one dataset directory; affinity is computed if only records exist."""
    dictionary = load_dictionary(path / "dictionary.json")
    store = None
    records_path = path / "records.ndjson"
    if records_path.exists():
        store = load_records(records_path, dictionary)
    affinity_path = path / "affinity.json"
    if affinity_path.exists():
        affinity = ahp.load_affinity(affinity_path)
    elif store is not None:
        affinity = ahp.normalize_store(store, dictionary)
    else:
        raise TransferOptError(
            f"dataset {path} has neither affinity.json nor records.ndjson"
        )
    return SessionDataset(
        id=dataset_id or path.name, dictionary=dictionary, affinity=affinity, store=store
    )


def discover_datasets(data_dir: Path) -> dict[str, SessionDataset]:
    if (data_dir / "dictionary.json").exists():
        ds = load_dataset(data_dir)
        return {ds.id: ds}
    datasets = {}
    for child in sorted(data_dir.iterdir()):
        if child.is_dir() and (child / "dictionary.json").exists():
            ds = load_dataset(child)
            datasets[ds.id] = ds
    if not datasets:
        raise TransferOptError(f"no datasets found under {data_dir}")
    return datasets


class SolveRequest(BaseModel):
    budget: float
    max_order: int = 1
    importance: dict[str, float] = Field(default_factory=dict)
    costs: dict[str, float] = Field(default_factory=dict)
    cost_mode: str = "nodes"


class SignificanceRequest(BaseModel):
    budget: float
    samples: int = Field(ge=0)
    seed: int = 0
    max_order: int = 1
    importance: dict[str, float] = Field(default_factory=dict)
    costs: dict[str, float] = Field(default_factory=dict)
    cost_mode: str = "nodes"
    stream: bool = False


def _error_body(exc: TransferOptError) -> dict:
    return {"error": f"E:{exc.code}: {exc}", "code": exc.code}


def create_app(
    data_dir: str | Path,
    *,
    max_concurrent_solves: int | None = None,
) -> FastAPI:
    datasets = discover_datasets(Path(data_dir))
    limit = max_concurrent_solves or os.cpu_count() or 4
    gate = threading.BoundedSemaphore(limit)

    app = FastAPI(title="transferopt solver service")
    app.state.solve_gate = gate
    app.state.datasets = datasets
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(TransferOptError)
    async def _handle_domain_error(request: Request, exc: TransferOptError):
        status = 409 if isinstance(exc, InfeasibleError) else 422
        return JSONResponse(status_code=status, content=_error_body(exc))

    def _dataset(dataset_id: str) -> SessionDataset:
        ds = datasets.get(dataset_id)
        if ds is None:
            raise _NotFound(dataset_id)
        return ds

    class _NotFound(Exception):
        def __init__(self, dataset_id: str):
            self.dataset_id = dataset_id

    @app.exception_handler(_NotFound)
    async def _handle_not_found(request: Request, exc: _NotFound):
        return JSONResponse(
            status_code=404,
            content={"error": f"E:SCHEMA: unknown dataset {exc.dataset_id!r}", "code": "SCHEMA"},
        )

    def _solver_config(ds: SessionDataset, budget, importance, costs, cost_mode) -> SolverConfig:
        for name in list(importance) + list(costs):
            if name not in ds.dictionary:
                raise TransferOptError(f"unknown task {name!r} in request weights")
        return SolverConfig(
            gamma=budget, importance=importance, label_cost=costs, cost_mode=cost_mode
        )

    @app.get("/datasets")
    def list_datasets():
        return {"datasets": [datasets[k].metadata() for k in sorted(datasets)]}

    @app.get("/datasets/{dataset_id}")
    def dataset_metadata(dataset_id: str):
        return _dataset(dataset_id).metadata()

    @app.get("/datasets/{dataset_id}/affinity")
    def dataset_affinity(dataset_id: str):
        ds = _dataset(dataset_id)
        return Response(
            content=canonical_json(ds.affinity.to_json_dict()),
            media_type="application/json",
        )

    @app.get("/datasets/{dataset_id}/tree")
    def dataset_tree(dataset_id: str):
        ds = _dataset(dataset_id)
        dendrogram = similarity_tree(ds.affinity)
        return Response(
            content=canonical_json(dendrogram.to_json_dict()),
            media_type="application/json",
        )

    @app.post("/datasets/{dataset_id}/solve")
    def solve(dataset_id: str, request: SolveRequest):
        ds = _dataset(dataset_id)
        cfg = _solver_config(ds, request.budget, request.importance, request.costs, request.cost_mode)
        if not gate.acquire(blocking=False):
            return JSONResponse(
                status_code=503,
                content={"error": "E:SCHEMA: solver capacity saturated", "code": "SCHEMA"},
            )
        try:
            taxonomy = engine.solve_from_affinity(
                ds.affinity, ds.dictionary, cfg, max_order=request.max_order
            )
        finally:
            gate.release()
        return Response(content=taxonomy.to_json(), media_type="application/json")

    @app.post("/datasets/{dataset_id}/significance")
    def significance(dataset_id: str, request: SignificanceRequest):
        ds = _dataset(dataset_id)
        cfg = _solver_config(ds, request.budget, request.importance, request.costs, request.cost_mode)

        def run(progress=None):
            if ds.store is not None:
                return engine.significance_test(
                    ds.store,
                    ds.dictionary,
                    request.budget,
                    request.samples,
                    seed=request.seed,
                    sampler_cfg=SamplerConfig(max_order=request.max_order),
                    solver_cfg=cfg,
                    progress=progress,
                )
            return engine.significance_from_affinity(
                ds.affinity,
                ds.dictionary,
                request.budget,
                request.samples,
                seed=request.seed,
                max_order=request.max_order,
                solver_cfg=cfg,
                progress=progress,
            )

        if not request.stream:
            report = run()
            return Response(
                content=canonical_json(report.to_json_dict()),
                media_type="application/json",
            )

        def stream() -> Iterator[bytes]:
            updates: queue.Queue = queue.Queue()
            step = max(1, request.samples // 20)

            def progress(done: int):
                if done % step == 0 or done == request.samples:
                    updates.put(("progress", done))

            def worker():
                try:
                    updates.put(("done", run(progress=progress)))
                except TransferOptError as exc:
                    updates.put(("error", exc))

            threading.Thread(target=worker, daemon=True).start()
            while True:
                kind, payload = updates.get()
                if kind == "progress":
                    yield (json.dumps({"samples_done": payload}) + "\n").encode()
                elif kind == "error":
                    yield (canonical_json({"error": _error_body(payload)}) + "\n").encode()
                    return
                else:
                    yield (canonical_json({"report": payload.to_json_dict()}) + "\n").encode()
                    return

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    return app
