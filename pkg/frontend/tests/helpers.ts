/** Deterministic in-memory stand-in for the solver service.
 *
 * Responses are pure functions of the request (the property the real
 * service guarantees), objectives are strictly non-decreasing in budget
 * and order, and the chosen policy changes with the budget so comparison
 * diffs have something to show. No UI logic lives here.
 */

import type {
  DatasetMeta,
  PolicyEntry,
  SolveRequest,
  TaskRole,
  TaxonomyPayload,
} from "../src/api.ts";

export const MOCK_TASKS: TaskRole[] = [
  { name: "s0", source: true, target: false },
  { name: "t1", source: true, target: true },
  { name: "t2", source: true, target: true },
  { name: "t3", source: true, target: true },
  { name: "t4", source: true, target: true },
];

export const MOCK_META: DatasetMeta = {
  format_version: 1,
  id: "mock",
  tasks: MOCK_TASKS,
  n_sources: 5,
  n_targets: 4,
  orders: [1, 2],
  edge_count: 24,
  has_records: false,
};

export function mockSolve(request: SolveRequest): TaxonomyPayload {
  const sourceNames = MOCK_TASKS.filter((t) => t.source).map((t) => t.name);
  const budget = Math.floor(request.budget);
  const selected = sourceNames.slice(0, Math.max(1, Math.min(budget, sourceNames.length)));
  const targets = MOCK_TASKS.filter((t) => t.target).map((t) => t.name);
  const policy: Record<string, PolicyEntry> = {};
  let objective = 0;
  targets.forEach((target, index) => {
    const order = Math.min(request.max_order, selected.length) >= 2 && index % 2 === 0 ? 2 : 1;
    const first = selected[(index + budget) % selected.length]!;
    const second = selected[(index + budget + 1) % selected.length];
    const sources =
      order === 2 && second !== undefined && second !== first
        ? [first, second].sort()
        : [first];
    const p = Math.min(0.95, 0.3 + 0.1 * budget + 0.05 * sources.length);
    const weight = request.importance[target] ?? 1;
    objective += weight * p;
    policy[target] = { sources, p, order: sources.length };
  });
  return {
    format_version: 1,
    objective,
    sources: selected,
    policy,
    config: {
      budget: request.budget,
      max_order: request.max_order,
      cost_mode: request.cost_mode,
      importance: request.importance,
      label_cost: request.costs,
    },
    tasks: MOCK_TASKS,
    stats: { nodes_explored: 7, origin: "solver" },
  };
}

export interface MockServiceOptions {
  /** Awaited before each solve response; lets tests control interleaving. */
  beforeSolve?: () => Promise<void>;
  onSolve?: (request: SolveRequest) => void;
}

export function makeFetchStub(options: MockServiceOptions = {}): typeof fetch {
  const json = (body: unknown, status = 200) =>
    new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });

  return async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = String(input);
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    if (path === "/datasets") return json({ datasets: [MOCK_META] });
    if (path === "/datasets/mock") return json(MOCK_META);
    if (path === "/datasets/mock/solve") {
      const request = JSON.parse(String(init?.body)) as SolveRequest;
      options.onSolve?.(request);
      if (options.beforeSolve) await options.beforeSolve();
      if (init?.signal?.aborted) {
        throw new DOMException("aborted", "AbortError");
      }
      if (request.budget < 1) {
        return json(
          { error: "E:INFEASIBLE: no feasible policy within budget", code: "INFEASIBLE" },
          409,
        );
      }
      for (const name of Object.keys(request.importance)) {
        if (!MOCK_TASKS.some((t) => t.name === name)) {
          return json({ error: `E:SCHEMA: unknown task ${name}`, code: "SCHEMA" }, 422);
        }
      }
      return json(mockSolve(request));
    }
    return json({ error: "E:SCHEMA: unknown dataset", code: "SCHEMA" }, 404);
  };
}

/** Minimal view sink capturing everything the controller pushes out. */
export function captureViews() {
  const captured = {
    taxonomies: [] as { payload: TaxonomyPayload; request: SolveRequest; datasetId: string }[],
    errors: [] as (string | null)[],
    comparisons: [] as unknown[],
    sweeps: [] as { points: { budget: number; objective: number }[]; monotone: boolean }[],
    metas: [] as DatasetMeta[],
  };
  const views = {
    showTaxonomy: (payload: TaxonomyPayload, request: SolveRequest, datasetId: string) =>
      captured.taxonomies.push({ payload, request, datasetId }),
    showError: (message: string | null) => captured.errors.push(message),
    showComparison: (changes: unknown) => captured.comparisons.push(changes),
    showSweep: (points: { budget: number; objective: number }[], monotone: boolean) =>
      captured.sweeps.push({ points, monotone }),
    showMetadata: (meta: DatasetMeta) => captured.metas.push(meta),
  };
  return { captured, views };
}
