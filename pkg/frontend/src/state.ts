/** Explorer state and the pure logic behind the what-if controls:
 * debouncing, latest-wins request cancellation, policy diffing for
 * pin-and-compare, and sweep monotonicity checking. */

import type { DatasetMeta, SolveRequest, TaxonomyPayload } from "./api.ts";

export interface PinnedResult {
  request: SolveRequest;
  taxonomy: TaxonomyPayload;
}

export interface ExplorerState {
  datasetId: string | null;
  budget: number;
  maxOrder: number;
  importance: Record<string, number>;
  costs: Record<string, number>;
  costMode: "nodes" | "edges";
  lastRequest: SolveRequest | null;
  lastTaxonomy: TaxonomyPayload | null;
  pinned: PinnedResult | null; // comparison slot holds at most one result
  error: string | null;
}

export function initialState(): ExplorerState {
  return {
    datasetId: null,
    budget: 1,
    maxOrder: 1,
    importance: {},
    costs: {},
    costMode: "nodes",
    lastRequest: null,
    lastTaxonomy: null,
    pinned: null,
    error: null,
  };
}

/** Budget bound implied by metadata: with default unit costs the budget
 * never needs to exceed the number of source tasks. */
export function budgetBounds(meta: DatasetMeta): { min: number; max: number } {
  return { min: 1, max: Math.max(1, meta.n_sources) };
}

/** Clamp control values into the bounds the server metadata allows. */
export function clampToMetadata(state: ExplorerState, meta: DatasetMeta): ExplorerState {
  const { min, max } = budgetBounds(meta);
  const orders = meta.orders.length ? meta.orders : [1];
  const maxOrder = orders.includes(state.maxOrder)
    ? state.maxOrder
    : orders[orders.length - 1]!;
  const known = new Set(meta.tasks.map((t) => t.name));
  const keep = (weights: Record<string, number>) =>
    Object.fromEntries(Object.entries(weights).filter(([name]) => known.has(name)));
  return {
    ...state,
    datasetId: meta.id,
    budget: Math.min(Math.max(state.budget, min), max),
    maxOrder,
    importance: keep(state.importance),
    costs: keep(state.costs),
  };
}

export function buildRequest(state: ExplorerState): SolveRequest {
  return {
    budget: state.budget,
    max_order: state.maxOrder,
    importance: { ...state.importance },
    costs: { ...state.costs },
    cost_mode: state.costMode,
  };
}

/** Trailing-edge debouncer; timers are injectable for tests. */
export class Debouncer {
  private handle: ReturnType<typeof setTimeout> | null = null;

  constructor(readonly delayMs = 300) {}

  schedule(fn: () => void): void {
    this.cancel();
    this.handle = setTimeout(() => {
      this.handle = null;
      fn();
    }, this.delayMs);
  }

  cancel(): void {
    if (this.handle !== null) {
      clearTimeout(this.handle);
      this.handle = null;
    }
  }
}

/** At most one in-flight request per control group; superseded requests
 * are aborted and their results discarded. */
export class LatestWins {
  private controller: AbortController | null = null;
  private ticket = 0;

  async run<T>(factory: (signal: AbortSignal) => Promise<T>): Promise<T | undefined> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const ticket = ++this.ticket;
    try {
      const result = await factory(controller.signal);
      return ticket === this.ticket ? result : undefined;
    } catch (error) {
      if (controller.signal.aborted || ticket !== this.ticket) return undefined;
      throw error;
    }
  }
}

export interface PolicyChange {
  target: string;
  before: string[] | null; // sources, null when the target was absent
  after: string[] | null;
  pBefore: number | null;
  pAfter: number | null;
}

/** Per-target differences between two taxonomy payloads (for pin-and-compare). */
export function diffPolicies(a: TaxonomyPayload, b: TaxonomyPayload): PolicyChange[] {
  const targets = new Set([...Object.keys(a.policy), ...Object.keys(b.policy)]);
  const changes: PolicyChange[] = [];
  for (const target of [...targets].sort()) {
    const before = a.policy[target] ?? null;
    const after = b.policy[target] ?? null;
    const sameSources =
      before !== null &&
      after !== null &&
      before.sources.join("+") === after.sources.join("+");
    if (!sameSources) {
      changes.push({
        target,
        before: before ? [...before.sources] : null,
        after: after ? [...after.sources] : null,
        pBefore: before ? before.p : null,
        pAfter: after ? after.p : null,
      });
    }
  }
  return changes;
}

export interface SweepPoint {
  budget: number;
  objective: number;
}

export function sweepIsMonotone(points: SweepPoint[], tol = 1e-9): boolean {
  const ordered = [...points].sort((p, q) => p.budget - q.budget);
  for (let i = 1; i < ordered.length; i++) {
    if (ordered[i]!.objective < ordered[i - 1]!.objective - tol) return false;
  }
  return true;
}
