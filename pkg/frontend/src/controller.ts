/** Orchestration between controls, the solver service, and the views.
 *
 * Control changes funnel through a 300 ms debouncer into a latest-wins
 * request slot, so at most one solve is in flight and stale responses are
 * dropped. The controller never synthesizes policies: `lastTaxonomy` is
 * always verbatim service output, paired with the request that made it.
 */

import { ApiError, SolverClient } from "./api.ts";
import type { DatasetMeta, SolveRequest, TaxonomyPayload } from "./api.ts";
import {
  Debouncer,
  LatestWins,
  buildRequest,
  budgetBounds,
  clampToMetadata,
  diffPolicies,
  initialState,
  sweepIsMonotone,
} from "./state.ts";
import type { ExplorerState, PolicyChange, SweepPoint } from "./state.ts";

export interface ExplorerViews {
  showTaxonomy(payload: TaxonomyPayload, request: SolveRequest, datasetId: string): void;
  showError(message: string | null): void;
  showComparison(changes: PolicyChange[] | null): void;
  showSweep(points: SweepPoint[], monotone: boolean): void;
  showMetadata(meta: DatasetMeta): void;
}

export class ExplorerController {
  state: ExplorerState = initialState();
  meta: DatasetMeta | null = null;

  private readonly debouncer: Debouncer;
  private readonly solveSlot = new LatestWins();
  private readonly sweepSlot = new LatestWins();

  constructor(
    readonly client: SolverClient,
    readonly views: ExplorerViews,
    debounceMs = 300,
  ) {
    this.debouncer = new Debouncer(debounceMs);
  }

  async selectDataset(datasetId: string): Promise<void> {
    const meta = await this.client.metadata(datasetId);
    this.meta = meta;
    this.state = clampToMetadata({ ...this.state, datasetId }, meta);
    this.state.pinned = null;
    this.views.showMetadata(meta);
    this.views.showComparison(null);
    await this.solveNow();
  }

  /** Control-change entry point: clamp, then debounce a re-solve. */
  update(patch: Partial<ExplorerState>): void {
    this.state = { ...this.state, ...patch };
    if (this.meta) this.state = clampToMetadata(this.state, this.meta);
    this.debouncer.schedule(() => {
      void this.solveNow();
    });
  }

  setImportance(target: string, weight: number | null): void {
    const importance = { ...this.state.importance };
    if (weight === null || weight === 1) delete importance[target];
    else importance[target] = weight;
    this.update({ importance });
  }

  setCost(task: string, cost: number | null): void {
    const costs = { ...this.state.costs };
    if (cost === null || cost === 1) delete costs[task];
    else costs[task] = cost;
    this.update({ costs });
  }

  async solveNow(): Promise<void> {
    const datasetId = this.state.datasetId;
    if (!datasetId) return;
    const request = buildRequest(this.state);
    try {
      const payload = await this.solveSlot.run((signal) =>
        this.client.solve(datasetId, request, signal),
      );
      if (payload === undefined) return; // superseded
      this.state.lastRequest = request;
      this.state.lastTaxonomy = payload;
      this.state.error = null;
      this.views.showError(null);
      this.views.showTaxonomy(payload, request, datasetId);
      this.refreshComparison();
    } catch (error) {
      const message =
        error instanceof ApiError ? error.message : `request failed: ${String(error)}`;
      this.state.error = message;
      this.views.showError(message);
    }
  }

  /** Pin the current result into the single comparison slot. */
  pinCurrent(): void {
    if (this.state.lastRequest && this.state.lastTaxonomy) {
      this.state.pinned = {
        request: this.state.lastRequest,
        taxonomy: this.state.lastTaxonomy,
      };
      this.refreshComparison();
    }
  }

  clearPin(): void {
    this.state.pinned = null;
    this.views.showComparison(null);
  }

  private refreshComparison(): void {
    if (this.state.pinned && this.state.lastTaxonomy) {
      this.views.showComparison(
        diffPolicies(this.state.pinned.taxonomy, this.state.lastTaxonomy),
      );
    }
  }

  /** Solve across the full budget range and render the objective curve. */
  async runSweep(): Promise<SweepPoint[] | undefined> {
    const datasetId = this.state.datasetId;
    if (!datasetId || !this.meta) return undefined;
    const { min, max } = budgetBounds(this.meta);
    const base = buildRequest(this.state);
    const points = await this.sweepSlot.run(async (signal) => {
      const collected: SweepPoint[] = [];
      for (let budget = min; budget <= max; budget++) {
        try {
          const payload = await this.client.solve(
            datasetId,
            { ...base, budget },
            signal,
          );
          collected.push({ budget, objective: payload.objective });
        } catch (error) {
          if (error instanceof ApiError && error.code === "INFEASIBLE") continue;
          throw error;
        }
      }
      return collected;
    });
    if (points === undefined) return undefined;
    this.views.showSweep(points, sweepIsMonotone(points));
    return points;
  }
}
