/** UI acceptance: every rendered taxonomy is traceable to its request
 * (replaying the inspector's parameters reproduces the payload), the
 * budget-sweep curve is non-decreasing on a monotone dataset, and the
 * what-if loop debounces and cancels stale requests. */

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { SolverClient } from "../src/api.ts";
import type { SolveRequest } from "../src/api.ts";
import { ExplorerController } from "../src/controller.ts";
import { renderInspector, requestShownIn } from "../src/inspector.ts";
import { captureViews, makeFetchStub } from "./helpers.ts";

function makeController(options: Parameters<typeof makeFetchStub>[0] = {}) {
  const fetchStub = makeFetchStub(options);
  const client = new SolverClient("http://service.test", fetchStub);
  const { captured, views } = captureViews();
  const controller = new ExplorerController(client, views, 300);
  return { controller, client, captured };
}

describe("traceability", () => {
  it("replaying the inspector's request reproduces the displayed payload", async () => {
    const { controller, client, captured } = makeController();
    await controller.selectDataset("mock");
    controller.state.budget = 3;
    controller.state.maxOrder = 2;
    await controller.solveNow();

    const shown = captured.taxonomies.at(-1)!;
    const panel = renderInspector(document, {
      datasetId: shown.datasetId,
      request: shown.request,
      payload: shown.payload,
    });
    const replayRequest = requestShownIn(panel);
    expect(replayRequest).toEqual(shown.request);

    const replayed = await client.solve(shown.datasetId, replayRequest);
    expect(replayed).toEqual(shown.payload);
  });

  it("replay button feeds the stored request back to its handler", () => {
    const entryRequest: SolveRequest = {
      budget: 2,
      max_order: 1,
      importance: { t1: 2 },
      costs: {},
      cost_mode: "nodes",
    };
    const { captured } = captureViews();
    void captured;
    const replays: SolveRequest[] = [];
    const panel = renderInspector(
      document,
      {
        datasetId: "mock",
        request: entryRequest,
        payload: {
          format_version: 1,
          objective: 1,
          sources: [],
          policy: {},
          config: {
            budget: 2,
            max_order: 1,
            cost_mode: "nodes",
            importance: {},
            label_cost: {},
          },
          tasks: [],
          stats: { nodes_explored: 0, origin: "solver" },
        },
      },
      (entry) => replays.push(entry.request),
    );
    (panel.querySelector("button.inspector-replay") as HTMLButtonElement).click();
    expect(replays).toEqual([entryRequest]);
  });

  it("budget sweep is non-decreasing on a monotone dataset", async () => {
    const { controller, captured } = makeController();
    await controller.selectDataset("mock");
    const points = await controller.runSweep();
    expect(points).toBeDefined();
    expect(points!.length).toBeGreaterThanOrEqual(4);
    const sweep = captured.sweeps.at(-1)!;
    expect(sweep.monotone).toBe(true);
    for (let i = 1; i < sweep.points.length; i++) {
      expect(sweep.points[i]!.objective).toBeGreaterThanOrEqual(
        sweep.points[i - 1]!.objective,
      );
    }
  });
});

describe("what-if control loop", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("debounces a drag into a single solve request", async () => {
    const solves: SolveRequest[] = [];
    const { controller } = makeController({ onSolve: (r) => solves.push(r) });
    await controller.selectDataset("mock");
    const before = solves.length;
    for (let budget = 1; budget <= 5; budget++) {
      controller.update({ budget });
      vi.advanceTimersByTime(100); // faster than the 300 ms debounce
    }
    await vi.advanceTimersByTimeAsync(300);
    expect(solves.length).toBe(before + 1);
    expect(solves.at(-1)!.budget).toBe(5);
  });

  it("latest-wins: a stale in-flight solve never overwrites a newer result", async () => {
    vi.useRealTimers();
    let release: (() => void) | null = null;
    let delayNext = false;
    const { controller, captured } = makeController({
      beforeSolve: async () => {
        if (delayNext) {
          delayNext = false;
          await new Promise<void>((resolve) => (release = resolve));
        }
      },
    });
    await controller.selectDataset("mock");
    delayNext = true;
    controller.state.budget = 2;
    const slow = controller.solveNow(); // stalls inside the mock service
    controller.state.budget = 4;
    const fast = controller.solveNow();
    await fast;
    release!();
    await slow;
    const lastShown = captured.taxonomies.at(-1)!;
    expect(lastShown.request.budget).toBe(4);
    expect(controller.state.lastTaxonomy!.config.budget).toBe(4);
  });

  it("surfaces infeasible budgets as inline errors without clearing state", async () => {
    vi.useRealTimers();
    const { controller, captured } = makeController();
    await controller.selectDataset("mock");
    const good = controller.state.lastTaxonomy;
    controller.state.budget = 0.25;
    await controller.solveNow();
    expect(captured.errors.at(-1)).toContain("INFEASIBLE");
    expect(controller.state.lastTaxonomy).toBe(good);
  });

  it("pin-and-compare diffs come from two service payloads", async () => {
    vi.useRealTimers();
    const { controller, captured } = makeController();
    await controller.selectDataset("mock");
    controller.state.budget = 1;
    await controller.solveNow();
    controller.pinCurrent();
    controller.state.budget = 4;
    await controller.solveNow();
    const changes = captured.comparisons.at(-1) as { target: string }[];
    expect(Array.isArray(changes)).toBe(true);
    expect(changes.length).toBeGreaterThan(0);
    // the comparison slot holds exactly one pinned result
    expect(controller.state.pinned!.request.budget).toBe(1);
  });

  it("clamps control values to metadata bounds before solving", async () => {
    vi.useRealTimers();
    const solves: SolveRequest[] = [];
    const { controller } = makeController({ onSolve: (r) => solves.push(r) });
    await controller.selectDataset("mock");
    controller.update({ budget: 999, maxOrder: 9 });
    await controller.solveNow();
    expect(solves.at(-1)!.budget).toBe(5);
    expect(solves.at(-1)!.max_order).toBe(2);
  });
});
