import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import {
  Debouncer,
  LatestWins,
  budgetBounds,
  buildRequest,
  clampToMetadata,
  diffPolicies,
  initialState,
  sweepIsMonotone,
} from "../src/state.ts";
import { MOCK_META, mockSolve } from "./helpers.ts";

describe("Debouncer", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("coalesces rapid calls into one trailing invocation", () => {
    const debouncer = new Debouncer(300);
    const fn = vi.fn();
    debouncer.schedule(fn);
    vi.advanceTimersByTime(150);
    debouncer.schedule(fn);
    vi.advanceTimersByTime(150);
    debouncer.schedule(fn);
    expect(fn).not.toHaveBeenCalled();
    vi.advanceTimersByTime(300);
    expect(fn).toHaveBeenCalledTimes(1);
  });

  it("can be cancelled", () => {
    const debouncer = new Debouncer(300);
    const fn = vi.fn();
    debouncer.schedule(fn);
    debouncer.cancel();
    vi.advanceTimersByTime(1000);
    expect(fn).not.toHaveBeenCalled();
  });
});

describe("LatestWins", () => {
  it("discards superseded results and aborts their signals", async () => {
    const slot = new LatestWins();
    let firstSignal: AbortSignal | null = null;
    let releaseFirst: (() => void) | null = null;
    const first = slot.run(async (signal) => {
      firstSignal = signal;
      await new Promise<void>((resolve) => (releaseFirst = resolve));
      return "first";
    });
    const second = slot.run(async () => "second");
    expect(await second).toBe("second");
    expect(firstSignal!.aborted).toBe(true);
    releaseFirst!();
    expect(await first).toBeUndefined();
  });

  it("propagates errors only for the live request", async () => {
    const slot = new LatestWins();
    await expect(
      slot.run(async () => {
        throw new Error("boom");
      }),
    ).rejects.toThrow("boom");
  });
});

describe("clampToMetadata", () => {
  it("clamps budget and order into server bounds", () => {
    const state = { ...initialState(), budget: 99, maxOrder: 7 };
    const clamped = clampToMetadata(state, MOCK_META);
    expect(clamped.budget).toBe(budgetBounds(MOCK_META).max);
    expect(clamped.maxOrder).toBe(2);
    expect(clamped.datasetId).toBe("mock");
  });

  it("drops weight overrides for unknown tasks", () => {
    const state = {
      ...initialState(),
      importance: { t1: 2, ghost: 3 },
      costs: { s0: 0.5, phantom: 2 },
    };
    const clamped = clampToMetadata(state, MOCK_META);
    expect(clamped.importance).toEqual({ t1: 2 });
    expect(clamped.costs).toEqual({ s0: 0.5 });
  });

  it("buildRequest mirrors the state", () => {
    const state = { ...initialState(), budget: 2, maxOrder: 2 };
    expect(buildRequest(state)).toEqual({
      budget: 2,
      max_order: 2,
      importance: {},
      costs: {},
      cost_mode: "nodes",
    });
  });
});

describe("diffPolicies", () => {
  it("reports only targets whose sources changed", () => {
    const a = mockSolve({ budget: 1, max_order: 1, importance: {}, costs: {}, cost_mode: "nodes" });
    const b = mockSolve({ budget: 3, max_order: 1, importance: {}, costs: {}, cost_mode: "nodes" });
    const changes = diffPolicies(a, b);
    expect(changes.length).toBeGreaterThan(0);
    for (const change of changes) {
      expect(change.before?.join("+")).not.toBe(change.after?.join("+"));
    }
    expect(diffPolicies(a, a)).toEqual([]);
  });
});

describe("sweepIsMonotone", () => {
  it("accepts non-decreasing curves and rejects dips", () => {
    expect(
      sweepIsMonotone([
        { budget: 1, objective: 0.5 },
        { budget: 2, objective: 0.5 },
        { budget: 3, objective: 0.9 },
      ]),
    ).toBe(true);
    expect(
      sweepIsMonotone([
        { budget: 1, objective: 0.5 },
        { budget: 2, objective: 0.4 },
      ]),
    ).toBe(false);
  });
});
