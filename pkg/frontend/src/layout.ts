/** Deterministic radial layout: targets on the rim, pure sources on an
 * inner ring. Positions depend only on the sorted task names, so the same
 * payload always renders identically. */

import type { TaskRole } from "./api.ts";

export interface NodePosition {
  name: string;
  x: number;
  y: number;
  onRim: boolean;
}

export interface LayoutOptions {
  width: number;
  height: number;
  rimRadiusFraction?: number;
  innerRadiusFraction?: number;
}

function placeOnCircle(
  names: string[],
  cx: number,
  cy: number,
  radius: number,
  onRim: boolean,
  phase: number,
): NodePosition[] {
  const sorted = [...names].sort();
  return sorted.map((name, i) => {
    const angle = phase + (2 * Math.PI * i) / Math.max(sorted.length, 1);
    return {
      name,
      x: cx + radius * Math.cos(angle),
      y: cy + radius * Math.sin(angle),
      onRim,
    };
  });
}

export function radialLayout(
  tasks: TaskRole[],
  options: LayoutOptions,
): Map<string, NodePosition> {
  const { width, height } = options;
  const cx = width / 2;
  const cy = height / 2;
  const rim = Math.min(width, height) * (options.rimRadiusFraction ?? 0.42);
  const inner = Math.min(width, height) * (options.innerRadiusFraction ?? 0.2);
  const targets = tasks.filter((t) => t.target).map((t) => t.name);
  const pureSources = tasks.filter((t) => !t.target).map((t) => t.name);
  const positions = new Map<string, NodePosition>();
  for (const p of placeOnCircle(targets, cx, cy, rim, true, -Math.PI / 2)) {
    positions.set(p.name, p);
  }
  if (pureSources.length === 1) {
    positions.set(pureSources[0]!, { name: pureSources[0]!, x: cx, y: cy, onRim: false });
  } else {
    for (const p of placeOnCircle(pureSources, cx, cy, inner, false, -Math.PI / 2 + 0.3)) {
      positions.set(p.name, p);
    }
  }
  return positions;
}
