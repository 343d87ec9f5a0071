/** SVG rendering of taxonomy payloads and the budget-sweep curve.
 *
 * Fan-in convention: a target's chosen hyperedge is drawn as one edge per
 * source converging on the target, so the number of incoming edges equals
 * the transfer order. Source-only tasks are dimmed; selected sources get a
 * highlight ring. Rendering is a pure function of the payload.
 */

import type { TaxonomyPayload } from "./api.ts";
import { radialLayout, type NodePosition } from "./layout.ts";
import type { SweepPoint } from "./state.ts";

const SVG_NS = "http://www.w3.org/2000/svg";
export const SUPPORTED_FORMAT_VERSION = 1;

export interface RenderOptions {
  width?: number;
  height?: number;
  onHoverTarget?: (target: string | null, payload: TaxonomyPayload) => void;
}

function svgElement<K extends keyof SVGElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = doc.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) el.setAttribute(key, value);
  return el;
}

export function versionMismatchBanner(doc: Document, version: number): HTMLElement {
  const banner = doc.createElement("div");
  banner.className = "banner banner-error";
  banner.setAttribute("role", "alert");
  banner.textContent =
    `Payload format_version ${version} is not supported ` +
    `(expected ${SUPPORTED_FORMAT_VERSION}); refusing to render.`;
  return banner;
}

export function renderTaxonomy(
  doc: Document,
  payload: TaxonomyPayload,
  options: RenderOptions = {},
): Element {
  if (payload.format_version !== SUPPORTED_FORMAT_VERSION) {
    return versionMismatchBanner(doc, payload.format_version);
  }
  const width = options.width ?? 640;
  const height = options.height ?? 480;
  const layout = radialLayout(payload.tasks, { width, height });
  const selected = new Set(payload.sources);

  const svg = svgElement(doc, "svg", {
    viewBox: `0 0 ${width} ${height}`,
    width: String(width),
    height: String(height),
    class: "taxonomy-graph",
  });

  const edgeGroup = svgElement(doc, "g", { class: "edges" });
  for (const target of Object.keys(payload.policy).sort()) {
    const entry = payload.policy[target]!;
    const to = layout.get(target);
    if (!to) continue;
    for (const source of entry.sources) {
      const from = layout.get(source);
      if (!from) continue;
      const line = svgElement(doc, "line", {
        x1: from.x.toFixed(2),
        y1: from.y.toFixed(2),
        x2: to.x.toFixed(2),
        y2: to.y.toFixed(2),
        class: `edge order-${entry.order}`,
        "data-target": target,
        "data-source": source,
        "data-p": String(entry.p),
      });
      if (source === target) line.setAttribute("class", `edge order-1 self-loop`);
      edgeGroup.appendChild(line);
    }
  }
  svg.appendChild(edgeGroup);

  const nodeGroup = svgElement(doc, "g", { class: "nodes" });
  const roleByName = new Map(payload.tasks.map((t) => [t.name, t]));
  for (const [name, pos] of [...layout.entries()].sort(([a], [b]) =>
    a.localeCompare(b),
  )) {
    const role = roleByName.get(name);
    const classes = ["node"];
    if (role && role.source && !role.target) classes.push("dimmed"); // source-only
    if (selected.has(name)) classes.push("selected-source");
    const group = svgElement(doc, "g", {
      class: classes.join(" "),
      "data-task": name,
      transform: `translate(${pos.x.toFixed(2)}, ${pos.y.toFixed(2)})`,
    });
    group.appendChild(svgElement(doc, "circle", { r: "14" }));
    const label = svgElement(doc, "text", { dy: "26", "text-anchor": "middle" });
    label.textContent = name;
    group.appendChild(label);
    const entry = payload.policy[name];
    const title = doc.createElementNS(SVG_NS, "title");
    title.textContent = entry
      ? `${name} ← ${entry.sources.join(" + ")} (p = ${entry.p.toFixed(4)})`
      : `${name} (source)`;
    group.appendChild(title);
    if (options.onHoverTarget && entry) {
      group.addEventListener("mouseenter", () =>
        options.onHoverTarget!(name, payload),
      );
      group.addEventListener("mouseleave", () => options.onHoverTarget!(null, payload));
    }
    nodeGroup.appendChild(group);
  }
  svg.appendChild(nodeGroup);

  const caption = svgElement(doc, "text", {
    x: "12",
    y: "20",
    class: "objective-caption",
  });
  caption.textContent = `objective = ${payload.objective.toFixed(6)}  budget = ${payload.config.budget}`;
  svg.appendChild(caption);
  return svg;
}

export interface SweepRenderOptions {
  width?: number;
  height?: number;
}

/** Objective-versus-budget polyline; larger objectives sit higher. */
export function renderSweep(
  doc: Document,
  points: SweepPoint[],
  options: SweepRenderOptions = {},
): SVGSVGElement {
  const width = options.width ?? 420;
  const height = options.height ?? 180;
  const pad = 28;
  const svg = svgElement(doc, "svg", {
    viewBox: `0 0 ${width} ${height}`,
    width: String(width),
    height: String(height),
    class: "sweep-curve",
  });
  const ordered = [...points].sort((p, q) => p.budget - q.budget);
  if (ordered.length === 0) return svg;
  const budgets = ordered.map((p) => p.budget);
  const objectives = ordered.map((p) => p.objective);
  const bMin = Math.min(...budgets);
  const bMax = Math.max(...budgets);
  const oMin = Math.min(...objectives, 0);
  const oMax = Math.max(...objectives);
  const sx = (b: number) =>
    pad + ((b - bMin) / Math.max(bMax - bMin, 1e-12)) * (width - 2 * pad);
  const sy = (o: number) =>
    height - pad - ((o - oMin) / Math.max(oMax - oMin, 1e-12)) * (height - 2 * pad);
  const path = ordered
    .map((p, i) => `${i === 0 ? "M" : "L"}${sx(p.budget).toFixed(2)},${sy(p.objective).toFixed(2)}`)
    .join(" ");
  svg.appendChild(
    svgElement(doc, "path", { d: path, class: "sweep-line", fill: "none" }),
  );
  for (const p of ordered) {
    svg.appendChild(
      svgElement(doc, "circle", {
        cx: sx(p.budget).toFixed(2),
        cy: sy(p.objective).toFixed(2),
        r: "3",
        class: "sweep-point",
        "data-budget": String(p.budget),
        "data-objective": String(p.objective),
      }),
    );
  }
  return svg;
}
