/** Inspector panel: shows the exact request behind the displayed taxonomy
 * so any result is traceable and replayable against the service. */

import type { SolveRequest, TaxonomyPayload } from "./api.ts";

export interface InspectorEntry {
  datasetId: string;
  request: SolveRequest;
  payload: TaxonomyPayload;
}

export function renderInspector(
  doc: Document,
  entry: InspectorEntry,
  onReplay?: (entry: InspectorEntry) => void,
): HTMLElement {
  const panel = doc.createElement("section");
  panel.className = "inspector";

  const heading = doc.createElement("h3");
  heading.textContent = "Request inspector";
  panel.appendChild(heading);

  const dataset = doc.createElement("p");
  dataset.className = "inspector-dataset";
  dataset.textContent = `dataset: ${entry.datasetId}`;
  panel.appendChild(dataset);

  const pre = doc.createElement("pre");
  pre.className = "inspector-request";
  pre.textContent = JSON.stringify(entry.request, Object.keys(entry.request).sort(), 2);
  panel.appendChild(pre);

  const stats = doc.createElement("p");
  stats.className = "inspector-stats";
  stats.textContent =
    `objective ${entry.payload.objective.toFixed(6)} | ` +
    `${Object.keys(entry.payload.policy).length} targets | ` +
    `${entry.payload.stats.nodes_explored} solver nodes`;
  panel.appendChild(stats);

  const replay = doc.createElement("button");
  replay.type = "button";
  replay.className = "inspector-replay";
  replay.textContent = "Replay request";
  replay.addEventListener("click", () => onReplay?.(entry));
  panel.appendChild(replay);

  return panel;
}

/** Parse the request back out of a rendered inspector panel. Tests use
 * this to prove the displayed parameters reproduce the displayed result. */
export function requestShownIn(panel: HTMLElement): SolveRequest {
  const pre = panel.querySelector(".inspector-request");
  if (!pre || !pre.textContent) throw new Error("inspector shows no request");
  return JSON.parse(pre.textContent) as SolveRequest;
}
