/** Browser entry point: builds the control panel from dataset metadata and
 * wires it to the controller. Service origin defaults to same-origin and
 * can be overridden with ?api=http://host:port. */

import { SolverClient } from "./api.ts";
import type { DatasetMeta, SolveRequest, TaxonomyPayload } from "./api.ts";
import { ExplorerController } from "./controller.ts";
import { renderInspector } from "./inspector.ts";
import { renderSweep, renderTaxonomy } from "./render.ts";
import { budgetBounds } from "./state.ts";
import type { PolicyChange, SweepPoint } from "./state.ts";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function mount(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const apiBase =
    new URLSearchParams(window.location.search).get("api") ?? window.location.origin;
  const client = new SolverClient(apiBase);

  const controls = el("aside", { class: "controls" });
  const graphPane = el("main", { class: "graph-pane" });
  const sidePane = el("aside", { class: "side-pane" });
  const errorBox = el("div", { class: "banner banner-error hidden", role: "alert" });
  const hoverBox = el("div", { class: "hover-detail" });
  const graphBox = el("div", { class: "graph-box" });
  const sweepBox = el("div", { class: "sweep-box" });
  const compareBox = el("div", { class: "compare-box" });
  const inspectorBox = el("div", { class: "inspector-box" });
  graphPane.append(errorBox, graphBox, hoverBox);
  sidePane.append(sweepBox, compareBox, inspectorBox);
  root.append(controls, graphPane, sidePane);

  const views = {
    showTaxonomy(payload: TaxonomyPayload, request: SolveRequest, datasetId: string) {
      graphBox.replaceChildren(
        renderTaxonomy(document, payload, {
          onHoverTarget: (target) => {
            if (target === null) {
              hoverBox.textContent = "";
              return;
            }
            const entry = payload.policy[target]!;
            hoverBox.textContent =
              `${target} ← ${entry.sources.join(" + ")}  ` +
              `(order ${entry.order}, p = ${entry.p.toFixed(4)})`;
          },
        }),
      );
      inspectorBox.replaceChildren(
        renderInspector(document, { datasetId, request, payload }, (entry) => {
          controller.update({ ...controller.state, ...fromRequest(entry.request) });
        }),
      );
    },
    showError(message: string | null) {
      errorBox.classList.toggle("hidden", message === null);
      errorBox.textContent = message ?? "";
    },
    showComparison(changes: PolicyChange[] | null) {
      compareBox.replaceChildren();
      if (changes === null) return;
      compareBox.appendChild(el("h3", {}, "Pinned vs current"));
      if (changes.length === 0) {
        compareBox.appendChild(el("p", {}, "identical policies"));
        return;
      }
      const list = el("ul", { class: "diff-list" });
      for (const change of changes) {
        list.appendChild(
          el(
            "li",
            {},
            `${change.target}: ${change.before?.join("+") ?? "—"} → ` +
              `${change.after?.join("+") ?? "—"}`,
          ),
        );
      }
      compareBox.appendChild(list);
    },
    showSweep(points: SweepPoint[], monotone: boolean) {
      sweepBox.replaceChildren(el("h3", {}, "Objective vs budget"));
      sweepBox.appendChild(renderSweep(document, points));
      if (!monotone) {
        sweepBox.appendChild(
          el("p", { class: "banner banner-error" }, "warning: curve is not monotone"),
        );
      }
    },
    showMetadata(meta: DatasetMeta) {
      buildControls(meta);
    },
  };

  const controller = new ExplorerController(client, views);

  function fromRequest(request: SolveRequest) {
    return {
      budget: request.budget,
      maxOrder: request.max_order,
      importance: { ...request.importance },
      costs: { ...request.costs },
      costMode: request.cost_mode,
    };
  }

  function buildControls(meta: DatasetMeta): void {
    controls.replaceChildren();
    controls.appendChild(el("h2", {}, "What-if controls"));

    const { min, max } = budgetBounds(meta);
    const budgetLabel = el("label", {}, `budget: ${controller.state.budget}`);
    const budget = el("input", {
      type: "range",
      min: String(min),
      max: String(max),
      step: "1",
      value: String(controller.state.budget),
    });
    budget.addEventListener("input", () => {
      budgetLabel.textContent = `budget: ${budget.value}`;
      controller.update({ budget: Number(budget.value) });
    });
    controls.append(budgetLabel, budget);

    const orderLabel = el("label", {}, "max transfer order");
    const order = el("select", {});
    for (const o of meta.orders) {
      const option = el("option", { value: String(o) }, String(o));
      if (o === controller.state.maxOrder) option.selected = true;
      order.appendChild(option);
    }
    order.addEventListener("change", () =>
      controller.update({ maxOrder: Number(order.value) }),
    );
    controls.append(orderLabel, order);

    const modeLabel = el("label", {}, "cost mode");
    const mode = el("select", {});
    for (const m of ["nodes", "edges"] as const) {
      const option = el("option", { value: m }, m);
      if (m === controller.state.costMode) option.selected = true;
      mode.appendChild(option);
    }
    mode.addEventListener("change", () =>
      controller.update({ costMode: mode.value as "nodes" | "edges" }),
    );
    controls.append(modeLabel, mode);

    const weights = el("details", { class: "weights" });
    weights.appendChild(el("summary", {}, "importance / cost overrides"));
    for (const task of meta.tasks) {
      const row = el("div", { class: "weight-row" });
      row.appendChild(el("span", { class: "weight-name" }, task.name));
      if (task.target) {
        const imp = el("input", {
          type: "number",
          step: "0.1",
          min: "0.1",
          placeholder: "1",
          title: `importance of ${task.name}`,
        });
        imp.addEventListener("change", () =>
          controller.setImportance(task.name, imp.value ? Number(imp.value) : null),
        );
        row.appendChild(imp);
      }
      if (task.source) {
        const cost = el("input", {
          type: "number",
          step: "0.1",
          min: "0.1",
          placeholder: "1",
          title: `label cost of ${task.name}`,
        });
        cost.addEventListener("change", () =>
          controller.setCost(task.name, cost.value ? Number(cost.value) : null),
        );
        row.appendChild(cost);
      }
      weights.appendChild(row);
    }
    controls.appendChild(weights);

    const pin = el("button", { type: "button" }, "Pin for comparison");
    pin.addEventListener("click", () => controller.pinCurrent());
    const clear = el("button", { type: "button" }, "Clear pin");
    clear.addEventListener("click", () => controller.clearPin());
    const sweep = el("button", { type: "button" }, "Run budget sweep");
    sweep.addEventListener("click", () => void controller.runSweep());
    controls.append(pin, clear, sweep);
  }

  void (async () => {
    const datasets = await client.listDatasets();
    const picker = el("select", { class: "dataset-picker" });
    for (const ds of datasets) {
      picker.appendChild(el("option", { value: ds.id }, ds.id));
    }
    picker.addEventListener("change", () => void controller.selectDataset(picker.value));
    const header = document.getElementById("dataset-slot");
    header?.appendChild(picker);
    if (datasets.length > 0) await controller.selectDataset(datasets[0]!.id);
  })();
}

mount();
