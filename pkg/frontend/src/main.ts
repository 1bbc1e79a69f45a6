/**
 * DOM wiring for the viewer page: inputs, layer toggles, stats panel,
 * and the interactive 3D canvas (Plotly loaded from CDN in index.html).
 */

import { exportHtml } from "./export";
import {
  LAYER_NAMES,
  ViewerState,
  canSubmit,
  initialState,
  submit,
  toggleLayer,
  traceVisibility,
} from "./state";

declare const Plotly: {
  react: (el: HTMLElement, data: unknown[], layout: unknown) => Promise<unknown>;
};

let state: ViewerState = initialState(
  (document.querySelector<HTMLInputElement>("#base-url")?.value ?? "").trim() ||
    "http://127.0.0.1:8000",
);

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el;
}

function render(): void {
  const submitBtn = $("submit") as HTMLButtonElement;
  const exportBtn = $("export") as HTMLButtonElement;
  const statusEl = $("status");
  const statsEl = $("stats");
  const hint = $("hint");

  submitBtn.disabled = !canSubmit(state);
  exportBtn.disabled = state.status.kind !== "ready";
  hint.textContent =
    state.apiKey.trim() && state.place.trim()
      ? ""
      : "Enter an OpenTopography API key and a place name.";

  switch (state.status.kind) {
    case "idle":
      statusEl.textContent = "";
      break;
    case "loading":
      statusEl.textContent = "Generating 3D model…";
      break;
    case "error":
      statusEl.textContent = state.status.stage
        ? `Error in stage ${state.status.stage}: ${state.status.message} (retry when ready)`
        : `Error: ${state.status.message} (retry when ready)`;
      break;
    case "ready":
      statusEl.textContent = "Ready — drag to rotate, scroll to zoom.";
      break;
  }

  statsEl.textContent = state.statsLine ?? "";

  for (const name of LAYER_NAMES) {
    const box = document.querySelector<HTMLInputElement>(
      `input[data-layer="${name}"]`,
    );
    if (box) {
      box.checked = state.layerVisibility[name];
      box.disabled = state.status.kind !== "ready";
    }
  }

  drawScene();
}

function drawScene(): void {
  const plot = $("plot");
  if (!state.figure) {
    plot.replaceChildren();
    return;
  }
  const visible = traceVisibility(state);
  // visibility is applied per trace; geometry is never mutated
  const data = state.figure.data.map((trace, i) => ({
    ...trace,
    visible: visible[i] ? true : "legendonly",
  }));
  void Plotly.react(plot, data, state.figure.layout ?? {});
}

async function onSubmit(): Promise<void> {
  const before = state;
  state = { ...before, status: { kind: "loading" } };
  render();
  state = await submit(before, fetch.bind(window));
  render();
}

function onExport(): void {
  if (!state.figureRaw) {
    return;
  }
  const page = exportHtml(state.figureRaw, state.place || "3D urban energy model");
  const blob = new Blob([page], { type: "text/html" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = `${state.place || "model"}.html`;
  a.click();
  URL.revokeObjectURL(a.href);
}

function bind(): void {
  ($("api-key") as HTMLInputElement).addEventListener("input", (e) => {
    state = { ...state, apiKey: (e.target as HTMLInputElement).value };
    render();
  });
  ($("place") as HTMLInputElement).addEventListener("input", (e) => {
    state = { ...state, place: (e.target as HTMLInputElement).value };
    render();
  });
  ($("base-url") as HTMLInputElement).addEventListener("input", (e) => {
    state = { ...state, baseUrl: (e.target as HTMLInputElement).value };
  });
  $("submit").addEventListener("click", () => void onSubmit());
  $("export").addEventListener("click", onExport);
  for (const box of document.querySelectorAll<HTMLInputElement>("input[data-layer]")) {
    box.addEventListener("change", () => {
      state = toggleLayer(state, box.dataset.layer ?? "");
      render();
    });
  }
  render();
}

bind();
