// DOM wiring: two tabs over the wizard and zone-explorer state machines.

import { ApiClient } from "./api.js";
import { WizardMachine } from "./wizard.js";
import { rasterize, ZoneExplorer } from "./zones.js";
import { parseProcedure, renderTreeHtml } from "./tree.js";

const api = new ApiClient("");
const wizard = new WizardMachine(api);
const explorer = new ZoneExplorer(api);

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

// ---------------------------------------------------------------------------
// tabs

function showTab(name: "wizard" | "zones"): void {
  el("tab-wizard").classList.toggle("active", name === "wizard");
  el("tab-zones").classList.toggle("active", name === "zones");
  el("panel-wizard").hidden = name !== "wizard";
  el("panel-zones").hidden = name !== "zones";
  if (name === "zones" && !explorer.state.grid) void explorer.load();
}

el("tab-wizard").addEventListener("click", () => showTab("wizard"));
el("tab-zones").addEventListener("click", () => showTab("zones"));

// ---------------------------------------------------------------------------
// wizard panel

const PRESETS: Record<string, string> = {
  "screening, low risk": "0.01,0.17,0.51",
  "two samples, high risk": "0.9,0.9",
  "five samples, mixed": "0.05,0.1,0.2,0.4,0.7",
};

const presetSelect = el<HTMLSelectElement>("wizard-presets");
for (const name of Object.keys(PRESETS)) {
  const option = document.createElement("option");
  option.value = PRESETS[name];
  option.textContent = name;
  presetSelect.appendChild(option);
}
presetSelect.addEventListener("change", () => {
  if (presetSelect.value) el<HTMLInputElement>("wizard-priors").value = presetSelect.value;
});

el("wizard-start").addEventListener("click", () => {
  const text = el<HTMLInputElement>("wizard-priors").value;
  const priors = text
    .split(",")
    .map((part) => parseFloat(part.trim()))
    .filter((value) => !Number.isNaN(value));
  if (!priors.length) return;
  const strategy = el<HTMLSelectElement>("wizard-strategy").value;
  void wizard.start(priors, strategy);
});
el("wizard-negative").addEventListener("click", () => void wizard.answer("negative"));
el("wizard-positive").addEventListener("click", () => void wizard.answer("positive"));
el("wizard-reset").addEventListener("click", () => void wizard.discard());

function renderWizard(): void {
  const state = wizard.state;
  const snapshot = state.snapshot;
  el("wizard-error").textContent = state.error ?? "";
  el("panel-setup").hidden = state.phase !== "setup" && state.phase !== "error";
  el("panel-run").hidden = state.phase === "setup" || state.phase === "error";

  const chips = el("wizard-chips");
  chips.innerHTML = "";
  if (snapshot) {
    const recommended = new Set(snapshot.next_pool ?? []);
    for (let i = 1; i <= snapshot.n; i += 1) {
      const chip = document.createElement("span");
      const status = state.statuses[i - 1] ?? "unknown";
      chip.className = `chip ${status}${recommended.has(i) ? " recommended" : ""}`;
      chip.textContent = `sample ${i}`;
      chip.title = `prior ${snapshot.priors[i - 1]}, ${status}`;
      chips.appendChild(chip);
    }
    const pool = snapshot.next_pool;
    el("wizard-instruction").textContent =
      snapshot.status === "complete"
        ? `done after ${snapshot.tests_used} test${snapshot.tests_used === 1 ? "" : "s"} (individual testing needs ${snapshot.n})`
        : pool
          ? `mix samples {${pool.join(",")}} and run one test`
          : "";
    el("wizard-remaining").textContent =
      snapshot.status === "running"
        ? `expected remaining tests: ${snapshot.expected_remaining.toFixed(3)}`
        : "";
    (el("wizard-negative") as HTMLButtonElement).disabled =
      state.busy || snapshot.status !== "running";
    (el("wizard-positive") as HTMLButtonElement).disabled =
      state.busy || snapshot.status !== "running";
    el("wizard-tree").innerHTML = snapshot.remaining_tree
      ? renderTreeHtml(parseProcedure(snapshot.remaining_tree))
      : "";
  }
  const log = el("wizard-log");
  log.innerHTML = "";
  for (const line of state.log) {
    const item = document.createElement("li");
    item.textContent = line;
    log.appendChild(item);
  }
}

wizard.subscribe(renderWizard);
renderWizard();

// ---------------------------------------------------------------------------
// zone explorer panel

el<HTMLSelectElement>("zones-n").addEventListener("change", (event) => {
  const n = parseInt((event.target as HTMLSelectElement).value, 10) as 2 | 3;
  void explorer.setN(n);
});
el<HTMLSelectElement>("zones-plane").addEventListener("change", (event) => {
  void explorer.setPlane((event.target as HTMLSelectElement).value as "z" | "y" | "x" | "diag");
});
const valueSlider = el<HTMLInputElement>("zones-value");
valueSlider.addEventListener("change", () => {
  void explorer.setValue(parseFloat(valueSlider.value));
});

const canvas = el<HTMLCanvasElement>("zones-canvas");
canvas.addEventListener("click", (event) => {
  const grid = explorer.state.grid;
  if (!grid) return;
  const rect = canvas.getBoundingClientRect();
  const col = Math.floor(((event.clientX - rect.left) / rect.width) * grid[0].length);
  const rowFromTop = Math.floor(((event.clientY - rect.top) / rect.height) * grid.length);
  // the canvas draws row 0 at the bottom (probability axes grow upward)
  explorer.pick(grid.length - 1 - rowFromTop, col);
});

function renderZones(): void {
  const state = explorer.state;
  el("zones-plane-row").hidden = state.n !== 3;
  el("zones-status").textContent = state.error
    ? `error: ${state.error}`
    : state.pending
      ? `computing zone map... ${(state.pending.progress * 100).toFixed(0)}%`
      : "";
  if (state.pending) {
    window.setTimeout(() => void explorer.load(), 750);
  }
  const grid = state.grid;
  if (grid) {
    const rows = grid.length;
    const cols = grid[0].length;
    canvas.width = cols;
    canvas.height = rows;
    const context = canvas.getContext("2d")!;
    const pixels = rasterize(grid, state.outside, (id) => explorer.colorOf(id));
    const image = context.createImageData(cols, rows);
    image.data.set(pixels);
    context.putImageData(image, 0, 0);
    // probability axes grow upward: flip vertically
    context.save();
    context.globalCompositeOperation = "copy";
    context.scale(1, -1);
    context.drawImage(canvas, 0, -rows);
    context.restore();
    if (state.n === 2 && state.frontiers) {
      context.strokeStyle = "#ffffff";
      context.lineWidth = Math.max(1, rows / 256);
      for (const curve of [state.frontiers.ab, state.frontiers.ac, state.frontiers.bc]) {
        context.beginPath();
        curve.forEach(([x, y], index) => {
          const px = x * cols;
          const py = rows - y * rows;
          if (index === 0) context.moveTo(px, py);
          else context.lineTo(px, py);
        });
        context.stroke();
      }
    }
  }
  const legend = el("zones-legend");
  legend.innerHTML = "";
  for (const id of explorer.distinctIds()) {
    const item = document.createElement("li");
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.backgroundColor = explorer.colorOf(id);
    item.appendChild(swatch);
    item.appendChild(document.createTextNode(` zone ${id}`));
    item.addEventListener("click", () => {
      explorer.state = {
        ...explorer.state,
        selected: { id, procedure: explorer.state.legend[String(id)] },
      };
      renderZones();
    });
    legend.appendChild(item);
  }
  el("zones-count").textContent = grid
    ? `${explorer.distinctIds().length} zones intersect this view`
    : "";
  const selected = state.selected;
  el("zones-selected").innerHTML = selected
    ? `<h3>zone ${selected.id}</h3>` + renderTreeHtml(parseProcedure(selected.procedure))
    : "";
}

explorer.subscribe(renderZones);
renderZones();

showTab("wizard");
