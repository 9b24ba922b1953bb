/** DOM wiring for the operator console; all behavior lives in model/client. */

import { ApiClient, ApiError } from "./client.js";
import { LineChart, renderSparkline, type Series } from "./charts.js";
import { DashboardModel, SETPOINT_MAX_C, SETPOINT_MIN_C } from "./model.js";
import type { Params, PresetEntry } from "./types.js";

function apiBase(): string {
  const override = new URLSearchParams(location.search).get("api");
  if (override) return override.replace(/\/$/, "");
  return location.origin;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function fmt(value: number | null | undefined, digits = 3): string {
  return value === null || value === undefined ? "--" : value.toFixed(digits);
}

function paramsRow(label: string, p: Params | null): string {
  if (!p) return `<tr><td>${label}</td><td colspan="4">--</td></tr>`;
  return `<tr><td>${label}</td><td>${p.alpha.toFixed(4)}</td>` +
    `<td>${p.r.toFixed(3)}</td><td>${p.k.toFixed(4)}</td><td>${p.c.toFixed(2)}</td></tr>`;
}

async function start(): Promise<void> {
  const client = new ApiClient(apiBase());
  const model = new DashboardModel();

  const banner = el<HTMLDivElement>("banner");
  const tempChart = new LineChart(el<HTMLCanvasElement>("chart-temp"));
  const dutyChart = new LineChart(el<HTMLCanvasElement>("chart-duty"));
  const sparkline = el<HTMLCanvasElement>("ga-sparkline");
  const message = el<HTMLDivElement>("message");

  let presets: PresetEntry[] = [];
  try {
    presets = (await client.presets()).presets;
  } catch {
    /* presets are decorative; the console still works without them */
  }

  function note(text: string, isError = false): void {
    message.textContent = text;
    message.className = isError ? "message error" : "message";
  }

  function render(): void {
    banner.textContent = model.connection === "live"
      ? `live - ${model.totalPairs} samples`
      : model.connection;
    banner.className = `banner ${model.connection}`;

    const pairs = model.pairs;
    const temps: Series[] = [
      { label: "plant y", color: "#ffa94d", points: pairs.map((p) => ({ x: p.t, y: p.y })) },
      { label: "twin y", color: "#68b7ff", points: pairs.map((p) => ({ x: p.t, y: p.y_twin })) },
      { label: "setpoint", color: "#8ce99a", dashed: true, points: pairs.map((p) => ({ x: p.t, y: p.setpoint })) },
    ];
    if (model.overlay && pairs.length) {
      const t0 = pairs[pairs.length - 1]!.t;
      temps.push({
        label: "offline what-if", color: "#e599f7", dashed: true,
        points: model.overlay.map((s) => ({ x: t0 + s.t, y: s.y })),
      });
    }
    tempChart.render(temps, "degC");
    dutyChart.render([
      { label: "u plant", color: "#ffa94d", points: pairs.map((p) => ({ x: p.t, y: p.u })) },
      { label: "u twin", color: "#68b7ff", dashed: true, points: pairs.map((p) => ({ x: p.t, y: p.u_twin })) },
    ], "duty");

    const d = model.divergence;
    el("gauge-rmse").textContent = fmt(d?.rmse_y, 4);
    el("gauge-max").textContent = fmt(d?.max_abs_y, 4);
    el("gauge-samples").textContent = d ? String(d.samples) : "--";
    el("gauge-horizon").textContent = d ? `${d.horizon.toFixed(0)} s` : "--";

    const ga = model.ga;
    el("ga-state").textContent = ga.running
      ? `generation ${ga.generation}, best ${fmt(ga.best_cost, 2)}`
      : ga.best_cost !== null ? `done: best ${fmt(ga.best_cost, 2)}` : "idle";
    renderSparkline(sparkline, ga.history);
    const matchButton = el<HTMLButtonElement>("btn-match");
    const reason = model.matchDisabledReason();
    matchButton.disabled = reason !== null;
    matchButton.title = reason ?? "fit twin parameters to the recorded trace";

    const rows = [
      paramsRow("twin (current)", model.twinParams),
      paramsRow("twin (previous)", model.previousParams),
      ...presets.map((p) => paramsRow(p.name, p.params)),
    ];
    el("params-table-body").innerHTML = rows.join("");
  }

  el<HTMLFormElement>("setpoint-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const input = el<HTMLInputElement>("setpoint-input");
    const value = Number(input.value);
    const problem = model.setpointProblem(value);
    if (problem) {
      note(problem, true);
      return;
    }
    try {
      await client.submitSetpoint(value);
      model.markSetpointSent(value);
      note(`setpoint ${value} degC sent`);
    } catch (error) {
      note(error instanceof ApiError ? error.message : String(error), true);
    }
    render();
  });

  el<HTMLButtonElement>("btn-match").addEventListener("click", async () => {
    note("matching started...");
    model.ga = { ...model.ga, running: true, history: [] };
    render();
    try {
      const result = await client.match();
      note(`matching finished: cost ${result.best_cost.toFixed(2)} after ` +
        `${result.evaluations} evaluations; parameters swapped`);
    } catch (error) {
      model.ga = { ...model.ga, running: false };
      note(error instanceof ApiError ? error.message : String(error), true);
    }
    render();
  });

  el<HTMLFormElement>("offline-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const value = Number(el<HTMLInputElement>("offline-setpoint").value);
    const duration = Number(el<HTMLInputElement>("offline-duration").value);
    const problem = model.setpointProblem(value);
    if (problem) {
      note(problem, true);
      return;
    }
    try {
      const run = await client.offlineRun({ kind: "constant", value }, duration);
      model.setOverlay(run.samples);
      note(`offline run: ${run.samples.length} samples overlaid`);
    } catch (error) {
      note(error instanceof ApiError ? error.message : String(error), true);
    }
    render();
  });

  el<HTMLButtonElement>("btn-clear-overlay").addEventListener("click", () => {
    model.setOverlay(null);
    render();
  });

  const controller = new AbortController();
  void client.streamLoop(
    {
      onEvent: (event) => {
        model.apply(event);
        render();
      },
      onConnected: () => {
        model.setConnection("live");
        render();
      },
      onDisconnected: () => {
        model.setConnection("disconnected");
        render();
      },
    },
    controller.signal,
  );

  // status poll fills gauges and reconciles parameters every few ticks
  setInterval(async () => {
    try {
      model.applyStatus(await client.status());
      render();
    } catch {
      /* stream handler already flags disconnects */
    }
  }, 2000);

  el("setpoint-band").textContent =
    `safe band ${SETPOINT_MIN_C} to ${SETPOINT_MAX_C} degC`;
  render();
}

window.addEventListener("load", () => {
  void start();
});
