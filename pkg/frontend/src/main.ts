// Page wiring: poll-free live floor from the event stream, charts from
// /metrics, what-if panel with local preference slider and guarded enact.

import { ApiClient } from "./api.js";
import { histogramSvg, paretoScatterSvg, serviceLineSvg } from "./charts.js";
import { buildMarkers, StaleTracker } from "./floor.js";
import { StateView, WhatIfResultSet } from "./model.js";
import { buildParetoView, preferenceFromSlider } from "./pareto.js";
import { EventStream } from "./stream.js";

const api = new ApiClient("");
const stale = new StaleTracker();

let lastState: StateView | null = null;
let lastAnalysis: WhatIfResultSet | null = null;
let idOrder: string[] = [];
let sliderWP = 0.5;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function drawFloor(state: StateView): void {
  const canvas = el<HTMLCanvasElement>("floor");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const sx = canvas.width / 96;
  const sy = canvas.height / 64;
  for (const m of buildMarkers(state)) {
    ctx.beginPath();
    if (m.kind === "amr") {
      ctx.fillStyle = m.stopped ? "#d33" : "#2a6fdb";
      ctx.fillRect(m.x * sx - 4, m.y * sy - 4, 8, 8);
      if (m.stopped) {
        ctx.strokeStyle = "#d33";
        ctx.strokeRect(m.x * sx - 6, m.y * sy - 6, 12, 12);
      }
    } else {
      ctx.fillStyle = "#1a9e4b";
      ctx.arc(m.x * sx, m.y * sy, 4, 0, Math.PI * 2);
      ctx.fill();
    }
  }
  el("clock").textContent = `t=${state.clock.t.toFixed(1)}s  ` +
    `rule y=${state.active_rule.slow_radius_y}  ` +
    `queued=${state.orders.queued} done=${state.orders.completed}`;
}

function refreshStaleBadge(): void {
  el("stale").style.display = stale.isStale(Date.now()) ? "inline" : "none";
}

async function refreshCharts(): Promise<void> {
  const m = await api.metrics(1200);
  el("service-chart").innerHTML = serviceLineSvg(m.completions.t, m.completions.avg_service_time);
  const bins = new Array(20).fill(0);
  for (const v of m.safety_min) {
    if (v < 1) bins[Math.min(19, Math.floor(v / 0.05))] += 1;
  }
  el("histogram").innerHTML = histogramSvg(bins);
}

function renderPareto(): void {
  if (!lastAnalysis || !lastAnalysis.results) return;
  const pref = preferenceFromSlider(sliderWP);
  const view = buildParetoView(lastAnalysis.results, pref, idOrder);
  el("pareto").innerHTML = paretoScatterSvg(view.points, view.highlightedId);
  el("slider-label").textContent =
    `w_p=${pref.wP.toFixed(2)} w_s=${pref.wS.toFixed(2)}` +
    (view.highlightedId ? `  preferred: ${view.highlightedId}` : "");
  const button = el<HTMLButtonElement>("enact");
  button.disabled = view.highlightedId === null;
  button.dataset.alt = view.highlightedId ?? "";
}

async function runWhatIf(): Promise<void> {
  const button = el<HTMLButtonElement>("run-whatif");
  button.disabled = true;
  try {
    const { analysis_id } = await api.startWhatIf(600, 5);
    for (;;) {
      const res = await api.whatIfResult(analysis_id);
      if (res.status === "done") {
        lastAnalysis = res;
        break;
      }
      if (res.status === "failed") throw new Error("analysis failed");
      await new Promise((resolve) => setTimeout(resolve, 500));
    }
    renderPareto();
  } catch (err) {
    el("toast").textContent = String(err);
  } finally {
    button.disabled = false;
  }
}

async function enact(): Promise<void> {
  if (!lastAnalysis) return;
  const alt = el<HTMLButtonElement>("enact").dataset.alt;
  if (!alt) return;
  if (!window.confirm(`Apply ${alt} to the running floor?`)) return;
  await api.enact(alt, lastAnalysis.analysis_id);
  el("toast").textContent = `enacted ${alt}`;
}

export function boot(): void {
  const stream = new EventStream(
    "/events",
    (url, onMessage, onError) => {
      const es = new EventSource(url);
      es.onmessage = (e) => onMessage(e.data);
      es.onerror = () => onError();
      return { close: () => es.close() };
    },
    (data) => {
      stale.observe(Date.now());
      const msg = JSON.parse(data);
      if (msg.type === "tick") {
        lastState = msg.state as StateView;
        drawFloor(lastState);
      } else if (msg.type === "enactment") {
        el("toast").textContent = `rule enacted: ${msg.alternative_id}`;
      }
    },
  );
  stream.start();
  setInterval(refreshStaleBadge, 500);
  setInterval(refreshCharts, 2000);
  void api.alternatives().then((alts) => {
    idOrder = alts.map((a) => a.id);
  });
  el<HTMLInputElement>("slider").addEventListener("input", (e) => {
    sliderWP = Number((e.target as HTMLInputElement).value);
    renderPareto();
    void api.setPreference(1 - sliderWP, sliderWP);
  });
  el("run-whatif").addEventListener("click", () => void runWhatIf());
  el("enact").addEventListener("click", () => void enact());
  el("pause").addEventListener("click", () => void api.control("pause"));
  el("resume").addEventListener("click", () => void api.control("resume"));
}

if (typeof document !== "undefined" && document.getElementById("floor")) {
  boot();
}
