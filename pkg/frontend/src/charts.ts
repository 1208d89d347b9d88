// Hand-rolled SVG builders: a service-time line, a safety histogram and the
// Pareto scatter. No chart library; the payloads are small and the shapes
// simple. Each builder returns an SVG string the page injects.

import { WhatIfRow } from "./model.js";

const W = 420;
const H = 180;
const PAD = 32;

function scale(v: number, lo: number, hi: number, a: number, b: number): number {
  if (hi <= lo) return a;
  return a + ((v - lo) / (hi - lo)) * (b - a);
}

export function serviceLineSvg(t: number[], avg: number[]): string {
  if (t.length === 0) return `<svg width="${W}" height="${H}"></svg>`;
  const tLo = t[0];
  const tHi = t[t.length - 1];
  const vHi = Math.max(...avg, 1);
  const pts = t
    .map((ti, i) => `${scale(ti, tLo, tHi, PAD, W - 8).toFixed(1)},` +
      `${scale(avg[i], 0, vHi, H - PAD, 8).toFixed(1)}`)
    .join(" ");
  return (
    `<svg width="${W}" height="${H}" class="chart">` +
    `<line x1="${PAD}" y1="${H - PAD}" x2="${W - 8}" y2="${H - PAD}" class="axis"/>` +
    `<line x1="${PAD}" y1="8" x2="${PAD}" y2="${H - PAD}" class="axis"/>` +
    `<polyline points="${pts}" fill="none" class="series"/>` +
    `<text x="${PAD}" y="${H - 8}" class="label">service time (max ${vHi.toFixed(0)}s)</text>` +
    `</svg>`
  );
}

export function histogramSvg(counts: number[], binWidth = 0.05): string {
  const maxC = Math.max(...counts, 1);
  const barW = (W - PAD - 8) / counts.length;
  let bars = "";
  counts.forEach((c, i) => {
    const h = scale(c, 0, maxC, 0, H - PAD - 8);
    const x = PAD + i * barW;
    bars += `<rect x="${x.toFixed(1)}" y="${(H - PAD - h).toFixed(1)}" ` +
      `width="${(barW - 1).toFixed(1)}" height="${h.toFixed(1)}" class="bar"/>`;
  });
  return (
    `<svg width="${W}" height="${H}" class="chart">` +
    bars +
    `<line x1="${PAD}" y1="${H - PAD}" x2="${W - 8}" y2="${H - PAD}" class="axis"/>` +
    `<text x="${PAD}" y="${H - 8}" class="label">safety_min &lt; 1, bins of ${binWidth}</text>` +
    `</svg>`
  );
}

export function paretoScatterSvg(rows: WhatIfRow[], highlightedId: string | null): string {
  let marks = "";
  for (const r of rows) {
    const x = scale(r.productivity_score, 0, 1, PAD, W - 16);
    const y = scale(r.safety_score, 0, 1, H - PAD, 12);
    const cls = r.alternative_id === highlightedId
      ? "pt highlight"
      : r.on_pareto_front ? "pt front" : "pt";
    marks += `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="5" class="${cls}"/>` +
      `<text x="${(x + 7).toFixed(1)}" y="${(y - 6).toFixed(1)}" class="tag">` +
      `${r.alternative_id}</text>`;
  }
  return (
    `<svg width="${W}" height="${H}" class="chart">` +
    `<line x1="${PAD}" y1="${H - PAD}" x2="${W - 16}" y2="${H - PAD}" class="axis"/>` +
    `<line x1="${PAD}" y1="12" x2="${PAD}" y2="${H - PAD}" class="axis"/>` +
    `<text x="${W - 120}" y="${H - 8}" class="label">productivity</text>` +
    `<text x="4" y="16" class="label">safety</text>` +
    marks +
    `</svg>`
  );
}
