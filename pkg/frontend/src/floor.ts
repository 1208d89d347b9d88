// Floor view model: marker list derived from a state payload, plus staleness
// bookkeeping for the live stream.

import { StateView } from "./model.js";

export type MarkerKind = "amr" | "worker";

export interface Marker {
  kind: MarkerKind;
  id: number;
  x: number;
  y: number;
  state: string;
  stopped: boolean; // robots held by the governor get a distinct glyph
}

export function buildMarkers(state: StateView): Marker[] {
  const markers: Marker[] = [];
  for (const a of state.amrs) {
    markers.push({
      kind: "amr",
      id: a.id,
      x: a.x,
      y: a.y,
      state: a.state,
      stopped: a.gov === "stop" && a.speed === 0,
    });
  }
  for (const w of state.workers) {
    markers.push({ kind: "worker", id: w.id, x: w.x, y: w.y, state: w.state, stopped: false });
  }
  return markers;
}

export const STALE_AFTER_MS = 2000;

/** Tracks the last message time; the view shows a stale badge past the cutoff. */
export class StaleTracker {
  private lastSeen: number | null = null;

  observe(nowMs: number): void {
    this.lastSeen = nowMs;
  }

  isStale(nowMs: number): boolean {
    return this.lastSeen === null || nowMs - this.lastSeen > STALE_AFTER_MS;
  }
}
