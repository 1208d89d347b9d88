// Thin typed client for the control API.

import { StateView, WhatIfResultSet } from "./model.js";

export class ApiClient {
  constructor(private base: string = "") {}

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(this.base + path);
    if (!res.ok) throw new Error(`${path}: ${res.status}`);
    return (await res.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await fetch(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw new Error(`${path}: ${res.status}`);
    return (await res.json()) as T;
  }

  state(): Promise<StateView> {
    return this.get("/state");
  }

  metrics(window = 600): Promise<{
    t: number[];
    safety_mean: number[];
    safety_min: number[];
    completions: { t: number[]; avg_service_time: number[]; productivity: number[] };
  }> {
    return this.get(`/metrics?window=${window}`);
  }

  alternatives(): Promise<{ id: string; index: number; params: Record<string, number> }[]> {
    return this.get("/alternatives");
  }

  startWhatIf(horizon: number, replications: number): Promise<{ analysis_id: string }> {
    return this.post("/whatif", { horizon, replications });
  }

  whatIfResult(analysisId: string): Promise<WhatIfResultSet> {
    return this.get(`/whatif/${analysisId}`);
  }

  setPreference(wS: number, wP: number): Promise<{ ok: boolean }> {
    return this.post("/preference", { w_s: wS, w_p: wP });
  }

  enact(alternativeId: string, analysisId: string): Promise<{ ok: boolean }> {
    return this.post("/enact", { alternative_id: alternativeId, analysis_id: analysisId });
  }

  control(action: "pause" | "resume" | "time_scale", value?: number): Promise<{ ok: boolean }> {
    return this.post("/control", { action, value });
  }
}
