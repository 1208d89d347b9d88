// Types mirroring the control API payloads.

export interface RuleParams {
  stop_radius_x: number;
  slow_radius_y: number;
  slow_factor: number;
}

export interface AmrView {
  id: number;
  x: number;
  y: number;
  state: string;
  speed: number;
  gov: string;
}

export interface WorkerView {
  id: number;
  x: number;
  y: number;
  state: string;
}

export interface StateView {
  clock: { tick: number; t: number };
  paused: boolean;
  time_scale: number;
  active_rule: RuleParams;
  preference: { w_s: number; w_p: number };
  amrs: AmrView[];
  workers: WorkerView[];
  orders: { queued: number; completed: number; total: number };
  safety_min: number;
  safety_mean: number;
  productivity: number | null;
  avg_service_time: number | null;
}

export interface WhatIfRow {
  alternative_id: string;
  safety_score: number;
  productivity_score: number;
  safety_ci: number;
  productivity_ci: number;
  on_pareto_front: boolean;
}

export interface WhatIfResultSet {
  analysis_id: string;
  status: string;
  results: WhatIfRow[] | null;
  front_ids: string[] | null;
  selected_id: string | null;
}

export interface Preference {
  wS: number;
  wP: number;
}
