// Pareto panel view model: scatter points, front flags as reported by the
// server, and the locally highlighted selection under the current slider.

import { Preference, WhatIfRow } from "./model.js";
import { selectPreferred } from "./selection.js";

export interface ParetoViewModel {
  points: WhatIfRow[];
  frontIds: string[];
  highlightedId: string | null;
  preference: Preference;
}

export function buildParetoView(
  rows: WhatIfRow[],
  pref: Preference,
  idOrder?: string[],
): ParetoViewModel {
  const highlighted = selectPreferred(rows, pref, idOrder);
  return {
    points: rows,
    frontIds: rows.filter((r) => r.on_pareto_front).map((r) => r.alternative_id),
    highlightedId: highlighted ? highlighted.alternative_id : null,
    preference: pref,
  };
}

/** Slider position is w_p; w_s follows as 1 - w_p so the pair always sums to 1. */
export function preferenceFromSlider(wP: number): Preference {
  const clamped = Math.min(1, Math.max(0, wP));
  return { wS: 1 - clamped, wP: clamped };
}
