// Local preference scoring. Must agree with the server's selection exactly:
// same weighted sum (w_s * safety + w_p * productivity, in that order), same
// tie-breaking (higher safety first, then earlier position in id order).
// Moving the preference slider re-ranks result sets client-side without
// re-running any simulation.

import { Preference, WhatIfRow } from "./model.js";

export function overallScore(safety: number, productivity: number, pref: Preference): number {
  return pref.wS * safety + pref.wP * productivity;
}

export interface ScoredRow extends WhatIfRow {
  overall: number;
}

export function scoreRows(rows: WhatIfRow[], pref: Preference): ScoredRow[] {
  return rows.map((r) => ({
    ...r,
    overall: overallScore(r.safety_score, r.productivity_score, pref),
  }));
}

/**
 * Pick the preferred row among the Pareto-front members of `rows`.
 * `idOrder` fixes the final tie-break (enumeration order server-side);
 * rows missing from it rank last, in input order.
 */
export function selectPreferred(
  rows: WhatIfRow[],
  pref: Preference,
  idOrder?: string[],
): WhatIfRow | null {
  const front = rows.filter((r) => r.on_pareto_front);
  if (front.length === 0) return null;
  const rank = new Map<string, number>();
  (idOrder ?? rows.map((r) => r.alternative_id)).forEach((id, i) => {
    if (!rank.has(id)) rank.set(id, i);
  });
  let best: WhatIfRow | null = null;
  let bestKey: [number, number, number] | null = null;
  for (const row of front) {
    const key: [number, number, number] = [
      -overallScore(row.safety_score, row.productivity_score, pref),
      -row.safety_score,
      rank.get(row.alternative_id) ?? rank.size,
    ];
    if (
      bestKey === null ||
      key[0] < bestKey[0] ||
      (key[0] === bestKey[0] &&
        (key[1] < bestKey[1] || (key[1] === bestKey[1] && key[2] < bestKey[2])))
    ) {
      best = row;
      bestKey = key;
    }
  }
  return best;
}
