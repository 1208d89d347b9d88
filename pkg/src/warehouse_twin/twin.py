"""The twin side: state assimilation, what-if batches, Pareto trade-offs.

A what-if run restores the assimilated snapshot, swaps one design
alternative's rule parameters into every robot, optionally reseeds the
stochastic streams (common random numbers: replication r uses the same
seeds under every alternative in a batch), simulates a fixed horizon and
scores the outcome: time-averaged worst-case person safety, and the
productivity implied by recent service times at the end of the horizon.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from scipy import stats

from .goals import DesignAlternative
from .metrics import MetricsSeries, Preference, ProductivityConfig, SafetyConfig, overall
from .scenario import SafetyRuleParams
from .world import CorruptSnapshot, WorldState, make_rng_streams, restore, step


@dataclass(frozen=True)
class WhatIfJob:
    base_snapshot: bytes
    alternative: DesignAlternative
    horizon: float
    replications: int = 1
    seed_base: int | None = None  # None: continue the snapshot's own streams

    def validate(self) -> None:
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.replications < 1:
            raise ValueError("need at least one replication")


@dataclass(frozen=True)
class WhatIfResult:
    alternative_id: str
    safety_score: float
    productivity_score: float
    safety_raw: tuple[float, ...]
    productivity_raw: tuple[float, ...]
    safety_ci: float
    productivity_ci: float

    def to_dict(self) -> dict:
        return {"alternative_id": self.alternative_id,
                "safety_score": self.safety_score,
                "productivity_score": self.productivity_score,
                "safety_raw": list(self.safety_raw),
                "productivity_raw": list(self.productivity_raw),
                "safety_ci": self.safety_ci,
                "productivity_ci": self.productivity_ci}


@dataclass(frozen=True)
class ParetoPoint:
    alternative_id: str
    objectives: tuple[float, float]  # (safety_score, productivity_score)


@dataclass(frozen=True)
class EnactmentCommand:
    alternative_id: str
    params: SafetyRuleParams
    analysis_id: str
    issued_at: float  # simulated seconds

    def apply(self, world: WorldState) -> None:
        world.set_rule(self.params)

    def to_dict(self) -> dict:
        return {"alternative_id": self.alternative_id, "params": self.params.to_dict(),
                "analysis_id": self.analysis_id, "issued_at": self.issued_at}


def _confidence_halfwidth(values: list[float]) -> float:
    """95% Student-t halfwidth; 0 for a single replication."""
    n = len(values)
    if n < 2:
        return 0.0
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    if var <= 0.0:
        return 0.0
    return float(stats.t.ppf(0.975, n - 1)) * math.sqrt(var / n)


def _simulate_once(snapshot_bytes: bytes, params: SafetyRuleParams, horizon: float,
                   seed: int | None, safety_cfg: SafetyConfig,
                   productivity_cfg: ProductivityConfig) -> tuple[float, float]:
    """One replication: (mean sub-saturated safety_min, final productivity)."""
    world = restore(snapshot_bytes)
    world.set_rule(params)
    if seed is not None:
        world.rngs = make_rng_streams(seed)
    series = MetricsSeries(safety_cfg=safety_cfg, productivity_cfg=productivity_cfg)
    ticks = max(1, round(horizon / world.dt))
    completions_seen = len(world.completed_log)
    for _ in range(ticks):
        report = step(world)
        series.record_tick(report.t, report.person_distances)
        if len(world.completed_log) > completions_seen:
            completions_seen = len(world.completed_log)
            series.record_completion(report.t, world.completed_log)
    safety_score = series.sub_saturated_safety_mean()
    if series.productivity_series:
        productivity_score = series.productivity_series[-1]
    elif world.completed_log:
        # no completion inside the horizon: score the standing history
        series.record_completion(world.now, world.completed_log)
        productivity_score = series.productivity_series[-1]
    else:
        productivity_score = 0.0  # nothing ever completed: no throughput at all
    return safety_score, productivity_score


def _lower_worker_priority() -> None:
    # background analysis must not starve the control loop sharing the box
    try:
        os.nice(5)
    except OSError:
        pass


def _run_job_replication(args) -> tuple[str, int, float, float]:
    snapshot_bytes, alt_id, params, horizon, seed, s_cfg, p_cfg = args
    s, p = _simulate_once(snapshot_bytes, params, horizon, seed, s_cfg, p_cfg)
    return alt_id, seed if seed is not None else -1, s, p


def run_what_if(job: WhatIfJob,
                safety_cfg: SafetyConfig = SafetyConfig(),
                productivity_cfg: ProductivityConfig = ProductivityConfig()) -> WhatIfResult:
    """Run one alternative's replications serially and aggregate the scores."""
    job.validate()
    safety_raw: list[float] = []
    productivity_raw: list[float] = []
    for r in range(job.replications):
        seed = None if job.seed_base is None else job.seed_base + r
        s, p = _simulate_once(job.base_snapshot, job.alternative.resolved_params,
                              job.horizon, seed, safety_cfg, productivity_cfg)
        safety_raw.append(s)
        productivity_raw.append(p)
    return WhatIfResult(
        alternative_id=job.alternative.alternative_id,
        safety_score=sum(safety_raw) / len(safety_raw),
        productivity_score=sum(productivity_raw) / len(productivity_raw),
        safety_raw=tuple(safety_raw),
        productivity_raw=tuple(productivity_raw),
        safety_ci=_confidence_halfwidth(safety_raw),
        productivity_ci=_confidence_halfwidth(productivity_raw),
    )


def dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    """a beats-or-ties b in both objectives and strictly beats it in one."""
    (as_, ap), (bs, bp) = a.objectives, b.objectives
    return as_ >= bs and ap >= bp and (as_ > bs or ap > bp)


def pareto_front(points: list[ParetoPoint]) -> list[ParetoPoint]:
    """Non-dominated subset, in input order; duplicate vectors all retained.

    Plane sweep over safety-descending order: a point is dominated exactly
    when some strictly-safer point matches or beats its productivity, or an
    equally-safe point strictly beats it.  Equal vectors never dominate
    each other, so duplicates survive together.
    """
    n = len(points)
    if n <= 1:
        return list(points)
    order = sorted(range(n), key=lambda i: (-points[i].objectives[0], -points[i].objectives[1]))
    keep = [False] * n
    best_p_higher = -math.inf   # max productivity among strictly-higher safety
    i = 0
    while i < n:
        j = i
        s = points[order[i]].objectives[0]
        group_best_p = -math.inf
        while j < n and points[order[j]].objectives[0] == s:
            idx = order[j]
            p = points[idx].objectives[1]
            # dominated by someone with strictly higher safety and >= productivity,
            # or by an equal-safety point with strictly higher productivity
            if p <= best_p_higher or p < group_best_p:
                keep[idx] = False
            else:
                keep[idx] = True
            group_best_p = max(group_best_p, p)
            j += 1
        best_p_higher = max(best_p_higher, group_best_p)
        i = j
    return [pt for k, pt in enumerate(points) if keep[k]]


class EmptyFront(ValueError):
    """Selection requires at least one candidate point."""


def select(front: list[ParetoPoint], preference: Preference,
           id_order: list[str] | None = None) -> ParetoPoint:
    """Point maximizing the weighted sum; ties favor safety, then earlier id."""
    if not front:
        raise EmptyFront("cannot select from an empty front")
    preference.validate()
    if id_order is None:
        rank = {pt.alternative_id: i for i, pt in enumerate(front)}
    else:
        rank = {aid: i for i, aid in enumerate(id_order)}
    best = None
    best_key = None
    for pt in front:
        score = overall(pt.objectives[0], pt.objectives[1], preference)
        key = (-score, -pt.objectives[0], rank.get(pt.alternative_id, len(rank)))
        if best_key is None or key < best_key:
            best, best_key = pt, key
    return best


class Twin:
    """Holds the assimilated base state and runs what-if batches against it."""

    def __init__(self, safety_cfg: SafetyConfig = SafetyConfig(),
                 productivity_cfg: ProductivityConfig = ProductivityConfig(),
                 max_workers: int | None = None):
        self.safety_cfg = safety_cfg
        self.productivity_cfg = productivity_cfg
        self.max_workers = max_workers
        self.base_snapshot: bytes | None = None
        self.base_clock: float | None = None

    def assimilate(self, snapshot_bytes: bytes) -> None:
        """Adopt a physical-space snapshot as the twin's base state."""
        world = restore(snapshot_bytes)  # raises CorruptSnapshot on bad bytes
        self.base_snapshot = snapshot_bytes
        self.base_clock = world.now

    def run_batch(self, alternatives: list[DesignAlternative], horizon: float,
                  replications: int, seed_base: int | None,
                  parallel: bool = True) -> list[WhatIfResult]:
        """What-if every alternative over common random numbers.

        Fan-out is per (alternative, replication) pair over a process pool;
        results are joined in deterministic (alternative, replication) order,
        so parallel and serial execution produce identical output.
        """
        if self.base_snapshot is None:
            raise CorruptSnapshot("no snapshot assimilated")
        if not alternatives:
            return []
        tasks = []
        for alt in alternatives:
            for r in range(replications):
                seed = None if seed_base is None else seed_base + r
                tasks.append((self.base_snapshot, alt.alternative_id,
                              alt.resolved_params, horizon, seed,
                              self.safety_cfg, self.productivity_cfg))
        if parallel and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=self.max_workers,
                                     initializer=_lower_worker_priority) as pool:
                rows = list(pool.map(_run_job_replication, tasks, chunksize=1))
        else:
            rows = [_run_job_replication(t) for t in tasks]
        results = []
        per_alt = {alt.alternative_id: ([], []) for alt in alternatives}
        for alt_id, _, s, p in rows:
            per_alt[alt_id][0].append(s)
            per_alt[alt_id][1].append(p)
        for alt in alternatives:
            s_raw, p_raw = per_alt[alt.alternative_id]
            results.append(WhatIfResult(
                alternative_id=alt.alternative_id,
                safety_score=sum(s_raw) / len(s_raw),
                productivity_score=sum(p_raw) / len(p_raw),
                safety_raw=tuple(s_raw),
                productivity_raw=tuple(p_raw),
                safety_ci=_confidence_halfwidth(s_raw),
                productivity_ci=_confidence_halfwidth(p_raw),
            ))
        return results

    @staticmethod
    def points(results: list[WhatIfResult]) -> list[ParetoPoint]:
        return [ParetoPoint(r.alternative_id, (r.safety_score, r.productivity_score))
                for r in results]

    def enact(self, alternative: DesignAlternative, analysis_id: str,
              issued_at: float) -> EnactmentCommand:
        return EnactmentCommand(alternative_id=alternative.alternative_id,
                                params=alternative.resolved_params,
                                analysis_id=analysis_id, issued_at=issued_at)
