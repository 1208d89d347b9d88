"""Headless experiment runners: plain runs, the two-phase study, rule sweeps.

Artifacts are reproducible byte for byte from (scenario, seeds, flags): no
wall-clock timestamps, floats written via repr, keys sorted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from scipy import stats as scipy_stats

from .goals import DesignAlternative
from .metrics import (HISTOGRAM_BINS, HISTOGRAM_BIN_WIDTH, MetricsSeries,
                      ProductivityConfig, SafetyConfig, export_histogram_csv,
                      export_series_csv)
from .scenario import (ArrivalSchedule, Phase, SafetyRuleParams, ScenarioConfig,
                       default_scenario)
from .twin import Twin, pareto_front
from .world import build_world, snapshot, step


def two_phase_schedule(phase_duration: float, rate1: float = 50.0,
                       rate2: float = 15.0, distribution: str = "fixed") -> ArrivalSchedule:
    return ArrivalSchedule(phases=(
        Phase(start=0.0, mean_interarrival=rate1, distribution=distribution),
        Phase(start=phase_duration, mean_interarrival=rate2, distribution=distribution),
    ))


def candidate_alternatives(candidates, stop_radius_x: float = 0.5,
                           slow_factor: float = 0.5) -> list[DesignAlternative]:
    """Ad-hoc design alternatives, one per slow-radius value."""
    alts = []
    for i, y in enumerate(candidates):
        alts.append(DesignAlternative(
            alternative_id=f"y={y:g}",
            index=i,
            selections={},
            resolved_params=SafetyRuleParams(stop_radius_x=stop_radius_x,
                                             slow_radius_y=float(y),
                                             slow_factor=slow_factor)))
    return alts


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


@dataclass
class RunArtifacts:
    out_dir: Path
    events_path: Path | None
    metrics_path: Path
    histogram_path: Path
    summary_path: Path


def run_scenario(scenario: ScenarioConfig, duration: float, out_dir: str | Path,
                 safety_cfg: SafetyConfig = SafetyConfig(),
                 productivity_cfg: ProductivityConfig = ProductivityConfig(),
                 write_events: bool = True) -> RunArtifacts:
    """Simulate ``duration`` seconds and write the standard artifact set."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    world = build_world(scenario)
    series = MetricsSeries(safety_cfg=safety_cfg, productivity_cfg=productivity_cfg)
    events_path = out / "events.jsonl" if write_events else None
    completions_seen = 0
    ticks = round(duration / scenario.dt)
    sink = open(events_path, "w") if events_path else None
    try:
        for _ in range(ticks):
            report = step(world)
            series.record_tick(report.t, report.person_distances)
            if len(world.completed_log) > completions_seen:
                completions_seen = len(world.completed_log)
                series.record_completion(report.t, world.completed_log)
            if sink is not None:
                for ev in report.events:
                    sink.write(ev.to_line() + "\n")
    finally:
        if sink is not None:
            sink.close()
    metrics_path = out / "metrics.csv"
    histogram_path = out / "safety_histogram.csv"
    export_series_csv(series, metrics_path)
    export_histogram_csv(series, histogram_path)
    summary_path = out / "summary.json"
    _write_json(summary_path, {
        "scenario": scenario.to_dict(),
        "duration": duration,
        "orders_spawned": len(world.orders),
        "orders_completed": len(world.completed_log),
        "mean_service_time": (sum(s for _, s in world.completed_log) / len(world.completed_log))
        if world.completed_log else None,
        "final_productivity": series.last_productivity,
        "time_averaged_safety_min": series.time_averaged_safety_min(),
    })
    return RunArtifacts(out_dir=out, events_path=events_path, metrics_path=metrics_path,
                        histogram_path=histogram_path, summary_path=summary_path)


def _flatness(times: list[float], values: list[float]) -> dict:
    """OLS slope of service time against completion time, with its p-value.

    A constant series regresses to slope zero with an undefined p-value;
    that counts as flat.
    """
    if len(values) < 3:
        return {"slope": 0.0, "p_value": 1.0, "flat": True}
    res = scipy_stats.linregress(times, values)
    slope = float(res.slope)
    p = float(res.pvalue)
    if math.isnan(p):
        return {"slope": slope, "p_value": 1.0, "flat": True}
    mean_v = sum(values) / len(values)
    span = times[-1] - times[0]
    relative_drift = abs(slope) * span / mean_v if mean_v > 0 else 0.0
    # flat when the trend is statistically invisible or practically negligible
    return {"slope": slope, "p_value": p, "flat": bool(p > 0.05 or relative_drift < 0.10)}


def _sub_saturated_mean(samples: list[float]) -> float | None:
    subs = [s for s in samples if s < 1.0]
    return sum(subs) / len(subs) if subs else None


def _two_phase_one_seed(args) -> dict:
    (scenario_doc, seed, phase_duration, out_dir,
     safety_cfg, productivity_cfg) = args
    scn = ScenarioConfig.from_dict(scenario_doc).with_seed(int(seed))
    world = build_world(scn)
    series = MetricsSeries(safety_cfg=safety_cfg, productivity_cfg=productivity_cfg)
    completions_seen = 0
    phase1_hist = None
    phase1_saturated = None
    boundary_tick = round(phase_duration / scn.dt)
    total_ticks = round(2 * phase_duration / scn.dt)
    for k in range(total_ticks):
        report = step(world)
        series.record_tick(report.t, report.person_distances)
        if len(world.completed_log) > completions_seen:
            completions_seen = len(world.completed_log)
            series.record_completion(report.t, world.completed_log)
        if k + 1 == boundary_tick:
            phase1_hist = list(series.hist_counts)
            phase1_saturated = series.hist_saturated
    seed_dir = Path(out_dir) / f"seed-{seed}"
    seed_dir.mkdir(exist_ok=True)
    export_series_csv(series, seed_dir / "metrics.csv")
    _write_phase_histograms(seed_dir, series, phase1_hist, phase1_saturated)

    completions = [(t, s) for t, s in world.completed_log]
    p1 = [(t, s) for t, s in completions if t <= phase_duration]
    p2 = [(t, s) for t, s in completions if t > phase_duration]
    # steady state: the second half of phase 1, past the cold-start transient
    steady = [(t, s) for t, s in p1 if t >= phase_duration / 2.0]
    steady_mean = sum(s for _, s in steady) / len(steady) if steady else None
    last20 = [s for _, s in p2[-20:]]
    last20_mean = sum(last20) / len(last20) if last20 else None
    p1_smin = series.safety_min_series[:boundary_tick]
    p2_smin = series.safety_min_series[boundary_tick:]
    entry = {
        "seed": int(seed),
        "phase1": {
            "completions": len(p1),
            "steady_mean_service": steady_mean,
            "flatness": _flatness([t for t, _ in steady], [s for _, s in steady]),
            "sub_saturated_safety_mean": _sub_saturated_mean(p1_smin),
        },
        "phase2": {
            "completions": len(p2),
            "last20_mean_service": last20_mean,
            "sub_saturated_safety_mean": _sub_saturated_mean(p2_smin),
        },
    }
    entry["service_ratio"] = (last20_mean / steady_mean
                              if steady_mean and last20_mean else None)
    return entry


def run_two_phase(out_dir: str | Path, y: float = 5.0, seeds=(1,),
                  phase_duration: float = 3600.0,
                  scenario: ScenarioConfig | None = None,
                  distribution: str = "fixed",
                  parallel: bool = True,
                  safety_cfg: SafetyConfig = SafetyConfig(),
                  productivity_cfg: ProductivityConfig = ProductivityConfig()) -> dict:
    """Slow-arrivals phase then fast-arrivals phase under one fixed rule.

    Per seed: service-time series, per-phase safety-min histograms, phase-1
    steady-state statistics (flatness of the trend) and the ratio of the
    late phase-2 service level over it.  Seeds fan out over a process pool;
    outputs are identical to a serial run.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = scenario or default_scenario()
    base = base.with_schedule(two_phase_schedule(phase_duration, distribution=distribution))
    base = base.with_rule(SafetyRuleParams(stop_radius_x=base.rule.stop_radius_x,
                                           slow_radius_y=float(y),
                                           slow_factor=base.rule.slow_factor))
    tasks = [(base.to_dict(), int(seed), phase_duration, str(out),
              safety_cfg, productivity_cfg) for seed in seeds]
    if parallel and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor() as pool:
            per_seed = list(pool.map(_two_phase_one_seed, tasks, chunksize=1))
    else:
        per_seed = [_two_phase_one_seed(t) for t in tasks]

    summary = {
        "y": float(y),
        "phase_duration": phase_duration,
        "seeds": [int(s) for s in seeds],
        "per_seed": per_seed,
        "ratio_at_least_1_5": sum(1 for e in per_seed
                                  if e["service_ratio"] is not None and e["service_ratio"] >= 1.5),
        "phase1_flat_count": sum(1 for e in per_seed if e["phase1"]["flatness"]["flat"]),
        "phase2_safety_lower_count": sum(
            1 for e in per_seed
            if e["phase1"]["sub_saturated_safety_mean"] is not None
            and e["phase2"]["sub_saturated_safety_mean"] is not None
            and e["phase2"]["sub_saturated_safety_mean"] < e["phase1"]["sub_saturated_safety_mean"]),
    }
    _write_json(out / "two_phase_summary.json", summary)
    return summary


def _write_phase_histograms(seed_dir: Path, series: MetricsSeries,
                            phase1_hist, phase1_saturated) -> None:
    import csv as _csv
    p1 = phase1_hist or [0] * HISTOGRAM_BINS
    p1_sat = phase1_saturated or 0
    p2 = [series.hist_counts[b] - p1[b] for b in range(HISTOGRAM_BINS)]
    p2_sat = series.hist_saturated - p1_sat
    for name, counts, sat in (("phase1", p1, p1_sat), ("phase2", p2, p2_sat)):
        with open(seed_dir / f"safety_histogram_{name}.csv", "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["bin_low", "bin_high", "count", "saturated_count"])
            for b in range(HISTOGRAM_BINS):
                writer.writerow([f"{b * HISTOGRAM_BIN_WIDTH:.2f}",
                                 f"{(b + 1) * HISTOGRAM_BIN_WIDTH:.2f}",
                                 counts[b], sat if b == 0 else ""])


def run_sweep(out_dir: str | Path, candidates=(1.0, 2.0, 3.0, 4.5, 5.0),
              phase_duration: float = 3600.0,
              snapshot_offsets: tuple[float, float] | None = None,
              horizon: float = 600.0, replications: int = 5,
              seed: int = 1, seed_base: int = 9001,
              scenario: ScenarioConfig | None = None,
              parallel: bool = True,
              safety_cfg: SafetyConfig = SafetyConfig(),
              productivity_cfg: ProductivityConfig = ProductivityConfig()) -> dict:
    """What-if sweep over slow-radius candidates from a snapshot of each phase.

    Drives one physical two-phase run (baseline rule), snapshots it mid
    phase 1 and again after phase 2 has settled, then runs the full batch
    of candidates against both snapshots with common random numbers.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = scenario or default_scenario()
    base = base.with_schedule(two_phase_schedule(phase_duration)).with_seed(seed)
    world = build_world(base)
    if snapshot_offsets is None:
        snapshot_offsets = (phase_duration * 0.5, min(900.0, phase_duration * 0.25))
    t_snap1 = min(snapshot_offsets[0], phase_duration)
    t_snap2 = phase_duration + snapshot_offsets[1]
    snaps: dict[str, bytes] = {}
    total_ticks = round(t_snap2 / base.dt)
    for _ in range(total_ticks):
        step(world)
        if "phase1" not in snaps and world.now >= t_snap1 - 1e-9:
            snaps["phase1"] = snapshot(world)
    snaps["phase2"] = snapshot(world)

    alts = candidate_alternatives(candidates,
                                  stop_radius_x=base.rule.stop_radius_x,
                                  slow_factor=base.rule.slow_factor)
    twin = Twin(safety_cfg=safety_cfg, productivity_cfg=productivity_cfg)
    phases_out: dict[str, list[dict]] = {}
    for phase_name in ("phase1", "phase2"):
        twin.assimilate(snaps[phase_name])
        results = twin.run_batch(alts, horizon=horizon, replications=replications,
                                 seed_base=seed_base, parallel=parallel)
        points = Twin.points(results)
        front_ids = {p.alternative_id for p in pareto_front(points)}
        rows = []
        for alt, res in zip(alts, results):
            rows.append({
                "alternative_id": alt.alternative_id,
                "slow_radius_y": alt.resolved_params.slow_radius_y,
                "stop_radius_x": alt.resolved_params.stop_radius_x,
                "safety_score": res.safety_score,
                "productivity_score": res.productivity_score,
                "safety_ci": res.safety_ci,
                "productivity_ci": res.productivity_ci,
                "on_pareto_front": alt.alternative_id in front_ids,
            })
        phases_out[phase_name] = rows
        _write_sweep_csv(out / f"whatif_{phase_name}.csv", rows)

    summary = {
        "candidates": [float(c) for c in candidates],
        "seed": seed,
        "seed_base": seed_base,
        "horizon": horizon,
        "replications": replications,
        "snapshot_times": {"phase1": t_snap1, "phase2": t_snap2},
        "phases": phases_out,
    }
    _write_json(out / "sweep_summary.json", summary)
    return summary


def _write_sweep_csv(path: Path, rows: list[dict]) -> None:
    import csv as _csv
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["alternative_id", "slow_radius_y", "stop_radius_x",
                         "safety_score", "productivity_score",
                         "safety_ci", "productivity_ci", "on_pareto_front"])
        for r in rows:
            writer.writerow([r["alternative_id"], repr(r["slow_radius_y"]),
                             repr(r["stop_radius_x"]), repr(r["safety_score"]),
                             repr(r["productivity_score"]), repr(r["safety_ci"]),
                             repr(r["productivity_ci"]),
                             "1" if r["on_pareto_front"] else "0"])
