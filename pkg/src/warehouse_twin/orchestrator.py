"""Closed adaptation loop around the physical simulation.

The engine owns the physical world and advances it tick by tick, recording
metrics and watching the order arrival rate.  When the rate shifts past the
detection threshold it snapshots the world, fans the goal model's design
alternatives out through the twin, filters the results to the Pareto front
and selects under the current preference.  With auto-enact on, the chosen
rule parameters are written back into the robots at the next tick boundary;
otherwise the cycle report is parked for a human decision.

Thread discipline: all world mutation happens on whichever single thread
calls :meth:`Engine.tick` (the tick loop).  Other threads interact through
the command queue and read the published view, which is swapped atomically.
"""

from __future__ import annotations

import itertools
import json
import math
import queue
import threading
import time
from dataclasses import dataclass, field

from .goals import DesignAlternative, GoalModel, default_goal_model, enumerate_alternatives
from .metrics import MetricsSeries, Preference, ProductivityConfig, SafetyConfig
from .scenario import ScenarioConfig
from .twin import Twin, WhatIfResult, pareto_front, select
from .world import (EV_ORDER_ARRIVED, TickReport, WorldState, build_world,
                    snapshot, step)


class InsufficientData(ValueError):
    """Not enough arrivals in the window to estimate a rate."""


class InvalidPreference(ValueError):
    """Preference weights are out of range or do not sum to one."""


@dataclass
class LoopConfig:
    window_w: int = 20                # arrivals in the rate-estimation window
    deviation_threshold: float = 0.4  # relative deviation that counts as a phase change
    debounce: float = 300.0           # seconds between adaptations
    auto_enact: bool = False
    time_scale: float = 10.0          # simulated seconds per wall second (paced mode)
    snapshot_every_ticks: int = 100
    whatif_horizon: float = 600.0
    whatif_replications: int = 5
    whatif_seed_base: int = 9001
    whatif_parallel: bool = True

    def validate(self) -> None:
        if self.window_w < 2:
            raise ValueError("window_w must be at least 2")
        if self.deviation_threshold <= 0:
            raise ValueError("deviation_threshold must be positive")
        if self.time_scale <= 0:
            raise ValueError("time_scale must be positive")


@dataclass
class MonitorWindow:
    """Sliding window of recent order arrival times plus the rate baseline."""

    capacity: int
    baseline_interarrival: float
    arrivals: list[float] = field(default_factory=list)
    last_adaptation_time: float = -math.inf
    rebaseline_pending: bool = False

    def observe_arrival(self, t: float) -> None:
        self.arrivals.append(t)
        if len(self.arrivals) > self.capacity:
            del self.arrivals[0]

    def clear(self) -> None:
        self.arrivals.clear()


@dataclass(frozen=True)
class PhaseChangeEvent:
    t: float
    previous_baseline: float
    estimate: float

    def to_dict(self) -> dict:
        return {"t": self.t, "previous_baseline": self.previous_baseline,
                "estimate": self.estimate}


def estimate_interarrival(window: MonitorWindow) -> float:
    """Mean gap over the windowed arrivals; needs at least two of them."""
    n = len(window.arrivals)
    if n < 2:
        raise InsufficientData(f"{n} arrival(s) in window")
    return (window.arrivals[-1] - window.arrivals[0]) / (n - 1)


def detect_phase_change(window: MonitorWindow, cfg: LoopConfig,
                        now: float) -> PhaseChangeEvent | None:
    """Fire once per sustained rate shift.

    On firing, the window is purged so the baseline can be re-anchored on a
    clean sample of the new regime; detection stays quiet until the window
    refills, which keeps one rate change from firing twice (once on the
    mixed window, once more against the stale baseline).
    """
    if window.rebaseline_pending:
        if len(window.arrivals) >= window.capacity:
            window.baseline_interarrival = estimate_interarrival(window)
            window.rebaseline_pending = False
        return None
    try:
        est = estimate_interarrival(window)
    except InsufficientData:
        return None
    deviation = abs(est - window.baseline_interarrival) / window.baseline_interarrival
    if deviation <= cfg.deviation_threshold:
        return None
    if now - window.last_adaptation_time <= cfg.debounce:
        return None
    event = PhaseChangeEvent(t=now, previous_baseline=window.baseline_interarrival,
                             estimate=est)
    window.last_adaptation_time = now
    window.baseline_interarrival = est
    window.rebaseline_pending = True
    window.clear()
    return event


@dataclass(frozen=True)
class CycleReport:
    cycle_id: str
    t: float
    trigger: PhaseChangeEvent | None
    alternatives: tuple[DesignAlternative, ...]
    results: tuple[WhatIfResult, ...]
    front_ids: tuple[str, ...]
    selected_id: str
    preference: Preference
    enacted: bool
    pending_human_decision: bool

    def to_dict(self) -> dict:
        return {
            "cycle_id": self.cycle_id,
            "t": self.t,
            "trigger": self.trigger.to_dict() if self.trigger else None,
            "alternatives": [a.to_dict() for a in self.alternatives],
            "results": [r.to_dict() for r in self.results],
            "front_ids": list(self.front_ids),
            "selected_id": self.selected_id,
            "preference": {"w_s": self.preference.w_s, "w_p": self.preference.w_p},
            "enacted": self.enacted,
            "pending_human_decision": self.pending_human_decision,
        }


class Engine:
    """Physical loop plus decision support; see the module docstring."""

    def __init__(self, scenario: ScenarioConfig,
                 goal_model: GoalModel | None = None,
                 loop: LoopConfig | None = None,
                 safety_cfg: SafetyConfig | None = None,
                 productivity_cfg: ProductivityConfig | None = None,
                 preference: Preference = Preference(0.5, 0.5),
                 layout=None):
        self.loop = loop or LoopConfig()
        self.loop.validate()
        preference.validate()
        self.goal_model = goal_model or default_goal_model()
        self.safety_cfg = safety_cfg or SafetyConfig()
        self.productivity_cfg = productivity_cfg or ProductivityConfig()
        self.preference = preference
        self.world: WorldState = build_world(scenario, layout)
        self.series = MetricsSeries(safety_cfg=self.safety_cfg,
                                    productivity_cfg=self.productivity_cfg)
        self.twin = Twin(safety_cfg=self.safety_cfg, productivity_cfg=self.productivity_cfg)
        self.monitor = MonitorWindow(
            capacity=self.loop.window_w,
            baseline_interarrival=scenario.schedule.phases[0].mean_interarrival)
        self.paused = False
        self.time_scale = self.loop.time_scale
        self.commands: queue.SimpleQueue = queue.SimpleQueue()
        self.latest_snapshot: bytes = snapshot(self.world)
        self.cycle_reports: list[CycleReport] = []
        self.enactment_log: list[dict] = []
        self.preference_log: list[dict] = []
        self.analyses: dict[str, dict] = {}
        self._cycle_counter = itertools.count(1)
        self._analysis_counter = itertools.count(1)
        self._pending_phase_event: PhaseChangeEvent | None = None
        self._completions_seen = 0
        self._view_lock = threading.Lock()
        self._published: dict = {}
        self.event_sink = None  # file-like; one JSON line per event
        self._publish()

    # -- commands (thread-safe entry points) ---------------------------

    def request_preference(self, pref: Preference) -> None:
        try:
            pref.validate()
        except ValueError as exc:
            raise InvalidPreference(str(exc)) from exc
        self.commands.put(("preference", pref))

    def request_enact(self, alternative_id: str, analysis_id: str) -> None:
        analysis = self.analyses.get(analysis_id)
        if analysis is None:
            raise KeyError(f"unknown analysis {analysis_id!r}")
        if alternative_id not in analysis["alternative_ids"]:
            raise KeyError(f"analysis {analysis_id!r} has no alternative {alternative_id!r}")
        self.commands.put(("enact", alternative_id, analysis_id))

    def request_pause(self) -> None:
        self.commands.put(("pause",))

    def request_resume(self) -> None:
        self.commands.put(("resume",))

    def request_time_scale(self, scale: float) -> None:
        if scale <= 0:
            raise ValueError("time_scale must be positive")
        self.commands.put(("time_scale", scale))

    def request_snapshot(self) -> tuple[threading.Event, dict]:
        """Ask the tick loop for a fresh snapshot; wait on the event, read the box."""
        done = threading.Event()
        box: dict = {}
        self.commands.put(("snapshot", done, box))
        return done, box

    # -- the tick loop (single thread) ----------------------------------

    def _apply_commands(self) -> None:
        while True:
            try:
                cmd = self.commands.get_nowait()
            except queue.Empty:
                return
            kind = cmd[0]
            if kind == "preference":
                self.preference = cmd[1]
                self.preference_log.append({"t": self.world.now,
                                            "w_s": cmd[1].w_s, "w_p": cmd[1].w_p})
            elif kind == "enact":
                _, alternative_id, analysis_id = cmd
                self._apply_enactment(alternative_id, analysis_id)
            elif kind == "pause":
                self.paused = True
            elif kind == "resume":
                self.paused = False
            elif kind == "time_scale":
                self.time_scale = cmd[1]
            elif kind == "snapshot":
                _, done, box = cmd
                box["snapshot"] = snapshot(self.world)
                done.set()

    def _apply_enactment(self, alternative_id: str, analysis_id: str) -> None:
        analysis = self.analyses[analysis_id]
        alt = analysis["alternatives"][alternative_id]
        cmd = self.twin.enact(alt, analysis_id, self.world.now)
        cmd.apply(self.world)
        self.enactment_log.append(cmd.to_dict())

    def tick(self) -> TickReport | None:
        """One simulation step plus monitoring; None when paused."""
        self._apply_commands()
        if self.paused:
            return None
        report = step(self.world)
        self.series.record_tick(report.t, report.person_distances)
        if len(self.world.completed_log) > self._completions_seen:
            self._completions_seen = len(self.world.completed_log)
            self.series.record_completion(report.t, self.world.completed_log)
        for ev in report.events:
            if ev.kind == EV_ORDER_ARRIVED:
                self.monitor.observe_arrival(ev.t)
        if self.event_sink is not None:
            for ev in report.events:
                self.event_sink.write(ev.to_line() + "\n")
        fired = detect_phase_change(self.monitor, self.loop, self.world.now)
        if fired is not None:
            self._pending_phase_event = fired
            self.latest_snapshot = snapshot(self.world)
        elif self.world.tick % self.loop.snapshot_every_ticks == 0:
            self.latest_snapshot = snapshot(self.world)
        if self.world.tick % 5 == 0:  # view readers need at most 10 Hz anyway
            self._publish()
        return report

    def take_phase_event(self) -> PhaseChangeEvent | None:
        ev, self._pending_phase_event = self._pending_phase_event, None
        return ev

    def run_for(self, seconds: float, on_report=None) -> None:
        """Headless, unpaced run; adaptation cycles execute inline."""
        ticks = round(seconds / self.world.dt)
        for _ in range(ticks):
            report = self.tick()
            if on_report is not None and report is not None:
                on_report(report)
            ev = self.take_phase_event()
            if ev is not None:
                self.adaptation_cycle(ev)
        self._apply_commands()  # flush a trailing enactment at the final boundary

    # -- decision support ------------------------------------------------

    def run_analysis(self, base_snapshot: bytes,
                     alternatives: list[DesignAlternative] | None = None,
                     horizon: float | None = None,
                     replications: int | None = None,
                     seed_base: int | None = None,
                     analysis_id: str | None = None) -> dict:
        """What-if batch over the goal model's alternatives; returns the record."""
        alts = alternatives if alternatives is not None else enumerate_alternatives(self.goal_model)
        if analysis_id is None:
            analysis_id = f"analysis-{next(self._analysis_counter)}"
        self.twin.assimilate(base_snapshot)
        results = self.twin.run_batch(
            alts,
            horizon=horizon if horizon is not None else self.loop.whatif_horizon,
            replications=replications if replications is not None else self.loop.whatif_replications,
            seed_base=seed_base if seed_base is not None else self.loop.whatif_seed_base,
            parallel=self.loop.whatif_parallel)
        points = Twin.points(results)
        front = pareto_front(points)
        front_ids = tuple(p.alternative_id for p in front)
        record = {
            "analysis_id": analysis_id,
            "t": self.world.now,
            "alternative_ids": [a.alternative_id for a in alts],
            "alternatives": {a.alternative_id: a for a in alts},
            "results": results,
            "front_ids": front_ids,
            "status": "done",
        }
        self.analyses[analysis_id] = record
        return record

    def adaptation_cycle(self, event: PhaseChangeEvent | None) -> CycleReport:
        """Snapshot, what-if every alternative, select, then enact or park."""
        cycle_id = f"cycle-{next(self._cycle_counter)}"
        base = self.latest_snapshot
        record = self.run_analysis(base, analysis_id=cycle_id)
        alts = list(record["alternatives"].values())
        results = record["results"]
        front = [p for p in Twin.points(results) if p.alternative_id in record["front_ids"]]
        chosen_pt = select(front, self.preference,
                           id_order=[a.alternative_id for a in alts])
        selected = record["alternatives"][chosen_pt.alternative_id]
        report = CycleReport(
            cycle_id=cycle_id,
            t=self.world.now,
            trigger=event,
            alternatives=tuple(alts),
            results=tuple(results),
            front_ids=tuple(record["front_ids"]),
            selected_id=selected.alternative_id,
            preference=self.preference,
            enacted=self.loop.auto_enact,
            pending_human_decision=not self.loop.auto_enact,
        )
        self.cycle_reports.append(report)
        if self.loop.auto_enact:
            # queued, not applied in place: rule swaps happen at tick boundaries
            self.commands.put(("enact", selected.alternative_id, cycle_id))
        return report

    # -- published state ---------------------------------------------------

    def _publish(self) -> None:
        w = self.world
        view = {
            "clock": {"tick": w.tick, "t": w.now},
            "paused": self.paused,
            "time_scale": self.time_scale,
            "active_rule": w.active_rule().to_dict(),
            "preference": {"w_s": self.preference.w_s, "w_p": self.preference.w_p},
            "amrs": [{"id": a.amr_id, "x": a.x, "y": a.y, "state": a.state,
                      "speed": math.hypot(a.vx, a.vy), "gov": a.gov_state}
                     for a in w.amrs],
            "workers": [{"id": k.worker_id, "x": k.x, "y": k.y, "state": k.state}
                        for k in w.workers],
            "orders": {"queued": len(w.queue),
                       "completed": len(w.completed_log),
                       "total": len(w.orders)},
            "safety_min": self.series.safety_min_series[-1] if self.series.safety_min_series else 1.0,
            "safety_mean": self.series.safety_mean_series[-1] if self.series.safety_mean_series else 1.0,
            "productivity": self.series.last_productivity,
            "avg_service_time": self.series.last_avg_service,
            "baseline_interarrival": self.monitor.baseline_interarrival,
        }
        with self._view_lock:
            self._published = view

    def published_view(self) -> dict:
        with self._view_lock:
            return self._published

    def metrics_tail(self, window: int | None = None) -> dict:
        n = window if window is not None else 600
        return {
            "t": self.series.tick_t[-n:],
            "safety_mean": self.series.safety_mean_series[-n:],
            "safety_min": self.series.safety_min_series[-n:],
            "completions": {
                "t": self.series.completion_t[-n:],
                "avg_service_time": self.series.avg_service_series[-n:],
                "productivity": self.series.productivity_series[-n:],
            },
        }


class PacedRunner:
    """Drives an engine at its time scale on a daemon thread (service mode)."""

    def __init__(self, engine: Engine):
        self.engine = engine
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.subscribers: list[queue.Queue] = []
        self._sub_lock = threading.Lock()
        self.tick_durations: list[float] = []

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="tick-loop", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=256)
        with self._sub_lock:
            self.subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._sub_lock:
            if q in self.subscribers:
                self.subscribers.remove(q)

    def _broadcast(self, message: dict) -> None:
        with self._sub_lock:
            subs = list(self.subscribers)
        for q in subs:
            try:
                q.put_nowait(message)
            except queue.Full:
                pass  # slow consumer: drop, the stream is advisory

    def _run(self) -> None:
        engine = self.engine
        dt = engine.world.dt
        next_deadline = time.perf_counter()
        last_stream = 0.0
        while not self._stop.is_set():
            tick_interval = dt / engine.time_scale
            now = time.perf_counter()
            if now < next_deadline:
                time.sleep(min(next_deadline - now, 0.05))
                continue
            next_deadline = max(next_deadline + tick_interval, now - 0.25)
            t0 = time.perf_counter()
            report = engine.tick()
            elapsed = time.perf_counter() - t0
            self.tick_durations.append(elapsed)
            if len(self.tick_durations) > 20000:
                del self.tick_durations[:10000]
            event = engine.take_phase_event()
            if event is not None:
                threading.Thread(target=self._cycle, args=(event,), daemon=True).start()
            # stream at most 10 messages per wall second
            wall = time.perf_counter()
            if report is not None and wall - last_stream >= 0.1:
                last_stream = wall
                view = engine.published_view()
                self._broadcast({"type": "tick", "state": view})

    def _cycle(self, event: PhaseChangeEvent) -> None:
        report = self.engine.adaptation_cycle(event)
        self._broadcast({"type": "phase_change", "event": event.to_dict(),
                         "cycle": report.to_dict()})
        if report.enacted:
            self._broadcast({"type": "enactment",
                             "alternative_id": report.selected_id,
                             "analysis_id": report.cycle_id})


def audit_log_lines(engine: Engine) -> list[str]:
    """Cycle reports and enactments as JSON lines, for the append-only run log."""
    lines = []
    for rep in engine.cycle_reports:
        lines.append(json.dumps({"kind": "cycle", **rep.to_dict()},
                                separators=(",", ":"), sort_keys=True))
    for en in engine.enactment_log:
        lines.append(json.dumps({"kind": "enactment", **en},
                                separators=(",", ":"), sort_keys=True))
    return lines
