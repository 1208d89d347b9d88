"""Scenario configuration: agent counts, safety rule, arrival schedule, seed.

A scenario is a JSON document; the layout it references is either the name
of a packaged floor (``data/<name>_layout.json``) or a filesystem path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .grid import LayoutError, WarehouseLayout
from .layouts import build_default_layout

DIST_FIXED = "fixed"
DIST_EXPONENTIAL = "exponential"


class InvalidScenario(ValueError):
    """Scenario document is malformed or fails validation."""


@dataclass(frozen=True)
class SafetyRuleParams:
    """Speed-governor parameters carried by every robot.

    Within ``slow_radius_y`` meters of any other agent the robot drives at
    ``slow_factor`` of its maximum speed; within ``stop_radius_x`` meters of
    an agent ahead of it, it stops.
    """

    stop_radius_x: float
    slow_radius_y: float
    slow_factor: float = 0.5

    def validate(self) -> None:
        if not (0 < self.stop_radius_x < self.slow_radius_y):
            raise InvalidScenario(
                f"need 0 < stop_radius_x < slow_radius_y, got x={self.stop_radius_x} y={self.slow_radius_y}")
        if not (0 < self.slow_factor < 1):
            raise InvalidScenario(f"slow_factor must be in (0, 1), got {self.slow_factor}")

    def to_dict(self) -> dict:
        return {"stop_radius_x": self.stop_radius_x,
                "slow_radius_y": self.slow_radius_y,
                "slow_factor": self.slow_factor}

    @classmethod
    def from_dict(cls, doc: dict) -> "SafetyRuleParams":
        p = cls(stop_radius_x=float(doc["stop_radius_x"]),
                slow_radius_y=float(doc["slow_radius_y"]),
                slow_factor=float(doc.get("slow_factor", 0.5)))
        p.validate()
        return p


@dataclass(frozen=True)
class Phase:
    start: float
    mean_interarrival: float
    distribution: str = DIST_FIXED


@dataclass(frozen=True)
class ArrivalSchedule:
    phases: tuple[Phase, ...]

    def validate(self) -> None:
        if not self.phases:
            raise InvalidScenario("schedule needs at least one phase")
        if self.phases[0].start != 0.0:
            raise InvalidScenario("first phase must start at t=0")
        starts = [p.start for p in self.phases]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise InvalidScenario("phase start times must be strictly increasing")
        for p in self.phases:
            if p.mean_interarrival <= 0:
                raise InvalidScenario("mean_interarrival must be positive")
            if p.distribution not in (DIST_FIXED, DIST_EXPONENTIAL):
                raise InvalidScenario(f"unknown arrival distribution {p.distribution!r}")

    def phase_end(self, index: int) -> float:
        return self.phases[index + 1].start if index + 1 < len(self.phases) else float("inf")

    def to_dict(self) -> dict:
        return {"phases": [
            {"start": p.start, "mean_interarrival": p.mean_interarrival, "distribution": p.distribution}
            for p in self.phases]}

    @classmethod
    def from_dict(cls, doc: dict) -> "ArrivalSchedule":
        sched = cls(phases=tuple(
            Phase(start=float(p["start"]),
                  mean_interarrival=float(p["mean_interarrival"]),
                  distribution=p.get("distribution", DIST_FIXED))
            for p in doc["phases"]))
        sched.validate()
        return sched


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    layout_ref: str
    amr_count: int
    worker_count: int
    amr_max_speed: float
    worker_max_speed: float
    rule: SafetyRuleParams
    schedule: ArrivalSchedule
    seed: int
    dt: float = 0.1
    load_duration: float = 5.0
    load_range: float = 1.5
    # pickers keep this many meters clear of the berth until the robot parks
    worker_standoff: float = 4.0

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)

    def with_schedule(self, schedule: ArrivalSchedule) -> "ScenarioConfig":
        return replace(self, schedule=schedule)

    def with_rule(self, rule: SafetyRuleParams) -> "ScenarioConfig":
        return replace(self, rule=rule)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "layout": self.layout_ref,
            "amr_count": self.amr_count,
            "worker_count": self.worker_count,
            "amr_max_speed": self.amr_max_speed,
            "worker_max_speed": self.worker_max_speed,
            "rule": self.rule.to_dict(),
            "schedule": self.schedule.to_dict(),
            "seed": self.seed,
            "dt": self.dt,
            "load_duration": self.load_duration,
            "load_range": self.load_range,
            "worker_standoff": self.worker_standoff,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        try:
            cfg = cls(
                name=doc.get("name", "unnamed"),
                layout_ref=doc.get("layout", "default"),
                amr_count=int(doc["amr_count"]),
                worker_count=int(doc["worker_count"]),
                amr_max_speed=float(doc.get("amr_max_speed", 1.0)),
                worker_max_speed=float(doc.get("worker_max_speed", 1.0)),
                rule=SafetyRuleParams.from_dict(doc["rule"]),
                schedule=ArrivalSchedule.from_dict(doc["schedule"]),
                seed=int(doc["seed"]),
                dt=float(doc.get("dt", 0.1)),
                load_duration=float(doc.get("load_duration", 5.0)),
                load_range=float(doc.get("load_range", 1.5)),
                worker_standoff=float(doc.get("worker_standoff", 4.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidScenario):
                raise
            raise InvalidScenario(f"malformed scenario document: {exc}") from exc
        cfg.validate_fields()
        return cfg

    def validate_fields(self) -> None:
        if self.amr_count <= 0:
            raise InvalidScenario("amr_count must be positive")
        if self.worker_count <= 0:
            raise InvalidScenario("worker_count must be positive")
        if self.amr_max_speed <= 0 or self.worker_max_speed <= 0:
            raise InvalidScenario("max speeds must be positive")
        if self.dt <= 0:
            raise InvalidScenario("dt must be positive")
        if self.load_duration < self.dt:
            raise InvalidScenario("load_duration must span at least one tick")
        if self.load_range <= 0:
            raise InvalidScenario("load_range must be positive")
        if self.worker_standoff < 0:
            raise InvalidScenario("worker_standoff must be non-negative")
        self.rule.validate()
        self.schedule.validate()


def _data_text(filename: str) -> str:
    return resources.files("warehouse_twin.data").joinpath(filename).read_text()


def load_layout(ref: str) -> WarehouseLayout:
    """Resolve a layout reference: packaged name first, then filesystem path."""
    if "/" not in ref and not ref.endswith(".json"):
        try:
            doc = json.loads(_data_text(f"{ref}_layout.json"))
        except FileNotFoundError:
            raise InvalidScenario(f"unknown packaged layout {ref!r}")
    else:
        path = Path(ref)
        if not path.exists():
            raise InvalidScenario(f"layout file not found: {ref}")
        doc = json.loads(path.read_text())
    try:
        layout = WarehouseLayout.from_dict(doc)
        layout.validate()
    except LayoutError as exc:
        raise InvalidScenario(str(exc)) from exc
    return layout


def load_scenario(source: str | Path | dict) -> ScenarioConfig:
    """Load a scenario from a dict, a packaged name, or a JSON file path."""
    if isinstance(source, dict):
        return ScenarioConfig.from_dict(source)
    ref = str(source)
    if "/" not in ref and not ref.endswith(".json") and not Path(ref).exists():
        try:
            return ScenarioConfig.from_dict(json.loads(_data_text(f"{ref}_scenario.json")))
        except FileNotFoundError:
            raise InvalidScenario(f"unknown packaged scenario {ref!r}")
    path = Path(ref)
    if not path.exists():
        raise InvalidScenario(f"scenario file not found: {ref}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidScenario(f"scenario file is not valid JSON: {exc}") from exc
    return ScenarioConfig.from_dict(doc)


def default_scenario() -> ScenarioConfig:
    return load_scenario("default")


__all__ = [
    "ArrivalSchedule", "InvalidScenario", "Phase", "SafetyRuleParams",
    "ScenarioConfig", "build_default_layout", "default_scenario",
    "load_layout", "load_scenario",
    "DIST_FIXED", "DIST_EXPONENTIAL",
]
