from __future__ import annotations

import pytest

from warehouse_twin.grid import Rack, Slot, WarehouseLayout
from warehouse_twin.scenario import (ArrivalSchedule, Phase, SafetyRuleParams,
                                     ScenarioConfig)


def open_floor(width: int, height: int, name: str = "open") -> WarehouseLayout:
    """Fully walkable floor, no walls, for pure pathing tests."""
    return WarehouseLayout(
        name=name, width=width, height=height, cell_size=1.0,
        blocked=frozenset(), racks=(), slots=(),
        delivery_point=(0, 0), amr_home_zone=((0, 0),), worker_rest_zones=((0, 0),),
    )


def mini_layout(blocked=(), name: str = "mini") -> WarehouseLayout:
    """16 x 10 floor: one rack row with three slots, two homes, two rest cells.

        y=2  rack cells (5,2) (6,2) (7,2)
        y=3  worker stand cells
        y=4  robot pickup cells
        delivery (12, 7), homes (2,8) (4,8), rests (2,1) (12,1)
    """
    rack_cells = ((5, 2), (6, 2), (7, 2))
    slots = tuple(
        Slot(slot_id=f"S{i}", rack_cell=(x, 2), worker_cell=(x, 3), pickup_cell=(x, 4))
        for i, x in enumerate((5, 6, 7)))
    layout = WarehouseLayout(
        name=name, width=16, height=10, cell_size=1.0,
        blocked=frozenset(rack_cells) | frozenset(blocked),
        racks=(Rack(rack_id="R0", cells=rack_cells),),
        slots=slots,
        delivery_point=(12, 7),
        amr_home_zone=((2, 8), (4, 8)),
        worker_rest_zones=((2, 1), (12, 1)),
    )
    layout.validate()
    return layout


def mini_scenario(amr_count: int = 2, worker_count: int = 2, seed: int = 7,
                  interarrival: float = 30.0, distribution: str = "fixed",
                  rule: SafetyRuleParams | None = None,
                  worker_standoff: float = 4.0) -> ScenarioConfig:
    return ScenarioConfig(
        name="mini", layout_ref="mini",
        amr_count=amr_count, worker_count=worker_count,
        amr_max_speed=1.0, worker_max_speed=1.0,
        rule=rule or SafetyRuleParams(stop_radius_x=0.5, slow_radius_y=5.0, slow_factor=0.5),
        schedule=ArrivalSchedule(phases=(Phase(0.0, interarrival, distribution),)),
        seed=seed, dt=0.1, load_duration=5.0, load_range=1.5,
        worker_standoff=worker_standoff,
    )


@pytest.fixture
def tiny_world():
    from warehouse_twin.world import build_world
    return build_world(mini_scenario(), layout=mini_layout())
