"""Construction of the default warehouse floor.

The packaged ``data/default_layout.json`` is generated by
:func:`build_default_layout` and shipped as plain data; the simulator only
ever consumes layout documents, so alternative floors can be dropped in
without touching code.

Geometry notes (all cells 1 m):

* the outer ring is walled;
* four rack rows run east-west, each split into two segments with a
  mid-floor gap so paths can cross between aisles;
* every slot exposes its south face: the picker stands directly under the
  rack cell, the robot parks one row further south, on the travel lane;
* robots rest in single-entry pockets along the south wall and pickers in
  pockets along the north wall, so parked agents never sit on a lane and
  cannot trap moving traffic;
* the delivery point sits in the wide mid-floor gap so loaded robots
  approach it over several columns instead of funnelling into one.

The default 96 x 64 floor gives hauls of roughly 40-70 m per leg.  At that
scale the fast-arrival regime saturates the picker crew when the slow
radius is large (robots crawl, pickers wait at the racks), which is the
congestion behavior the rule-tuning loop exists to manage; much smaller
floors stay uncongested at every setting.
"""

from __future__ import annotations

from .grid import Rack, Slot, WarehouseLayout

RACK_ROW_COUNT = 4
FIRST_RACK_ROW = 7
RACK_PITCH = 10


def build_default_layout(width: int = 96, height: int = 64,
                         amr_count: int = 15, worker_count: int = 9,
                         name: str = "default") -> WarehouseLayout:
    rack_rows = [FIRST_RACK_ROW + k * RACK_PITCH for k in range(RACK_ROW_COUNT)]
    if rack_rows[-1] + 6 > height - 2 or width < 24:
        raise ValueError("floor too small for four rack rows")

    blocked: set[tuple[int, int]] = set()
    for x in range(width):
        blocked.add((x, 0))
        blocked.add((x, height - 1))
    for y in range(height):
        blocked.add((0, y))
        blocked.add((width - 1, y))

    # two rack segments per row, separated by a 4-cell mid-floor gap
    mid = width // 2
    segments = ((8, mid - 3), (mid + 2, width - 9))

    racks: list[Rack] = []
    slots: list[Slot] = []
    worker_only: set[tuple[int, int]] = set()
    for row_idx, rack_y in enumerate(rack_rows):
        for seg_idx, (x0, x1) in enumerate(segments):
            rack_id = f"R{row_idx}{'AB'[seg_idx]}"
            cells = tuple((x, rack_y) for x in range(x0, x1 + 1))
            blocked.update(cells)
            racks.append(Rack(rack_id=rack_id, cells=cells))
            for j, x in enumerate(range(x0, x1 + 1)):
                slots.append(Slot(
                    slot_id=f"{rack_id}-{j:02d}",
                    rack_cell=(x, rack_y),
                    worker_cell=(x, rack_y + 1),
                    pickup_cell=(x, rack_y + 2),
                ))
            # picking lane under the rack face is pedestrian-only; robots
            # keep to the berth lane one row south. The lane spans exactly the
            # rack so the crossing gaps and margins stay shared.
            for x in range(x0, x1 + 1):
                worker_only.add((x, rack_y + 1))

    # picker rest pockets along the north wall, one entry each (from the south)
    rest_cells = []
    x = 6
    while len(rest_cells) < worker_count and x < width - 2:
        rest_cells.append((x, 1))
        blocked.add((x - 1, 1))
        blocked.add((x + 1, 1))
        x += 4

    # robot home pockets along the south wall
    home_cells = []
    x = 6
    while len(home_cells) < amr_count and x < width - 2:
        home_cells.append((x, height - 2))
        blocked.add((x - 1, height - 2))
        blocked.add((x + 1, height - 2))
        x += 2

    if len(rest_cells) < worker_count or len(home_cells) < amr_count:
        raise ValueError("floor too small for the requested agent counts")

    layout = WarehouseLayout(
        name=name,
        width=width,
        height=height,
        cell_size=1.0,
        blocked=frozenset(blocked),
        racks=tuple(racks),
        slots=tuple(slots),
        delivery_point=(mid, height - 4),
        amr_home_zone=tuple(home_cells),
        worker_rest_zones=tuple(rest_cells),
        worker_only=frozenset(worker_only),
    )
    layout.validate()
    return layout
