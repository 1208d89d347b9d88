"""Warehouse floor grid: occupancy, slots, connectivity and shortest paths.

Cells are integer ``(x, y)`` pairs; cell (0, 0) is the north-west corner,
x grows east, y grows south.  A cell's center in meters is
``((x + 0.5) * cell_size, (y + 0.5) * cell_size)``.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

import numpy as np

Cell = tuple[int, int]

# Fixed neighbor expansion order: N, E, S, W.
NEIGHBOR_STEPS: tuple[Cell, ...] = ((0, -1), (1, 0), (0, 1), (-1, 0))

UNREACHED = -1


class Unreachable(Exception):
    """No 4-connected path exists between the requested cells."""


class LayoutError(ValueError):
    """The layout document is malformed or violates a structural invariant."""


@dataclass(frozen=True)
class Slot:
    """One item slot on a rack face.

    ``pickup_cell`` is where the robot parks to be loaded, ``worker_cell``
    where the picker stands; both are walkable and within loading reach of
    each other.
    """

    slot_id: str
    rack_cell: Cell
    pickup_cell: Cell
    worker_cell: Cell


@dataclass(frozen=True)
class Rack:
    rack_id: str
    cells: tuple[Cell, ...]


@dataclass
class WarehouseLayout:
    name: str
    width: int
    height: int
    cell_size: float
    blocked: frozenset[Cell]
    racks: tuple[Rack, ...]
    slots: tuple[Slot, ...]
    delivery_point: Cell
    amr_home_zone: tuple[Cell, ...]
    worker_rest_zones: tuple[Cell, ...]
    # pedestrian-only cells (picking lanes): walkable for workers, walls for robots
    worker_only: frozenset[Cell] = frozenset()
    # distance fields are derived data; rebuilt lazily, never serialized
    _fields: dict[Cell, np.ndarray] = field(default_factory=dict, repr=False, compare=False)
    _slot_index: dict[str, Slot] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self._slot_index = {s.slot_id: s for s in self.slots}

    # -- basic queries ------------------------------------------------

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def walkable(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.blocked

    def slot(self, slot_id: str) -> Slot:
        return self._slot_index[slot_id]

    def cell_center(self, cell: Cell) -> tuple[float, float]:
        return ((cell[0] + 0.5) * self.cell_size, (cell[1] + 0.5) * self.cell_size)

    def cell_of(self, x: float, y: float) -> Cell:
        return (int(x // self.cell_size), int(y // self.cell_size))

    # -- distances ----------------------------------------------------

    def distance_field(self, goal: Cell) -> np.ndarray:
        """BFS hop counts from every walkable cell to ``goal`` (UNREACHED where cut off).

        Fields are cached per goal; the grid is immutable so the cache never
        invalidates.
        """
        cached = self._fields.get(goal)
        if cached is not None:
            return cached
        if not self.walkable(goal):
            raise Unreachable(f"goal cell {goal} is not walkable")
        dist = np.full((self.width, self.height), UNREACHED, dtype=np.int32)
        dist[goal] = 0
        queue = deque([goal])
        blocked = self.blocked
        w, h = self.width, self.height
        while queue:
            cx, cy = queue.popleft()
            base = dist[cx, cy] + 1
            for dx, dy in NEIGHBOR_STEPS:
                nx, ny = cx + dx, cy + dy
                if 0 <= nx < w and 0 <= ny < h and dist[nx, ny] == UNREACHED and (nx, ny) not in blocked:
                    dist[nx, ny] = base
                    queue.append((nx, ny))
        self._fields[goal] = dist
        return dist

    def path_distance(self, start: Cell, goal: Cell) -> int:
        """Shortest 4-connected hop count, or raise Unreachable."""
        d = int(self.distance_field(goal)[start])
        if d == UNREACHED:
            raise Unreachable(f"no path from {start} to {goal}")
        return d

    # -- validation ---------------------------------------------------

    def validate(self) -> None:
        """Check structural invariants; raise LayoutError on the first violation."""
        if self.width <= 0 or self.height <= 0:
            raise LayoutError("grid dimensions must be positive")
        if self.cell_size <= 0:
            raise LayoutError("cell_size must be positive")
        task_cells: list[tuple[str, Cell]] = [("delivery_point", self.delivery_point)]
        task_cells += [(f"home[{i}]", c) for i, c in enumerate(self.amr_home_zone)]
        task_cells += [(f"rest[{i}]", c) for i, c in enumerate(self.worker_rest_zones)]
        for s in self.slots:
            task_cells.append((f"slot {s.slot_id} pickup", s.pickup_cell))
            task_cells.append((f"slot {s.slot_id} worker", s.worker_cell))
        for label, cell in task_cells:
            if not self.walkable(cell):
                raise LayoutError(f"{label} cell {cell} is blocked or out of bounds")
        for cell in self.worker_only:
            if not self.walkable(cell):
                raise LayoutError(f"worker-only cell {cell} is blocked or out of bounds")
        for label, cell in task_cells:
            if not label.startswith("slot") and cell in self.worker_only:
                raise LayoutError(f"{label} cell {cell} lies on a worker-only lane")
        for s in self.slots:
            if s.pickup_cell in self.worker_only:
                raise LayoutError(f"slot {s.slot_id} pickup cell is on a worker-only lane")
        # connectivity: every task cell reachable from the delivery point
        fld = self.distance_field(self.delivery_point)
        for label, cell in task_cells:
            if fld[cell] == UNREACHED:
                raise LayoutError(f"{label} cell {cell} is disconnected from the delivery point")

    # -- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "width": self.width,
            "height": self.height,
            "cell_size": self.cell_size,
            "blocked": [list(c) for c in sorted(self.blocked)],
            "racks": [
                {"id": r.rack_id, "cells": [list(c) for c in r.cells]} for r in self.racks
            ],
            "slots": [
                {
                    "id": s.slot_id,
                    "rack_cell": list(s.rack_cell),
                    "pickup_cell": list(s.pickup_cell),
                    "worker_cell": list(s.worker_cell),
                }
                for s in self.slots
            ],
            "delivery_point": list(self.delivery_point),
            "amr_home_zone": [list(c) for c in self.amr_home_zone],
            "worker_rest_zones": [list(c) for c in self.worker_rest_zones],
            "worker_only": [list(c) for c in sorted(self.worker_only)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "WarehouseLayout":
        try:
            return cls(
                name=doc["name"],
                width=int(doc["width"]),
                height=int(doc["height"]),
                cell_size=float(doc["cell_size"]),
                blocked=frozenset(tuple(c) for c in doc["blocked"]),
                racks=tuple(
                    Rack(rack_id=r["id"], cells=tuple(tuple(c) for c in r["cells"]))
                    for r in doc["racks"]
                ),
                slots=tuple(
                    Slot(
                        slot_id=s["id"],
                        rack_cell=tuple(s["rack_cell"]),
                        pickup_cell=tuple(s["pickup_cell"]),
                        worker_cell=tuple(s["worker_cell"]),
                    )
                    for s in doc["slots"]
                ),
                delivery_point=tuple(doc["delivery_point"]),
                amr_home_zone=tuple(tuple(c) for c in doc["amr_home_zone"]),
                worker_rest_zones=tuple(tuple(c) for c in doc["worker_rest_zones"]),
                worker_only=frozenset(tuple(c) for c in doc.get("worker_only", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LayoutError(f"malformed layout document: {exc}") from exc


def plan_path(layout: WarehouseLayout, start: Cell, goal: Cell,
              extra_blocked: frozenset[Cell] | set[Cell] = frozenset(),
              max_nodes: int | None = None) -> list[Cell]:
    """Shortest 4-connected path from ``start`` to ``goal``, both inclusive.

    A* with the Manhattan heuristic.  Ties are broken deterministically:
    neighbors expand in N, E, S, W order and equal-priority nodes pop FIFO,
    so the same query always yields the same path.  ``extra_blocked`` cells
    are treated as walls (the goal itself is never excluded).  ``max_nodes``
    bounds the search effort; exceeding it raises Unreachable, which callers
    doing opportunistic re-routing treat as "not now".
    """
    if not layout.walkable(start):
        raise Unreachable(f"start cell {start} is not walkable")
    if not layout.walkable(goal):
        raise Unreachable(f"goal cell {goal} is not walkable")
    if start == goal:
        return [start]
    blocked = layout.blocked
    gx, gy = goal
    counter = 0
    open_heap: list[tuple[int, int, Cell]] = [(abs(start[0] - gx) + abs(start[1] - gy), 0, start)]
    g_score: dict[Cell, int] = {start: 0}
    came_from: dict[Cell, Cell] = {}
    closed: set[Cell] = set()
    w, h = layout.width, layout.height
    while open_heap:
        _, _, current = heapq.heappop(open_heap)
        if current == goal:
            path = [current]
            while current in came_from:
                current = came_from[current]
                path.append(current)
            path.reverse()
            return path
        if current in closed:
            continue
        closed.add(current)
        if max_nodes is not None and len(closed) > max_nodes:
            raise Unreachable(f"search budget exhausted between {start} and {goal}")
        cx, cy = current
        g_next = g_score[current] + 1
        for dx, dy in NEIGHBOR_STEPS:
            nb = (cx + dx, cy + dy)
            if not (0 <= nb[0] < w and 0 <= nb[1] < h):
                continue
            if nb in blocked or (nb != goal and nb in extra_blocked):
                continue
            if g_next < g_score.get(nb, 1 << 30):
                g_score[nb] = g_next
                came_from[nb] = current
                counter += 1
                heapq.heappush(open_heap, (g_next + abs(nb[0] - gx) + abs(nb[1] - gy), counter, nb))
    raise Unreachable(f"no path from {start} to {goal}")
