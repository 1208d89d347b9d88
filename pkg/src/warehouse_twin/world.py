"""Discrete-time agent simulation of the warehouse floor.

One :func:`step` advances the world by ``dt`` seconds through a fixed
sub-phase order: order arrivals, dispatching, robot updates (ascending id),
picker updates (ascending id), metric sampling, event collection.  All
randomness flows through named, seeded RNG streams carried by the world, so
two worlds built from the same scenario evolve identically, tick for tick.

Robots sense the distances of all other agents at the start of the tick.
Any agent within the slow radius caps the robot at its reduced speed; an
agent inside the stop radius halts it, but only when that agent lies in
the robot's frontal cone (within 60 degrees of the travel direction - in
the truck path, not merely nearby), which lets robots pass abreast instead
of wedging.  A robot held stopped for a second replans around the cells
its neighbors occupy, and backs out into open space when no route exists.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Cell, Unreachable, WarehouseLayout, plan_path
from .scenario import (DIST_FIXED, InvalidScenario, SafetyRuleParams,
                       ScenarioConfig, load_layout)

# order lifecycle
QUEUED = "Queued"
ASSIGNED = "Assigned"
IN_TRANSIT = "InTransit"
COMPLETED = "Completed"

# robot lifecycle
AMR_IDLE = "Idle"
AMR_TO_PICKUP = "ToPickup"
AMR_WAITING = "WaitingForWorker"
AMR_LOADING = "Loading"
AMR_TO_DELIVERY = "ToDelivery"

# picker lifecycle
WK_RESTING = "Resting"
WK_TO_PICKUP = "ToPickup"
WK_PICKING = "Picking"
WK_RETURNING = "Returning"

# governor modes
GOV_NORMAL = "normal"
GOV_SLOW = "slow"
GOV_STOP = "stop"

# event kinds
EV_ORDER_ARRIVED = "OrderArrived"
EV_ASSIGNED = "Assigned"
EV_WORKER_NOTIFIED = "WorkerNotified"
EV_LOAD_START = "LoadStart"
EV_LOAD_END = "LoadEnd"
EV_DELIVERED = "Delivered"
EV_EMERGENCY_STOP = "EmergencyStop"
EV_SLOW_DOWN = "SlowDown"

RNG_STREAMS = ("arrivals", "assignment", "tiebreak")

# speed below which a robot does not count as "moving" for distance sampling
EPSILON_SPEED = 0.01

# half-angle of the frontal cone the stop rule applies to: cos(60 degrees)
FRONT_CONE_COS = 0.5

# governor-stopped ticks before a robot tries to route around its blocker;
# failed attempts back off exponentially up to the cap, and a node budget
# per search keeps the worst-case tick cost bounded under jams
REPLAN_AFTER_TICKS = 10
REPLAN_BACKOFF_CAP = 40
REPLAN_NODE_BUDGET = 1500

SNAPSHOT_FORMAT = 1

# restored worlds share one immutable layout instance per distinct floor so
# BFS distance-field caches survive across snapshot restores
_LAYOUT_CACHE: dict[str, WarehouseLayout] = {}


class CorruptSnapshot(Exception):
    """Snapshot bytes cannot be restored into a world."""


@dataclass
class Order:
    order_id: int
    slot_id: str
    arrival_time: float
    state: str = QUEUED
    completion_time: float | None = None
    amr_id: int | None = None
    worker_id: int | None = None

    def to_dict(self) -> dict:
        return {"id": self.order_id, "slot": self.slot_id, "arrival": self.arrival_time,
                "state": self.state, "completion": self.completion_time,
                "amr": self.amr_id, "worker": self.worker_id}

    @classmethod
    def from_dict(cls, d: dict) -> "Order":
        return cls(order_id=d["id"], slot_id=d["slot"], arrival_time=d["arrival"],
                   state=d["state"], completion_time=d["completion"],
                   amr_id=d["amr"], worker_id=d["worker"])


@dataclass
class Amr:
    amr_id: int
    x: float
    y: float
    max_speed: float
    rule: SafetyRuleParams
    home_cell: Cell
    vx: float = 0.0
    vy: float = 0.0
    state: str = AMR_IDLE
    assigned_order: int | None = None
    path: list[Cell] = field(default_factory=list)
    prev_cell: Cell | None = None  # last waypoint reached; backing-out anchor
    load_ticks_left: int = 0
    gov_state: str = GOV_NORMAL
    stopped_ticks: int = 0
    replan_window: int = REPLAN_AFTER_TICKS
    stall_retreat_next: bool = False

    def __post_init__(self) -> None:
        if self.prev_cell is None:
            self.prev_cell = self.home_cell

    def to_dict(self) -> dict:
        return {"id": self.amr_id, "x": self.x, "y": self.y, "vx": self.vx, "vy": self.vy,
                "max_speed": self.max_speed, "state": self.state, "order": self.assigned_order,
                "path": [list(c) for c in self.path], "prev": list(self.prev_cell),
                "rule": self.rule.to_dict(),
                "home": list(self.home_cell), "load_ticks_left": self.load_ticks_left,
                "gov": self.gov_state, "stopped_ticks": self.stopped_ticks,
                "replan_window": self.replan_window,
                "stall_retreat_next": self.stall_retreat_next}

    @classmethod
    def from_dict(cls, d: dict) -> "Amr":
        return cls(amr_id=d["id"], x=d["x"], y=d["y"], vx=d["vx"], vy=d["vy"],
                   max_speed=d["max_speed"], state=d["state"], assigned_order=d["order"],
                   path=[tuple(c) for c in d["path"]], prev_cell=tuple(d["prev"]),
                   rule=SafetyRuleParams.from_dict(d["rule"]), home_cell=tuple(d["home"]),
                   load_ticks_left=d["load_ticks_left"], gov_state=d["gov"],
                   stopped_ticks=d["stopped_ticks"], replan_window=d["replan_window"],
                   stall_retreat_next=d["stall_retreat_next"])


@dataclass
class Worker:
    worker_id: int
    x: float
    y: float
    max_speed: float
    rest_cell: Cell
    vx: float = 0.0
    vy: float = 0.0
    state: str = WK_RESTING
    assigned_order: int | None = None
    path: list[Cell] = field(default_factory=list)
    prev_cell: Cell | None = None

    def __post_init__(self) -> None:
        if self.prev_cell is None:
            self.prev_cell = self.rest_cell

    def to_dict(self) -> dict:
        return {"id": self.worker_id, "x": self.x, "y": self.y, "vx": self.vx, "vy": self.vy,
                "max_speed": self.max_speed, "state": self.state, "order": self.assigned_order,
                "path": [list(c) for c in self.path], "prev": list(self.prev_cell),
                "rest": list(self.rest_cell)}

    @classmethod
    def from_dict(cls, d: dict) -> "Worker":
        return cls(worker_id=d["id"], x=d["x"], y=d["y"], vx=d["vx"], vy=d["vy"],
                   max_speed=d["max_speed"], state=d["state"], assigned_order=d["order"],
                   path=[tuple(c) for c in d["path"]], prev_cell=tuple(d["prev"]),
                   rest_cell=tuple(d["rest"]))


@dataclass(frozen=True)
class Event:
    t: float
    kind: str
    order_id: int | None = None
    amr_id: int | None = None
    worker_id: int | None = None
    position: tuple[float, float] | None = None

    def to_record(self) -> dict:
        rec: dict = {"t": self.t, "kind": self.kind}
        if self.order_id is not None:
            rec["order_id"] = self.order_id
        if self.amr_id is not None:
            rec["amr_id"] = self.amr_id
        if self.worker_id is not None:
            rec["worker_id"] = self.worker_id
        if self.position is not None:
            rec["position"] = [self.position[0], self.position[1]]
        return rec

    def to_line(self) -> str:
        return json.dumps(self.to_record(), separators=(",", ":"))


@dataclass(frozen=True)
class Assignment:
    order_id: int
    amr_id: int | None = None
    worker_id: int | None = None


@dataclass(frozen=True)
class TickReport:
    tick: int
    t: float
    events: tuple[Event, ...]
    person_distances: tuple[float, ...]


class WorldState:
    """Full mutable simulation state; single-writer, freely copyable via snapshot."""

    def __init__(self, scenario: ScenarioConfig, layout: WarehouseLayout):
        self.scenario = scenario
        self.layout = layout
        self.tick = 0
        self.amrs: list[Amr] = []
        self.workers: list[Worker] = []
        self.orders: dict[int, Order] = {}
        self.queue: list[int] = []
        self.pending_worker: list[int] = []
        self.next_order_id = 1
        self.phase_index = 0
        self.arrivals_in_phase = 0
        self.last_arrival_in_phase = 0.0
        self.next_arrival: float = math.inf
        self.rngs: dict[str, np.random.Generator] = {}
        self.event_seq = 0
        self.completed_log: list[tuple[float, float]] = []
        self._tick_events: list[Event] = []
        # scratch buffers, derived only
        self._pos_buf: np.ndarray | None = None
        self._head_buf: np.ndarray | None = None
        self._amr_avoid_cache: frozenset[Cell] | None = None

    # -- time ----------------------------------------------------------

    @property
    def dt(self) -> float:
        return self.scenario.dt

    @property
    def now(self) -> float:
        return self.tick * self.scenario.dt

    @property
    def load_ticks(self) -> int:
        return max(1, round(self.scenario.load_duration / self.scenario.dt))

    # -- events ----------------------------------------------------------

    def emit(self, kind: str, **kw) -> None:
        self.event_seq += 1
        self._tick_events.append(Event(t=self.now, kind=kind, **kw))

    def drain_events(self) -> tuple[Event, ...]:
        ev = tuple(self._tick_events)
        self._tick_events.clear()
        return ev

    # -- rule enactment ----------------------------------------------------

    def set_rule(self, rule: SafetyRuleParams) -> None:
        rule.validate()
        for amr in self.amrs:
            amr.rule = rule

    def active_rule(self) -> SafetyRuleParams:
        return self.amrs[0].rule

    # -- serialization ----------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "format": SNAPSHOT_FORMAT,
            "scenario": self.scenario.to_dict(),
            "layout": self.layout.to_dict(),
            "tick": self.tick,
            "amrs": [a.to_dict() for a in self.amrs],
            "workers": [w.to_dict() for w in self.workers],
            "orders": [o.to_dict() for o in self.orders.values()],
            "queue": list(self.queue),
            "pending_worker": list(self.pending_worker),
            "next_order_id": self.next_order_id,
            "phase_index": self.phase_index,
            "arrivals_in_phase": self.arrivals_in_phase,
            "last_arrival_in_phase": self.last_arrival_in_phase,
            "next_arrival": None if math.isinf(self.next_arrival) else self.next_arrival,
            "rng": {name: _rng_state_dict(gen) for name, gen in self.rngs.items()},
            "event_seq": self.event_seq,
            "completed_log": [[t, s] for t, s in self.completed_log],
        }


def _rng_state_dict(gen: np.random.Generator) -> dict:
    st = gen.bit_generator.state
    return {"state": str(st["state"]["state"]), "inc": str(st["state"]["inc"]),
            "has_uint32": st["has_uint32"], "uinteger": st["uinteger"]}


def _rng_from_state(d: dict) -> np.random.Generator:
    bg = np.random.PCG64()
    bg.state = {"bit_generator": "PCG64",
                "state": {"state": int(d["state"]), "inc": int(d["inc"])},
                "has_uint32": d["has_uint32"], "uinteger": d["uinteger"]}
    return np.random.Generator(bg)


def make_rng_streams(seed: int) -> dict[str, np.random.Generator]:
    return {name: np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(i,))))
            for i, name in enumerate(RNG_STREAMS)}


# ----------------------------------------------------------------------
# construction


def build_world(scenario: ScenarioConfig, layout: WarehouseLayout | None = None) -> WorldState:
    """Place agents at their home and rest cells and arm the arrival schedule."""
    scenario.validate_fields()
    if layout is None:
        layout = load_layout(scenario.layout_ref)
    if scenario.amr_count > len(layout.amr_home_zone):
        raise InvalidScenario(
            f"layout has {len(layout.amr_home_zone)} home cells for {scenario.amr_count} AMRs")
    if scenario.worker_count > len(layout.worker_rest_zones):
        raise InvalidScenario(
            f"layout has {len(layout.worker_rest_zones)} rest cells for {scenario.worker_count} workers")

    world = WorldState(scenario, layout)
    for i in range(scenario.amr_count):
        home = layout.amr_home_zone[i]
        cx, cy = layout.cell_center(home)
        world.amrs.append(Amr(amr_id=i, x=cx, y=cy, max_speed=scenario.amr_max_speed,
                              rule=scenario.rule, home_cell=home))
    for j in range(scenario.worker_count):
        rest = layout.worker_rest_zones[j]
        cx, cy = layout.cell_center(rest)
        world.workers.append(Worker(worker_id=j, x=cx, y=cy,
                                    max_speed=scenario.worker_max_speed, rest_cell=rest))
    world.rngs = make_rng_streams(scenario.seed)
    world.next_arrival = _first_arrival(world)
    return world


def _first_arrival(world: WorldState) -> float:
    return _next_arrival_time(world)


def _next_arrival_time(world: WorldState) -> float:
    """Advance the schedule state machine and return the next arrival instant.

    Each phase anchors at its own start; a draw that lands beyond the phase
    end is discarded and generation re-anchors at the next phase.  An
    arrival landing exactly on a boundary belongs to the earlier phase.
    """
    sched = world.scenario.schedule
    phases = sched.phases
    while True:
        ph = phases[world.phase_index]
        end = sched.phase_end(world.phase_index)
        if ph.distribution == DIST_FIXED:
            t = ph.start + (world.arrivals_in_phase + 1) * ph.mean_interarrival
        else:
            base = world.last_arrival_in_phase if world.arrivals_in_phase > 0 else ph.start
            t = base + float(world.rngs["arrivals"].exponential(ph.mean_interarrival))
        if t <= end:
            world.arrivals_in_phase += 1
            world.last_arrival_in_phase = t
            return t
        if world.phase_index + 1 >= len(phases):
            return math.inf
        world.phase_index += 1
        world.arrivals_in_phase = 0


# ----------------------------------------------------------------------
# order arrivals and dispatch


def spawn_orders(world: WorldState) -> list[Order]:
    """Emit every order whose scheduled arrival time has been reached."""
    spawned: list[Order] = []
    n_slots = len(world.layout.slots)
    while world.next_arrival <= world.now + 1e-9:
        slot_idx = int(world.rngs["arrivals"].integers(0, n_slots))
        order = Order(order_id=world.next_order_id,
                      slot_id=world.layout.slots[slot_idx].slot_id,
                      arrival_time=world.next_arrival)
        world.next_order_id += 1
        world.orders[order.order_id] = order
        world.queue.append(order.order_id)
        world.emit(EV_ORDER_ARRIVED, order_id=order.order_id)
        spawned.append(order)
        world.next_arrival = _next_arrival_time(world)
    return spawned


def _anchor_cell(world: WorldState, agent) -> Cell:
    if agent.path:
        return agent.path[0]
    return world.layout.cell_of(agent.x, agent.y)


def _amr_avoid(world: WorldState) -> frozenset[Cell]:
    """Cells robot routes stay out of: pedestrian lanes plus the delivery
    cell (as a transit cell - it is never excluded as a goal)."""
    avoid = world._amr_avoid_cache
    if avoid is None:
        avoid = frozenset(world.layout.worker_only | {world.layout.delivery_point})
        world._amr_avoid_cache = avoid
    return avoid


def _staging_cell(world: WorldState, slot) -> Cell:
    """Where the picker waits until the robot is parked at the berth.

    A few meters along the picking lane, so the picker is never standing on
    the robot's approach when it pulls in.  Prefers pedestrian-only cells
    when the floor marks any; falls back to the stand cell on floors too
    tight to stage.
    """
    k = max(0, round(world.scenario.worker_standoff / world.layout.cell_size))
    wx, wy = slot.worker_cell
    if k > 0:
        lanes = world.layout.worker_only
        candidates = ((wx - k, wy), (wx + k, wy))
        if lanes:
            for cand in candidates:
                if cand in lanes:
                    return cand
        for cand in candidates:
            if world.layout.walkable(cand):
                return cand
    return slot.worker_cell


def dispatch(world: WorldState) -> list[Assignment]:
    """Match queued orders to idle robots (FIFO, lowest id) and notify pickers.

    Orders that could not get a picker stay on a retry list, served FIFO by
    arrival whenever a picker frees up.
    """
    made: list[Assignment] = []
    layout = world.layout

    while world.queue:
        amr = next((a for a in world.amrs if a.state == AMR_IDLE), None)
        if amr is None:
            break
        order = world.orders[world.queue.pop(0)]
        slot = layout.slot(order.slot_id)
        order.state = ASSIGNED
        order.amr_id = amr.amr_id
        amr.assigned_order = order.order_id
        amr.state = AMR_TO_PICKUP
        amr.path = plan_path(layout, _anchor_cell(world, amr), slot.pickup_cell,
                             extra_blocked=_amr_avoid(world))
        amr.gov_state = GOV_NORMAL
        amr.stopped_ticks = 0
        world.emit(EV_ASSIGNED, order_id=order.order_id, amr_id=amr.amr_id,
                   position=(amr.x, amr.y))
        world.pending_worker.append(order.order_id)
        made.append(Assignment(order_id=order.order_id, amr_id=amr.amr_id))

    if world.pending_worker:
        # a picker is dispatchable once back at rest; mid-return they are off
        # the books, which makes picker capacity track how long robots keep
        # them waiting at the racks
        idle = [w for w in world.workers
                if w.assigned_order is None and w.state == WK_RESTING]
        still_pending: list[int] = []
        for order_id in world.pending_worker:
            if not idle:
                still_pending.append(order_id)
                continue
            order = world.orders[order_id]
            slot = layout.slot(order.slot_id)
            fld = layout.distance_field(slot.pickup_cell)
            worker = min(idle, key=lambda w: (int(fld[_anchor_cell(world, w)]), w.worker_id))
            idle.remove(worker)
            order.worker_id = worker.worker_id
            worker.assigned_order = order_id
            worker.state = WK_TO_PICKUP
            worker.path = plan_path(layout, _anchor_cell(world, worker), _staging_cell(world, slot))
            world.emit(EV_WORKER_NOTIFIED, order_id=order_id, worker_id=worker.worker_id,
                       position=(worker.x, worker.y))
            made.append(Assignment(order_id=order_id, worker_id=worker.worker_id))
        world.pending_worker = still_pending
    return made


# ----------------------------------------------------------------------
# the safety governor


def governed_speed(rule: SafetyRuleParams, nearest_entity_distance: float,
                   max_speed: float) -> float:
    """Speed permitted by the rule given the distance of the nearest agent."""
    if nearest_entity_distance <= rule.stop_radius_x:
        return 0.0
    if nearest_entity_distance <= rule.slow_radius_y:
        return rule.slow_factor * max_speed
    return max_speed


# ----------------------------------------------------------------------
# movement helpers


def _move_along_path(world: WorldState, agent, budget: float) -> None:
    layout = world.layout
    x, y = agent.x, agent.y
    while budget > 1e-12 and agent.path:
        tx, ty = layout.cell_center(agent.path[0])
        seg = math.hypot(tx - x, ty - y)
        if seg <= budget + 1e-12:
            x, y = tx, ty
            budget -= seg
            agent.prev_cell = agent.path.pop(0)
        else:
            x += (tx - x) / seg * budget
            y += (ty - y) / seg * budget
            budget = 0.0
    agent.x, agent.y = x, y


def _replan_around_blockers(world: WorldState, amr: Amr) -> bool:
    """Route a stalled robot around its neighbors, backing out if needed.

    Plans from the last waypoint the robot actually reached (it can always
    retreat along its own segment), avoiding every cell another agent
    currently occupies.  Returns True when a fresh path was adopted.
    """
    if not amr.path:
        return False
    goal = amr.path[-1]
    occupied: set[Cell] = set()
    for other in world.amrs:
        if other is not amr:
            occupied.add(world.layout.cell_of(other.x, other.y))
    for wk in world.workers:
        occupied.add(world.layout.cell_of(wk.x, wk.y))
    occupied.update(_amr_avoid(world))
    start = amr.prev_cell
    occupied.discard(start)
    try:
        amr.path = plan_path(world.layout, start, goal, extra_blocked=occupied,
                             max_nodes=REPLAN_NODE_BUDGET)
        return True
    except Unreachable:
        return False


def _direction_is_clear(world: WorldState, amr: Amr, tx: float, ty: float) -> bool:
    """No agent inside the stop radius along the heading toward (tx, ty)."""
    hx, hy = tx - amr.x, ty - amr.y
    norm = math.hypot(hx, hy)
    if norm < 1e-9:
        return True
    hx, hy = hx / norm, hy / norm
    margin = amr.rule.stop_radius_x + 0.05
    for other in world.amrs:
        if other is amr:
            continue
        dx, dy = other.x - amr.x, other.y - amr.y
        d = math.hypot(dx, dy)
        if d <= margin and hx * dx + hy * dy > FRONT_CONE_COS * d:
            return False
    for wk in world.workers:
        dx, dy = wk.x - amr.x, wk.y - amr.y
        d = math.hypot(dx, dy)
        if d <= margin and hx * dx + hy * dy > FRONT_CONE_COS * d:
            return False
    return True


def _retreat_step(world: WorldState, amr: Amr) -> None:
    """Back the robot one cell out of a crowd it cannot route around.

    Dense convergence (every cell near the goal occupied by mutually
    stopped robots) is a physical standoff no amount of path search fixes:
    someone has to give ground.  The robot reverses into an open direction
    (one with no agent inside its stop radius, so the retreat cannot set up
    a fresh face-off) and then re-approaches; a frozen cluster churns and
    drains from its outer layer inward.
    """
    if not amr.path:
        return
    layout = world.layout
    cur = layout.cell_of(amr.x, amr.y)
    ahead = amr.path[0]
    mirror = (2 * cur[0] - ahead[0], 2 * cur[1] - ahead[1])
    options = [mirror] + [(cur[0] + dx, cur[1] + dy) for dx, dy in
                          ((0, -1), (1, 0), (0, 1), (-1, 0))]
    avoid = _amr_avoid(world)
    for cand in options:
        if cand == ahead or not layout.walkable(cand) or cand in avoid:
            continue
        cx, cy = layout.cell_center(cand)
        if not _direction_is_clear(world, amr, cx, cy):
            continue
        if cur != ahead:
            amr.path.insert(0, cur)
        amr.path.insert(0, cand)
        return


# ----------------------------------------------------------------------
# the tick


def step(world: WorldState) -> TickReport:
    """Advance the world one tick; never raises for in-simulation conditions."""
    world.tick += 1
    now = world.now
    dt = world.dt

    spawn_orders(world)
    dispatch(world)

    amrs = world.amrs
    workers = world.workers
    n_a = len(amrs)
    n = n_a + len(workers)

    # sense phase: all distances taken simultaneously at the start of the tick
    movers = [a for a in amrs
              if a.path and a.state in (AMR_TO_PICKUP, AMR_TO_DELIVERY, AMR_IDLE)]
    cell_center = world.layout.cell_center
    if not movers:
        d_any = d_front = None
    elif len(movers) <= 3:
        # light traffic: scalar loops beat the matrix setup
        d_any = {}
        d_front = {}
        others = [(a.x, a.y) for a in amrs] + [(w.x, w.y) for w in workers]
        for a in movers:
            tx, ty = cell_center(a.path[0])
            hx, hy = tx - a.x, ty - a.y
            norm = math.hypot(hx, hy)
            if norm > 1e-12:
                hx, hy = hx / norm, hy / norm
            da = df = math.inf
            i = a.amr_id
            for j, (ox, oy) in enumerate(others):
                if j == i:
                    continue
                dx, dy = ox - a.x, oy - a.y
                d = math.sqrt(dx * dx + dy * dy)
                if d < da:
                    da = d
                if d < df and hx * dx + hy * dy > FRONT_CONE_COS * d + 1e-12:
                    df = d
            d_any[i] = da
            d_front[i] = df
    else:
        if world._pos_buf is None or world._pos_buf.shape[0] != n:
            world._pos_buf = np.empty((n, 2))
            world._head_buf = np.empty((n_a, 2))
        P = world._pos_buf
        H = world._head_buf
        for i, a in enumerate(amrs):
            P[i, 0] = a.x
            P[i, 1] = a.y
            if a.path and a.state in (AMR_TO_PICKUP, AMR_TO_DELIVERY, AMR_IDLE):
                tx, ty = cell_center(a.path[0])
                hx, hy = tx - a.x, ty - a.y
                norm = math.hypot(hx, hy)
                if norm > 1e-12:
                    H[i, 0] = hx / norm
                    H[i, 1] = hy / norm
                else:
                    H[i, 0] = H[i, 1] = 0.0
            else:
                H[i, 0] = H[i, 1] = 0.0
        for j, w in enumerate(workers):
            P[n_a + j, 0] = w.x
            P[n_a + j, 1] = w.y
        diff = P[None, :, :] - P[:n_a, None, :]          # vector AMR i -> agent j
        D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        for i in range(n_a):
            D[i, i] = np.inf
        d_any = D.min(axis=1)
        dots = np.einsum("ijk,ik->ij", diff, H)
        d_front = np.where(dots > FRONT_CONE_COS * D + 1e-12, D, np.inf).min(axis=1)

    # robot updates, ascending id
    for i, amr in enumerate(amrs):
        x0, y0 = amr.x, amr.y
        if amr.state in (AMR_TO_PICKUP, AMR_TO_DELIVERY, AMR_IDLE) and amr.path:
            rule = amr.rule
            if d_front[i] <= rule.stop_radius_x:
                speed, gov = 0.0, GOV_STOP
            elif d_any[i] <= rule.slow_radius_y:
                speed, gov = rule.slow_factor * amr.max_speed, GOV_SLOW
            else:
                speed, gov = amr.max_speed, GOV_NORMAL
            if gov != amr.gov_state:
                if gov == GOV_STOP:
                    world.emit(EV_EMERGENCY_STOP, amr_id=amr.amr_id, position=(amr.x, amr.y))
                elif gov == GOV_SLOW:
                    world.emit(EV_SLOW_DOWN, amr_id=amr.amr_id, position=(amr.x, amr.y))
                amr.gov_state = gov
            if gov == GOV_STOP:
                amr.stopped_ticks += 1
                if amr.stopped_ticks >= amr.replan_window:
                    # alternate between routing around and giving ground: a
                    # replanned path that still cannot move is no progress
                    if amr.stall_retreat_next:
                        _retreat_step(world, amr)
                        amr.stall_retreat_next = False
                        amr.replan_window = min(REPLAN_BACKOFF_CAP, amr.replan_window * 2)
                    elif _replan_around_blockers(world, amr):
                        amr.stall_retreat_next = True
                        amr.replan_window = REPLAN_AFTER_TICKS
                    else:
                        _retreat_step(world, amr)
                        amr.replan_window = min(REPLAN_BACKOFF_CAP, amr.replan_window * 2)
                    amr.stopped_ticks = 0
            else:
                amr.stopped_ticks = 0
                amr.replan_window = REPLAN_AFTER_TICKS
                amr.stall_retreat_next = False
                _move_along_path(world, amr, speed * dt)
                if not amr.path:
                    _on_amr_arrival(world, amr, now)
        elif amr.state == AMR_WAITING:
            _maybe_start_loading(world, amr)
        elif amr.state == AMR_LOADING:
            amr.load_ticks_left -= 1
            if amr.load_ticks_left <= 0:
                _finish_loading(world, amr)
        amr.vx = (amr.x - x0) / dt
        amr.vy = (amr.y - y0) / dt

    # picker updates, ascending id
    for wk in workers:
        x0, y0 = wk.x, wk.y
        if wk.path and wk.state in (WK_TO_PICKUP, WK_RETURNING):
            _move_along_path(world, wk, wk.max_speed * dt)
            if not wk.path and wk.state == WK_RETURNING:
                wk.state = WK_RESTING
        elif wk.state == WK_TO_PICKUP and not wk.path:
            # standing at the staging cell; walk in once the robot is parked
            order = world.orders[wk.assigned_order]
            amr = world.amrs[order.amr_id]
            slot = world.layout.slot(order.slot_id)
            at_stand = world.layout.cell_of(wk.x, wk.y) == slot.worker_cell
            if not at_stand and amr.state in (AMR_WAITING, AMR_LOADING):
                wk.path = plan_path(world.layout, world.layout.cell_of(wk.x, wk.y),
                                    slot.worker_cell)
                _move_along_path(world, wk, wk.max_speed * dt)
        wk.vx = (wk.x - x0) / dt
        wk.vy = (wk.y - y0) / dt

    distances = _person_distances(world)
    return TickReport(tick=world.tick, t=now, events=world.drain_events(),
                      person_distances=distances)


def _on_amr_arrival(world: WorldState, amr: Amr, now: float) -> None:
    if amr.state == AMR_TO_PICKUP:
        amr.state = AMR_WAITING
        amr.gov_state = GOV_NORMAL
        _maybe_start_loading(world, amr)
    elif amr.state == AMR_TO_DELIVERY:
        order = world.orders[amr.assigned_order]
        order.state = COMPLETED
        order.completion_time = now
        world.completed_log.append((now, now - order.arrival_time))
        world.emit(EV_DELIVERED, order_id=order.order_id, amr_id=amr.amr_id,
                   position=(amr.x, amr.y))
        amr.assigned_order = None
        amr.state = AMR_IDLE
        amr.gov_state = GOV_NORMAL
        cur = world.layout.cell_of(amr.x, amr.y)
        if cur != amr.home_cell:
            amr.path = plan_path(world.layout, cur, amr.home_cell,
                                 extra_blocked=_amr_avoid(world))
    # AMR_IDLE arriving home: nothing to do


def _maybe_start_loading(world: WorldState, amr: Amr) -> None:
    order = world.orders[amr.assigned_order]
    if order.worker_id is None:
        return
    worker = world.workers[order.worker_id]
    if worker.state != WK_TO_PICKUP or worker.path:
        return
    slot = world.layout.slot(order.slot_id)
    px, py = world.layout.cell_center(slot.pickup_cell)
    if math.hypot(worker.x - px, worker.y - py) <= world.scenario.load_range:
        amr.state = AMR_LOADING
        amr.load_ticks_left = world.load_ticks
        worker.state = WK_PICKING
        world.emit(EV_LOAD_START, order_id=order.order_id, amr_id=amr.amr_id,
                   worker_id=worker.worker_id, position=(amr.x, amr.y))


def _finish_loading(world: WorldState, amr: Amr) -> None:
    order = world.orders[amr.assigned_order]
    worker = world.workers[order.worker_id]
    world.emit(EV_LOAD_END, order_id=order.order_id, amr_id=amr.amr_id,
               worker_id=worker.worker_id, position=(amr.x, amr.y))
    order.state = IN_TRANSIT
    amr.state = AMR_TO_DELIVERY
    amr.gov_state = GOV_NORMAL
    amr.stopped_ticks = 0
    amr.path = plan_path(world.layout, world.layout.cell_of(amr.x, amr.y),
                         world.layout.delivery_point,
                         extra_blocked=_amr_avoid(world))
    worker.assigned_order = None
    worker.state = WK_RETURNING
    anchor = world.layout.cell_of(worker.x, worker.y)
    rest = min(world.layout.worker_rest_zones,
               key=lambda c: (world.layout.path_distance(anchor, c), c))
    worker.path = plan_path(world.layout, anchor, rest)


def _person_distances(world: WorldState) -> tuple[float, ...]:
    """Per picker: distance of the nearest robot moving toward them, inf if none."""
    eps2 = EPSILON_SPEED * EPSILON_SPEED
    moving = [a for a in world.amrs if a.vx * a.vx + a.vy * a.vy > eps2]
    n_w = len(world.workers)
    if not moving:
        return (math.inf,) * n_w
    if len(moving) * n_w <= 64:
        # small case: plain loops beat array setup
        out = []
        for wk in world.workers:
            best = math.inf
            wx, wy = wk.x, wk.y
            for a in moving:
                dx, dy = wx - a.x, wy - a.y
                if a.vx * dx + a.vy * dy > 0.0:
                    d2 = dx * dx + dy * dy
                    if d2 < best:
                        best = d2
            out.append(math.sqrt(best) if best is not math.inf else math.inf)
        return tuple(out)
    PA = np.array([(a.x, a.y) for a in moving])
    VA = np.array([(a.vx, a.vy) for a in moving])
    PW = np.array([(w.x, w.y) for w in world.workers])
    diff = PW[None, :, :] - PA[:, None, :]
    D = np.einsum("awk,awk->aw", diff, diff)
    dots = np.einsum("awk,ak->aw", diff, VA)
    D = np.where(dots > 0.0, D, np.inf)
    return tuple(float(math.sqrt(v)) if not math.isinf(v) else math.inf for v in D.min(axis=0))


# ----------------------------------------------------------------------
# snapshot / restore


def snapshot(world: WorldState) -> bytes:
    """Complete, self-contained serialization, RNG stream states included."""
    return json.dumps(world.state_dict(), separators=(",", ":")).encode("utf-8")


def restore(data: bytes) -> WorldState:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptSnapshot(f"snapshot is not valid JSON: {exc}") from exc
    try:
        if doc["format"] != SNAPSHOT_FORMAT:
            raise CorruptSnapshot(f"unsupported snapshot format {doc['format']!r}")
        scenario = ScenarioConfig.from_dict(doc["scenario"])
        layout_key = json.dumps(doc["layout"], separators=(",", ":"), sort_keys=True)
        layout = _LAYOUT_CACHE.get(layout_key)
        if layout is None:
            layout = WarehouseLayout.from_dict(doc["layout"])
            _LAYOUT_CACHE[layout_key] = layout
        world = WorldState(scenario, layout)
        world.tick = doc["tick"]
        world.amrs = [Amr.from_dict(d) for d in doc["amrs"]]
        world.workers = [Worker.from_dict(d) for d in doc["workers"]]
        world.orders = {d["id"]: Order.from_dict(d) for d in doc["orders"]}
        world.queue = list(doc["queue"])
        world.pending_worker = list(doc["pending_worker"])
        world.next_order_id = doc["next_order_id"]
        world.phase_index = doc["phase_index"]
        world.arrivals_in_phase = doc["arrivals_in_phase"]
        world.last_arrival_in_phase = doc["last_arrival_in_phase"]
        world.next_arrival = math.inf if doc["next_arrival"] is None else doc["next_arrival"]
        world.rngs = {name: _rng_from_state(st) for name, st in doc["rng"].items()}
        world.event_seq = doc["event_seq"]
        world.completed_log = [(t, s) for t, s in doc["completed_log"]]
        return world
    except (KeyError, TypeError, ValueError, InvalidScenario) as exc:
        raise CorruptSnapshot(f"snapshot is structurally invalid: {exc}") from exc
