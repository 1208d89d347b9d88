"""Safety and productivity metrics and their time series.

Safety is a per-person score in [0, 1] derived from the distance of the
nearest robot moving toward that person; productivity is derived from the
average service time of recently completed orders.  Both saturate: beyond
the distance threshold a person counts as fully safe, and past the largest
tolerable service time productivity bottoms out at zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .world import EPSILON_SPEED, WorldState

HISTOGRAM_BIN_WIDTH = 0.05
HISTOGRAM_BINS = 20


class EmptyPopulation(ValueError):
    """No persons to aggregate over."""


class NoCompletedOrders(ValueError):
    """Service-time statistics need at least one completed order."""


class UnknownPerson(KeyError):
    """No worker with the requested id."""


@dataclass(frozen=True)
class SafetyConfig:
    d_th: float = 4.0
    epsilon_speed: float = EPSILON_SPEED

    def __post_init__(self) -> None:
        if self.d_th <= 0:
            raise ValueError("d_th must be positive")


@dataclass(frozen=True)
class ProductivityConfig:
    window_n: int = 20
    t_th: float = 400.0

    def __post_init__(self) -> None:
        if self.window_n < 1:
            raise ValueError("window_n must be at least 1")
        if self.t_th <= 0:
            raise ValueError("t_th must be positive")


@dataclass(frozen=True)
class Preference:
    w_s: float
    w_p: float

    def validate(self, tolerance: float = 1e-9) -> None:
        if not (0.0 <= self.w_s <= 1.0 and 0.0 <= self.w_p <= 1.0):
            raise ValueError(f"weights must lie in [0, 1], got ({self.w_s}, {self.w_p})")
        if abs(self.w_s + self.w_p - 1.0) > tolerance:
            raise ValueError(f"weights must sum to 1, got {self.w_s} + {self.w_p}")


def person_distance(world: WorldState, person_id: int,
                    cfg: SafetyConfig = SafetyConfig()) -> float:
    """Distance to the nearest robot moving toward the person; inf if none is.

    A robot counts as moving toward the person when its speed exceeds
    ``epsilon_speed`` and its velocity has a positive component along the
    robot-to-person direction.
    """
    try:
        person = world.workers[person_id]
    except IndexError:
        raise UnknownPerson(person_id)
    best = math.inf
    for amr in world.amrs:
        if math.hypot(amr.vx, amr.vy) <= cfg.epsilon_speed:
            continue
        dx, dy = person.x - amr.x, person.y - amr.y
        if amr.vx * dx + amr.vy * dy <= 0.0:
            continue
        best = min(best, math.hypot(dx, dy))
    return best


def person_safety(d_i: float, cfg: SafetyConfig = SafetyConfig()) -> float:
    """s_i = d_i / max(d_i, d_th); saturates at 1 beyond the threshold."""
    if math.isinf(d_i):
        return 1.0
    return d_i / max(d_i, cfg.d_th)


def safety_mean(values) -> float:
    values = list(values)
    if not values:
        raise EmptyPopulation("safety_mean of an empty population")
    return sum(values) / len(values)


def safety_min(values) -> float:
    values = list(values)
    if not values:
        raise EmptyPopulation("safety_min of an empty population")
    return min(values)


def avg_service_time(history, n: int) -> float:
    """Mean service time over the most recent min(n, available) completions.

    ``history`` holds (completion_time, service_time) pairs in completion
    order, as accumulated by the world.
    """
    history = list(history)
    if not history:
        raise NoCompletedOrders("no completed orders yet")
    window = history[-n:] if n < len(history) else history
    return sum(s for _, s in window) / len(window)


def productivity(avg: float, cfg: ProductivityConfig = ProductivityConfig()) -> float:
    """1 - avg / max(T_th, avg); zero once the tolerable service time is hit."""
    return 1.0 - avg / max(cfg.t_th, avg)


def overall(safety: float, productivity_value: float, pref: Preference) -> float:
    pref.validate()
    return pref.w_s * safety + pref.w_p * productivity_value


def histogram_bin(sample: float) -> int:
    return min(int(sample / HISTOGRAM_BIN_WIDTH), HISTOGRAM_BINS - 1)


@dataclass
class MetricsSeries:
    """Per-tick safety samples plus per-completion productivity samples.

    The safety-min histogram counts saturated samples (exactly 1.0)
    separately so they can be excluded from the displayed distribution.
    """

    safety_cfg: SafetyConfig = field(default_factory=SafetyConfig)
    productivity_cfg: ProductivityConfig = field(default_factory=ProductivityConfig)
    tick_t: list[float] = field(default_factory=list)
    safety_mean_series: list[float] = field(default_factory=list)
    safety_min_series: list[float] = field(default_factory=list)
    completion_t: list[float] = field(default_factory=list)
    avg_service_series: list[float] = field(default_factory=list)
    productivity_series: list[float] = field(default_factory=list)
    hist_counts: list[int] = field(default_factory=lambda: [0] * HISTOGRAM_BINS)
    hist_saturated: int = 0

    def record_tick(self, t: float, person_distances) -> tuple[float, float]:
        d_th = self.safety_cfg.d_th
        s_values = [d / max(d, d_th) if not math.isinf(d) else 1.0 for d in person_distances]
        mean_v = sum(s_values) / len(s_values)
        min_v = min(s_values)
        self.tick_t.append(t)
        self.safety_mean_series.append(mean_v)
        self.safety_min_series.append(min_v)
        if min_v >= 1.0:
            self.hist_saturated += 1
        else:
            self.hist_counts[histogram_bin(min_v)] += 1
        return mean_v, min_v

    def record_completion(self, t: float, completed_log) -> tuple[float, float]:
        avg = avg_service_time(completed_log, self.productivity_cfg.window_n)
        prod = productivity(avg, self.productivity_cfg)
        self.completion_t.append(t)
        self.avg_service_series.append(avg)
        self.productivity_series.append(prod)
        return avg, prod

    @property
    def last_avg_service(self) -> float | None:
        return self.avg_service_series[-1] if self.avg_service_series else None

    @property
    def last_productivity(self) -> float | None:
        return self.productivity_series[-1] if self.productivity_series else None

    def time_averaged_safety_min(self) -> float:
        if not self.safety_min_series:
            raise EmptyPopulation("no safety samples recorded")
        return sum(self.safety_min_series) / len(self.safety_min_series)

    def sub_saturated_safety_mean(self) -> float:
        """Mean of the safety-min samples below 1; 1.0 when every tick saturated.

        This is the statistic the safety histogram displays, and the one the
        what-if scoring uses: the time average drowns the sub-saturated tail
        in saturated ticks and barely reacts to the rule at all.
        """
        if not self.safety_min_series:
            raise EmptyPopulation("no safety samples recorded")
        subs = [s for s in self.safety_min_series if s < 1.0]
        return sum(subs) / len(subs) if subs else 1.0


def record_histogram(series: MetricsSeries, sample: float) -> MetricsSeries:
    """Fold one safety-min sample into the histogram; 1.0 counts as saturated."""
    if sample >= 1.0:
        series.hist_saturated += 1
    else:
        series.hist_counts[histogram_bin(sample)] += 1
    return series


def export_series_csv(series: MetricsSeries, path) -> None:
    """One row per tick; service-time columns hold the last completed value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "safety_mean", "safety_min", "avg_service_time", "productivity"])
        ci = 0
        last_avg: float | str = ""
        last_prod: float | str = ""
        for i, t in enumerate(series.tick_t):
            while ci < len(series.completion_t) and series.completion_t[ci] <= t:
                last_avg = series.avg_service_series[ci]
                last_prod = series.productivity_series[ci]
                ci += 1
            writer.writerow([repr(t), repr(series.safety_mean_series[i]),
                             repr(series.safety_min_series[i]),
                             repr(last_avg) if last_avg != "" else "",
                             repr(last_prod) if last_prod != "" else ""])


def export_histogram_csv(series: MetricsSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "count", "saturated_count"])
        for b in range(HISTOGRAM_BINS):
            low = b * HISTOGRAM_BIN_WIDTH
            high = (b + 1) * HISTOGRAM_BIN_WIDTH
            writer.writerow([f"{low:.2f}", f"{high:.2f}", series.hist_counts[b],
                             series.hist_saturated if b == 0 else ""])
