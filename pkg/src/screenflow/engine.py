"""Discrete-event simulation of one replication.

All randomness for a replication is drawn up front into a tape indexed by
(lorry, stage, slot): one uniform per check decision, per chain selection
and per inspection outcome, plus one per service time from a separate
stream. Outcomes are decided by inversion (``u < rate``), so two runs that
share a substream see the same draws for the same decisions.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .cba import cost_of
from .errors import HorizonOverflowError
from .scenario import RoutingNetwork, Scenario, ServiceTime
from .streams import replication_streams

ARRIVAL = 0
COMPLETION = 1


class EventCalendar:
    """Pending events ordered by ``(time, insertion sequence)``."""

    __slots__ = ("_heap", "_seq", "clock")

    def __init__(self):
        self._heap: list[tuple] = []
        self._seq = 0
        self.clock = 0.0

    def schedule(self, time: float, kind: int, lorry: int, station: int = -1):
        heapq.heappush(self._heap, (time, self._seq, kind, lorry, station))
        self._seq += 1

    def pop(self) -> tuple:
        event = heapq.heappop(self._heap)
        self.clock = event[0]
        return event

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def __len__(self) -> int:
        return len(self._heap)


@dataclass(frozen=True)
class StationStats:
    key: str
    cost_per_inspection: float
    inspections: int = 0
    detections: int = 0
    false_alarms: int = 0
    balked: int = 0
    max_queue_length: int | None = None
    mean_wait_hours: float | None = None


@dataclass(frozen=True)
class ReplicationResult:
    """Counters and costs from one replication.

    Queue statistics and ``end_time_hours`` are None when the replication
    ran in counts-only mode (see :func:`run_replication`).
    """

    seed: int
    horizon_hours: float
    stage_count: int
    arrivals: int
    carriers_generated: int
    clandestines_generated: int
    clandestines_detected: int
    clandestines_undetected: int
    detections: int
    false_alarms: int
    balked_lorries: int
    stations: tuple[StationStats, ...]
    stage_detections: tuple[int, ...]
    end_time_hours: float | None = None
    direct_cost: float = 0.0
    indirect_cost: float = 0.0
    total_cost: float = 0.0

    @property
    def inspections(self) -> int:
        return sum(st.inspections for st in self.stations)

    def station(self, key: str) -> StationStats:
        for st in self.stations:
            if st.key == key:
                return st
        raise KeyError(key)

    def invariant_violations(self) -> list[str]:
        bad = []
        if self.clandestines_detected + self.clandestines_undetected != self.clandestines_generated:
            bad.append("conservation")
        if self.total_cost != self.direct_cost + self.indirect_cost:
            bad.append("total_cost")
        counts = [
            self.arrivals, self.carriers_generated, self.clandestines_generated,
            self.clandestines_detected, self.clandestines_undetected, self.detections,
            self.false_alarms, self.balked_lorries,
        ]
        counts += [c for st in self.stations for c in (st.inspections, st.detections, st.false_alarms, st.balked)]
        if any(c < 0 for c in counts):
            bad.append("negative count")
        return bad


def _priced(result: ReplicationResult, s: Scenario) -> ReplicationResult:
    cb = cost_of(result, s.cost_model)
    return replace(result, direct_cost=cb.direct, indirect_cost=cb.indirect, total_cost=cb.total)


# ---------------------------------------------------------------------------
# Random tape


@dataclass
class Tape:
    arrival_times: np.ndarray
    soft: np.ndarray
    carrier: np.ndarray
    group: np.ndarray
    check_u: np.ndarray  # (n, stages)
    select_u: np.ndarray  # (n, stages, slots)
    detect_u: np.ndarray  # (n, stages, slots)

    @property
    def n(self) -> int:
        return len(self.arrival_times)


def sample_arrivals(s: Scenario, rng: np.random.Generator) -> np.ndarray:
    """Nonhomogeneous Poisson arrivals on ``[0, horizon)``.

    Per segment: Poisson count, then uniform order statistics.
    """
    parts = []
    H = s.horizon_hours
    for i, seg in enumerate(s.arrival_schedule):
        end = s.arrival_schedule[i + 1].start_hour if i + 1 < len(s.arrival_schedule) else H
        end = min(end, H)
        width = end - seg.start_hour
        if width <= 0:
            continue
        count = rng.poisson(seg.rate * width)
        parts.append(np.sort(seg.start_hour + width * rng.random(count)))
    return np.concatenate(parts) if parts else np.empty(0)


def _group_sizes(s: Scenario, u: np.ndarray) -> np.ndarray:
    g = s.group_size
    if g.kind == "degenerate":
        return np.full(len(u), g.value, dtype=np.int64)
    if g.kind == "geometric":
        if g.p >= 1.0:
            return np.ones(len(u), dtype=np.int64)
        return (np.floor(np.log1p(-u) / math.log1p(-g.p)) + 1).astype(np.int64)
    weights = np.asarray(g.weights, dtype=float)
    cdf = np.cumsum(weights) / weights.sum()
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    return np.asarray(g.values, dtype=np.int64)[idx]


def draw_tape(
    net: RoutingNetwork,
    s: Scenario,
    seed: int,
    arrival_times: Sequence[float] | None = None,
) -> Tape:
    streams = replication_streams(seed)
    if arrival_times is None:
        times = sample_arrivals(s, streams.arrivals)
    else:
        times = np.sort(np.asarray(arrival_times, dtype=float))
    n, S, L = len(times), len(net.stages), net.slot_count
    lr = streams.lorries
    soft = lr.random(n) < s.soft_sided_probability
    carrier = lr.random(n) < s.carrier_probability
    group = np.where(carrier, _group_sizes(s, lr.random(n)), 0)
    ir = streams.inspections
    check_u = ir.random((n, S))
    select_u = ir.random((n, S, L))
    detect_u = ir.random((n, S, L))
    return Tape(times, soft, carrier, group, check_u, select_u, detect_u)


def _service_from_uniform(st: ServiceTime, u: np.ndarray) -> np.ndarray:
    if st.kind == "deterministic":
        return np.full(u.shape, float(st.value))
    if st.kind == "exponential":
        return -st.mean * np.log1p(-u)
    return np.exp(st.mu + st.sigma * ndtri(u))


def draw_service_times(net: RoutingNetwork, tape: Tape, seed: int) -> np.ndarray:
    """Service time for every (lorry, stage, slot), by the slot's station for that lorry's type."""
    n, S, L = tape.n, len(net.stages), net.slot_count
    u = replication_streams(seed).service.random((n, S, L))
    out = np.zeros((n, S, L))
    for k in range(S):
        table = net.slot_table(k)
        for j in range(L):
            for ti, mask in ((0, tape.soft), (1, ~tape.soft)):
                v = table[j][ti]
                if v is None:
                    continue
                law = net.stations[v.station_index].station.service_time
                out[mask, k, j] = _service_from_uniform(law, u[mask, k, j])
    return out


# ---------------------------------------------------------------------------
# Event-driven replication


class ReplicationState:
    """Mutable state of one replication in progress.

    Built by :func:`start_replication`; advanced with :meth:`run_until`
    and closed with :func:`drain_and_close`.
    """

    def __init__(self, net: RoutingNetwork, s: Scenario, seed: int, tape: Tape, service: np.ndarray,
                 drain_cap_factor: float = 10.0):
        self.net = net
        self.scenario = s
        self.seed = seed
        self.drain_cap_factor = drain_cap_factor
        self.calendar = EventCalendar()

        S = len(net.stages)
        self._times = tape.arrival_times.tolist()
        self._type = (~tape.soft).astype(np.int64).tolist()  # 0 soft, 1 hard
        self._carrier = tape.carrier.tolist()
        self._group = tape.group.tolist()
        checks = np.array([p.check_probability for p in net.stages])
        self._checked = (tape.check_u < checks).tolist()
        self._select = tape.select_u.tolist()
        self._detect = tape.detect_u.tolist()
        self._service = service.tolist()
        self._tables = [
            [[(v.station_index, v.selection_probability) if v else None for v in row] for row in net.slot_table(k)]
            for k in range(S)
        ]
        self._stage = [0] * len(self._times)
        self._slot = [0] * len(self._times)

        G = len(net.stations)
        self._servers = [r.station.servers for r in net.stations]
        self._capacity = [r.station.queue_capacity for r in net.stations]
        self._tp = [r.station.tp_rate for r in net.stations]
        self._fp = [r.station.fp_rate for r in net.stations]
        self._busy = [0] * G
        self._queues = [deque() for _ in range(G)]
        self.inspections = [0] * G
        self.station_detections = [0] * G
        self.station_false_alarms = [0] * G
        self.station_balks = [0] * G
        self.max_queue = [0] * G
        self._wait_total = [0.0] * G
        self._started = [0] * G
        self.stage_detections = [0] * S

        self.arrivals = 0
        self.carriers = 0
        self.clandestines = 0
        self.detected = 0
        self.undetected = 0
        self.in_system = 0

        if self._times:
            self.calendar.schedule(self._times[0], ARRIVAL, 0)

    # -- routing ----------------------------------------------------------

    def _advance(self, i: int, t: float):
        """Move lorry ``i`` to its next station, or out of the system."""
        k, j = self._stage[i], self._slot[i]
        ti = self._type[i]
        S = len(self._tables)
        while k < S:
            if j == 0 and not self._checked[i][k]:
                k += 1
                continue
            row = self._tables[k]
            sel = self._select[i][k]
            while j < len(row):
                entry = row[j][ti]
                if entry is not None and (j == 0 or sel[j] < entry[1]):
                    self._stage[i], self._slot[i] = k, j + 1
                    if self._join(i, entry[0], t):
                        return
                j += 1
            k, j = k + 1, 0
        self._stage[i], self._slot[i] = S, 0
        if self._carrier[i]:
            self.undetected += self._group[i]
        self.in_system -= 1

    def _join(self, i: int, g: int, t: float) -> bool:
        if self._busy[g] < self._servers[g]:
            self._busy[g] += 1
            self._start(i, g, t, t)
            return True
        q = self._queues[g]
        cap = self._capacity[g]
        if cap is not None and len(q) >= cap:
            self.station_balks[g] += 1
            return False
        q.append((i, t))
        if len(q) > self.max_queue[g]:
            self.max_queue[g] = len(q)
        return True

    def _start(self, i: int, g: int, t_queued: float, t: float):
        self._wait_total[g] += t - t_queued
        self._started[g] += 1
        svc = self._service[i][self._stage[i]][self._slot[i] - 1]
        self.calendar.schedule(t + svc, COMPLETION, i, g)

    def _complete(self, i: int, g: int, t: float):
        self.inspections[g] += 1
        k = self._stage[i]
        u = self._detect[i][k][self._slot[i] - 1]
        resolved = False
        if self._carrier[i]:
            if u < self._tp[g]:
                self.station_detections[g] += 1
                self.stage_detections[k] += 1
                self.detected += self._group[i]
                resolved = True
        elif u < self._fp[g]:
            self.station_false_alarms[g] += 1
            resolved = True
        q = self._queues[g]
        if q:
            nxt, t_queued = q.popleft()
            self._start(nxt, g, t_queued, t)
        else:
            self._busy[g] -= 1
        if resolved:
            self._stage[i] = len(self._tables)
            self.in_system -= 1
        else:
            self._advance(i, t)

    def _arrive(self, i: int, t: float):
        self.arrivals += 1
        self.in_system += 1
        if self._carrier[i]:
            self.carriers += 1
            self.clandestines += self._group[i]
        if i + 1 < len(self._times):
            self.calendar.schedule(self._times[i + 1], ARRIVAL, i + 1)
        self._advance(i, t)

    # -- driving ----------------------------------------------------------

    def step(self):
        t, _, kind, i, g = self.calendar.pop()
        if kind == ARRIVAL:
            self._arrive(i, t)
        else:
            self._complete(i, g, t)

    def run_until(self, limit: float):
        """Process every event strictly before ``limit``."""
        cal = self.calendar
        while cal.peek_time() < limit:
            self.step()

    def snapshot(self) -> ReplicationResult:
        stats = []
        for g, ref in enumerate(self.net.stations):
            started = self._started[g]
            stats.append(
                StationStats(
                    key=ref.key,
                    cost_per_inspection=ref.station.cost_per_inspection,
                    inspections=self.inspections[g],
                    detections=self.station_detections[g],
                    false_alarms=self.station_false_alarms[g],
                    balked=self.station_balks[g],
                    max_queue_length=self.max_queue[g],
                    mean_wait_hours=self._wait_total[g] / started if started else 0.0,
                )
            )
        s = self.scenario
        result = ReplicationResult(
            seed=self.seed,
            horizon_hours=s.horizon_hours,
            stage_count=len(s.stages),
            arrivals=self.arrivals,
            carriers_generated=self.carriers,
            clandestines_generated=self.clandestines,
            clandestines_detected=self.detected,
            clandestines_undetected=self.undetected,
            detections=sum(self.station_detections),
            false_alarms=sum(self.station_false_alarms),
            balked_lorries=sum(self.station_balks),
            stations=tuple(stats),
            stage_detections=tuple(self.stage_detections),
            end_time_hours=max(s.horizon_hours, self.calendar.clock),
        )
        return _priced(result, s)


def start_replication(
    net: RoutingNetwork,
    s: Scenario,
    substream_seed: int,
    *,
    arrival_times: Sequence[float] | None = None,
    drain_cap_factor: float = 10.0,
) -> ReplicationState:
    """Draw the tape and return a state positioned at time 0.

    ``arrival_times`` overrides the Poisson arrivals (useful for hand traces).
    """
    tape = draw_tape(net, s, substream_seed, arrival_times)
    service = draw_service_times(net, tape, substream_seed)
    return ReplicationState(net, s, substream_seed, tape, service, drain_cap_factor)


def drain_and_close(state: ReplicationState) -> ReplicationResult:
    """Finish every in-system lorry, then price the run.

    Fixed costs accrue over the nominal horizon only. Raises
    :class:`HorizonOverflowError` if draining runs past
    ``horizon * (1 + drain_cap_factor)``.
    """
    H = state.scenario.horizon_hours
    cap = H * (1.0 + state.drain_cap_factor)
    cal = state.calendar
    while len(cal):
        if cal.peek_time() > cap:
            raise HorizonOverflowError(
                f"drain still running at t={cal.peek_time():.3f}h, cap {cap:.3f}h; queue likely unstable"
            )
        state.step()
    return state.snapshot()


# ---------------------------------------------------------------------------
# Counts-only path


def route_counts(net: RoutingNetwork, s: Scenario, tape: Tape, seed: int) -> ReplicationResult:
    """Vectorized outcome counts for a tape, ignoring time.

    With unbounded queues no lorry ever balks, so each lorry's route depends
    only on its own draws; the counts then equal those of the event-driven
    run on the same tape exactly.
    """
    n, S = tape.n, len(net.stages)
    G = len(net.stations)
    hard = ~tape.soft
    alive = np.ones(n, dtype=bool)
    inspections = np.zeros(G, dtype=np.int64)
    det_count = np.zeros(G, dtype=np.int64)
    fa_count = np.zeros(G, dtype=np.int64)
    stage_det = [0] * S
    detected_clandestines = 0
    for k in range(S):
        checked = alive & (tape.check_u[:, k] < net.stages[k].check_probability)
        table = net.slot_table(k)
        for j, row in enumerate(table):
            for ti, type_mask in ((0, tape.soft), (1, hard)):
                v = row[ti]
                if v is None:
                    continue
                mask = checked & alive & type_mask
                if j > 0:
                    mask &= tape.select_u[:, k, j] < v.selection_probability
                st = net.stations[v.station_index].station
                u = tape.detect_u[:, k, j]
                hit = mask & tape.carrier & (u < st.tp_rate)
                alarm = mask & ~tape.carrier & (u < st.fp_rate)
                g = v.station_index
                inspections[g] += int(mask.sum())
                det_count[g] += int(hit.sum())
                fa_count[g] += int(alarm.sum())
                stage_det[k] += int(hit.sum())
                detected_clandestines += int(tape.group[hit].sum())
                alive &= ~(hit | alarm)
    generated = int(tape.group.sum())
    stats = tuple(
        StationStats(
            key=ref.key,
            cost_per_inspection=ref.station.cost_per_inspection,
            inspections=int(inspections[g]),
            detections=int(det_count[g]),
            false_alarms=int(fa_count[g]),
        )
        for g, ref in enumerate(net.stations)
    )
    result = ReplicationResult(
        seed=seed,
        horizon_hours=s.horizon_hours,
        stage_count=S,
        arrivals=n,
        carriers_generated=int(tape.carrier.sum()),
        clandestines_generated=generated,
        clandestines_detected=detected_clandestines,
        clandestines_undetected=generated - detected_clandestines,
        detections=int(det_count.sum()),
        false_alarms=int(fa_count.sum()),
        balked_lorries=0,
        stations=stats,
        stage_detections=tuple(stage_det),
    )
    return _priced(result, s)


def run_replication(
    net: RoutingNetwork,
    s: Scenario,
    substream_seed: int,
    *,
    queue_stats: bool = True,
    drain_cap_factor: float = 10.0,
) -> ReplicationResult:
    """Simulate one replication to completion.

    Arrivals stop at the horizon; lorries still in the system drain. With
    ``queue_stats=False`` and every queue unbounded, the event loop is
    skipped and only outcome counts are produced (identical to the full
    run's counts for the same seed).
    """
    if not queue_stats and s.all_unbounded:
        return route_counts(net, s, draw_tape(net, s, substream_seed), substream_seed)
    state = start_replication(net, s, substream_seed, drain_cap_factor=drain_cap_factor)
    state.run_until(s.horizon_hours)
    return drain_and_close(state)

