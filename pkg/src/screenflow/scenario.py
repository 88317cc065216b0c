"""Declarative model of a multi-stage screening pipeline.

A :class:`Scenario` is parsed from a JSON document (strict: unknown keys are
errors), validated against its invariants, and compiled into a
:class:`RoutingNetwork` that both the simulator and the tree compiler read.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .errors import ScenarioValidationError, Violation

LORRY_TYPES = ("soft", "hard")
STATION_KINDS = ("PMMW", "HB", "CO2", "CANINE", "VISUAL", "OTHER")
SERVICE_KINDS = ("deterministic", "exponential", "lognormal")
GROUP_KINDS = ("degenerate", "geometric", "empirical")
UNBOUNDED = "UNBOUNDED"
HOURS_PER_YEAR = 8760.0
MAX_SEED = 2**64


@dataclass(frozen=True)
class ArrivalSegment:
    start_hour: float
    rate: float


@dataclass(frozen=True)
class ServiceTime:
    """Service-time law in hours.

    ``deterministic`` uses ``value``; ``exponential`` uses ``mean``;
    ``lognormal`` uses ``mu`` and ``sigma`` of the underlying normal.
    """

    kind: str = "exponential"
    value: float | None = None
    mean: float | None = None
    mu: float | None = None
    sigma: float | None = None

    @property
    def expected(self) -> float:
        if self.kind == "deterministic":
            return float(self.value)
        if self.kind == "exponential":
            return float(self.mean)
        return math.exp(self.mu + 0.5 * self.sigma**2)


@dataclass(frozen=True)
class GroupSize:
    """Clandestines aboard a carrier lorry.

    ``geometric`` has support 1, 2, ... with success probability ``p``
    (mean 1/p). ``empirical`` draws from ``values`` with ``weights``.
    """

    kind: str = "degenerate"
    value: int = 1
    p: float | None = None
    values: tuple[int, ...] = ()
    weights: tuple[float, ...] = ()

    @property
    def mean(self) -> float:
        if self.kind == "degenerate":
            return float(self.value)
        if self.kind == "geometric":
            return 1.0 / self.p
        total = math.fsum(self.weights)
        return math.fsum(v * w for v, w in zip(self.values, self.weights)) / total


@dataclass(frozen=True)
class Station:
    id: str
    kind: str
    applicable_types: tuple[str, ...]
    tp_rate: float
    fp_rate: float
    cost_per_inspection: float
    service_time: ServiceTime
    servers: int = 1
    queue_capacity: int | None = None  # None means UNBOUNDED

    @property
    def unbounded(self) -> bool:
        return self.queue_capacity is None


@dataclass(frozen=True)
class ChainEntry:
    station: str
    probability: float


@dataclass(frozen=True)
class ControlStage:
    name: str
    check_probability: float
    primary_station: dict[str, str]
    secondary_chain: tuple[ChainEntry, ...]
    stations: tuple[Station, ...]

    def station(self, station_id: str) -> Station:
        for st in self.stations:
            if st.id == station_id:
                return st
        raise KeyError(station_id)


@dataclass(frozen=True)
class CostModel:
    undetected_unit_cost: float = 20_000.0
    detection_processing_cost: float = 0.0
    false_alarm_cost: float = 0.0
    fixed_cost_per_hour: float = 0.0

    def scaled(self, factor: float) -> "CostModel":
        return CostModel(
            self.undetected_unit_cost * factor,
            self.detection_processing_cost * factor,
            self.false_alarm_cost * factor,
            self.fixed_cost_per_hour * factor,
        )


@dataclass(frozen=True)
class Scenario:
    arrival_schedule: tuple[ArrivalSegment, ...]
    horizon_hours: float
    carrier_probability: float
    soft_sided_probability: float
    stages: tuple[ControlStage, ...]
    group_size: GroupSize = field(default_factory=GroupSize)
    cost_model: CostModel = field(default_factory=CostModel)
    master_seed: int = 0

    def stage(self, name: str) -> ControlStage:
        for st in self.stages:
            if st.name == name:
                return st
        raise KeyError(name)

    @property
    def all_unbounded(self) -> bool:
        return all(st.unbounded for stage in self.stages for st in stage.stations)

    def expected_arrivals(self) -> float:
        """Integrated arrival rate over the horizon."""
        total = []
        for i, seg in enumerate(self.arrival_schedule):
            end = (
                self.arrival_schedule[i + 1].start_hour
                if i + 1 < len(self.arrival_schedule)
                else self.horizon_hours
            )
            end = min(end, self.horizon_hours)
            if end > seg.start_hour:
                total.append(seg.rate * (end - seg.start_hour))
        return math.fsum(total)


# ---------------------------------------------------------------------------
# Serialization


def _service_to_dict(st: ServiceTime) -> dict[str, Any]:
    if st.kind == "deterministic":
        return {"kind": st.kind, "value": st.value}
    if st.kind == "exponential":
        return {"kind": st.kind, "mean": st.mean}
    return {"kind": st.kind, "mu": st.mu, "sigma": st.sigma}


def _group_to_dict(g: GroupSize) -> dict[str, Any]:
    if g.kind == "degenerate":
        return {"kind": g.kind, "value": g.value}
    if g.kind == "geometric":
        return {"kind": g.kind, "p": g.p}
    return {"kind": g.kind, "values": list(g.values), "weights": list(g.weights)}


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    return {
        "arrival_schedule": [
            {"start_hour": seg.start_hour, "rate": seg.rate} for seg in s.arrival_schedule
        ],
        "horizon_hours": s.horizon_hours,
        "carrier_probability": s.carrier_probability,
        "group_size": _group_to_dict(s.group_size),
        "soft_sided_probability": s.soft_sided_probability,
        "stages": [
            {
                "name": stage.name,
                "check_probability": stage.check_probability,
                "primary_station": dict(stage.primary_station),
                "secondary_chain": [
                    {"station": e.station, "probability": e.probability}
                    for e in stage.secondary_chain
                ],
                "stations": [
                    {
                        "id": st.id,
                        "kind": st.kind,
                        "applicable_types": list(st.applicable_types),
                        "tp_rate": st.tp_rate,
                        "fp_rate": st.fp_rate,
                        "cost_per_inspection": st.cost_per_inspection,
                        "service_time": _service_to_dict(st.service_time),
                        "servers": st.servers,
                        "queue_capacity": UNBOUNDED if st.queue_capacity is None else st.queue_capacity,
                    }
                    for st in stage.stations
                ],
            }
            for stage in s.stages
        ],
        "cost_model": {
            "undetected_unit_cost": s.cost_model.undetected_unit_cost,
            "detection_processing_cost": s.cost_model.detection_processing_cost,
            "false_alarm_cost": s.cost_model.false_alarm_cost,
            "fixed_cost_per_hour": s.cost_model.fixed_cost_per_hour,
        },
        "master_seed": s.master_seed,
    }


def canonical_json(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))


def fingerprint(s: Scenario) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, parsed numbers)."""
    return hashlib.sha256(canonical_json(s).encode("utf-8")).hexdigest()


class _Reader:
    """Strict dict reader that accumulates violations instead of raising."""

    def __init__(self):
        self.violations: list[Violation] = []

    def fail(self, code: str, path: str, message: str):
        self.violations.append(Violation(code, path, message))

    def obj(self, raw, path: str, required: Iterable[str], optional: Iterable[str] = ()):
        if not isinstance(raw, dict):
            self.fail("BAD_TYPE", path, f"expected an object, got {type(raw).__name__}")
            return None
        required = tuple(required)
        allowed = set(required) | set(optional)
        for key in raw:
            if key not in allowed:
                self.fail("UNKNOWN_KEY", f"{path}.{key}" if path else key, "unknown key")
        for key in required:
            if key not in raw:
                self.fail("MISSING_FIELD", f"{path}.{key}" if path else key, "required field missing")
        return raw

    def number(self, raw, path: str, default=None, integer=False):
        if raw is None:
            return default
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            self.fail("BAD_TYPE", path, f"expected a number, got {raw!r}")
            return default
        if integer:
            if isinstance(raw, float) and not raw.is_integer():
                self.fail("BAD_TYPE", path, f"expected an integer, got {raw!r}")
                return default
            return int(raw)
        if not math.isfinite(raw):
            self.fail("BAD_TYPE", path, f"expected a finite number, got {raw!r}")
            return default
        return float(raw)

    def string(self, raw, path: str, default=""):
        if not isinstance(raw, str):
            self.fail("BAD_TYPE", path, f"expected a string, got {raw!r}")
            return default
        return raw

    def array(self, raw, path: str):
        if not isinstance(raw, list):
            self.fail("BAD_TYPE", path, f"expected an array, got {type(raw).__name__}")
            return []
        return raw


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _parse_service(r: _Reader, raw, path: str) -> ServiceTime:
    d = r.obj(raw, path, ("kind",), ("value", "mean", "mu", "sigma"))
    if d is None:
        return ServiceTime("deterministic", value=0.0)
    kind = r.string(d.get("kind"), _join(path, "kind"), "exponential")
    needed = {"deterministic": ("value",), "exponential": ("mean",), "lognormal": ("mu", "sigma")}
    if kind not in needed:
        r.fail("BAD_TYPE", _join(path, "kind"), f"unknown service-time kind {kind!r}")
        return ServiceTime("deterministic", value=0.0)
    params = {}
    for key in ("value", "mean", "mu", "sigma"):
        if key in d and key not in needed[kind]:
            r.fail("UNKNOWN_KEY", _join(path, key), f"not a parameter of {kind}")
    for key in needed[kind]:
        if key not in d:
            r.fail("MISSING_FIELD", _join(path, key), f"{kind} requires {key}")
        params[key] = r.number(d.get(key), _join(path, key), 0.0)
    return ServiceTime(kind, **params)


def _parse_group(r: _Reader, raw, path: str) -> GroupSize:
    d = r.obj(raw, path, ("kind",), ("value", "p", "values", "weights"))
    if d is None:
        return GroupSize()
    kind = r.string(d.get("kind"), _join(path, "kind"), "degenerate")
    needed = {"degenerate": ("value",), "geometric": ("p",), "empirical": ("values", "weights")}
    if kind not in needed:
        r.fail("BAD_TYPE", _join(path, "kind"), f"unknown group-size kind {kind!r}")
        return GroupSize()
    for key in ("value", "p", "values", "weights"):
        if key in d and key not in needed[kind]:
            r.fail("UNKNOWN_KEY", _join(path, key), f"not a parameter of {kind}")
    for key in needed[kind]:
        if key not in d:
            r.fail("MISSING_FIELD", _join(path, key), f"{kind} requires {key}")
    if kind == "degenerate":
        return GroupSize(kind, value=r.number(d.get("value"), _join(path, "value"), 1, integer=True))
    if kind == "geometric":
        return GroupSize(kind, p=r.number(d.get("p"), _join(path, "p"), 1.0))
    values = tuple(
        r.number(v, f"{path}.values[{i}]", 1, integer=True)
        for i, v in enumerate(r.array(d.get("values", []), _join(path, "values")))
    )
    weights = tuple(
        r.number(w, f"{path}.weights[{i}]", 0.0)
        for i, w in enumerate(r.array(d.get("weights", []), _join(path, "weights")))
    )
    return GroupSize(kind, values=values, weights=weights)


def _parse_station(r: _Reader, raw, path: str) -> Station | None:
    d = r.obj(
        raw,
        path,
        ("id", "kind", "applicable_types", "tp_rate", "fp_rate", "cost_per_inspection", "service_time"),
        ("servers", "queue_capacity"),
    )
    if d is None:
        return None
    sid = r.string(d.get("id", ""), _join(path, "id"))
    kind = r.string(d.get("kind", "OTHER"), _join(path, "kind"), "OTHER")
    types = tuple(
        r.string(t, f"{path}.applicable_types[{i}]")
        for i, t in enumerate(r.array(d.get("applicable_types", []), _join(path, "applicable_types")))
    )
    cap_raw = d.get("queue_capacity", UNBOUNDED)
    if cap_raw == UNBOUNDED:
        cap = None
    else:
        cap = r.number(cap_raw, _join(path, "queue_capacity"), None, integer=True)
    return Station(
        id=sid,
        kind=kind,
        applicable_types=types,
        tp_rate=r.number(d.get("tp_rate"), _join(path, "tp_rate"), 0.0),
        fp_rate=r.number(d.get("fp_rate"), _join(path, "fp_rate"), 0.0),
        cost_per_inspection=r.number(d.get("cost_per_inspection"), _join(path, "cost_per_inspection"), 0.0),
        service_time=_parse_service(r, d.get("service_time"), _join(path, "service_time")),
        servers=r.number(d.get("servers", 1), _join(path, "servers"), 1, integer=True),
        queue_capacity=cap,
    )


def _parse_stage(r: _Reader, raw, path: str) -> ControlStage | None:
    d = r.obj(raw, path, ("name", "check_probability", "primary_station", "stations"), ("secondary_chain",))
    if d is None:
        return None
    name = r.string(d.get("name", ""), _join(path, "name"))
    label = f"stages[{name}]" if name else path
    primary_raw = d.get("primary_station", {})
    primary: dict[str, str] = {}
    if isinstance(primary_raw, dict):
        for key, val in primary_raw.items():
            primary[str(key)] = r.string(val, f"{label}.primary_station.{key}")
    else:
        r.fail("BAD_TYPE", f"{label}.primary_station", "expected an object mapping lorry type to station id")
    chain = []
    for i, entry in enumerate(r.array(d.get("secondary_chain", []), f"{label}.secondary_chain")):
        e = r.obj(entry, f"{label}.secondary_chain[{i}]", ("station", "probability"))
        if e is None:
            continue
        chain.append(
            ChainEntry(
                r.string(e.get("station", ""), f"{label}.secondary_chain[{i}].station"),
                r.number(e.get("probability"), f"{label}.secondary_chain[{i}].probability", 0.0),
            )
        )
    stations = []
    for i, st in enumerate(r.array(d.get("stations", []), f"{label}.stations")):
        sid = st.get("id") if isinstance(st, dict) else None
        parsed = _parse_station(r, st, f"{label}.stations[{sid if isinstance(sid, str) else i}]")
        if parsed is not None:
            stations.append(parsed)
    return ControlStage(
        name=name,
        check_probability=r.number(d.get("check_probability"), f"{label}.check_probability", 0.0),
        primary_station=primary,
        secondary_chain=tuple(chain),
        stations=tuple(stations),
    )


def scenario_from_dict(raw: Any) -> Scenario:
    """Parse a JSON-shaped dict into an unvalidated :class:`Scenario`.

    Structural problems (unknown keys, missing fields, wrong types) raise
    :class:`ScenarioValidationError` listing all of them.
    """
    r = _Reader()
    d = r.obj(
        raw,
        "",
        ("arrival_schedule", "horizon_hours", "carrier_probability", "soft_sided_probability", "stages"),
        ("group_size", "cost_model", "master_seed"),
    )
    if d is None:
        raise ScenarioValidationError(r.violations)
    schedule = []
    for i, seg in enumerate(r.array(d.get("arrival_schedule", []), "arrival_schedule")):
        sd = r.obj(seg, f"arrival_schedule[{i}]", ("start_hour", "rate"))
        if sd is not None:
            schedule.append(
                ArrivalSegment(
                    r.number(sd.get("start_hour"), f"arrival_schedule[{i}].start_hour", 0.0),
                    r.number(sd.get("rate"), f"arrival_schedule[{i}].rate", 0.0),
                )
            )
    stages = []
    for i, st in enumerate(r.array(d.get("stages", []), "stages")):
        parsed = _parse_stage(r, st, f"stages[{i}]")
        if parsed is not None:
            stages.append(parsed)
    cm = CostModel()
    if "cost_model" in d:
        keys = ("undetected_unit_cost", "detection_processing_cost", "false_alarm_cost", "fixed_cost_per_hour")
        cd = r.obj(d["cost_model"], "cost_model", (), keys)
        if cd is not None:
            cm = CostModel(
                **{k: r.number(cd.get(k), f"cost_model.{k}", getattr(cm, k)) for k in keys}
            )
    group = _parse_group(r, d["group_size"], "group_size") if "group_size" in d else GroupSize()
    s = Scenario(
        arrival_schedule=tuple(schedule),
        horizon_hours=r.number(d.get("horizon_hours"), "horizon_hours", 0.0),
        carrier_probability=r.number(d.get("carrier_probability"), "carrier_probability", 0.0),
        soft_sided_probability=r.number(d.get("soft_sided_probability"), "soft_sided_probability", 0.0),
        stages=tuple(stages),
        group_size=group,
        cost_model=cm,
        master_seed=r.number(d.get("master_seed", 0), "master_seed", 0, integer=True),
    )
    if r.violations:
        raise ScenarioValidationError(r.violations)
    return s


# ---------------------------------------------------------------------------
# Validation


def _check_probability(out: list[Violation], value: float, path: str):
    if not (0.0 <= value <= 1.0):
        out.append(Violation("PROBABILITY_OUT_OF_RANGE", path, f"{value!r} is not in [0, 1]"))


def _check_nonnegative(out: list[Violation], value: float, path: str):
    if value < 0:
        out.append(Violation("NEGATIVE_VALUE", path, f"{value!r} must be >= 0"))


def validate_scenario(s: Scenario) -> Scenario:
    """Return ``s`` unchanged if every invariant holds.

    Raises:
        ScenarioValidationError: listing every violation found.
    """
    out: list[Violation] = []
    _check_probability(out, s.carrier_probability, "carrier_probability")
    _check_probability(out, s.soft_sided_probability, "soft_sided_probability")
    if not s.horizon_hours > 0:
        out.append(Violation("NONPOSITIVE_HORIZON", "horizon_hours", f"{s.horizon_hours!r} must be > 0"))
    if not s.arrival_schedule:
        out.append(Violation("BAD_SCHEDULE", "arrival_schedule", "at least one segment required"))
    else:
        if s.arrival_schedule[0].start_hour != 0:
            out.append(Violation("BAD_SCHEDULE", "arrival_schedule[0].start_hour", "first segment must start at 0"))
        for i, seg in enumerate(s.arrival_schedule):
            if i and seg.start_hour <= s.arrival_schedule[i - 1].start_hour:
                out.append(
                    Violation("BAD_SCHEDULE", f"arrival_schedule[{i}].start_hour", "start hours must strictly increase")
                )
            if seg.rate < 0:
                out.append(Violation("BAD_SCHEDULE", f"arrival_schedule[{i}].rate", f"{seg.rate!r} must be >= 0"))
    if not 0 <= s.master_seed < MAX_SEED:
        out.append(Violation("BAD_TYPE", "master_seed", "must be an unsigned 64-bit integer"))

    g = s.group_size
    if g.kind not in GROUP_KINDS:
        out.append(Violation("BAD_TYPE", "group_size.kind", f"unknown kind {g.kind!r}"))
    elif g.kind == "degenerate" and g.value < 1:
        out.append(Violation("NEGATIVE_VALUE", "group_size.value", "a carrier holds at least one clandestine"))
    elif g.kind == "geometric":
        if g.p is None or not 0 < g.p <= 1:
            out.append(Violation("PROBABILITY_OUT_OF_RANGE", "group_size.p", f"{g.p!r} is not in (0, 1]"))
    elif g.kind == "empirical":
        if not g.values or len(g.values) != len(g.weights):
            out.append(Violation("BAD_TYPE", "group_size", "values and weights must be non-empty and equal length"))
        if any(v < 1 for v in g.values):
            out.append(Violation("NEGATIVE_VALUE", "group_size.values", "a carrier holds at least one clandestine"))
        if any(w < 0 for w in g.weights) or not math.fsum(g.weights) > 0:
            out.append(Violation("NEGATIVE_VALUE", "group_size.weights", "weights must be >= 0 with a positive sum"))

    cm = s.cost_model
    for key in ("undetected_unit_cost", "detection_processing_cost", "false_alarm_cost", "fixed_cost_per_hour"):
        _check_nonnegative(out, getattr(cm, key), f"cost_model.{key}")

    if not s.stages:
        out.append(Violation("EMPTY_STAGES", "stages", "at least one stage required"))
    seen_stages = set()
    for i, stage in enumerate(s.stages):
        base = f"stages[{stage.name or i}]"
        if not stage.name:
            out.append(Violation("BAD_TYPE", f"{base}.name", "stage name must be non-empty"))
        elif stage.name in seen_stages:
            out.append(Violation("DUPLICATE_ID", f"{base}.name", f"duplicate stage {stage.name!r}"))
        seen_stages.add(stage.name)
        if "." in stage.name:
            out.append(Violation("BAD_TYPE", f"{base}.name", "stage names may not contain '.'"))
        _check_probability(out, stage.check_probability, f"{base}.check_probability")
        ids: dict[str, Station] = {}
        for st in stage.stations:
            sp = f"{base}.stations[{st.id}]"
            if not st.id or "." in st.id:
                out.append(Violation("BAD_TYPE", f"{sp}.id", "station id must be non-empty without '.'"))
            if st.id in ids:
                out.append(Violation("DUPLICATE_ID", f"{sp}.id", f"duplicate station {st.id!r}"))
            ids[st.id] = st
            if st.kind not in STATION_KINDS:
                out.append(Violation("BAD_TYPE", f"{sp}.kind", f"unknown station kind {st.kind!r}"))
            if not st.applicable_types or any(t not in LORRY_TYPES for t in st.applicable_types):
                out.append(Violation("BAD_TYPE", f"{sp}.applicable_types", f"must be a non-empty subset of {LORRY_TYPES}"))
            _check_probability(out, st.tp_rate, f"{sp}.tp_rate")
            _check_probability(out, st.fp_rate, f"{sp}.fp_rate")
            _check_nonnegative(out, st.cost_per_inspection, f"{sp}.cost_per_inspection")
            if st.servers < 1:
                out.append(Violation("BAD_TYPE", f"{sp}.servers", "servers must be >= 1"))
            if st.queue_capacity is not None and st.queue_capacity < 1:
                out.append(Violation("BAD_TYPE", f"{sp}.queue_capacity", "must be a positive integer or UNBOUNDED"))
            svc = st.service_time
            if svc.kind not in SERVICE_KINDS:
                out.append(Violation("BAD_TYPE", f"{sp}.service_time.kind", f"unknown kind {svc.kind!r}"))
            elif svc.kind == "deterministic":
                _check_nonnegative(out, svc.value, f"{sp}.service_time.value")
            elif svc.kind == "exponential":
                _check_nonnegative(out, svc.mean, f"{sp}.service_time.mean")
            else:
                _check_nonnegative(out, svc.sigma, f"{sp}.service_time.sigma")
        for ltype, sid in stage.primary_station.items():
            pp = f"{base}.primary_station.{ltype}"
            if ltype not in LORRY_TYPES:
                out.append(Violation("BAD_TYPE", pp, f"lorry type must be one of {LORRY_TYPES}"))
            elif sid not in ids:
                out.append(Violation("UNKNOWN_STATION_REF", pp, f"no station {sid!r} in stage"))
            elif ltype not in ids[sid].applicable_types:
                out.append(Violation("INAPPLICABLE_STATION", pp, f"station {sid!r} does not inspect {ltype} lorries"))
        for j, entry in enumerate(stage.secondary_chain):
            cp = f"{base}.secondary_chain[{j}]"
            if entry.station not in ids:
                out.append(Violation("UNKNOWN_STATION_REF", f"{cp}.station", f"no station {entry.station!r} in stage"))
            _check_probability(out, entry.probability, f"{cp}.probability")
    if out:
        raise ScenarioValidationError(out)
    return s


def load_scenario(source: str | Path | dict) -> Scenario:
    """Parse and validate a scenario from a JSON path or an already-loaded dict."""
    if isinstance(source, dict):
        raw = source
    else:
        try:
            raw = json.loads(Path(source).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ScenarioValidationError(
                [Violation("MALFORMED_JSON", f"line {exc.lineno} column {exc.colno}", exc.msg)]
            ) from exc
    return validate_scenario(scenario_from_dict(raw))


def dump_scenario(s: Scenario, path: str | Path):
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Routing network


@dataclass(frozen=True)
class Visit:
    """One potential inspection on a lorry's path.

    ``slot`` is the position in the stage template (0 = primary, i = i-th
    chain entry); it indexes the random-number tape so that draws stay
    attached to the same decision when other parameters change.
    """

    slot: int
    station: str
    station_index: int
    selection_probability: float


@dataclass(frozen=True)
class Branch:
    label: str  # "checked" | "unchecked"
    probability: float
    visits: tuple[Visit, ...]


@dataclass(frozen=True)
class StagePlan:
    name: str
    index: int
    check_probability: float
    branches: dict[str, tuple[Branch, ...]]

    def checked(self, lorry_type: str) -> Branch | None:
        for b in self.branches[lorry_type]:
            if b.label == "checked":
                return b
        return None


@dataclass(frozen=True)
class StationRef:
    index: int
    stage: str
    stage_index: int
    station: Station

    @property
    def key(self) -> str:
        return f"{self.stage}.{self.station.id}"


@dataclass(frozen=True)
class RoutingNetwork:
    stages: tuple[StagePlan, ...]
    stations: tuple[StationRef, ...]
    slot_count: int
    warnings: tuple[str, ...]

    def path(self, stage_index: int, lorry_type: str) -> tuple[Branch, ...]:
        return self.stages[stage_index].branches[lorry_type]

    def slot_table(self, stage_index: int) -> list[list[Visit | None]]:
        """``table[slot][type_index]`` is the visit for that slot, or None."""
        table: list[list[Visit | None]] = [[None, None] for _ in range(self.slot_count)]
        plan = self.stages[stage_index]
        for ti, ltype in enumerate(LORRY_TYPES):
            branch = plan.checked(ltype)
            if branch is None:
                continue
            for v in branch.visits:
                table[v.slot][ti] = v
        return table


def build_network(s: Scenario) -> RoutingNetwork:
    """Compile per-stage, per-lorry-type path plans.

    The checked branch runs the primary station for the lorry's type, then
    every chain station applicable to that type in order. Stations no lorry
    type can reach are reported in ``warnings`` as UNREACHABLE.
    """
    refs: list[StationRef] = []
    index: dict[tuple[int, str], int] = {}
    for k, stage in enumerate(s.stages):
        for st in stage.stations:
            index[(k, st.id)] = len(refs)
            refs.append(StationRef(len(refs), stage.name, k, st))
    slot_count = 1 + max((len(st.secondary_chain) for st in s.stages), default=0)
    reached: set[int] = set()
    plans = []
    for k, stage in enumerate(s.stages):
        branches: dict[str, tuple[Branch, ...]] = {}
        for ltype in LORRY_TYPES:
            visits = []
            primary = stage.primary_station.get(ltype)
            if primary is not None:
                visits.append(Visit(0, primary, index[(k, primary)], 1.0))
            for j, entry in enumerate(stage.secondary_chain, start=1):
                if ltype in stage.station(entry.station).applicable_types:
                    visits.append(Visit(j, entry.station, index[(k, entry.station)], entry.probability))
            c = stage.check_probability
            options = []
            if c > 0:
                options.append(Branch("checked", c, tuple(visits)))
                reached.update(v.station_index for v in visits if v.selection_probability > 0)
            if c < 1:
                options.append(Branch("unchecked", 1.0 - c, ()))
            branches[ltype] = tuple(options)
        plans.append(StagePlan(stage.name, k, stage.check_probability, branches))
    warnings = tuple(f"UNREACHABLE: {r.key}" for r in refs if r.index not in reached)
    return RoutingNetwork(tuple(plans), tuple(refs), slot_count, warnings)
