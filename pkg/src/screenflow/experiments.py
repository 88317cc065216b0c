"""Replication harness, parameter sweeps and the feasibility verdict."""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Sequence

from .cba import CostBreakdown, annualize
from .engine import ReplicationResult, run_replication
from .errors import (
    ReplicationError,
    ScenarioValidationError,
    ScreenflowError,
    TreeTooLargeError,
    UnknownParameterPathError,
    ValueOutOfRangeError,
)
from .scenario import (
    HOURS_PER_YEAR,
    RoutingNetwork,
    Scenario,
    build_network,
    fingerprint,
    scenario_from_dict,
    scenario_to_dict,
    validate_scenario,
)
from .stats import AgreementResult, SummaryStats, agreement_test, required_replications, summarize
from .streams import substream_seed
from .tree import DEFAULT_NODE_CAP, TreeExpectation, expected_outcome, tree_from_scenario

METRICS = ("undetected_clandestines", "detections", "total_cost", "annual_total_cost")

TREE_SUFFICIENT = "TREE_SUFFICIENT"
SIMULATION_USEFUL = "SIMULATION_USEFUL"
TOO_RARE_FOR_BUDGET = "TOO_RARE_FOR_BUDGET"


def metric_values(r: ReplicationResult) -> dict[str, float]:
    annual = annualize(CostBreakdown(r.direct_cost, r.indirect_cost, r.horizon_hours))
    return {
        "undetected_clandestines": float(r.clandestines_undetected),
        "detections": float(r.detections),
        "total_cost": r.total_cost,
        "annual_total_cost": annual.total,
    }


def analytic_metrics(s: Scenario, e: TreeExpectation) -> dict[str, float]:
    """Tree expectations scaled to one replication of ``s``.

    Exact when queues are unbounded: arrivals are Poisson and lorries are
    independent, so each per-lorry expectation scales by expected arrivals.
    """
    lam = s.expected_arrivals()
    fixed = s.cost_model.fixed_cost_per_hour * s.horizon_hours * len(s.stages)
    total = lam * e.total_cost + fixed
    return {
        "undetected_clandestines": lam * e.expected_undetected_clandestines,
        "detections": lam * e.p_detected,
        "total_cost": total,
        "annual_total_cost": total * (HOURS_PER_YEAR / s.horizon_hours),
    }


@dataclass(frozen=True)
class ExperimentResult:
    fingerprint: str
    master_seed: int
    rows: tuple[ReplicationResult, ...]
    stats: dict[str, SummaryStats]
    confidence: float = 0.95

    @property
    def replications(self) -> int:
        return len(self.rows)

    def samples(self, metric: str) -> list[float]:
        return [metric_values(r)[metric] for r in self.rows]


def _summaries(rows: Sequence[ReplicationResult], confidence: float) -> dict[str, SummaryStats]:
    values = [metric_values(r) for r in rows]
    return {m: summarize([v[m] for v in values], confidence) for m in METRICS}


# Worker-side globals, set once per process by the pool initializer.
_WORKER: dict = {}


def _init_worker(s: Scenario, net: RoutingNetwork, queue_stats: bool):
    _WORKER.update(s=s, net=net, queue_stats=queue_stats)


def _replicate(index: int) -> ReplicationResult:
    s, net = _WORKER["s"], _WORKER["net"]
    try:
        return run_replication(net, s, substream_seed(s.master_seed, index), queue_stats=_WORKER["queue_stats"])
    except ScreenflowError as exc:
        raise ReplicationError(index, exc) from exc


def default_workers() -> int:
    env = os.environ.get("SCREENFLOW_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_experiment(
    s: Scenario,
    R: int,
    *,
    workers: int = 1,
    queue_stats: bool = True,
    confidence: float = 0.95,
) -> ExperimentResult:
    """Run ``R`` replications with seeds hashed from ``(master_seed, index)``.

    Rows are ordered by replication index, so the result is the same for
    any worker count.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    net = build_network(s)
    if workers <= 1 or R == 1:
        _init_worker(s, net, queue_stats)
        rows = [_replicate(i) for i in range(R)]
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(s, net, queue_stats)
        ) as pool:
            rows = list(pool.map(_replicate, range(R), chunksize=max(1, R // (4 * workers))))
    return ExperimentResult(fingerprint(s), s.master_seed, tuple(rows), _summaries(rows, confidence), confidence)


# ---------------------------------------------------------------------------
# Parameter paths

_LIST_KEYS = ("name", "id", "station")


def _step(node, part: str, path: str):
    if isinstance(node, dict):
        if part not in node:
            raise UnknownParameterPathError(f"{path}: no field {part!r}")
        return node, part
    if isinstance(node, list):
        for i, item in enumerate(node):
            if isinstance(item, dict) and any(item.get(k) == part for k in _LIST_KEYS):
                return node, i
        if part.isdigit() and int(part) < len(node):
            return node, int(part)
        raise UnknownParameterPathError(f"{path}: no list entry {part!r}")
    raise UnknownParameterPathError(f"{path}: cannot descend into {type(node).__name__}")


def with_parameter(s: Scenario, path: str, value: float) -> Scenario:
    """A validated copy of ``s`` with the numeric field at ``path`` set to ``value``.

    Paths use dots; list entries are addressed by name/id (schedule
    segments by index), e.g. ``stages.british.stations.HB.tp_rate``.
    """
    d = scenario_to_dict(s)
    parts = path.split(".")
    node = d
    for part in parts[:-1]:
        container, key = _step(node, part, path)
        node = container[key]
    container, key = _step(node, parts[-1], path)
    current = container[key]
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise UnknownParameterPathError(f"{path} does not name a numeric field")
    container[key] = int(value) if isinstance(current, int) and float(value).is_integer() else float(value)
    try:
        return validate_scenario(scenario_from_dict(d))
    except ScenarioValidationError as exc:
        raise ValueOutOfRangeError(f"{path}={value!r}: {exc}") from exc


@dataclass(frozen=True)
class SweepRow:
    value: float
    experiment: ExperimentResult
    expectation: TreeExpectation
    analytic: dict[str, float]
    agreement: dict[str, AgreementResult]

    @property
    def verdict(self) -> str:
        """Headline verdict, on undetected clandestines per replication."""
        return self.agreement["undetected_clandestines"].verdict


@dataclass(frozen=True)
class SweepResult:
    parameter_path: str
    rows: tuple[SweepRow, ...]
    crn: bool


def sweep(
    s: Scenario,
    parameter_path: str,
    values: Sequence[float],
    R: int,
    *,
    alpha: float = 0.01,
    crn: bool = False,
    workers: int = 1,
    queue_stats: bool = False,
) -> SweepResult:
    """Simulate and evaluate the tree at each value; ``s`` is not modified.

    Without ``crn`` each value gets its own master seed hashed from
    ``(master_seed, value index)``; with ``crn`` every value reuses
    ``s.master_seed``.
    """
    if R < 2:
        raise ValueOutOfRangeError("a sweep needs R >= 2 for its agreement test")
    values = [float(v) for v in values]
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueOutOfRangeError("sweep values must be strictly increasing")
    rows = []
    for i, v in enumerate(values):
        sv = with_parameter(s, parameter_path, v)
        seed = s.master_seed if crn else substream_seed(s.master_seed, i, "sweep")
        sv = replace(sv, master_seed=seed)
        exp = run_experiment(sv, R, workers=workers, queue_stats=queue_stats)
        e = expected_outcome(tree_from_scenario(sv), sv.cost_model)
        analytic = analytic_metrics(sv, e)
        agreement = {m: agreement_test(exp.samples(m), analytic[m], alpha) for m in METRICS}
        rows.append(SweepRow(v, exp, e, analytic, agreement))
    return SweepResult(parameter_path, tuple(rows), crn)


# ---------------------------------------------------------------------------
# Feasibility bounds

EVENTS = ("carrier", "undetected_carrier", "detection", "false_alarm")


def event_probability(e: TreeExpectation, metric: str) -> float:
    if metric == "carrier":
        return e.p_detected + e.p_undetected
    if metric == "undetected_carrier":
        return e.p_undetected
    if metric == "detection":
        return e.p_detected
    if metric == "false_alarm":
        return e.p_false_alarm
    raise ValueError(f"unknown event {metric!r}; choose from {EVENTS}")


RULE_TEXT = (
    "Decision rule (this tool's operationalization of upper/lower bounds on event "
    "probability): (a) if required replications exceed the budget the event is too rare; "
    "(b) otherwise, if every queue is unbounded (queueing cannot shift probabilities) and the "
    "tree fits the node cap, the exact tree suffices; (c) otherwise simulation is useful."
)


@dataclass(frozen=True)
class FeasibilityReport:
    metric: str
    p_event: float
    epsilon: float
    confidence: float
    replication_budget: int
    required_replications: int | None
    tree_node_count: int | None  # None when the tree exceeds the cap
    tree_node_cap: int
    tree_exact: bool
    verdict: str
    rationale: str

    def recompute_verdict(self) -> str:
        return decide(self.p_event, self.required_replications, self.replication_budget,
                      self.tree_exact, self.tree_node_count, self.tree_node_cap)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        req = "unbounded (event impossible under model)" if self.required_replications is None else f"{self.required_replications:,}"
        nodes = f"> {self.tree_node_cap:,} (over cap)" if self.tree_node_count is None else f"{self.tree_node_count:,}"
        return (
            f"verdict:               {self.verdict}\n"
            f"event:                 {self.metric}\n"
            f"p_event (tree):        {self.p_event:.6g}\n"
            f"target rel. halfwidth: {self.epsilon:g} at {self.confidence:.0%} confidence\n"
            f"required replications: {req}\n"
            f"replication budget:    {self.replication_budget:,}\n"
            f"tree nodes:            {nodes}\n"
            f"queues unbounded:      {'yes' if self.tree_exact else 'no'}\n\n"
            f"{self.rationale}\n"
        )


def decide(p_event, required, budget, tree_exact, node_count, node_cap) -> str:
    if p_event == 0 or required is None or required > budget:
        return TOO_RARE_FOR_BUDGET
    if tree_exact and node_count is not None and node_count <= node_cap:
        return TREE_SUFFICIENT
    return SIMULATION_USEFUL


def feasibility_verdict(
    s: Scenario,
    metric: str = "carrier",
    epsilon: float = 0.1,
    confidence: float = 0.95,
    replication_budget: int = 10_000,
    tree_node_cap: int = DEFAULT_NODE_CAP,
) -> FeasibilityReport:
    if replication_budget < 1:
        raise ValueError("replication_budget must be >= 1")
    try:
        tree = tree_from_scenario(s, tree_node_cap)
        node_count = len(tree)
    except TreeTooLargeError:
        tree = tree_from_scenario(s, max(tree_node_cap, DEFAULT_NODE_CAP) * 10)
        node_count = None
    p = event_probability(expected_outcome(tree, s.cost_model), metric)
    required = None if p == 0 else required_replications(p, epsilon, confidence)
    exact = s.all_unbounded
    verdict = decide(p, required, replication_budget, exact, node_count, tree_node_cap)
    if p == 0:
        why = "Event impossible under model: the tree assigns it probability 0."
    elif verdict == TOO_RARE_FOR_BUDGET:
        why = f"Needs {required:,} replications for the target precision; budget is {replication_budget:,}."
    elif verdict == TREE_SUFFICIENT:
        why = f"{required:,} replications would do, but the {node_count:,}-node tree gives the exact answer."
    else:
        reason = "finite queue capacities let congestion shift outcomes" if not exact else "the tree exceeds the node cap"
        why = f"{required:,} replications fit the budget and {reason}, so simulation adds information."
    return FeasibilityReport(
        metric, p, epsilon, confidence, replication_budget, required, node_count,
        tree_node_cap, exact, verdict, f"{why}\n{RULE_TEXT}",
    )
