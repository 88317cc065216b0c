"""Exact per-lorry chance tree compiled from a scenario.

The tree branches on lorry type, carrier status, each stage's check
decision, each chain selection and each inspection outcome. Zero-probability
branches are pruned. Queueing has no counterpart here: the tree is the
mean-outcome baseline the simulator is validated against.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from .errors import TreeTooLargeError
from .scenario import LORRY_TYPES, CostModel, RoutingNetwork, Scenario, build_network

DEFAULT_NODE_CAP = 1_000_000

DETECTED = "DETECTED"
UNDETECTED_EXIT = "UNDETECTED_EXIT"
CLEAN_EXIT = "CLEAN_EXIT"
FALSE_ALARM_EXIT = "FALSE_ALARM_EXIT"


@dataclass(frozen=True)
class ChanceNode:
    label: str
    branches: tuple[tuple[float, int], ...]


@dataclass(frozen=True)
class TerminalNode:
    label: str
    outcome: str  # DETECTED | UNDETECTED_EXIT | CLEAN_EXIT | FALSE_ALARM_EXIT
    station: str | None  # "stage.station" where resolved
    exit_stage: int  # stage index where the lorry left, or stage count if it passed
    inspections: tuple[int, ...]
    inspection_cost: float
    expected_clandestines: float
    cost: float  # per-lorry cost under the scenario's own cost model

    @property
    def outcome_label(self) -> str:
        if self.outcome == DETECTED:
            stage, station = self.station.split(".", 1)
            return f"DETECTED_AT({station},{stage})"
        return self.outcome


@dataclass(frozen=True)
class DecisionTree:
    nodes: tuple[ChanceNode | TerminalNode, ...]
    root: int
    station_keys: tuple[str, ...]
    stage_names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.nodes)

    def leaves(self) -> Iterator[TerminalNode]:
        return (n for n in self.nodes if isinstance(n, TerminalNode))

    def reach_probability(self, stage_index: int) -> float:
        """Probability that a lorry is still in the flow when ``stage_index`` starts."""
        return sum(p.probability for p in enumerate_paths(self) if p.leaf.exit_stage >= stage_index)


@dataclass(frozen=True)
class TreeExpectation:
    """Per-lorry expectations; multiply by arrivals to scale."""

    direct_cost: float
    indirect_cost: float
    p_undetected: float
    p_detected: float
    p_false_alarm: float
    expected_undetected_clandestines: float
    expected_detected_clandestines: float
    inspections: dict[str, float]
    stage_detection: dict[str, float]
    worst_case_cost: float

    @property
    def total_cost(self) -> float:
        return self.direct_cost + self.indirect_cost


class _Builder:
    def __init__(self, s: Scenario, net: RoutingNetwork, cap: int):
        self.s = s
        self.net = net
        self.cap = cap
        self.nodes: list = []
        self.G = len(net.stations)
        self.cost_per_inspection = [r.station.cost_per_inspection for r in net.stations]
        self.mean_group = s.group_size.mean

    def _reserve(self) -> int:
        if len(self.nodes) >= self.cap:
            raise TreeTooLargeError(f"tree exceeds {self.cap} nodes")
        self.nodes.append(None)
        return len(self.nodes) - 1

    def _chance(self, label: str, options) -> int:
        """``options`` is a list of (probability, thunk returning a node id)."""
        nid = self._reserve()
        branches = tuple((p, make()) for p, make in options if p > 0)
        self.nodes[nid] = ChanceNode(label, branches)
        return nid

    def _terminal(self, label, outcome, station, exit_stage, insp, carrier) -> int:
        nid = self._reserve()
        icost = sum(c * k for c, k in zip(self.cost_per_inspection, insp))
        clandestines = self.mean_group if carrier else 0.0
        leaf = TerminalNode(label, outcome, station, exit_stage, tuple(insp), icost, clandestines, 0.0)
        self.nodes[nid] = replace(leaf, cost=_leaf_cost(leaf, self.s.cost_model))
        return nid

    def root(self) -> int:
        sp = self.s.soft_sided_probability
        cp = self.s.carrier_probability

        def lorry(ti):
            return lambda: self._chance(
                LORRY_TYPES[ti],
                [
                    (cp, lambda: self._stage("carrier", ti, True, 0, [0] * self.G)),
                    (1 - cp, lambda: self._stage("clean", ti, False, 0, [0] * self.G)),
                ],
            )

        return self._chance("lorry", [(sp, lorry(0)), (1 - sp, lorry(1))])

    def _stage(self, label, ti, carrier, k, insp) -> int:
        S = len(self.net.stages)
        if k == S:
            outcome = UNDETECTED_EXIT if carrier else CLEAN_EXIT
            return self._terminal(label, outcome, None, S, insp, carrier)
        plan = self.net.stages[k]
        options = []
        for b in plan.branches[LORRY_TYPES[ti]]:
            if b.label == "checked":
                options.append((b.probability, lambda b=b: self._visit(f"{plan.name}:checked", ti, carrier, k, b.visits, 0, insp)))
            else:
                options.append((b.probability, lambda: self._stage(f"{plan.name}:unchecked", ti, carrier, k + 1, insp)))
        return self._chance(label, options)

    def _visit(self, label, ti, carrier, k, visits, idx, insp) -> int:
        if idx == len(visits):
            return self._stage(label, ti, carrier, k + 1, insp)
        v = visits[idx]
        ref = self.net.stations[v.station_index]
        key = ref.key

        def inspect():
            after = list(insp)
            after[v.station_index] += 1
            rate = ref.station.tp_rate if carrier else ref.station.fp_rate
            if carrier:
                resolve = lambda: self._terminal(f"{key}:alarm", DETECTED, key, k, after, True)
            else:
                resolve = lambda: self._terminal(f"{key}:alarm", FALSE_ALARM_EXIT, key, k, after, False)
            return self._chance(
                f"{key}:inspected",
                [
                    (rate, resolve),
                    (1 - rate, lambda: self._visit(f"{key}:no alarm", ti, carrier, k, visits, idx + 1, after)),
                ],
            )

        q = v.selection_probability
        if q >= 1:
            return self._chance(label, [(1.0, inspect)])
        return self._chance(
            label,
            [
                (q, inspect),
                (1 - q, lambda: self._visit(f"{key}:skipped", ti, carrier, k, visits, idx + 1, insp)),
            ],
        )


def tree_from_scenario(s: Scenario, node_cap: int = DEFAULT_NODE_CAP) -> DecisionTree:
    """Compile the per-lorry chance tree.

    Raises:
        TreeTooLargeError: if more than ``node_cap`` nodes would be needed.
    """
    net = build_network(s)
    b = _Builder(s, net, node_cap)
    root = b.root()
    return DecisionTree(
        tuple(b.nodes),
        root,
        tuple(r.key for r in net.stations),
        tuple(st.name for st in s.stages),
    )


@dataclass(frozen=True)
class Path:
    labels: tuple[str, ...]
    probability: float
    cost: float
    leaf: TerminalNode


def enumerate_paths(t: DecisionTree) -> list[Path]:
    """Every root-to-leaf path, depth-first in branch order."""
    out = []
    stack = [(t.root, 1.0, ())]
    while stack:
        nid, prob, labels = stack.pop()
        node = t.nodes[nid]
        labels = labels + (node.label,)
        if isinstance(node, TerminalNode):
            out.append(Path(labels, prob, node.cost, node))
            continue
        for p, child in reversed(node.branches):
            stack.append((child, prob * p, labels))
    return out


def _leaf_vector(leaf: TerminalNode, cm: CostModel, t: DecisionTree) -> np.ndarray:
    """[direct, indirect, undetected, detected, false alarm, E undetected, E detected, inspections..., stage detections...]."""
    S = len(t.stage_names)
    vec = np.zeros(7 + len(t.station_keys) + S)
    detected = leaf.outcome == DETECTED
    undetected = leaf.outcome == UNDETECTED_EXIT
    alarm = leaf.outcome == FALSE_ALARM_EXIT
    vec[0] = leaf.inspection_cost + (cm.detection_processing_cost if detected else 0.0)
    vec[1] = (leaf.expected_clandestines * cm.undetected_unit_cost if undetected else 0.0) + (
        cm.false_alarm_cost if alarm else 0.0
    )
    vec[2], vec[3], vec[4] = float(undetected), float(detected), float(alarm)
    vec[5] = leaf.expected_clandestines if undetected else 0.0
    vec[6] = leaf.expected_clandestines if detected else 0.0
    vec[7 : 7 + len(leaf.inspections)] = leaf.inspections
    if detected:
        vec[7 + len(t.station_keys) + leaf.exit_stage] = 1.0
    return vec


def _to_expectation(vec: np.ndarray, t: DecisionTree, worst: float) -> TreeExpectation:
    G = len(t.station_keys)
    return TreeExpectation(
        direct_cost=float(vec[0]),
        indirect_cost=float(vec[1]),
        p_undetected=float(vec[2]),
        p_detected=float(vec[3]),
        p_false_alarm=float(vec[4]),
        expected_undetected_clandestines=float(vec[5]),
        expected_detected_clandestines=float(vec[6]),
        inspections={k: float(vec[7 + g]) for g, k in enumerate(t.station_keys)},
        stage_detection={name: float(vec[7 + G + k]) for k, name in enumerate(t.stage_names)},
        worst_case_cost=worst,
    )


def _leaf_cost(leaf: TerminalNode, cm: CostModel) -> float:
    cost = leaf.inspection_cost
    if leaf.outcome == DETECTED:
        cost += cm.detection_processing_cost
    elif leaf.outcome == UNDETECTED_EXIT:
        cost += leaf.expected_clandestines * cm.undetected_unit_cost
    elif leaf.outcome == FALSE_ALARM_EXIT:
        cost += cm.false_alarm_cost
    return cost


def expected_outcome(t: DecisionTree, cm: CostModel) -> TreeExpectation:
    """Exact expectation by recursive rollback (no sampling)."""

    def rollback(nid: int) -> np.ndarray:
        node = t.nodes[nid]
        if isinstance(node, TerminalNode):
            return _leaf_vector(node, cm, t)
        return sum(p * rollback(child) for p, child in node.branches)

    worst = max(_leaf_cost(leaf, cm) for leaf in t.leaves())
    return _to_expectation(rollback(t.root), t, worst)


def expectation_from_paths(paths: list[Path], t: DecisionTree, cm: CostModel) -> TreeExpectation:
    """The same expectation as a flat probability-weighted sum over paths."""
    total = np.zeros(7 + len(t.station_keys) + len(t.stage_names))
    for p in paths:
        total += p.probability * _leaf_vector(p.leaf, cm, t)
    worst = max(_leaf_cost(p.leaf, cm) for p in paths)
    return _to_expectation(total, t, worst)


def export_outline(t: DecisionTree) -> str:
    """Text outline, one line per node: indent, branch probability, label, cost."""
    lines = []
    stack = [(t.root, 1.0, 0)]
    while stack:
        nid, prob, depth = stack.pop()
        node = t.nodes[nid]
        pad = "  " * depth
        if isinstance(node, TerminalNode):
            lines.append(f"{pad}{prob:.6g} {node.label} -> {node.outcome_label} cost={node.cost:.2f}")
            continue
        lines.append(f"{pad}{prob:.6g} {node.label}")
        for p, child in reversed(node.branches):
            stack.append((child, p, depth + 1))
    return "\n".join(lines) + "\n"
