"""Cost-benefit accounting: counts to money, annualization, break-even."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

from .errors import NonpositiveHorizonError, UnknownStageError
from .scenario import HOURS_PER_YEAR, CostModel, Scenario, validate_scenario

if TYPE_CHECKING:
    from .engine import ReplicationResult


@dataclass(frozen=True)
class CostBreakdown:
    """Money for one run.

    ``direct`` covers inspections, fixed stage-hours and detention
    processing; ``indirect`` covers undetected clandestines and false alarms.
    """

    direct: float
    indirect: float
    horizon_hours: float
    annualization_factor: float = 1.0

    @property
    def total(self) -> float:
        return self.direct + self.indirect


def cost_of(result: "ReplicationResult", cm: CostModel) -> CostBreakdown:
    inspection = math.fsum(st.inspections * st.cost_per_inspection for st in result.stations)
    fixed = cm.fixed_cost_per_hour * result.horizon_hours * result.stage_count
    direct = inspection + fixed + result.detections * cm.detection_processing_cost
    indirect = (
        result.clandestines_undetected * cm.undetected_unit_cost
        + result.false_alarms * cm.false_alarm_cost
    )
    return CostBreakdown(direct, indirect, result.horizon_hours)


def annualize(cb: CostBreakdown) -> CostBreakdown:
    """Rescale every monetary field to a 8,760-hour year."""
    if not cb.horizon_hours > 0:
        raise NonpositiveHorizonError(f"horizon_hours={cb.horizon_hours!r} must be > 0")
    factor = HOURS_PER_YEAR / cb.horizon_hours
    return CostBreakdown(
        cb.direct * factor,
        cb.indirect * factor,
        HOURS_PER_YEAR,
        cb.annualization_factor * factor,
    )


def _with_check(s: Scenario, stage: str, c: float) -> Scenario:
    stages = tuple(replace(st, check_probability=c) if st.name == stage else st for st in s.stages)
    return replace(s, stages=stages)


def break_even_margin(s: Scenario, stage: str, cm: CostModel | None = None) -> float:
    """Net GBP saved per lorry checked at ``stage``.

    Expected per-lorry cost is affine in the stage's check probability, so
    the difference between never checking (c=0) and always checking (c=1),
    divided by the probability of reaching the stage, is the same for every
    c. A positive margin means each check pays for itself.
    """
    from .tree import expected_outcome, tree_from_scenario

    names = [st.name for st in s.stages]
    if stage not in names:
        raise UnknownStageError(f"no stage {stage!r}; known: {names}")
    cm = cm or s.cost_model
    never = validate_scenario(_with_check(s, stage, 0.0))
    always = validate_scenario(_with_check(s, stage, 1.0))
    t_never = tree_from_scenario(never)
    e_never = expected_outcome(t_never, cm)
    e_always = expected_outcome(tree_from_scenario(always), cm)
    reach = t_never.reach_probability(names.index(stage))
    if reach == 0:
        return 0.0
    return (e_never.total_cost - e_always.total_cost) / reach
