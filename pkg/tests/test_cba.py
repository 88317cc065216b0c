from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from screenflow.cba import CostBreakdown, annualize, break_even_margin, cost_of
from screenflow.engine import run_replication
from screenflow.errors import NonpositiveHorizonError, UnknownStageError
from screenflow.scenario import CostModel, build_network, validate_scenario
from screenflow.tree import expected_outcome, tree_from_scenario

from conftest import make_station, random_scenario, single_stage

seeds = st.integers(min_value=0, max_value=2**32)


def _result(s, **counts):
    base = run_replication(build_network(s), s, 0, queue_stats=False)
    zero = dict(arrivals=0, carriers_generated=0, clandestines_generated=0, clandestines_detected=0,
                clandestines_undetected=0, detections=0, false_alarms=0, balked_lorries=0)
    zero.update(counts)
    inspections = zero.pop("inspections", 0)
    stations = tuple(replace(x, inspections=inspections if i == 0 else 0) for i, x in enumerate(base.stations))
    return replace(base, stations=stations, **zero)


def test_empty_run_costs_nothing():
    s = single_stage(rate=0.0)
    cb = cost_of(_result(s), CostModel())
    assert cb.total == 0.0


def test_undetected_unit_cost():
    s = single_stage()
    cb = cost_of(_result(s, clandestines_undetected=2), CostModel(undetected_unit_cost=20_000))
    assert cb.indirect == 40_000 and cb.direct == 0


def test_inspection_and_processing_costs():
    s = single_stage(cost=15.0)
    cb = cost_of(_result(s, inspections=100, detections=1), CostModel(undetected_unit_cost=0, detection_processing_cost=500))
    assert cb.direct == 2000 and cb.indirect == 0


def test_fixed_cost_per_stage_hour(calais):
    cm = CostModel(fixed_cost_per_hour=3.0)
    cb = cost_of(_result(calais), cm)
    assert cb.direct == 3.0 * 168 * 2


def test_annualize_week():
    a = annualize(CostBreakdown(600.0, 400.0, 168.0))
    assert a.total == pytest.approx(1000 * 8760 / 168, abs=0.01)
    assert a.total == pytest.approx(52_142.86, abs=0.01)
    assert a.annualization_factor == pytest.approx(8760 / 168)
    assert a.horizon_hours == 8760


def test_annualize_year_is_identity():
    cb = CostBreakdown(12.5, 7.25, 8760.0)
    assert annualize(cb) == cb
    assert annualize(annualize(cb)) == cb


@pytest.mark.parametrize("h", [0.0, -5.0])
def test_annualize_rejects_nonpositive_horizon(h):
    with pytest.raises(NonpositiveHorizonError) as exc:
        annualize(CostBreakdown(1.0, 1.0, h))
    assert exc.value.code == "NONPOSITIVE_HORIZON"


@pytest.mark.parametrize("cost,margin", [(10.0, 70.0), (80.0, 0.0)])
def test_break_even_examples(cost, margin):
    s = single_stage(tp=1.0, fp=0.0, p=0.004, cost=cost, cm=CostModel(undetected_unit_cost=20_000))
    assert break_even_margin(s, "only") == pytest.approx(margin, abs=1e-9)


def test_free_inspection_always_pays():
    s = single_stage(tp=0.3, fp=0.0, p=0.004, cost=0.0)
    assert break_even_margin(s, "only") > 0


def test_margin_is_per_checked_lorry_at_second_stage(calais):
    # Second stage of identical perfect screens: only lorries that survive
    # the first are checked, so the margin is normalised by that share.
    first = make_station("A", tp=0.5, cost=0.0)
    second = make_station("B", tp=1.0, cost=10.0)
    s = single_stage(c=1.0, p=0.004, station=first, cm=CostModel(undetected_unit_cost=20_000))
    stage2 = replace(s.stages[0], name="two", primary_station={"soft": "B", "hard": "B"}, stations=(second,))
    s = validate_scenario(replace(s, stages=(s.stages[0], stage2)))
    reach = 1 - 0.004 * 0.5
    residual = 0.004 * 0.5 / reach
    assert break_even_margin(s, "two") == pytest.approx(residual * 20_000 - 10.0, rel=1e-12)


def test_unknown_stage(calais):
    with pytest.raises(UnknownStageError) as exc:
        break_even_margin(calais, "belgian")
    assert exc.value.code == "UNKNOWN_STAGE"


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_cost_is_linear_in_counts(seed):
    s = random_scenario(np.random.default_rng(seed))
    r = run_replication(build_network(s), s, seed)
    cm = replace(s.cost_model, fixed_cost_per_hour=0.0)
    doubled = replace(
        r,
        clandestines_undetected=2 * r.clandestines_undetected,
        detections=2 * r.detections,
        false_alarms=2 * r.false_alarms,
        stations=tuple(replace(x, inspections=2 * x.inspections) for x in r.stations),
    )
    a, b = cost_of(r, cm), cost_of(doubled, cm)
    assert b.direct == pytest.approx(2 * a.direct, rel=1e-12)
    assert b.indirect == pytest.approx(2 * a.indirect, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_margin_sign_matches_tree(seed):
    rng = np.random.default_rng(seed)
    s = random_scenario(rng)
    stage = s.stages[int(rng.integers(len(s.stages)))]
    m = break_even_margin(s, stage.name)

    def total(c):
        x = validate_scenario(replace(s, stages=tuple(replace(y, check_probability=c) if y is stage else y for y in s.stages)))
        return expected_outcome(tree_from_scenario(x), x.cost_model).total_cost

    lo, hi = total(0.0), total(1.0)
    if abs(m) > 1e-9:
        assert (hi < lo) == (m > 0)
    # Affine in c: the midpoint is the mean of the endpoints.
    assert total(0.5) == pytest.approx((lo + hi) / 2, rel=1e-9, abs=1e-9)
