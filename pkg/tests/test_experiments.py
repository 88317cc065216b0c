import json
import math
from dataclasses import replace

import numpy as np
import pytest

from screenflow.errors import UnknownParameterPathError, ValueOutOfRangeError
from screenflow.experiments import (
    SIMULATION_USEFUL,
    TOO_RARE_FOR_BUDGET,
    TREE_SUFFICIENT,
    FeasibilityReport,
    analytic_metrics,
    feasibility_verdict,
    run_experiment,
    sweep,
    with_parameter,
)
from screenflow.scenario import scenario_to_dict, validate_scenario
from screenflow.stats import CONSISTENT
from screenflow.tree import expected_outcome, tree_from_scenario

from conftest import make_station, single_stage


def test_rerun_is_bit_identical(calais):
    a = run_experiment(calais, 10)
    assert a.replications == 10
    assert a == run_experiment(calais, 10)


def test_workers_do_not_change_results(calais):
    assert run_experiment(calais, 6, workers=1) == run_experiment(calais, 6, workers=3)


def test_default_mean_is_near_tree(calais):
    exp = run_experiment(calais, 10)
    e = expected_outcome(tree_from_scenario(calais), calais.cost_model)
    target = analytic_metrics(calais, e)["undetected_clandestines"]
    st = exp.stats["undetected_clandestines"]
    assert abs(st.mean - target) <= 3 * st.stdev / math.sqrt(st.n)


def test_no_carriers_means_no_variance():
    s = single_stage(p=0.0, rate=5.0)
    st = run_experiment(s, 1000, queue_stats=False).stats["undetected_clandestines"]
    assert st.mean == 0 and st.sample_variance == 0


def test_sweep_british_check_probability(calais):
    values = [0, 0.25, 0.5, 0.75, 1.0]
    res = sweep(calais, "stages.british.check_probability", values, 10)
    assert [r.value for r in res.rows] == values
    assert all(r.verdict == CONSISTENT for r in res.rows)
    zero = res.rows[0].experiment
    british = [k for k in zero.rows[0].stations if k.key.startswith("british.")]
    assert british
    for row in zero.rows:
        assert sum(x.inspections for x in row.stations if x.key.startswith("british.")) == 0
    p = [r.expectation.p_undetected for r in res.rows]
    assert all(b < a for a, b in zip(p, p[1:]))
    # The input scenario is untouched.
    assert calais.stage("british").check_probability == 0.5


def test_sweep_seeds(calais):
    indep = sweep(calais, "stages.british.check_probability", [0.2, 0.4], 2)
    crn = sweep(calais, "stages.british.check_probability", [0.2, 0.4], 2, crn=True)
    assert indep.rows[0].experiment.master_seed != indep.rows[1].experiment.master_seed
    assert crn.rows[0].experiment.master_seed == crn.rows[1].experiment.master_seed == calais.master_seed


def test_sweep_rejects_bad_input(calais):
    with pytest.raises(ValueOutOfRangeError):
        sweep(calais, "carrier_probability", [0.1, 0.1], 5)
    with pytest.raises(ValueOutOfRangeError):
        sweep(calais, "carrier_probability", [0.1], 1)


def test_with_parameter_paths(calais):
    s = with_parameter(calais, "stages.french.stations.PMMW.tp_rate", 0.9)
    assert s.stage("french").station("PMMW").tp_rate == 0.9
    assert calais.stage("french").station("PMMW").tp_rate == 0.7
    s = with_parameter(calais, "arrival_schedule.0.rate", 50.0)
    assert s.arrival_schedule[0].rate == 50.0
    s = with_parameter(calais, "stages.british.stations.HB.servers", 3)
    assert s.stage("british").station("HB").servers == 3
    with pytest.raises(UnknownParameterPathError):
        with_parameter(calais, "stages.belgian.check_probability", 0.1)
    with pytest.raises(UnknownParameterPathError):
        with_parameter(calais, "stages.french.primary_station", 0.1)
    with pytest.raises(ValueOutOfRangeError):
        with_parameter(calais, "carrier_probability", 1.5)


def test_feasibility_examples(calais):
    r = feasibility_verdict(single_stage(p=0.5), "carrier", 0.1, 0.95, 10_000)
    assert (r.required_replications, r.verdict) == (385, TREE_SUFFICIENT)
    r = feasibility_verdict(calais, "carrier", 0.1, 0.95, 50_000)
    assert (r.required_replications, r.verdict) == (95_653, TOO_RARE_FOR_BUDGET)
    finite = validate_scenario(
        replace(calais, stages=tuple(replace(st, stations=tuple(replace(x, queue_capacity=20) for x in st.stations)) for st in calais.stages))
    )
    r = feasibility_verdict(finite, "carrier", 0.1, 0.95, 100_000)
    assert (r.required_replications, r.verdict) == (95_653, SIMULATION_USEFUL)
    assert r.recompute_verdict() == r.verdict


def test_feasibility_over_cap_and_impossible(calais):
    r = feasibility_verdict(calais, "carrier", 0.1, 0.95, 100_000, tree_node_cap=50)
    assert r.tree_node_count is None and r.verdict == SIMULATION_USEFUL
    r = feasibility_verdict(single_stage(p=0.0), "carrier")
    assert r.verdict == TOO_RARE_FOR_BUDGET and r.required_replications is None
    assert "impossible" in r.rationale


def test_feasibility_report_round_trips(calais):
    r = feasibility_verdict(calais)
    assert FeasibilityReport(**json.loads(r.to_json())) == r
    assert r.verdict in r.to_text()


def test_cv_grows_as_event_gets_rarer(calais):
    cvs = []
    for p in (0.5, 0.05, 0.004):
        s = with_parameter(calais, "carrier_probability", p)
        per_seed = []
        for seed in range(10):
            st = run_experiment(replace(s, master_seed=seed), 10, queue_stats=False).stats["undetected_clandestines"]
            per_seed.append(st.cv)
        cvs.append(np.mean(per_seed))
    assert cvs[0] <= cvs[1] <= cvs[2]


def test_re_evaluation_is_pure(calais):
    before = scenario_to_dict(calais)
    run_experiment(calais, 3)
    sweep(calais, "stages.french.check_probability", [0.1, 0.9], 3)
    feasibility_verdict(calais)
    assert scenario_to_dict(calais) == before


def test_finite_capacity_runs_event_loop():
    s = single_stage(station=make_station(capacity=1), rate=30.0)
    exp = run_experiment(s, 3, queue_stats=False)
    assert all(r.end_time_hours is not None for r in exp.rows)
