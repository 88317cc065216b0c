from __future__ import annotations

import pytest

from screenflow.calais import default_scenario
from screenflow.scenario import (
    ArrivalSegment,
    ChainEntry,
    ControlStage,
    CostModel,
    GroupSize,
    Scenario,
    ServiceTime,
    Station,
    validate_scenario,
)


def make_station(sid="S", tp=0.8, fp=0.0, cost=0.0, service=None, servers=1, capacity=None, types=("soft", "hard")):
    return Station(
        id=sid,
        kind="OTHER",
        applicable_types=types,
        tp_rate=tp,
        fp_rate=fp,
        cost_per_inspection=cost,
        service_time=service or ServiceTime("exponential", mean=0.01),
        servers=servers,
        queue_capacity=capacity,
    )


def single_stage(c=0.5, tp=0.8, fp=0.0, p=0.004, rate=10.0, horizon=24.0, cost=0.0,
                 cm=None, station=None, chain=(), extra_stations=(), seed=1, group=None):
    st = station or make_station(tp=tp, fp=fp, cost=cost)
    stage = ControlStage(
        name="only",
        check_probability=c,
        primary_station={"soft": st.id, "hard": st.id},
        secondary_chain=tuple(chain),
        stations=(st, *extra_stations),
    )
    return validate_scenario(
        Scenario(
            arrival_schedule=(ArrivalSegment(0.0, rate),),
            horizon_hours=horizon,
            carrier_probability=p,
            soft_sided_probability=0.5,
            stages=(stage,),
            group_size=group or GroupSize(),
            cost_model=cm or CostModel(),
            master_seed=seed,
        )
    )


@pytest.fixture
def calais():
    return validate_scenario(default_scenario())


def random_scenario(rng, *, finite=None, max_rate=30.0, max_horizon=24.0, min_carrier=0.0):
    """A random valid scenario with 1-3 stages and 0-3 chain stations per stage.

    ``finite`` forces (True) or forbids (False) finite queue capacities;
    None mixes both.
    """
    kinds = ("PMMW", "HB", "CO2", "CANINE", "VISUAL", "OTHER")
    stages = []
    for k in range(int(rng.integers(1, 4))):
        n_st = int(rng.integers(1, 5))
        stations = []
        for i in range(n_st):
            r = rng.random()
            types = ("soft",) if r < 0.2 else ("hard",) if r < 0.4 else ("soft", "hard")
            law = rng.choice(["deterministic", "exponential", "lognormal"])
            if law == "deterministic":
                svc = ServiceTime("deterministic", value=float(rng.uniform(0.0, 0.2)))
            elif law == "exponential":
                svc = ServiceTime("exponential", mean=float(rng.uniform(0.01, 0.2)))
            else:
                svc = ServiceTime("lognormal", mu=float(rng.uniform(-4, -2)), sigma=float(rng.uniform(0.1, 1.0)))
            use_finite = rng.random() < 0.5 if finite is None else finite
            stations.append(
                Station(
                    id=f"S{i}",
                    kind=str(rng.choice(kinds)),
                    applicable_types=types,
                    tp_rate=float(rng.uniform(0, 1)),
                    fp_rate=float(rng.uniform(0, 0.2)),
                    cost_per_inspection=float(rng.uniform(0, 50)),
                    service_time=svc,
                    servers=int(rng.integers(1, 4)),
                    queue_capacity=int(rng.integers(1, 6)) if use_finite else None,
                )
            )
        primary = {}
        for ltype in ("soft", "hard"):
            options = [st.id for st in stations if ltype in st.applicable_types]
            if options and rng.random() < 0.9:
                primary[ltype] = str(rng.choice(options))
        chain = tuple(
            ChainEntry(str(rng.choice([st.id for st in stations])), float(rng.uniform(0, 1)))
            for _ in range(int(rng.integers(0, 4)))
        )
        stages.append(
            ControlStage(f"stage{k}", float(rng.uniform(0, 1)), primary, chain, tuple(stations))
        )
    gk = rng.choice(["degenerate", "geometric", "empirical"])
    if gk == "degenerate":
        group = GroupSize("degenerate", value=int(rng.integers(1, 4)))
    elif gk == "geometric":
        group = GroupSize("geometric", p=float(rng.uniform(0.3, 1.0)))
    else:
        group = GroupSize("empirical", values=(1, 2, 5), weights=tuple(float(w) for w in rng.uniform(0.1, 1, 3)))
    horizon = float(rng.uniform(2.0, max_horizon))
    schedule = [ArrivalSegment(0.0, float(rng.uniform(1, max_rate)))]
    if rng.random() < 0.5:
        schedule.append(ArrivalSegment(float(rng.uniform(0.5, horizon)), float(rng.uniform(0, max_rate))))
    return validate_scenario(
        Scenario(
            arrival_schedule=tuple(schedule),
            horizon_hours=horizon,
            carrier_probability=float(rng.uniform(min_carrier, 0.5)),
            soft_sided_probability=float(rng.uniform(0, 1)),
            stages=tuple(stages),
            group_size=group,
            cost_model=CostModel(
                undetected_unit_cost=float(rng.uniform(0, 30_000)),
                detection_processing_cost=float(rng.uniform(0, 500)),
                false_alarm_cost=float(rng.uniform(0, 100)),
                fixed_cost_per_hour=float(rng.uniform(0, 10)),
            ),
            master_seed=int(rng.integers(0, 2**63)),
        )
    )


# One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
