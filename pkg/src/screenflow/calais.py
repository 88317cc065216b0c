"""Default two-stage (French then British) Calais screening scenario.

Only three figures are published data: annual throughput, the carrier
share and the cost per undetected clandestine. Everything else below is a
placeholder marked ASSUMPTION and must not be read as measured.
"""

from __future__ import annotations

from .scenario import (
    ArrivalSegment,
    ChainEntry,
    ControlStage,
    CostModel,
    GroupSize,
    Scenario,
    ServiceTime,
    Station,
)

ANNUAL_LORRIES = 900_000  # Apr 2007 to Apr 2008 throughput
CARRIER_PROBABILITY = 0.004  # share of lorries with clandestines aboard
UNDETECTED_UNIT_COST = 20_000.0  # GBP per clandestine reaching the UK
ARRIVAL_RATE = ANNUAL_LORRIES / 8760.0  # lorries per hour, ~102.74

BOTH = ("soft", "hard")


def _station(sid, kind, types, tp, fp, cost, mean_hours, servers):
    return Station(
        id=sid,
        kind=kind,
        applicable_types=types,
        tp_rate=tp,
        fp_rate=fp,
        cost_per_inspection=cost,
        service_time=ServiceTime("exponential", mean=mean_hours),
        servers=servers,
        queue_capacity=None,
    )


def french_stage() -> ControlStage:
    return ControlStage(
        name="french",
        check_probability=0.5,  # ASSUMPTION
        primary_station={"soft": "PMMW", "hard": "HB"},
        secondary_chain=(
            ChainEntry("CO2", 0.1),  # ASSUMPTION: selection probability
            ChainEntry("CANINE", 0.1),  # ASSUMPTION: selection probability
        ),
        stations=(
            # ASSUMPTION: all rates, costs, service means and server counts
            _station("PMMW", "PMMW", ("soft",), 0.7, 0.02, 15.0, 0.05, 2),
            _station("HB", "HB", ("hard",), 0.8, 0.01, 10.0, 0.10, 4),
            _station("CO2", "CO2", BOTH, 0.75, 0.03, 20.0, 0.10, 2),
            _station("CANINE", "CANINE", BOTH, 0.6, 0.05, 25.0, 0.15, 2),
        ),
    )


def british_stage() -> ControlStage:
    # PMMW is not deployed on the British side; soft-sided lorries get CO2.
    return ControlStage(
        name="british",
        check_probability=0.5,  # ASSUMPTION; the swept parameter
        primary_station={"soft": "CO2", "hard": "HB"},
        secondary_chain=(
            ChainEntry("CANINE", 0.2),  # ASSUMPTION
            ChainEntry("VISUAL", 0.1),  # ASSUMPTION
        ),
        stations=(
            # ASSUMPTION: all rates, costs, service means and server counts
            _station("CO2", "CO2", BOTH, 0.75, 0.03, 20.0, 0.08, 6),
            _station("HB", "HB", ("hard",), 0.8, 0.01, 10.0, 0.10, 8),
            _station("CANINE", "CANINE", BOTH, 0.6, 0.05, 25.0, 0.15, 5),
            _station("VISUAL", "VISUAL", BOTH, 0.3, 0.02, 30.0, 0.25, 4),
        ),
    )


def default_scenario(master_seed: int = 20100120) -> Scenario:
    """One-week Calais scenario with unbounded queues."""
    return Scenario(
        arrival_schedule=(ArrivalSegment(0.0, ARRIVAL_RATE),),
        horizon_hours=168.0,  # ASSUMPTION: one-week replications
        carrier_probability=CARRIER_PROBABILITY,
        soft_sided_probability=0.5,  # ASSUMPTION
        stages=(french_stage(), british_stage()),
        group_size=GroupSize("degenerate", value=1),
        cost_model=CostModel(undetected_unit_cost=UNDETECTED_UNIT_COST),
        master_seed=master_seed,
    )
