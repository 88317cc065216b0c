"""CSV and JSON writers with fixed, documented headers.

Numbers are written with ``repr`` so that identical inputs give identical
bytes; missing values are empty cells.
"""

from __future__ import annotations

import csv
import io
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from . import __version__
from .cba import CostBreakdown, annualize
from .experiments import METRICS, ExperimentResult, SweepResult
from .scenario import HOURS_PER_YEAR, Scenario
from .tree import TreeExpectation

REPLICATION_COLUMNS = (
    "replication", "seed", "arrivals", "carriers_generated", "clandestines_generated",
    "clandestines_detected", "clandestines_undetected", "detections", "false_alarms",
    "balked_lorries", "inspections", "end_time_hours",
    "direct_gbp", "indirect_gbp", "total_gbp", "annual_total_gbp",
)
STATION_COLUMNS = ("inspections", "detections", "false_alarms", "balked", "max_queue", "mean_wait_hours")
SUMMARY_COLUMNS = ("metric", "n", "mean", "sample_variance", "ci_half_width", "cv", "confidence")
SWEEP_COLUMNS = (
    "value", "sim_mean", "sim_ci_halfwidth", "tree_value", "verdict", "t_statistic", "p_value",
    "detections_sim_mean", "detections_tree_value", "detections_verdict",
    "total_cost_sim_mean", "total_cost_tree_value", "total_cost_verdict",
)
EXPECTATION_COLUMNS = (
    "p_undetected", "p_detected", "p_false_alarm",
    "per_lorry_direct_gbp", "per_lorry_indirect_gbp", "per_lorry_total_gbp", "worst_case_lorry_gbp",
    "expected_lorries", "expected_lorries_per_year",
    "annual_undetected_carriers", "annual_undetected_clandestines",
    "direct_gbp", "indirect_gbp", "total_gbp", "annual_indirect_gbp", "annual_total_gbp",
)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(list(header))
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8", newline="")


def replications_csv(exp: ExperimentResult) -> str:
    keys = [st.key for st in exp.rows[0].stations] if exp.rows else []
    header = list(REPLICATION_COLUMNS) + [f"{k}.{c}" for k in keys for c in STATION_COLUMNS]
    rows = []
    for i, r in enumerate(exp.rows):
        annual = annualize(CostBreakdown(r.direct_cost, r.indirect_cost, r.horizon_hours))
        row = [
            i, r.seed, r.arrivals, r.carriers_generated, r.clandestines_generated,
            r.clandestines_detected, r.clandestines_undetected, r.detections, r.false_alarms,
            r.balked_lorries, r.inspections, r.end_time_hours,
            r.direct_cost, r.indirect_cost, r.total_cost, annual.total,
        ]
        for st in r.stations:
            row += [st.inspections, st.detections, st.false_alarms, st.balked, st.max_queue_length, st.mean_wait_hours]
        rows.append(row)
    return _csv(header, rows)


def summary_csv(exp: ExperimentResult) -> str:
    rows = []
    for m in METRICS:
        s = exp.stats[m]
        two = s.n >= 2
        rows.append([m, s.n, s.mean, s.sample_variance if two else None, s.ci_half_width if two else None, s.cv, s.confidence])
    return _csv(SUMMARY_COLUMNS, rows)


def sweep_csv(res: SweepResult) -> str:
    rows = []
    for row in res.rows:
        und = row.agreement["undetected_clandestines"]
        det = row.agreement["detections"]
        tot = row.agreement["total_cost"]
        st = row.experiment.stats["undetected_clandestines"]
        rows.append([
            row.value, st.mean, st.ci_half_width, row.analytic["undetected_clandestines"], und.verdict,
            und.t_statistic, und.p_value,
            det.mean, det.analytic_value, det.verdict,
            tot.mean, tot.analytic_value, tot.verdict,
        ])
    return _csv(SWEEP_COLUMNS, rows)


def expectation_csv(s: Scenario, e: TreeExpectation) -> str:
    lam = s.expected_arrivals()
    per_year = lam * HOURS_PER_YEAR / s.horizon_hours
    fixed = s.cost_model.fixed_cost_per_hour * s.horizon_hours * len(s.stages)
    cb = CostBreakdown(lam * e.direct_cost + fixed, lam * e.indirect_cost, s.horizon_hours)
    annual = annualize(cb)
    row = [
        e.p_undetected, e.p_detected, e.p_false_alarm,
        e.direct_cost, e.indirect_cost, e.total_cost, e.worst_case_cost,
        lam, per_year,
        per_year * e.p_undetected, per_year * e.expected_undetected_clandestines,
        cb.direct, cb.indirect, cb.total, annual.indirect, annual.total,
    ]
    return _csv(EXPECTATION_COLUMNS, [row])


def manifest(command: str, scenario_path: str | None, scenario_hash: str, seed: int, flags: dict) -> str:
    doc = {
        "command": command,
        "scenario_path": scenario_path,
        "scenario_hash": scenario_hash,
        "master_seed": seed,
        "tool_version": __version__,
        "started_at": datetime.now(timezone.utc).isoformat(),
        "flags": flags,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_all(out_dir: Path, files: dict[str, str]):
    for name, text in files.items():
        _write(out_dir / name, text)
