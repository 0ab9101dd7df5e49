"""Scenario grid: every selected (strategy, frequency, age group) against the status quo."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .cea import CeaRecord, FrontierPoint, cea_record, frontier
from .markov import AGE_GROUPS, FREQUENCIES, ScenarioResult, ScenarioSpec
from .model import ModelInputs, evaluate_cell

ANALYSES = ("grid", "frontier", "tornado", "psa", "ceac", "horizon-sweep", "strategy-performance")


@dataclass
class RunManifest:
    config_paths: List[str]
    strategies: Optional[List[str]] = None  # strategy names; None selects all
    frequencies: Optional[List[int]] = None
    age_groups: Optional[List[int]] = None
    perspective: str = "societal"
    seed: Optional[int] = None
    out_dir: str = "out"
    analyses: Tuple[str, ...] = ("grid",)
    horizon: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        for a in self.analyses:
            if a not in ANALYSES:
                raise ValueError(f"unknown analysis {a!r}; choose from {ANALYSES}")

    def cells(self) -> List[Tuple[int, int]]:
        freqs = self.frequencies if self.frequencies is not None else list(FREQUENCIES)
        ages = self.age_groups if self.age_groups is not None else list(AGE_GROUPS)
        return [(f, a) for f in freqs for a in ages]

    def names(self, inputs: ModelInputs) -> List[str]:
        if self.strategies is None:
            return list(inputs.strategies)
        for n in self.strategies:
            if n not in inputs.strategies:
                raise ValueError(f"unknown strategy {n!r}")
        return list(self.strategies)

    def as_rows(self) -> List[Tuple[str, str]]:
        return [
            ("config", ";".join(self.config_paths)),
            ("strategies", "all" if self.strategies is None else ";".join(self.strategies)),
            ("frequencies", "all" if self.frequencies is None else ";".join(map(str, self.frequencies))),
            ("age_groups", "all" if self.age_groups is None else ";".join(map(str, self.age_groups))),
            ("perspective", self.perspective),
            ("seed", "" if self.seed is None else str(self.seed)),
            ("analyses", ";".join(self.analyses)),
            ("horizon", "to max age" if self.horizon is None else str(self.horizon)),
        ]


@dataclass
class GridRow:
    name: str
    spec: ScenarioSpec
    result: Optional[ScenarioResult] = None
    cea: Optional[CeaRecord] = None
    error: Optional[str] = None


@dataclass
class GridResult:
    rows: List[GridRow]
    frontiers: Dict[str, List[FrontierPoint]] = field(default_factory=dict)

    def row(self, name: str, frequency: int, age_group: int) -> GridRow:
        for r in self.rows:
            if r.name == name and r.spec.frequency == frequency and r.spec.age_group == age_group:
                return r
        raise KeyError((name, frequency, age_group))


def _spec(inputs, name, f, a, manifest) -> ScenarioSpec:
    return ScenarioSpec(inputs.strategies[name], f, a, inputs.cohort_size, manifest.horizon,
                        manifest.perspective)


def _run_cell(args):
    inputs, names, f, a, manifest = args
    comparator = inputs.comparator
    to_eval = names if comparator in names else [comparator] + names
    specs = {n: _spec(inputs, n, f, a, manifest) for n in to_eval}
    try:
        res = evaluate_cell(inputs, to_eval, f, a, manifest.horizon, manifest.perspective)
    except (ValueError, KeyError) as exc:
        return [GridRow(n, specs[n], error=str(exc)) for n in names]
    base = res[comparator]
    rows = []
    for n in names:
        r = res[n]
        rows.append(GridRow(n, specs[n], r, cea_record(
            specs[n].id, specs[comparator].id,
            r.total_cost - base.total_cost,
            r.qalys - base.qalys,
            r.blindness_free_years - base.blindness_free_years,
            inputs.wtp)))
    return rows


def run_grid(inputs: ModelInputs, manifest: RunManifest, with_frontiers: bool = True) -> GridResult:
    """Evaluate the selected grid; a failing cell yields error rows, never gaps.

    Frontiers are built per (frequency, age group) cell and pooled over the
    whole grid.
    """
    names = manifest.names(inputs)
    jobs = [(inputs, names, f, a, manifest) for f, a in manifest.cells()]
    if manifest.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=manifest.workers) as pool:
            parts = list(pool.map(_run_cell, jobs))
    else:
        parts = [_run_cell(j) for j in jobs]
    rows = [r for part in parts for r in part]
    out = GridResult(rows)
    if with_frontiers:
        ok = [r for r in rows if r.result is not None]
        for f, a in manifest.cells():
            pts = [(r.spec.id, r.result.total_cost, r.result.qalys) for r in ok
                   if r.spec.frequency == f and r.spec.age_group == a]
            if len(pts) >= 2:
                out.frontiers[pts[0][0].split("|", 1)[1]] = frontier(pts)
        pooled = [(r.spec.id, r.result.total_cost, r.result.qalys) for r in ok]
        if len(pooled) >= 2:
            out.frontiers["pooled"] = frontier(pooled)
    return out
