"""
CSV report writers.

Every file opens with ``#`` provenance lines (config hash, seed) followed by a
header row, so ``pandas.read_csv(path, comment="#")`` loads it directly.
Floats are written with ``repr`` and rows in a fixed order, so identical runs
give byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .cea import Tag
from .grid import GridResult, RunManifest
from .markov import AGE_GROUP_UPPER, COST_CATEGORIES, frequency_label
from .model import ModelInputs
from .sensitivity import HorizonSweep, PsaResult, TornadoBar
from .strategy import DiagnosticPerformance, accuracy

TABLE_ROWS = [
    ("VTDR cases", "Blindness cases", "blindness_cases", 1.0),
    ("VTDR cases", "Detected VTDR cases", "detected_vtdr", 1.0),
    ("VTDR cases", "Treated VTDR cases", "treated_vtdr", 1.0),
    ("Costs (US$ million)", "Screening cost", "screening", 1e-6),
    ("Costs (US$ million)", "Referral cost", "referral", 1e-6),
    ("Costs (US$ million)", "Treatment cost", "treatment", 1e-6),
    ("Costs (US$ million)", "Blindness cost", "blindness", 1e-6),
    ("Costs (US$ million)", "Total cost", "total_cost", 1e-6),
    ("Effectiveness", "QALYs", "qalys", 1.0),
    ("Effectiveness", "Years without blindness", "blindness_free_years", 1.0),
]


@dataclass(frozen=True)
class Provenance:
    config_hash: str
    seed: Optional[int] = None

    def lines(self) -> List[str]:
        return [f"# config_hash: {self.config_hash}",
                f"# seed: {'' if self.seed is None else self.seed}"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Tag):
        return v.value
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], prov: Provenance) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in prov.lines():
                fh.write(line + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report {path}: {exc.strerror}") from exc
    return path


def write_manifest(out: Path, manifest: RunManifest, prov: Provenance) -> Path:
    return write_csv(out / "manifest.csv", ["key", "value"], manifest.as_rows(), prov)


def write_performance(out: Path, inputs: ModelInputs, perfs: Mapping[str, DiagnosticPerformance],
                      prov: Provenance) -> Path:
    prev = inputs.params.reference_prevalence
    rows = [(n, inputs.strategies[n], p.sensitivity, p.specificity, accuracy(p, prev),
             p.expected_cost_per_case, p.human_reads_per_case, p.ai_reads_per_case)
            for n, p in perfs.items()]
    return write_csv(out / "strategy_performance.csv",
                     ["strategy", "expression", "sensitivity", "specificity", "accuracy",
                      "expected_cost_per_case", "human_reads_per_case", "ai_reads_per_case"],
                     rows, prov)


def write_grid(out: Path, grid: GridResult, prov: Provenance) -> Path:
    header = (["scenario_id", "strategy", "expression", "frequency", "age_group", "perspective",
               "total_cost", "qalys", "blindness_free_years"]
              + [f"cost_{c}" for c in COST_CATEGORIES]
              + ["blindness_cases", "detected_vtdr", "treated_vtdr", "comparator_id",
                 "delta_cost", "delta_qalys", "delta_blindness_free_years", "icer",
                 "cost_per_blindness_year_averted", "nmb_1gdp", "nmb_3gdp", "ce_class", "error"])
    rows = []
    for r in grid.rows:
        s = r.spec
        row = [s.id, r.name, s.strategy, frequency_label(s.frequency), f"{s.age_group}-{AGE_GROUP_UPPER}", s.perspective]
        if r.result is None:
            row += [None] * (len(header) - len(row) - 1) + [r.error]
        else:
            res, c = r.result, r.cea
            row += [res.total_cost, res.qalys, res.blindness_free_years]
            row += [res.costs[k] for k in COST_CATEGORIES]
            row += [res.blindness_cases, res.detected_vtdr, res.treated_vtdr, c.comparator_id,
                    c.delta_cost, c.delta_qalys, c.delta_blindness_free_years, c.icer,
                    c.cost_per_blindness_year_averted, c.nmb_low, c.nmb_high, c.ce_class.value, None]
        rows.append(row)
    return write_csv(out / "grid.csv", header, rows, prov)


def write_frontiers(out: Path, grid: GridResult, prov: Provenance) -> Path:
    rows = [(view, p.id, p.cost, p.qalys, p.status, p.icer_vs_previous)
            for view, pts in grid.frontiers.items() for p in pts]
    return write_csv(out / "frontier.csv",
                     ["view", "scenario_id", "cost", "qalys", "status", "icer_vs_previous"], rows, prov)


def write_table(out: Path, inputs: ModelInputs, grid: GridResult, prov: Provenance,
                frequency: int = 1, age_group: int = 20) -> Optional[Path]:
    """Status quo in absolute terms, every other strategy as increments, for one cell."""
    cell = {r.name: r for r in grid.rows
            if r.spec.frequency == frequency and r.spec.age_group == age_group and r.result is not None}
    comp = inputs.comparator
    if comp not in cell:
        return None
    others = [n for n in inputs.strategies if n in cell and n != comp]
    base = cell[comp].result

    def value(res, key):
        if key in res.costs:
            return res.costs[key]
        return getattr(res, key)

    rows = []
    for group, label, key, scale in TABLE_ROWS:
        rows.append([group, label, value(base, key) * scale]
                    + [(value(cell[n].result, key) - value(base, key)) * scale for n in others])
    rows.append(["Cost-effectiveness evaluation", "ICER (incremental cost / incremental QALYs)", None]
                + [cell[n].cea.icer for n in others])
    rows.append(["Cost-effectiveness evaluation", "Cost per blindness year averted", None]
                + [cell[n].cea.cost_per_blindness_year_averted for n in others])
    rows.append(["Cost-effectiveness evaluation", "NMB at 3x GDP (US$ million)", None]
                + [cell[n].cea.nmb_high * 1e-6 for n in others])
    rows.append(["Cost-effectiveness evaluation", "Class", None]
                + [cell[n].cea.ce_class.value for n in others])
    header = ["group", "row", f"{comp} ({inputs.strategies[comp]})"] + \
             [f"{n} ({inputs.strategies[n]})" for n in others]
    return write_csv(out / "table_incremental.csv", header, rows, prov)


def write_psa(out: Path, psa: PsaResult, comparator: str, prov: Provenance,
              per_draw: bool = False) -> List[Path]:
    summary = psa.summary(comparator)
    keys = list(summary[0])
    paths = [write_csv(out / "psa_summary.csv", keys, [[r[k] for k in keys] for r in summary], prov)]
    if per_draw:
        rows = []
        for d in range(psa.n_draws):
            for j, n in enumerate(psa.strategies):
                rows.append((d, n, psa.costs[d, j], psa.qalys[d, j]))
        paths.append(write_csv(out / "psa_draws.csv", ["draw", "strategy", "cost", "qalys"], rows, prov))
    if psa.diagnostics:
        paths.append(write_csv(out / "psa_failed_draws.csv", ["draw", "reason"],
                               sorted(psa.diagnostics.items()), prov))
    return paths


def write_ceac(out: Path, psa: PsaResult, grid_wtp: Sequence[float], table: np.ndarray,
               prov: Provenance) -> Path:
    rows = [(w, n, table[i, j]) for i, w in enumerate(grid_wtp) for j, n in enumerate(psa.strategies)]
    return write_csv(out / "ceac.csv", ["wtp", "strategy", "probability"], rows, prov)


def write_tornado(out: Path, bars_by_comparison: Mapping[str, List[TornadoBar]], prov: Provenance,
                  top: Optional[int] = None) -> Path:
    rows = []
    for comparison, bars in bars_by_comparison.items():
        for b in (bars if top is None else bars[:top]):
            rows.append((comparison, b.path, b.low, b.high, b.value_low, b.value_high, b.base,
                         b.width, b.error))
    return write_csv(out / "tornado.csv",
                     ["comparison", "parameter", "low", "high", "icer_low", "icer_high", "icer_base",
                      "width", "error"], rows, prov)


def write_horizon(out: Path, sweep: HorizonSweep, prov: Provenance) -> Path:
    rows = [(h, r.scenario_id, r.delta_cost, r.delta_qalys, r.delta_blindness_free_years, r.icer,
             r.nmb_low, r.nmb_high, r.ce_class.value)
            for h in sweep.horizons for r in sweep.records[h]]
    return write_csv(out / "horizon.csv",
                     ["horizon", "strategy", "delta_cost", "delta_qalys", "delta_blindness_free_years",
                      "icer", "nmb_1gdp", "nmb_3gdp", "ce_class"], rows, prov)


def emit_reports(out_dir, manifest: RunManifest, prov: Provenance, *, inputs: Optional[ModelInputs] = None,
                 performances=None, grid: Optional[GridResult] = None, psa: Optional[PsaResult] = None,
                 ceac_table=None, ceac_grid=None, tornado=None, horizon: Optional[HorizonSweep] = None,
                 per_draw: bool = False, tornado_top: Optional[int] = None) -> List[Path]:
    """Write whatever results are supplied; the manifest echo is always written."""
    out = Path(out_dir)
    paths = [write_manifest(out, manifest, prov)]
    if performances is not None and "strategy-performance" in manifest.analyses:
        paths.append(write_performance(out, inputs, performances, prov))
    if grid is not None:
        if "grid" in manifest.analyses:
            paths.append(write_grid(out, grid, prov))
            table = write_table(out, inputs, grid, prov)
            if table is not None:
                paths.append(table)
        if grid.frontiers and "frontier" in manifest.analyses:
            paths.append(write_frontiers(out, grid, prov))
    wanted = set(manifest.analyses)
    if psa is not None and "psa" in wanted:
        paths += write_psa(out, psa, inputs.comparator, prov, per_draw)
    if ceac_table is not None and "ceac" in wanted:
        paths.append(write_ceac(out, psa, ceac_grid, ceac_table, prov))
    if tornado is not None and "tornado" in wanted:
        paths.append(write_tornado(out, tornado, prov, tornado_top))
    if horizon is not None and "horizon-sweep" in wanted:
        paths.append(write_horizon(out, horizon, prov))
    return paths
