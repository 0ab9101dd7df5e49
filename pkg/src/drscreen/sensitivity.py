"""
One-way and probabilistic sensitivity analysis.

PSA draws are seeded individually from ``SeedSequence(master_seed,
spawn_key=(draw,))`` so any draw can be recomputed alone and the result does
not depend on how draws are split across workers. Within a draw every
strategy sees the same sampled parameters.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .cea import CeaRecord, CeClass, Tag, cea_record, icer, nmb
from .model import ModelInputs, evaluate_cell, get_path, with_path

FAMILIES = ("beta", "gamma", "uniform", "triangular")
DEFAULT_RELATIVE_SD = 0.10


def parameter_kind(path: str) -> str:
    """'cost', 'probability' or 'other', used to police distribution families."""
    if path.startswith("costs.") or path.endswith("cost_per_read"):
        return "cost"
    if path.startswith(("transitions.", "utilities.")) or path == "treatment_uptake":
        if path.startswith("transitions.mortality_multipliers"):
            return "other"
        return "probability"
    if path.startswith("graders.") and path.rsplit(".", 1)[-1] in (
            "sensitivity", "specificity", "ungradable_rate",
            "p_pass_given_positive", "p_pass_given_negative"):
        return "probability"
    return "other"


@dataclass(frozen=True)
class DistributionSpec:
    """Sampling distribution for one parameter.

    ``hyper`` holds ``alpha, beta`` (beta), ``shape, scale`` (gamma),
    ``low, high`` (uniform) or ``low, mode, high`` (triangular). A beta or
    gamma built from a zero SD is a point mass at ``mean``.
    """

    path: str
    family: str
    hyper: Tuple[float, ...]
    mean: Optional[float] = None
    group: Optional[str] = None  # reserved for correlated sampling

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"{self.path}: unknown family {self.family!r}")
        kind = parameter_kind(self.path)
        if self.family == "beta" and kind != "probability":
            raise ValueError(f"{self.path}: beta is reserved for probabilities")
        if self.family == "gamma" and kind != "cost":
            raise ValueError(f"{self.path}: gamma is reserved for non-negative costs")
        h = self.hyper
        n = {"beta": 2, "gamma": 2, "uniform": 2, "triangular": 3}[self.family]
        if self.is_point_mass:
            return
        if len(h) != n:
            raise ValueError(f"{self.path}: {self.family} needs {n} hyperparameters")
        if self.family in ("beta", "gamma") and min(h) <= 0:
            raise ValueError(f"{self.path}: {self.family} hyperparameters must be positive")
        if self.family == "uniform" and h[0] > h[1]:
            raise ValueError(f"{self.path}: uniform needs low <= high")
        if self.family == "triangular" and not h[0] <= h[1] <= h[2]:
            raise ValueError(f"{self.path}: triangular needs low <= mode <= high")

    @property
    def is_point_mass(self) -> bool:
        return self.family in ("beta", "gamma") and not self.hyper and self.mean is not None

    @classmethod
    def from_moments(cls, path: str, family: str, mean: float, sd: float) -> "DistributionSpec":
        if sd < 0:
            raise ValueError(f"{path}: sd must be >= 0")
        if sd == 0:
            return cls(path, family, (), mean=mean)
        if family == "beta":
            var = sd * sd
            if not 0 < mean < 1 or var >= mean * (1 - mean):
                raise ValueError(f"{path}: no beta with mean {mean} and sd {sd}")
            k = mean * (1 - mean) / var - 1
            return cls(path, family, (mean * k, (1 - mean) * k), mean=mean)
        if family == "gamma":
            if mean <= 0:
                raise ValueError(f"{path}: gamma needs a positive mean")
            return cls(path, family, (mean * mean / (sd * sd), sd * sd / mean), mean=mean)
        raise ValueError(f"{path}: moment matching only for beta and gamma")

    @classmethod
    def default_for(cls, path: str, base: float,
                    relative_sd: float = DEFAULT_RELATIVE_SD) -> "DistributionSpec":
        """Beta for probabilities, gamma for costs, both at ``relative_sd`` of the base value."""
        kind = parameter_kind(path)
        if kind == "probability":
            sd = relative_sd * base
            # keep the beta feasible for values near 0 or 1
            sd = min(sd, 0.5 * math.sqrt(base * (1 - base))) if 0 < base < 1 else 0.0
            return cls.from_moments(path, "beta", base, sd)
        if kind == "cost":
            return cls.from_moments(path, "gamma", base, relative_sd * base if base > 0 else 0.0)
        return cls(path, "uniform", (base * (1 - relative_sd), base * (1 + relative_sd)))

    def sample(self, rng: np.random.Generator) -> float:
        if self.is_point_mass:
            return float(self.mean)
        h = self.hyper
        if self.family == "beta":
            return float(rng.beta(h[0], h[1]))
        if self.family == "gamma":
            return float(rng.gamma(h[0], h[1]))
        if self.family == "uniform":
            return float(h[0]) if h[0] == h[1] else float(rng.uniform(h[0], h[1]))
        if h[0] == h[2]:
            return float(h[0])
        return float(rng.triangular(h[0], h[1], h[2]))


# --- PSA --------------------------------------------------------------------

class PsaDrawError(ValueError):
    pass


@dataclass
class PsaResult:
    strategies: List[str]
    costs: np.ndarray  # (n_draws, n_strategies)
    qalys: np.ndarray
    master_seed: int
    frequency: int
    age_group: int
    diagnostics: Dict[int, str] = field(default_factory=dict)  # failed draw -> reason

    @property
    def n_draws(self) -> int:
        return self.costs.shape[0]

    def valid(self) -> np.ndarray:
        return ~(np.isnan(self.costs).any(axis=1) | np.isnan(self.qalys).any(axis=1))

    def summary(self, comparator: Optional[str] = None) -> List[dict]:
        """Per-strategy mean and 95% interval of cost and QALYs (and increments)."""
        ok = self.valid()
        rows = []
        ci = comparator and self.strategies.index(comparator)
        for j, name in enumerate(self.strategies):
            c, q = self.costs[ok, j], self.qalys[ok, j]
            row = {"strategy": name, "draws": int(ok.sum())}
            for label, x in (("cost", c), ("qalys", q)):
                row[f"{label}_mean"] = float(x.mean())
                row[f"{label}_lo"], row[f"{label}_hi"] = (float(v) for v in np.percentile(x, [2.5, 97.5]))
            if comparator is not None:
                for label, x in (("delta_cost", c - self.costs[ok, ci]), ("delta_qalys", q - self.qalys[ok, ci])):
                    row[f"{label}_mean"] = float(x.mean())
                    row[f"{label}_lo"], row[f"{label}_hi"] = (float(v) for v in np.percentile(x, [2.5, 97.5]))
            rows.append(row)
        return rows


def draw_rng(master_seed: int, draw: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(draw,)))


def sample_inputs(inputs: ModelInputs, specs: Sequence[DistributionSpec],
                  rng: np.random.Generator) -> ModelInputs:
    out = inputs
    for spec in specs:
        out = with_path(out, spec.path, spec.sample(rng))
    return out


def _evaluate_draws(args):
    inputs, specs, names, frequency, age_group, horizon, perspective, seed, draws = args
    costs = np.full((len(draws), len(names)), np.nan)
    qalys = np.full_like(costs, np.nan)
    errors = {}
    for k, d in enumerate(draws):
        try:
            world = sample_inputs(inputs, specs, draw_rng(seed, d))
            res = evaluate_cell(world, names, frequency, age_group, horizon, perspective)
        except ValueError as exc:
            errors[d] = str(exc)
            continue
        costs[k] = [res[n].total_cost for n in names]
        qalys[k] = [res[n].qalys for n in names]
    return costs, qalys, errors


def run_psa(inputs: ModelInputs, specs: Sequence[DistributionSpec], n_draws: int,
            master_seed: int, frequency: int = 1, age_group: int = 20,
            names: Optional[Sequence[str]] = None, horizon: Optional[int] = None,
            perspective: str = "societal", workers: int = 1, chunk: int = 250) -> PsaResult:
    """Monte Carlo over ``specs`` for every strategy in one screening cell.

    A draw whose sampled world violates a model constraint is kept as a NaN
    row with its reason in ``diagnostics``.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    names = list(names or inputs.strategies)
    specs = list(specs)
    for s in specs:
        get_path(inputs, s.path)  # fail fast on unknown paths
    blocks = [list(range(i, min(i + chunk, n_draws))) for i in range(0, n_draws, chunk)]
    jobs = [(inputs, specs, names, frequency, age_group, horizon, perspective, master_seed, b)
            for b in blocks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_evaluate_draws, jobs))
    else:
        parts = [_evaluate_draws(j) for j in jobs]
    diagnostics = {}
    for _, _, err in parts:
        diagnostics.update(err)
    return PsaResult(
        strategies=names,
        costs=np.vstack([p[0] for p in parts]),
        qalys=np.vstack([p[1] for p in parts]),
        master_seed=master_seed,
        frequency=frequency,
        age_group=age_group,
        diagnostics=dict(sorted(diagnostics.items())),
    )


def ceac(psa: PsaResult, wtp_grid: Sequence[float]) -> np.ndarray:
    """Probability each strategy has the highest NMB, per WTP; rows sum to 1.

    Ties split the draw equally between the tied strategies. Failed draws
    are left out.
    """
    grid = np.asarray(wtp_grid, dtype=float)
    if grid.size and np.any(np.diff(grid) < 0):
        raise ValueError("wtp grid must be ascending")
    ok = psa.valid()
    if not ok.any():
        raise ValueError("PSA has no valid draws")
    c, q = psa.costs[ok], psa.qalys[ok]
    out = np.empty((grid.size, c.shape[1]))
    for i, w in enumerate(grid):
        value = w * q - c
        best = value == value.max(axis=1, keepdims=True)
        out[i] = (best / best.sum(axis=1, keepdims=True)).mean(axis=0)
    return out


# --- switch points ----------------------------------------------------------

@dataclass(frozen=True)
class SwitchPoint:
    value: float
    before: str
    after: str


def find_switch_points(winner: Callable[[float], str], lo: float, hi: float,
                       n_grid: int = 21, tol: float = 1e-4) -> List[SwitchPoint]:
    """Locate every change of ``winner`` on [lo, hi]: coarse grid, then bisection."""
    if hi < lo:
        raise ValueError("range must satisfy lo <= hi")
    grid = np.linspace(lo, hi, max(n_grid, 2))
    labels = [winner(x) for x in grid]
    out = []
    for a, b, la, lb in zip(grid, grid[1:], labels, labels[1:]):
        if la == lb:
            continue
        left, right = float(a), float(b)
        while right - left > tol:
            mid = 0.5 * (left + right)
            if winner(mid) == la:
                left = mid
            else:
                right = mid
        out.append(SwitchPoint(0.5 * (left + right), la, lb))
    return out


def wtp_switch_points(names: Sequence[str], costs: Sequence[float], qalys: Sequence[float],
                      lo: float, hi: float, n_grid: int = 21, tol: float = 1e-4) -> List[SwitchPoint]:
    """WTP values where the NMB-optimal option changes, found numerically."""
    c = np.asarray(costs, dtype=float)
    q = np.asarray(qalys, dtype=float)
    return find_switch_points(lambda w: names[int(np.argmax(w * q - c))], lo, hi, n_grid, tol)


def threshold_scan(inputs: ModelInputs, path: str, lo: float, hi: float,
                   names: Optional[Sequence[str]] = None, wtp: Optional[float] = None,
                   frequency: int = 1, age_group: int = 20, horizon: Optional[int] = None,
                   perspective: str = "societal", n_grid: int = 21,
                   tol: float = 1e-4) -> List[SwitchPoint]:
    """Values of one parameter at which the NMB-optimal strategy changes."""
    names = list(names or inputs.strategies)
    wtp = inputs.wtp.high if wtp is None else wtp

    def winner(x):
        res = evaluate_cell(with_path(inputs, path, x), names, frequency, age_group,
                            horizon, perspective)
        return max(names, key=lambda n: (wtp * res[n].qalys - res[n].total_cost, -names.index(n)))

    return find_switch_points(winner, lo, hi, n_grid, tol)


# --- tornado ----------------------------------------------------------------

@dataclass(frozen=True)
class TornadoBar:
    path: str
    low: float
    high: float
    value_low: object  # float or Tag
    value_high: object
    base: object
    error: Optional[str] = None

    @property
    def width(self) -> float:
        if isinstance(self.value_low, (int, float)) and isinstance(self.value_high, (int, float)) \
                and not isinstance(self.value_low, Tag) and not isinstance(self.value_high, Tag):
            return abs(float(self.value_high) - float(self.value_low))
        return float("nan")


def _comparison(inputs, comparator, candidate, frequency, age_group, horizon, perspective, metric, wtp):
    res = evaluate_cell(inputs, [comparator, candidate], frequency, age_group, horizon, perspective)
    dc = res[candidate].total_cost - res[comparator].total_cost
    dq = res[candidate].qalys - res[comparator].qalys
    if metric == "icer":
        return icer(dc, dq)
    if metric == "nmb":
        return nmb(dc, dq, wtp)
    raise ValueError(f"unknown tornado metric {metric!r}")


def tornado(inputs: ModelInputs, comparator: str, candidate: str,
            ranges: Mapping[str, Tuple[float, float]], frequency: int = 1, age_group: int = 20,
            horizon: Optional[int] = None, perspective: str = "societal",
            metric: str = "icer", wtp: Optional[float] = None) -> List[TornadoBar]:
    """One-way sensitivity of the candidate-vs-comparator ICER (or NMB).

    Bars come back widest first; bars whose metric is a dominance tag or
    whose range broke a constraint sort last but are never dropped.
    """
    wtp = inputs.wtp.high if wtp is None else wtp
    args = (comparator, candidate, frequency, age_group, horizon, perspective, metric, wtp)
    base = _comparison(inputs, *args)
    bars = []
    for path, (low, high) in ranges.items():
        try:
            v_lo = _comparison(with_path(inputs, path, low), *args)
            v_hi = _comparison(with_path(inputs, path, high), *args)
        except (ValueError, KeyError) as exc:
            bars.append(TornadoBar(path, low, high, Tag.UNDEFINED, Tag.UNDEFINED, base, str(exc)))
            continue
        bars.append(TornadoBar(path, low, high, v_lo, v_hi, base))
    return sorted(bars, key=lambda b: (math.isnan(b.width), -(0.0 if math.isnan(b.width) else b.width)))


def relative_ranges(inputs: ModelInputs, paths: Iterable[str], spread: float = 0.2) -> Dict[str, Tuple[float, float]]:
    """Symmetric ``base * (1 -/+ spread)`` ranges, clipped to [0, 1] for probabilities."""
    out = {}
    for p in paths:
        base = float(get_path(inputs, p))
        lo, hi = base * (1 - spread), base * (1 + spread)
        if parameter_kind(p) == "probability":
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        out[p] = (lo, hi)
    return out


# --- horizon sweep ----------------------------------------------------------

@dataclass
class HorizonSweep:
    horizons: List[int]
    records: Dict[int, List[CeaRecord]]  # horizon -> one record per non-comparator strategy

    def record(self, horizon: int, name: str) -> CeaRecord:
        for r in self.records[horizon]:
            if r.scenario_id == name:
                return r
        raise KeyError(name)

    def crossing(self, name: str, classes: Tuple[CeClass, ...]) -> Optional[int]:
        """First horizon from which ``name`` stays within ``classes`` for the rest of the sweep."""
        first = None
        for h in self.horizons:
            if self.record(h, name).ce_class in classes:
                first = h if first is None else first
            else:
                first = None
        return first


def horizon_sweep(inputs: ModelInputs, horizons: Iterable[int] = range(5, 31),
                  frequency: int = 1, age_group: int = 20,
                  perspective: str = "societal") -> HorizonSweep:
    names = list(inputs.strategies)
    perfs = inputs.performances()
    out = {}
    hs = list(horizons)
    for h in hs:
        res = evaluate_cell(inputs, names, frequency, age_group, h, perspective, perfs=perfs)
        base = res[inputs.comparator]
        out[h] = [
            cea_record(n, inputs.comparator,
                       res[n].total_cost - base.total_cost,
                       res[n].qalys - base.qalys,
                       res[n].blindness_free_years - base.blindness_free_years,
                       inputs.wtp)
            for n in names if n != inputs.comparator
        ]
    return HorizonSweep(hs, out)
