"""
Cohort Markov model of diabetic-retinopathy progression with periodic screening.

The cohort is tracked as fractional occupancy over one-year age bands and six
states. Each yearly cycle runs, in order: screen, refer and treat, progress,
die. Rewards tied to a state (utilities, follow-up costs) accrue on the
occupancy at the start of the cycle; one-off costs accrue on the events that
happen within it. No half-cycle correction unless ``half_cycle`` is set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .strategy import DiagnosticPerformance


class HealthState(IntEnum):
    NonVTDR = 0
    VTDR_undetected = 1
    VTDR_detected_untreated = 2
    TreatedDR = 3
    Blind = 4
    Dead = 5


N_STATES = len(HealthState)
COST_CATEGORIES = ("screening", "referral", "treatment", "blindness")
COUNTERS = ("blindness_cases", "detected_vtdr", "treated_vtdr")

FREQUENCIES = (0, 1, 2, 3, 4, 5)  # 0 is a one-off screen at scenario start
AGE_GROUPS = (20, 30, 40, 50, 60)
AGE_GROUP_UPPER = 79
PERSPECTIVES = ("societal", "provider")

# Utility keys; both VTDR sub-states share the VTDR weight.
UTILITY_KEYS = ("NonVTDR", "VTDR", "TreatedDR", "Blind")


class ParameterError(ValueError):
    """Model parameters violate a probability or ordering constraint."""


def frequency_label(freq: int) -> str:
    return "one-off" if freq == 0 else f"every {freq}y"


def parse_frequency(text: Union[str, int]) -> int:
    if isinstance(text, int):
        value = text
    else:
        t = str(text).strip().lower()
        if t in ("one-off", "oneoff", "once", "0"):
            return 0
        if t in ("annual", "annually", "yearly"):
            return 1
        value = int(t.rstrip("y"))
    if value not in FREQUENCIES:
        raise ValueError(f"frequency must be one of {FREQUENCIES} (0 = one-off), got {text!r}")
    return value


@dataclass(frozen=True)
class LifeTable:
    """Annual probability of death by integer age; ages past the table reuse its last row."""

    ages: Tuple[int, ...]
    q: Tuple[float, ...]

    def __post_init__(self):
        if len(self.ages) != len(self.q) or not self.ages:
            raise ParameterError("life table needs matching, non-empty age and q columns")
        if any(b != a + 1 for a, b in zip(self.ages, self.ages[1:])):
            raise ParameterError("life table ages must be consecutive integers")
        for age, q in zip(self.ages, self.q):
            if not 0.0 <= q <= 1.0:
                raise ParameterError(f"life table q({age}) = {q} outside [0, 1]")

    @classmethod
    def from_csv(cls, path) -> "LifeTable":
        ages, qs = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#"):
                    continue
                try:
                    age, q = int(row[0]), float(row[1])
                except ValueError:
                    continue  # header
                ages.append(age)
                qs.append(q)
        return cls(tuple(ages), tuple(qs))

    @classmethod
    def constant(cls, q: float, start: int = 0, stop: int = 110) -> "LifeTable":
        return cls(tuple(range(start, stop)), (q,) * (stop - start))

    def lookup(self, ages: np.ndarray) -> np.ndarray:
        idx = np.clip(np.asarray(ages) - self.ages[0], 0, len(self.ages) - 1)
        return np.asarray(self.q)[idx]


AgeSchedule = Union[float, Mapping[int, float]]


def schedule_at(schedule: AgeSchedule, ages: np.ndarray) -> np.ndarray:
    """Evaluate a scalar or step-by-age schedule ``{age_from: value}``."""
    ages = np.asarray(ages)
    if isinstance(schedule, Mapping):
        keys = np.array(sorted(schedule), dtype=float)
        vals = np.array([schedule[k] for k in sorted(schedule)], dtype=float)
        idx = np.searchsorted(keys, ages, side="right") - 1
        return vals[np.clip(idx, 0, len(vals) - 1)]
    return np.full(ages.shape, float(schedule))


@dataclass(frozen=True)
class Transitions:
    onset: AgeSchedule  # NonVTDR -> VTDR
    blind_untreated: float  # VTDR -> Blind
    blind_treated: float  # TreatedDR -> Blind
    regress: float = 0.0  # VTDR -> NonVTDR
    mortality_multipliers: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Costs:
    referral: float
    treatment_initial: float
    treatment_annual: float
    blindness_initial: float
    blindness_annual: float
    screening_visit: float = 0.0  # per person screened, on top of grader reads


@dataclass(frozen=True)
class MarkovParameters:
    transitions: Transitions
    utilities: Mapping[str, float]
    costs: Costs
    life_table: LifeTable
    treatment_uptake: float = 0.70
    discount_cost: float = 0.03
    discount_effect: float = 0.03
    initial_ages: Mapping[int, float] = field(
        default_factory=lambda: {a: 1.0 for a in range(18, 80)})
    initial_state_mix: Mapping[str, float] = field(
        default_factory=lambda: {"NonVTDR": 1.0})
    max_age: int = 80
    half_cycle: bool = False
    reference_prevalence: float = 0.0746

    def utility_vector(self) -> np.ndarray:
        u = self.utilities
        return np.array([u["NonVTDR"], u["VTDR"], u["VTDR"], u["TreatedDR"], u["Blind"], 0.0])

    def validate(self):
        """Raise ParameterError on the first violated invariant."""
        t = self.transitions
        probs = {
            "transitions.blind_untreated": t.blind_untreated,
            "transitions.blind_treated": t.blind_treated,
            "transitions.regress": t.regress,
            "treatment_uptake": self.treatment_uptake,
        }
        if isinstance(t.onset, Mapping):
            probs.update({f"transitions.onset.{k}": v for k, v in t.onset.items()})
        else:
            probs["transitions.onset"] = t.onset
        for path, v in probs.items():
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{path} = {v} outside [0, 1]")
        if t.blind_untreated + t.regress > 1.0:
            raise ParameterError(
                "VTDR row sums above 1: blind_untreated + regress = "
                f"{t.blind_untreated + t.regress}")
        for k, m in t.mortality_multipliers.items():
            if k not in HealthState.__members__ and k != "VTDR":
                raise ParameterError(f"transitions.mortality_multipliers.{k}: unknown state")
            if m < 0:
                raise ParameterError(f"transitions.mortality_multipliers.{k} must be >= 0")
        for k in UTILITY_KEYS:
            if k not in self.utilities:
                raise ParameterError(f"utilities.{k} is required")
            if not 0.0 <= self.utilities[k] <= 1.0:
                raise ParameterError(f"utilities.{k} = {self.utilities[k]} outside [0, 1]")
        u = self.utilities
        if not u["Blind"] <= u["TreatedDR"] <= u["NonVTDR"]:
            raise ParameterError("utilities must satisfy Blind <= TreatedDR <= NonVTDR")
        for name, v in vars(self.costs).items():
            if v < 0:
                raise ParameterError(f"costs.{name} must be >= 0, got {v}")
        for name in ("discount_cost", "discount_effect"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if not self.initial_ages or any(w < 0 for w in self.initial_ages.values()) \
                or sum(self.initial_ages.values()) <= 0:
            raise ParameterError("initial_ages needs non-negative weights with a positive sum")
        mix = self.initial_state_mix
        for k, v in mix.items():
            if k not in HealthState.__members__:
                raise ParameterError(f"initial_state_mix.{k}: unknown state")
            if v < 0:
                raise ParameterError(f"initial_state_mix.{k} must be >= 0")
        if abs(sum(mix.values()) - 1.0) > 1e-9:
            raise ParameterError(f"initial_state_mix sums to {sum(mix.values())}, expected 1")
        if not 0.0 < self.reference_prevalence < 1.0:
            raise ParameterError("reference_prevalence must lie in (0, 1)")


@dataclass(frozen=True)
class ScenarioSpec:
    strategy: str
    frequency: int = 1
    age_group: int = 20
    cohort_size: float = 100_000
    horizon: Optional[int] = None  # None: follow each age band to max_age
    perspective: str = "societal"

    def __post_init__(self):
        if self.frequency not in FREQUENCIES:
            raise ValueError(f"frequency must be one of {FREQUENCIES}, got {self.frequency}")
        if self.age_group not in AGE_GROUPS:
            raise ValueError(f"age_group must be one of {AGE_GROUPS}, got {self.age_group}")
        if self.cohort_size <= 0:
            raise ValueError("cohort_size must be positive")
        if self.perspective not in PERSPECTIVES:
            raise ValueError(f"perspective must be one of {PERSPECTIVES}")
        if self.horizon is not None and self.horizon < 0:
            raise ValueError("horizon must be >= 0")

    @property
    def id(self) -> str:
        return f"{self.strategy}|{frequency_label(self.frequency)}|{self.age_group}-{AGE_GROUP_UPPER}"


@dataclass
class CohortTrace:
    """Per-cycle record of one cohort run.

    ``occupancy`` has one row more than the cost arrays: row ``t`` is the
    state mix at the start of cycle ``t``.
    """

    occupancy: np.ndarray  # (T+1, 6) persons
    costs: np.ndarray  # (T, 4) undiscounted, COST_CATEGORIES order
    costs_discounted: np.ndarray  # (T, 4)
    qalys: np.ndarray  # (T,) discounted
    blindness_free_years: np.ndarray  # (T,) undiscounted person-years
    blindness_free_years_discounted: np.ndarray  # (T,)
    events: np.ndarray  # (T, 3) COUNTERS order
    cohort_size: float

    @property
    def n_cycles(self) -> int:
        return len(self.qalys)

    def cumulative(self, name: str) -> np.ndarray:
        return np.cumsum(getattr(self, name), axis=0)


def discount(value, year, rate):
    """Present value of ``value`` received ``year`` years after cycle 0."""
    if rate < 0:
        raise ValueError("discount rate must be >= 0")
    return value * (1.0 + rate) ** (-np.asarray(year))


@dataclass(frozen=True)
class ScenarioResult:
    total_cost: float
    qalys: float
    blindness_free_years: float
    costs: Dict[str, float]
    blindness_cases: float
    detected_vtdr: float
    treated_vtdr: float
    perspective: str = "societal"


def aggregate_scenario(trace: CohortTrace, perspective: str = "societal") -> ScenarioResult:
    """Collapse a trace to discounted totals; the provider view drops blindness care."""
    if perspective not in PERSPECTIVES:
        raise ValueError(f"perspective must be one of {PERSPECTIVES}")
    by_cat = {c: float(trace.costs_discounted[:, i].sum()) for i, c in enumerate(COST_CATEGORIES)}
    if perspective == "provider":
        by_cat["blindness"] = 0.0
    ev = trace.events.sum(axis=0) if trace.n_cycles else np.zeros(len(COUNTERS))
    return ScenarioResult(
        total_cost=float(sum(by_cat.values())),
        qalys=float(trace.qalys.sum()),
        blindness_free_years=float(trace.blindness_free_years_discounted.sum()),
        costs=by_cat,
        blindness_cases=float(ev[0]),
        detected_vtdr=float(ev[1]),
        treated_vtdr=float(ev[2]),
        perspective=perspective,
    )


# --- engine -----------------------------------------------------------------

def _initial_occupancy(params: MarkovParameters, cohort_size: float):
    ages = np.array(sorted(params.initial_ages), dtype=int)
    w = np.array([params.initial_ages[a] for a in ages], dtype=float)
    w = w / w.sum() * cohort_size
    mix = np.zeros(N_STATES)
    for name, frac in params.initial_state_mix.items():
        mix[HealthState[name]] = frac
    return ages, w[:, None] * mix[None, :]


def _mortality_multipliers(params: MarkovParameters) -> np.ndarray:
    mm = params.transitions.mortality_multipliers
    out = np.ones(N_STATES)
    if "VTDR" in mm:
        out[HealthState.VTDR_undetected] = out[HealthState.VTDR_detected_untreated] = mm["VTDR"]
    for name, m in mm.items():
        if name in HealthState.__members__:
            out[HealthState[name]] = m
    out[HealthState.Dead] = 0.0
    return out


def simulate(perfs: Sequence[DiagnosticPerformance], frequency: int, age_group: int,
             params: MarkovParameters, cohort_size: float = 100_000,
             horizon: Optional[int] = None, validate: bool = True) -> List[CohortTrace]:
    """Run one cohort per screening performance, sharing everything else.

    All strategies of a (frequency, age group) cell step together along a
    leading batch axis. An empty ``perfs`` entry of ``None`` means no screening.
    """
    if validate:
        params.validate()
    if frequency not in FREQUENCIES:
        raise ValueError(f"frequency must be one of {FREQUENCIES}")
    if horizon is not None and horizon < 0:
        raise ValueError("horizon must be >= 0")

    S = HealthState
    ages0, occ0 = _initial_occupancy(params, cohort_size)
    n_batch = len(perfs)
    T = int(horizon) if horizon is not None else max(0, params.max_age - int(ages0.min()))

    screens = np.array([p is not None for p in perfs])
    se = np.array([p.sensitivity if p is not None else 0.0 for p in perfs])[:, None]
    sp = np.array([p.specificity if p is not None else 1.0 for p in perfs])[:, None]
    c_dis = np.array([p.cost_if_diseased if p is not None else 0.0 for p in perfs])[:, None]
    c_hea = np.array([p.cost_if_healthy if p is not None else 0.0 for p in perfs])[:, None]

    tr, co = params.transitions, params.costs
    util = params.utility_vector()
    mort_mult = _mortality_multipliers(params)
    uptake = params.treatment_uptake
    bu, bt, rg = tr.blind_untreated, tr.blind_treated, tr.regress

    occ = np.broadcast_to(occ0, (n_batch,) + occ0.shape).copy()  # (B, A, 6)
    occupancy = np.zeros((n_batch, T + 1, N_STATES))
    costs = np.zeros((n_batch, T, len(COST_CATEGORIES)))
    qalys = np.zeros((n_batch, T))
    bfy = np.zeros((n_batch, T))
    events = np.zeros((n_batch, T, len(COUNTERS)))
    occupancy[:, 0] = occ.sum(axis=1)
    alive_not_blind = np.array([1, 1, 1, 1, 0, 0], dtype=float)

    # age-dependent inputs for every cycle at once
    age_t = ages0[None, :] + np.arange(T)[:, None]  # (T, A)
    active_t = age_t < params.max_age  # bands past max_age are frozen
    onset_t = schedule_at(tr.onset, age_t.ravel()).reshape(age_t.shape)
    p_die_t = params.life_table.lookup(age_t.ravel()).reshape(age_t.shape)[..., None] * mort_mult
    over = (p_die_t > 1.0) & active_t[..., None]
    if over.any():
        t, band, st = np.argwhere(over)[0]
        raise ParameterError(
            f"death probability {p_die_t[t, band, st]:.4g} > 1 for state "
            f"{HealthState(st).name} at age {age_t[t, band]}")
    in_group_t = active_t & (age_t >= age_group) & (age_t <= AGE_GROUP_UPPER)

    for t in range(T):
        active = active_t[t]
        if not active.any():
            occupancy[:, t + 1:] = occupancy[:, t:t + 1]
            break
        act = active[None, :, None]
        start = occ * act

        # screening, referral, treatment
        screen_year = (t == 0) if frequency == 0 else (t % frequency == 0)
        cost_t = np.zeros((n_batch, len(COST_CATEGORIES)))
        if screen_year and screens.any():
            elig = in_group_t[t][None, :] & screens[:, None]
            und = occ[..., S.VTDR_undetected] * elig
            unt = occ[..., S.VTDR_detected_untreated] * elig
            non = occ[..., S.NonVTDR] * elig
            tp_new, tp_rep, fp = und * se, unt * se, non * (1.0 - sp)
            treated = (tp_new + tp_rep) * uptake
            cost_t[:, 0] = ((und + unt) * (c_dis + co.screening_visit)
                            + non * (c_hea + co.screening_visit)).sum(axis=1)
            cost_t[:, 1] = ((tp_new + tp_rep + fp) * co.referral).sum(axis=1)
            cost_t[:, 2] = (treated * co.treatment_initial).sum(axis=1)
            occ[..., S.VTDR_undetected] -= tp_new
            occ[..., S.VTDR_detected_untreated] += tp_new * (1.0 - uptake) - tp_rep * uptake
            occ[..., S.TreatedDR] += treated
            events[:, t, 1] = (tp_new + tp_rep).sum(axis=1)
            events[:, t, 2] = treated.sum(axis=1)

        # natural history on active bands
        onset = onset_t[t][None, :]
        non, und, unt = occ[..., S.NonVTDR], occ[..., S.VTDR_undetected], occ[..., S.VTDR_detected_untreated]
        trt, bl = occ[..., S.TreatedDR], occ[..., S.Blind]
        new_blind = (und + unt) * bu + trt * bt
        nxt = np.empty_like(occ)
        nxt[..., S.NonVTDR] = non * (1.0 - onset) + (und + unt) * rg
        nxt[..., S.VTDR_undetected] = und * (1.0 - bu - rg) + non * onset
        nxt[..., S.VTDR_detected_untreated] = unt * (1.0 - bu - rg)
        nxt[..., S.TreatedDR] = trt * (1.0 - bt)
        nxt[..., S.Blind] = bl + new_blind
        nxt[..., S.Dead] = occ[..., S.Dead]

        deaths = nxt * p_die_t[t][None, :, :]
        nxt -= deaths
        nxt[..., S.Dead] += deaths.sum(axis=-1)
        occ = np.where(act, nxt, occ)
        events[:, t, 0] = (new_blind * active[None, :]).sum(axis=1)

        # state rewards
        reward_occ = start
        if params.half_cycle:
            reward_occ = 0.5 * (start + occ * act)
        by_state = reward_occ.sum(axis=1)  # (B, 6)
        qalys[:, t] = by_state @ util
        bfy[:, t] = by_state @ alive_not_blind
        cost_t[:, 2] += by_state[:, S.TreatedDR] * co.treatment_annual
        cost_t[:, 3] = (by_state[:, S.Blind] * co.blindness_annual
                        + events[:, t, 0] * co.blindness_initial)
        costs[:, t] = cost_t
        occupancy[:, t + 1] = occ.sum(axis=1)

    years = np.arange(T)
    dfc = (1.0 + params.discount_cost) ** -years.astype(float)
    dfe = (1.0 + params.discount_effect) ** -years.astype(float)
    return [
        CohortTrace(
            occupancy=occupancy[b],
            costs=costs[b],
            costs_discounted=costs[b] * dfc[:, None],
            qalys=qalys[b] * dfe,
            blindness_free_years=bfy[b],
            blindness_free_years_discounted=bfy[b] * dfe,
            events=events[b],
            cohort_size=cohort_size,
        )
        for b in range(n_batch)
    ]


def run_cohort(scenario: ScenarioSpec, params: MarkovParameters,
               perf: Optional[DiagnosticPerformance]) -> CohortTrace:
    """Simulate a single scenario; ``perf=None`` runs natural history only."""
    return simulate([perf], scenario.frequency, scenario.age_group, params,
                    cohort_size=scenario.cohort_size, horizon=scenario.horizon)[0]
