"""Incremental cost-effectiveness: ICERs, net monetary benefit, dominance and frontiers."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple, Union


class Tag(str, Enum):
    DOMINATED = "Dominated"
    DOMINANT = "Dominant"
    UNDEFINED = "Undefined"

    def __str__(self):
        return self.value


class CeClass(str, Enum):
    VERY_COST_EFFECTIVE = "very cost-effective"
    COST_EFFECTIVE = "cost-effective"
    NOT_COST_EFFECTIVE = "not cost-effective"
    DOMINATED = "dominated"
    DOMINANT = "dominant"
    UNDEFINED = "undefined"

    def __str__(self):
        return self.value


Ratio = Union[float, Tag]


@dataclass(frozen=True)
class WtpPolicy:
    gdp_per_capita: float = 12_684.0

    def __post_init__(self):
        if self.gdp_per_capita <= 0:
            raise ValueError("gdp_per_capita must be positive")

    @property
    def low(self) -> float:
        return self.gdp_per_capita

    @property
    def high(self) -> float:
        return 3.0 * self.gdp_per_capita


def icer(delta_cost: float, delta_effect: float) -> Ratio:
    """Incremental cost per unit of effect gained, or a dominance tag.

    Quadrants: zero effect change gives ``Undefined``; more cost for no more
    effect is ``Dominated``; less cost for no less effect is ``Dominant``.
    Otherwise the plain ratio is returned. In the south-west quadrant that
    ratio is the saving per unit of effect forgone.

    >>> icer(7.57e6, -417)
    <Tag.DOMINATED: 'Dominated'>
    """
    if delta_effect == 0:
        return Tag.UNDEFINED
    if delta_cost >= 0 and delta_effect < 0:
        return Tag.DOMINATED
    if delta_cost <= 0 and delta_effect > 0:
        return Tag.DOMINANT
    return delta_cost / delta_effect


def cost_per_blindness_year_averted(delta_cost: float, delta_blindness_free_years: float) -> Ratio:
    return icer(delta_cost, delta_blindness_free_years)


def nmb(delta_cost: float, delta_qalys: float, wtp: float) -> float:
    if wtp < 0:
        raise ValueError("wtp must be >= 0")
    return wtp * delta_qalys - delta_cost


def nmb_crossing(dc1: float, dq1: float, dc2: float, dq2: float) -> Optional[float]:
    """WTP at which two options have equal net monetary benefit."""
    if dq1 == dq2:
        return None
    return (dc1 - dc2) / (dq1 - dq2)


def classify(value: Ratio, policy: WtpPolicy = WtpPolicy(), *, cost_saving: bool = False) -> CeClass:
    """Bucket an ICER against the 1x and 3x GDP thresholds.

    ``cost_saving`` marks a south-west ratio (less cost, less effect). There
    the ratio is the saving per QALY forgone and it must exceed the
    threshold: above 3x GDP is very cost-effective, above 1x cost-effective.
    """
    if isinstance(value, Tag):
        return {Tag.DOMINATED: CeClass.DOMINATED,
                Tag.DOMINANT: CeClass.DOMINANT,
                Tag.UNDEFINED: CeClass.UNDEFINED}[value]
    if cost_saving:
        if value > policy.high:
            return CeClass.VERY_COST_EFFECTIVE
        if value > policy.low:
            return CeClass.COST_EFFECTIVE
        return CeClass.NOT_COST_EFFECTIVE
    if value < policy.low:
        return CeClass.VERY_COST_EFFECTIVE
    if value <= policy.high:
        return CeClass.COST_EFFECTIVE
    return CeClass.NOT_COST_EFFECTIVE


def classify_deltas(delta_cost: float, delta_qalys: float, policy: WtpPolicy = WtpPolicy()) -> CeClass:
    value = icer(delta_cost, delta_qalys)
    if value is Tag.UNDEFINED and delta_cost != 0:
        # equal effect: cheaper dominates, dearer is dominated
        value = Tag.DOMINANT if delta_cost < 0 else Tag.DOMINATED
    return classify(value, policy, cost_saving=not isinstance(value, Tag) and delta_cost < 0)


@dataclass(frozen=True)
class CeaRecord:
    scenario_id: str
    comparator_id: str
    delta_cost: float
    delta_qalys: float
    delta_blindness_free_years: float
    icer: Ratio
    cost_per_blindness_year_averted: Ratio
    nmb_low: float
    nmb_high: float
    ce_class: CeClass


def cea_record(scenario_id: str, comparator_id: str, delta_cost: float, delta_qalys: float,
               delta_bfy: float, policy: WtpPolicy = WtpPolicy()) -> CeaRecord:
    return CeaRecord(
        scenario_id=scenario_id,
        comparator_id=comparator_id,
        delta_cost=delta_cost,
        delta_qalys=delta_qalys,
        delta_blindness_free_years=delta_bfy,
        icer=icer(delta_cost, delta_qalys),
        cost_per_blindness_year_averted=cost_per_blindness_year_averted(delta_cost, delta_bfy),
        nmb_low=nmb(delta_cost, delta_qalys, policy.low),
        nmb_high=nmb(delta_cost, delta_qalys, policy.high),
        ce_class=classify_deltas(delta_cost, delta_qalys, policy),
    )


# --- frontier ---------------------------------------------------------------

ON_FRONTIER = "frontier"
STRICTLY_DOMINATED = "strictly dominated"
EXTENDEDLY_DOMINATED = "extendedly dominated"
DUPLICATE = "duplicate"


@dataclass(frozen=True)
class FrontierPoint:
    id: str
    cost: float
    qalys: float
    status: str
    icer_vs_previous: Optional[float] = None  # only for frontier members after the first


def frontier(points: Iterable[Tuple[str, float, float]], extended: bool = True) -> List[FrontierPoint]:
    """Label each (id, cost, qalys) point and return them ordered by cost.

    Frontier members come first in the returned order of cost, each carrying
    the ICER against the previous member. Identical points are kept once,
    the lowest id winning.
    """
    pts = sorted(points, key=lambda p: (p[1], -p[2], str(p[0])))
    if len(pts) < 2:
        raise ValueError("frontier needs at least two scenarios")
    status = {}
    seen = {}
    for pid, c, q in pts:
        key = (c, q)
        if key in seen:
            status[pid] = DUPLICATE
        else:
            seen[key] = pid

    # strict dominance: sweep by cost, keep points that beat every cheaper effect
    candidates = []
    best_q = -float("inf")
    for pid, c, q in pts:
        if pid in status:
            continue
        if q > best_q:
            candidates.append((pid, c, q))
            best_q = q
        else:
            status[pid] = STRICTLY_DOMINATED

    if extended:
        changed = True
        while changed and len(candidates) > 2:
            changed = False
            for i in range(1, len(candidates) - 1):
                r_in = _ratio(candidates[i - 1], candidates[i])
                r_out = _ratio(candidates[i], candidates[i + 1])
                if r_in >= r_out:
                    status[candidates[i][0]] = EXTENDEDLY_DOMINATED
                    del candidates[i]
                    changed = True
                    break

    out = []
    prev = None
    for pid, c, q in candidates:
        out.append(FrontierPoint(pid, c, q, ON_FRONTIER, None if prev is None else _ratio(prev, (pid, c, q))))
        prev = (pid, c, q)
    for pid, c, q in pts:
        if pid in status:
            out.append(FrontierPoint(pid, c, q, status[pid]))
    return out


def _ratio(a, b) -> float:
    return (b[1] - a[1]) / (b[2] - a[2])
