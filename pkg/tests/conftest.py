import numpy as np
import pytest
from hypothesis import strategies as st

from drscreen import EXAMPLE_CONFIG, load_config
from drscreen.markov import Costs, LifeTable, MarkovParameters, Transitions
from drscreen.strategy import (Consensus, FilterParams, Filtered, GraderProfile, Leaf,
                               Sequential, make_registry)

NINE_STRATEGIES = {
    "manual": "M·M+M2",
    "ai": "AI",
    "human_review": "AI+M",
    "expert_review": "AI+M2",
    "sensitive_human_review": "AI+M[Se]",
    "sensitive_expert_review": "AI+M2[Se]",
    "copilot": "AI·M+M2",
    "sequential_review": "AI+M+M2",
    "ai_triage": "AI+M·M+M2",
}


@pytest.fixture(scope="session")
def example():
    return load_config(EXAMPLE_CONFIG)


@pytest.fixture
def registry():
    return make_registry([
        GraderProfile("AI", 0.96, 0.80, 1.5, ai=True, filter=FilterParams(0.01, 0.45)),
        GraderProfile("M", 0.85, 0.93, 3.0, ungradable_rate=0.05),
        GraderProfile("M2", 0.95, 0.99, 5.0),
    ])


def frozen_params(**kw) -> MarkovParameters:
    """Nothing moves: no onset, no progression, no mortality, no discounting."""
    base = dict(
        transitions=Transitions(onset=0.0, blind_untreated=0.0, blind_treated=0.0),
        utilities={"NonVTDR": 1.0, "VTDR": 1.0, "TreatedDR": 1.0, "Blind": 0.5},
        costs=Costs(referral=0.0, treatment_initial=0.0, treatment_annual=0.0,
                    blindness_initial=0.0, blindness_annual=0.0),
        life_table=LifeTable.constant(0.0),
        discount_cost=0.0,
        discount_effect=0.0,
        initial_ages={30: 1.0},
        initial_state_mix={"NonVTDR": 1.0},
    )
    base.update(kw)
    return MarkovParameters(**base)


def busy_params(**kw) -> MarkovParameters:
    """Every channel active, for conservation and monotonicity checks."""
    base = dict(
        transitions=Transitions(onset={18: 0.02, 50: 0.04}, blind_untreated=0.12, blind_treated=0.02,
                                regress=0.03, mortality_multipliers={"VTDR": 1.3, "Blind": 1.6}),
        utilities={"NonVTDR": 0.9, "VTDR": 0.8, "TreatedDR": 0.82, "Blind": 0.55},
        costs=Costs(referral=100.0, treatment_initial=2500.0, treatment_annual=300.0,
                    blindness_initial=4000.0, blindness_annual=3000.0, screening_visit=5.0),
        life_table=LifeTable(tuple(range(0, 111)),
                             tuple(min(1.0, float(np.exp(-9.0 + 0.08 * a))) for a in range(111))),
        initial_ages={a: 1.0 for a in range(18, 80)},
        initial_state_mix={"NonVTDR": 0.9, "VTDR_undetected": 0.08, "TreatedDR": 0.01, "Blind": 0.01},
    )
    base.update(kw)
    return MarkovParameters(**base)


# --- random trees for property tests -----------------------------------------

prob = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def profiles(draw):
    """A registry of two AI graders (one filterable) and two humans."""
    out = []
    for gid, ai in (("A", True), ("B", True), ("H", False), ("K", False)):
        se, sp = draw(prob), draw(prob)
        u = draw(st.floats(0.0, 0.3))
        cost = draw(st.floats(0.0, 20.0))
        filt = None
        if gid == "A":
            filt = FilterParams(draw(st.floats(0.0, 1.0)) * (1.0 - se), draw(prob))
        out.append(GraderProfile(gid, se, sp, cost, ungradable_rate=u, ai=ai, filter=filt))
    return make_registry(out)


def _trees(max_graders):
    leaves = st.sampled_from(["A", "B", "H", "K"]).map(Leaf)
    filtered = st.just("A").map(lambda g: ("filtered", g))

    @st.composite
    def tree(draw, budget):
        if budget <= 1:
            return draw(st.one_of(leaves, filtered))
        kind = draw(st.sampled_from(["leaf", "seq", "cons"] if budget >= 3 else ["leaf", "seq"]))
        if kind == "leaf":
            return draw(st.one_of(leaves, filtered))
        if kind == "seq":
            k = draw(st.integers(1, budget - 1))
            return Sequential(draw(tree(k)), draw(tree(budget - k)))
        i = draw(st.integers(1, budget - 2))
        j = draw(st.integers(1, budget - 1 - i))
        return Consensus(draw(tree(i)), draw(tree(j)), draw(tree(budget - i - j)))

    return tree(max_graders)


def resolve(tree, registry):
    """Swap placeholder filtered nodes for real ones carrying the registry's filter."""
    if isinstance(tree, tuple):
        return Filtered(tree[1], registry[tree[1]].filter)
    if isinstance(tree, Leaf):
        return tree
    if isinstance(tree, Sequential):
        return Sequential(resolve(tree.upstream, registry), resolve(tree.reviewer, registry))
    return Consensus(resolve(tree.a, registry), resolve(tree.b, registry),
                     resolve(tree.adjudicator, registry))


random_trees = st.integers(1, 7).flatmap(_trees)
