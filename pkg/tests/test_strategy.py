import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drscreen.strategy import (Consensus, Filtered, GraderProfile, Leaf, Sequential,
                               StrategyParseError, accuracy, canonical, closed_form_performance,
                               enumerate_performance, grader_instances, implied_prevalence,
                               make_registry, parse_strategy, to_expression)

from conftest import NINE_STRATEGIES, profiles, random_trees, resolve

FIELDS = ("sensitivity", "specificity", "expected_cost_per_case", "human_reads_per_case",
          "ai_reads_per_case", "cost_if_diseased", "cost_if_healthy")


def assert_same(a, b, tol=1e-12):
    for f in FIELDS:
        assert abs(getattr(a, f) - getattr(b, f)) <= tol, f


# --- parser -------------------------------------------------------------------

def test_parse_copilot(registry):
    assert parse_strategy("AI·M+M2", registry) == Consensus(Leaf("AI"), Leaf("M"), Leaf("M2"))


def test_parse_triage_before_manual(registry):
    tree = parse_strategy("AI+M·M+M2", registry)
    assert tree == Sequential(Leaf("AI"), Consensus(Leaf("M"), Leaf("M"), Leaf("M2")))


def test_parse_single_grader(registry):
    assert parse_strategy("M", registry) == Leaf("M")


def test_parse_chain_folds_left(registry):
    tree = parse_strategy("AI+M+M2", registry)
    assert tree == Sequential(Sequential(Leaf("AI"), Leaf("M")), Leaf("M2"))


def test_filter_suffix_lifts_onto_ai(registry):
    tree = parse_strategy("AI+M2[Se]", registry)
    assert tree == Sequential(Filtered("AI", registry["AI"].filter), Leaf("M2"))
    assert parse_strategy("AI[Se]+M2", registry) == tree


def test_dot_is_consensus(registry):
    assert parse_strategy("M.M+M2", registry) == parse_strategy("M·M+M2", registry)
    assert parse_strategy(" AI · M + M2 ", registry) == parse_strategy("AI·M+M2", registry)


@pytest.mark.parametrize("expr, token", [
    ("X+M", "X"),
    ("AI·M", "AI·M"),
    ("AI++M", "AI++M"),
    ("M[Se]", "M[Se]"),
    ("M2+M[Se]", "M[Se]"),
    ("AI·M·M2+M", "AI·M·M2"),
    ("AI·M+M·M2", "M·M2"),
    ("·M+M2", "·M"),
])
def test_parse_errors_name_the_token(registry, expr, token):
    with pytest.raises(StrategyParseError) as err:
        parse_strategy(expr, registry)
    assert err.value.token == token


def test_parse_empty(registry):
    with pytest.raises(StrategyParseError):
        parse_strategy("  ", registry)


def test_filter_requires_configured_params(registry):
    reg = dict(registry)
    reg["AI"] = dataclasses.replace(reg["AI"], filter=None)
    with pytest.raises(StrategyParseError):
        parse_strategy("AI+M[Se]", reg)


@pytest.mark.parametrize("expr", list(NINE_STRATEGIES.values()))
def test_round_trip(registry, expr):
    assert to_expression(parse_strategy(expr, registry)) == canonical(expr)
    assert to_expression(parse_strategy(expr.replace("·", "."), registry)) == canonical(expr)


# --- composition ------------------------------------------------------------

def test_leaf_returns_profile():
    reg = make_registry([GraderProfile("M", 0.9, 0.95, 2.0)])
    perf = closed_form_performance(Leaf("M"), reg, 0.1)
    assert (perf.sensitivity, perf.specificity) == (0.9, 0.95)
    assert_same(perf, enumerate_performance(Leaf("M"), reg, 0.1))


def test_perfect_graders_compose_to_perfection(registry):
    reg = {k: dataclasses.replace(v, sensitivity=1.0, specificity=1.0, ungradable_rate=0.0, filter=None)
           for k, v in registry.items()}
    for expr in NINE_STRATEGIES.values():
        if "[Se]" in expr:
            continue
        perf = closed_form_performance(parse_strategy(expr, reg), reg, 0.07)
        assert (perf.sensitivity, perf.specificity) == (1.0, 1.0)


def test_consensus_sensitivity_example():
    reg = make_registry([GraderProfile("A", 0.96, 0.9, 1.0), GraderProfile("B", 0.85, 0.9, 1.0),
                         GraderProfile("C", 0.95, 0.9, 1.0)])
    tree = Consensus(Leaf("A"), Leaf("B"), Leaf("C"))
    # agree-positive, or disagree and the adjudicator says positive
    by_hand = 0.96 * 0.85 + (0.96 * 0.15 + 0.04 * 0.85) * 0.95
    oracle = enumerate_performance(tree, reg, 0.5).sensitivity
    assert oracle == pytest.approx(by_hand, abs=1e-15)
    assert oracle == pytest.approx(0.9851, abs=5e-5)
    assert closed_form_performance(tree, reg, 0.5).sensitivity == pytest.approx(oracle, abs=1e-12)


def test_sequential_specificity_example():
    reg = make_registry([GraderProfile("A", 0.9, 0.80, 1.0), GraderProfile("B", 0.9, 0.99, 1.0)])
    tree = Sequential(Leaf("A"), Leaf("B"))
    oracle = enumerate_performance(tree, reg, 0.2).specificity
    assert oracle == pytest.approx(0.998, abs=1e-12)
    assert closed_form_performance(tree, reg, 0.2).specificity == pytest.approx(oracle, abs=1e-12)


def test_ungradable_goes_positive():
    reg = make_registry([GraderProfile("M", 0.8, 0.9, 1.0, ungradable_rate=0.1)])
    perf = closed_form_performance(Leaf("M"), reg, 0.3)
    assert perf.sensitivity == pytest.approx(0.8 + 0.1 * 0.2)
    assert perf.specificity == pytest.approx(0.9 * 0.9)


def test_disease_free_population(registry):
    for expr in NINE_STRATEGIES.values():
        tree = parse_strategy(expr, registry)
        at_zero = enumerate_performance(tree, registry, 0.0)
        assert at_zero.positive_rate(0.0) == pytest.approx(1.0 - at_zero.specificity, abs=1e-15)
        assert at_zero.expected_cost_per_case == pytest.approx(at_zero.cost_if_healthy)


def test_closed_form_rejects_boundary_prevalence(registry):
    for prev in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            closed_form_performance(Leaf("M"), registry, prev)


def test_enumeration_guard(registry):
    trio = Consensus(Leaf("M"), Leaf("M"), Leaf("M2"))
    tree = Consensus(trio, trio, trio)  # nine graders, depth two
    with pytest.raises(ValueError, match="refusing"):
        enumerate_performance(tree, registry, 0.1)


def test_reads_per_case_copilot(registry):
    reg = {k: dataclasses.replace(v, ungradable_rate=0.0) for k, v in registry.items()}
    perf = closed_form_performance(parse_strategy("AI·M+M2", reg), reg, 0.1)
    assert perf.ai_reads_per_case == 1.0
    assert 1.0 < perf.human_reads_per_case < 2.0


@pytest.mark.parametrize("expr", list(NINE_STRATEGIES.values()))
def test_nine_strategies_match_oracle(registry, expr):
    tree = parse_strategy(expr, registry)
    for prev in (0.0746, 0.3, 0.9):
        assert_same(closed_form_performance(tree, registry, prev), enumerate_performance(tree, registry, prev))


@settings(max_examples=300, deadline=None)
@given(reg=profiles(), raw=random_trees, prev=st.floats(0.001, 0.999))
def test_random_trees_match_oracle(reg, raw, prev):
    tree = resolve(raw, reg)
    assert_same(closed_form_performance(tree, reg, prev), enumerate_performance(tree, reg, prev))


@settings(max_examples=200, deadline=None)
@given(reg=profiles(), raw=random_trees, gid=st.sampled_from(["B", "H", "K"]),
       which=st.sampled_from(["sensitivity", "specificity"]), bump=st.floats(0.0, 1.0))
def test_monotone_in_grader_accuracy(reg, raw, gid, which, bump):
    tree = resolve(raw, reg)
    old = getattr(reg[gid], which)
    better = dict(reg)
    better[gid] = dataclasses.replace(reg[gid], **{which: old + bump * (1.0 - old)})
    before = closed_form_performance(tree, reg, 0.2)
    after = closed_form_performance(tree, better, 0.2)
    assert getattr(after, which) >= getattr(before, which) - 1e-12


@settings(max_examples=200, deadline=None)
@given(reg=profiles(), up=random_trees, rev=random_trees)
def test_sequential_dominance(reg, up, rev):
    u, r = resolve(up, reg), resolve(rev, reg)
    if len(grader_instances(u)) + len(grader_instances(r)) > 8:
        return
    pu, pr = (closed_form_performance(t, reg, 0.1) for t in (u, r))
    ps = closed_form_performance(Sequential(u, r), reg, 0.1)
    assert ps.specificity >= max(pu.specificity, pr.specificity) - 1e-12
    assert ps.sensitivity <= min(pu.sensitivity, pr.sensitivity) + 1e-12


@settings(max_examples=200, deadline=None)
@given(reg=profiles(), raw=random_trees, prev=st.floats(0.001, 0.999))
def test_cost_bounded_by_every_read(reg, raw, prev):
    tree = resolve(raw, reg)
    perf = closed_form_performance(tree, reg, prev)
    ceiling = sum(reg[g.grader].cost_per_read for g in grader_instances(tree))
    assert 0.0 <= perf.expected_cost_per_case <= ceiling + 1e-9


# --- accuracy and prevalence --------------------------------------------------

def _perf(se, sp):
    reg = make_registry([GraderProfile("X", se, sp, 0.0)])
    return closed_form_performance(Leaf("X"), reg, 0.5)


def test_accuracy_examples():
    assert accuracy(_perf(0.9615, 0.8074), 0.0746) == pytest.approx(0.8189, abs=5e-5)
    assert accuracy(_perf(0.9485, 0.9986), 0.0739) == pytest.approx(0.9949, abs=5e-5)
    assert accuracy(_perf(0.87, 0.87), 0.31) == pytest.approx(0.87, abs=1e-15)


def test_implied_prevalence_inverts_accuracy():
    p1 = implied_prevalence(0.8189, 0.9615, 0.8074)
    p8 = implied_prevalence(0.9949, 0.9485, 0.9986)
    assert p1 == pytest.approx(0.0746, abs=5e-4)
    assert p8 == pytest.approx(0.0739, abs=5e-4)
    assert accuracy(_perf(0.9615, 0.8074), p1) == pytest.approx(0.8189, abs=1e-12)
    assert implied_prevalence(0.8, 0.9, 0.8) == 0.0
    with pytest.raises(ValueError):
        implied_prevalence(0.9, 0.8, 0.8)


def test_calibrated_graders_hit_strategy_triples(example):
    """The shipped grader profiles reproduce the target strategy-level figures."""
    perfs = example.inputs.performances()
    targets = {
        ("ai", "sensitivity"): 0.9615, ("ai", "specificity"): 0.8074,
        ("ai_triage", "sensitivity"): 0.9485, ("ai_triage", "specificity"): 0.9986,
        ("copilot", "sensitivity"): 0.9927, ("sequential_review", "specificity"): 0.9999,
    }
    for (name, field), value in targets.items():
        assert getattr(perfs[name], field) == pytest.approx(value, abs=5e-5), name
    assert accuracy(perfs["ai"], 0.0746) == pytest.approx(0.8189, abs=5e-5)
    assert accuracy(perfs["ai_triage"], 0.0739) == pytest.approx(0.9949, abs=5e-5)


# --- profile validation -------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(sensitivity=1.2), dict(specificity=-0.1),
                                dict(ungradable_rate=1.5), dict(cost_per_read=-1.0)])
def test_profile_domain(kw):
    base = dict(id="M", sensitivity=0.9, specificity=0.9, cost_per_read=1.0)
    base.update(kw)
    with pytest.raises(ValueError):
        GraderProfile(**base)


def test_filter_cannot_loosen_negative_channel(registry):
    from drscreen.strategy import FilterParams
    with pytest.raises(ValueError, match="miss rate"):
        GraderProfile("AI", 0.96, 0.8, 1.0, ai=True, filter=FilterParams(0.05, 0.4))
    with pytest.raises(ValueError, match="only AI"):
        GraderProfile("M", 0.96, 0.8, 1.0, filter=FilterParams(0.01, 0.4))


def test_registry_ids_unique():
    with pytest.raises(ValueError, match="duplicate"):
        make_registry([GraderProfile("M", 0.9, 0.9, 1.0), GraderProfile("M", 0.8, 0.9, 1.0)])
