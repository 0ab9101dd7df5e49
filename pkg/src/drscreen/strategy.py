"""
Screening-strategy algebra.

A strategy expression such as ``AI·M+M2`` describes how graders (human or AI)
are wired together. This module parses those expressions into small trees and
composes grader accuracy and cost through them.

Grader verdicts are assumed conditionally independent given the true disease
status. Correlated grader errors are not modelled.

Node kinds
----------
Leaf(g)                  one grader reads every case that reaches it
Filtered(g, f)           an AI grader run as a confident-negative filter
Sequential(up, rev)      ``rev`` re-grades only cases ``up`` called positive
Consensus(a, b, adj)     ``a`` and ``b`` read all cases, ``adj`` settles
                         disagreements

Ungradable reads are routed down the positive pathway.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple, Union

MAX_DEPTH = 8
MAX_ENUMERATED_GRADERS = 8

CONSENSUS_MARK = "·"
SEQUENTIAL_MARK = "+"
FILTER_SUFFIX = "[Se]"


class StrategyParseError(ValueError):
    """Raised for malformed strategy expressions."""

    def __init__(self, message, token=None):
        self.token = token
        super().__init__(message if token is None else f"{message}: {token!r}")


@dataclass(frozen=True)
class FilterParams:
    """Pass-through probabilities of a threshold-filtered AI.

    ``p_pass_given_positive`` is the chance a diseased case is confidently
    called negative and skips review; ``p_pass_given_negative`` the same for
    a healthy case.
    """

    p_pass_given_positive: float
    p_pass_given_negative: float

    def __post_init__(self):
        for name in ("p_pass_given_positive", "p_pass_given_negative"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class GraderProfile:
    id: str
    sensitivity: float
    specificity: float
    cost_per_read: float
    ungradable_rate: float = 0.0
    ai: bool = False
    filter: Optional[FilterParams] = None

    def __post_init__(self):
        for name in ("sensitivity", "specificity", "ungradable_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"grader {self.id}: {name} must be in [0, 1], got {v}")
        if self.cost_per_read < 0:
            raise ValueError(f"grader {self.id}: cost_per_read must be >= 0")
        if self.filter is not None:
            if not self.ai:
                raise ValueError(f"grader {self.id}: only AI graders take filter parameters")
            if self.filter.p_pass_given_positive > 1.0 - self.sensitivity + 1e-12:
                raise ValueError(
                    f"grader {self.id}: p_pass_given_positive exceeds the raw miss rate "
                    f"{1.0 - self.sensitivity:.6g}; filtering can only tighten the negative channel"
                )


Registry = Dict[str, GraderProfile]


def make_registry(profiles: Iterable[GraderProfile]) -> Registry:
    """Index profiles by id, rejecting duplicates."""
    registry = {}
    for p in profiles:
        if p.id in registry:
            raise ValueError(f"duplicate grader id {p.id!r}")
        registry[p.id] = p
    return registry


# --- tree nodes -------------------------------------------------------------

@dataclass(frozen=True)
class Leaf:
    grader: str


@dataclass(frozen=True)
class Filtered:
    grader: str
    params: FilterParams


@dataclass(frozen=True)
class Sequential:
    upstream: "StrategyTree"
    reviewer: "StrategyTree"


@dataclass(frozen=True)
class Consensus:
    a: "StrategyTree"
    b: "StrategyTree"
    adjudicator: "StrategyTree"


StrategyTree = Union[Leaf, Filtered, Sequential, Consensus]


def depth(tree: StrategyTree) -> int:
    if isinstance(tree, (Leaf, Filtered)):
        return 1
    return 1 + max(depth(child) for child in children(tree))


def children(tree: StrategyTree) -> Tuple[StrategyTree, ...]:
    if isinstance(tree, Sequential):
        return (tree.upstream, tree.reviewer)
    if isinstance(tree, Consensus):
        return (tree.a, tree.b, tree.adjudicator)
    return ()


def grader_instances(tree: StrategyTree) -> List[Union[Leaf, Filtered]]:
    """Leaves in left-to-right order; ``M·M`` yields two instances."""
    if isinstance(tree, (Leaf, Filtered)):
        return [tree]
    out = []
    for child in children(tree):
        out.extend(grader_instances(child))
    return out


# --- parsing ----------------------------------------------------------------

_UNIT_RE = re.compile(r"^([A-Za-z][A-Za-z0-9_]*)(\[Se\])?$")


def _split_units(stage_text: str) -> List[str]:
    return stage_text.split(CONSENSUS_MARK)


def parse_strategy(expr: str, registry: Registry) -> StrategyTree:
    """Parse a strategy expression into a tree.

    ``+`` separates stages, evaluated left to right. A stage of the form
    ``X·Y`` is a consensus pair whose adjudicator is the following stage.
    ``[Se]`` marks a threshold-filtered AI: either directly (``AI[Se]``) or,
    as commonly written, on the reviewer that follows a bare AI stage
    (``AI+M[Se]``). ``.`` is accepted in place of ``·``.

    >>> reg = make_registry([GraderProfile("M", 0.9, 0.95, 1.0)])
    >>> parse_strategy("M", reg)
    Leaf(grader='M')
    """
    if not isinstance(expr, str) or not expr.strip():
        raise StrategyParseError("empty strategy expression")
    text = re.sub(r"\s+", "", expr).replace(".", CONSENSUS_MARK)
    stages = text.split(SEQUENTIAL_MARK)
    for s in stages:
        if not s:
            raise StrategyParseError("empty stage in expression", expr)

    def unit(token: str) -> Tuple[StrategyTree, bool]:
        m = _UNIT_RE.match(token)
        if m is None:
            raise StrategyParseError("malformed grader token", token)
        gid, suffix = m.group(1), m.group(2)
        if gid not in registry:
            raise StrategyParseError("unknown grader id", gid)
        if suffix and registry[gid].ai:
            return _filtered(gid, registry), False
        # A [Se] on a human reviewer is resolved against the upstream stage.
        return Leaf(gid), bool(suffix)

    acc: Optional[StrategyTree] = None
    i = 0
    while i < len(stages):
        tokens = _split_units(stages[i])
        if any(not t for t in tokens):
            raise StrategyParseError("empty operand around '·'", stages[i])
        if len(tokens) > 2:
            raise StrategyParseError("consensus takes exactly two primary graders", stages[i])
        if len(tokens) == 2:
            if i + 1 >= len(stages):
                raise StrategyParseError("consensus stage has no adjudicator stage", stages[i])
            adj_tokens = _split_units(stages[i + 1])
            if len(adj_tokens) != 1:
                raise StrategyParseError("adjudicator must be a single grader", stages[i + 1])
            a, fa = unit(tokens[0])
            b, fb = unit(tokens[1])
            c, fc = unit(adj_tokens[0])
            for flagged, tok in ((fa, tokens[0]), (fb, tokens[1]), (fc, adj_tokens[0])):
                if flagged:
                    raise StrategyParseError("[Se] applies only to an AI grader", tok)
            node: StrategyTree = Consensus(a, b, c)
            i += 2
        else:
            node, flagged = unit(tokens[0])
            if flagged:
                if isinstance(acc, Leaf) and registry[acc.grader].ai:
                    acc = _filtered(acc.grader, registry)
                else:
                    raise StrategyParseError("[Se] applies only to an AI grader", tokens[0])
            i += 1
        acc = node if acc is None else Sequential(acc, node)

    if depth(acc) > MAX_DEPTH:
        raise StrategyParseError(f"strategy deeper than {MAX_DEPTH} levels", expr)
    return acc


def _filtered(gid: str, registry: Registry) -> Filtered:
    params = registry[gid].filter
    if params is None:
        raise StrategyParseError("AI grader has no filter parameters configured", f"{gid}[Se]")
    return Filtered(gid, params)


def to_expression(tree: StrategyTree) -> str:
    """Canonical text form; inverse of :func:`parse_strategy`."""
    if isinstance(tree, Leaf):
        return tree.grader
    if isinstance(tree, Filtered):
        return tree.grader + FILTER_SUFFIX
    if isinstance(tree, Consensus):
        return (f"{to_expression(tree.a)}{CONSENSUS_MARK}{to_expression(tree.b)}"
                f"{SEQUENTIAL_MARK}{to_expression(tree.adjudicator)}")
    up, rev = tree.upstream, tree.reviewer
    if isinstance(up, Filtered) and isinstance(rev, Leaf):
        return f"{up.grader}{SEQUENTIAL_MARK}{rev.grader}{FILTER_SUFFIX}"
    return f"{to_expression(up)}{SEQUENTIAL_MARK}{to_expression(rev)}"


def canonical(expr: str) -> str:
    """Whitespace-free form with ``·`` as the consensus mark."""
    return re.sub(r"\s+", "", expr).replace(".", CONSENSUS_MARK)


# --- performance ------------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticPerformance:
    """Composed accuracy and grading cost of a strategy.

    The per-state cost fields let a cohort model charge screening cost by
    the true status of the people screened rather than at a fixed
    reference prevalence.
    """

    sensitivity: float
    specificity: float
    expected_cost_per_case: float
    human_reads_per_case: float
    ai_reads_per_case: float
    cost_if_diseased: float = 0.0
    cost_if_healthy: float = 0.0
    prevalence: float = float("nan")

    @property
    def reads_per_case(self) -> Tuple[float, float]:
        return (self.human_reads_per_case, self.ai_reads_per_case)

    def positive_rate(self, prevalence: float) -> float:
        return prevalence * self.sensitivity + (1.0 - prevalence) * (1.0 - self.specificity)


@dataclass
class _Branch:
    """Conditional quantities for one true state, given a case reaches a node."""

    p_pos: float
    cost: float
    human: float
    ai: float


def _leaf_branch(profile: GraderProfile, p_flag: float) -> _Branch:
    u = profile.ungradable_rate
    return _Branch(
        p_pos=p_flag + u * (1.0 - p_flag),
        cost=profile.cost_per_read,
        human=0.0 if profile.ai else 1.0,
        ai=1.0 if profile.ai else 0.0,
    )


def _compose(tree: StrategyTree, registry: Registry, diseased: bool) -> _Branch:
    if isinstance(tree, Leaf):
        p = registry[tree.grader]
        return _leaf_branch(p, p.sensitivity if diseased else 1.0 - p.specificity)
    if isinstance(tree, Filtered):
        p = registry[tree.grader]
        f = tree.params
        p_flag = 1.0 - (f.p_pass_given_positive if diseased else f.p_pass_given_negative)
        return _leaf_branch(p, p_flag)
    if isinstance(tree, Sequential):
        up = _compose(tree.upstream, registry, diseased)
        rev = _compose(tree.reviewer, registry, diseased)
        return _Branch(
            p_pos=up.p_pos * rev.p_pos,
            cost=up.cost + up.p_pos * rev.cost,
            human=up.human + up.p_pos * rev.human,
            ai=up.ai + up.p_pos * rev.ai,
        )
    a = _compose(tree.a, registry, diseased)
    b = _compose(tree.b, registry, diseased)
    c = _compose(tree.adjudicator, registry, diseased)
    disagree = a.p_pos * (1.0 - b.p_pos) + (1.0 - a.p_pos) * b.p_pos
    return _Branch(
        p_pos=a.p_pos * b.p_pos + disagree * c.p_pos,
        cost=a.cost + b.cost + disagree * c.cost,
        human=a.human + b.human + disagree * c.human,
        ai=a.ai + b.ai + disagree * c.ai,
    )


def _check_tree(tree: StrategyTree, registry: Registry):
    if depth(tree) > MAX_DEPTH:
        raise ValueError(f"strategy tree deeper than {MAX_DEPTH}")
    for leaf in grader_instances(tree):
        if leaf.grader not in registry:
            raise ValueError(f"unknown grader id {leaf.grader!r}")


def _assemble(dis: _Branch, hea: _Branch, prevalence: float) -> DiagnosticPerformance:
    w = prevalence
    return DiagnosticPerformance(
        sensitivity=dis.p_pos,
        specificity=1.0 - hea.p_pos,
        expected_cost_per_case=w * dis.cost + (1 - w) * hea.cost,
        human_reads_per_case=w * dis.human + (1 - w) * hea.human,
        ai_reads_per_case=w * dis.ai + (1 - w) * hea.ai,
        cost_if_diseased=dis.cost,
        cost_if_healthy=hea.cost,
        prevalence=prevalence,
    )


def closed_form_performance(tree: StrategyTree, registry: Registry,
                            prevalence: float) -> DiagnosticPerformance:
    """Compose sensitivity, specificity and expected cost recursively."""
    if not 0.0 < prevalence < 1.0:
        raise ValueError(f"prevalence must lie in (0, 1), got {prevalence}")
    _check_tree(tree, registry)
    return _assemble(_compose(tree, registry, True), _compose(tree, registry, False), prevalence)


# --- brute-force oracle -----------------------------------------------------

# Per-read outcomes; an ungradable read follows the positive pathway.
_POS, _NEG, _UNGRADABLE = 0, 1, 2


def _outcome_probs(leaf, profile: GraderProfile, diseased: bool) -> Tuple[float, float, float]:
    u = profile.ungradable_rate
    if isinstance(leaf, Filtered):
        passes = leaf.params.p_pass_given_positive if diseased else leaf.params.p_pass_given_negative
        flag = 1.0 - passes
    else:
        flag = profile.sensitivity if diseased else 1.0 - profile.specificity
    return ((1.0 - u) * flag, (1.0 - u) * (1.0 - flag), u)


def _route(tree, outcomes, offset, reads):
    """Walk the pipeline for one joint outcome; returns the final verdict.

    ``offset`` is the position of the subtree's first grader among all
    grader instances, so each read looks up its own outcome.
    """
    if isinstance(tree, (Leaf, Filtered)):
        reads.append(tree.grader)
        return outcomes[offset] != _NEG
    if isinstance(tree, Sequential):
        if not _route(tree.upstream, outcomes, offset, reads):
            return False
        return _route(tree.reviewer, outcomes, offset + _n_graders(tree.upstream), reads)
    off_b = offset + _n_graders(tree.a)
    off_c = off_b + _n_graders(tree.b)
    va = _route(tree.a, outcomes, offset, reads)
    vb = _route(tree.b, outcomes, off_b, reads)
    if va == vb:
        return va
    return _route(tree.adjudicator, outcomes, off_c, reads)


def _n_graders(tree) -> int:
    return len(grader_instances(tree))


def enumerate_performance(tree: StrategyTree, registry: Registry,
                          prevalence: float) -> DiagnosticPerformance:
    """Exhaustive oracle for :func:`closed_form_performance`.

    Every joint read outcome (positive / negative / ungradable per grader
    instance) is weighted by its probability and pushed through the
    pipeline. Work grows as 3**n, so trees are capped at eight graders.
    Unlike the closed form, ``prevalence`` may be 0 or 1 here.
    """
    if not 0.0 <= prevalence <= 1.0:
        raise ValueError(f"prevalence must lie in [0, 1], got {prevalence}")
    _check_tree(tree, registry)
    leaves = grader_instances(tree)
    if len(leaves) > MAX_ENUMERATED_GRADERS:
        raise ValueError(
            f"refusing to enumerate {len(leaves)} graders (limit {MAX_ENUMERATED_GRADERS})")

    totals = {}
    for diseased in (True, False):
        probs = [_outcome_probs(l, registry[l.grader], diseased) for l in leaves]
        # terms are summed with fsum so the oracle carries no accumulation error
        p_pos, cost, human, ai = [], [], [], []
        for outcomes in itertools.product((_POS, _NEG, _UNGRADABLE), repeat=len(leaves)):
            w = 1.0
            for k, o in enumerate(outcomes):
                w *= probs[k][o]
            if w == 0.0:
                continue
            reads = []
            if _route(tree, outcomes, 0, reads):
                p_pos.append(w)
            for g in reads:
                prof = registry[g]
                cost.append(w * prof.cost_per_read)
                (ai if prof.ai else human).append(w)
        totals[diseased] = _Branch(*(math.fsum(t) for t in (p_pos, cost, human, ai)))
    return _assemble(totals[True], totals[False], prevalence)


# --- accuracy helpers -------------------------------------------------------

def accuracy(perf: DiagnosticPerformance, prevalence: float) -> float:
    if not 0.0 < prevalence < 1.0:
        raise ValueError(f"prevalence must lie in (0, 1), got {prevalence}")
    return prevalence * perf.sensitivity + (1.0 - prevalence) * perf.specificity


def implied_prevalence(acc: float, se: float, sp: float) -> float:
    """Prevalence at which (se, sp) produce overall accuracy ``acc``."""
    if se == sp:
        raise ValueError("prevalence is undefined when sensitivity equals specificity")
    return (acc - sp) / (se - sp)
