"""
The complete set of model inputs, dotted-path access into them, and the
evaluation of a (frequency, age group) cell across strategies.

Paths address either a grader (``graders.M2.sensitivity``,
``graders.AI.filter.p_pass_given_negative``) or a Markov parameter
(``transitions.blind_untreated``, ``costs.blindness_annual``,
``utilities.Blind``, ``treatment_uptake``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .cea import WtpPolicy
from .markov import MarkovParameters, ScenarioResult, aggregate_scenario, simulate
from .strategy import (DiagnosticPerformance, Registry, StrategyTree,
                       closed_form_performance, parse_strategy)


@dataclass(frozen=True)
class ModelInputs:
    graders: Registry
    params: MarkovParameters
    strategies: Mapping[str, str]  # name -> expression, in reporting order
    comparator: str  # name of the status-quo strategy
    wtp: WtpPolicy = WtpPolicy()
    cohort_size: float = 100_000
    distributions: Tuple[Any, ...] = ()  # DistributionSpec, see sensitivity
    tornado_ranges: Mapping[str, Tuple[float, float]] = field(default_factory=dict)

    def trees(self) -> Dict[str, StrategyTree]:
        return {name: parse_strategy(expr, self.graders) for name, expr in self.strategies.items()}

    def performances(self, prevalence: Optional[float] = None) -> Dict[str, DiagnosticPerformance]:
        prev = self.params.reference_prevalence if prevalence is None else prevalence
        return {name: closed_form_performance(tree, self.graders, prev)
                for name, tree in self.trees().items()}

    def expression(self, name: str) -> str:
        return self.strategies[name]


def _split(path: str) -> List[str]:
    parts = path.split(".")
    if not all(parts):
        raise KeyError(f"malformed parameter path {path!r}")
    return parts


def _get(obj, parts, full):
    for p in parts:
        if isinstance(obj, Mapping):
            if p not in obj:
                key = _int_key(p)
                if key not in obj:
                    raise KeyError(f"unknown parameter path {full!r}")
                p = key
            obj = obj[p]
        elif dataclasses.is_dataclass(obj) and p in {f.name for f in dataclasses.fields(obj)}:
            obj = getattr(obj, p)
        else:
            raise KeyError(f"unknown parameter path {full!r}")
    return obj


def _set(obj, parts, value, full):
    if not parts:
        return value
    head, rest = parts[0], parts[1:]
    if isinstance(obj, Mapping):
        key = head if head in obj else _int_key(head)
        if key not in obj:
            raise KeyError(f"unknown parameter path {full!r}")
        out = dict(obj)
        out[key] = _set(obj[key], rest, value, full)
        return out
    if dataclasses.is_dataclass(obj) and head in {f.name for f in dataclasses.fields(obj)}:
        return dataclasses.replace(obj, **{head: _set(getattr(obj, head), rest, value, full)})
    raise KeyError(f"unknown parameter path {full!r}")


def _int_key(p):
    try:
        return int(p)
    except ValueError:
        return p


def get_path(inputs: ModelInputs, path: str):
    parts = _split(path)
    if parts[0] == "graders":
        return _get(inputs.graders, parts[1:], path)
    return _get(inputs.params, parts, path)


def with_path(inputs: ModelInputs, path: str, value) -> ModelInputs:
    """Copy of ``inputs`` with one parameter replaced; grader profiles revalidate."""
    parts = _split(path)
    if parts[0] == "graders":
        return dataclasses.replace(inputs, graders=_set(inputs.graders, parts[1:], value, path))
    return dataclasses.replace(inputs, params=_set(inputs.params, parts, value, path))


def evaluate_cell(inputs: ModelInputs, names: Sequence[str], frequency: int, age_group: int,
                  horizon: Optional[int] = None, perspective: str = "societal",
                  perfs: Optional[Mapping[str, DiagnosticPerformance]] = None) -> Dict[str, ScenarioResult]:
    """Run every named strategy through one screening cell and aggregate."""
    if perfs is None:
        trees = {n: parse_strategy(inputs.strategies[n], inputs.graders) for n in names}
        prev = inputs.params.reference_prevalence
        perfs = {n: closed_form_performance(trees[n], inputs.graders, prev) for n in names}
    traces = simulate([perfs[n] for n in names], frequency, age_group, inputs.params,
                      cohort_size=inputs.cohort_size, horizon=horizon)
    return {n: aggregate_scenario(tr, perspective) for n, tr in zip(names, traces)}
