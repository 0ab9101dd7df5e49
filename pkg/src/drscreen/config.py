"""
TOML configuration loading and validation.

Sections: ``graders``, ``strategies``, ``transitions``, ``utilities``,
``costs``, ``discounting``, ``cohort``, plus optional ``wtp``, ``psa`` and
``tornado``. Several files may be given; later files override earlier ones
key by key. The life table is a two-column CSV (age, annual death
probability) referenced from ``[cohort]`` relative to the file naming it.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .cea import WtpPolicy
from .markov import Costs, LifeTable, MarkovParameters, ParameterError, Transitions
from .model import ModelInputs, get_path
from .sensitivity import DEFAULT_RELATIVE_SD, DistributionSpec
from .strategy import (FilterParams, GraderProfile, StrategyParseError, make_registry,
                       parse_strategy)

PathLike = Union[str, Path]

EXAMPLE_CONFIG = Path(__file__).parent / "data" / "example.toml"


class ConfigError(ValueError):
    """Invalid configuration; carries the dotted key path and, when known, file and line."""

    def __init__(self, message: str, key: str = "", file: Optional[str] = None,
                 line: Optional[int] = None):
        self.key, self.file, self.line = key, file, line
        where = f"{file}:{line}: " if file and line else (f"{file}: " if file else "")
        super().__init__(f"{where}{key + ': ' if key else ''}{message}")

    def as_dict(self) -> dict:
        return {"error": "config", "key": self.key, "file": self.file, "line": self.line,
                "message": str(self)}


@dataclass
class Config:
    inputs: ModelInputs
    config_hash: str
    sources: List[str]
    psa_draws: int = 10_000
    psa_seed: int = 0
    tornado_paths: List[str] = field(default_factory=list)
    tornado_spread: float = 0.2


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


class _Locator:
    """Find the file and line on which a dotted key was last set."""

    def __init__(self, files: Sequence[Tuple[str, str]]):
        self.files = files

    def __call__(self, key: str) -> Tuple[Optional[str], Optional[int]]:
        parts = key.split(".")
        found = (self.files[-1][0] if self.files else None, None)
        for name, text in self.files:
            hit = self._search(text, parts)
            if hit is not None:
                found = (name, hit)
        return found

    @staticmethod
    def _search(text: str, parts: List[str]) -> Optional[int]:
        lines = text.splitlines()
        header = None
        best = None
        for i, raw in enumerate(lines, 1):
            line = raw.split("#", 1)[0].strip()
            m = re.match(r"^\[+\s*([^\]]+?)\s*\]+$", line)
            if m:
                header = [p.strip().strip('"') for p in m.group(1).split(".")]
                if header == parts:
                    best = i
                continue
            m = re.match(r'^("?)([^"=]+)\1\s*=', line)
            if m and header is not None:
                full = header + [m.group(2).strip()]
                if full == parts or (len(parts) > len(full) and parts[:len(full)] == full):
                    best = i
        return best


class _Reader:
    def __init__(self, data: dict, locate: _Locator):
        self.data, self.locate = data, locate

    def error(self, key: str, message: str) -> ConfigError:
        f, line = self.locate(key)
        return ConfigError(message, key, f, line)

    def section(self, key: str, required: bool = True) -> dict:
        node = self.data
        for p in key.split("."):
            if not isinstance(node, dict) or p not in node:
                if required:
                    raise self.error(key, "missing required section")
                return {}
            node = node[p]
        if not isinstance(node, dict):
            raise self.error(key, "expected a table")
        return node

    def number(self, sec: dict, key: str, path: str, default=None, lo=None, hi=None) -> float:
        if key not in sec:
            if default is None:
                raise self.error(path, "missing required key")
            return default
        v = sec[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.error(path, f"expected a number, got {v!r}")
        if lo is not None and v < lo or hi is not None and v > hi:
            raise self.error(path, f"value {v} outside [{lo}, {hi}]")
        return float(v)

    def prob(self, sec, key, path, default=None) -> float:
        return self.number(sec, key, path, default, 0.0, 1.0)


def config_hash(data: dict, extra: bytes = b"") -> str:
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode() + extra).hexdigest()[:16]


def load_config(paths: Union[PathLike, Sequence[PathLike]]) -> Config:
    """Read, merge and validate configuration files into model inputs."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    if not paths:
        raise ConfigError("no configuration file given")
    data: dict = {}
    files = []
    base_dir = {}
    for p in paths:
        p = Path(p)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read: {exc.strerror}", file=str(p)) from exc
        try:
            parsed = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"TOML syntax error: {exc}", file=str(p)) from exc
        files.append((str(p), text))
        if "life_table" in parsed.get("cohort", {}):
            base_dir["life_table"] = p.parent
        data = _merge(data, parsed)
    r = _Reader(data, _Locator(files))

    # graders
    gsec = r.section("graders")
    profiles = []
    for gid, g in gsec.items():
        if not isinstance(g, dict):
            raise r.error(f"graders.{gid}", "expected a table")
        pre = f"graders.{gid}"
        is_ai = bool(g.get("ai", gid.upper().startswith("AI")))
        filt = None
        if "filter" in g:
            fs = g["filter"]
            if not is_ai:
                raise r.error(f"{pre}.filter", "only AI graders take filter parameters")
            filt = FilterParams(r.prob(fs, "p_pass_given_positive", f"{pre}.filter.p_pass_given_positive"),
                                r.prob(fs, "p_pass_given_negative", f"{pre}.filter.p_pass_given_negative"))
        se = r.prob(g, "sensitivity", f"{pre}.sensitivity")
        if filt is not None and filt.p_pass_given_positive > 1 - se + 1e-12:
            raise r.error(f"{pre}.filter.p_pass_given_positive",
                          f"must not exceed the raw miss rate {1 - se:.6g}")
        profiles.append(GraderProfile(
            id=gid,
            sensitivity=se,
            specificity=r.prob(g, "specificity", f"{pre}.specificity"),
            cost_per_read=r.number(g, "cost_per_read", f"{pre}.cost_per_read", lo=0.0),
            ungradable_rate=r.prob(g, "ungradable_rate", f"{pre}.ungradable_rate", default=0.0),
            ai=is_ai,
            filter=filt,
        ))
    if not profiles:
        raise r.error("graders", "at least one grader is required")
    registry = make_registry(profiles)

    # strategies
    ssec = r.section("strategies")
    exprs = ssec.get("expressions")
    if not isinstance(exprs, dict) or not exprs:
        raise r.error("strategies.expressions", "missing required table of name = expression")
    for name, expr in exprs.items():
        try:
            parse_strategy(expr, registry)
        except StrategyParseError as exc:
            raise r.error(f"strategies.expressions.{name}", str(exc)) from exc
    comparator = ssec.get("comparator", next(iter(exprs)))
    if comparator not in exprs:
        raise r.error("strategies.comparator", f"unknown strategy name {comparator!r}")

    # transitions
    tsec = r.section("transitions")
    onset_raw = tsec.get("onset")
    if isinstance(onset_raw, dict):
        onset = {}
        for k, v in onset_raw.items():
            try:
                age = int(k)
            except ValueError:
                raise r.error(f"transitions.onset.{k}", "age keys must be integers") from None
            onset[age] = r.prob(onset_raw, k, f"transitions.onset.{k}")
    else:
        onset = r.prob(tsec, "onset", "transitions.onset")
    mults = {}
    for k, v in tsec.get("mortality_multipliers", {}).items():
        mults[k] = r.number(tsec["mortality_multipliers"], k,
                            f"transitions.mortality_multipliers.{k}", lo=0.0)
    transitions = Transitions(
        onset=onset,
        blind_untreated=r.prob(tsec, "blind_untreated", "transitions.blind_untreated"),
        blind_treated=r.prob(tsec, "blind_treated", "transitions.blind_treated"),
        regress=r.prob(tsec, "regress", "transitions.regress", default=0.0),
        mortality_multipliers=mults,
    )

    usec = r.section("utilities")
    utilities = {k: r.prob(usec, k, f"utilities.{k}") for k in ("NonVTDR", "VTDR", "TreatedDR", "Blind")}

    csec = r.section("costs")
    costs = Costs(**{k: r.number(csec, k, f"costs.{k}", lo=0.0, default=0.0 if k == "screening_visit" else None)
                     for k in ("referral", "treatment_initial", "treatment_annual",
                               "blindness_initial", "blindness_annual", "screening_visit")})

    dsec = r.section("discounting", required=False)
    cohort = r.section("cohort")

    lt = cohort.get("life_table")
    if lt is None:
        raise r.error("cohort.life_table", "missing required key")
    lt_path = Path(lt)
    if not lt_path.is_absolute():
        lt_path = base_dir.get("life_table", Path(".")) / lt_path
    try:
        life_table = LifeTable.from_csv(lt_path)
        lt_bytes = lt_path.read_bytes()
    except OSError as exc:
        raise r.error("cohort.life_table", f"cannot read {lt_path}: {exc.strerror}") from exc
    except ParameterError as exc:
        raise r.error("cohort.life_table", str(exc)) from exc

    ages = cohort.get("ages", {"from": 18, "to": 79})
    if isinstance(ages, dict) and "from" in ages:
        initial_ages = {a: 1.0 for a in range(int(ages["from"]), int(ages["to"]) + 1)}
    elif isinstance(ages, dict):
        initial_ages = {int(k): float(v) for k, v in ages.items()}
    else:
        raise r.error("cohort.ages", "expected {from, to} or a table of age = weight")

    params = MarkovParameters(
        transitions=transitions,
        utilities=utilities,
        costs=costs,
        life_table=life_table,
        treatment_uptake=r.prob(tsec, "treatment_uptake", "transitions.treatment_uptake", default=0.70),
        discount_cost=r.number(dsec, "cost", "discounting.cost", default=0.03, lo=0.0),
        discount_effect=r.number(dsec, "effect", "discounting.effect", default=0.03, lo=0.0),
        initial_ages=initial_ages,
        initial_state_mix=dict(cohort.get("initial_state_mix", {"NonVTDR": 1.0})),
        max_age=int(r.number(cohort, "max_age", "cohort.max_age", default=80, lo=1)),
        half_cycle=bool(cohort.get("half_cycle", False)),
        reference_prevalence=r.number(cohort, "reference_prevalence", "cohort.reference_prevalence",
                                      default=0.0746, lo=0.0, hi=1.0),
    )
    try:
        params.validate()
    except ParameterError as exc:
        msg = str(exc)
        key = msg.split(" ", 1)[0] if "." in msg.split(" ", 1)[0] else "transitions"
        raise r.error(key, msg) from exc

    wsec = r.section("wtp", required=False)
    wtp = WtpPolicy(r.number(wsec, "gdp_per_capita", "wtp.gdp_per_capita", default=12_684.0, lo=1e-9))

    inputs = ModelInputs(
        graders=registry,
        params=params,
        strategies=dict(exprs),
        comparator=comparator,
        wtp=wtp,
        cohort_size=r.number(cohort, "size", "cohort.size", default=100_000.0, lo=1e-9),
    )

    # PSA distributions
    psec = r.section("psa", required=False)
    rel_sd = r.number(psec, "relative_sd", "psa.relative_sd", default=DEFAULT_RELATIVE_SD, lo=0.0)
    specs: Dict[str, DistributionSpec] = {}
    for path in psec.get("vary", []):
        base = _resolve(r, inputs, path, "psa.vary")
        specs[path] = DistributionSpec.default_for(path, float(base), rel_sd)
    for i, d in enumerate(psec.get("distributions", [])):
        key = f"psa.distributions.{i}"
        try:
            path, family = d["path"], d["family"]
            base = _resolve(r, inputs, path, key)
            if "hyper" in d:
                spec = DistributionSpec(path, family, tuple(float(x) for x in d["hyper"]), group=d.get("group"))
            else:
                spec = DistributionSpec.from_moments(path, family, float(d.get("mean", base)), float(d["sd"]))
        except KeyError as exc:
            raise r.error(key, f"missing {exc.args[0]!r}") from None
        except ValueError as exc:
            raise r.error(key, str(exc)) from None
        specs[path] = spec

    tsec_t = r.section("tornado", required=False)
    ranges = {}
    for path, rng in tsec_t.get("ranges", {}).items():
        _resolve(r, inputs, path, f"tornado.ranges.{path}")
        if not isinstance(rng, list) or len(rng) != 2:
            raise r.error(f"tornado.ranges.{path}", "expected [low, high]")
        ranges[path] = (float(rng[0]), float(rng[1]))
    tornado_paths = list(tsec_t.get("paths", []))
    for path in tornado_paths:
        _resolve(r, inputs, path, "tornado.paths")

    inputs = replace(inputs, distributions=tuple(specs.values()), tornado_ranges=ranges)
    return Config(
        inputs=inputs,
        config_hash=config_hash(data, lt_bytes),
        sources=[f for f, _ in files],
        psa_draws=int(r.number(psec, "draws", "psa.draws", default=10_000, lo=1)),
        psa_seed=int(r.number(psec, "seed", "psa.seed", default=0, lo=0)),
        tornado_paths=tornado_paths,
        tornado_spread=r.number(tsec_t, "spread", "tornado.spread", default=0.2, lo=0.0),
    )


def _resolve(r: _Reader, inputs: ModelInputs, path: str, key: str):
    try:
        return get_path(inputs, path)
    except KeyError:
        raise r.error(key, f"unknown parameter path {path!r}") from None
