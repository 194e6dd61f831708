"""Weighted rule scoring of feature vectors."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

from ..tracker import FeatureVector
from .context import Context

Predicate = Callable[[FeatureVector, Context], bool]


@dataclass(frozen=True)
class Rule:
    id: str
    predicate: Predicate
    weight: float
    description: str = ""

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"rule {self.id}: weight {self.weight} outside [0, 1]")


@dataclass(frozen=True)
class SuspicionReport:
    icao: str
    first_seen: float
    score: float
    fired_rules: tuple
    context: Context
    decided_at: float


def _implied_speed_ratio(value: float, floor_kt: float = 60.0) -> Predicate:
    def pred(fv: FeatureVector, ctx: Context) -> bool:
        return fv.implied_speed_kt > value * max(fv.ground_speed_kt, floor_kt)

    return pred


def _report_gap(value: float) -> Predicate:
    # security level 3 halves the tolerated gap
    def pred(fv: FeatureVector, ctx: Context) -> bool:
        limit = value / 2.0 if ctx.security_level >= 3 else value
        return fv.report_gap_s > limit

    return pred


def _heading_delta(value: float) -> Predicate:
    def pred(fv: FeatureVector, ctx: Context) -> bool:
        return abs(fv.heading_delta_deg) > value

    return pred


_OPS = {
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
}


def _field_compare(name: str, op: str, value: float, absolute: bool = False) -> Predicate:
    if op not in _OPS:
        raise ValueError(f"unknown comparison {op!r}")
    cmp = _OPS[op]

    def pred(fv: FeatureVector, ctx: Context) -> bool:
        x = getattr(fv, name)
        return cmp(abs(x) if absolute else x, value)

    return pred


def _build_predicate(spec: dict) -> Predicate:
    kind = spec["kind"]
    if kind == "implied_speed_ratio":
        return _implied_speed_ratio(float(spec["value"]), float(spec.get("floor_kt", 60.0)))
    if kind == "report_gap":
        return _report_gap(float(spec["value"]))
    if kind == "heading_delta":
        return _heading_delta(float(spec["value"]))
    if kind == "field":
        if spec["field"] not in FeatureVector.__dataclass_fields__:
            raise ValueError(f"unknown feature {spec['field']!r}")
        return _field_compare(spec["field"], spec.get("op", ">"), float(spec["value"]), bool(spec.get("abs", False)))
    raise ValueError(f"unknown rule kind {kind!r}")


def normalize(rules: Sequence[Rule]) -> list[Rule]:
    """Rescale weights so they sum to one."""
    total = sum(r.weight for r in rules)
    if total <= 0:
        raise ValueError("rule weights sum to zero")
    return [Rule(r.id, r.predicate, r.weight / total, r.description) for r in rules]


@dataclass(frozen=True)
class RuleSet:
    rules: tuple
    threshold: float = 0.8

    @property
    def ids(self) -> tuple:
        return tuple(r.id for r in self.rules)

    def describe(self, rule_ids) -> list[str]:
        by_id = {r.id: r.description or r.id for r in self.rules}
        return [by_id[i] for i in rule_ids]


def rules_from_dict(doc: dict) -> RuleSet:
    raw = [
        Rule(spec["id"], _build_predicate(spec), float(spec["weight"]), spec.get("description", ""))
        for spec in doc["rules"]
    ]
    ids = [r.id for r in raw]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate rule ids")
    return RuleSet(tuple(normalize(raw)), float(doc.get("threshold", 0.8)))


def load_rules(path: Optional[Union[str, Path]] = None) -> RuleSet:
    """Load a rule table; without a path, the packaged default table."""
    if path is None:
        text = resources.files(__package__).joinpath("default_rules.json").read_text()
    else:
        text = Path(path).read_text()
    return rules_from_dict(json.loads(text))


def load_reference_rules() -> RuleSet:
    text = resources.files(__package__).joinpath("reference_rules.json").read_text()
    return rules_from_dict(json.loads(text))


def score(fv: FeatureVector, ctx: Context, rules: Union[RuleSet, Sequence[Rule]], decided_at: float = 0.0) -> SuspicionReport:
    rule_list = rules.rules if isinstance(rules, RuleSet) else rules
    fired = tuple(r.id for r in rule_list if r.predicate(fv, ctx))
    weights = {r.id: r.weight for r in rule_list}
    total = sum(weights[i] for i in fired)
    # clamp float drift: all-fired must read exactly 1
    total = 1.0 if len(fired) == len(rule_list) and fired else min(max(total, 0.0), 1.0)
    return SuspicionReport(fv.icao, fv.first_seen, total, fired, ctx, decided_at)
