"""Glue for the fog tier: features in, reports and alerts out."""

from __future__ import annotations

from typing import Iterable, Optional

from ..tracker import FeatureMap, FeatureVector
from .alerts import Alert, AlertDispatcher, MemorySink, decide
from .context import GridConfig, SectorUnmapped, contextualize
from .rules import RuleSet, SuspicionReport, load_rules, score


class FogEngine:
    def __init__(
        self,
        grid: GridConfig,
        rules: Optional[RuleSet] = None,
        threshold: Optional[float] = None,
        dispatcher: Optional[AlertDispatcher] = None,
    ):
        self.grid = grid
        self.rules = rules or load_rules()
        self.threshold = threshold if threshold is not None else self.rules.threshold
        self.dispatcher = dispatcher or AlertDispatcher(MemorySink())
        self.reports: list[SuspicionReport] = []
        self.alerts: list[Alert] = []
        self.unmapped = 0

    def process(self, fv: FeatureVector, clock: Optional[float] = None) -> Optional[Alert]:
        clock = fv.timestamp if clock is None else clock
        try:
            ctx = contextualize(fv, clock, self.grid)
        except SectorUnmapped:
            self.unmapped += 1
            return None
        report = score(fv, ctx, self.rules, decided_at=clock)
        self.reports.append(report)
        alert = decide(report, self.threshold, self.rules)
        if alert is None:
            return None
        alert = self.dispatcher.dispatch(alert)
        self.alerts.append(alert)
        return alert

    def process_map(self, fmap: FeatureMap, clock: Optional[float] = None) -> list[Alert]:
        out = []
        for key in sorted(fmap.entries):
            alert = self.process(fmap.entries[key], clock)
            if alert is not None:
                out.append(alert)
        return out

    def process_all(self, features: Iterable[FeatureVector]) -> list[Alert]:
        return [a for a in (self.process(fv) for fv in features) if a is not None]
