"""Fog tier: contextualize feature vectors, score them, raise ATC alerts."""

from .alerts import (
    DEFAULT_THRESHOLD,
    Alert,
    AlertDispatcher,
    FileSink,
    MemorySink,
    SinkUnavailable,
    WebhookSink,
    decide,
    dispatch_alert,
)
from .context import Context, GridConfig, SectorUnmapped, contextualize
from .engine import FogEngine
from .rules import Rule, RuleSet, SuspicionReport, load_reference_rules, load_rules, normalize, rules_from_dict, score

__all__ = [
    "DEFAULT_THRESHOLD",
    "Alert",
    "AlertDispatcher",
    "Context",
    "FileSink",
    "FogEngine",
    "GridConfig",
    "MemorySink",
    "Rule",
    "RuleSet",
    "SectorUnmapped",
    "SinkUnavailable",
    "SuspicionReport",
    "WebhookSink",
    "contextualize",
    "decide",
    "dispatch_alert",
    "load_reference_rules",
    "load_rules",
    "normalize",
    "rules_from_dict",
    "score",
]
