"""Threshold decisions and at-most-once alert delivery to ATC sinks."""

from __future__ import annotations

import json
import logging
import threading
import time
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

from .rules import RuleSet, SuspicionReport

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.8
DEDUP_WINDOW_S = 60.0
MAX_RETRIES = 3


class SinkUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class Alert:
    icao: str
    score: float
    threshold: float
    message: str
    first_seen: float
    decided_at: float
    fired_rules: tuple = ()
    sink_ack: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fired_rules"] = list(self.fired_rules)
        return d


def decide(report: SuspicionReport, threshold: float = DEFAULT_THRESHOLD, rules: Optional[RuleSet] = None) -> Optional[Alert]:
    """Alert iff ``report.score >= threshold``."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside (0, 1]")
    if report.score < threshold:
        return None
    reasons = rules.describe(report.fired_rules) if rules is not None else list(report.fired_rules)
    message = (
        f"aircraft {report.icao}: suspicion {report.score:.2f} >= {threshold:.2f}"
        f" in sector {report.context.sector_id}; " + "; ".join(reasons)
    )
    return Alert(
        icao=report.icao,
        score=report.score,
        threshold=threshold,
        message=message,
        first_seen=report.first_seen,
        decided_at=report.decided_at,
        fired_rules=tuple(report.fired_rules),
    )


class AlertSink(Protocol):
    def send(self, alert: Alert) -> None: ...


class FileSink:
    """Newline-delimited JSON log."""

    def __init__(self, path):
        self.path = Path(path)

    def send(self, alert: Alert) -> None:
        try:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(alert.to_dict(), sort_keys=True) + "\n")
        except OSError as exc:
            raise SinkUnavailable(str(exc)) from exc


class WebhookSink:
    def __init__(self, url: str, timeout_s: float = 2.0):
        self.url = url
        self.timeout_s = timeout_s

    def send(self, alert: Alert) -> None:
        body = json.dumps(alert.to_dict(), sort_keys=True).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, headers={"Content-Type": "application/json"}, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                if resp.status >= 300:
                    raise SinkUnavailable(f"webhook answered {resp.status}")
        except (urllib.error.URLError, OSError) as exc:
            raise SinkUnavailable(str(exc)) from exc


class MemorySink:
    def __init__(self):
        self.alerts: list[Alert] = []

    def send(self, alert: Alert) -> None:
        self.alerts.append(alert)


@dataclass(frozen=True)
class Suppression:
    icao: str
    decided_at: float
    reason: str


class AlertDispatcher:
    """Delivers alerts once per (icao, first_seen, decided_at).

    A second alert for the same aircraft within ``dedup_window_s`` of the
    last delivered one is suppressed and recorded. Failed deliveries are
    retried with exponential backoff, then written to the dead-letter file.
    """

    def __init__(
        self,
        sink: AlertSink,
        dead_letter_path=None,
        dedup_window_s: float = DEDUP_WINDOW_S,
        retries: int = MAX_RETRIES,
        backoff_s: float = 0.05,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.sink = sink
        self.dead_letter_path = Path(dead_letter_path) if dead_letter_path else None
        self.dedup_window_s = dedup_window_s
        self.retries = retries
        self.backoff_s = backoff_s
        self.sleep = sleep
        self.suppressed: list[Suppression] = []
        self.dead_lettered: list[Alert] = []
        self.delivered: list[Alert] = []
        self._seen: set[tuple] = set()
        self._last_sent: dict[str, float] = {}
        self._lock = threading.Lock()

    def _claim(self, alert: Alert) -> Optional[str]:
        key = (alert.icao, alert.first_seen, alert.decided_at)
        with self._lock:
            if key in self._seen:
                return "duplicate"
            last = self._last_sent.get(alert.icao)
            if last is not None and 0 <= alert.decided_at - last < self.dedup_window_s:
                return "within dedup window"
            self._seen.add(key)
            self._last_sent[alert.icao] = alert.decided_at
            return None

    def dispatch(self, alert: Alert) -> Alert:
        reason = self._claim(alert)
        if reason is not None:
            with self._lock:
                self.suppressed.append(Suppression(alert.icao, alert.decided_at, reason))
            return alert
        for attempt in range(self.retries + 1):
            try:
                self.sink.send(alert)
            except SinkUnavailable as exc:
                log.warning("alert sink unavailable (attempt %d): %s", attempt + 1, exc)
                if attempt < self.retries:
                    self.sleep(self.backoff_s * (2 ** attempt))
                continue
            acked = replace(alert, sink_ack=True)
            with self._lock:
                self.delivered.append(acked)
            return acked
        self._dead_letter(alert)
        return alert

    def _dead_letter(self, alert: Alert) -> None:
        with self._lock:
            self.dead_lettered.append(alert)
            if self.dead_letter_path is not None:
                with self.dead_letter_path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(alert.to_dict(), sort_keys=True) + "\n")


def dispatch_alert(alert: Alert, dispatcher: AlertDispatcher) -> Alert:
    return dispatcher.dispatch(alert)


def dispatch_all(alerts: Sequence[Alert], dispatcher: AlertDispatcher) -> list[Alert]:
    return [dispatcher.dispatch(a) for a in alerts]
