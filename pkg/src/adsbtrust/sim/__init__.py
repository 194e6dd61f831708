"""Trajectory and system simulator."""

from .agents import (
    AgentState,
    AircraftAgent,
    Normal,
    Replayed,
    SensorModel,
    Silent,
    Spoofed,
    emit_report,
    observe,
    step_agent,
)
from .engine import (
    BadParams,
    DosFlood,
    FeedbackConfig,
    FeedbackController,
    Scenario,
    ScheduleError,
    SimEvent,
    SimResult,
    UnknownAgent,
    feedback_tick,
    inject_attack,
    load_scenario,
    run,
    save_scenario,
)
from .scenarios import DEFAULT_BOX, RECEIVER, nominal_flights, spoof_scenario

__all__ = [name for name in dir() if not name.startswith("_")]
