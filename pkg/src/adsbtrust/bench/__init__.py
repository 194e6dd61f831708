"""Experiment harness wiring every tier together."""

from .experiments import (
    BatchSample,
    BenchError,
    ChainStalled,
    E2EResult,
    ExperimentConfig,
    IoError,
    LatencyResult,
    LatencySample,
    QueueOverflow,
    ScenarioError,
    ServiceDown,
    ThroughputResult,
    emit_report,
    parse_report,
    report_text,
    run_latency,
    run_latency_suite,
    run_scenario_e2e,
    run_throughput,
    synthetic_frames,
)

__all__ = [name for name in dir() if not name.startswith("_")]
