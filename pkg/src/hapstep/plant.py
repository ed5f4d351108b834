"""Simulated friction-plate actuator and closed-loop harness.

The plate is modeled as a first-order lag toward the force the
calibration line predicts for the commanded duty: the real device
tracks its command within roughly 0.1 s and its peak force is linear
in duty, so a lag with tau = 0.05 s (10-90% rise 2.197*tau = 0.11 s)
is the simplest consistent model.  At zero duty the plate recenters by
skin elasticity; modeled as an instantaneous return toward zero force.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .calibration import (
    CalibrationCurve,
    StepResponseMetrics,
    analyze_step_response,
)
from .errors import ConfigError
from .profiles import FrictionProfile, SpeedProfileTable, interpolate
from .renderer import Renderer, command_stream

DEFAULT_TAU_S = 0.05


@dataclass
class PlateModel:
    """First-order plant: commanded duty -> presented friction force."""

    forward_curve: CalibrationCurve
    backward_curve: CalibrationCurve
    tau_s: float = DEFAULT_TAU_S
    max_force: float = 20.0
    state_force: float = 0.0

    def __post_init__(self):
        if self.tau_s <= 0:
            raise ConfigError("tau_s must be positive")
        if self.max_force <= 0:
            raise ConfigError("max_force must be positive")

    def reset(self):
        self.state_force = 0.0

    def fresh(self) -> "PlateModel":
        return replace(self, state_force=0.0)


def step_plate(model: PlateModel, signed_duty: float, dt: float) -> float:
    """Advance the plant one tick and return the presented force.

    The target force is the calibration line of the commanded
    direction (zero below the perceivable minimum duty); the state
    relaxes toward it with time constant tau_s and is clamped to the
    device force ceiling.
    """
    if dt <= 0:
        raise ConfigError("dt must be positive")
    mag = abs(signed_duty)
    if signed_duty > 0:
        curve = model.forward_curve
    else:
        curve = model.backward_curve
    if mag >= curve.min_duty and mag > 0:
        target = math.copysign(curve.slope * mag + curve.intercept, signed_duty)
    else:
        target = 0.0
    model.state_force += (target - model.state_force) * (1.0 - math.exp(-dt / model.tau_s))
    model.state_force = max(-model.max_force, min(model.max_force, model.state_force))
    return model.state_force


@dataclass
class SimRun:
    """Per-tick logs plus metrics computed from the logs."""

    t: np.ndarray
    command: np.ndarray
    force: np.ndarray
    metrics: dict = field(default_factory=dict)


def simulate_step_response(model: PlateModel, tick_rate_hz: int = 1000,
                           max_duty: float = 1.0, lead_s: float = 0.1,
                           hold_s: float = 0.5, gap_s: float = 0.5) -> SimRun:
    """Drive the plant with the fast step pattern of the bench test.

    Backward pulse first, then forward: duty jumps 0 -> max, holds,
    drops to 0, then the same in the opposite direction.  Returns logs
    with rise/fall/transition metrics attached.
    """
    model = model.fresh()
    dt = 1.0 / tick_rate_hz
    lead = int(round(lead_s * tick_rate_hz))
    hold = int(round(hold_s * tick_rate_hz))
    gap = int(round(gap_s * tick_rate_hz))
    duty = np.concatenate([
        np.zeros(lead),
        -max_duty * np.ones(hold),
        np.zeros(gap),
        max_duty * np.ones(hold),
        np.zeros(gap),
    ])
    force = np.empty_like(duty)
    for i, d in enumerate(duty):
        force[i] = step_plate(model, d, dt)
    t = np.arange(len(duty)) * dt
    measured = FrictionProfile(sample_rate_hz=tick_rate_hz, values=force)
    metrics = analyze_step_response(list(zip(t, duty)), measured)
    return SimRun(t=t, command=duty, force=force, metrics=metrics.as_dict())


def run_closed_loop(table: SpeedProfileTable,
                    forward_curve: CalibrationCurve,
                    backward_curve: CalibrationCurve,
                    events, model: PlateModel,
                    tick_rate_hz: int = 1000,
                    tail_s: float | None = None) -> SimRun:
    """Renderer and plant stepped in lockstep at the tick rate.

    Metrics:
      per_region_impulse_error - worst relative gap between achieved
        and compiled brake/drive impulse over all steps;
      net_impulse - worst per-step signed impulse, as a fraction of
        that step's compiled region impulse;
      rise_s / rise_10_90_s - from a companion bench-style step
        response of the same plant settings.
    """
    events = sorted(events, key=lambda e: e.t)
    model = model.fresh()
    dt = 1.0 / tick_rate_hz
    if tail_s is None:
        tail_s = 10.0 * model.tau_s

    renderer = Renderer(table, forward_curve, backward_curve, tick_rate_hz)
    duration = 0.0
    starts = []
    for e in events:
        start = (math.floor(e.t * tick_rate_hz) + 1) / tick_rate_hz
        profile = interpolate(table, e.speed_kmh)
        starts.append((start, profile))
        duration = max(duration, start + profile.duration_s)
    duration += tail_s

    commands = list(command_stream(renderer, events, duration_s=duration))
    duty = np.array([c.signed_duty for c in commands])
    t = np.array([c.t for c in commands])
    force = np.empty_like(duty)
    for i, d in enumerate(duty):
        force[i] = step_plate(model, d, dt)

    worst_region = 0.0
    worst_net = 0.0
    for k, (start, profile) in enumerate(starts):
        stop_t = starts[k + 1][0] if k + 1 < len(starts) else duration
        sel = (t >= start) & (t < stop_t)
        f = force[sel]
        achieved_b = float(np.sum(np.clip(-f, 0.0, None)) * dt)
        achieved_f = float(np.sum(np.clip(f, 0.0, None)) * dt)
        expected_b = abs(profile.brake.area)
        expected_f = profile.drive.area
        if expected_b > 0:
            worst_region = max(worst_region, abs(achieved_b - expected_b) / expected_b)
        if expected_f > 0:
            worst_region = max(worst_region, abs(achieved_f - expected_f) / expected_f)
        region_ref = max(expected_b, expected_f)
        if region_ref > 0:
            worst_net = max(worst_net, abs(achieved_f - achieved_b) / region_ref)

    bench = simulate_step_response(model.fresh(), tick_rate_hz)
    metrics = {
        "per_region_impulse_error": worst_region,
        "net_impulse": worst_net,
        "rise_s": bench.metrics["rise_s"],
        "rise_10_90_s": bench.metrics["rise_10_90_s"],
        "n_steps": len(starts),
    }
    return SimRun(t=t, command=duty, force=force, metrics=metrics)


def save_sim_run(run: SimRun, log_path, metrics_path) -> None:
    """Persist per-tick logs as CSV and the metrics block as JSON."""
    lines = ["t,signed_duty,force"]
    for i in range(len(run.t)):
        lines.append(f"{float(run.t[i])!r},{float(run.command[i])!r},{float(run.force[i])!r}")
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(metrics_path, "w", encoding="utf-8") as fh:
        json.dump(run.metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
