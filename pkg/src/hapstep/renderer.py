"""Deterministic 1 kHz envelope renderer.

Foot-grounded events select a speed-interpolated triangular envelope;
each tick converts the envelope force at the current time into a signed
duty through the per-direction calibration curves.  Negative duty
drives the backward-towing motor (brake phase), positive the forward
motor, and the brake phase always precedes the drive phase within an
envelope.  A new event preempts and replaces any active envelope at the
next tick boundary.

The VibStep backend replaces each sign region of a duty envelope with
its minimal covering rectangle and routes brake -> heel vibrator,
drive -> thenar vibrator (heel strictly first).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationCurve, force_to_duty
from .errors import ClockError, ConfigError, FormatError
from .profiles import SpeedProfileTable, TriangularProfile, interpolate

TICK_RATE_HZ = 1000

_FEET = ("L", "R")


@dataclass(frozen=True)
class GaitEvent:
    t: float
    foot: str
    speed_kmh: float
    kind: str = "grounded"

    def __post_init__(self):
        if self.foot not in _FEET:
            raise FormatError(f"foot must be one of {_FEET}, got {self.foot!r}")
        if self.kind != "grounded":
            raise FormatError(f"unsupported event kind {self.kind!r}")
        if not (math.isfinite(self.speed_kmh) and self.speed_kmh >= 0):
            raise FormatError("speed_kmh must be finite and >= 0")


@dataclass(frozen=True)
class ActuatorCommand:
    t: float
    signed_duty: float


@dataclass(frozen=True)
class VibstepCommand:
    t: float
    heel_duty: float
    thenar_duty: float


class Renderer:
    """Single-envelope scheduler; one ticking context owns an instance."""

    def __init__(self, table: SpeedProfileTable,
                 forward_curve: CalibrationCurve,
                 backward_curve: CalibrationCurve,
                 tick_rate_hz: int = TICK_RATE_HZ):
        if tick_rate_hz <= 0:
            raise ConfigError("tick_rate_hz must be positive")
        self.table = table
        self.forward_curve = forward_curve
        self.backward_curve = backward_curve
        self.tick_rate_hz = tick_rate_hz
        self._active: tuple[TriangularProfile, float] | None = None
        self._next: tuple[TriangularProfile, float] | None = None
        self._last_tick_t: float | None = None

    def envelope_end_t(self) -> float:
        """End time of the latest scheduled envelope, 0 when idle."""
        end = 0.0
        for slot in (self._active, self._next):
            if slot is not None:
                end = max(end, slot[1] + slot[0].duration_s)
        return end

    def on_event(self, event: GaitEvent) -> None:
        """Schedule the envelope for this footfall from the next tick on.

        Replaces any active envelope; both feet drive the same 1-DOF
        plate, so foot identity does not alter the output.
        """
        if self._last_tick_t is not None and event.t < self._last_tick_t:
            raise ClockError(f"event at t={event.t} is before the last tick")
        profile = interpolate(self.table, event.speed_kmh)
        start_idx = math.floor(event.t * self.tick_rate_hz) + 1
        self._next = (profile, start_idx / self.tick_rate_hz)

    def tick(self, t: float) -> ActuatorCommand:
        """Emit the signed duty for tick time ``t`` (monotone, 1 ms grid)."""
        if self._last_tick_t is not None and t <= self._last_tick_t:
            raise ClockError(f"tick time went backwards: {t} after {self._last_tick_t}")
        self._last_tick_t = t
        if self._next is not None and t >= self._next[1]:
            self._active = self._next
            self._next = None

        force = 0.0
        if self._active is not None:
            profile, start_t = self._active
            if start_t <= t < start_t + profile.duration_s:
                force = float(profile.force_at(t - start_t))
        if force < 0:
            duty = -force_to_duty(self.backward_curve, -force)
        elif force > 0:
            duty = force_to_duty(self.forward_curve, force)
        else:
            duty = 0.0
        return ActuatorCommand(t=t, signed_duty=duty)


def command_stream(renderer: Renderer, events, duration_s: float | None = None):
    """Tick the renderer against an ordered event stream.

    Yields one ActuatorCommand per tick starting at t = 0.  Events are
    pulled lazily and applied at the first tick at/after their
    timestamp, so a pre-recorded log and a live NDJSON feed with the
    same timestamps produce identical output.  Without an explicit
    duration the stream ends when the last envelope finishes.
    """
    events = iter(events)
    pending = next(events, None)
    last_t = -math.inf
    rate = renderer.tick_rate_hz
    end_t = 0.0
    i = 0
    while True:
        t = i / rate
        while pending is not None and pending.t <= t:
            if pending.t < last_t:
                raise ClockError("events must be time-ordered")
            last_t = pending.t
            renderer.on_event(pending)
            end_t = max(end_t, renderer.envelope_end_t())
            pending = next(events, None)
        if duration_s is not None:
            if t >= duration_s:
                return
        elif pending is None and t >= end_t:
            return
        yield renderer.tick(t)
        i += 1


def render_events(table: SpeedProfileTable,
                  forward_curve: CalibrationCurve,
                  backward_curve: CalibrationCurve,
                  events, duration_s: float | None = None,
                  tick_rate_hz: int = TICK_RATE_HZ) -> tuple[np.ndarray, np.ndarray]:
    """Offline render of an event log to (t, signed_duty) arrays."""
    renderer = Renderer(table, forward_curve, backward_curve, tick_rate_hz)
    commands = list(command_stream(renderer, events, duration_s))
    t = np.array([c.t for c in commands])
    duty = np.array([c.signed_duty for c in commands])
    return t, duty


def _sign_runs(values: np.ndarray, positive: bool):
    mask = (values > 0) if positive else (values < 0)
    runs = []
    start = None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        elif not m and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


def to_vibstep(duties: np.ndarray, tick_rate_hz: int = TICK_RATE_HZ,
               t0: float = 0.0) -> list[VibstepCommand]:
    """Rectangular covering envelopes for the dual-vibrator backend.

    Each sign region of the duty envelope becomes a rectangle of height
    max |duty| over exactly the region's span: brake (negative) regions
    drive the heel vibrator, drive (positive) regions the thenar one.
    At most one vibrator is active per tick.
    """
    duties = np.asarray(duties, dtype=float)
    heel = np.zeros_like(duties)
    thenar = np.zeros_like(duties)
    for start, stop in _sign_runs(duties, positive=False):
        heel[start:stop] = float(np.max(-duties[start:stop]))
    for start, stop in _sign_runs(duties, positive=True):
        thenar[start:stop] = float(np.max(duties[start:stop]))
    return [
        VibstepCommand(t=t0 + i / tick_rate_hz,
                       heel_duty=float(heel[i]), thenar_duty=float(thenar[i]))
        for i in range(len(duties))
    ]


def event_to_json(event: GaitEvent) -> str:
    return json.dumps({"t": event.t, "foot": event.foot,
                       "kind": event.kind, "speed_kmh": event.speed_kmh})


def parse_event(line: str) -> GaitEvent:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad event JSON: {exc}") from None
    try:
        return GaitEvent(t=float(data["t"]), foot=data["foot"],
                         speed_kmh=float(data["speed_kmh"]),
                         kind=data.get("kind", "grounded"))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad event record: {exc}") from None


def events_from_ndjson(lines):
    """Yield GaitEvents from an iterable of NDJSON lines."""
    for line in lines:
        line = line.strip()
        if line:
            yield parse_event(line)
