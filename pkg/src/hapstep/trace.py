"""Force-trace container and CSV ingest/persist.

Traces store the friction force applied *on the sole*, forward-positive
along the walking direction.  Raw sensor files record the reaction force
measured under the foot, so every force channel is negated exactly once
at ingest; the writer emits sensor-frame values again, making
write -> read the identity.

trace-CSV layout::

    # rate_hz=<float> speed_kmh=<float> participant=<id>
    t,thenar_y,heel_y[,thenar_z,heel_z]
    0.0,0.12,-0.40,...

The ``t`` column is optional on ingest (rate may come from the header);
when present its spacing must be uniform to within 1%.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyInputError, FormatError

SIGN_CONVENTION = "sole-frame, forward-positive"

#: acceptable relative deviation of any time step from the median step
TIME_JITTER_TOL = 0.01


@dataclass(frozen=True)
class TraceMeta:
    walking_speed_kmh: float
    participant_id: str
    sign_convention: str = SIGN_CONVENTION


@dataclass(frozen=True)
class ForceTrace:
    """Uniformly sampled two-site longitudinal friction force signal."""

    sample_rate_hz: float
    thenar_y: np.ndarray
    heel_y: np.ndarray
    meta: TraceMeta
    thenar_z: np.ndarray | None = None
    heel_z: np.ndarray | None = None

    def __post_init__(self):
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ConfigError("sample_rate_hz must be positive and finite")
        object.__setattr__(self, "thenar_y", np.asarray(self.thenar_y, dtype=float))
        object.__setattr__(self, "heel_y", np.asarray(self.heel_y, dtype=float))
        if len(self.thenar_y) != len(self.heel_y):
            raise FormatError("thenar_y and heel_y must have equal length")
        if (self.thenar_z is None) != (self.heel_z is None):
            raise FormatError("Z channels must be present for both sites or neither")
        if self.thenar_z is not None:
            object.__setattr__(self, "thenar_z", np.asarray(self.thenar_z, dtype=float))
            object.__setattr__(self, "heel_z", np.asarray(self.heel_z, dtype=float))
            if len(self.thenar_z) != len(self.thenar_y) or len(self.heel_z) != len(self.thenar_y):
                raise FormatError("all channels must have equal length")
        for chan in self.channels().values():
            if not np.all(np.isfinite(chan)):
                raise FormatError("force values must be finite")

    def __len__(self):
        return len(self.thenar_y)

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.sample_rate_hz

    def channels(self) -> dict[str, np.ndarray]:
        out = {"thenar_y": self.thenar_y, "heel_y": self.heel_y}
        if self.thenar_z is not None:
            out["thenar_z"] = self.thenar_z
            out["heel_z"] = self.heel_z
        return out

    def window(self, start: int, stop: int) -> "ForceTrace":
        """Sub-trace over sample indices [start, stop)."""
        kw = {}
        if self.thenar_z is not None:
            kw = {"thenar_z": self.thenar_z[start:stop], "heel_z": self.heel_z[start:stop]}
        return ForceTrace(
            sample_rate_hz=self.sample_rate_hz,
            thenar_y=self.thenar_y[start:stop],
            heel_y=self.heel_y[start:stop],
            meta=self.meta,
            **kw,
        )


_Y_COLUMNS = ("t", "thenar_y", "heel_y")
_YZ_COLUMNS = ("t", "thenar_y", "heel_y", "thenar_z", "heel_z")


def _parse_header_meta(line: str, lineno: int) -> dict[str, str]:
    tokens = line.lstrip("#").split()
    meta = {}
    for tok in tokens:
        if "=" not in tok:
            raise FormatError(f"line {lineno}: malformed header token {tok!r}")
        key, value = tok.split("=", 1)
        meta[key] = value
    return meta


def _as_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8")


def load_trace(source) -> ForceTrace:
    """Parse a trace-CSV stream or path into a validated ForceTrace.

    Raw sensor forces are negated so stored values are sole-frame
    forward-positive.  Raises FormatError on malformed rows (with line
    number), non-uniform timing, or header/column problems, and
    EmptyInputError when the body has no rows.
    """
    fh = _as_text(source)
    header_meta: dict[str, str] = {}
    columns: list[str] | None = None
    rows: list[list[float]] = []
    lineno = 0
    for raw_line in fh:
        lineno += 1
        line = raw_line.strip()
        if not line:
            continue
        if line.startswith("#"):
            header_meta.update(_parse_header_meta(line, lineno))
            continue
        if columns is None:
            columns = [c.strip() for c in line.split(",")]
            if tuple(columns) not in (_Y_COLUMNS, _YZ_COLUMNS,
                                      _Y_COLUMNS[1:], _YZ_COLUMNS[1:]):
                raise FormatError(f"line {lineno}: unexpected columns {columns}")
            continue
        parts = line.split(",")
        if len(parts) != len(columns):
            raise FormatError(
                f"line {lineno}: expected {len(columns)} fields, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None

    if columns is None or not rows:
        raise EmptyInputError("trace file has no data rows")

    data = np.asarray(rows, dtype=float)
    cols = {name: data[:, i] for i, name in enumerate(columns)}

    rate = None
    if "rate_hz" in header_meta:
        try:
            rate = float(header_meta["rate_hz"])
        except ValueError:
            raise FormatError(f"bad rate_hz header value {header_meta['rate_hz']!r}") from None
    if "t" in cols:
        t = cols["t"]
        if len(t) >= 2:
            dt = np.diff(t)
            med = float(np.median(dt))
            if med <= 0:
                raise FormatError("time column must be strictly increasing")
            if np.any(np.abs(dt - med) > TIME_JITTER_TOL * med):
                raise FormatError(
                    f"non-uniform time spacing beyond {TIME_JITTER_TOL:.0%} jitter")
            if rate is None:
                rate = 1.0 / med
    if rate is None:
        raise FormatError("sample rate not declared in header and no time column")

    meta = TraceMeta(
        walking_speed_kmh=float(header_meta.get("speed_kmh", 0.0)),
        participant_id=header_meta.get("participant", "unknown"),
    )
    kw = {}
    if "thenar_z" in cols:
        kw = {"thenar_z": -cols["thenar_z"], "heel_z": -cols["heel_z"]}
    return ForceTrace(
        sample_rate_hz=rate,
        thenar_y=-cols["thenar_y"],
        heel_y=-cols["heel_y"],
        meta=meta,
        **kw,
    )


def dump_trace(trace: ForceTrace) -> str:
    """Serialize a ForceTrace to trace-CSV text (sensor-frame values)."""
    lines = [
        f"# rate_hz={trace.sample_rate_hz!r} "
        f"speed_kmh={trace.meta.walking_speed_kmh!r} "
        f"participant={trace.meta.participant_id}"
    ]
    has_z = trace.thenar_z is not None
    lines.append(",".join(_YZ_COLUMNS if has_z else _Y_COLUMNS))
    rate = trace.sample_rate_hz
    for i in range(len(trace)):
        fields = [repr(i / rate), repr(float(-trace.thenar_y[i])),
                  repr(float(-trace.heel_y[i]))]
        if has_z:
            fields += [repr(float(-trace.thenar_z[i])), repr(float(-trace.heel_z[i]))]
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def write_trace(trace: ForceTrace, dest) -> None:
    text = dump_trace(trace)
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        dest.write(text)
