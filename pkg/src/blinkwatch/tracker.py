"""Temporal drowsiness assessment from per-frame eye observations.

Per stream, the tracker maintains:
  - the current eye-closure run length (sum of inter-frame gaps while
    closed; an open frame resets it),
  - PERCLOS, the fraction of closed frames in a trailing time window,
  - the head-pitch angle from the two eye centers (updated on open
    frames only),

and classifies every frame into one of three levels:
  level 2 (red)    closure run strictly longer than the threshold T,
  level 1 (yellow) run within T but the head is tilted past tolerance,
  level 0 (green)  otherwise.

Entering a new level emits one AlertEvent; entering level 2 carries the
"wake up" message. A frame with fewer than two detected eyes counts as
closed (conservative toward safety). PERCLOS is reported per frame but
does not influence the level.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple, Optional


class DrowsinessLevel(IntEnum):
    NORMAL = 0   # green
    WARNING = 1  # yellow
    ALERT = 2    # red

    @property
    def color(self) -> str:
        return ("green", "yellow", "red")[int(self)]


_ALERT_MESSAGES = {0: "normal", 1: "warning", 2: "wake up"}


@dataclass(frozen=True)
class TrackerConfig:
    closure_threshold: float = 2.0   # seconds of closure before level 2
    perclos_window: float = 60.0     # trailing window, seconds
    pitch_tolerance: float = 5.0     # degrees; beyond this the pitch flag is set
    fps: float = 10.0                # nominal rate for synthesized timestamps

    def __post_init__(self):
        if self.closure_threshold <= 0:
            raise ValueError("closure_threshold must be > 0")
        if self.perclos_window <= 0:
            raise ValueError("perclos_window must be > 0")
        if self.pitch_tolerance < 0:
            raise ValueError("pitch_tolerance must be >= 0")
        if self.fps <= 0:
            raise ValueError("fps must be > 0")


@dataclass(frozen=True)
class EyeObservation:
    frame: int
    timestamp: float
    left: Optional[tuple[float, float]] = None   # eye center (cx, cy), pixels
    right: Optional[tuple[float, float]] = None

    @property
    def eyes_open(self) -> bool:
        return self.left is not None and self.right is not None


@dataclass(frozen=True)
class FrameAssessment:
    frame: int
    timestamp: float
    eyes_open: bool
    run_length: float            # seconds of the current closure run
    perclos: float
    pitch: Optional[float]       # degrees; absent while eyes are closed
    pitch_flag: int              # 1 iff |pitch estimate| > tolerance
    level: DrowsinessLevel


@dataclass(frozen=True)
class AlertEvent:
    timestamp: float
    previous: DrowsinessLevel
    level: DrowsinessLevel
    message: str


class PerclosResult(NamedTuple):
    fraction: float
    has_data: bool


def compute_pitch(left: tuple[float, float], right: tuple[float, float]) -> float:
    """Angle of the eye line against the horizontal, in degrees.

    Defined as arctan of the vertical offset over the horizontal
    separation of the eye centers; 0 when the eyes are level. The caller
    orders the eyes so that left.x < right.x.
    """
    dx = right[0] - left[0]
    dy = right[1] - left[1]
    if dx <= 0:
        raise ValueError(
            f"degenerate eye geometry: horizontal separation {dx} must be positive")
    return math.degrees(math.atan2(dy, dx))


def classify_state(run_length: float, pitch_flag: int,
                   cfg: TrackerConfig) -> DrowsinessLevel:
    """Three-rule level decision; a total, disjoint partition.

    Level 2 fires strictly above the closure threshold, so a run equal to
    the threshold still falls through to the pitch rules.
    """
    if run_length < 0:
        raise ValueError("run_length must be >= 0")
    if run_length > cfg.closure_threshold:
        return DrowsinessLevel.ALERT
    if pitch_flag:
        return DrowsinessLevel.WARNING
    return DrowsinessLevel.NORMAL


def perclos(closed_flags) -> PerclosResult:
    """Fraction of closed frames in a trailing window of per-frame flags."""
    flags = list(closed_flags)
    if not flags:
        return PerclosResult(0.0, False)
    return PerclosResult(sum(1 for c in flags if c) / len(flags), True)


class DrowsinessTracker:
    """Per-stream state machine; strictly sequential, one per stream."""

    def __init__(self, cfg: TrackerConfig | None = None):
        self.cfg = cfg or TrackerConfig()
        self._last_t: Optional[float] = None
        self._run = 0.0
        self._pitch: Optional[float] = None  # last value from an open frame
        self._level = DrowsinessLevel.NORMAL
        self._ring: deque[tuple[float, bool]] = deque()  # (t, closed)

    @property
    def level(self) -> DrowsinessLevel:
        return self._level

    def update(self, obs: EyeObservation) -> tuple[FrameAssessment, Optional[AlertEvent]]:
        if self._last_t is not None and obs.timestamp <= self._last_t:
            raise ValueError(
                f"non-monotonic timestamp {obs.timestamp} after {self._last_t}")
        gap = 0.0 if self._last_t is None else obs.timestamp - self._last_t
        self._last_t = obs.timestamp

        if obs.eyes_open:
            self._run = 0.0
            self._pitch = compute_pitch(obs.left, obs.right)
        else:
            self._run += gap

        self._ring.append((obs.timestamp, not obs.eyes_open))
        horizon = obs.timestamp - self.cfg.perclos_window
        while self._ring and self._ring[0][0] < horizon:
            self._ring.popleft()
        frac, _ = perclos(closed for _, closed in self._ring)

        pitch_flag = int(self._pitch is not None
                         and abs(self._pitch) > self.cfg.pitch_tolerance)
        new_level = classify_state(self._run, pitch_flag, self.cfg)
        alert = None
        if new_level != self._level:
            alert = AlertEvent(obs.timestamp, self._level, new_level,
                               _ALERT_MESSAGES[int(new_level)])
        self._level = new_level

        assessment = FrameAssessment(
            frame=obs.frame,
            timestamp=obs.timestamp,
            eyes_open=obs.eyes_open,
            run_length=self._run,
            perclos=frac,
            pitch=self._pitch if obs.eyes_open else None,
            pitch_flag=pitch_flag,
            level=new_level,
        )
        return assessment, alert


def assessment_record(a: FrameAssessment) -> str:
    """One line-delimited UTF-8 record; field names and order are fixed."""
    return json.dumps({
        "frame": a.frame,
        "t": a.timestamp,
        "eyes_open": a.eyes_open,
        "run_s": a.run_length,
        "perclos": a.perclos,
        "pitch_deg": a.pitch,
        "level": int(a.level),
    })


def alert_record(e: AlertEvent) -> str:
    return json.dumps({
        "t": e.timestamp,
        "from": int(e.previous),
        "to": int(e.level),
        "message": e.message,
    })
