"""Cents arithmetic and per-trial pitch target contours.

A task is described in cents relative to a base pitch measured at trial
time, so the same task works for any voice. Contours are realized as one
target point per detection hop plus symmetric grading boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

__all__ = [
    "Pattern",
    "TaskSpec",
    "GradingBand",
    "TargetContour",
    "cents_to_ratio",
    "ratio_to_cents",
    "shift_pitch",
    "generate_contour",
    "invert_task",
]


class Pattern(Enum):
    SUSTAIN = "sustain"
    STEP = "step"
    RAMP = "ramp"
    PEAK = "peak"
    OSCILLATE = "oscillate"


def cents_to_ratio(cents: float) -> float:
    """Frequency ratio for a pitch interval in cents: 2**(cents/1200)."""
    return 2.0 ** (cents / 1200.0)


def ratio_to_cents(ratio: float) -> float:
    """Inverse of cents_to_ratio; ratio must be > 0."""
    if ratio <= 0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    return 1200.0 * math.log2(ratio)


def shift_pitch(base_hz: float, cents: float) -> float:
    """Shift a frequency by a signed number of cents."""
    if base_hz <= 0:
        raise ValueError(f"base_hz must be positive, got {base_hz}")
    return base_hz * cents_to_ratio(cents)


@dataclass(frozen=True)
class TaskSpec:
    """One requested trial: what shape to sing and how far to move.

    step_fraction and peak_fraction set where the step jump / peak apex
    falls within the task; they matter only for the patterns that use them.
    """

    id: str
    pattern: Pattern
    cents: float
    duration_ms: float
    inverted: bool = False
    step_fraction: float = 1.0 / 3.0
    peak_fraction: float = 0.5

    def validate(self, hop_ms: float) -> None:
        if self.duration_ms <= 0:
            raise ValueError(f"duration_ms must be positive, got {self.duration_ms}")
        n = self.duration_ms / hop_ms
        if abs(n - round(n)) > 1e-9:
            raise ValueError(
                f"duration_ms {self.duration_ms} is not a multiple of hop {hop_ms}"
            )
        if self.cents == 0 and self.pattern is not Pattern.SUSTAIN:
            raise ValueError(f"cents 0 only valid for sustain, got {self.pattern}")
        if not 0.0 < self.step_fraction < 1.0:
            raise ValueError(f"step_fraction out of (0,1): {self.step_fraction}")
        if not 0.0 < self.peak_fraction < 1.0:
            raise ValueError(f"peak_fraction out of (0,1): {self.peak_fraction}")

    @property
    def effective_cents(self) -> float:
        return -self.cents if self.inverted else self.cents


def invert_task(task: TaskSpec) -> TaskSpec:
    """Toggle the inversion flag (an up task becomes a down task)."""
    return replace(task, inverted=not task.inverted)


@dataclass(frozen=True)
class GradingBand:
    """Half-width, in cents, of the in-target band around the contour."""

    half_width_cents: float = 50.0

    def __post_init__(self) -> None:
        if self.half_width_cents <= 0:
            raise ValueError(
                f"half_width_cents must be positive, got {self.half_width_cents}"
            )


@dataclass(frozen=True)
class TargetContour:
    """Realized per-trial target: one point per hop plus grading boundaries.

    Times are milliseconds relative to target onset, spanning
    [0, duration_ms] inclusive. change_times_ms marks segment junctions
    where the target's cents trajectory changes (used by sparse guidance).
    """

    base_hz: float
    hop_ms: float
    times_ms: tuple[float, ...]
    target_hz: tuple[float, ...]
    upper_hz: tuple[float, ...]
    lower_hz: tuple[float, ...]
    change_times_ms: tuple[float, ...]
    band: GradingBand = field(default_factory=GradingBand)

    @property
    def duration_ms(self) -> float:
        return self.times_ms[-1]

    def index_at(self, time_ms: float) -> int:
        """Contour point index for a relative time; errors outside the span."""
        if not 0.0 <= time_ms <= self.duration_ms + 1e-9:
            raise ValueError(
                f"time {time_ms} ms outside contour span [0, {self.duration_ms}]"
            )
        i = round(time_ms / self.hop_ms)
        return min(i, len(self.times_ms) - 1)


def _pattern_cents(task: TaskSpec, t_frac: float) -> float:
    """Target offset in cents at normalized time t_frac in [0, 1]."""
    c = task.effective_cents
    p = task.pattern
    if p is Pattern.SUSTAIN:
        return 0.0
    if p is Pattern.STEP:
        return 0.0 if t_frac < task.step_fraction else c
    if p is Pattern.RAMP:
        return c * t_frac
    if p is Pattern.PEAK:
        apex = task.peak_fraction
        if t_frac <= apex:
            return c * (t_frac / apex)
        return c * (1.0 - t_frac) / (1.0 - apex)
    if p is Pattern.OSCILLATE:
        return c * math.sin(2.0 * math.pi * t_frac)
    raise ValueError(f"unknown pattern {p}")


def _change_times(task: TaskSpec) -> tuple[float, ...]:
    """Segment junctions where the target cents trajectory changes.

    Flat patterns have none; gliding patterns change at onset and at each
    direction reversal.
    """
    d = task.duration_ms
    p = task.pattern
    if p is Pattern.SUSTAIN:
        return ()
    if p is Pattern.STEP:
        return (task.step_fraction * d,)
    if p is Pattern.RAMP:
        return (0.0,)
    if p is Pattern.PEAK:
        return (0.0, task.peak_fraction * d)
    if p is Pattern.OSCILLATE:
        return (0.0, 0.25 * d, 0.75 * d)
    raise ValueError(f"unknown pattern {p}")


def generate_contour(
    task: TaskSpec,
    base_hz: float,
    band: GradingBand,
    hop_ms: float,
) -> TargetContour:
    """Realize a task against a measured base pitch.

    Points are spaced exactly hop_ms apart over [0, duration_ms]; the
    boundaries sit a constant band.half_width_cents above and below the
    target, so the band is symmetric in log frequency.
    """
    if base_hz <= 0:
        raise ValueError(f"base_hz must be positive, got {base_hz}")
    task.validate(hop_ms)

    n_points = round(task.duration_ms / hop_ms) + 1
    up = cents_to_ratio(band.half_width_cents)
    times = []
    target = []
    for i in range(n_points):
        t = i * hop_ms
        t_frac = t / task.duration_ms
        hz = shift_pitch(base_hz, _pattern_cents(task, t_frac))
        times.append(t)
        target.append(hz)
    return TargetContour(
        base_hz=base_hz,
        hop_ms=hop_ms,
        times_ms=tuple(times),
        target_hz=tuple(target),
        upper_hz=tuple(hz * up for hz in target),
        lower_hz=tuple(hz / up for hz in target),
        change_times_ms=_change_times(task),
        band=band,
    )
