"""Trial scoring, emoticon feedback, and guidance arrows.

Scoring is the binary in/out-of-band fraction of task duration. Unvoiced
frames count against the score (the task is sustained phonation) but never
produce a guidance arrow.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .pitch import PitchFrame
from .targets import TargetContour

__all__ = [
    "Feedback",
    "ArrowDirection",
    "GradingConfig",
    "GuidanceArrow",
    "TrialResult",
    "in_boundary",
    "score_trial",
    "feedback_category",
    "dense_guidance",
    "sparse_guidance",
]

DEFAULT_GUIDANCE_WINDOW_MS = 150.0


class Feedback(Enum):
    SMILEY = "smiley"
    NEUTRAL = "neutral"
    ANGRY = "angry"


class ArrowDirection(Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class GradingConfig:
    """Score fractions separating the three emoticon categories."""

    smiley_min: float = 0.75
    angry_max: float = 0.25

    def __post_init__(self) -> None:
        if not 0.0 < self.angry_max < self.smiley_min < 1.0:
            raise ValueError(
                f"need 0 < angry_max < smiley_min < 1, "
                f"got {self.angry_max}, {self.smiley_min}"
            )


@dataclass(frozen=True)
class GuidanceArrow:
    """Correction arrow from a detected pitch toward the target."""

    time_ms: float
    from_hz: float
    to_hz: float
    direction: ArrowDirection


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one graded trial; frame times are relative to target onset."""

    task_id: str
    score: float
    category: Feedback
    frames: tuple[PitchFrame, ...]
    arrows: tuple[GuidanceArrow, ...]
    contour: TargetContour
    onset_ms: float = 0.0
    completed_ms: float = 0.0


def in_boundary(frame: PitchFrame, contour: TargetContour) -> bool:
    """True iff the frame is voiced and inside the band at its aligned point."""
    i = contour.index_at(frame.time_ms)
    if not frame.voiced:
        return False
    return contour.lower_hz[i] <= frame.f0_hz <= contour.upper_hz[i]


def score_trial(frames: list[PitchFrame] | tuple[PitchFrame, ...],
                contour: TargetContour) -> float:
    """Fraction of task frames in-boundary.

    The denominator is the full task frame count (duration / hop), so
    missing or unvoiced frames count against the score.
    """
    if not frames:
        raise ValueError("cannot score an empty frame set")
    total = round(contour.duration_ms / contour.hop_ms)
    hits = sum(
        1
        for f in frames
        if 0.0 <= f.time_ms < contour.duration_ms and in_boundary(f, contour)
    )
    return hits / total


def feedback_category(score: float, cfg: GradingConfig) -> Feedback:
    """Map a score fraction to an emoticon; ties fall in the middle band."""
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"score out of [0,1]: {score}")
    if score > cfg.smiley_min:
        return Feedback.SMILEY
    if score < cfg.angry_max:
        return Feedback.ANGRY
    return Feedback.NEUTRAL


def _arrow_for(frame: PitchFrame, contour: TargetContour) -> GuidanceArrow | None:
    if not frame.voiced or in_boundary(frame, contour):
        return None
    target = contour.target_hz[contour.index_at(frame.time_ms)]
    direction = ArrowDirection.UP if target > frame.f0_hz else ArrowDirection.DOWN
    return GuidanceArrow(frame.time_ms, frame.f0_hz, target, direction)


def dense_guidance(frames, contour: TargetContour) -> list[GuidanceArrow]:
    """One arrow per out-of-boundary voiced frame."""
    arrows = []
    for frame in frames:
        arrow = _arrow_for(frame, contour)
        if arrow is not None:
            arrows.append(arrow)
    return arrows


def sparse_guidance(
    frames,
    contour: TargetContour,
    window_ms: float = DEFAULT_GUIDANCE_WINDOW_MS,
) -> list[GuidanceArrow]:
    """Arrows only near the contour's change moments (always a subset of dense)."""
    if not contour.change_times_ms:
        return []
    arrows = []
    for frame in frames:
        near = any(abs(frame.time_ms - t) <= window_ms for t in contour.change_times_ms)
        if not near:
            continue
        arrow = _arrow_for(frame, contour)
        if arrow is not None:
            arrows.append(arrow)
    return arrows
