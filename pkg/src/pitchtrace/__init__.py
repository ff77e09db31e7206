"""pitchtrace: real-time guided vocal pitch tracking.

A YIN pitch engine, cents-defined target contours with grading bands,
trial scoring with emoticon feedback and guidance arrows, a frame-driven
session state machine with structured logging, TTL sync markers, and a
WebSocket control/telemetry protocol for operator and subject UIs.
"""
from .analyze import reanalyze
from .audio import (
    DeviceCapture,
    SampleBlock,
    SimulatedCapture,
    WavWriter,
    playback_span,
    read_wav,
    repair_wav_header,
    write_wav,
)
from .grading import (
    ArrowDirection,
    Feedback,
    GradingConfig,
    GuidanceArrow,
    TrialResult,
    dense_guidance,
    feedback_category,
    in_boundary,
    score_trial,
    sparse_guidance,
)
from .logs import EventKind, EventRecord, SessionLog, TaskRecord, open_session_folder
from .pitch import (
    AnalysisFrame,
    FrameStream,
    PitchConfig,
    PitchFrame,
    compute_cmndf,
    yin_estimate,
)
from .runner import SessionRunner
from .session import (
    BaselineError,
    GuidanceMode,
    NoTaskError,
    Session,
    SessionConfig,
    SessionError,
    TaskQueueEntry,
    TelemetryHub,
    TrialPhase,
    capture_baseline,
    next_task,
)
from .targets import (
    GradingBand,
    Pattern,
    TargetContour,
    TaskSpec,
    cents_to_ratio,
    generate_contour,
    invert_task,
    ratio_to_cents,
    shift_pitch,
)
from .ttl import TTL_CODES, TtlMarker, TtlSender

__version__ = "0.1.0"
