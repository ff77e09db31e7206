"""Real-time fundamental frequency estimation (YIN).

One estimate per detection hop: difference function over the analysis
window, cumulative mean normalization, absolute threshold with descent to
the local minimum, and parabolic refinement of the chosen lag. A frame is
voiced only when the normalized difference at the chosen lag clears the
threshold and the refined frequency falls inside the configured band.

All timestamps are derived from cumulative sample count, never the wall
clock, so a recorded session replays bit-for-bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

__all__ = [
    "PitchConfig",
    "AnalysisFrame",
    "PitchFrame",
    "compute_cmndf",
    "yin_estimate",
    "FrameStream",
]

ACCEPTED_SAMPLE_RATES = (16000, 22050, 44100, 48000)
ACCEPTED_HOPS_MS = (25.0, 50.0)


@dataclass(frozen=True)
class PitchConfig:
    """Detection parameters, fixed for the lifetime of a session."""

    sample_rate_hz: int = 44100
    window_size: int = 2048
    hop_ms: float = 50.0
    f_min_hz: float = 60.0
    f_max_hz: float = 600.0
    yin_threshold: float = 0.15
    rms_gate: float = 0.01

    def validate(self) -> None:
        if self.sample_rate_hz not in ACCEPTED_SAMPLE_RATES:
            raise ValueError(
                f"sample rate {self.sample_rate_hz} not in {ACCEPTED_SAMPLE_RATES}"
            )
        if float(self.hop_ms) not in ACCEPTED_HOPS_MS:
            raise ValueError(f"hop_ms must be 25 or 50, got {self.hop_ms}")
        if not 0.0 < self.f_min_hz < self.f_max_hz:
            raise ValueError(
                f"need 0 < f_min < f_max, got {self.f_min_hz}, {self.f_max_hz}"
            )
        if not 0.0 < self.yin_threshold < 1.0:
            raise ValueError(f"yin_threshold out of (0,1): {self.yin_threshold}")
        if self.rms_gate < 0:
            raise ValueError(f"rms_gate must be >= 0, got {self.rms_gate}")
        # at least two periods of the lowest detectable pitch must fit
        min_window = 2.0 * self.sample_rate_hz / self.f_min_hz
        if self.window_size < min_window:
            raise ValueError(
                f"window_size {self.window_size} < 2*rate/f_min ({min_window:.0f})"
            )

    @property
    def hop_samples(self) -> float:
        """Exact (possibly fractional) samples per hop."""
        return self.sample_rate_hz * self.hop_ms / 1000.0

    @property
    def lag_min(self) -> int:
        return max(2, int(np.ceil(self.sample_rate_hz / self.f_max_hz)))

    @property
    def lag_max(self) -> int:
        return min(self.window_size - 1, int(self.sample_rate_hz / self.f_min_hz))


@dataclass(frozen=True)
class AnalysisFrame:
    """One analysis window of normalized samples."""

    samples: np.ndarray
    start_time_ms: float
    sample_rate_hz: int


@dataclass(frozen=True)
class PitchFrame:
    """One timestamped pitch measurement.

    f0_hz is None for unvoiced frames; aperiodicity (the normalized
    difference value at the chosen lag) is present exactly when f0_hz is.
    """

    time_ms: float
    f0_hz: float | None
    aperiodicity: float | None
    rms: float

    @property
    def voiced(self) -> bool:
        return self.f0_hz is not None


def compute_cmndf(frame: AnalysisFrame, max_lag: int) -> np.ndarray:
    """Cumulative-mean-normalized difference function d'(tau), tau in [0, max_lag].

    The raw difference function d(tau) = sum_j (x[j] - x[j+tau])^2 over
    j in [0, W-tau) is evaluated through an FFT autocorrelation plus
    cumulative energy terms, then normalized by its own running mean:

        d'(0) = 1,   d'(tau) = d(tau) * tau / sum_{1..tau} d(j)

    Zero-energy frames (0/0) normalize to 1 so silence never looks periodic.
    """
    x = np.asarray(frame.samples, dtype=np.float64)
    w = len(x)
    if max_lag >= w:
        raise ValueError(f"max_lag {max_lag} must be < window size {w}")
    if max_lag < 0:
        raise ValueError(f"max_lag must be >= 0, got {max_lag}")

    # linear autocorrelation c(tau) = sum_j x[j]*x[j+tau], zero-padded FFT
    n_fft = 1 << int(2 * w - 1).bit_length()
    spec = np.fft.rfft(x, n=n_fft)
    acf = np.fft.irfft(spec * np.conj(spec), n=n_fft)[: max_lag + 1]

    energy = np.concatenate(([0.0], np.cumsum(x * x)))
    taus = np.arange(max_lag + 1)
    # d(tau) = E(x[0:W-tau]) + E(x[tau:W]) - 2 c(tau); clamp FFT round-off
    diff = energy[w - taus] + (energy[w] - energy[taus]) - 2.0 * acf
    diff = np.maximum(diff, 0.0)

    out = np.ones_like(diff)
    running = np.cumsum(diff[1:])
    nonzero = running > 0.0
    out[1:][nonzero] = diff[1:][nonzero] * taus[1:][nonzero] / running[nonzero]
    return out


def _parabolic_refine(values: np.ndarray, idx: int) -> float:
    """Sub-sample minimum location from the three points around idx."""
    if idx <= 0 or idx >= len(values) - 1:
        return float(idx)
    y0, y1, y2 = values[idx - 1], values[idx], values[idx + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0.0:
        return float(idx)
    return idx + 0.5 * (y0 - y2) / denom


def yin_estimate(frame: AnalysisFrame, cfg: PitchConfig) -> PitchFrame:
    """Estimate f0 for one frame; unvoiced is a value, not an error."""
    x = np.asarray(frame.samples, dtype=np.float64)
    if len(x) != cfg.window_size:
        raise ValueError(f"frame has {len(x)} samples, expected {cfg.window_size}")

    rms = float(np.sqrt(np.mean(x * x)))
    rms = min(rms, 1.0)
    if rms < cfg.rms_gate:
        return PitchFrame(frame.start_time_ms, None, None, rms)

    lag_min, lag_max = cfg.lag_min, cfg.lag_max
    cmndf = compute_cmndf(frame, lag_max)

    tau = 0
    for cand in range(lag_min, lag_max + 1):
        if cmndf[cand] < cfg.yin_threshold:
            tau = cand
            while tau + 1 <= lag_max and cmndf[tau + 1] < cmndf[tau]:
                tau += 1
            break
    if tau == 0:
        tau = lag_min + int(np.argmin(cmndf[lag_min : lag_max + 1]))

    aperiodicity = float(cmndf[tau])
    tau_refined = _parabolic_refine(cmndf, tau)
    f0 = cfg.sample_rate_hz / tau_refined

    voiced = aperiodicity < cfg.yin_threshold and cfg.f_min_hz <= f0 <= cfg.f_max_hz
    if not voiced:
        return PitchFrame(frame.start_time_ms, None, None, rms)
    return PitchFrame(frame.start_time_ms, float(f0), aperiodicity, rms)


class FrameStream:
    """Chop an append-only sample stream into overlapping analysis frames.

    Frame k starts at round(k * hop_samples) and is emitted as soon as its
    window is filled; its timestamp is exactly k * hop_ms. Gaps must be
    zero-filled upstream so the sample clock stays contiguous.
    """

    def __init__(self, cfg: PitchConfig):
        cfg.validate()
        self.cfg = cfg
        self._buf = np.empty(0, dtype=np.float64)
        self._buf_start = 0  # absolute index of _buf[0]
        self._next_frame = 0

    @property
    def samples_consumed(self) -> int:
        return self._buf_start + len(self._buf)

    def _frame_start(self, k: int) -> int:
        return int(round(k * self.cfg.hop_samples))

    def push(self, samples: np.ndarray) -> list[AnalysisFrame]:
        """Append samples; return every newly completed frame in order."""
        samples = np.asarray(samples, dtype=np.float64)
        if len(samples):
            self._buf = np.concatenate([self._buf, samples])
        out: list[AnalysisFrame] = []
        w = self.cfg.window_size
        total = self._buf_start + len(self._buf)
        while self._frame_start(self._next_frame) + w <= total:
            k = self._next_frame
            start = self._frame_start(k)
            lo = start - self._buf_start
            window = self._buf[lo : lo + w]
            out.append(
                AnalysisFrame(
                    samples=window.copy(),
                    start_time_ms=k * self.cfg.hop_ms,
                    sample_rate_hz=self.cfg.sample_rate_hz,
                )
            )
            self._next_frame += 1
        # drop samples no future frame can need (never past data already held:
        # with hop > window the next frame may start beyond what has arrived)
        keep_from = min(self._frame_start(self._next_frame), total)
        drop = keep_from - self._buf_start
        if drop > 0:
            self._buf = self._buf[drop:]
            self._buf_start = keep_from
        return out

    def iter_frames(self, chunks: Iterable[np.ndarray]) -> Iterator[AnalysisFrame]:
        """Convenience for offline runs over a chunk iterable."""
        for chunk in chunks:
            yield from self.push(chunk)
