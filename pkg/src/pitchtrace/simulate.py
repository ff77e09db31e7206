"""Deterministic voice synthesis for demos, simulated sessions, and tests.

The TrackingSubject closes the loop: it reads the live session state and
sings whatever the active contour asks for (resting on a habitual pitch
otherwise), so a full experiment can run end to end with no microphone and
no human. Recording such a run yields a WAV that, replayed through
--simulate with the same config and seed, reproduces the session exactly.
"""
from __future__ import annotations

from typing import Iterator

import numpy as np

from .audio import SampleBlock, write_wav
from .session import Session

__all__ = [
    "sine",
    "noisy_sine",
    "flat_tone",
    "PhaseVoice",
    "TrackingSubject",
    "write_flat_tone_wav",
]


def sine(freq_hz: float, n_samples: int, sample_rate_hz: int,
         amplitude: float = 0.5, phase0: float = 0.0) -> np.ndarray:
    t = np.arange(n_samples) / sample_rate_hz
    return amplitude * np.sin(2.0 * np.pi * freq_hz * t + phase0)


def noisy_sine(freq_hz: float, n_samples: int, sample_rate_hz: int,
               noise_amplitude: float, seed: int,
               amplitude: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    clean = sine(freq_hz, n_samples, sample_rate_hz, amplitude)
    return clean + noise_amplitude * rng.standard_normal(n_samples)


def flat_tone(freq_hz: float, seconds: float, sample_rate_hz: int,
              amplitude: float = 0.5) -> np.ndarray:
    return sine(freq_hz, int(round(seconds * sample_rate_hz)), sample_rate_hz,
                amplitude)


def write_flat_tone_wav(path, freq_hz: float, seconds: float,
                        sample_rate_hz: int, amplitude: float = 0.5) -> None:
    write_wav(path, flat_tone(freq_hz, seconds, sample_rate_hz, amplitude),
              sample_rate_hz)


class PhaseVoice:
    """Phase-continuous oscillator; frequency may change every sample."""

    def __init__(self, sample_rate_hz: int, amplitude: float = 0.5):
        self.sample_rate_hz = sample_rate_hz
        self.amplitude = amplitude
        self._phase = 0.0

    def render(self, freqs_hz: np.ndarray) -> np.ndarray:
        inc = 2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / self.sample_rate_hz
        phases = self._phase + np.cumsum(inc)
        self._phase = float(phases[-1]) % (2.0 * np.pi)
        return self.amplitude * np.sin(phases)


class TrackingSubject:
    """Simulated subject that follows the session's active pitch target.

    Audio is produced pull-style, one small block at a time, from the
    session state as of the previous block; because every contour is
    published with its onset the synthesis is exact from the first hop
    after target onset. Outside tracking the subject holds rest_hz.

    The target is sampled zero-order-hold on the contour's hop grid, so a
    clean analysis window sees a pure tone at exactly the graded value.
    """

    def __init__(
        self,
        session: Session,
        rest_hz: float = 200.0,
        amplitude: float = 0.5,
        block_size: int | None = None,
        max_seconds: float = 600.0,
    ):
        self.session = session
        self.rest_hz = rest_hz
        self.sample_rate_hz = session.cfg.sample_rate_hz
        self.block_size = block_size or max(1, self.sample_rate_hz // 100)
        self.max_samples = int(max_seconds * self.sample_rate_hz)
        self._voice = PhaseVoice(self.sample_rate_hz, amplitude)

    def _block_freqs(self, start: int, n: int) -> np.ndarray:
        freqs = np.full(n, self.rest_hz)
        active = self.session.active_contour()
        if active is None:
            return freqs
        contour, onset_ms = active
        t_ms = 1000.0 * np.arange(start, start + n) / self.sample_rate_hz
        rel = t_ms - onset_ms
        in_span = (rel >= 0.0) & (rel <= contour.duration_ms)
        if np.any(in_span):
            idx = np.minimum(
                (rel[in_span] // contour.hop_ms).astype(int),
                len(contour.target_hz) - 1,
            )
            freqs[in_span] = np.asarray(contour.target_hz)[idx]
        return freqs

    def blocks(self) -> Iterator[SampleBlock]:
        start = 0
        while start < self.max_samples:
            freqs = self._block_freqs(start, self.block_size)
            raw = self._voice.render(freqs)
            # emit on the PCM16 grid so the session WAV is a lossless
            # transcript: replaying it reproduces this run bit for bit
            samples = np.round(np.clip(raw, -1.0, 1.0) * 32767.0) / 32767.0
            yield SampleBlock(samples, start)
            start += self.block_size
