"""Audio capture, session WAV persistence, and playback spans.

Capture is block-oriented: each block carries its absolute start sample
index so downstream consumers can detect dropouts instead of silently
losing time. The session WAV (PCM16 mono) is written incrementally and the
header is patched on finalize; a recovery helper re-patches the length of
a file left behind by a killed process.
"""
from __future__ import annotations

import os
import queue
import struct
import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

__all__ = [
    "SampleBlock",
    "WavWriter",
    "read_wav",
    "write_wav",
    "repair_wav_header",
    "SimulatedCapture",
    "DeviceCapture",
    "playback_span",
    "ACCEPTED_SAMPLE_RATES",
]

ACCEPTED_SAMPLE_RATES = (16000, 22050, 44100, 48000)

_PCM16_FULL_SCALE = 32767.0
_WAV_HEADER_BYTES = 44


@dataclass(frozen=True)
class SampleBlock:
    """Contiguous capture block; start index counts from capture start."""

    samples: np.ndarray
    start_sample_index: int

    def __len__(self) -> int:
        return len(self.samples)


def float_to_pcm16(x: np.ndarray) -> np.ndarray:
    clipped = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
    return np.round(clipped * _PCM16_FULL_SCALE).astype("<i2")


def pcm16_to_float(raw: np.ndarray) -> np.ndarray:
    return raw.astype(np.float64) / _PCM16_FULL_SCALE


class WavWriter:
    """Incremental RIFF/WAVE PCM16 mono writer with patch-on-finalize header."""

    def __init__(self, path: str | os.PathLike, sample_rate_hz: int):
        self.path = os.fspath(path)
        self.sample_rate_hz = sample_rate_hz
        self.samples_written = 0
        self._fh = open(self.path, "wb")
        self._write_header(0)
        self._fh.flush()

    def _write_header(self, data_bytes: int) -> None:
        rate = self.sample_rate_hz
        self._fh.write(b"RIFF")
        self._fh.write(struct.pack("<I", 36 + data_bytes))
        self._fh.write(b"WAVE")
        self._fh.write(b"fmt ")
        self._fh.write(struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16))
        self._fh.write(b"data")
        self._fh.write(struct.pack("<I", data_bytes))

    def write(self, samples: np.ndarray) -> None:
        if self._fh.closed:
            raise ValueError("writer already finalized")
        pcm = float_to_pcm16(samples)
        self._fh.write(pcm.tobytes())
        self.samples_written += len(pcm)

    def flush(self) -> None:
        if not self._fh.closed:
            self._fh.flush()

    def finalize(self) -> int:
        """Patch the RIFF sizes and close; returns total samples written."""
        if self._fh.closed:
            return self.samples_written
        data_bytes = self.samples_written * 2
        self._fh.seek(4)
        self._fh.write(struct.pack("<I", 36 + data_bytes))
        self._fh.seek(40)
        self._fh.write(struct.pack("<I", data_bytes))
        self._fh.close()
        return self.samples_written

    def __enter__(self) -> "WavWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.finalize()


def repair_wav_header(path: str | os.PathLike) -> int:
    """Re-derive RIFF sizes from the file size (crash recovery); returns samples."""
    size = os.path.getsize(path)
    data_bytes = max(0, size - _WAV_HEADER_BYTES)
    with open(path, "r+b") as fh:
        fh.seek(4)
        fh.write(struct.pack("<I", 36 + data_bytes))
        fh.seek(40)
        fh.write(struct.pack("<I", data_bytes))
    return data_bytes // 2


def write_wav(path: str | os.PathLike, samples: np.ndarray, sample_rate_hz: int) -> None:
    with WavWriter(path, sample_rate_hz) as writer:
        writer.write(samples)


def read_wav(path: str | os.PathLike) -> tuple[int, np.ndarray]:
    """Read a PCM16 WAV as (rate, float64 samples in [-1, 1]); stereo is downmixed."""
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) < 12 or header[:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise ValueError(f"{path} is not a RIFF/WAVE file")
        rate = None
        channels = 1
        bits = 16
        data = None
        while True:
            chunk = fh.read(8)
            if len(chunk) < 8:
                break
            cid, size = chunk[:4], struct.unpack("<I", chunk[4:])[0]
            if cid == b"fmt ":
                fmt = fh.read(size)
                _, channels, rate, _, _, bits = struct.unpack("<HHIIHH", fmt[:16])
            elif cid == b"data":
                data = fh.read(size)
            else:
                fh.seek(size + (size & 1), os.SEEK_CUR)
    if rate is None or data is None:
        raise ValueError(f"{path} is missing fmt or data chunk")
    if bits != 16:
        raise ValueError(f"only PCM16 supported, got {bits}-bit")
    raw = np.frombuffer(data, dtype="<i2")
    if channels > 1:
        raw = raw[: len(raw) - len(raw) % channels].reshape(-1, channels)
        samples = pcm16_to_float(raw).mean(axis=1)
    else:
        samples = pcm16_to_float(raw)
    return rate, samples


class SimulatedCapture:
    """Capture source backed by a WAV file or sample array.

    In realtime mode blocks are paced at the sample rate (for driving a
    live UI); otherwise they are yielded as fast as the consumer pulls,
    which keeps headless runs deterministic and fast.
    """

    def __init__(
        self,
        source: str | os.PathLike | np.ndarray,
        sample_rate_hz: int | None = None,
        block_size: int | None = None,
        realtime: bool = False,
    ):
        if isinstance(source, (str, os.PathLike)):
            rate, samples = read_wav(source)
            if sample_rate_hz is not None and rate != sample_rate_hz:
                raise ValueError(
                    f"WAV rate {rate} does not match configured rate {sample_rate_hz}"
                )
            self.sample_rate_hz = rate
            self._samples = samples
        else:
            if sample_rate_hz is None:
                raise ValueError("sample_rate_hz required for array sources")
            self.sample_rate_hz = sample_rate_hz
            self._samples = np.asarray(source, dtype=np.float64)
        if self.sample_rate_hz not in ACCEPTED_SAMPLE_RATES:
            raise ValueError(
                f"sample rate {self.sample_rate_hz} not in {ACCEPTED_SAMPLE_RATES}"
            )
        self.block_size = block_size or max(1, self.sample_rate_hz // 100)
        self.realtime = realtime
        self._stop = threading.Event()

    def stop(self) -> None:
        self._stop.set()

    def blocks(self) -> Iterator[SampleBlock]:
        n = len(self._samples)
        t0 = time.monotonic()
        for start in range(0, n, self.block_size):
            if self._stop.is_set():
                return
            block = self._samples[start : start + self.block_size]
            if self.realtime:
                due = t0 + (start + len(block)) / self.sample_rate_hz
                delay = due - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            yield SampleBlock(block, start)


class DeviceCapture:
    """Microphone capture via sounddevice (optional dependency).

    The device callback pushes into a bounded queue and never blocks: on
    overflow the newest block is dropped, which shows up downstream as a
    start-index gap.
    """

    def __init__(self, sample_rate_hz: int, block_size: int | None = None,
                 queue_blocks: int = 64):
        if sample_rate_hz not in ACCEPTED_SAMPLE_RATES:
            raise ValueError(
                f"sample rate {sample_rate_hz} not in {ACCEPTED_SAMPLE_RATES}"
            )
        try:
            import sounddevice
        except ImportError as exc:
            raise RuntimeError(
                "live capture needs the 'sounddevice' package "
                "(pip install pitchtrace[audio])"
            ) from exc
        self._sd = sounddevice
        self.sample_rate_hz = sample_rate_hz
        self.block_size = block_size or max(1, sample_rate_hz // 100)
        self._queue: queue.Queue[SampleBlock | None] = queue.Queue(maxsize=queue_blocks)
        self._index = 0
        self.dropped_blocks = 0
        self._stream = None

    def _callback(self, indata, frames, time_info, status) -> None:
        mono = indata[:, 0].astype(np.float64) if indata.ndim > 1 else indata
        block = SampleBlock(mono.copy(), self._index)
        self._index += len(mono)
        try:
            self._queue.put_nowait(block)
        except queue.Full:
            self.dropped_blocks += 1

    def stop(self) -> None:
        if self._stream is not None:
            self._stream.stop()
            self._stream.close()
            self._stream = None
        self._queue.put(None)

    def blocks(self) -> Iterator[SampleBlock]:
        self._stream = self._sd.InputStream(
            samplerate=self.sample_rate_hz,
            blocksize=self.block_size,
            channels=1,
            callback=self._callback,
        )
        self._stream.start()
        while True:
            block = self._queue.get()
            if block is None:
                return
            yield block


def playback_span(
    samples: np.ndarray,
    sample_rate_hz: int,
    start_ms: float,
    end_ms: float,
    player: Callable[[np.ndarray, int], None] | None = None,
) -> np.ndarray:
    """Extract (and optionally play) a recorded span; returns the span samples."""
    if end_ms < start_ms:
        raise ValueError(f"end {end_ms} before start {start_ms}")
    total_ms = 1000.0 * len(samples) / sample_rate_hz
    if start_ms < 0 or end_ms > total_ms + 1e-9:
        raise ValueError(
            f"span [{start_ms}, {end_ms}] outside recording [0, {total_ms:.1f}]"
        )
    lo = int(round(start_ms * sample_rate_hz / 1000.0))
    hi = int(round(end_ms * sample_rate_hz / 1000.0))
    span = samples[lo:hi]
    if player is not None:
        player(span, sample_rate_hz)
    return span
