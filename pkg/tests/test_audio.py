"""WAV persistence, capture sources, and playback span extraction."""
import shutil
import struct

import numpy as np
import pytest

from pitchtrace.audio import (
    SampleBlock,
    SimulatedCapture,
    WavWriter,
    float_to_pcm16,
    playback_span,
    read_wav,
    repair_wav_header,
    write_wav,
)
from pitchtrace.simulate import sine


class TestPcm16:
    def test_full_scale_maps_to_32767(self):
        assert float_to_pcm16(np.array([1.0]))[0] == 32767
        assert float_to_pcm16(np.array([-1.0]))[0] == -32767

    def test_clipping(self):
        assert float_to_pcm16(np.array([1.5]))[0] == 32767

    def test_round_trip_within_one_lsb(self, tmp_path):
        rng = np.random.default_rng(0)
        samples = rng.uniform(-1, 1, 5000)
        path = tmp_path / "rt.wav"
        write_wav(path, samples, 44100)
        rate, back = read_wav(path)
        assert rate == 44100
        assert len(back) == len(samples)
        assert np.max(np.abs(back - samples)) <= 1.0 / 32767


class TestWavWriter:
    def test_one_second_16k_data_chunk(self, tmp_path):
        path = tmp_path / "a.wav"
        with WavWriter(path, 16000) as writer:
            writer.write(np.zeros(16000))
        raw = path.read_bytes()
        assert raw[:4] == b"RIFF" and raw[8:12] == b"WAVE"
        data_size = struct.unpack("<I", raw[40:44])[0]
        assert data_size == 32000
        assert struct.unpack("<I", raw[4:8])[0] == 36 + 32000

    def test_header_rate_matches_capture_rate(self, tmp_path):
        path = tmp_path / "b.wav"
        with WavWriter(path, 48000) as writer:
            writer.write(np.zeros(100))
        rate, _ = read_wav(path)
        assert rate == 48000

    def test_incremental_writes_accumulate(self, tmp_path):
        path = tmp_path / "c.wav"
        writer = WavWriter(path, 44100)
        for _ in range(10):
            writer.write(np.zeros(441))
        assert writer.finalize() == 4410
        _, samples = read_wav(path)
        assert len(samples) == 4410

    def test_unfinalized_file_recovered_from_size(self, tmp_path):
        path = tmp_path / "d.wav"
        writer = WavWriter(path, 44100)
        writer.write(sine(220.0, 44100, 44100))
        writer.flush()
        # crash: copy the file before the header patch ever happens
        crashed = tmp_path / "crashed.wav"
        shutil.copy(path, crashed)
        writer.finalize()
        assert repair_wav_header(crashed) == 44100
        rate, samples = read_wav(crashed)
        assert rate == 44100
        assert len(samples) == 44100


class TestSimulatedCapture:
    def test_two_seconds_at_44100(self):
        source = SimulatedCapture(np.zeros(88200), sample_rate_hz=44100)
        blocks = list(source.blocks())
        assert sum(len(b) for b in blocks) == 88200

    def test_blocks_are_contiguous(self):
        source = SimulatedCapture(np.zeros(10000), sample_rate_hz=44100,
                                  block_size=441)
        expected = 0
        for block in source.blocks():
            assert block.start_sample_index == expected
            expected += len(block)

    def test_unsupported_rate_rejected(self):
        with pytest.raises(ValueError):
            SimulatedCapture(np.zeros(100), sample_rate_hz=12345)

    def test_wav_rate_mismatch_rejected(self, tmp_path):
        path = tmp_path / "w.wav"
        write_wav(path, np.zeros(1000), 22050)
        with pytest.raises(ValueError):
            SimulatedCapture(path, sample_rate_hz=44100)

    def test_stop_interrupts_stream(self):
        source = SimulatedCapture(np.zeros(100000), sample_rate_hz=44100,
                                  block_size=100)
        out = []
        for i, block in enumerate(source.blocks()):
            out.append(block)
            if i == 2:
                source.stop()
        assert len(out) == 3


class TestPlaybackSpan:
    def test_one_second_of_five(self):
        samples = np.arange(5 * 1000)
        span = playback_span(samples, 1000, 0.0, 1000.0)
        assert len(span) == 1000
        assert span[0] == 0

    def test_end_before_start_rejected(self):
        with pytest.raises(ValueError):
            playback_span(np.zeros(1000), 1000, 500.0, 100.0)

    def test_span_outside_recording_rejected(self):
        with pytest.raises(ValueError):
            playback_span(np.zeros(1000), 1000, 0.0, 2000.0)

    def test_player_callback_receives_span(self):
        got = []
        playback_span(np.arange(100.0), 1000, 10.0, 20.0,
                      player=lambda s, r: got.append((len(s), r)))
        assert got == [(10, 1000)]


def test_sample_block_length():
    assert len(SampleBlock(np.zeros(42), 0)) == 42
