"""
Real-time pitch detection on synthetic voices
=============================================

Synthesizes a few test tones, runs the YIN detector over them frame by
frame, and prints what the engine would stream to a subject display.
"""
import numpy as np

from pitchtrace import FrameStream, PitchConfig, yin_estimate
from pitchtrace.simulate import noisy_sine, sine

RATE = 44100
cfg = PitchConfig(sample_rate_hz=RATE, hop_ms=50.0)
cfg.validate()

print(f"window {cfg.window_size} samples, hop {cfg.hop_ms} ms, "
      f"search band {cfg.f_min_hz}-{cfg.f_max_hz} Hz, "
      f"threshold {cfg.yin_threshold}\n")

# --- a clean tone, a noisy tone, and silence -----------------------------
second = {
    "clean 220 Hz": sine(220.0, RATE, RATE, amplitude=0.6),
    "noisy 180 Hz": noisy_sine(180.0, RATE, RATE, noise_amplitude=0.1, seed=1),
    "silence": np.zeros(RATE),
}

for label, samples in second.items():
    stream = FrameStream(cfg)
    frames = [yin_estimate(f, cfg) for f in stream.push(samples)]
    voiced = [f for f in frames if f.voiced]
    print(f"{label}: {len(frames)} hops, {len(voiced)} voiced")
    for pf in frames[:4]:
        f0 = f"{pf.f0_hz:7.2f} Hz" if pf.voiced else "   unvoiced"
        print(f"   t={pf.time_ms:6.0f} ms  {f0}  rms={pf.rms:.3f}")
    if voiced:
        estimates = np.array([f.f0_hz for f in voiced])
        print(f"   mean {estimates.mean():.3f} Hz, "
              f"spread {estimates.max() - estimates.min():.4f} Hz\n")
    else:
        print()

# --- a pitch glide, tracked hop by hop -----------------------------------
print("glide 150 -> 300 Hz over two seconds:")
n = 2 * RATE
freqs = np.linspace(150.0, 300.0, n)
phase = 2 * np.pi * np.cumsum(freqs) / RATE
glide = 0.5 * np.sin(phase)
stream = FrameStream(cfg)
for frame in stream.push(glide):
    pf = yin_estimate(frame, cfg)
    if pf.voiced and int(pf.time_ms) % 250 == 0:
        bar = "#" * int((pf.f0_hz - 140) / 5)
        print(f"   t={pf.time_ms:6.0f} ms  {pf.f0_hz:7.2f} Hz  {bar}")
