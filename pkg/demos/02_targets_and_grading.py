"""
Pitch targets, grading bands, and guidance arrows
=================================================

Builds each of the five target patterns against a measured base pitch,
then grades an imperfect simulated singer and shows how dense vs sparse
guidance differ.
"""
import math
import random

from pitchtrace import PitchFrame, cents_to_ratio
from pitchtrace.grading import dense_guidance, feedback_category, score_trial, \
    sparse_guidance, GradingConfig
from pitchtrace.targets import GradingBand, Pattern, TaskSpec, generate_contour

BASE_HZ = 196.0      # the subject's habitual pitch, as the baseline found it
HOP_MS = 50.0
BAND = GradingBand(half_width_cents=50.0)

print(f"base {BASE_HZ} Hz, band +/-{BAND.half_width_cents} cents "
      f"(ratio {cents_to_ratio(BAND.half_width_cents):.5f})\n")

# --- the five patterns ----------------------------------------------------
for pattern in Pattern:
    cents = 0.0 if pattern is Pattern.SUSTAIN else 300.0
    task = TaskSpec(id=pattern.value, pattern=pattern, cents=cents,
                    duration_ms=3000.0)
    c = generate_contour(task, BASE_HZ, BAND, HOP_MS)
    lo, hi = min(c.target_hz), max(c.target_hz)
    changes = ", ".join(f"{t:.0f}" for t in c.change_times_ms) or "none"
    print(f"{pattern.value:9s}: {len(c.target_hz)} points, "
          f"{lo:.1f}-{hi:.1f} Hz, change times [{changes}] ms")

# --- grade a wobbly singer against the step target ------------------------
task = TaskSpec(id="step", pattern=Pattern.STEP, cents=300.0, duration_ms=3000.0)
contour = generate_contour(task, BASE_HZ, BAND, HOP_MS)

rng = random.Random(4)
frames = []
for i in range(60):
    t = i * HOP_MS
    target = contour.target_hz[i]
    # sings mostly on target, drifts sharp around the step, drops out twice
    wobble = cents_to_ratio(rng.gauss(0, 20))
    late = cents_to_ratio(80) if 1000 <= t < 1250 else 1.0
    if i in (40, 41):
        frames.append(PitchFrame(t, None, None, 0.001))
    else:
        frames.append(PitchFrame(t, target * wobble * late, 0.05, 0.3))

score = score_trial(frames, contour)
category = feedback_category(score, GradingConfig())
dense = dense_guidance(frames, contour)
sparse = sparse_guidance(frames, contour)

print(f"\nwobbly singer on the step task:")
print(f"   score {score:.2f} -> {category.value}")
print(f"   dense guidance: {len(dense)} arrows")
print(f"   sparse guidance: {len(sparse)} arrows "
      f"(only near the step at {contour.change_times_ms[0]:.0f} ms)")
for arrow in sparse:
    gap = 1200 * math.log2(arrow.to_hz / arrow.from_hz)
    print(f"      t={arrow.time_ms:6.0f} ms  {arrow.direction.value:4s} "
          f"{abs(gap):5.1f} cents toward target")
