"""Record a subject-role protocol transcript from a real simulated session.

Regenerates tests/fixtures/transcript.json. Run from the repo root with the
engine package installed:

    python frontend/scripts/record_transcript.py
"""
import json
import random
from pathlib import Path

from pitchtrace import Session, SessionConfig
from pitchtrace.runner import SessionRunner
from pitchtrace.server import SUBJECT_TYPES
from pitchtrace.session import SIMULATED_CLOCK_ANCHOR, entry_from_dict
from pitchtrace.simulate import flat_tone
from pitchtrace.audio import SimulatedCapture

FIXTURE = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "transcript.json"

TASKS = [
    {"id": "sustain", "pattern": "sustain", "cents": 0.0, "duration_ms": 2000.0},
    {"id": "ramp", "pattern": "ramp", "cents": 300.0, "duration_ms": 2000.0},
]


def pick_seed() -> int:
    # first two draws must cover both tasks in order: sustain, then ramp
    for seed in range(1000):
        rng = random.Random(seed)
        if rng.choice([0, 1]) == 0 and rng.choice([0, 1]) == 1:
            return seed
    raise RuntimeError("no seed found")


def main() -> None:
    seed = pick_seed()
    cfg = SessionConfig(
        subject_id="FIX",
        countdown_s=1.0,
        delay_base_ms=200.0,
        n_trials=2,
        seed=seed,
        playback_enabled=True,
        log_root="/tmp/transcript_fixture",
    )
    entries = [entry_from_dict(doc, cfg.cents_default) for doc in TASKS]
    session = Session(cfg, entries, clock_anchor=SIMULATED_CLOCK_ANCHOR)

    transcript = []
    seq = 0

    def record(msg):
        nonlocal seq
        if msg.get("type") not in SUBJECT_TYPES:
            return
        framed = dict(msg)
        framed["v"] = 1
        framed["seq"] = seq
        seq += 1
        transcript.append(framed)

    session.hub.subscribe(record)
    # a flat 200 Hz voice: perfect on the sustain trial, increasingly off on
    # the ramp (out of band once the target leaves +/-50 cents -> arrows)
    voice = flat_tone(200.0, 30.0, cfg.sample_rate_hz)
    source = SimulatedCapture(voice, sample_rate_hz=cfg.sample_rate_hz)
    SessionRunner(session, source, stop_when_done=True).run()

    FIXTURE.parent.mkdir(parents=True, exist_ok=True)
    FIXTURE.write_text(json.dumps({"seed": seed, "messages": transcript}, indent=1))
    kinds = {}
    for m in transcript:
        kinds[m["type"]] = kinds.get(m["type"], 0) + 1
    print(f"{len(transcript)} messages -> {FIXTURE}")
    print(kinds)
    print("results:", [(r.task_id, round(r.score, 3), r.category.value)
                       for r in session.results])


if __name__ == "__main__":
    main()
