"""
A complete experiment session, fully simulated
==============================================

Runs an entire five-trial experiment with a simulated subject who follows
the targets, then replays the recorded WAV deterministically and verifies
the logs with the offline re-analysis oracle.

Everything lands in ./demo_sessions/: the session WAV, pitch.csv,
events.jsonl, tasks.jsonl, and config.json.
"""
import json
from pathlib import Path

from pitchtrace import Session, SessionConfig, SimulatedCapture
from pitchtrace.analyze import format_report, reanalyze
from pitchtrace.cli import DEFAULT_TASK_DOCS
from pitchtrace.runner import SessionRunner
from pitchtrace.session import SIMULATED_CLOCK_ANCHOR, entry_from_dict
from pitchtrace.simulate import TrackingSubject

ROOT = Path("demo_sessions")

cfg = SessionConfig(
    subject_id="DEMO",
    n_trials=5,
    countdown_s=2.0,
    delay_base_ms=800.0,
    delay_jitter_ms=400.0,
    playback_enabled=True,
    seed=2026,
    log_root=str(ROOT),
)
entries = [entry_from_dict(doc, cfg.cents_default) for doc in DEFAULT_TASK_DOCS]

# --- run the closed-loop session ------------------------------------------
session = Session(cfg, entries, clock_anchor=SIMULATED_CLOCK_ANCHOR)
subject = TrackingSubject(session, rest_hz=200.0, max_seconds=240)
summary = SessionRunner(session, subject, stop_when_done=True).run()

print(f"session folder: {session.folder}\n")
print("trial results:")
for r in session.results:
    print(f"   {r.task_id:9s} score {r.score:.3f} -> {r.category.value}")
print(f"\nsummary: {json.dumps(summary['per_task'], indent=2)}")

# --- the logs tell the whole story ----------------------------------------
events = [json.loads(line) for line in
          (session.folder / "events.jsonl").read_text().splitlines()]
print(f"\n{len(events)} events; first trial timeline:")
for e in events[2:14]:
    print(f"   {e['time_ms']:>7} ms  {e['kind']:15s} "
          f"{ {k: v for k, v in e['payload'].items() if k in ('task_id', 'base_hz', 'score', 'remaining_s')} }")

# --- deterministic replay from the recorded WAV ---------------------------
wav = next(session.folder.glob("*.wav"))
replay = Session(
    SessionConfig.from_dict({**cfg.to_dict(), "log_root": str(ROOT / "replay")}),
    [entry_from_dict(doc, cfg.cents_default) for doc in DEFAULT_TASK_DOCS],
    clock_anchor=SIMULATED_CLOCK_ANCHOR,
)
SessionRunner(replay, SimulatedCapture(wav, sample_rate_hz=cfg.sample_rate_hz),
              stop_when_done=True).run()
identical = (
    (session.folder / "pitch.csv").read_bytes()
    == (replay.folder / "pitch.csv").read_bytes()
)
print(f"\nreplay of the session WAV reproduces pitch.csv byte-for-byte: "
      f"{identical}")

# --- offline oracle --------------------------------------------------------
print("\noffline re-analysis of the recorded session:")
print(format_report(reanalyze(session.folder)))
