"""
TTL sync markers and the live WebSocket console
===============================================

Part 1 wires the TTL sender to a virtual serial port (a pty) and shows the
marker bytes external recording hardware would receive.

Part 2 starts the WebSocket server over a simulated microphone, connects a
proctor and a subject client, runs one trial, and prints the subject-side
message stream - the same frames a browser UI renders.
"""
import asyncio
import json
import os
import pty
from pathlib import Path

from pitchtrace import Session, SessionConfig
from pitchtrace.audio import SimulatedCapture
from pitchtrace.runner import SessionRunner
from pitchtrace.server import ControlServer, EngineService
from pitchtrace.session import SIMULATED_CLOCK_ANCHOR, entry_from_dict
from pitchtrace.simulate import TrackingSubject, write_flat_tone_wav
from pitchtrace.ttl import TtlSender

ROOT = Path("demo_sessions")

# --- part 1: TTL markers over a virtual serial port ------------------------
controller, follower = pty.openpty()
cfg = SessionConfig(
    subject_id="TTLDEMO", n_trials=1, countdown_s=1.0, delay_base_ms=200.0,
    log_root=str(ROOT), ttl_port=os.ttyname(follower),
)
entries = [entry_from_dict(
    {"id": "sustain", "pattern": "sustain", "cents": 0.0,
     "duration_ms": 1000.0}, 0.0)]
session = Session(cfg, entries, clock_anchor=SIMULATED_CLOCK_ANCHOR)
SessionRunner(session, TrackingSubject(session, max_seconds=30),
              stop_when_done=True).run()

wire = os.read(controller, 64)
print("TTL code map:", TtlSender.code_map())
print(f"bytes on the wire, in order: {[hex(b) for b in wire]}")
os.close(controller)
os.close(follower)

# --- part 2: the live console protocol -------------------------------------
wav = ROOT / "server_tone.wav"
ROOT.mkdir(exist_ok=True)
write_flat_tone_wav(wav, 210.0, 12.0, 44100)


async def live_demo():
    base = SessionConfig(subject_id="WSDEMO", n_trials=1, countdown_s=1.0,
                         delay_base_ms=200.0, log_root=str(ROOT / "ws"))
    tasks = [{"id": "ramp", "pattern": "ramp", "cents": 200.0,
              "duration_ms": 2000.0}]
    service = EngineService(
        base, tasks,
        lambda c: SimulatedCapture(wav, sample_rate_hz=c.sample_rate_hz),
        clock_anchor=SIMULATED_CLOCK_ANCHOR,
    )
    server = ControlServer(service, "127.0.0.1", 0)
    port = await server.start()
    print(f"\nserver listening on ws://127.0.0.1:{port}")

    from websockets.asyncio.client import connect

    async with connect(f"ws://127.0.0.1:{port}") as proctor, \
            connect(f"ws://127.0.0.1:{port}") as subject:
        for ws, role in ((proctor, "proctor"), (subject, "subject")):
            await ws.send(json.dumps({"type": "hello", "role": role, "seq": 0}))
            print(f"{role}: {json.loads(await ws.recv())['type']}")

        await proctor.send(json.dumps({"type": "start_session", "seq": 1,
                                       "payload": {}}))

        shown = {"phase": 0, "pitch": 0, "contour": 0, "arrow": 0}
        print("\nsubject-side stream (abridged):")
        while True:
            msg = json.loads(await asyncio.wait_for(subject.recv(), 20))
            kind = msg["type"]
            if kind in shown:
                shown[kind] += 1
                if kind != "pitch" or shown["pitch"] % 20 == 1:
                    brief = {k: v for k, v in msg.items()
                             if k in ("phase", "time_ms", "f0_hz",
                                      "remaining_s", "task_id")}
                    print(f"   {kind:12s} {brief}")
            if kind == "trial_result":
                print(f"   trial_result score={msg['score']:.3f} "
                      f"category={msg['category']}")
                break
        await proctor.send(json.dumps({"type": "stop_session", "seq": 2,
                                       "payload": {}}))
        while True:
            msg = json.loads(await proctor.recv())
            if msg.get("in_reply_to") == 2:
                print(f"\nstop ack: trials completed = "
                      f"{msg['payload']['summary']['trials_completed']}")
                break
    await server.close()


asyncio.run(live_demo())
