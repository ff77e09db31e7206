"""Full-pipeline runs: simulated subject, WAV replay, offline re-analysis,
and the command-line entry point."""
import filecmp
import json
from pathlib import Path

import pytest

from pitchtrace import Session, SessionConfig, SimulatedCapture, read_wav
from pitchtrace.analyze import format_report, reanalyze
from pitchtrace.cli import DEFAULT_TASK_DOCS, main as cli_main
from pitchtrace.runner import SessionRunner
from pitchtrace.session import SIMULATED_CLOCK_ANCHOR, entry_from_dict
from pitchtrace.simulate import TrackingSubject, write_flat_tone_wav

from conftest import events_of_kind, read_events


def build_config(root, **kw):
    kw.setdefault("subject_id", "E2E")
    kw.setdefault("countdown_s", 1.0)
    kw.setdefault("delay_base_ms", 300.0)
    kw.setdefault("n_trials", 5)
    kw.setdefault("seed", 7)
    return SessionConfig(log_root=str(root), **kw)


def closed_loop_run(root, **kw):
    cfg = build_config(root, **kw)
    entries = [entry_from_dict(d, cfg.cents_default) for d in DEFAULT_TASK_DOCS]
    session = Session(cfg, entries, clock_anchor=SIMULATED_CLOCK_ANCHOR)
    subject = TrackingSubject(session, rest_hz=200.0, max_seconds=180)
    summary = SessionRunner(session, subject, stop_when_done=True).run()
    return session, summary


def replay_run(root, wav_path, **kw):
    cfg = build_config(root, **kw)
    entries = [entry_from_dict(d, cfg.cents_default) for d in DEFAULT_TASK_DOCS]
    session = Session(cfg, entries, clock_anchor=SIMULATED_CLOCK_ANCHOR)
    source = SimulatedCapture(str(wav_path), sample_rate_hz=cfg.sample_rate_hz)
    summary = SessionRunner(session, source, stop_when_done=True).run()
    return session, summary


@pytest.fixture(scope="module")
def recorded(tmp_path_factory):
    root = tmp_path_factory.mktemp("rec")
    session, summary = closed_loop_run(root)
    wav = next(session.folder.glob("*.wav"))
    return session, summary, wav


class TestClosedLoop:
    def test_five_trials_complete(self, recorded):
        _, summary, _ = recorded
        assert summary["trials_completed"] == 5

    def test_every_trial_near_perfect(self, recorded):
        session, _, _ = recorded
        for result in session.results:
            assert result.score >= 0.95, (result.task_id, result.score)
            assert result.category.value == "smiley"

    def test_wav_duration_matches_stop_time(self, recorded):
        session, summary, wav = recorded
        rate, samples = read_wav(wav)
        wav_ms = 1000.0 * len(samples) / rate
        assert abs(wav_ms - summary["duration_ms"]) <= session.cfg.hop_ms

    def test_session_files_present(self, recorded):
        session, _, _ = recorded
        names = {p.name for p in session.folder.iterdir()}
        assert {"pitch.csv", "events.jsonl", "tasks.jsonl", "config.json"} <= names


class TestReplayDeterminism:
    def test_two_replays_byte_identical(self, recorded, tmp_path):
        _, _, wav = recorded
        s1, _ = replay_run(tmp_path / "r1", wav)
        s2, _ = replay_run(tmp_path / "r2", wav)
        for name in ("pitch.csv", "events.jsonl", "tasks.jsonl"):
            assert filecmp.cmp(s1.folder / name, s2.folder / name, shallow=False)

    def test_replay_matches_closed_loop(self, recorded, tmp_path):
        session, _, wav = recorded
        s1, _ = replay_run(tmp_path / "r3", wav)
        for name in ("pitch.csv", "events.jsonl", "tasks.jsonl"):
            assert filecmp.cmp(session.folder / name, s1.folder / name,
                               shallow=False)

    def test_different_seed_diverges(self, recorded, tmp_path):
        # sanity: the byte-identity above is not vacuous
        _, _, wav = recorded
        s1, _ = replay_run(tmp_path / "r4", wav, seed=8)
        s2, _ = replay_run(tmp_path / "r5", wav, seed=9)
        assert not filecmp.cmp(s1.folder / "events.jsonl",
                               s2.folder / "events.jsonl", shallow=False)


class TestOffTarget:
    def test_flat_voice_against_step_scores_low(self, tmp_path):
        wav = tmp_path / "flat.wav"
        write_flat_tone_wav(wav, 200.0, 12.0, 44100)
        cfg = build_config(tmp_path / "off", n_trials=1)
        entries = [
            entry_from_dict({"id": "step", "pattern": "step", "cents": 300.0}, 300.0)
        ]
        session = Session(cfg, entries, clock_anchor=SIMULATED_CLOCK_ANCHOR)
        source = SimulatedCapture(str(wav), sample_rate_hz=44100)
        SessionRunner(session, source, stop_when_done=True).run()
        assert len(session.results) == 1
        result = session.results[0]
        # flat pitch holds the first third of the step, misses the rest
        assert 0.0 < result.score <= 0.40
        assert result.category.value != "smiley"


class TestOfflineAnalysis:
    def test_recorded_session_passes(self, recorded):
        session, _, _ = recorded
        report = reanalyze(session.folder)
        assert report["passed"], report
        assert report["voicing_agreement"] >= 0.99
        assert report["max_cent_diff"] <= 1.0
        assert "PASS" in format_report(report)

    def test_detects_tampered_log(self, recorded, tmp_path):
        session, _, _ = recorded
        import shutil

        copy = tmp_path / "tampered"
        shutil.copytree(session.folder, copy)
        rows = (copy / "pitch.csv").read_text().splitlines()
        parts = rows[5].split(",")
        parts[1] = f"{float(parts[1]) * 1.01:.3f}"  # ~17 cents off
        rows[5] = ",".join(parts)
        (copy / "pitch.csv").write_text("\n".join(rows) + "\n")
        report = reanalyze(copy)
        assert not report["passed"]


class TestHopRates:
    @pytest.mark.parametrize("hop_ms,per_second", [(25.0, 40), (50.0, 20)])
    def test_pitch_rows_during_tracking(self, tmp_path, hop_ms, per_second):
        root = tmp_path / f"hop{int(hop_ms)}"
        session, _ = closed_loop_run(root, hop_ms=hop_ms, n_trials=2,
                                     subject_id=f"H{int(hop_ms)}")
        events = read_events(session.folder)
        onsets = events_of_kind(events, "TargetOnset")
        completes = events_of_kind(events, "TrialComplete")
        rows = (session.folder / "pitch.csv").read_text().splitlines()[1:]
        times = [float(r.split(",")[0]) for r in rows]
        for onset, complete in zip(onsets, completes):
            t0, t1 = onset["time_ms"], complete["time_ms"]
            seconds = (t1 - t0) / 1000.0
            n = sum(1 for t in times if t0 <= t < t1)
            assert n / seconds == pytest.approx(per_second, abs=1)


class TestCli:
    def test_headless_then_analyze(self, tmp_path, capsys, monkeypatch, recorded):
        _, _, wav = recorded
        monkeypatch.setenv("PITCHTRACE_LOG_DIR", str(tmp_path / "cli_logs"))
        config = {
            "config": build_config(tmp_path, n_trials=2).to_dict(),
            "tasks": DEFAULT_TASK_DOCS,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        rc = cli_main(
            ["--headless", "--simulate", str(wav), "--config", str(cfg_path)]
        )
        assert rc == 0
        out = capsys.readouterr().out
        folder = Path(out.splitlines()[0].split(": ", 1)[1])
        assert folder.is_dir()
        assert folder.parent.parent == tmp_path / "cli_logs"

        rc = cli_main(["--analyze", str(folder)])
        assert rc == 0
        assert "PASS" in capsys.readouterr().out

    def test_seeded_runs_identical(self, tmp_path, capsys, monkeypatch, recorded):
        _, _, wav = recorded
        folders = []
        for i in range(2):
            monkeypatch.setenv("PITCHTRACE_LOG_DIR", str(tmp_path / f"run{i}"))
            rc = cli_main(
                ["--headless", "--simulate", str(wav), "--subject", "CLI",
                 "--seed", "99"]
            )
            assert rc == 0
            out = capsys.readouterr().out
            folders.append(Path(out.splitlines()[0].split(": ", 1)[1]))
        for name in ("pitch.csv", "events.jsonl", "tasks.jsonl"):
            assert filecmp.cmp(folders[0] / name, folders[1] / name, shallow=False)

    def test_conflicting_modes_rejected(self):
        with pytest.raises(SystemExit):
            cli_main(["--headless", "--listen", "127.0.0.1:0"])
        with pytest.raises(SystemExit):
            cli_main([])

    def test_headless_requires_simulate(self):
        with pytest.raises(SystemExit):
            cli_main(["--headless"])

    def test_analyze_rejects_extra_flags(self):
        with pytest.raises(SystemExit):
            cli_main(["--analyze", "x", "--simulate", "y.wav"])
