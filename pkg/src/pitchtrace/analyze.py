"""Offline re-analysis of a recorded session folder.

Recomputes the pitch trace from the saved WAV with the logged config and
diffs it against the live pitch.csv: voiced frames must agree within one
cent and voicing flags on at least 99% of frames. This is the standing
proof that the on-disk logs faithfully describe what the engine heard.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

from .audio import read_wav
from .pitch import FrameStream, PitchFrame, yin_estimate
from .session import SessionConfig

__all__ = ["reanalyze", "format_report", "CENTS_TOLERANCE", "MIN_VOICING_AGREEMENT"]

CENTS_TOLERANCE = 1.0
MIN_VOICING_AGREEMENT = 0.99


def load_pitch_csv(path: Path) -> list[PitchFrame]:
    frames = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            voiced = row["voiced"] == "1"
            frames.append(
                PitchFrame(
                    time_ms=float(row["time_ms"]),
                    f0_hz=float(row["f0_hz"]) if voiced else None,
                    aperiodicity=float(row["aperiodicity"]) if voiced else None,
                    rms=float(row["rms"]),
                )
            )
    return frames


def recompute_pitch(folder: Path) -> list[PitchFrame]:
    with open(folder / "config.json") as fh:
        snapshot = json.load(fh)
    cfg = SessionConfig.from_dict(snapshot["config"])
    rate, samples = read_wav(folder / snapshot["wav_file"])
    if rate != cfg.sample_rate_hz:
        raise ValueError(
            f"WAV rate {rate} does not match logged config rate {cfg.sample_rate_hz}"
        )
    pcfg = cfg.pitch_config()
    stream = FrameStream(pcfg)
    return [yin_estimate(frame, pcfg) for frame in stream.push(samples)]


def reanalyze(folder: str | Path) -> dict[str, Any]:
    folder = Path(folder)
    live = load_pitch_csv(folder / "pitch.csv")
    offline = recompute_pitch(folder)

    by_time = {f.time_ms: f for f in offline}
    compared = 0
    voicing_agree = 0
    cent_diffs = []
    missing = 0
    for row in live:
        ref = by_time.get(row.time_ms)
        if ref is None:
            missing += 1
            continue
        compared += 1
        if row.voiced == ref.voiced:
            voicing_agree += 1
            if row.voiced:
                cent_diffs.append(abs(1200.0 * math.log2(row.f0_hz / ref.f0_hz)))
    agreement = voicing_agree / compared if compared else 0.0
    max_cents = max(cent_diffs) if cent_diffs else 0.0
    report = {
        "folder": str(folder),
        "rows_live": len(live),
        "rows_offline": len(offline),
        "rows_compared": compared,
        "rows_unmatched": missing,
        "voicing_agreement": agreement,
        "voiced_rows_compared": len(cent_diffs),
        "max_cent_diff": max_cents,
        "mean_cent_diff": sum(cent_diffs) / len(cent_diffs) if cent_diffs else 0.0,
        "passed": (
            compared > 0
            and missing == 0
            and agreement >= MIN_VOICING_AGREEMENT
            and max_cents <= CENTS_TOLERANCE
        ),
    }
    return report


def format_report(report: dict[str, Any]) -> str:
    lines = [
        f"session folder    : {report['folder']}",
        f"rows live/offline : {report['rows_live']} / {report['rows_offline']}",
        f"rows compared     : {report['rows_compared']} "
        f"({report['rows_unmatched']} unmatched)",
        f"voicing agreement : {report['voicing_agreement']:.4f} "
        f"(need >= {MIN_VOICING_AGREEMENT})",
        f"max cent diff     : {report['max_cent_diff']:.4f} "
        f"(need <= {CENTS_TOLERANCE})",
        f"mean cent diff    : {report['mean_cent_diff']:.4f}",
        f"result            : {'PASS' if report['passed'] else 'FAIL'}",
    ]
    return "\n".join(lines)
