// Subject Window scene model: everything the canvas painter needs, as
// plain data. Pixel positions are deterministic functions of ViewState and
// the viewport, so snapshot tests pin the actual render geometry.
//
// Vertical placement works in cents relative to a center pitch (the active
// contour's base when a trial is up, otherwise the median of recent voiced
// pitch), which keeps the grading band visually symmetric.

import type { ViewState } from "./state";

export interface XY {
  x: number;
  y: number;
}

export interface SubjectScene {
  width: number;
  height: number;
  centerHz: number;
  spanCents: number;
  targetLine: XY[];        // red
  upperBoundary: XY[];     // blue
  lowerBoundary: XY[];     // blue
  pitchSquares: XY[];      // green
  arrows: Array<{ x: number; fromY: number; toY: number; dir: "up" | "down" }>;
  countdown: string | null;
  goCue: boolean;
  emoticon: "smiley" | "neutral" | "angry" | null;
  phaseLabel: string;
  overlay: "disconnected" | null;
  replay: boolean;
}

export interface Viewport {
  width: number;
  height: number;
  spanCents?: number;   // total vertical span
  windowMs?: number;    // rolling x window when no contour is active
}

const DEFAULT_SPAN_CENTS = 1000;
const DEFAULT_WINDOW_MS = 5000;
const FALLBACK_CENTER_HZ = 200;

function round1(v: number): number {
  return Math.round(v * 10) / 10;
}

function median(values: number[]): number {
  const sorted = [...values].sort((a, b) => a - b);
  const mid = Math.floor(sorted.length / 2);
  return sorted.length % 2 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
}

export function deriveSubjectScene(state: ViewState, view: Viewport): SubjectScene {
  const spanCents = view.spanCents ?? DEFAULT_SPAN_CENTS;
  const windowMs = view.windowMs ?? DEFAULT_WINDOW_MS;

  const playback = state.phase === "playback" && state.playback !== null;
  const contour = playback ? state.playback!.contour : state.contour;

  let centerHz = FALLBACK_CENTER_HZ;
  if (contour) {
    centerHz = contour.base_hz;
  } else {
    const recent = state.pitch.filter((p) => p.f0Hz !== null).slice(-100);
    if (recent.length > 0) centerHz = median(recent.map((p) => p.f0Hz as number));
  }

  // x: the trial span when a contour is up, else a rolling window
  let x0: number;
  let x1: number;
  if (contour) {
    x0 = contour.onset_ms;
    x1 = contour.onset_ms + contour.duration_ms;
  } else {
    x1 = state.timeMs;
    x0 = x1 - windowMs;
  }
  const toX = (t: number) => round1(((t - x0) / (x1 - x0 || 1)) * view.width);
  const toY = (hz: number) => {
    const cents = 1200 * Math.log2(hz / centerHz);
    return round1(view.height / 2 - (cents / spanCents) * view.height);
  };

  const targetLine: XY[] = [];
  const upperBoundary: XY[] = [];
  const lowerBoundary: XY[] = [];
  if (contour) {
    for (let i = 0; i < contour.times_ms.length; i++) {
      const x = toX(contour.onset_ms + contour.times_ms[i]);
      targetLine.push({ x, y: toY(contour.target_hz[i]) });
      upperBoundary.push({ x, y: toY(contour.upper_hz[i]) });
      lowerBoundary.push({ x, y: toY(contour.lower_hz[i]) });
    }
  }

  const squares: XY[] = [];
  if (playback) {
    for (const [t, f0] of state.playback!.frames) {
      squares.push({ x: toX(state.playback!.contour.onset_ms + t), y: toY(f0) });
    }
  } else {
    for (const p of state.pitch) {
      if (p.f0Hz === null) continue;
      if (p.timeMs < x0 || p.timeMs > x1) continue;
      squares.push({ x: toX(p.timeMs), y: toY(p.f0Hz) });
    }
  }

  const arrows = playback || !contour
    ? []
    : state.arrows
        .map((a) => ({
          x: toX(contour.onset_ms + a.timeMs),
          fromY: toY(a.fromHz),
          toY: toY(a.toHz),
          dir: a.dir,
        }))
        .filter((a) => a.x >= 0 && a.x <= view.width);

  return {
    width: view.width,
    height: view.height,
    centerHz: round1(centerHz),
    spanCents,
    targetLine,
    upperBoundary,
    lowerBoundary,
    pitchSquares: squares,
    arrows,
    countdown: state.countdown !== null ? String(state.countdown) : null,
    goCue: state.goCue,
    emoticon: state.result ? state.result.category : null,
    phaseLabel: state.phase,
    overlay: state.connection === "closed" ? "disconnected" : null,
    replay: playback,
  };
}
