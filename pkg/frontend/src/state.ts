// View state derived purely from protocol messages: replaying the same
// transcript always reproduces the same state, which is what the snapshot
// tests pin down. No timers, no wall clock, no hidden inputs.

import type {
  ContourMsg,
  PlaybackMsg,
  QueueEntry,
  Role,
  ServerMessage,
  SnapshotState,
  TrialResultMsg,
} from "./protocol";

export const PITCH_RING_SIZE = 600;
export const ARROW_LIMIT = 400;

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface PitchPoint {
  timeMs: number;
  f0Hz: number | null;
}

export interface ViewState {
  role: Role;
  connection: ConnectionStatus;
  phase: string;
  timeMs: number;
  countdown: number | null;
  goCue: boolean;
  pitch: PitchPoint[];
  contour: ContourMsg | null;
  arrows: Array<{ timeMs: number; fromHz: number; toHz: number; dir: "up" | "down" }>;
  result: TrialResultMsg | null;
  playback: PlaybackMsg | null;
  snapshot: SnapshotState | null;
  queue: QueueEntry[];
  trialsCompleted: number;
  nTrials: number | null;
  events: Array<{ timeMs: number; kind: string; summary: string }>;
  lastError: string | null;
  droppedTelemetry: number;
}

export function initialState(role: Role): ViewState {
  return {
    role,
    connection: "connecting",
    phase: "idle",
    timeMs: 0,
    countdown: null,
    goCue: false,
    pitch: [],
    contour: null,
    arrows: [],
    result: null,
    playback: null,
    snapshot: null,
    queue: [],
    trialsCompleted: 0,
    nTrials: null,
    events: [],
    lastError: null,
    droppedTelemetry: 0,
  };
}

export function setConnection(state: ViewState, status: ConnectionStatus): ViewState {
  return { ...state, connection: status };
}

function eventSummary(kind: string, payload: Record<string, unknown>): string {
  const bits: string[] = [];
  for (const key of ["task_id", "score", "category", "base_hz", "reason"]) {
    if (payload[key] !== undefined) bits.push(`${key}=${payload[key]}`);
  }
  return `${kind} ${bits.join(" ")}`.trim();
}

export function applyMessage(state: ViewState, msg: ServerMessage): ViewState {
  const dropped = typeof msg.dropped_before === "number"
    ? state.droppedTelemetry + (msg.dropped_before as number)
    : state.droppedTelemetry;
  const next: ViewState = { ...state, droppedTelemetry: dropped };

  switch (msg.type) {
    case "welcome": {
      next.connection = "open";
      next.snapshot = msg.payload.snapshot;
      next.queue = msg.payload.snapshot.queue ?? [];
      if (msg.payload.snapshot.phase) next.phase = msg.payload.snapshot.phase;
      return next;
    }
    case "pitch": {
      next.timeMs = msg.time_ms;
      const pitch = state.pitch.concat({ timeMs: msg.time_ms, f0Hz: msg.f0_hz });
      next.pitch = pitch.length > PITCH_RING_SIZE
        ? pitch.slice(pitch.length - PITCH_RING_SIZE)
        : pitch;
      return next;
    }
    case "phase": {
      next.phase = msg.phase;
      next.timeMs = msg.time_ms;
      next.goCue = msg.phase === "go_cue";
      if (msg.phase === "countdown") {
        // a new trial wipes the previous trial's drawing
        next.contour = null;
        next.arrows = [];
        next.result = null;
        next.playback = null;
      }
      if (msg.phase !== "countdown" && msg.phase !== "idle") next.countdown = null;
      if (msg.phase !== "playback") next.playback = null;
      return next;
    }
    case "countdown": {
      next.countdown = msg.remaining_s;
      next.timeMs = msg.time_ms;
      return next;
    }
    case "contour": {
      next.contour = msg;
      next.arrows = [];
      return next;
    }
    case "arrow": {
      const arrows = state.arrows.concat({
        timeMs: msg.time_ms,
        fromHz: msg.from_hz,
        toHz: msg.to_hz,
        dir: msg.direction,
      });
      next.arrows = arrows.length > ARROW_LIMIT
        ? arrows.slice(arrows.length - ARROW_LIMIT)
        : arrows;
      return next;
    }
    case "trial_result": {
      next.result = msg;
      next.countdown = null;
      return next;
    }
    case "playback": {
      next.playback = msg;
      return next;
    }
    case "snapshot": {
      next.snapshot = msg.state;
      next.queue = msg.state.queue ?? state.queue;
      if (typeof msg.state.trials_completed === "number") {
        next.trialsCompleted = msg.state.trials_completed;
      }
      return next;
    }
    case "counters": {
      next.queue = msg.tasks;
      next.trialsCompleted = msg.trials_completed;
      next.nTrials = msg.n_trials;
      return next;
    }
    case "event": {
      const events = state.events.concat({
        timeMs: msg.time_ms,
        kind: msg.kind,
        summary: eventSummary(msg.kind, msg.payload),
      });
      next.events = events.length > 200 ? events.slice(events.length - 200) : events;
      return next;
    }
    case "error": {
      next.lastError = msg.message;
      return next;
    }
    case "ack":
      return next;
    default:
      return next;
  }
}

export function replayTranscript(role: Role, transcript: ServerMessage[]): ViewState {
  let state = initialState(role);
  for (const msg of transcript) state = applyMessage(state, msg);
  return state;
}
