// Wire types for protocol v1 (see ../docs/protocol.md).

export type Role = "proctor" | "subject";

export interface Envelope {
  type: string;
  v?: number;
  seq?: number;
  in_reply_to?: number | null;
  [key: string]: unknown;
}

export interface PitchMsg extends Envelope {
  type: "pitch";
  time_ms: number;
  f0_hz: number | null;
  voiced: boolean;
  rms: number;
}

export interface PhaseMsg extends Envelope {
  type: "phase";
  phase: string;
  time_ms: number;
  task_id?: string;
}

export interface CountdownMsg extends Envelope {
  type: "countdown";
  time_ms: number;
  remaining_s: number;
}

export interface ContourMsg extends Envelope {
  type: "contour";
  time_ms: number;
  task_id: string;
  onset_ms: number;
  base_hz: number;
  hop_ms: number;
  duration_ms: number;
  times_ms: number[];
  target_hz: number[];
  upper_hz: number[];
  lower_hz: number[];
  change_times_ms: number[];
}

export interface ArrowMsg extends Envelope {
  type: "arrow";
  time_ms: number;
  from_hz: number;
  to_hz: number;
  direction: "up" | "down";
}

export interface TrialResultMsg extends Envelope {
  type: "trial_result";
  time_ms: number;
  task_id: string;
  score: number;
  category: "smiley" | "neutral" | "angry";
}

export interface PlaybackMsg extends Envelope {
  type: "playback";
  time_ms: number;
  task_id: string;
  span_ms: [number, number];
  contour: ContourMsg;
  frames: Array<[number, number]>;
}

export interface TaskDoc {
  id: string;
  pattern: string;
  cents: number;
  duration_ms: number;
  inverted: boolean;
  [key: string]: unknown;
}

export interface QueueEntry {
  task: TaskDoc;
  enabled: boolean;
  completed_count: number;
}

export interface SnapshotState {
  active: boolean;
  phase?: string;
  time_ms?: number;
  trials_completed?: number;
  config: Record<string, unknown>;
  queue?: QueueEntry[];
  pending_next_phase?: Record<string, unknown>;
  pending_next_trial?: Record<string, unknown>;
  ttl?: { connected: boolean; port: string | null };
}

export interface SnapshotMsg extends Envelope {
  type: "snapshot";
  state: SnapshotState;
}

export interface CountersMsg extends Envelope {
  type: "counters";
  tasks: QueueEntry[];
  trials_completed: number;
  n_trials: number;
}

export interface EventMsg extends Envelope {
  type: "event";
  time_ms: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface WelcomeMsg extends Envelope {
  type: "welcome";
  payload: { role: Role; snapshot: SnapshotState };
}

export interface AckMsg extends Envelope {
  type: "ack";
  in_reply_to: number;
  payload: Record<string, unknown>;
}

export interface ErrorMsg extends Envelope {
  type: "error";
  in_reply_to: number | null;
  message: string;
}

export type ServerMessage =
  | PitchMsg
  | PhaseMsg
  | CountdownMsg
  | ContourMsg
  | ArrowMsg
  | TrialResultMsg
  | PlaybackMsg
  | SnapshotMsg
  | CountersMsg
  | EventMsg
  | WelcomeMsg
  | AckMsg
  | ErrorMsg;

export type CommandType =
  | "start_session"
  | "stop_session"
  | "update_config"
  | "queue_edit"
  | "connect_ttl"
  | "set_guidance"
  | "trigger_playback_replay"
  | "get_snapshot";
