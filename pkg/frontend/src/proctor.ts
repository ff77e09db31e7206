// Proctor console controller: every operator gesture emits exactly one
// command; controls reconcile against acked engine state and revert on
// errors. DOM-free so the command discipline is testable headless.

import type { CommandType, QueueEntry, SnapshotState } from "./protocol";

export type SendCommand = (
  type: CommandType,
  payload?: Record<string, unknown>,
) => Promise<Record<string, unknown>>;

export interface PendingBadge {
  field: string;
  appliesAt: "now" | "next_phase" | "next_trial";
}

export class ProctorController {
  /** last engine-acknowledged state; controls render from this */
  acked: SnapshotState | null = null;
  pending: PendingBadge[] = [];
  lastError: string | null = null;
  private inflight = 0;

  constructor(private send: SendCommand) {}

  get busy(): boolean {
    return this.inflight > 0;
  }

  /** telemetry snapshots also reconcile (engine pushes after every apply) */
  onSnapshot(state: SnapshotState): void {
    this.acked = state;
    this.pending = this.pendingFromSnapshot(state);
  }

  private pendingFromSnapshot(state: SnapshotState): PendingBadge[] {
    const out: PendingBadge[] = [];
    for (const field of Object.keys(state.pending_next_phase ?? {})) {
      out.push({ field, appliesAt: "next_phase" });
    }
    for (const field of Object.keys(state.pending_next_trial ?? {})) {
      out.push({ field, appliesAt: "next_trial" });
    }
    return out;
  }

  private async run(
    type: CommandType,
    payload: Record<string, unknown>,
  ): Promise<Record<string, unknown> | null> {
    this.inflight++;
    try {
      const result = await this.send(type, payload);
      this.lastError = null;
      return result;
    } catch (err) {
      // the control re-renders from `acked`, i.e. reverts
      this.lastError = err instanceof Error ? err.message : String(err);
      return null;
    } finally {
      this.inflight--;
    }
  }

  async start(config: Record<string, unknown> = {}): Promise<boolean> {
    const result = await this.run("start_session", { config });
    if (result) this.onSnapshot(result as unknown as SnapshotState);
    return result !== null;
  }

  async stop(): Promise<Record<string, unknown> | null> {
    const result = await this.run("stop_session", {});
    if (result) await this.refresh();
    return result;
  }

  async refresh(): Promise<void> {
    const result = await this.run("get_snapshot", {});
    if (result) this.onSnapshot(result as unknown as SnapshotState);
  }

  /** one config field edit = one update_config command */
  async editConfig(field: string, value: unknown): Promise<boolean> {
    const payload: Record<string, unknown> = {};
    if (field.startsWith("grading.") || field.startsWith("band.")) {
      const [group, key] = field.split(".", 2);
      payload[group] = { [key]: value };
    } else {
      payload[field] = value;
    }
    return (await this.run("update_config", payload)) !== null;
  }

  async setGuidance(mode: "none" | "dense" | "sparse"): Promise<boolean> {
    return (await this.run("set_guidance", { mode })) !== null;
  }

  async toggleTask(taskId: string, enabled: boolean): Promise<boolean> {
    const op = enabled ? "enable" : "disable";
    return (await this.run("queue_edit", { op, task_id: taskId })) !== null;
  }

  async invertTask(taskId: string): Promise<boolean> {
    return (await this.run("queue_edit", { op: "invert", task_id: taskId })) !== null;
  }

  async addTask(task: Record<string, unknown>): Promise<boolean> {
    return (await this.run("queue_edit", { op: "add", task })) !== null;
  }

  async removeTask(taskId: string): Promise<boolean> {
    return (await this.run("queue_edit", { op: "remove", task_id: taskId })) !== null;
  }

  async connectTtl(port: string, baud: number): Promise<boolean> {
    return (await this.run("connect_ttl", { port, baud })) !== null;
  }

  async replayLastTrial(): Promise<boolean> {
    return (await this.run("trigger_playback_replay", {})) !== null;
  }

  taskRows(): Array<QueueEntry & { pending: boolean }> {
    const queue = this.acked?.queue ?? [];
    return queue.map((entry) => ({ ...entry, pending: false }));
  }
}
