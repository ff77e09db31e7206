// DOM binding for the proctor console: five panels (TTL, recording
// control, recording parameters, experiment parameters, task controls)
// wired one-gesture-one-command through the ProctorController.

import type { ProctorController } from "./proctor";
import type { ViewState } from "./state";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<HTMLElement | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  for (const child of children) node.append(child);
  return node;
}

function panel(title: string, ...children: HTMLElement[]): HTMLElement {
  return el("section", { class: "panel" }, el("h2", {}, title), ...children);
}

function labeled(text: string, input: HTMLElement): HTMLElement {
  return el("label", { class: "field" }, el("span", {}, text), input);
}

export class ProctorView {
  private root: HTMLElement;
  private status = el("div", { class: "status" }, "disconnected");
  private errorBar = el("div", { class: "error-bar" });
  private taskList = el("div", { class: "tasks" });
  private eventLog = el("pre", { class: "events" });
  private progress = el("div", { class: "progress" });
  private pendingBar = el("div", { class: "pending" });

  constructor(
    container: HTMLElement,
    private controller: ProctorController,
  ) {
    this.root = el("div", { class: "proctor" });
    container.append(this.root);
    this.build();
  }

  private numberInput(field: string, step = "1"): HTMLInputElement {
    const input = el("input", { type: "number", step }) as HTMLInputElement;
    input.addEventListener("change", () => {
      void this.controller.editConfig(field, Number(input.value));
    });
    input.dataset.field = field;
    return input;
  }

  private build(): void {
    const ttlPort = el("input", { type: "text", placeholder: "/dev/ttyUSB0" }) as HTMLInputElement;
    const ttlBaud = el("input", { type: "number", value: "115200" }) as HTMLInputElement;
    const ttlBtn = el("button", {}, "connect TTL");
    ttlBtn.addEventListener("click", () => {
      void this.controller.connectTtl(ttlPort.value, Number(ttlBaud.value));
    });
    const ttlStatus = el("span", { class: "ttl-status" }, "not connected");
    this.root.append(panel(
      "TTL console",
      labeled("COM port", ttlPort),
      labeled("baud", ttlBaud),
      el("div", {}, ttlBtn, ttlStatus),
    ));

    const startBtn = el("button", { class: "primary" }, "start session");
    startBtn.addEventListener("click", () => void this.controller.start());
    const stopBtn = el("button", {}, "stop session");
    stopBtn.addEventListener("click", () => void this.controller.stop());
    const replayBtn = el("button", {}, "replay last trial");
    replayBtn.addEventListener("click", () => void this.controller.replayLastTrial());
    this.root.append(panel(
      "Recording control",
      el("div", {}, startBtn, stopBtn, replayBtn),
      this.status,
      this.progress,
    ));

    const guidance = el("select", {}) as HTMLSelectElement;
    for (const mode of ["none", "dense", "sparse"]) {
      guidance.append(el("option", { value: mode }, mode));
    }
    guidance.addEventListener("change", () => {
      void this.controller.setGuidance(guidance.value as "none" | "dense" | "sparse");
    });
    const playback = el("input", { type: "checkbox" }) as HTMLInputElement;
    playback.addEventListener("change", () => {
      void this.controller.editConfig("playback_enabled", playback.checked);
    });
    this.root.append(panel(
      "Recording parameters",
      labeled("guidance", guidance),
      labeled("post-trial playback", playback),
      labeled("delay base (ms)", this.numberInput("delay_base_ms", "100")),
      labeled("delay jitter (ms)", this.numberInput("delay_jitter_ms", "100")),
    ));

    this.root.append(panel(
      "Experiment parameters",
      labeled("trials", this.numberInput("n_trials")),
      labeled("pitch change (cents)", this.numberInput("cents_default", "25")),
      labeled("band half-width (cents)", this.numberInput("band.half_width_cents", "5")),
      labeled("countdown (s)", this.numberInput("countdown_s", "0.5")),
      labeled("smiley threshold", this.numberInput("grading.smiley_min", "0.05")),
      labeled("angry threshold", this.numberInput("grading.angry_max", "0.05")),
      labeled("y-axis center (Hz)", this.numberInput("y_axis_center_hz", "10")),
      this.pendingBar,
    ));

    this.root.append(panel("Visual pitch task controls", this.taskList));
    this.root.append(panel("Event log", this.eventLog));
    this.root.append(this.errorBar);
  }

  render(state: ViewState): void {
    this.status.textContent =
      `${state.connection} | phase ${state.phase} | t=${Math.round(state.timeMs)} ms`;
    const n = state.nTrials ?? state.snapshot?.config?.n_trials ?? "?";
    this.progress.textContent = `trials ${state.trialsCompleted} / ${n}`;
    this.errorBar.textContent = this.controller.lastError ?? state.lastError ?? "";
    this.pendingBar.textContent = this.controller.pending.length
      ? "pending: " + this.controller.pending
          .map((p) => `${p.field} (${p.appliesAt.replace("_", " ")})`)
          .join(", ")
      : "";

    this.taskList.replaceChildren();
    for (const entry of state.queue) {
      const row = el("div", { class: entry.enabled ? "task" : "task disabled" });
      const toggle = el("input", { type: "checkbox" }) as HTMLInputElement;
      toggle.checked = entry.enabled;
      toggle.addEventListener("change", () => {
        void this.controller.toggleTask(entry.task.id, toggle.checked);
      });
      const invert = el("button", { class: "small" },
                        entry.task.inverted ? "inverted" : "invert");
      invert.addEventListener("click", () => {
        void this.controller.invertTask(entry.task.id);
      });
      const remove = el("button", { class: "small" }, "remove");
      remove.addEventListener("click", () => {
        void this.controller.removeTask(entry.task.id);
      });
      row.append(
        toggle,
        el("span", { class: "task-name" },
           `${entry.task.id} (${entry.task.pattern} ${entry.task.cents}c)`),
        el("span", { class: "counter" }, String(entry.completed_count)),
        invert,
        remove,
      );
      this.taskList.append(row);
    }

    this.eventLog.textContent = state.events
      .slice(-12)
      .map((e) => `${String(Math.round(e.timeMs)).padStart(7)} ms  ${e.summary}`)
      .join("\n");

    const ttlStatus = this.root.querySelector(".ttl-status");
    if (ttlStatus && state.snapshot?.ttl) {
      ttlStatus.textContent = state.snapshot.ttl.connected
        ? `connected (${state.snapshot.ttl.port})`
        : "not connected";
    }
  }
}
