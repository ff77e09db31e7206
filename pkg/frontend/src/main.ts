// Entry point: #subject runs the full-screen Subject Window (for a second
// display), anything else the proctor console. Both speak only the
// protocol; neither holds state the transcript cannot reproduce.

import "./style.css";
import { ProtocolClient } from "./client";
import { ProctorController } from "./proctor";
import { ProctorView } from "./proctor-view";
import type { Role, ServerMessage, SnapshotMsg, WelcomeMsg } from "./protocol";
import { deriveSubjectScene } from "./scene";
import { applyMessage, initialState, setConnection, ViewState } from "./state";
import { paintSubjectScene } from "./subject-view";

const params = new URLSearchParams(window.location.search);
const engineUrl =
  params.get("engine") ?? `ws://${window.location.hostname}:8765`;
const role: Role = window.location.hash === "#subject" ? "subject" : "proctor";

const app = document.getElementById("app")!;
let state: ViewState = initialState(role);

if (role === "subject") {
  const canvas = document.createElement("canvas");
  canvas.className = "subject-canvas";
  app.append(canvas);

  const repaint = () => {
    const scene = deriveSubjectScene(state, {
      width: window.innerWidth,
      height: window.innerHeight,
    });
    paintSubjectScene(canvas, scene);
  };
  window.addEventListener("resize", repaint);

  const client = new ProtocolClient(engineUrl, "subject", {
    onMessage: (msg: ServerMessage) => {
      state = applyMessage(state, msg);
      repaint();
    },
    onStatus: (status) => {
      state = setConnection(state, status);
      repaint();
    },
  });
  client.connect();
  repaint();
} else {
  let view: ProctorView | null = null;
  const controller = new ProctorController((type, payload) =>
    client.command(type, payload),
  );
  const client = new ProtocolClient(engineUrl, "proctor", {
    onMessage: (msg: ServerMessage) => {
      state = applyMessage(state, msg);
      if (msg.type === "snapshot") {
        controller.onSnapshot((msg as SnapshotMsg).state);
      } else if (msg.type === "welcome") {
        controller.onSnapshot((msg as WelcomeMsg).payload.snapshot);
      }
      view?.render(state);
    },
    onStatus: (status) => {
      state = setConnection(state, status);
      view?.render(state);
    },
  });
  view = new ProctorView(app, controller);
  client.connect();
  view.render(state);
}
