// Canvas painter for the Subject Window: draws the scene model verbatim.
// Red target line, blue grading boundaries, green pitch squares, red
// arrows, countdown / go cue / emoticon overlays.

import type { SubjectScene, XY } from "./scene";

const EMOTICON: Record<string, string> = {
  smiley: "\u{1F600}",
  neutral: "\u{1F610}",
  angry: "\u{1F620}",
};

function polyline(ctx: CanvasRenderingContext2D, pts: XY[], color: string,
                  width: number): void {
  if (pts.length < 2) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  ctx.moveTo(pts[0].x, pts[0].y);
  for (const p of pts.slice(1)) ctx.lineTo(p.x, p.y);
  ctx.stroke();
}

export function paintSubjectScene(
  canvas: HTMLCanvasElement,
  scene: SubjectScene,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  canvas.width = scene.width;
  canvas.height = scene.height;
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, scene.width, scene.height);

  polyline(ctx, scene.upperBoundary, "#3b82f6", 1.5);
  polyline(ctx, scene.lowerBoundary, "#3b82f6", 1.5);
  polyline(ctx, scene.targetLine, "#ef4444", 2.5);

  ctx.fillStyle = "#22c55e";
  for (const sq of scene.pitchSquares) {
    ctx.fillRect(sq.x - 3, sq.y - 3, 6, 6);
  }

  ctx.strokeStyle = "#ef4444";
  ctx.fillStyle = "#ef4444";
  ctx.lineWidth = 1.5;
  for (const arrow of scene.arrows) {
    ctx.beginPath();
    ctx.moveTo(arrow.x, arrow.fromY);
    ctx.lineTo(arrow.x, arrow.toY);
    ctx.stroke();
    const head = arrow.dir === "up" ? -5 : 5;
    ctx.beginPath();
    ctx.moveTo(arrow.x, arrow.toY);
    ctx.lineTo(arrow.x - 4, arrow.toY - head);
    ctx.lineTo(arrow.x + 4, arrow.toY - head);
    ctx.closePath();
    ctx.fill();
  }

  ctx.textAlign = "center";
  if (scene.countdown !== null) {
    ctx.fillStyle = "#f5f5f5";
    ctx.font = "bold 96px system-ui";
    ctx.fillText(scene.countdown, scene.width / 2, scene.height / 2);
  }
  if (scene.goCue) {
    ctx.fillStyle = "#22c55e";
    ctx.font = "bold 96px system-ui";
    ctx.fillText("GO!", scene.width / 2, scene.height / 2);
  }
  if (scene.emoticon) {
    ctx.font = "72px system-ui";
    ctx.fillText(EMOTICON[scene.emoticon] ?? "", scene.width / 2, 90);
  }
  if (scene.replay) {
    ctx.fillStyle = "#eab308";
    ctx.font = "16px system-ui";
    ctx.fillText("playback", scene.width / 2, scene.height - 14);
  }
  if (scene.overlay === "disconnected") {
    ctx.fillStyle = "rgba(0,0,0,0.7)";
    ctx.fillRect(0, 0, scene.width, scene.height);
    ctx.fillStyle = "#ef4444";
    ctx.font = "bold 40px system-ui";
    ctx.fillText("disconnected", scene.width / 2, scene.height / 2);
  }
}
