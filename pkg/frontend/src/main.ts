// DOM bootstrap: wires gestures to the SessionController and repaints the
// canvases after every state change. All logic lives in the other modules.

import { ApiClient } from "./api.js";
import { SessionController } from "./controller.js";
import { drawMinimap, drawScene } from "./render.js";
import { rotate } from "./state.js";
import { HEADING_STEP_DEG, stripX } from "./view.js";

const qs = new URLSearchParams(location.search);
const api = new ApiClient(qs.get("api") ?? "");
const ctl = new SessionController(api);

const sceneCanvas = document.getElementById("scene") as HTMLCanvasElement;
const mapCanvas = document.getElementById("minimap") as HTMLCanvasElement;
const banner = document.getElementById("banner")!;
const shotsPanel = document.getElementById("shots")!;
const toastBox = document.getElementById("toasts")!;
const shootBtn = document.getElementById("shoot") as HTMLButtonElement;
const submitBtn = document.getElementById("submit") as HTMLButtonElement;

function repaint(): void {
  const s = ctl.state;
  drawScene(sceneCanvas.getContext("2d")!, s, sceneCanvas.width, sceneCanvas.height);
  drawMinimap(mapCanvas.getContext("2d")!, s, mapCanvas.width, mapCanvas.height);

  banner.textContent =
    s.status === "active"
      ? `node ${s.currentNode} — ${s.nDetections} detections, ${Math.round(s.distanceWalkedM)} m walked`
      : `session ${s.status}`;

  shotsPanel.replaceChildren(
    ...s.pendingShots.map((shot, i) => {
      const chip = document.createElement("button");
      chip.textContent = `#${i + 1} @ ${shot.node_id} ${Math.round(shot.heading_deg)}° ✕`;
      chip.onclick = () => ctl.discard(i).then(repaint);
      return chip;
    }),
  );
  shootBtn.disabled = s.status !== "active" || s.pendingShots.length >= 3;
  submitBtn.disabled = !ctl.canSubmit;

  toastBox.replaceChildren(
    ...s.toasts.map((t) => {
      const div = document.createElement("div");
      div.className = `toast ${t.kind}`;
      div.textContent = t.text;
      div.onclick = () => div.remove();
      return div;
    }),
  );
}

shootBtn.onclick = () => ctl.shoot().then(repaint);
submitBtn.onclick = () => ctl.submit().then(repaint);

document.addEventListener("keydown", (ev) => {
  if (ev.key === "ArrowLeft") rotate(ctl.state, -HEADING_STEP_DEG);
  else if (ev.key === "ArrowRight") rotate(ctl.state, HEADING_STEP_DEG);
  else return;
  repaint();
});

let dragX: number | null = null;
sceneCanvas.onmousedown = (ev) => (dragX = ev.offsetX);
sceneCanvas.onmouseup = () => (dragX = null);
sceneCanvas.onmousemove = (ev) => {
  if (dragX === null) return;
  const deltaDeg = ((ev.offsetX - dragX) / sceneCanvas.width) * -60;
  if (Math.abs(deltaDeg) >= 1) {
    rotate(ctl.state, deltaDeg);
    dragX = ev.offsetX;
    repaint();
  }
};

// click an arrow to step to a neighbor; double-click fast-forwards to the
// nearest distant visible node drawn under the cursor
sceneCanvas.onclick = (ev) => clickTarget(ev, ctl.state.scene?.neighbors ?? []);
sceneCanvas.ondblclick = (ev) => clickTarget(ev, ctl.state.scene?.visible_nodes ?? []);

function clickTarget(ev: MouseEvent, nodes: { id: string; bearing_deg: number }[]): void {
  let best: { id: string; px: number } | null = null;
  for (const n of nodes) {
    const x = stripX(n.bearing_deg, ctl.state.headingDeg, sceneCanvas.width);
    if (x === null) continue;
    const px = Math.abs(x - ev.offsetX);
    if (px < 40 && (best === null || px < best.px)) best = { id: n.id, px };
  }
  if (best) ctl.moveTo(best.id).then(repaint);
}

const taskId = qs.get("task");
if (taskId) {
  ctl
    .start(taskId, qs.get("worker") ?? `human-${Date.now()}`, Number(qs.get("seed") ?? 0))
    .then(repaint);
} else {
  banner.textContent = "missing ?task=<id> in the URL";
}
