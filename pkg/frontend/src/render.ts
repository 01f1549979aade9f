// Canvas drawing for the bearing-strip scene and the mini-map. Takes the
// subset of CanvasRenderingContext2D it needs, so tests can pass a recorder.

import type { ViewState } from "./state.js";
import {
  FOV_DEG,
  insideRing,
  minimapTransform,
  spriteSize,
  stripX,
  wrapDeg,
} from "./view.js";

export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  textAlign: CanvasTextAlign;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  save(): void;
  restore(): void;
}

const SKY = "#b8d4e8";
const GROUND = "#8a9a7b";
const STREET = "#6b6b6b";

export function drawScene(ctx: Ctx2D, state: ViewState, w: number, h: number): void {
  const horizon = h * 0.55;
  ctx.fillStyle = SKY;
  ctx.fillRect(0, 0, w, horizon);
  ctx.fillStyle = GROUND;
  ctx.fillRect(0, horizon, w, h - horizon);
  if (!state.scene) return;

  // streets: a wedge toward each neighbor bearing
  for (const n of state.scene.neighbors) {
    const x = stripX(n.bearing_deg, state.headingDeg, w);
    if (x === null) continue;
    ctx.fillStyle = STREET;
    ctx.beginPath();
    ctx.moveTo(x - 60, h);
    ctx.lineTo(x + 60, h);
    ctx.lineTo(x + 6, horizon);
    ctx.lineTo(x - 6, horizon);
    ctx.closePath();
    ctx.fill();
    drawArrow(ctx, x, h - 40);
    ctx.fillStyle = "#222";
    ctx.textAlign = "center";
    ctx.font = "12px sans-serif";
    ctx.fillText(n.id, x, h - 14);
  }

  for (const poi of state.scene.pois) {
    const x = stripX(poi.bearing_deg, state.headingDeg, w);
    if (x === null) continue;
    const s = spriteSize(poi.distance_m);
    const y = horizon - s / 2;
    drawPoiSprite(ctx, x, y, s);
    if (poi.taboo) drawTabooSign(ctx, x, y - s * 0.75, s);
    ctx.fillStyle = "#123";
    ctx.textAlign = "center";
    ctx.font = "11px sans-serif";
    ctx.fillText(`${Math.round(poi.distance_m)} m`, x, y + s * 0.8);
  }

  drawReticle(ctx, w / 2, horizon - 20);
  drawCompass(ctx, state.headingDeg, w, 22);
}

function drawArrow(ctx: Ctx2D, x: number, y: number): void {
  ctx.fillStyle = "#f5f5f5";
  ctx.beginPath();
  ctx.moveTo(x, y - 14);
  ctx.lineTo(x + 10, y + 6);
  ctx.lineTo(x - 10, y + 6);
  ctx.closePath();
  ctx.fill();
}

function drawPoiSprite(ctx: Ctx2D, x: number, y: number, s: number): void {
  // a bike-rack-ish hoop: two legs and an arc
  ctx.strokeStyle = "#30343b";
  ctx.lineWidth = Math.max(2, s / 12);
  ctx.beginPath();
  ctx.moveTo(x - s / 3, y + s / 2);
  ctx.lineTo(x - s / 3, y);
  ctx.arc(x, y, s / 3, Math.PI, 0);
  ctx.lineTo(x + s / 3, y + s / 2);
  ctx.stroke();
}

export function drawTabooSign(ctx: Ctx2D, x: number, y: number, s: number): void {
  ctx.fillStyle = "#c62828";
  ctx.beginPath();
  ctx.arc(x, y, s / 3, 0, Math.PI * 2);
  ctx.fill();
  ctx.strokeStyle = "#fff";
  ctx.lineWidth = Math.max(2, s / 10);
  ctx.beginPath();
  ctx.moveTo(x - s / 5, y);
  ctx.lineTo(x + s / 5, y);
  ctx.stroke();
}

function drawReticle(ctx: Ctx2D, x: number, y: number): void {
  ctx.strokeStyle = "#ffffff";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(x - 12, y);
  ctx.lineTo(x + 12, y);
  ctx.moveTo(x, y - 12);
  ctx.lineTo(x, y + 12);
  ctx.stroke();
}

function drawCompass(ctx: Ctx2D, headingDeg: number, w: number, y: number): void {
  ctx.fillStyle = "#333";
  ctx.font = "12px sans-serif";
  ctx.textAlign = "center";
  for (const [label, b] of [["N", 0], ["E", 90], ["S", 180], ["W", 270]] as const) {
    const x = stripX(b, headingDeg, w, FOV_DEG);
    if (x !== null) ctx.fillText(label, x, y);
  }
  ctx.fillText(`${Math.round(wrapDeg(headingDeg))}°`, w - 30, y);
}

/** Bottom-left mini-map: boundary ring, position marker, taboo markers. */
export function drawMinimap(ctx: Ctx2D, state: ViewState, w: number, h: number): void {
  ctx.fillStyle = "rgba(255,255,255,0.85)";
  ctx.fillRect(0, 0, w, h);
  if (!state.scene) return;
  const tf = minimapTransform(state.scene.boundary, w, h);

  ctx.strokeStyle = "#1565c0";
  ctx.lineWidth = 2;
  ctx.beginPath();
  tf.ring.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
  ctx.closePath();
  ctx.stroke();

  for (const m of state.tabooMarkers) {
    const p = tf.toCanvas(m);
    drawTabooSign(ctx, p.x, p.y, 10);
  }

  const here = tf.toCanvas(state.scene.node);
  // the engine reverts out-of-area moves, so this always holds; clamp would hide bugs
  if (!insideRing(here, tf.ring)) throw new Error("position marker left the boundary");
  ctx.fillStyle = "#e65100";
  ctx.beginPath();
  ctx.arc(here.x, here.y, 4, 0, Math.PI * 2);
  ctx.fill();
}
