// Pure scene geometry: bearings to strip coordinates, sprite sizing, and
// the mini-map projection. No DOM, no canvas — render.ts consumes these.

import type { LatLon } from "./types.js";

export const FOV_DEG = 120;
export const HEADING_STEP_DEG = 5;

export function wrapDeg(d: number): number {
  const w = d % 360;
  return w < 0 ? w + 360 : w;
}

/** Signed smallest rotation from `from` to `to`, in (-180, 180]. */
export function angularDiff(from: number, to: number): number {
  let d = wrapDeg(to) - wrapDeg(from);
  if (d > 180) d -= 360;
  if (d <= -180) d += 360;
  return d;
}

/**
 * Horizontal pixel position of a bearing in the strip view, or null when it
 * falls outside the field of view. The current heading maps to the center.
 */
export function stripX(
  bearingDeg: number,
  headingDeg: number,
  width: number,
  fovDeg: number = FOV_DEG,
): number | null {
  const off = angularDiff(headingDeg, bearingDeg);
  if (Math.abs(off) > fovDeg / 2) return null;
  return (off / fovDeg + 0.5) * width;
}

/** Sprite edge length in px; shrinks with distance, clamped to stay legible. */
export function spriteSize(distanceM: number): number {
  return Math.min(96, Math.max(14, 900 / Math.max(distanceM, 1)));
}

export interface MinimapTransform {
  toCanvas(p: LatLon): { x: number; y: number };
  ring: { x: number; y: number }[];
}

/**
 * Fit the boundary ring into a w×h box with a margin, preserving aspect.
 * Longitudes are scaled by cos(lat) so the map is not stretched.
 */
export function minimapTransform(
  boundary: LatLon[],
  w: number,
  h: number,
  marginPx = 8,
): MinimapTransform {
  const latScale = 1;
  const lonScale = Math.cos((boundary[0].lat * Math.PI) / 180);
  const xs = boundary.map((p) => p.lon * lonScale);
  const ys = boundary.map((p) => p.lat * latScale);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const scale = Math.min(
    (w - 2 * marginPx) / Math.max(maxX - minX, 1e-12),
    (h - 2 * marginPx) / Math.max(maxY - minY, 1e-12),
  );
  const toCanvas = (p: LatLon) => ({
    x: marginPx + (p.lon * lonScale - minX) * scale,
    // canvas y grows downward, latitude grows upward
    y: h - marginPx - (p.lat * latScale - minY) * scale,
  });
  return { toCanvas, ring: boundary.map(toCanvas) };
}

/** Ray-casting point-in-polygon over canvas coordinates (boundary counts as inside). */
export function insideRing(
  pt: { x: number; y: number },
  ring: { x: number; y: number }[],
): boolean {
  let inside = false;
  for (let i = 0, j = ring.length - 1; i < ring.length; j = i++) {
    const a = ring[i];
    const b = ring[j];
    const onSegment =
      Math.abs((b.x - a.x) * (pt.y - a.y) - (b.y - a.y) * (pt.x - a.x)) < 1e-9 &&
      pt.x >= Math.min(a.x, b.x) - 1e-9 &&
      pt.x <= Math.max(a.x, b.x) + 1e-9 &&
      pt.y >= Math.min(a.y, b.y) - 1e-9 &&
      pt.y <= Math.max(a.y, b.y) + 1e-9;
    if (onSegment) return true;
    if (a.y > pt.y !== b.y > pt.y) {
      const xCross = a.x + ((pt.y - a.y) / (b.y - a.y)) * (b.x - a.x);
      if (pt.x < xCross) inside = !inside;
    }
  }
  return inside;
}
