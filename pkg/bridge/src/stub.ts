/**
 * Built-in stub detector: reports one box covering the brightest quadrant
 * of the frame, with objectness equal to that quadrant's mean intensity.
 * Deterministic, model-free, and cheap; useful for wiring checks and as a
 * desk-scale attack target.
 */

import type { Detection, GrayFrame } from "./protocol.js";

function quadrantMean(
  frame: GrayFrame,
  x: number,
  y: number,
  w: number,
  h: number,
): number {
  let sum = 0;
  for (let row = y; row < y + h; row++) {
    const base = row * frame.width;
    for (let col = x; col < x + w; col++) {
      sum += frame.pixels[base + col];
    }
  }
  return sum / (w * h) / 255;
}

export function stubDetect(frame: GrayFrame): Detection[] {
  const cx = Math.floor(frame.width / 2);
  const cy = Math.floor(frame.height / 2);
  const quadrants: Array<[number, number, number, number]> = [
    [0, 0, cx, cy],
    [cx, 0, frame.width - cx, cy],
    [0, cy, cx, frame.height - cy],
    [cx, cy, frame.width - cx, frame.height - cy],
  ];
  let best: [number, number, number, number] | null = null;
  let bestMean = -1;
  for (const [x, y, w, h] of quadrants) {
    if (w < 1 || h < 1) continue;
    const mean = quadrantMean(frame, x, y, w, h);
    if (mean > bestMean) {
      bestMean = mean;
      best = [x, y, w, h];
    }
  }
  if (best === null) return [];
  return [{ box: best, obj: bestMean, cls: "person" }];
}
