/**
 * Adapter for user-supplied detection models.
 *
 * A model source is a JS/TS module (dynamically imported) exporting
 *   detect(input: ModelInput) -> ModelDetection[] | Promise<ModelDetection[]>
 * either directly, as part of a default export, or via a createDetector()
 * factory. Whatever box convention the model speaks is converted here;
 * the wire format is always top-left x,y plus width,height in pixels of
 * the request image. Grayscale frames are replicated to three channels on
 * demand for models expecting color input.
 */

import { pathToFileURL } from "node:url";
import type { Detection, GrayFrame } from "./protocol.js";

export interface ModelInput {
  width: number;
  height: number;
  /** Row-major 8-bit grayscale intensities. */
  pixels: Uint8Array;
  /** Grayscale replicated to interleaved RGB, for color-input models. */
  rgb(): Uint8Array;
}

export interface ModelDetection {
  box: [number, number, number, number] | { x: number; y: number; w: number; h: number };
  obj?: number;
  score?: number;
  cls?: string;
  label?: string;
}

export type DetectFn = (input: ModelInput) => ModelDetection[] | Promise<ModelDetection[]>;

export type BoxFormat = "tlwh" | "xyxy";

export async function loadModel(source: string): Promise<DetectFn> {
  let mod: Record<string, unknown>;
  try {
    mod = (await import(pathToFileURL(source).href)) as Record<string, unknown>;
  } catch (err) {
    throw new Error(`cannot load model module ${source}: ${(err as Error).message}`);
  }
  const candidate =
    mod.detect ??
    (typeof mod.default === "object" && mod.default !== null
      ? (mod.default as Record<string, unknown>).detect
      : mod.default);
  if (typeof candidate === "function") {
    return candidate as DetectFn;
  }
  if (typeof mod.createDetector === "function") {
    const built = await (mod.createDetector as () => unknown)();
    if (typeof built === "function") return built as DetectFn;
  }
  throw new Error(
    `model module ${source} exports no detect(input) function or createDetector() factory`,
  );
}

export function makeModelInput(frame: GrayFrame): ModelInput {
  return {
    width: frame.width,
    height: frame.height,
    pixels: frame.pixels,
    rgb(): Uint8Array {
      const out = new Uint8Array(frame.pixels.length * 3);
      for (let i = 0; i < frame.pixels.length; i++) {
        out[3 * i] = out[3 * i + 1] = out[3 * i + 2] = frame.pixels[i];
      }
      return out;
    },
  };
}

function clampBox(
  x: number,
  y: number,
  w: number,
  h: number,
): [number, number, number, number] {
  return [Math.round(x), Math.round(y), Math.max(1, Math.round(w)), Math.max(1, Math.round(h))];
}

export function normalizeDetection(
  raw: ModelDetection,
  boxFormat: BoxFormat,
  classMap: Record<string, string>,
): Detection {
  let x: number, y: number, w: number, h: number;
  if (Array.isArray(raw.box)) {
    const [a, b, c, d] = raw.box;
    if (boxFormat === "xyxy") {
      x = a; y = b; w = c - a; h = d - b;
    } else {
      x = a; y = b; w = c; h = d;
    }
  } else {
    ({ x, y, w, h } = raw.box);
  }
  const score = raw.obj ?? raw.score;
  if (typeof score !== "number" || Number.isNaN(score)) {
    throw new Error("model detection lacks an obj/score number");
  }
  const label = raw.cls ?? raw.label ?? "person";
  return {
    box: clampBox(x, y, w, h),
    obj: Math.min(1, Math.max(0, score)),
    cls: classMap[label] ?? label,
  };
}
