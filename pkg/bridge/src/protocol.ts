/**
 * Newline-delimited JSON detector protocol.
 *
 * request:  {"v":1,"id":<uint64>,"width":<int>,"height":<int>,
 *            "pixels":"<base64 row-major 8-bit intensities>"}
 * response: {"v":1,"id":<same>,"detections":[{"box":[x,y,w,h],
 *            "obj":<float>,"cls":"<string>"}]}
 * error:    {"v":1,"id":<uint64>,"error":"<message>"}
 *
 * Responses must be emitted in request order with ids echoed exactly.
 */

export const PROTOCOL_VERSION = 1;

export interface GrayFrame {
  width: number;
  height: number;
  /** Row-major 8-bit intensities, length width * height. */
  pixels: Uint8Array;
}

export interface Detection {
  /** Top-left x, y plus width, height in pixels of the request image. */
  box: [number, number, number, number];
  obj: number;
  cls: string;
}

export interface Request {
  id: number;
  frame: GrayFrame;
}

export class ProtocolError extends Error {
  /** Best-effort request id recovered from the malformed message. */
  readonly requestId: number;

  constructor(message: string, requestId = 0) {
    super(message);
    this.requestId = requestId;
  }
}

function recoverId(value: unknown): number {
  if (typeof value === "object" && value !== null && "id" in value) {
    const id = (value as { id: unknown }).id;
    if (typeof id === "number" && Number.isInteger(id) && id >= 0) return id;
  }
  return 0;
}

export function parseRequest(line: string): Request {
  let msg: unknown;
  try {
    msg = JSON.parse(line);
  } catch (err) {
    throw new ProtocolError(`request is not valid JSON: ${(err as Error).message}`);
  }
  if (typeof msg !== "object" || msg === null || Array.isArray(msg)) {
    throw new ProtocolError("request is not a JSON object");
  }
  const rec = msg as Record<string, unknown>;
  const id = recoverId(rec);
  if (rec.v !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version: ${JSON.stringify(rec.v)}`, id);
  }
  if (typeof rec.id !== "number" || !Number.isInteger(rec.id) || rec.id < 0) {
    throw new ProtocolError("request id must be a non-negative integer", id);
  }
  const width = rec.width;
  const height = rec.height;
  if (
    typeof width !== "number" || typeof height !== "number" ||
    !Number.isInteger(width) || !Number.isInteger(height) ||
    width < 1 || height < 1
  ) {
    throw new ProtocolError("width and height must be positive integers", id);
  }
  if (typeof rec.pixels !== "string") {
    throw new ProtocolError("pixels must be a base64 string", id);
  }
  const pixels = Buffer.from(rec.pixels, "base64");
  if (pixels.length !== width * height) {
    throw new ProtocolError(
      `pixel payload holds ${pixels.length} bytes, expected ${width * height}`,
      id,
    );
  }
  return { id: rec.id, frame: { width, height, pixels: new Uint8Array(pixels) } };
}

export function serializeResponse(id: number, detections: Detection[]): string {
  return JSON.stringify({
    v: PROTOCOL_VERSION,
    id,
    detections: detections.map((d) => ({ box: d.box, obj: d.obj, cls: d.cls })),
  });
}

export function serializeError(id: number, message: string): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, id, error: message });
}
