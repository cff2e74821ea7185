/**
 * Serial line server for the detector protocol, over stdio or TCP.
 *
 * Requests are answered strictly in order. A malformed request yields an
 * error response (with the best-effort id) and the server keeps running;
 * a per-request inference failure likewise errors only that id.
 */

import * as net from "node:net";
import * as readline from "node:readline";
import type { Readable, Writable } from "node:stream";
import {
  Detection,
  GrayFrame,
  ProtocolError,
  parseRequest,
  serializeError,
  serializeResponse,
} from "./protocol.js";

export type Detector = (frame: GrayFrame) => Detection[] | Promise<Detection[]>;

export interface ServeOptions {
  detector: Detector;
  /** Drop emitted detections scoring below this floor. */
  minConfidence: number;
}

export async function handleLine(line: string, options: ServeOptions): Promise<string> {
  let id = 0;
  try {
    const request = parseRequest(line);
    id = request.id;
    const detections = await options.detector(request.frame);
    const kept = detections.filter((d) => d.obj >= options.minConfidence);
    return serializeResponse(id, kept);
  } catch (err) {
    if (err instanceof ProtocolError) {
      return serializeError(err.requestId || id, err.message);
    }
    return serializeError(id, `inference failed: ${(err as Error).message}`);
  }
}

async function serveStream(
  input: Readable,
  output: Writable,
  options: ServeOptions,
): Promise<void> {
  const lines = readline.createInterface({ input, crlfDelay: Infinity });
  for await (const line of lines) {
    if (!line.trim()) continue;
    output.write((await handleLine(line, options)) + "\n");
  }
}

export async function serveStdio(options: ServeOptions): Promise<void> {
  await serveStream(process.stdin, process.stdout, options);
}

export function serveTcp(
  host: string,
  port: number,
  options: ServeOptions,
): Promise<net.Server> {
  return new Promise((resolve, reject) => {
    const server = net.createServer((socket) => {
      serveStream(socket, socket, options)
        .catch(() => undefined)
        .finally(() => socket.end());
    });
    server.once("error", reject);
    server.listen(port, host, () => resolve(server));
  });
}
