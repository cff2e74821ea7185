/**
 * Detector bridge CLI.
 *
 *   node dist/main.js --stub --listen stdio
 *   node dist/main.js --model ./my_detector.js --listen 127.0.0.1:9000
 *
 * Flags:
 *   --stub                    built-in brightest-quadrant detector
 *   --model <path>            JS module exporting detect(input)
 *   --listen stdio|host:port  transport (default stdio)
 *   --min-confidence <f>      confidence floor for emitted detections
 *   --box-format tlwh|xyxy    model box convention (default tlwh)
 *   --class-map <json>        label remap, e.g. '{"0":"person"}'
 */

import * as fs from "node:fs";
import { loadModel, makeModelInput, normalizeDetection, BoxFormat } from "./model.js";
import type { Detection, GrayFrame } from "./protocol.js";
import { Detector, serveStdio, serveTcp } from "./server.js";
import { stubDetect } from "./stub.js";

export interface BridgeConfig {
  listen: string;
  model: string | "stub";
  minConfidence: number;
  boxFormat: BoxFormat;
  classMap: Record<string, string>;
}

export function parseArgs(argv: string[]): BridgeConfig {
  const config: BridgeConfig = {
    listen: "stdio",
    model: "",
    minConfidence: 0,
    boxFormat: "tlwh",
    classMap: {},
  };
  let stub = false;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`${arg} needs a value`);
      return argv[++i];
    };
    switch (arg) {
      case "--stub":
        stub = true;
        break;
      case "--model":
        config.model = next();
        break;
      case "--listen":
        config.listen = next();
        break;
      case "--min-confidence":
        config.minConfidence = Number(next());
        break;
      case "--box-format": {
        const fmt = next();
        if (fmt !== "tlwh" && fmt !== "xyxy") {
          throw new Error(`--box-format must be tlwh or xyxy, got ${fmt}`);
        }
        config.boxFormat = fmt;
        break;
      }
      case "--class-map": {
        const value = next();
        const text = value.trim().startsWith("{")
          ? value
          : fs.readFileSync(value, "utf-8");
        config.classMap = JSON.parse(text) as Record<string, string>;
        break;
      }
      default:
        throw new Error(`unknown flag: ${arg}`);
    }
  }
  if (stub && config.model) {
    throw new Error("--stub and --model are mutually exclusive");
  }
  if (stub) config.model = "stub";
  if (!config.model) {
    throw new Error("pick a detector: --stub or --model <path>");
  }
  if (!(config.minConfidence >= 0 && config.minConfidence <= 1)) {
    throw new Error("--min-confidence must be in [0, 1]");
  }
  return config;
}

export async function buildDetector(config: BridgeConfig): Promise<Detector> {
  if (config.model === "stub") {
    return (frame: GrayFrame) => stubDetect(frame);
  }
  const detect = await loadModel(config.model);
  return async (frame: GrayFrame): Promise<Detection[]> => {
    const raw = await detect(makeModelInput(frame));
    return raw.map((d) => normalizeDetection(d, config.boxFormat, config.classMap));
  };
}

async function run(): Promise<void> {
  const config = parseArgs(process.argv.slice(2));
  const detector = await buildDetector(config);
  const options = { detector, minConfidence: config.minConfidence };
  if (config.listen === "stdio") {
    await serveStdio(options);
    return;
  }
  const sep = config.listen.lastIndexOf(":");
  const host = config.listen.slice(0, sep);
  const port = Number(config.listen.slice(sep + 1));
  if (!host || !Number.isInteger(port) || port < 1 || port > 65535) {
    throw new Error(`--listen wants stdio or host:port, got ${config.listen}`);
  }
  const server = await serveTcp(host, port, options);
  console.error(`listening on ${host}:${port}`);
  await new Promise((resolve) => server.once("close", resolve));
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;

if (invokedDirectly) {
  run().catch((err) => {
    console.error(`error: ${(err as Error).message}`);
    process.exit(1);
  });
}
