import { spawn } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";
import * as readline from "node:readline";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { buildDetector, parseArgs } from "../src/main.js";
import { handleLine } from "../src/server.js";
import { stubDetect } from "../src/stub.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const GOLDEN = path.join(here, "..", "golden", "transcript.ndjson");

const stubOptions = { detector: stubDetect, minConfidence: 0 };

describe("handleLine", () => {
  it("replays the golden transcript byte-identically", async () => {
    const lines = fs.readFileSync(GOLDEN, "utf-8").split("\n").filter(Boolean);
    expect(lines.length % 2).toBe(0);
    for (let i = 0; i < lines.length; i += 2) {
      const reply = await handleLine(lines[i], stubOptions);
      expect(reply).toBe(lines[i + 1]);
    }
  });

  it("answers malformed lines with an error and keeps serving", async () => {
    const bad = await handleLine("{broken", stubOptions);
    const msg = JSON.parse(bad);
    expect(msg.v).toBe(1);
    expect(typeof msg.error).toBe("string");
    const goodLine = fs.readFileSync(GOLDEN, "utf-8").split("\n")[0];
    const good = JSON.parse(await handleLine(goodLine, stubOptions));
    expect(good.detections).toHaveLength(1);
  });

  it("errors only the failing request when inference throws", async () => {
    const flaky = {
      detector: () => {
        throw new Error("model exploded");
      },
      minConfidence: 0,
    };
    const line = fs.readFileSync(GOLDEN, "utf-8").split("\n")[0];
    const msg = JSON.parse(await handleLine(line, flaky));
    expect(msg.id).toBe(0);
    expect(msg.error).toMatch(/model exploded/);
  });

  it("applies the confidence floor", async () => {
    const line = fs.readFileSync(GOLDEN, "utf-8").split("\n")[2]; // obj 100/255
    const msg = JSON.parse(await handleLine(line, { detector: stubDetect, minConfidence: 0.5 }));
    expect(msg.detections).toHaveLength(0);
  });

  it("yields schema-valid id-echoing replies on 1000 fuzzed requests", async () => {
    let state = 1234567;
    const rand = () => {
      // xorshift: deterministic fuzz without a seed dependency
      state ^= state << 13;
      state ^= state >>> 17;
      state ^= state << 5;
      return (state >>> 0) / 4294967296;
    };
    for (let i = 0; i < 1000; i++) {
      const width = 1 + Math.floor(rand() * 12);
      const height = 1 + Math.floor(rand() * 12);
      const pixels = Buffer.alloc(width * height);
      for (let j = 0; j < pixels.length; j++) pixels[j] = Math.floor(rand() * 256);
      let line = JSON.stringify({
        v: 1,
        id: i,
        width,
        height,
        pixels: pixels.toString("base64"),
      });
      const mutation = rand();
      let mutated = false;
      if (mutation < 0.15) {
        line = line.slice(0, Math.floor(rand() * line.length));
        mutated = true;
      } else if (mutation < 0.25) {
        line = line.replace('"v":1', '"v":9');
        mutated = true;
      } else if (mutation < 0.35) {
        line = line.replace(`"width":${width}`, '"width":0');
        mutated = true;
      }
      const reply = JSON.parse(await handleLine(line, stubOptions));
      expect(reply.v).toBe(1);
      expect(typeof reply.id).toBe("number");
      if (!mutated) {
        expect(reply.id).toBe(i);
        expect(Array.isArray(reply.detections)).toBe(true);
        for (const det of reply.detections) {
          expect(det.box).toHaveLength(4);
          expect(det.obj).toBeGreaterThanOrEqual(0);
          expect(det.obj).toBeLessThanOrEqual(1);
          expect(typeof det.cls).toBe("string");
        }
      } else {
        expect("error" in reply || reply.id === i).toBe(true);
      }
    }
  });
});

describe("stdio transport", () => {
  it("answers pipelined requests in order over a child process", async () => {
    const mainJs = path.join(here, "..", "dist", "main.js");
    if (!fs.existsSync(mainJs)) {
      throw new Error("run `npm run build` before the server tests");
    }
    const child = spawn("node", [mainJs, "--stub", "--listen", "stdio"], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    const lines = fs.readFileSync(GOLDEN, "utf-8").split("\n").filter(Boolean);
    const requests = lines.filter((_, i) => i % 2 === 0);
    const expected = lines.filter((_, i) => i % 2 === 1);
    child.stdin.write(requests.join("\n") + "\n");
    child.stdin.end();
    const replies: string[] = [];
    const reader = readline.createInterface({ input: child.stdout });
    for await (const reply of reader) {
      replies.push(reply);
    }
    expect(replies).toEqual(expected);
  });
});

describe("argument parsing", () => {
  it("builds a stub config", () => {
    const config = parseArgs(["--stub", "--listen", "stdio"]);
    expect(config.model).toBe("stub");
    expect(config.listen).toBe("stdio");
  });

  it("rejects stub plus model", () => {
    expect(() => parseArgs(["--stub", "--model", "x.js"])).toThrowError(/exclusive/);
  });

  it("requires a detector choice", () => {
    expect(() => parseArgs(["--listen", "stdio"])).toThrowError(/--stub or --model/);
  });

  it("rejects unknown flags", () => {
    expect(() => parseArgs(["--gpu"])).toThrowError(/unknown flag/);
  });
});

describe("model adapter", () => {
  it("loads a user module and converts xyxy boxes", async () => {
    const modPath = path.join(here, "fixture_model.mjs");
    fs.writeFileSync(
      modPath,
      "export function detect(input) {\n" +
        "  return [{ box: [1, 2, 4, 6], score: 0.75, label: '0' }];\n" +
        "}\n",
    );
    try {
      const detector = await buildDetector({
        listen: "stdio",
        model: modPath,
        minConfidence: 0,
        boxFormat: "xyxy",
        classMap: { "0": "person" },
      });
      const dets = await detector({ width: 8, height: 8, pixels: new Uint8Array(64) });
      expect(dets).toEqual([{ box: [1, 2, 3, 4], obj: 0.75, cls: "person" }]);
    } finally {
      fs.unlinkSync(modPath);
    }
  });
});
