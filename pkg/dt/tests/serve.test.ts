import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { connect } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { PassThrough } from "node:stream";
import { fileURLToPath } from "node:url";
import { DTConfig, DTModel, deskConfig } from "../src/model.js";
import { saveCheckpoint } from "../src/train.js";
import { FrameHandler, serveStream } from "../src/serve.js";

const CLI = fileURLToPath(new URL("../dist/cli.js", import.meta.url));
const ENGINE_DIR = "/root/pkg";

const tinyConfig: DTConfig = {
  ...deskConfig, layers: 1, heads: 2, embedDim: 16, K: 5, dropout: 0,
};

function tinyModel(): DTModel {
  return new DTModel(tinyConfig, 10, 200, 42);
}

const hello = JSON.stringify({ type: "hello", protocol: "jobshop-policy", version: 1 });

function resetFrame(contextLength: number, actionSet = "ANP"): string {
  return JSON.stringify({
    type: "reset",
    instance: {
      id: "unit", num_jobs: 3, num_machines: 3,
      lower_bound: 100, initial_makespan: 130,
    },
    action_set: actionSet,
    episode_len: 50,
    rtg: 60,
    context_length: contextLength,
  });
}

function actFrame(K: number, step: number): string {
  const k1 = K + 1;
  const real = Math.min(step + 1, k1);
  const features: number[][] = [];
  const rtg: number[] = [];
  const mask: number[] = [];
  for (let s = 0; s < k1; s++) {
    const isReal = s >= k1 - real;
    mask.push(isReal ? 1 : 0);
    rtg.push(isReal ? 60 - s : 0);
    features.push(isReal
      ? [130, 128, 1, 1, 0, 0, 0, 0, step - (K - s), 2, 0]
      : new Array(11).fill(0));
  }
  return JSON.stringify({
    type: "act",
    step,
    rtg: 60,
    features: features[K],
    window: { rtg, features, actions: new Array(K).fill(0), mask },
    action_set: "ANP",
  });
}

function parse(response: string | null): Record<string, unknown> {
  expect(response).not.toBeNull();
  return JSON.parse(response!);
}

describe("frame handling", () => {
  it("treats hello and reset as notifications", () => {
    const handler = new FrameHandler({ model: tinyModel() });
    expect(handler.handleLine(hello)).toBeNull();
    expect(handler.handleLine(resetFrame(5))).toBeNull();
  });

  it("answers a well-formed act with an action in range", () => {
    const handler = new FrameHandler({ model: tinyModel() });
    handler.handleLine(hello);
    handler.handleLine(resetFrame(5));
    const reply = parse(handler.handleLine(actFrame(5, 0)));
    expect(reply.type).toBe("action");
    expect(reply.action_id).toBeGreaterThanOrEqual(0);
    expect(reply.action_id).toBeLessThan(10);
  });

  it("is deterministic at temperature zero", () => {
    const handler = new FrameHandler({ model: tinyModel() });
    handler.handleLine(resetFrame(5));
    const a = parse(handler.handleLine(actFrame(5, 3)));
    const b = parse(handler.handleLine(actFrame(5, 3)));
    expect(a.action_id).toBe(b.action_id);
  });

  it("rejects act before reset", () => {
    const handler = new FrameHandler({ model: tinyModel() });
    const reply = parse(handler.handleLine(actFrame(5, 0)));
    expect(reply.type).toBe("error");
    expect(reply.message).toMatch(/act before reset/);
  });

  it("rejects a context length mismatch announced at reset", () => {
    const handler = new FrameHandler({ model: tinyModel() });
    handler.handleLine(resetFrame(20));
    const reply = parse(handler.handleLine(actFrame(20, 0)));
    expect(reply.type).toBe("error");
    expect(reply.message).toMatch(/context length 20 does not match model K 5/);
  });

  it("rejects an action set mismatch announced at reset", () => {
    const handler = new FrameHandler({ model: tinyModel() });
    handler.handleLine(resetFrame(5, "AN"));
    const reply = parse(handler.handleLine(actFrame(5, 0)));
    expect(reply.type).toBe("error");
    expect(reply.message).toMatch(/model expects 10/);
  });

  it("answers malformed and unknown frames with errors", () => {
    const handler = new FrameHandler({ model: tinyModel() });
    expect(parse(handler.handleLine("{nope")).message).toMatch(/malformed frame/);
    const reply = parse(handler.handleLine(JSON.stringify({ type: "ping" })));
    expect(reply.message).toMatch(/unknown frame type ping/);
  });

  it("reports a bad window instead of crashing", () => {
    const handler = new FrameHandler({ model: tinyModel() });
    handler.handleLine(resetFrame(5));
    const frame = JSON.parse(actFrame(5, 0));
    frame.window.rtg = [1, 2];
    const reply = parse(handler.handleLine(JSON.stringify(frame)));
    expect(reply.type).toBe("error");
    expect(reply.message).toMatch(/rtg length 2 does not match K 5/);
  });

  it("survives an episode reset mid-stream", () => {
    const handler = new FrameHandler({ model: tinyModel() });
    handler.handleLine(resetFrame(5));
    parse(handler.handleLine(actFrame(5, 0)));
    handler.handleLine(resetFrame(5));
    const reply = parse(handler.handleLine(actFrame(5, 0)));
    expect(reply.type).toBe("action");
  });
});

describe("stream serving", () => {
  it("writes one response line per act over stdio-like streams", async () => {
    const input = new PassThrough();
    const output = new PassThrough();
    const done = serveStream(input, output, { model: tinyModel() });
    input.write(hello + "\n");
    input.write(resetFrame(5) + "\n");
    input.write(actFrame(5, 0) + "\n");
    input.write("\n");
    input.write(actFrame(5, 1) + "\n");
    input.end();
    await done;
    const lines = output.read().toString().trim().split("\n");
    expect(lines).toHaveLength(2);
    for (const line of lines) {
      expect(JSON.parse(line).type).toBe("action");
    }
  });
});

describe("served over the wire", () => {
  let dir: string;
  let checkpoint: string;

  beforeAll(() => {
    dir = mkdtempSync(join(tmpdir(), "dtserve-"));
    checkpoint = join(dir, "model.ckpt");
    saveCheckpoint(tinyModel().toCheckpoint(), checkpoint);
  });

  afterAll(() => {
    rmSync(dir, { recursive: true, force: true });
  });

  it("serves TCP connections from the CLI", async () => {
    const child: ChildProcess = spawn("node", [
      CLI, "serve", "--checkpoint", checkpoint, "--listen", "0", "--verbose",
    ], { stdio: ["ignore", "ignore", "pipe"] });
    try {
      const port = await new Promise<number>((resolve, reject) => {
        const timer = setTimeout(() => reject(new Error("no listen line")), 15000);
        let buf = "";
        child.stderr!.on("data", (chunk: Buffer) => {
          buf += chunk.toString();
          const m = buf.match(/listening on 127\.0\.0\.1:(\d+)/);
          if (m) {
            clearTimeout(timer);
            resolve(Number(m[1]));
          }
        });
        child.on("error", reject);
      });
      const replies = await new Promise<string[]>((resolve, reject) => {
        const socket = connect(port, "127.0.0.1");
        const timer = setTimeout(() => reject(new Error("socket timed out")), 15000);
        let buf = "";
        socket.on("connect", () => {
          socket.write(hello + "\n" + resetFrame(5) + "\n" + actFrame(5, 0) + "\n");
        });
        socket.on("data", (chunk) => {
          buf += chunk.toString();
          if (buf.includes("\n")) {
            clearTimeout(timer);
            socket.end();
            resolve(buf.trim().split("\n"));
          }
        });
        socket.on("error", reject);
      });
      expect(replies).toHaveLength(1);
      const reply = JSON.parse(replies[0]);
      expect(reply.type).toBe("action");
      expect(reply.action_id).toBeLessThan(10);
    } finally {
      child.kill();
    }
  });

  it("completes an engine episode end to end", () => {
    execFileSync("python3", [
      "-m", "shopsearch", "gen", "--sizes", "5x5", "--count", "1",
      "--seed", "6", "--out", join(dir, "inst"),
    ], { cwd: ENGINE_DIR });
    const out = join(dir, "report.json");
    execFileSync("python3", [
      "-m", "shopsearch", "solve",
      "--instances", join(dir, "inst"),
      "--steps", "30",
      "--policy", "external",
      "--policy-cmd", `node ${CLI} serve --checkpoint ${checkpoint}`,
      "--context-length", "5",
      "--no-optima", "--quiet",
      "--out", out,
    ], { cwd: ENGINE_DIR });
    const report = JSON.parse(readFileSync(out, "utf-8"));
    expect(report.rows).toHaveLength(1);
    expect(report.rows[0].error).toBeNull();
    expect(report.rows[0].best_makespan).toBeLessThanOrEqual(report.rows[0].initial_makespan);
    expect(report.rows[0].best_series.length).toBeGreaterThan(0);
  }, 120000);

  it("reproduces the same episode when run twice", () => {
    const outA = join(dir, "a.json");
    const outB = join(dir, "b.json");
    for (const out of [outA, outB]) {
      execFileSync("python3", [
        "-m", "shopsearch", "solve",
        "--instances", join(dir, "inst"),
        "--steps", "20",
        "--policy", "external",
        "--policy-cmd", `node ${CLI} serve --checkpoint ${checkpoint}`,
        "--context-length", "5",
        "--seed", "4",
        "--no-optima", "--quiet",
        "--out", out,
      ], { cwd: ENGINE_DIR });
    }
    const a = JSON.parse(readFileSync(outA, "utf-8"));
    const b = JSON.parse(readFileSync(outB, "utf-8"));
    expect(a.rows[0].best_makespan).toBe(b.rows[0].best_makespan);
    expect(a.rows[0].best_series).toEqual(b.rows[0].best_series);
  }, 120000);
});
