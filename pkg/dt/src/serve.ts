/**
 * Policy server speaking the engine's line-delimited JSON frame protocol
 * over stdio or a TCP socket. One frame in, at most one frame out: hello
 * and reset are notifications, every act gets exactly one action or error
 * response. Protocol violations are answered with error frames and logged,
 * never thrown, so a misbehaving peer cannot kill the server.
 */

import { createServer } from "node:net";
import { createInterface } from "node:readline";
import { Readable, Writable } from "node:stream";
import { actionCount } from "./data.js";
import { DTModel, Sample } from "./model.js";
import { mulberry32, Rng } from "./rng.js";

const PROTOCOL_NAME = "jobshop-policy";
const PROTOCOL_VERSION = 1;

export interface ServeOptions {
  model: DTModel;
  temperature?: number;
  seed?: number;
  log?: (message: string) => void;
}

interface EpisodeContext {
  lowerBound: number;
  episodeLen: number;
  mismatch: string | null;
}

export class FrameHandler {
  private model: DTModel;
  private temperature: number;
  private rng: Rng;
  private log: (message: string) => void;
  private context: EpisodeContext | null = null;

  constructor(options: ServeOptions) {
    this.model = options.model;
    this.temperature = options.temperature ?? 0;
    this.rng = mulberry32(options.seed ?? 0);
    this.log = options.log ?? (() => {});
  }

  /** One response frame for an incoming line, or null for notifications. */
  handleLine(line: string): string | null {
    const started = process.hrtime.bigint();
    let frame: Record<string, unknown>;
    try {
      frame = JSON.parse(line);
    } catch {
      this.log("dropping malformed frame");
      return JSON.stringify({ type: "error", message: "malformed frame" });
    }
    switch (frame.type) {
      case "hello": {
        if (frame.protocol !== PROTOCOL_NAME || frame.version !== PROTOCOL_VERSION) {
          this.log(`unexpected hello: ${line.trim()}`);
        }
        return null;
      }
      case "reset":
        this.context = this.beginEpisode(frame);
        return null;
      case "act": {
        const response = this.answerAct(frame);
        const micros = Number(process.hrtime.bigint() - started) / 1000;
        this.log(`act step ${frame.step} answered in ${micros.toFixed(0)}us`);
        return response;
      }
      default:
        this.log(`unknown frame type ${String(frame.type)}`);
        return JSON.stringify({
          type: "error", message: `unknown frame type ${String(frame.type)}`,
        });
    }
  }

  private beginEpisode(frame: Record<string, unknown>): EpisodeContext {
    const instance = (frame.instance ?? {}) as Record<string, unknown>;
    const context: EpisodeContext = {
      lowerBound: Number(instance.lower_bound) || 1,
      episodeLen: Number(frame.episode_len) || 1,
      mismatch: null,
    };
    const contextLength = Number(frame.context_length);
    if (contextLength !== this.model.config.K) {
      context.mismatch = `engine context length ${contextLength} does not match model K ${this.model.config.K}`;
    }
    const announced = actionCount(String(frame.action_set));
    if (announced !== this.model.numActions) {
      context.mismatch = `engine action set ${frame.action_set} has ${announced} actions, model expects ${this.model.numActions}`;
    }
    if (context.mismatch) this.log(context.mismatch);
    return context;
  }

  private answerAct(frame: Record<string, unknown>): string {
    if (this.context === null) {
      return JSON.stringify({ type: "error", message: "act before reset" });
    }
    if (this.context.mismatch !== null) {
      return JSON.stringify({ type: "error", message: this.context.mismatch });
    }
    try {
      const sample = this.buildSample(frame);
      const action = this.model.act(sample, this.temperature, this.rng);
      return JSON.stringify({ type: "action", action_id: action });
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      this.log(`act failed: ${message}`);
      return JSON.stringify({ type: "error", message });
    }
  }

  private buildSample(frame: Record<string, unknown>): Sample {
    const window = frame.window as Record<string, unknown>;
    if (typeof window !== "object" || window === null) throw new Error("act frame has no window");
    const rtg = window.rtg as number[];
    const features = window.features as number[][];
    const actions = window.actions as number[];
    const maskRaw = window.mask as number[];
    const K = this.model.config.K;
    if (!Array.isArray(rtg) || rtg.length !== K + 1) {
      throw new Error(`window rtg length ${rtg?.length} does not match K ${K}`);
    }
    const step = Number(frame.step);
    const steps = rtg.map((_, s) => Math.max(0, step - (K - s)));
    return {
      rtg,
      features,
      actions,
      mask: maskRaw.map((v) => v !== 0),
      steps,
      lowerBound: this.context!.lowerBound,
      episodeLen: this.context!.episodeLen,
    };
  }
}

export function serveStream(input: Readable, output: Writable, options: ServeOptions): Promise<void> {
  const handler = new FrameHandler(options);
  const reader = createInterface({ input, crlfDelay: Infinity });
  return new Promise((resolve) => {
    reader.on("line", (line) => {
      if (line.trim() === "") return;
      const response = handler.handleLine(line);
      if (response !== null) output.write(response + "\n");
    });
    reader.on("close", resolve);
  });
}

export function serveTcp(port: number, options: ServeOptions): Promise<number> {
  const server = createServer((socket) => {
    const handler = new FrameHandler(options);
    const reader = createInterface({ input: socket, crlfDelay: Infinity });
    reader.on("line", (line) => {
      if (line.trim() === "") return;
      const response = handler.handleLine(line);
      if (response !== null) socket.write(response + "\n");
    });
    socket.on("error", () => socket.destroy());
  });
  return new Promise((resolve, reject) => {
    server.once("error", reject);
    server.listen(port, "127.0.0.1", () => {
      const address = server.address();
      const bound = typeof address === "object" && address !== null ? address.port : port;
      (options.log ?? (() => {}))(`listening on 127.0.0.1:${bound}`);
      resolve(bound);
    });
  });
}
