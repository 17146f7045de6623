import { parseArgs } from "node:util";
import { mkdtempSync, rmSync, readFileSync } from "node:fs";
import { execFileSync } from "node:child_process";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { deskConfig, fullConfig, DTConfig } from "./model.js";
import { evalAccuracy, loadCheckpoint, saveCheckpoint, train } from "./train.js";
import { serveStream, serveTcp } from "./serve.js";
import { DEFAULT_ENGINE, factorRange, runSweep, writeSweep } from "./sweep.js";
import { groupTrajectories, readDataset, splitSamples } from "./data.js";
import { mulberry32 } from "./rng.js";

const SELF = fileURLToPath(new URL("./cli.js", import.meta.url));

function usage(): never {
  console.error(
    "usage: dt-trainer <train|serve|sweep|eval> [options]\n" +
    "  train --data FILE --out CKPT [--preset desk|full] [--epochs N] [--batch N]\n" +
    "        [--context N] [--lr F] [--seed N] [--holdout F] [--early-stop F]\n" +
    "        [--rollout-instances TOKEN --rollout-every N --rollout-steps N]\n" +
    "  serve --checkpoint CKPT [--temperature F] [--listen PORT] [--seed N]\n" +
    "  sweep --instances TOKEN... --steps N --out FILE [--checkpoint CKPT]\n" +
    "        [--factors START:STOP:STEP] [--seed N] [--engine CMD]\n" +
    "  eval  --checkpoint CKPT --data FILE [--holdout F] [--seed N]",
  );
  process.exit(2);
}

function engineArgv(spec: string | undefined): string[] {
  return spec === undefined ? DEFAULT_ENGINE : spec.split(" ").filter((s) => s !== "");
}

function cmdTrain(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      data: { type: "string" },
      out: { type: "string" },
      preset: { type: "string", default: "desk" },
      epochs: { type: "string" },
      batch: { type: "string" },
      context: { type: "string" },
      lr: { type: "string" },
      seed: { type: "string", default: "7" },
      holdout: { type: "string", default: "0.2" },
      "early-stop": { type: "string" },
      "rollout-instances": { type: "string", multiple: true },
      "rollout-every": { type: "string", default: "33" },
      "rollout-steps": { type: "string", default: "50" },
      engine: { type: "string" },
    },
  });
  if (!values.data || !values.out) usage();
  const base = values.preset === "full" ? fullConfig : deskConfig;
  const config: DTConfig = {
    ...base,
    ...(values.epochs ? { epochs: Number(values.epochs) } : {}),
    ...(values.batch ? { batch: Number(values.batch) } : {}),
    ...(values.context ? { K: Number(values.context) } : {}),
    ...(values.lr ? { lr: Number(values.lr) } : {}),
  };
  const rolloutInstances = values["rollout-instances"] ?? [];
  const engine = engineArgv(values.engine);
  let rollout;
  if (rolloutInstances.length > 0) {
    const steps = Number(values["rollout-steps"]);
    rollout = (model: import("./model.js").DTModel, _epoch: number): number => {
      const dir = mkdtempSync(join(tmpdir(), "dt-rollout-"));
      try {
        const ckptPath = join(dir, "rollout.json");
        saveCheckpoint(model.toCheckpoint(), ckptPath);
        const out = join(dir, "report.json");
        execFileSync(engine[0], [
          ...engine.slice(1), "solve",
          "--instances", ...rolloutInstances,
          "--steps", String(steps),
          "--context-length", String(config.K),
          "--policy", "external",
          "--policy-cmd", `node ${SELF} serve --checkpoint ${ckptPath}`,
          "--no-optima", "--quiet", "--out", out,
        ], { stdio: ["ignore", "ignore", "inherit"] });
        const report = JSON.parse(readFileSync(out, "utf-8"));
        return report.summary.mean_best as number;
      } finally {
        rmSync(dir, { recursive: true, force: true });
      }
    };
  }
  const result = train({
    config,
    datasetPath: values.data,
    seed: Number(values.seed),
    holdOutFraction: Number(values.holdout),
    earlyStopAccuracy: values["early-stop"] ? Number(values["early-stop"]) : undefined,
    rollout,
    rolloutEvery: Number(values["rollout-every"]),
    log: (m) => console.error(m),
  });
  saveCheckpoint(result.best.checkpoint, values.out);
  console.log(
    `trained ${result.epochsRun} epochs; best by ${result.best.by} ` +
    `(${result.best.metric.toFixed(4)}) at epoch ${result.best.epoch + 1}; ` +
    `checkpoint written to ${values.out}`,
  );
  return 0;
}

async function cmdServe(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      checkpoint: { type: "string" },
      temperature: { type: "string", default: "0" },
      listen: { type: "string" },
      seed: { type: "string", default: "0" },
      verbose: { type: "boolean", default: false },
    },
  });
  if (!values.checkpoint) usage();
  const model = loadCheckpoint(values.checkpoint);
  const options = {
    model,
    temperature: Number(values.temperature),
    seed: Number(values.seed),
    log: values.verbose ? (m: string) => console.error(m) : undefined,
  };
  if (values.listen !== undefined) {
    const port = await serveTcp(Number(values.listen), options);
    console.error(`dt-trainer serving on 127.0.0.1:${port}`);
    return await new Promise<number>(() => {});
  }
  await serveStream(process.stdin, process.stdout, options);
  return 0;
}

function cmdSweep(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      instances: { type: "string", multiple: true },
      steps: { type: "string", default: "200" },
      out: { type: "string" },
      checkpoint: { type: "string" },
      factors: { type: "string" },
      seed: { type: "string", default: "0" },
      engine: { type: "string" },
      timeout: { type: "string", default: "30" },
    },
  });
  if (!values.instances || values.instances.length === 0 || !values.out) usage();
  let factors;
  if (values.factors) {
    const parts = values.factors.split(":").map(Number);
    if (parts.length !== 3 || parts.some((p) => !Number.isFinite(p))) usage();
    factors = factorRange(parts[0], parts[1], parts[2]);
  }
  let policyArgs: string[] = [];
  if (values.checkpoint) {
    const model = loadCheckpoint(values.checkpoint);
    policyArgs = [
      "--context-length", String(model.config.K),
      "--policy", "external",
      "--policy-cmd", `node ${SELF} serve --checkpoint ${values.checkpoint}`,
      "--policy-timeout", values.timeout,
    ];
  }
  const rows = runSweep({
    instances: values.instances,
    steps: Number(values.steps),
    engine: engineArgv(values.engine),
    policyArgs,
    factors,
    seed: Number(values.seed),
    log: (m) => console.error(m),
  });
  writeSweep(rows, values.out);
  console.log(`wrote ${rows.length} sweep rows to ${values.out}`);
  return 0;
}

function cmdEval(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      checkpoint: { type: "string" },
      data: { type: "string" },
      holdout: { type: "string", default: "0.2" },
      seed: { type: "string", default: "7" },
    },
  });
  if (!values.checkpoint || !values.data) usage();
  const model = loadCheckpoint(values.checkpoint);
  const { records } = readDataset(values.data);
  const { heldOut } = splitSamples(
    groupTrajectories(records), model.config.K,
    Number(values.holdout), mulberry32(Number(values.seed)),
  );
  const accuracy = evalAccuracy(model, heldOut, model.config.batch);
  console.log(`held-out action accuracy: ${(accuracy * 100).toFixed(2)}% `
    + `over ${heldOut.length} windows`);
  return 0;
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  switch (command) {
    case "train": return cmdTrain(rest);
    case "serve": return await cmdServe(rest);
    case "sweep": return cmdSweep(rest);
    case "eval": return cmdEval(rest);
    default: usage();
  }
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  },
);
