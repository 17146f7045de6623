/**
 * Offline behavior-cloning trainer: AdamW with decoupled weight decay on
 * matrix parameters, global-norm gradient clipping, cosine learning rate
 * with warm restarts, and an optional periodic rollout evaluation that
 * drives checkpoint selection by test makespan.
 */

import { readFileSync, writeFileSync } from "node:fs";
import {
  actionCount, groupTrajectories, readDataset, splitSamples,
} from "./data.js";
import { Checkpoint, DTConfig, DTModel, Sample } from "./model.js";
import { mulberry32, shuffle } from "./rng.js";
import { backward, clearTape, clipGrads, noGrad, zeroGrads } from "./tensor.js";

export interface TrainOptions {
  config: DTConfig;
  datasetPath: string;
  seed?: number;
  holdOutFraction?: number;
  /** Mean test makespan for the current model; lower is better. */
  rollout?: (model: DTModel, epoch: number) => number;
  rolloutEvery?: number;
  earlyStopAccuracy?: number;
  maxBatchesPerEpoch?: number;
  log?: (message: string) => void;
}

export interface TrainResult {
  model: DTModel;
  lossSeries: number[];
  accuracySeries: number[];
  epochsRun: number;
  best: { checkpoint: Checkpoint; metric: number; epoch: number; by: string };
}

export function cosineLr(config: DTConfig, epoch: number): number {
  const period = Math.max(1, config.restartPeriod);
  const phase = (epoch % period) / period;
  return 0.5 * config.lr * (1 + Math.cos(Math.PI * phase));
}

interface AdamState {
  m: Float64Array;
  v: Float64Array;
}

export function train(options: TrainOptions): TrainResult {
  const cfg = options.config;
  const log = options.log ?? (() => {});
  const rng = mulberry32(options.seed ?? 7);
  const { meta, records } = readDataset(options.datasetPath);
  if (meta.kind !== "final") throw new Error("training needs a finalized dataset");
  const numActions = actionCount(meta.actionSet);
  const trajectories = groupTrajectories(records);
  const { train: trainSet, heldOut } = splitSamples(
    trajectories, cfg.K, options.holdOutFraction ?? 0.2, rng,
  );
  log(`dataset: ${trajectories.length} trajectories, ${trainSet.length} train / `
    + `${heldOut.length} held-out windows, ${numActions} actions`);

  const model = new DTModel(cfg, numActions, Math.max(1, meta.episodeLen), options.seed ?? 7);
  log(`model: ${model.paramCount()} parameters`);
  const params = model.parameters();
  const states = new Map<string, AdamState>();
  for (const { name, tensor } of params) {
    states.set(name, {
      m: new Float64Array(tensor.data.length),
      v: new Float64Array(tensor.data.length),
    });
  }
  const [beta1, beta2] = cfg.betas;
  const eps = 1e-8;
  let adamStep = 0;

  const lossSeries: number[] = [];
  const accuracySeries: number[] = [];
  let best: TrainResult["best"] | null = null;
  const rolloutEvery = options.rolloutEvery ?? 33;
  let epochsRun = 0;

  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    shuffle(rng, trainSet);
    const lr = cosineLr(cfg, epoch);
    let epochLoss = 0;
    let batches = 0;
    for (let start = 0; start < trainSet.length; start += cfg.batch) {
      if (options.maxBatchesPerEpoch !== undefined && batches >= options.maxBatchesPerEpoch) break;
      const batch = trainSet.slice(start, start + cfg.batch);
      zeroGrads(params.map((p) => p.tensor));
      clearTape();
      const { loss } = model.loss(batch, true, rng);
      if (!Number.isFinite(loss.data[0])) {
        throw new Error(
          `training diverged: loss is not finite at epoch ${epoch}, batch ${batches}`,
        );
      }
      backward(loss);
      clipGrads(params.map((p) => p.tensor), cfg.gradClip);
      adamStep += 1;
      const bc1 = 1 - beta1 ** adamStep;
      const bc2 = 1 - beta2 ** adamStep;
      for (const { name, tensor, decay } of params) {
        const st = states.get(name)!;
        const g = tensor.grad!;
        const wd = decay ? cfg.weightDecay : 0;
        for (let i = 0; i < g.length; i++) {
          st.m[i] = beta1 * st.m[i] + (1 - beta1) * g[i];
          st.v[i] = beta2 * st.v[i] + (1 - beta2) * g[i] * g[i];
          const mHat = st.m[i] / bc1;
          const vHat = st.v[i] / bc2;
          tensor.data[i] -= lr * (mHat / (Math.sqrt(vHat) + eps) + wd * tensor.data[i]);
        }
      }
      epochLoss += loss.data[0];
      batches += 1;
    }
    epochsRun = epoch + 1;
    const meanLoss = batches > 0 ? epochLoss / batches : 0;
    lossSeries.push(meanLoss);
    const accuracy = heldOut.length > 0 ? evalAccuracy(model, heldOut, cfg.batch) : 0;
    accuracySeries.push(accuracy);
    log(`epoch ${epoch + 1}/${cfg.epochs} lr ${lr.toFixed(5)} `
      + `loss ${meanLoss.toFixed(4)} held-out acc ${(accuracy * 100).toFixed(1)}%`);

    if (options.rollout && rolloutEvery > 0 && (epoch + 1) % rolloutEvery === 0) {
      const makespan = options.rollout(model, epoch);
      log(`rollout at epoch ${epoch + 1}: mean makespan ${makespan.toFixed(1)}`);
      if (best === null || makespan < best.metric) {
        best = { checkpoint: model.toCheckpoint(), metric: makespan, epoch, by: "rollout" };
      }
    } else if (!options.rollout) {
      if (best === null || accuracy > best.metric) {
        best = { checkpoint: model.toCheckpoint(), metric: accuracy, epoch, by: "accuracy" };
      }
    }
    if (options.earlyStopAccuracy !== undefined && accuracy >= options.earlyStopAccuracy) {
      log(`early stop: held-out accuracy ${(accuracy * 100).toFixed(1)}% reached target`);
      break;
    }
  }
  if (best === null) {
    best = { checkpoint: model.toCheckpoint(), metric: NaN, epoch: epochsRun - 1, by: "final" };
  }
  return { model, lossSeries, accuracySeries, epochsRun, best };
}

export function evalAccuracy(model: DTModel, samples: Sample[], batch: number): number {
  if (samples.length === 0) return 0;
  return noGrad(() => {
    let correct = 0, total = 0;
    for (let start = 0; start < samples.length; start += batch) {
      const slice = samples.slice(start, start + batch);
      const result = model.loss(slice, false);
      correct += result.correct;
      total += result.total;
    }
    clearTape();
    return total > 0 ? correct / total : 0;
  });
}

export function saveCheckpoint(ckpt: Checkpoint, path: string): void {
  writeFileSync(path, JSON.stringify(ckpt) + "\n");
}

export function loadCheckpoint(path: string): DTModel {
  const ckpt = JSON.parse(readFileSync(path, "utf-8")) as Checkpoint;
  return DTModel.fromCheckpoint(ckpt);
}
