/**
 * Reader for the engine's line-delimited trajectory datasets and the
 * window assembly used for training. Files are one JSON header line plus
 * one JSON record per line; records store raw integers along with their
 * normalization constants.
 */

import { readFileSync } from "node:fs";
import { Sample } from "./model.js";
import { Rng, shuffle } from "./rng.js";

export const FEATURE_LENGTH = 11;
const OPERATOR_COUNT = 5;

export interface FeatureFields {
  current_makespan: number;
  best_makespan: number;
  last_accept: number;
  last_operator: number | null;
  step: number;
  no_improve_steps: number;
  perturb_count: number;
  lower_bound: number;
  episode_len: number;
}

export interface DataRecord {
  instanceId: string;
  step: number;
  features: FeatureFields;
  action: number;
  reward: number;
  rtg: number | null;
}

export interface DatasetMeta {
  schemaVersion: number;
  kind: "raw" | "final";
  sizes: [number, number][];
  episodeLen: number;
  actionSet: string;
  featureLength: number;
  numRecords: number;
}

export class DatasetError extends Error {
  constructor(message: string, line?: number) {
    super(line === undefined ? message : `line ${line}: ${message}`);
  }
}

export function actionCount(actionSet: string): number {
  const counts: Record<string, number> = { A: 2, AN: 8, ANP: 10 };
  const n = counts[actionSet];
  if (n === undefined) throw new DatasetError(`unknown action set ${actionSet}`);
  return n;
}

function requireNumber(obj: Record<string, unknown>, key: string, line: number): number {
  const v = obj[key];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new DatasetError(`missing or non-numeric ${key}`, line);
  }
  return v;
}

export function readDataset(path: string): { meta: DatasetMeta; records: DataRecord[] } {
  const lines = readFileSync(path, "utf-8").split("\n").filter((l) => l.trim() !== "");
  if (lines.length === 0) throw new DatasetError("empty dataset file");
  let header: Record<string, unknown>;
  try {
    header = JSON.parse(lines[0]);
  } catch {
    throw new DatasetError("malformed header", 1);
  }
  if (header.schema_version !== 1) {
    throw new DatasetError(`unsupported schema_version ${header.schema_version}`, 1);
  }
  if (header.feature_length !== FEATURE_LENGTH) {
    throw new DatasetError(`unsupported feature_length ${header.feature_length}`, 1);
  }
  const meta: DatasetMeta = {
    schemaVersion: 1,
    kind: header.kind as "raw" | "final",
    sizes: (header.sizes as [number, number][]) ?? [],
    episodeLen: requireNumber(header, "episode_len", 1),
    actionSet: String(header.action_set),
    featureLength: FEATURE_LENGTH,
    numRecords: requireNumber(header, "num_records", 1),
  };
  const records: DataRecord[] = [];
  for (let i = 1; i < lines.length; i++) {
    let obj: Record<string, unknown>;
    try {
      obj = JSON.parse(lines[i]);
    } catch {
      throw new DatasetError("malformed record", i + 1);
    }
    const feats = obj.features as Record<string, unknown>;
    if (typeof feats !== "object" || feats === null) {
      throw new DatasetError("missing features", i + 1);
    }
    const lastOp = feats.last_operator;
    if (lastOp !== null && (typeof lastOp !== "number" || lastOp < 0 || lastOp >= OPERATOR_COUNT)) {
      throw new DatasetError("last_operator out of range", i + 1);
    }
    records.push({
      instanceId: String(obj.instance_id),
      step: requireNumber(obj, "step", i + 1),
      features: {
        current_makespan: requireNumber(feats, "current_makespan", i + 1),
        best_makespan: requireNumber(feats, "best_makespan", i + 1),
        last_accept: requireNumber(feats, "last_accept", i + 1),
        last_operator: lastOp as number | null,
        step: requireNumber(feats, "step", i + 1),
        no_improve_steps: requireNumber(feats, "no_improve_steps", i + 1),
        perturb_count: requireNumber(feats, "perturb_count", i + 1),
        lower_bound: requireNumber(feats, "lower_bound", i + 1),
        episode_len: requireNumber(feats, "episode_len", i + 1),
      },
      action: requireNumber(obj, "action", i + 1),
      reward: requireNumber(obj, "reward", i + 1),
      rtg: obj.rtg === undefined || obj.rtg === null ? null : requireNumber(obj, "rtg", i + 1),
    });
  }
  if (records.length !== meta.numRecords) {
    throw new DatasetError(
      `header announces ${meta.numRecords} records but file has ${records.length}`,
    );
  }
  return { meta, records };
}

export function flatFeatures(f: FeatureFields): number[] {
  const onehot = new Array<number>(OPERATOR_COUNT).fill(0);
  if (f.last_operator !== null) onehot[f.last_operator] = 1;
  return [
    f.current_makespan,
    f.best_makespan,
    f.last_accept,
    ...onehot,
    f.step,
    f.no_improve_steps,
    f.perturb_count,
  ];
}

/** Consecutive runs of one instance_id, each a complete episode. */
export function groupTrajectories(records: DataRecord[]): DataRecord[][] {
  const groups: DataRecord[][] = [];
  const seen = new Set<string>();
  let current: DataRecord[] = [];
  for (const r of records) {
    if (current.length > 0 && current[0].instanceId === r.instanceId) {
      if (r.step <= current[current.length - 1].step) {
        throw new DatasetError(`non-increasing step in trajectory ${r.instanceId}`);
      }
      current.push(r);
      continue;
    }
    if (seen.has(r.instanceId)) {
      throw new DatasetError(`interleaved trajectory ${r.instanceId}`);
    }
    if (current.length > 0) groups.push(current);
    seen.add(r.instanceId);
    current = [r];
  }
  if (current.length > 0) groups.push(current);
  return groups;
}

/**
 * One training sample per timestep: the K+1 newest slots ending at t, zero
 * padded at the front, with the action taken at t as the label.
 */
export function trajectoryToSamples(trajectory: DataRecord[], K: number): Sample[] {
  const samples: Sample[] = [];
  const k1 = K + 1;
  for (let t = 0; t < trajectory.length; t++) {
    const record = trajectory[t];
    if (record.rtg === null) {
      throw new DatasetError("training needs a finalized dataset with rtg");
    }
    const rtg = new Array<number>(k1).fill(0);
    const features: number[][] = [];
    const actions = new Array<number>(K).fill(0);
    const mask = new Array<boolean>(k1).fill(false);
    const steps = new Array<number>(k1).fill(0);
    for (let s = 0; s < k1; s++) {
      const time = t - (K - s);
      if (time < 0) {
        features.push(new Array<number>(FEATURE_LENGTH).fill(0));
        continue;
      }
      const past = trajectory[time];
      rtg[s] = past.rtg!;
      features.push(flatFeatures(past.features));
      mask[s] = true;
      steps[s] = past.step;
      if (s < K) actions[s] = past.action;
    }
    samples.push({
      rtg,
      features,
      actions,
      mask,
      steps,
      lowerBound: record.features.lower_bound,
      episodeLen: record.features.episode_len,
      label: record.action,
    });
  }
  return samples;
}

export interface SampleSplit {
  train: Sample[];
  heldOut: Sample[];
}

/** Split whole trajectories so held-out windows never overlap training ones. */
export function splitSamples(
  trajectories: DataRecord[][], K: number, holdOutFraction: number, rng: Rng,
): SampleSplit {
  const order = [...trajectories];
  shuffle(rng, order);
  const holdCount = Math.max(1, Math.floor(order.length * holdOutFraction));
  const heldOut: Sample[] = [];
  const train: Sample[] = [];
  order.forEach((traj, i) => {
    const dest = i < holdCount ? heldOut : train;
    dest.push(...trajectoryToSamples(traj, K));
  });
  if (train.length === 0) throw new DatasetError("no training trajectories after split");
  return { train, heldOut };
}
