/**
 * Decision transformer over (return, state, action) token triples.
 *
 * Each context slot contributes a return token, a state token, and (for all
 * but the newest slot) an action token; positions index the absolute search
 * step. Action logits are read at state tokens, so the prediction for a slot
 * never sees that slot's own action. Padded slots are excluded from
 * attention with a pre-softmax -Infinity mask, which makes their contents
 * exactly irrelevant to every real token.
 */

import {
  Tensor, add, addRow, argmaxRow, attention, clearTape, crossEntropy,
  dropout, gatherRows, gelu, layerNorm, matmul, noGrad, param, scatterRows,
} from "./tensor.js";
import { Rng, mulberry32 } from "./rng.js";

export const FEATURE_LENGTH = 11;

export interface DTConfig {
  layers: number;
  heads: number;
  embedDim: number;
  batch: number;
  K: number;
  dropout: number;
  betas: [number, number];
  gradClip: number;
  weightDecay: number;
  lr: number;
  epochs: number;
  restartPeriod: number;
  activation: "gelu";
}

/** Reference full-size configuration. */
export const fullConfig: DTConfig = {
  layers: 6,
  heads: 8,
  embedDim: 128,
  batch: 512,
  K: 50,
  dropout: 0.1,
  betas: [0.9, 0.95],
  gradClip: 1.0,
  weightDecay: 0.1,
  lr: 6e-2,
  epochs: 500,
  restartPeriod: 100,
  activation: "gelu",
};

/** Laptop-sized preset: small enough that the test suite trains in minutes. */
export const deskConfig: DTConfig = {
  ...fullConfig,
  layers: 2,
  heads: 4,
  embedDim: 64,
  batch: 64,
  K: 10,
  epochs: 50,
  restartPeriod: 50,
};

export interface Sample {
  rtg: number[];
  features: number[][];
  actions: number[];
  mask: boolean[];
  steps: number[];
  lowerBound: number;
  episodeLen: number;
  label?: number;
}

export interface Checkpoint {
  version: number;
  config: DTConfig;
  numActions: number;
  maxSteps: number;
  featureLength: number;
  normalization: { makespan: string; rtg: string; step: string };
  params: Record<string, number[]>;
}

interface ParamEntry {
  tensor: Tensor;
  decay: boolean;
}

export class DTModel {
  readonly config: DTConfig;
  readonly numActions: number;
  readonly maxSteps: number;
  private registry = new Map<string, ParamEntry>();

  constructor(config: DTConfig, numActions: number, maxSteps: number, seed = 1337) {
    if (config.K < 1) throw new Error("K must be at least 1");
    if (config.embedDim % config.heads !== 0) {
      throw new Error("embed dim must be divisible by heads");
    }
    if (numActions < 2) throw new Error("need at least two actions");
    if (maxSteps < 1) throw new Error("maxSteps must be positive");
    this.config = config;
    this.numActions = numActions;
    this.maxSteps = maxSteps;
    const rng = mulberry32(seed);
    const E = config.embedDim;
    const std = 0.02;
    this.register("wR", param(1, E, rng, std), true);
    this.register("bR", zerosParam(1, E), false);
    this.register("wS", param(FEATURE_LENGTH, E, rng, std), true);
    this.register("bS", zerosParam(1, E), false);
    this.register("wact", param(numActions + 1, E, rng, std), true);
    this.register("wpe", param(maxSteps, E, rng, std), true);
    for (let l = 0; l < config.layers; l++) {
      this.register(`l${l}.ln1g`, onesParam(1, E), false);
      this.register(`l${l}.ln1b`, zerosParam(1, E), false);
      for (const name of ["wq", "wk", "wv", "wo"]) {
        this.register(`l${l}.${name}`, param(E, E, rng, std), true);
        this.register(`l${l}.b${name[1]}`, zerosParam(1, E), false);
      }
      this.register(`l${l}.ln2g`, onesParam(1, E), false);
      this.register(`l${l}.ln2b`, zerosParam(1, E), false);
      this.register(`l${l}.fc1`, param(E, 4 * E, rng, std), true);
      this.register(`l${l}.fc1b`, zerosParam(1, 4 * E), false);
      this.register(`l${l}.fc2`, param(4 * E, E, rng, std), true);
      this.register(`l${l}.fc2b`, zerosParam(1, E), false);
    }
    this.register("lnFg", onesParam(1, E), false);
    this.register("lnFb", zerosParam(1, E), false);
    this.register("wHead", param(E, numActions, rng, std), true);
    this.register("bHead", zerosParam(1, numActions), false);
  }

  private register(name: string, tensor: Tensor, decay: boolean): void {
    this.registry.set(name, { tensor, decay });
  }

  p(name: string): Tensor {
    const entry = this.registry.get(name);
    if (!entry) throw new Error(`unknown parameter ${name}`);
    return entry.tensor;
  }

  parameters(): { name: string; tensor: Tensor; decay: boolean }[] {
    return [...this.registry.entries()].map(([name, e]) => ({
      name, tensor: e.tensor, decay: e.decay,
    }));
  }

  paramCount(): number {
    let n = 0;
    for (const { tensor } of this.parameters()) n += tensor.data.length;
    return n;
  }

  private validate(sample: Sample): void {
    const k1 = this.config.K + 1;
    if (sample.rtg.length !== k1 || sample.features.length !== k1
      || sample.mask.length !== k1 || sample.steps.length !== k1
      || sample.actions.length !== this.config.K) {
      throw new Error(`window does not match K=${this.config.K}`);
    }
    for (const row of sample.features) {
      if (row.length !== FEATURE_LENGTH) {
        throw new Error(`feature rows must have length ${FEATURE_LENGTH}`);
      }
    }
    if (sample.lowerBound < 1) throw new Error("lower bound must be positive");
  }

  /**
   * Action logits at every state token: a [B*(K+1) x numActions] tensor where
   * row b*(K+1)+s belongs to sample b, slot s.
   */
  forward(samples: Sample[], training = false, rng: Rng = mulberry32(0)): Tensor {
    const cfg = this.config;
    const K = cfg.K, k1 = K + 1, E = cfg.embedDim;
    const T = 3 * k1 - 1;
    const B = samples.length;
    const pad = this.numActions;

    const rtgMat = new Tensor(B * k1, 1);
    const featMat = new Tensor(B * k1, FEATURE_LENGTH);
    const actIdx = new Int32Array(B * K);
    const posIdx = new Int32Array(B * T);
    const rRows = new Int32Array(B * k1);
    const sRows = new Int32Array(B * k1);
    const aRows = new Int32Array(B * K);
    const masks: Float64Array[] = [];

    for (let b = 0; b < B; b++) {
      const sample = samples[b];
      this.validate(sample);
      const lb = sample.lowerBound;
      const el = Math.max(1, sample.episodeLen);
      for (let s = 0; s < k1; s++) {
        const row = b * k1 + s;
        rtgMat.data[row] = sample.rtg[s] / lb;
        const f = sample.features[s];
        const off = row * FEATURE_LENGTH;
        for (let c = 0; c < FEATURE_LENGTH; c++) featMat.data[off + c] = f[c];
        featMat.data[off] /= lb;
        featMat.data[off + 1] /= lb;
        featMat.data[off + 8] /= el;
        const base = b * T;
        const pos = Math.min(this.maxSteps - 1, Math.max(0, sample.steps[s]));
        rRows[row] = base + 3 * s;
        sRows[row] = base + 3 * s + 1;
        posIdx[base + 3 * s] = pos;
        posIdx[base + 3 * s + 1] = pos;
        if (s < K) {
          const a = sample.actions[s];
          const real = sample.mask[s];
          if (real && (a < 0 || a >= this.numActions)) {
            throw new Error(`action ${a} out of range`);
          }
          actIdx[b * K + s] = real ? a : pad;
          aRows[b * K + s] = base + 3 * s + 2;
          posIdx[base + 3 * s + 2] = pos;
        }
      }
      masks.push(buildMask(sample.mask, K, T));
    }

    const xR = addRow(matmul(rtgMat, this.p("wR")), this.p("bR"));
    const xS = addRow(matmul(featMat, this.p("wS")), this.p("bS"));
    const xA = gatherRows(this.p("wact"), actIdx);
    const xPos = gatherRows(this.p("wpe"), posIdx);

    const placed = add(
      add(scatterRows(xR, rRows, B * T), scatterRows(xS, sRows, B * T)),
      scatterRows(xA, aRows, B * T),
    );
    let x = add(placed, xPos);
    if (training && cfg.dropout > 0) x = dropout(x, cfg.dropout, rng);

    for (let l = 0; l < cfg.layers; l++) {
      const normed = layerNorm(x, this.p(`l${l}.ln1g`), this.p(`l${l}.ln1b`));
      const q = addRow(matmul(normed, this.p(`l${l}.wq`)), this.p(`l${l}.bq`));
      const k = addRow(matmul(normed, this.p(`l${l}.wk`)), this.p(`l${l}.bk`));
      const v = addRow(matmul(normed, this.p(`l${l}.wv`)), this.p(`l${l}.bv`));
      let attnOut = attention(q, k, v, B, T, cfg.heads, masks);
      attnOut = addRow(matmul(attnOut, this.p(`l${l}.wo`)), this.p(`l${l}.bo`));
      if (training && cfg.dropout > 0) attnOut = dropout(attnOut, cfg.dropout, rng);
      x = add(x, attnOut);

      const normed2 = layerNorm(x, this.p(`l${l}.ln2g`), this.p(`l${l}.ln2b`));
      let h = gelu(addRow(matmul(normed2, this.p(`l${l}.fc1`)), this.p(`l${l}.fc1b`)));
      h = addRow(matmul(h, this.p(`l${l}.fc2`)), this.p(`l${l}.fc2b`));
      if (training && cfg.dropout > 0) h = dropout(h, cfg.dropout, rng);
      x = add(x, h);
    }

    x = layerNorm(x, this.p("lnFg"), this.p("lnFb"));
    const stateTokens = gatherRows(x, sRows);
    return addRow(matmul(stateTokens, this.p("wHead")), this.p("bHead"));
  }

  /**
   * Mean cross entropy over every real slot whose action is known: past
   * slots use the recorded action row, the newest slot uses the label.
   */
  loss(samples: Sample[], training = true, rng: Rng = mulberry32(0)): {
    loss: Tensor; correct: number; total: number;
  } {
    const K = this.config.K, k1 = K + 1;
    const logits = this.forward(samples, training, rng);
    const labels = new Int32Array(logits.rows);
    const include: number[] = [];
    for (let b = 0; b < samples.length; b++) {
      const sample = samples[b];
      for (let s = 0; s < k1; s++) {
        if (!sample.mask[s]) continue;
        const label = s < K ? sample.actions[s] : sample.label;
        if (label === undefined) continue;
        const row = b * k1 + s;
        labels[row] = label;
        include.push(row);
      }
    }
    const loss = crossEntropy(logits, labels, Int32Array.from(include));
    let correct = 0, total = 0;
    for (let b = 0; b < samples.length; b++) {
      const label = samples[b].label;
      if (label === undefined) continue;
      total += 1;
      if (argmaxRow(logits, b * k1 + K) === label) correct += 1;
    }
    return { loss, correct, total };
  }

  /** Greedy by default; a positive temperature samples from the softmax. */
  act(sample: Sample, temperature = 0, rng: Rng = mulberry32(0)): number {
    return noGrad(() => {
      const logits = this.forward([sample], false);
      const row = this.config.K;
      if (temperature <= 0) return argmaxRow(logits, row);
      const off = row * this.numActions;
      const scaled = [...logits.data.subarray(off, off + this.numActions)]
        .map((v) => v / temperature);
      const maxv = Math.max(...scaled);
      const exps = scaled.map((v) => Math.exp(v - maxv));
      const totalW = exps.reduce((a, b) => a + b, 0);
      let r = rng() * totalW;
      for (let i = 0; i < exps.length; i++) {
        r -= exps[i];
        if (r <= 0) return i;
      }
      return exps.length - 1;
    });
  }

  toCheckpoint(): Checkpoint {
    const params: Record<string, number[]> = {};
    for (const { name, tensor } of this.parameters()) params[name] = [...tensor.data];
    return {
      version: 1,
      config: this.config,
      numActions: this.numActions,
      maxSteps: this.maxSteps,
      featureLength: FEATURE_LENGTH,
      normalization: { makespan: "lower_bound", rtg: "lower_bound", step: "episode_len" },
      params,
    };
  }

  static fromCheckpoint(ckpt: Checkpoint): DTModel {
    if (ckpt.version !== 1) throw new Error(`unsupported checkpoint version ${ckpt.version}`);
    if (ckpt.featureLength !== FEATURE_LENGTH) {
      throw new Error(`feature length ${ckpt.featureLength} not supported`);
    }
    const model = new DTModel(ckpt.config, ckpt.numActions, ckpt.maxSteps);
    for (const { name, tensor } of model.parameters()) {
      const stored = ckpt.params[name];
      if (!stored || stored.length !== tensor.data.length) {
        throw new Error(`checkpoint parameter ${name} missing or wrong size`);
      }
      tensor.data.set(stored);
    }
    clearTape();
    return model;
  }
}

function zerosParam(rows: number, cols: number): Tensor {
  const t = new Tensor(rows, cols);
  t.param = true;
  t.ensureGrad();
  return t;
}

function onesParam(rows: number, cols: number): Tensor {
  const t = new Tensor(rows, cols);
  t.data.fill(1);
  t.param = true;
  t.ensureGrad();
  return t;
}

/**
 * Additive attention mask for one sample: token q may attend token j iff
 * j <= q, j's slot is real or j === q. The self edge keeps every softmax
 * row alive; padded tokens are never read by real ones.
 */
function buildMask(real: boolean[], K: number, T: number): Float64Array {
  const slotOf = (tok: number) => Math.min(K, Math.floor(tok / 3));
  const mask = new Float64Array(T * T).fill(-Infinity);
  for (let qt = 0; qt < T; qt++) {
    for (let j = 0; j <= qt; j++) {
      if (j === qt || real[slotOf(j)]) mask[qt * T + j] = 0;
    }
  }
  return mask;
}

