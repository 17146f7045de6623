/**
 * Minimal reverse-mode autograd over flat Float64Array matrices.
 *
 * Every op records a backward closure on a global tape; backward(loss) runs
 * the tape in reverse and clears it. Just enough machinery for a small
 * transformer: matmul, bias, layernorm, GeLU, dropout, embedding lookup,
 * masked multi-head attention, and cross entropy.
 */

import { Rng } from "./rng.js";

export class Tensor {
  rows: number;
  cols: number;
  data: Float64Array;
  grad: Float64Array | null = null;
  param = false;

  constructor(rows: number, cols: number, data?: Float64Array) {
    this.rows = rows;
    this.cols = cols;
    this.data = data ?? new Float64Array(rows * cols);
  }

  ensureGrad(): Float64Array {
    if (this.grad === null) this.grad = new Float64Array(this.rows * this.cols);
    return this.grad;
  }

  get(r: number, c: number): number {
    return this.data[r * this.cols + c];
  }

  set(r: number, c: number, v: number): void {
    this.data[r * this.cols + c] = v;
  }
}

let tape: Array<() => void> = [];
let recording = true;

function record(fn: () => void): void {
  if (recording) tape.push(fn);
}

export function noGrad<T>(fn: () => T): T {
  const prev = recording;
  recording = false;
  try {
    return fn();
  } finally {
    recording = prev;
  }
}

export function backward(loss: Tensor): void {
  if (loss.rows !== 1 || loss.cols !== 1) throw new Error("backward needs a scalar");
  loss.ensureGrad()[0] = 1;
  for (let i = tape.length - 1; i >= 0; i--) tape[i]();
  tape = [];
}

export function clearTape(): void {
  tape = [];
}

export function param(rows: number, cols: number, rng: Rng, std: number): Tensor {
  const t = new Tensor(rows, cols);
  for (let i = 0; i < t.data.length; i++) {
    // Box-Muller, inlined to keep rng call order stable
    const u1 = Math.max(rng(), 1e-12);
    const u2 = rng();
    t.data[i] = std * Math.sqrt(-2 * Math.log(u1)) * Math.cos(2 * Math.PI * u2);
  }
  t.param = true;
  t.ensureGrad();
  return t;
}

export function zeros(rows: number, cols: number): Tensor {
  return new Tensor(rows, cols);
}

export function fromArray(rows: number, cols: number, values: ArrayLike<number>): Tensor {
  if (values.length !== rows * cols) throw new Error("size mismatch");
  return new Tensor(rows, cols, Float64Array.from(values));
}

// ---- Ops ----

export function matmul(a: Tensor, b: Tensor): Tensor {
  if (a.cols !== b.rows) throw new Error(`matmul ${a.rows}x${a.cols} @ ${b.rows}x${b.cols}`);
  const m = a.rows, k = a.cols, n = b.cols;
  const out = new Tensor(m, n);
  const ad = a.data, bd = b.data, od = out.data;
  for (let i = 0; i < m; i++) {
    const ai = i * k, oi = i * n;
    for (let p = 0; p < k; p++) {
      const av = ad[ai + p];
      if (av === 0) continue;
      const bp = p * n;
      for (let j = 0; j < n; j++) od[oi + j] += av * bd[bp + j];
    }
  }
  record(() => {
    const og = out.grad!;
    if (a.grad !== null || a.param) {
      const ag = a.ensureGrad();
      for (let i = 0; i < m; i++) {
        const oi = i * n, ai = i * k;
        for (let p = 0; p < k; p++) {
          let s = 0;
          const bp = p * n;
          for (let j = 0; j < n; j++) s += og[oi + j] * bd[bp + j];
          ag[ai + p] += s;
        }
      }
    }
    if (b.grad !== null || b.param) {
      const bg = b.ensureGrad();
      for (let p = 0; p < k; p++) {
        const bp = p * n;
        for (let i = 0; i < m; i++) {
          const av = ad[i * k + p];
          if (av === 0) continue;
          const oi = i * n;
          for (let j = 0; j < n; j++) bg[bp + j] += av * og[oi + j];
        }
      }
    }
  });
  out.ensureGrad();
  return out;
}

export function add(a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows || a.cols !== b.cols) throw new Error("add shape mismatch");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.data.length; i++) out.data[i] = a.data[i] + b.data[i];
  record(() => {
    const og = out.grad!;
    const ag = a.ensureGrad(), bg = b.ensureGrad();
    for (let i = 0; i < og.length; i++) {
      ag[i] += og[i];
      bg[i] += og[i];
    }
  });
  out.ensureGrad();
  return out;
}

export function addRow(a: Tensor, bias: Tensor): Tensor {
  if (bias.rows !== 1 || bias.cols !== a.cols) throw new Error("addRow shape mismatch");
  const out = new Tensor(a.rows, a.cols);
  for (let r = 0; r < a.rows; r++) {
    const off = r * a.cols;
    for (let c = 0; c < a.cols; c++) out.data[off + c] = a.data[off + c] + bias.data[c];
  }
  record(() => {
    const og = out.grad!;
    const ag = a.ensureGrad(), bg = bias.ensureGrad();
    for (let r = 0; r < a.rows; r++) {
      const off = r * a.cols;
      for (let c = 0; c < a.cols; c++) {
        ag[off + c] += og[off + c];
        bg[c] += og[off + c];
      }
    }
  });
  out.ensureGrad();
  return out;
}

export function scale(a: Tensor, s: number): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.data.length; i++) out.data[i] = a.data[i] * s;
  record(() => {
    const og = out.grad!;
    const ag = a.ensureGrad();
    for (let i = 0; i < og.length; i++) ag[i] += og[i] * s;
  });
  out.ensureGrad();
  return out;
}

const GELU_C = Math.sqrt(2 / Math.PI);

export function gelu(a: Tensor): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.data.length; i++) {
    const x = a.data[i];
    const u = GELU_C * (x + 0.044715 * x * x * x);
    out.data[i] = 0.5 * x * (1 + Math.tanh(u));
  }
  record(() => {
    const og = out.grad!;
    const ag = a.ensureGrad();
    for (let i = 0; i < og.length; i++) {
      const x = a.data[i];
      const u = GELU_C * (x + 0.044715 * x * x * x);
      const t = Math.tanh(u);
      const du = GELU_C * (1 + 3 * 0.044715 * x * x);
      ag[i] += og[i] * (0.5 * (1 + t) + 0.5 * x * (1 - t * t) * du);
    }
  });
  out.ensureGrad();
  return out;
}

export function layerNorm(a: Tensor, gamma: Tensor, beta: Tensor, eps = 1e-5): Tensor {
  if (gamma.cols !== a.cols || beta.cols !== a.cols) throw new Error("layerNorm shape mismatch");
  const n = a.cols;
  const out = new Tensor(a.rows, n);
  const xhat = new Float64Array(a.rows * n);
  const invStd = new Float64Array(a.rows);
  for (let r = 0; r < a.rows; r++) {
    const off = r * n;
    let mean = 0;
    for (let c = 0; c < n; c++) mean += a.data[off + c];
    mean /= n;
    let varsum = 0;
    for (let c = 0; c < n; c++) {
      const d = a.data[off + c] - mean;
      varsum += d * d;
    }
    const inv = 1 / Math.sqrt(varsum / n + eps);
    invStd[r] = inv;
    for (let c = 0; c < n; c++) {
      const xh = (a.data[off + c] - mean) * inv;
      xhat[off + c] = xh;
      out.data[off + c] = gamma.data[c] * xh + beta.data[c];
    }
  }
  record(() => {
    const og = out.grad!;
    const ag = a.ensureGrad(), gg = gamma.ensureGrad(), bg = beta.ensureGrad();
    for (let r = 0; r < a.rows; r++) {
      const off = r * n;
      let sumDy = 0, sumDyXhat = 0;
      for (let c = 0; c < n; c++) {
        const dy = og[off + c] * gamma.data[c];
        sumDy += dy;
        sumDyXhat += dy * xhat[off + c];
        gg[c] += og[off + c] * xhat[off + c];
        bg[c] += og[off + c];
      }
      const inv = invStd[r];
      for (let c = 0; c < n; c++) {
        const dy = og[off + c] * gamma.data[c];
        ag[off + c] += inv * (dy - sumDy / n - xhat[off + c] * sumDyXhat / n);
      }
    }
  });
  out.ensureGrad();
  return out;
}

export function dropout(a: Tensor, p: number, rng: Rng): Tensor {
  if (p <= 0) return a;
  const keep = 1 - p;
  const mask = new Float64Array(a.data.length);
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.data.length; i++) {
    mask[i] = rng() < keep ? 1 / keep : 0;
    out.data[i] = a.data[i] * mask[i];
  }
  record(() => {
    const og = out.grad!;
    const ag = a.ensureGrad();
    for (let i = 0; i < og.length; i++) ag[i] += og[i] * mask[i];
  });
  out.ensureGrad();
  return out;
}

export function scatterRows(src: Tensor, rowIndex: Int32Array, totalRows: number): Tensor {
  if (rowIndex.length !== src.rows) throw new Error("scatter index length mismatch");
  const n = src.cols;
  const out = new Tensor(totalRows, n);
  for (let r = 0; r < src.rows; r++) {
    const dest = rowIndex[r];
    if (dest < 0 || dest >= totalRows) throw new Error(`scatter row ${dest} out of range`);
    out.data.set(src.data.subarray(r * n, r * n + n), dest * n);
  }
  record(() => {
    const og = out.grad!;
    const sg = src.ensureGrad();
    for (let r = 0; r < src.rows; r++) {
      const off = rowIndex[r] * n, ro = r * n;
      for (let c = 0; c < n; c++) sg[ro + c] += og[off + c];
    }
  });
  out.ensureGrad();
  return out;
}

export function gatherRows(table: Tensor, indices: Int32Array): Tensor {
  const n = table.cols;
  const out = new Tensor(indices.length, n);
  for (let r = 0; r < indices.length; r++) {
    const i = indices[r];
    if (i < 0 || i >= table.rows) throw new Error(`gather index ${i} out of range`);
    out.data.set(table.data.subarray(i * n, i * n + n), r * n);
  }
  record(() => {
    const og = out.grad!;
    const tg = table.ensureGrad();
    for (let r = 0; r < indices.length; r++) {
      const off = indices[r] * n, ro = r * n;
      for (let c = 0; c < n; c++) tg[off + c] += og[ro + c];
    }
  });
  out.ensureGrad();
  return out;
}

/**
 * Multi-head self attention over B samples of S tokens each, stacked as
 * [B*S x E] rows. masks[b] is an additive S*S matrix (0 or -Infinity);
 * it must leave at least the diagonal open so no softmax row is empty.
 */
export function attention(
  q: Tensor, k: Tensor, v: Tensor,
  batch: number, seq: number, heads: number,
  masks: Float64Array[],
): Tensor {
  const embed = q.cols;
  if (embed % heads !== 0) throw new Error("embed not divisible by heads");
  if (q.rows !== batch * seq) throw new Error("attention shape mismatch");
  const hd = embed / heads;
  const invSqrt = 1 / Math.sqrt(hd);
  const out = new Tensor(q.rows, embed);
  // softmax weights are kept per (sample, head) for the backward pass
  const weights: Float64Array[] = [];
  for (let b = 0; b < batch; b++) {
    const base = b * seq;
    const mask = masks[b];
    for (let h = 0; h < heads; h++) {
      const hoff = h * hd;
      const attn = new Float64Array(seq * seq);
      for (let i = 0; i < seq; i++) {
        const qOff = (base + i) * embed + hoff;
        let maxv = -Infinity;
        for (let j = 0; j < seq; j++) {
          let s = mask[i * seq + j];
          if (s !== -Infinity) {
            const kOff = (base + j) * embed + hoff;
            let dot = 0;
            for (let c = 0; c < hd; c++) dot += q.data[qOff + c] * k.data[kOff + c];
            s += dot * invSqrt;
          }
          attn[i * seq + j] = s;
          if (s > maxv) maxv = s;
        }
        let total = 0;
        for (let j = 0; j < seq; j++) {
          const e = attn[i * seq + j] === -Infinity ? 0 : Math.exp(attn[i * seq + j] - maxv);
          attn[i * seq + j] = e;
          total += e;
        }
        const outOff = (base + i) * embed + hoff;
        for (let j = 0; j < seq; j++) {
          const w = attn[i * seq + j] / total;
          attn[i * seq + j] = w;
          if (w === 0) continue;
          const vOff = (base + j) * embed + hoff;
          for (let c = 0; c < hd; c++) out.data[outOff + c] += w * v.data[vOff + c];
        }
      }
      weights.push(attn);
    }
  }
  record(() => {
    const og = out.grad!;
    const qg = q.ensureGrad(), kg = k.ensureGrad(), vg = v.ensureGrad();
    for (let b = 0; b < batch; b++) {
      const base = b * seq;
      for (let h = 0; h < heads; h++) {
        const hoff = h * hd;
        const attn = weights[b * heads + h];
        for (let i = 0; i < seq; i++) {
          const doOff = (base + i) * embed + hoff;
          // dA then softmax jacobian, then chain into q and k
          let dot = 0;
          const dA = new Float64Array(seq);
          for (let j = 0; j < seq; j++) {
            const w = attn[i * seq + j];
            if (w === 0) continue;
            const vOff = (base + j) * embed + hoff;
            let s = 0;
            for (let c = 0; c < hd; c++) {
              s += og[doOff + c] * v.data[vOff + c];
              vg[vOff + c] += w * og[doOff + c];
            }
            dA[j] = s;
            dot += s * w;
          }
          const qOff = (base + i) * embed + hoff;
          for (let j = 0; j < seq; j++) {
            const w = attn[i * seq + j];
            if (w === 0) continue;
            const dS = w * (dA[j] - dot) * invSqrt;
            const kOff = (base + j) * embed + hoff;
            for (let c = 0; c < hd; c++) {
              qg[qOff + c] += dS * k.data[kOff + c];
              kg[kOff + c] += dS * q.data[qOff + c];
            }
          }
        }
      }
    }
  });
  out.ensureGrad();
  return out;
}

/**
 * Mean cross entropy over the rows listed in `include`; rows outside it
 * contribute nothing to the loss or the gradient.
 */
export function crossEntropy(logits: Tensor, labels: Int32Array, include: Int32Array): Tensor {
  if (labels.length !== logits.rows) throw new Error("labels length mismatch");
  if (include.length === 0) throw new Error("cross entropy over zero rows");
  const n = logits.cols;
  const probs = new Float64Array(include.length * n);
  const out = new Tensor(1, 1);
  let loss = 0;
  for (let idx = 0; idx < include.length; idx++) {
    const r = include[idx];
    const off = r * n;
    let maxv = -Infinity;
    for (let c = 0; c < n; c++) if (logits.data[off + c] > maxv) maxv = logits.data[off + c];
    let total = 0;
    for (let c = 0; c < n; c++) {
      const e = Math.exp(logits.data[off + c] - maxv);
      probs[idx * n + c] = e;
      total += e;
    }
    const label = labels[r];
    if (label < 0 || label >= n) throw new Error(`label ${label} out of range`);
    loss += -(Math.log(probs[idx * n + label]) - Math.log(total));
    for (let c = 0; c < n; c++) probs[idx * n + c] /= total;
  }
  out.data[0] = loss / include.length;
  record(() => {
    const g = out.grad![0] / include.length;
    const lg = logits.ensureGrad();
    for (let idx = 0; idx < include.length; idx++) {
      const r = include[idx];
      const off = r * n;
      const label = labels[r];
      for (let c = 0; c < n; c++) {
        lg[off + c] += g * (probs[idx * n + c] - (c === label ? 1 : 0));
      }
    }
  });
  out.ensureGrad();
  return out;
}

export function argmaxRow(t: Tensor, row: number): number {
  const off = row * t.cols;
  let best = 0;
  for (let c = 1; c < t.cols; c++) {
    if (t.data[off + c] > t.data[off + best]) best = c;
  }
  return best;
}

// ---- Optimizer helpers ----

export function zeroGrads(params: Tensor[]): void {
  for (const p of params) p.ensureGrad().fill(0);
}

export function globalGradNorm(params: Tensor[]): number {
  let total = 0;
  for (const p of params) {
    const g = p.grad;
    if (g === null) continue;
    for (let i = 0; i < g.length; i++) total += g[i] * g[i];
  }
  return Math.sqrt(total);
}

export function clipGrads(params: Tensor[], maxNorm: number): number {
  const norm = globalGradNorm(params);
  if (norm > maxNorm && norm > 0) {
    const f = maxNorm / norm;
    for (const p of params) {
      const g = p.grad!;
      for (let i = 0; i < g.length; i++) g[i] *= f;
    }
  }
  return norm;
}
