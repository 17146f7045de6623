/**
 * Return-to-go factor sweep: run the engine CLI once per factor over a
 * fixed instance set and summarize mean best makespan with a 95% band
 * (normal approximation over instances).
 */

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { Rng } from "./rng.js";

export interface SweepRow {
  factor: number;
  mean: number;
  sd: number;
  lo: number;
  hi: number;
  n: number;
}

export interface SweepOptions {
  instances: string[];
  steps: number;
  engine?: string[];
  policyArgs?: string[];
  factors?: number[];
  seed?: number;
  log?: (message: string) => void;
}

export const DEFAULT_ENGINE = ["python3", "-m", "shopsearch"];

/** 0.05 through 1.75 in 0.05 increments, scaled in integers to stay exact. */
export function factorRange(start = 0.05, stop = 1.75, step = 0.05): number[] {
  const scale = 100;
  const a = Math.round(start * scale);
  const b = Math.round(stop * scale);
  const d = Math.round(step * scale);
  if (d <= 0 || b < a) throw new Error("bad factor range");
  const out: number[] = [];
  for (let v = a; v <= b; v += d) out.push(v / scale);
  return out;
}

export function normalCI(values: number[]): { mean: number; sd: number; lo: number; hi: number } {
  if (values.length === 0) throw new Error("no values");
  const n = values.length;
  const mean = values.reduce((a, b) => a + b, 0) / n;
  if (n === 1) return { mean, sd: 0, lo: mean, hi: mean };
  const sd = Math.sqrt(values.reduce((a, v) => a + (v - mean) ** 2, 0) / (n - 1));
  const half = 1.96 * sd / Math.sqrt(n);
  return { mean, sd, lo: mean - half, hi: mean + half };
}

export function bootstrapCI(values: number[], rng: Rng, iters = 2000): { lo: number; hi: number } {
  const n = values.length;
  const means: number[] = [];
  for (let it = 0; it < iters; it++) {
    let total = 0;
    for (let i = 0; i < n; i++) total += values[Math.floor(rng() * n)];
    means.push(total / n);
  }
  means.sort((a, b) => a - b);
  return { lo: means[Math.floor(0.025 * iters)], hi: means[Math.floor(0.975 * iters)] };
}

export function runSweep(options: SweepOptions): SweepRow[] {
  const engine = options.engine ?? DEFAULT_ENGINE;
  const factors = options.factors ?? factorRange();
  const log = options.log ?? (() => {});
  const workDir = mkdtempSync(join(tmpdir(), "rtg-sweep-"));
  const rows: SweepRow[] = [];
  try {
    for (const factor of factors) {
      const out = join(workDir, `report-${factor.toFixed(2)}.json`);
      const argv = [
        ...engine.slice(1),
        "solve",
        "--instances", ...options.instances,
        "--steps", String(options.steps),
        "--rtg-factor", String(factor),
        "--seed", String(options.seed ?? 0),
        "--no-optima",
        "--quiet",
        "--out", out,
        ...(options.policyArgs ?? []),
      ];
      execFileSync(engine[0], argv, { stdio: ["ignore", "ignore", "inherit"] });
      const report = JSON.parse(readFileSync(out, "utf-8"));
      const failed = (report.rows as Record<string, unknown>[]).filter((r) => r.error);
      if (failed.length > 0) {
        throw new Error(`solve failed for factor ${factor}: ${failed[0].error}`);
      }
      const bests = (report.rows as { best_makespan: number }[]).map((r) => r.best_makespan);
      const ci = normalCI(bests);
      rows.push({ factor, ...ci, n: bests.length });
      log(`factor ${factor.toFixed(2)}: mean ${ci.mean.toFixed(1)} `
        + `[${ci.lo.toFixed(1)}, ${ci.hi.toFixed(1)}] over ${bests.length}`);
    }
  } finally {
    rmSync(workDir, { recursive: true, force: true });
  }
  return rows;
}

export function writeSweep(rows: SweepRow[], path: string): void {
  if (path.endsWith(".json")) {
    writeFileSync(path, JSON.stringify({ rows }, null, 2) + "\n");
    return;
  }
  const lines = ["factor\tmean\tsd\tlo\thi\tn"];
  for (const r of rows) {
    lines.push([
      r.factor.toFixed(2), r.mean.toFixed(3), r.sd.toFixed(3),
      r.lo.toFixed(3), r.hi.toFixed(3), String(r.n),
    ].join("\t"));
  }
  writeFileSync(path, lines.join("\n") + "\n");
}
