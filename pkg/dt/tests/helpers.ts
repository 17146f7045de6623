import { writeFileSync } from "node:fs";

/** Synthetic dataset writer mirroring the engine's JSONL layout. */
export interface ToyOptions {
  trajectories: number;
  steps: number;
  actionOf: (t: number, traj: number) => number;
  actionSet?: string;
  kind?: string;
  episodeLen?: number;
}

export function writeToyDataset(path: string, opts: ToyOptions): void {
  const actionSet = opts.actionSet ?? "ANP";
  const episodeLen = opts.episodeLen ?? opts.steps;
  const lines: string[] = [];
  let count = 0;
  for (let traj = 0; traj < opts.trajectories; traj++) {
    for (let t = 0; t < opts.steps; t++) {
      lines.push(JSON.stringify({
        instance_id: `toy-${traj}#s${traj}`,
        step: t,
        features: {
          current_makespan: 160 - t,
          best_makespan: 150 - t,
          last_accept: t % 2,
          last_operator: t === 0 ? null : (t - 1) % 5,
          step: t,
          no_improve_steps: t % 4,
          perturb_count: 0,
          lower_bound: 100,
          episode_len: episodeLen,
        },
        action: opts.actionOf(t, traj),
        reward: 1,
        rtg: opts.steps - t,
      }));
      count++;
    }
  }
  const header = JSON.stringify({
    schema_version: 1,
    kind: opts.kind ?? "final",
    sizes: [[3, 3]],
    episode_len: episodeLen,
    action_set: actionSet,
    feature_length: 11,
    normalization: { makespan: "lower_bound", step: "episode_len" },
    num_records: count,
  });
  writeFileSync(path, [header, ...lines].join("\n") + "\n");
}
