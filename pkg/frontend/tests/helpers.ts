import * as fs from "fs";
import * as path from "path";

import { rng } from "../src/dataset";

export interface FixtureOpts {
  h?: number;
  w?: number;
  k?: number;
  runs?: number[][];
  /** "random" noise targets, "zeros", or "pattern" (a smooth learnable
   *  function of the input channels). */
  target?: "random" | "zeros" | "pattern";
  seed?: number;
}

/** Write a tiny conforming dataset container for tests. */
export function writeFixtureDataset(dir: string, opts: FixtureOpts = {}): void {
  const h = opts.h ?? 8;
  const w = opts.w ?? 8;
  const k = opts.k ?? 2;
  const runs = opts.runs ?? [[2, 3, 4], [2, 3]];
  const target = opts.target ?? "random";
  fs.mkdirSync(path.join(dir, "samples"), { recursive: true });
  const channels = ["obs", ...Array.from({ length: k }, (_, i) => `c${i + 1}`), "gain"];
  const samples: unknown[] = [];
  let idx = 0;
  const rand = rng(opts.seed ?? 42);
  const plane = h * w;
  runs.forEach((steps, run) => {
    for (const step of steps) {
      const nchan = channels.length;
      const data = new Float32Array(nchan * plane);
      for (let i = 0; i < (nchan - 1) * plane; i++) data[i] = rand();
      // obs plane: a deterministic building block, rest ground
      for (let p = 0; p < plane; p++) data[p] = p < 8 ? 0.5 : 0.0;
      const gainBase = (nchan - 1) * plane;
      for (let p = 0; p < plane; p++) {
        if (target === "zeros") {
          data[gainBase + p] = 0;
        } else if (target === "pattern") {
          // smooth function of the cumulative channels: easy to learn
          let s = 0;
          for (let c = 1; c < nchan - 1; c++) s += data[c * plane + p];
          data[gainBase + p] = data[p] === 0 ? s / (nchan - 2) : 0;
        } else {
          data[gainBase + p] = rand();
        }
      }
      const name = `samples/${String(idx).padStart(8, "0")}.bin`;
      fs.writeFileSync(path.join(dir, name), Buffer.from(data.buffer));
      samples.push({ file: name, run, step, chosen: [0, 0], epsilon: 0 });
      idx++;
    }
  });
  const manifest = {
    n: idx,
    grid: [h, w],
    k,
    epsilon: 0,
    seed: 0,
    sources: ["fixture"],
    channels,
    dtype: "f32le",
    layout: "row-major",
    samples,
    extra: {},
  };
  fs.writeFileSync(path.join(dir, "manifest.json"), JSON.stringify(manifest));
}
