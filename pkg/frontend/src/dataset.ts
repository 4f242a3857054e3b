/** Reader for the planner's dataset container: manifest.json plus one
 *  little-endian float32 file per sample, channels obs, c1..ck, gain. */

import * as fs from "fs";
import * as path from "path";

export interface SampleMeta {
  file: string;
  run: string | number;
  step: number;
  chosen: [number, number];
  epsilon: number;
}

export interface Manifest {
  n: number;
  grid: [number, number];
  k: number;
  epsilon: number | number[];
  seed: number;
  channels: string[];
  dtype: string;
  layout: string;
  samples: SampleMeta[];
}

export interface Sample {
  /** input channels (1 + k), each H*W row-major */
  x: Float32Array;
  /** gain channel, H*W row-major */
  y: Float32Array;
  meta: SampleMeta;
}

export function loadManifest(dir: string): Manifest {
  const raw = fs.readFileSync(path.join(dir, "manifest.json"), "utf8");
  const man = JSON.parse(raw) as Manifest;
  if (man.dtype !== "f32le" || man.layout !== "row-major") {
    throw new Error(`unsupported container encoding ${man.dtype}/${man.layout}`);
  }
  if (man.channels[0] !== "obs" || man.channels[man.channels.length - 1] !== "gain") {
    throw new Error(`unexpected channel order: ${man.channels.join(",")}`);
  }
  return man;
}

export function loadSample(dir: string, man: Manifest, index: number): Sample {
  const meta = man.samples[index];
  const buf = fs.readFileSync(path.join(dir, meta.file));
  const [h, w] = man.grid;
  const nchan = man.channels.length;
  const expect = nchan * h * w * 4;
  if (buf.length !== expect) {
    throw new Error(`sample ${meta.file}: ${buf.length} bytes, expected ${expect}`);
  }
  const plane = h * w;
  const all = new Float32Array(buf.buffer, buf.byteOffset, nchan * plane);
  return {
    x: all.slice(0, (nchan - 1) * plane),
    y: all.slice((nchan - 1) * plane, nchan * plane),
    meta,
  };
}

export function loadAll(dir: string): { man: Manifest; samples: Sample[] } {
  const man = loadManifest(dir);
  const samples = man.samples.map((_, i) => loadSample(dir, man, i));
  return { man, samples };
}

/** Deterministic PRNG (mulberry32) so splits and shuffles reproduce. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function shuffled<T>(items: T[], rand: () => number): T[] {
  const out = items.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}

/** Split whole runs into train/validation so no map leaks across the split. */
export function splitByRun(
  samples: Sample[],
  valFraction: number,
  seed: number
): { train: Sample[]; val: Sample[] } {
  const runs = Array.from(new Set(samples.map((s) => String(s.meta.run))));
  const order = shuffled(runs.sort(), rng(seed));
  const nVal = Math.max(1, Math.round(order.length * valFraction));
  const valRuns = new Set(order.slice(0, nVal));
  const train: Sample[] = [];
  const val: Sample[] = [];
  for (const s of samples) {
    (valRuns.has(String(s.meta.run)) ? val : train).push(s);
  }
  return { train, val };
}

/** Final-stage rule: last 10 samples of a run, or the last half (middle
 *  included) when the run is shorter than 20. */
export function markFinalStage(samples: Sample[]): Set<Sample> {
  const byRun = new Map<string, Sample[]>();
  for (const s of samples) {
    const key = String(s.meta.run);
    if (!byRun.has(key)) byRun.set(key, []);
    byRun.get(key)!.push(s);
  }
  const marked = new Set<Sample>();
  for (const entries of byRun.values()) {
    entries.sort((a, b) => a.meta.step - b.meta.step);
    const L = entries.length;
    const take = L >= 20 ? 10 : Math.ceil(L / 2);
    for (const s of entries.slice(L - take)) marked.add(s);
  }
  return marked;
}
