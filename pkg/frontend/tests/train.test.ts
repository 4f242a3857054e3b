import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { describe, expect, it } from "vitest";

import { loadAll } from "../src/dataset";
import { loadCheckpoint, predictOne } from "../src/model";
import { train } from "../src/train";
import { writeFixtureDataset } from "./helpers";

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "kctr-"));
}

const manyRuns = (n: number, len: number) =>
  Array.from({ length: n }, () => Array.from({ length: len }, (_, i) => i + 2));

describe("training", () => {
  it("reduces validation loss on a learnable pattern", async () => {
    const dir = tmpdir();
    writeFixtureDataset(dir, { h: 16, w: 16, runs: manyRuns(10, 5), target: "pattern" });
    const out = path.join(dir, "ckpt.json");
    const { valLoss } = await train({
      data: dir,
      out,
      epochs: 4,
      batch: 8,
      lr: 2e-3,
      valFrac: 0.2,
      width: 8,
      seed: 0,
      quiet: true,
    });
    expect(valLoss[valLoss.length - 1]).toBeLessThan(valLoss[0] * 0.8);
    expect(fs.existsSync(out)).toBe(true);
  }, 300_000);

  it("converges toward zero output on an all-zero-gain dataset", async () => {
    const dir = tmpdir();
    writeFixtureDataset(dir, { h: 16, w: 16, runs: manyRuns(6, 4), target: "zeros" });
    const out = path.join(dir, "ckpt.json");
    const { valLoss } = await train({
      data: dir,
      out,
      epochs: 5,
      batch: 8,
      lr: 2e-3,
      valFrac: 0.2,
      width: 8,
      seed: 1,
      quiet: true,
    });
    expect(valLoss[valLoss.length - 1]).toBeLessThan(1e-3);
    const { net } = loadCheckpoint(out);
    const { man, samples } = loadAll(dir);
    const pred = predictOne(net, samples[0].x, 16, 16, man.channels.length - 1);
    const mean = Array.from(pred).reduce((a, b) => a + b, 0) / pred.length;
    expect(mean).toBeLessThan(0.02);
  }, 300_000);

  it("consumes the channel order the manifest declares", async () => {
    const dir = tmpdir();
    writeFixtureDataset(dir, { h: 8, w: 8, k: 3, runs: manyRuns(4, 3) });
    const out = path.join(dir, "ckpt.json");
    await train({
      data: dir,
      out,
      epochs: 1,
      batch: 4,
      lr: 1e-3,
      valFrac: 0.25,
      width: 4,
      seed: 2,
      quiet: true,
    });
    const { config } = loadCheckpoint(out);
    expect(config.inputChannels).toBe(4); // obs + c1..c3
    expect(config.k).toBe(3);
  }, 300_000);
});
