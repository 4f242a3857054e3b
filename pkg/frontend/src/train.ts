/** Train the gain-map predictor on a dataset directory.
 *
 *  node dist/train.js --data DIR --out ckpt.json [--epochs 30] [--batch 16]
 *                     [--lr 1e-3] [--val-frac 0.15] [--width 24] [--seed 0]
 */

import * as tf from "@tensorflow/tfjs";

import { initBackend } from "./backend";
import { Sample, loadAll, rng, shuffled, splitByRun } from "./dataset";
import { GainNet, saveCheckpoint } from "./model";

export interface TrainOptions {
  data: string;
  out: string;
  epochs: number;
  batch: number;
  lr: number;
  valFrac: number;
  width: number;
  seed: number;
  quiet?: boolean;
}

function toBatch(samples: Sample[], h: number, w: number, channels: number) {
  const n = samples.length;
  const xs = new Float32Array(n * h * w * channels);
  const ys = new Float32Array(n * h * w);
  const plane = h * w;
  for (let s = 0; s < n; s++) {
    const x = samples[s].x;
    // channels-first file layout -> NHWC tensor layout
    for (let p = 0; p < plane; p++) {
      for (let c = 0; c < channels; c++) {
        xs[s * plane * channels + p * channels + c] = x[c * plane + p];
      }
    }
    ys.set(samples[s].y, s * plane);
  }
  return {
    x: tf.tensor4d(xs, [n, h, w, channels]),
    y: tf.tensor4d(ys, [n, h, w, 1]),
  };
}

function meanLoss(model: GainNet, samples: Sample[], h: number, w: number, channels: number, batch: number): number {
  let total = 0;
  for (let i = 0; i < samples.length; i += batch) {
    const part = samples.slice(i, i + batch);
    const { x, y } = toBatch(part, h, w, channels);
    const loss = tf.tidy(() => tf.losses.meanSquaredError(y, model.predict(x)).dataSync()[0]);
    x.dispose();
    y.dispose();
    total += loss * part.length;
  }
  return total / samples.length;
}

export async function train(opts: TrainOptions): Promise<{ trainLoss: number[]; valLoss: number[] }> {
  await initBackend(); // convSame carries its own wasm-safe gradient
  const { man, samples } = loadAll(opts.data);
  const [h, w] = man.grid;
  const channels = man.channels.length - 1;
  const { train: trainSet, val: valSet } = splitByRun(samples, opts.valFrac, opts.seed);
  if (trainSet.length === 0 || valSet.length === 0) {
    throw new Error(`split produced ${trainSet.length} train / ${valSet.length} val samples`);
  }
  const model = new GainNet({ inputChannels: channels, width: opts.width, seed: opts.seed });
  const optimizer = tf.train.adam(opts.lr);
  const rand = rng(opts.seed ^ 0x9e3779b9);

  const trainLoss: number[] = [];
  const valLoss: number[] = [];
  const v0 = meanLoss(model, valSet, h, w, channels, opts.batch);
  if (!opts.quiet) console.log(`epoch 0 (untrained)  val=${v0.toFixed(6)}`);
  valLoss.push(v0);

  for (let epoch = 1; epoch <= opts.epochs; epoch++) {
    const order = shuffled(trainSet, rand);
    let running = 0;
    for (let i = 0; i < order.length; i += opts.batch) {
      const part = order.slice(i, i + opts.batch);
      const { x, y } = toBatch(part, h, w, channels);
      const lossT = optimizer.minimize(
        () => tf.losses.meanSquaredError(y, model.predict(x)) as tf.Scalar,
        true,
        model.trainables()
      ) as tf.Scalar;
      running += lossT.dataSync()[0] * part.length;
      lossT.dispose();
      x.dispose();
      y.dispose();
    }
    const t = running / order.length;
    const v = meanLoss(model, valSet, h, w, channels, opts.batch);
    trainLoss.push(t);
    valLoss.push(v);
    if (!opts.quiet) console.log(`epoch ${epoch}  train=${t.toFixed(6)}  val=${v.toFixed(6)}`);
  }

  saveCheckpoint(
    model,
    {
      inputChannels: channels,
      width: opts.width,
      seed: opts.seed,
      grid: man.grid,
      k: man.k,
    },
    opts.out
  );
  optimizer.dispose();
  return { trainLoss, valLoss };
}

export function parseArgs(argv: string[]): TrainOptions {
  const get = (flag: string, dflt?: string): string => {
    const i = argv.indexOf(flag);
    if (i >= 0 && i + 1 < argv.length) return argv[i + 1];
    if (dflt !== undefined) return dflt;
    throw new Error(`missing required flag ${flag}`);
  };
  return {
    data: get("--data"),
    out: get("--out"),
    epochs: parseInt(get("--epochs", "30"), 10),
    batch: parseInt(get("--batch", "16"), 10),
    lr: parseFloat(get("--lr", "1e-3")),
    valFrac: parseFloat(get("--val-frac", "0.15")),
    width: parseInt(get("--width", "24"), 10),
    seed: parseInt(get("--seed", "0"), 10),
  };
}

if (require.main === module) {
  train(parseArgs(process.argv.slice(2)))
    .then(({ valLoss }) => {
      console.log(`done; final val loss ${valLoss[valLoss.length - 1].toFixed(6)}`);
    })
    .catch((err) => {
      console.error(err.message);
      process.exit(1);
    });
}
