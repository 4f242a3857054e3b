/** Small dense-skip encoder-decoder predicting a nonnegative gain map from
 *  the obs + cumulative-visibility channels.
 *
 *  Convolutions use a custom gradient: the wasm backend has no
 *  Conv2DBackpropFilter kernel, so the filter gradient is expressed as a
 *  transpose/conv/transpose composition of ops the backend does provide
 *  (batch and channel axes swap roles).  Checkpoints are single JSON files
 *  (config + named weight tensors, base64), so no tfjs IO handler or
 *  filesystem scheme is involved.
 */

import * as fs from "fs";
import * as tf from "@tensorflow/tfjs";

export interface ModelConfig {
  inputChannels: number;
  width: number;
  seed: number;
}

export interface CheckpointConfig extends ModelConfig {
  grid: [number, number];
  k: number;
}

function convFilterGrad(x: tf.Tensor4D, dy: tf.Tensor4D, kh: number, kw: number): tf.Tensor4D {
  const ph = Math.floor(kh / 2);
  const pw = Math.floor(kw / 2);
  const xp = ph || pw ? tf.pad(x, [[0, 0], [ph, ph], [pw, pw], [0, 0]]) : x;
  const xT = tf.transpose(xp, [3, 1, 2, 0]); // channels become the batch
  const dyT = tf.transpose(dy, [1, 2, 0, 3]); // output grad becomes the filter
  const out = tf.conv2d(xT as tf.Tensor4D, dyT as tf.Tensor4D, 1, "valid");
  return tf.transpose(out, [1, 2, 0, 3]) as tf.Tensor4D;
}

/** Stride-1 'same' convolution differentiable on the wasm backend. */
const convSameGrad = tf.customGrad(((x: tf.Tensor4D, w: tf.Tensor4D, save: (t: tf.Tensor[]) => void) => {
  save([x, w]);
  const value = tf.conv2d(x, w, 1, "same");
  return {
    value,
    gradFunc: (dy: tf.Tensor, saved: tf.Tensor[]) => {
      const [xs, ws] = saved as [tf.Tensor4D, tf.Tensor4D];
      const dx = tf.conv2dTranspose(dy as tf.Tensor4D, ws, xs.shape, 1, "same");
      const dw = convFilterGrad(xs, dy as tf.Tensor4D, ws.shape[0], ws.shape[1]);
      return [dx, dw];
    },
  };
}) as Parameters<typeof tf.customGrad>[0]);

export function convSame(x: tf.Tensor4D, w: tf.Tensor4D): tf.Tensor4D {
  return convSameGrad(x, w) as tf.Tensor4D;
}

interface LayerSpec {
  name: string;
  kh: number;
  cin: number;
  cout: number;
}

function layerSpecs(cfg: ModelConfig): LayerSpec[] {
  const c = cfg.width;
  const ci = cfg.inputChannels;
  return [
    { name: "enc1a", kh: 3, cin: ci, cout: c },
    { name: "enc1b", kh: 3, cin: c, cout: c },
    { name: "enc2", kh: 3, cin: c, cout: 2 * c },
    { name: "bottleneck", kh: 3, cin: 2 * c, cout: 3 * c },
    { name: "dec2", kh: 3, cin: 5 * c, cout: 2 * c },
    { name: "dec1", kh: 3, cin: 3 * c, cout: c },
    { name: "head", kh: 1, cin: c, cout: 1 },
  ];
}

let instanceCounter = 0;

export class GainNet {
  readonly config: ModelConfig;
  readonly vars: Map<string, tf.Variable>;

  constructor(config: ModelConfig, weights?: Map<string, tf.Tensor>) {
    this.config = config;
    this.vars = new Map();
    // tfjs registers variable names globally; prefix per instance so
    // several nets can coexist while checkpoints keep the logical names
    const prefix = `gainnet${instanceCounter++}`;
    let seed = config.seed;
    for (const spec of layerSpecs(config)) {
      const wName = `${spec.name}/w`;
      const bName = `${spec.name}/b`;
      if (weights) {
        this.vars.set(wName, tf.variable(weights.get(wName)!, true, `${prefix}/${wName}`));
        this.vars.set(bName, tf.variable(weights.get(bName)!, true, `${prefix}/${bName}`));
      } else {
        const fanIn = spec.kh * spec.kh * spec.cin;
        const std = Math.sqrt(2.0 / fanIn);
        this.vars.set(
          wName,
          tf.variable(
            tf.randomNormal([spec.kh, spec.kh, spec.cin, spec.cout], 0, std, "float32", seed++),
            true,
            `${prefix}/${wName}`
          )
        );
        this.vars.set(bName, tf.variable(tf.zeros([spec.cout]), true, `${prefix}/${bName}`));
      }
    }
  }

  private block(x: tf.Tensor4D, name: string): tf.Tensor4D {
    const w = this.vars.get(`${name}/w`)! as unknown as tf.Tensor4D;
    const b = this.vars.get(`${name}/b`)!;
    return tf.relu(tf.add(convSame(x, w), b)) as tf.Tensor4D;
  }

  /** NHWC in, NHW1 out; spatial dims must be multiples of 4. */
  predict(x: tf.Tensor4D): tf.Tensor4D {
    return tf.tidy(() => {
      const e1 = this.block(this.block(x, "enc1a"), "enc1b");
      const p1 = tf.maxPool(e1, 2, 2, "same");
      const e2 = this.block(p1, "enc2");
      const p2 = tf.maxPool(e2, 2, 2, "same");
      const bt = this.block(p2, "bottleneck");
      const u2 = tf.image.resizeNearestNeighbor(bt as tf.Tensor4D, [e2.shape[1]!, e2.shape[2]!]);
      const d2 = this.block(tf.concat([u2, e2], 3) as tf.Tensor4D, "dec2");
      const u1 = tf.image.resizeNearestNeighbor(d2 as tf.Tensor4D, [e1.shape[1]!, e1.shape[2]!]);
      const d1 = this.block(tf.concat([u1, e1], 3) as tf.Tensor4D, "dec1");
      return this.block(d1, "head");
    });
  }

  trainables(): tf.Variable[] {
    return Array.from(this.vars.values());
  }

  countParams(): number {
    return this.trainables().reduce((n, v) => n + v.size, 0);
  }

  dispose(): void {
    for (const v of this.vars.values()) v.dispose();
  }
}

interface CheckpointFile {
  config: CheckpointConfig;
  vars: Record<string, { shape: number[]; dataB64: string }>;
}

export function saveCheckpoint(net: GainNet, config: CheckpointConfig, path: string): void {
  const out: CheckpointFile = { config, vars: {} };
  for (const [name, v] of net.vars) {
    const data = v.dataSync() as Float32Array;
    out.vars[name] = {
      shape: v.shape.slice(),
      dataB64: Buffer.from(data.buffer, data.byteOffset, data.byteLength).toString("base64"),
    };
  }
  fs.writeFileSync(path, JSON.stringify(out));
}

export function loadCheckpoint(path: string): { net: GainNet; config: CheckpointConfig } {
  const raw = JSON.parse(fs.readFileSync(path, "utf8")) as CheckpointFile;
  const weights = new Map<string, tf.Tensor>();
  for (const [name, entry] of Object.entries(raw.vars)) {
    const buf = Buffer.from(entry.dataB64, "base64");
    const data = new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
    weights.set(name, tf.tensor(data.slice(), entry.shape));
  }
  const net = new GainNet(raw.config, weights);
  for (const t of weights.values()) t.dispose();
  return { net, config: raw.config };
}

/** Forward pass on one sample: channels-first Float32Array in, H*W out. */
export function predictOne(
  net: GainNet,
  x: Float32Array,
  h: number,
  w: number,
  channels: number
): Float32Array {
  return tf.tidy(() => {
    const nhwc = tf.tensor(x, [channels, h, w]).transpose([1, 2, 0]).expandDims(0);
    const out = net.predict(nhwc as tf.Tensor4D);
    return out.dataSync() as Float32Array;
  });
}
