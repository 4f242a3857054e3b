/** Gain-provider server: speaks the planner's stdio protocol.
 *
 *  node dist/serve.js CHECKPOINT.json
 *
 *  Framing (all headers are single JSON lines, tensors little-endian f32):
 *    in:  {"proto":1,"grid":[H,W],"k":k}        -> out: {"ok":true}
 *    in:  {"id":n,"channels":1+k} + (1+k)*H*W   -> out: {"id":n} + H*W
 *  End of input ends the session with exit code 0; malformed requests get
 *  one JSON error line and a nonzero exit.
 */

import * as tf from "@tensorflow/tfjs";

import { initBackend } from "./backend";
import { GainNet, loadCheckpoint } from "./model";

interface FrameReader {
  readLine(): Promise<string | null>;
  readBytes(n: number): Promise<Buffer | null>;
}

export function frameReader(stream: NodeJS.ReadableStream): FrameReader {
  let buffer = Buffer.alloc(0);
  let ended = false;
  const waiters: (() => void)[] = [];
  stream.on("data", (chunk: Buffer) => {
    buffer = Buffer.concat([buffer, chunk]);
    waiters.splice(0).forEach((w) => w());
  });
  stream.on("end", () => {
    ended = true;
    waiters.splice(0).forEach((w) => w());
  });
  stream.on("error", () => {
    ended = true;
    waiters.splice(0).forEach((w) => w());
  });
  const wait = () => new Promise<void>((resolve) => waiters.push(resolve));
  return {
    async readLine() {
      for (;;) {
        const nl = buffer.indexOf(0x0a);
        if (nl >= 0) {
          const line = buffer.subarray(0, nl).toString("utf8");
          buffer = buffer.subarray(nl + 1);
          return line;
        }
        if (ended) return buffer.length ? buffer.toString("utf8") : null;
        await wait();
      }
    },
    async readBytes(n: number) {
      for (;;) {
        if (buffer.length >= n) {
          const out = buffer.subarray(0, n);
          buffer = buffer.subarray(n);
          return Buffer.from(out);
        }
        if (ended) return null;
        await wait();
      }
    },
  };
}

function writeAll(stream: NodeJS.WritableStream, data: Buffer | string): Promise<void> {
  return new Promise((resolve, reject) => {
    stream.write(data, (err) => (err ? reject(err) : resolve()));
  });
}

/** Pad the grid up to a multiple of 4 for the two pooling stages, predict,
 *  crop back.  Returns H*W nonnegative float32 values. */
export function predictPadded(
  model: GainNet,
  channels: Float32Array,
  nchan: number,
  h: number,
  w: number
): Float32Array {
  const ph = Math.ceil(h / 4) * 4;
  const pw = Math.ceil(w / 4) * 4;
  return tf.tidy(() => {
    let x = tf.tensor(channels, [nchan, h, w]).transpose([1, 2, 0]).expandDims(0) as tf.Tensor4D;
    if (ph !== h || pw !== w) {
      x = tf.mirrorPad(x, [[0, 0], [0, ph - h], [0, pw - w], [0, 0]], "symmetric") as tf.Tensor4D;
    }
    let out = model.predict(x as tf.Tensor4D).reshape([ph, pw]);
    if (ph !== h || pw !== w) {
      out = out.slice([0, 0], [h, w]);
    }
    return out.dataSync() as Float32Array;
  });
}

export async function serve(
  ckptPath: string,
  input: NodeJS.ReadableStream,
  output: NodeJS.WritableStream
): Promise<number> {
  await initBackend();
  const { net: model } = loadCheckpoint(ckptPath);
  const reader = frameReader(input);

  const hello = await reader.readLine();
  if (hello === null) return 0;
  let grid: [number, number];
  let k: number;
  try {
    const parsed = JSON.parse(hello);
    if (parsed.proto !== 1) throw new Error(`unsupported protocol ${parsed.proto}`);
    grid = parsed.grid;
    k = parsed.k;
  } catch (err) {
    await writeAll(output, JSON.stringify({ ok: false, error: String(err) }) + "\n");
    return 2;
  }
  const [h, w] = grid;
  await writeAll(output, '{"ok":true}\n');

  for (;;) {
    const line = await reader.readLine();
    if (line === null || line === "") return 0;
    let header: { id: number; channels: number };
    try {
      header = JSON.parse(line);
    } catch (err) {
      await writeAll(output, JSON.stringify({ error: `bad header: ${String(err)}` }) + "\n");
      return 2;
    }
    if (header.channels !== 1 + k) {
      await writeAll(
        output,
        JSON.stringify({ error: `expected ${1 + k} channels, got ${header.channels}` }) + "\n"
      );
      return 2;
    }
    const raw = await reader.readBytes(header.channels * h * w * 4);
    if (raw === null) {
      await writeAll(output, JSON.stringify({ error: "payload truncated" }) + "\n");
      return 2;
    }
    const channels = new Float32Array(raw.buffer, raw.byteOffset, header.channels * h * w);
    const pred = predictPadded(model, channels, header.channels, h, w);
    await writeAll(output, JSON.stringify({ id: header.id }) + "\n");
    await writeAll(output, Buffer.from(pred.buffer, pred.byteOffset, h * w * 4));
  }
}

if (require.main === module) {
  const ckpt = process.argv[2];
  if (!ckpt) {
    console.error("usage: serve.js CHECKPOINT.json");
    process.exit(1);
  }
  serve(ckpt, process.stdin, process.stdout)
    .then((code) => process.exit(code))
    .catch((err) => {
      console.error(err.message);
      process.exit(1);
    });
}
