import * as path from "path";
import * as tf from "@tensorflow/tfjs";

let ready: Promise<string> | null = null;

/** Activate a tfjs backend.  Inference prefers wasm (the bundled binary
 *  needs no network and is ~10x the JS backend); training must use "cpu"
 *  because the wasm kernel set has no conv gradients.  Falls back to cpu
 *  whenever wasm fails to initialize. */
export function initBackend(prefer: "wasm" | "cpu" = "wasm"): Promise<string> {
  if (!ready) {
    ready = (async () => {
      if (prefer === "wasm") {
        try {
          const wasm = require("@tensorflow/tfjs-backend-wasm");
          const dist = path.dirname(require.resolve("@tensorflow/tfjs-backend-wasm"));
          wasm.setWasmPaths(dist + path.sep);
          await tf.setBackend("wasm");
          await tf.ready();
          return tf.getBackend();
        } catch {
          // fall through to cpu
        }
      }
      await tf.setBackend("cpu");
      await tf.ready();
      return tf.getBackend();
    })();
  }
  return ready;
}
