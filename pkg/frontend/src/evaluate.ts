/** Evaluate a checkpoint against a dataset's stored exact gain maps.
 *
 *  node dist/evaluate.js --data DIR --ckpt ckpt.json [--val-frac 0.15]
 *                        [--seed 0] [--split val|all]
 *
 *  Reports MSE, argmax agreement (predicted argmax inside the true
 *  (1-eps)*max pool), and top-5%-cell overlap, broken down into early
 *  steps vs the final stage of each run, plus the constant-predictor
 *  baseline overlap for scale.
 */

import { initBackend } from "./backend";
import { Sample, loadAll, markFinalStage, splitByRun } from "./dataset";
import { loadCheckpoint, predictOne } from "./model";

export interface Metrics {
  n: number;
  mse: number;
  argmaxAgreement: number;
  top5Overlap: number;
  baselineTop5Overlap: number;
}

export interface Report {
  overall: Metrics;
  early: Metrics;
  finalStage: Metrics;
}

function topFraction(values: Float32Array, fraction: number, eligible?: boolean[]): Set<number> {
  const idx: number[] = [];
  for (let i = 0; i < values.length; i++) {
    if (!eligible || eligible[i]) idx.push(i);
  }
  idx.sort((a, b) => values[b] - values[a] || a - b);
  const nTake = Math.max(1, Math.ceil(idx.length * fraction));
  return new Set(idx.slice(0, nTake));
}

export function computeMetrics(
  samples: Sample[],
  preds: Float32Array[],
  epsilons: number[]
): Metrics {
  let mse = 0;
  let agree = 0;
  let overlap = 0;
  let baseline = 0;
  const n = samples.length;
  for (let s = 0; s < n; s++) {
    const y = samples[s].y;
    const p = preds[s];
    let err = 0;
    for (let i = 0; i < y.length; i++) {
      const d = p[i] - y[i];
      err += d * d;
    }
    mse += err / y.length;

    // candidate cells are where the stored target can be nonzero; the
    // planner masks everything else, so restrict rankings the same way
    const obs = samples[s].x;
    const eligible = new Array<boolean>(y.length);
    for (let i = 0; i < y.length; i++) eligible[i] = obs[i] === 0;

    let pArg = -1;
    let pBest = -Infinity;
    let yMax = 0;
    for (let i = 0; i < y.length; i++) {
      if (!eligible[i]) continue;
      if (p[i] > pBest) {
        pBest = p[i];
        pArg = i;
      }
      if (y[i] > yMax) yMax = y[i];
    }
    const eps = epsilons[s];
    const pool = (1 - eps) * yMax;
    if (pArg >= 0 && y[pArg] >= pool && yMax > 0) agree += 1;

    const trueTop = topFraction(y, 0.05, eligible);
    const predTop = topFraction(p, 0.05, eligible);
    let hit = 0;
    for (const i of predTop) if (trueTop.has(i)) hit += 1;
    overlap += hit / trueTop.size;

    // constant predictor: every eligible cell ties, expected overlap is
    // the top fraction itself; use the deterministic low-index tiebreak
    const constTop = topFraction(new Float32Array(y.length), 0.05, eligible);
    let chit = 0;
    for (const i of constTop) if (trueTop.has(i)) chit += 1;
    baseline += chit / trueTop.size;
  }
  return {
    n,
    mse: mse / n,
    argmaxAgreement: agree / n,
    top5Overlap: overlap / n,
    baselineTop5Overlap: baseline / n,
  };
}

export async function evaluate(opts: {
  data: string;
  ckpt: string;
  valFrac: number;
  seed: number;
  split: "val" | "all";
}): Promise<Report> {
  await initBackend();
  const { man, samples } = loadAll(opts.data);
  const [h, w] = man.grid;
  const channels = man.channels.length - 1;
  const subset =
    opts.split === "val" ? splitByRun(samples, opts.valFrac, opts.seed).val : samples;
  if (subset.length === 0) throw new Error("no samples in the evaluation split");
  const { net: model } = loadCheckpoint(opts.ckpt);

  const preds = subset.map((s) => predictOne(model, s.x, h, w, channels));
  const eps = subset.map((s) => s.meta.epsilon ?? 0);
  const finals = markFinalStage(subset);
  const earlyIdx: number[] = [];
  const finalIdx: number[] = [];
  subset.forEach((s, i) => (finals.has(s) ? finalIdx : earlyIdx).push(i));

  const pick = (idx: number[]) =>
    computeMetrics(
      idx.map((i) => subset[i]),
      idx.map((i) => preds[i]),
      idx.map((i) => eps[i])
    );
  return {
    overall: computeMetrics(subset, preds, eps),
    early: earlyIdx.length ? pick(earlyIdx) : { n: 0, mse: 0, argmaxAgreement: 0, top5Overlap: 0, baselineTop5Overlap: 0 },
    finalStage: finalIdx.length ? pick(finalIdx) : { n: 0, mse: 0, argmaxAgreement: 0, top5Overlap: 0, baselineTop5Overlap: 0 },
  };
}

function fmt(m: Metrics): string {
  return (
    `n=${m.n}  mse=${m.mse.toFixed(6)}  argmax-agree=${(m.argmaxAgreement * 100).toFixed(1)}%  ` +
    `top5-overlap=${(m.top5Overlap * 100).toFixed(1)}%  (constant baseline ${(m.baselineTop5Overlap * 100).toFixed(1)}%)`
  );
}

if (require.main === module) {
  const argv = process.argv.slice(2);
  const get = (flag: string, dflt?: string): string => {
    const i = argv.indexOf(flag);
    if (i >= 0 && i + 1 < argv.length) return argv[i + 1];
    if (dflt !== undefined) return dflt;
    throw new Error(`missing required flag ${flag}`);
  };
  evaluate({
    data: get("--data"),
    ckpt: get("--ckpt"),
    valFrac: parseFloat(get("--val-frac", "0.15")),
    seed: parseInt(get("--seed", "0"), 10),
    split: get("--split", "val") as "val" | "all",
  })
    .then((report) => {
      console.log("overall     " + fmt(report.overall));
      console.log("early steps " + fmt(report.early));
      console.log("final stage " + fmt(report.finalStage));
      console.log(JSON.stringify(report));
    })
    .catch((err) => {
      console.error(err.message);
      process.exit(1);
    });
}
