/**
 * Train the EEGNet baseline on a cpdecode stream container and export
 * predictions in the exchange CSV.
 *
 *   node dist/main.js --input run.npz --out preds.csv \
 *       [--mode velocity|acceleration] [--epochs 20] [--seed 0]
 *
 * Training mirrors the evaluation protocol's mid-run split: the first
 * half of the run calibrates the network (on velocity or
 * finite-difference acceleration targets), then the frozen network
 * predicts every packet so the scorer can consume its evaluation half.
 */

import * as tf from "@tensorflow/tfjs";
import {
  loadStreamContainer,
  splitIndex,
  toAcceleration,
} from "./data";
import { writePredictions } from "./exchange";
import { DEFAULT_CONFIG, predict, trainModel, windowsToTensor } from "./model";

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`bad argument: ${argv[i]}`);
    }
    args.set(argv[i].slice(2), argv[i + 1]);
  }
  return args;
}

export async function trainAndExport(
  inputPath: string,
  outPath: string,
  mode: "velocity" | "acceleration" = "velocity",
  epochs: number = DEFAULT_CONFIG.epochs,
  seed = 0
): Promise<{ epochLosses: number[]; nPackets: number }> {
  const stream = loadStreamContainer(inputPath);
  const targets =
    mode === "acceleration" ? toAcceleration(stream.y, stream.n, stream.dt) : stream.y;
  const nCalib = splitIndex(stream.n);

  const cfg = { ...DEFAULT_CONFIG, epochs };
  const x = windowsToTensor(stream.xRaw, stream.n, stream.channels, stream.windowLen);
  const xCalib = x.slice([0, 0, 0, 0], [nCalib, -1, -1, -1]) as tf.Tensor4D;
  const yCalib = tf.tensor2d(Array.from(targets.subarray(0, nCalib * 2)), [nCalib, 2]);

  const { model, epochLosses } = await trainModel(xCalib, yCalib, cfg, seed);
  const preds = predict(model, x);
  writePredictions(outPath, preds, stream.n);

  x.dispose();
  xCalib.dispose();
  yCalib.dispose();
  return { epochLosses, nPackets: stream.n };
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const input = args.get("input");
  const out = args.get("out");
  if (!input || !out) {
    console.error("usage: main --input run.npz --out preds.csv [--mode m] [--epochs n] [--seed s]");
    process.exit(1);
  }
  const mode = (args.get("mode") ?? "velocity") as "velocity" | "acceleration";
  const epochs = parseInt(args.get("epochs") ?? String(DEFAULT_CONFIG.epochs), 10);
  const seed = parseInt(args.get("seed") ?? "0", 10);
  const { epochLosses, nPackets } = await trainAndExport(input, out, mode, epochs, seed);
  console.log(
    `trained ${epochs} epochs on ${nPackets} packets (${mode}); ` +
      `loss ${epochLosses[0].toFixed(5)} -> ${epochLosses[epochLosses.length - 1].toFixed(5)}; ` +
      `wrote ${out}`
  );
}

if (require.main === module) {
  main().catch((err) => {
    console.error(err);
    process.exit(1);
  });
}
