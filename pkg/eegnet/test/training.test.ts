import * as fs from "fs";
import * as path from "path";
import { beforeAll, describe, expect, it } from "vitest";

import {
  integrateAcceleration,
  loadStreamContainer,
  nmse,
  splitIndex,
} from "../src/data";
import { readPredictions } from "../src/exchange";
import { trainAndExport } from "../src/main";
import { scoreWithPrimary, synthContainer, tmpdir } from "./fixtures";

let dir: string;
let runFile: string;

beforeAll(() => {
  dir = tmpdir("eegnet-train-");
  runFile = synthContainer(dir, { packets: 120, channels: 2, seed: 11 });
});

describe("training", () => {
  it("final-epoch loss beats first-epoch loss on learnable data, 3 seeds", async () => {
    for (const seed of [0, 1, 2]) {
      const preds = path.join(dir, `loss-seed${seed}.csv`);
      const { epochLosses } = await trainAndExport(runFile, preds, "velocity", 20, seed);
      expect(epochLosses).toHaveLength(20);
      expect(epochLosses[19]).toBeLessThan(epochLosses[0]);
    }
  });

  it("re-export is bit-identical for a fixed model and input", async () => {
    const out1 = path.join(dir, "repeat1.csv");
    const out2 = path.join(dir, "repeat2.csv");
    await trainAndExport(runFile, out1, "velocity", 2, 7);
    await trainAndExport(runFile, out2, "velocity", 2, 7);
    expect(fs.readFileSync(out1, "utf8")).toBe(fs.readFileSync(out2, "utf8"));
  });

  it("exports one index-aligned row per packet", async () => {
    const out = path.join(dir, "rows.csv");
    const { nPackets } = await trainAndExport(runFile, out, "velocity", 1, 3);
    const { rows, preds } = readPredictions(out);
    expect(rows).toBe(nPackets);
    for (let k = 0; k < rows; k++) {
      expect(Number.isFinite(preds[2 * k])).toBe(true);
      expect(Number.isFinite(preds[2 * k + 1])).toBe(true);
    }
  });
});

describe("exchange round trip with the primary scorer", () => {
  it("velocity-mode NMSE matches in-process scoring to 1e-9", async () => {
    const predsFile = path.join(dir, "rt-velocity.csv");
    await trainAndExport(runFile, predsFile, "velocity", 2, 1);

    const s = loadStreamContainer(runFile);
    const { preds } = readPredictions(predsFile);
    const nCalib = splitIndex(s.n);
    const rows = s.n - nCalib;
    const inProcess = nmse(
      s.y.subarray(nCalib * 2),
      preds.subarray(nCalib * 2),
      rows
    );
    const viaPrimary = scoreWithPrimary(
      runFile, predsFile, "velocity", path.join(dir, "score-vel")
    );
    expect(Math.abs(viaPrimary - inProcess)).toBeLessThanOrEqual(
      1e-9 * Math.max(1, inProcess)
    );
  });

  it("acceleration-mode NMSE matches in-process scoring to 1e-9", async () => {
    const predsFile = path.join(dir, "rt-accel.csv");
    await trainAndExport(runFile, predsFile, "acceleration", 2, 2);

    const s = loadStreamContainer(runFile);
    const { preds } = readPredictions(predsFile);
    const nCalib = splitIndex(s.n);
    const rows = s.n - nCalib;
    const v0: [number, number] = [s.y[2 * (nCalib - 1)], s.y[2 * (nCalib - 1) + 1]];
    const vHat = integrateAcceleration(preds.subarray(nCalib * 2), rows, v0, s.dt);
    const inProcess = nmse(s.y.subarray(nCalib * 2), vHat, rows);
    const viaPrimary = scoreWithPrimary(
      runFile, predsFile, "acceleration", path.join(dir, "score-acc")
    );
    expect(Math.abs(viaPrimary - inProcess)).toBeLessThanOrEqual(
      1e-9 * Math.max(1, inProcess)
    );
  });
});
