/**
 * Stream-container loading and the label/scoring arithmetic shared with
 * the evaluation pipeline: finite-difference acceleration targets, the
 * mid-run split, trapezoid-free velocity reintegration, and NMSE.
 */

import * as fs from "fs";
import { parseNpz } from "./npz";

export interface StreamData {
  /** Standardized raw windows, flattened from (N, 1, C, L). */
  xRaw: Float32Array;
  n: number;
  channels: number;
  windowLen: number;
  /** Velocity labels, N x 2 row-major. */
  y: Float64Array;
  dt: number;
  labelMode: string;
}

export function loadStreamContainer(path: string): StreamData {
  const npz = parseNpz(fs.readFileSync(path));
  const version = npz.get("schema_version");
  if (!version || Number(version.data[0]) !== 1) {
    throw new Error(`${path}: unsupported or missing stream container version`);
  }
  const xRawArr = npz.get("X_raw");
  const yArr = npz.get("Y");
  const dtArr = npz.get("dt");
  const modeArr = npz.get("label_mode");
  if (!xRawArr || !yArr || !dtArr || !modeArr) {
    throw new Error(`${path}: container is missing X_raw/Y/dt/label_mode`);
  }
  const [n, one, channels, windowLen] = xRawArr.shape;
  if (one !== 1 || xRawArr.shape.length !== 4) {
    throw new Error(`${path}: X_raw must be (N, 1, C, L), got ${xRawArr.shape}`);
  }
  return {
    xRaw: xRawArr.data as Float32Array,
    n,
    channels,
    windowLen,
    y: yArr.data as Float64Array,
    dt: Number(dtArr.data[0]),
    labelMode: (modeArr.data as string[])[0],
  };
}

/** floor(N/2): first half calibrates, the rest evaluates. */
export function splitIndex(n: number): number {
  return Math.floor(n / 2);
}

/** a[k] = (v[k] - v[k-1]) / dt with a[0] = 0, matching the scorer. */
export function toAcceleration(y: Float64Array, n: number, dt: number): Float64Array {
  const a = new Float64Array(n * 2);
  for (let k = 1; k < n; k++) {
    a[2 * k] = (y[2 * k] - y[2 * (k - 1)]) / dt;
    a[2 * k + 1] = (y[2 * k + 1] - y[2 * (k - 1) + 1]) / dt;
  }
  return a;
}

/**
 * v[k] = v[k-1] + a[k] * dt from v0, the scorer's reintegration rule.
 * Accumulates the running sum first and adds v0 per row, in the same
 * floating-point order as the scorer, so round-trip comparisons are
 * tight.
 */
export function integrateAcceleration(
  a: Float64Array,
  rows: number,
  v0: [number, number],
  dt: number
): Float64Array {
  const v = new Float64Array(rows * 2);
  let sx = 0;
  let sy = 0;
  for (let k = 0; k < rows; k++) {
    sx += a[2 * k] * dt;
    sy += a[2 * k + 1] * dt;
    v[2 * k] = v0[0] + sx;
    v[2 * k + 1] = v0[1] + sy;
  }
  return v;
}

/** Sum of squared 2-D errors over total motion energy. */
export function nmse(vTrue: Float64Array, vHat: Float64Array, rows: number): number {
  let num = 0;
  let den = 0;
  for (let k = 0; k < rows; k++) {
    const ex = vTrue[2 * k] - vHat[2 * k];
    const ey = vTrue[2 * k + 1] - vHat[2 * k + 1];
    num += ex * ex + ey * ey;
    den += vTrue[2 * k] * vTrue[2 * k] + vTrue[2 * k + 1] * vTrue[2 * k + 1];
  }
  if (den <= 0) throw new Error("NMSE undefined: zero-energy true velocities");
  return num / den;
}
