/**
 * Prediction-exchange CSV: `packet_index,yhat_x,yhat_y`, one row per
 * packet, consumed by `cpdecode evaluate --predictions-from`. JS numbers
 * serialize as shortest round-trip decimal, so the scorer reads back the
 * exact float64 values.
 */

import * as fs from "fs";

export const EXCHANGE_HEADER = "packet_index,yhat_x,yhat_y";

export function writePredictions(path: string, preds: Float64Array, rows: number): void {
  const lines = [EXCHANGE_HEADER];
  for (let k = 0; k < rows; k++) {
    lines.push(`${k},${preds[2 * k]},${preds[2 * k + 1]}`);
  }
  fs.writeFileSync(path, lines.join("\n") + "\n");
}

export function readPredictions(path: string): { rows: number; preds: Float64Array } {
  const lines = fs.readFileSync(path, "utf8").trim().split("\n");
  if (lines[0].trim() !== EXCHANGE_HEADER) {
    throw new Error(`${path}: expected header ${EXCHANGE_HEADER}`);
  }
  const body = lines.slice(1);
  let maxIdx = -1;
  const parsed = body.map((line) => {
    const [i, x, y] = line.split(",");
    const idx = parseInt(i, 10);
    if (idx > maxIdx) maxIdx = idx;
    return [idx, parseFloat(x), parseFloat(y)] as const;
  });
  const preds = new Float64Array((maxIdx + 1) * 2).fill(NaN);
  for (const [idx, x, y] of parsed) {
    preds[2 * idx] = x;
    preds[2 * idx + 1] = y;
  }
  return { rows: maxIdx + 1, preds };
}
