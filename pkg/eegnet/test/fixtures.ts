import { execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";

/** Ask the decoding package to synthesize a small learnable run. */
export function synthContainer(
  dir: string,
  opts: { packets?: number; channels?: number; seed?: number } = {}
): string {
  const { packets = 120, channels = 2, seed = 11 } = opts;
  execFileSync("python3", [
    "-m", "cpdecode.cli", "synth",
    "--out", dir,
    "--packets", String(packets),
    "--raw-channels", String(channels),
    "--seed", String(seed),
    "--no-csv",
  ]);
  return path.join(dir, "S01_Se01_SY_R01.npz");
}

/** Score an exchange CSV through the decoding package's CLI. */
export function scoreWithPrimary(
  runFile: string,
  predsFile: string,
  mode: "velocity" | "acceleration",
  outDir: string
): number {
  execFileSync("python3", [
    "-m", "cpdecode.cli", "evaluate",
    "--input", runFile,
    "--model", "eegnet",
    "--predictions-from", predsFile,
    "--mode", mode,
    "--out", outDir,
  ]);
  const reports = JSON.parse(
    fs.readFileSync(path.join(outDir, "reports.json"), "utf8")
  );
  return reports.reports[0].nmse as number;
}

export function tmpdir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}
