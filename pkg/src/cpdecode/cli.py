"""Command-line entry point.

Three subcommands: ``synth`` writes synthetic stream containers with known
ground truth, ``evaluate`` scores decoders on stream containers or
recording files and writes per-run reports, ``report`` aggregates report
files into summary tables. Every invocation writes a manifest with the
fully resolved configuration, seed, and library versions so outputs can be
reproduced bit-identically.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure. The ``CPDECODE_DATA_DIR`` environment variable supplies the
default input directory for ``evaluate``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .data_io import (
    SynthConfig,
    export_csv_mirrors,
    export_streams,
    import_streams,
    load_reports,
    load_run,
    parse_run_filename,
    prepare_run,
    reports_to_csv,
    save_reports,
    synth_generate,
)
from .errors import (
    ConfigError,
    CPDecodeError,
    DataError,
    EmptySelectionError,
    NumericalError,
    SchemaError,
)
from .evaluation import ModelSpec, RunData, aggregate, run_protocol, session_accumulative
from .signal_pipeline import DEFAULT_BANDS, BandSpec, PacketizerConfig

DATA_DIR_ENV = "CPDECODE_DATA_DIR"
PREDICTION_HEADER = ["packet_index", "yhat_x", "yhat_y"]


@dataclass
class JobConfig:
    """Fully resolved invocation settings; serialized into the manifest.

    Defaults mirror the reference configuration: forgetting 0.98, updates
    every 50 packets, initial noise variance 0.01, residual smoothing 0.05
    with clip range [0.001, 1.0], ridge strength 1e-3, 0.25 s windows
    advanced every 0.04 s, and the theta/alpha/beta band set.
    """

    command: str = ""
    inputs: list[str] = field(default_factory=list)
    models: list[str] = field(default_factory=lambda: ["bayes_ard"])
    modes: list[str] = field(default_factory=lambda: ["velocity"])
    bands: str = "theta:4-7,alpha:8-13,beta:13-30"
    fs_in: float = 1000.0
    fs: float = 250.0
    fp: float = 25.0
    window_sec: float = 0.25
    step_sec: float = 0.04
    lambda_forget: float = 0.98
    update_interval: int = 50
    sigma2_init: float = 0.01
    beta_r: float = 0.05
    r_min: float = 0.001
    r_max: float = 1.0
    alpha_init: float = 1.0
    lambda_ridge: float = 1e-3
    seed: int = 0
    out_dir: str = "."


def parse_bands(text: str) -> list[BandSpec]:
    """Parse ``name:lo-hi`` comma lists, e.g. ``theta:4-7,alpha:8-13``."""
    if not text.strip():
        return list(DEFAULT_BANDS)
    bands = []
    for part in text.split(","):
        try:
            name, rng = part.strip().split(":")
            lo, hi = rng.split("-")
            bands.append(BandSpec(name.strip(), float(lo), float(hi)))
        except ValueError as exc:
            raise ConfigError(f"cannot parse band {part!r}: expected name:lo-hi") from exc
    return bands


def parse_drift(text: str) -> tuple[str, float, float]:
    if text == "none":
        return "none", 0.5, 0.0
    if text.startswith("switch:"):
        return "switch_at_fraction", float(text.split(":", 1)[1]), 0.0
    if text.startswith("walk:"):
        return "random_walk_rate", 0.5, float(text.split(":", 1)[1])
    raise ConfigError(f"unknown drift spec {text!r} (use none, switch:F, walk:RATE)")


def write_manifest(out_dir: Path, cfg: JobConfig, extra: dict | None = None) -> Path:
    import scipy

    manifest = {
        "config": asdict(cfg),
        "versions": {
            "cpdecode": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "argv": sys.argv[1:],
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


# -- synth --------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    drift, drift_at, drift_rate = parse_drift(args.drift)

    cfg = JobConfig(command="synth", seed=args.seed, out_dir=str(out_dir))
    n_written = 0
    for s in range(1, args.sessions + 1):
        for r in range(1, args.runs + 1):
            run_seed = args.seed + 1000 * s + r
            scfg = SynthConfig(
                seed=run_seed,
                n_packets=args.packets,
                n_features=args.features,
                n_relevant=args.relevant,
                noise_std=args.noise,
                drift=drift,
                drift_at=drift_at,
                drift_rate=drift_rate,
                mode=args.gen_mode,
                raw_channels=args.raw_channels,
            )
            packets, labels, truth = synth_generate(scfg)
            stem = f"S{args.subject:02d}_Se{s:02d}_{args.condition}_R{r:02d}"
            path = export_streams(
                packets,
                labels,
                out_dir / f"{stem}.npz",
                meta={"subject": args.subject, "session": s,
                      "condition": args.condition, "run": r, "seed": run_seed},
            )
            np.savez(
                out_dir / f"{stem}_truth.npz",
                **{k: (v if v is not None else np.array([])) for k, v in truth.items()},
            )
            if not args.no_csv:
                export_csv_mirrors(packets, labels, path)
            n_written += 1
            print(f"wrote {path.name}: N={packets.n_packets} D={packets.n_features} "
                  f"drift={drift} seed={run_seed}")
    write_manifest(out_dir, cfg, {"synth": vars(args) | {"func": None}})
    print(f"{n_written} run(s) written to {out_dir}")
    return 0


# -- evaluate -----------------------------------------------------------------


def _collect_run_files(args: argparse.Namespace) -> list[Path]:
    inputs = args.input or []
    if not inputs:
        env_dir = os.environ.get(DATA_DIR_ENV)
        if env_dir:
            inputs = [env_dir]
    if not inputs:
        raise ConfigError(f"no inputs given and {DATA_DIR_ENV} is not set")
    files: list[Path] = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            files.extend(sorted(p.glob(args.glob)))
        elif p.exists():
            files.append(p)
        else:
            raise EmptySelectionError(f"input path does not exist: {p}")
    files = [f for f in files if not f.stem.endswith("_truth")]
    if not files:
        raise EmptySelectionError("no runs matched the input selection")
    return files


def _load_run_data(path: Path, args: argparse.Namespace) -> RunData:
    if path.suffix == ".npz":
        packets, labels, meta = import_streams(path)
        parsed = parse_run_filename(path.name) or {}
        meta = {**parsed, **meta}
        return RunData(
            packets=packets,
            labels=labels,
            subject=f"S{int(meta.get('subject', 0)):02d}",
            session=int(meta.get("session", 1)),
            condition=str(meta.get("condition", "NA")),
            run=int(meta.get("run", 1)),
        )
    if path.suffix == ".mat":
        record = load_run(path, key_map=args.key_map)
        pconf = PacketizerConfig(
            fs_in=record.fs_in, fs=args.fs, fp=args.fp,
            window_sec=args.window_sec, step_sec=args.step_sec,
        )
        return prepare_run(record, pconf, parse_bands(args.bands), args.label_source)
    raise SchemaError(f"unsupported run file type: {path.name}")


def read_prediction_file(path: str | Path, n_packets: int) -> np.ndarray:
    """Read the prediction-exchange CSV (packet_index, yhat_x, yhat_y)."""
    path = Path(path)
    preds = np.full((n_packets, 2), np.nan)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != PREDICTION_HEADER:
            raise SchemaError(
                f"{path.name}: expected header {','.join(PREDICTION_HEADER)}"
            )
        for row in reader:
            idx = int(row[0])
            if 0 <= idx < n_packets:
                preds[idx] = [float(row[1]), float(row[2])]
    return preds


def _model_specs(args: argparse.Namespace, run: RunData, run_path: Path) -> list[ModelSpec]:
    specs = []
    for name in args.model.split(","):
        name = name.strip()
        common = dict(
            sigma2_init=args.sigma2_init,
            forget=args.lambda_forget,
            update_interval=args.update_interval,
            beta_r=args.beta_r,
            r_min=args.r_min,
            r_max=args.r_max,
            alpha_init=args.alpha_init,
        )
        if name in ("bayes_ard", "bayes_iso"):
            specs.append(ModelSpec(kind=name, online=not args.frozen, **common))
        elif name == "ar":
            specs.append(ModelSpec(kind="ar", lambda_ridge=args.lambda_ridge))
        elif name == "eegnet":
            if not args.predictions_from:
                raise ConfigError("--model eegnet requires --predictions-from")
            pred_path = Path(args.predictions_from)
            if pred_path.is_dir():
                pred_path = pred_path / f"{run_path.stem}.csv"
            preds = read_prediction_file(pred_path, run.n_packets)
            specs.append(ModelSpec(kind="external", predictions=preds, label="eegnet"))
        else:
            raise ConfigError(f"unknown model {name!r}")
    return specs


def _write_trace(out_dir: Path, stem: str, t, V_true, V_hat) -> None:
    trace_path = out_dir / f"{stem}_trace.csv"
    np.savetxt(
        trace_path,
        np.column_stack([t, V_true, V_hat]),
        delimiter=",",
        header="t,v_true_x,v_true_y,v_hat_x,v_hat_y",
        comments="",
    )
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(2, 1, figsize=(10, 5), sharex=True)
    for ax, j, axis_name in zip(axes, (0, 1), ("x", "y")):
        ax.plot(t, V_true[:, j], label="true", lw=1.0)
        ax.plot(t, V_hat[:, j], label="predicted", lw=1.0, alpha=0.8)
        ax.set_ylabel(f"v_{axis_name}")
        ax.legend(loc="upper right", fontsize=8)
    axes[1].set_xlabel("time (s)")
    fig.suptitle(stem)
    fig.tight_layout()
    fig.savefig(out_dir / f"{stem}_trace.png", dpi=100)
    plt.close(fig)


def cmd_evaluate(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = _collect_run_files(args)
    runs = [( _load_run_data(f, args), f) for f in files]
    modes = [m.strip() for m in args.mode.split(",")]

    reports = []
    for mode in modes:
        if args.session_accumulative:
            by_session: dict[int, list[RunData]] = {}
            for run, _f in runs:
                by_session.setdefault(run.session, []).append(run)
            sessions = [by_session[s] for s in sorted(by_session)]
            for name in args.model.split(","):
                spec = _model_specs_single(name.strip(), args)
                reports.extend(session_accumulative(sessions, spec, mode))
        else:
            for run, f in runs:
                for spec in _model_specs(args, run, f):
                    if args.traces:
                        report, (t, vt, vh) = run_protocol(run, spec, mode, return_traces=True)
                        _write_trace(out_dir, f"{f.stem}_{spec.report_label}_{mode}", t, vt, vh)
                    else:
                        report = run_protocol(run, spec, mode)
                    reports.append(report)
                    print(f"{f.stem} {spec.report_label:<10s} {mode:<12s} "
                          f"nmse={report.nmse:.6g}")

    save_reports(reports, out_dir / "reports.json")
    reports_to_csv(reports, out_dir / "reports.csv")
    tables = aggregate(reports)
    _write_tables(tables, out_dir)
    cfg = JobConfig(
        command="evaluate",
        inputs=[str(f) for f in files],
        models=args.model.split(","),
        modes=modes,
        bands=args.bands,
        fs=args.fs,
        fp=args.fp,
        window_sec=args.window_sec,
        step_sec=args.step_sec,
        lambda_forget=args.lambda_forget,
        update_interval=args.update_interval,
        sigma2_init=args.sigma2_init,
        beta_r=args.beta_r,
        r_min=args.r_min,
        r_max=args.r_max,
        alpha_init=args.alpha_init,
        lambda_ridge=args.lambda_ridge,
        seed=args.seed,
        out_dir=str(out_dir),
    )
    write_manifest(out_dir, cfg)
    print(f"\n{len(reports)} report(s) written to {out_dir}")
    print(tables["summary"].to_string(index=False))
    return 0


def _model_specs_single(name: str, args: argparse.Namespace) -> ModelSpec:
    if name in ("bayes_ard", "bayes_iso"):
        return ModelSpec(
            kind=name,
            online=not args.frozen,
            sigma2_init=args.sigma2_init,
            forget=args.lambda_forget,
            update_interval=args.update_interval,
            beta_r=args.beta_r,
            r_min=args.r_min,
            r_max=args.r_max,
            alpha_init=args.alpha_init,
        )
    if name == "ar":
        return ModelSpec(kind="ar", lambda_ridge=args.lambda_ridge)
    raise ConfigError(f"model {name!r} not supported with --session-accumulative")


def _write_tables(tables: dict, out_dir: Path) -> None:
    for name, df in tables.items():
        df.to_csv(out_dir / f"aggregate_{name}.csv", index=False)
    combined = {name: df.to_dict(orient="records") for name, df in tables.items()}
    (out_dir / "aggregate.json").write_text(json.dumps(combined, indent=2, default=str))


# -- report -------------------------------------------------------------------


def cmd_report(args: argparse.Namespace) -> int:
    paths: list[Path] = []
    for item in args.reports:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("**/reports.json")))
        elif p.exists():
            paths.append(p)
    if not paths:
        raise EmptySelectionError("no report files matched")
    reports = []
    for p in paths:
        reports.extend(load_reports(p))
    tables = aggregate(reports)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_tables(tables, out_dir)
    cfg = JobConfig(command="report", inputs=[str(p) for p in paths], out_dir=str(out_dir))
    write_manifest(out_dir, cfg)
    print(tables["summary"].to_string(index=False))
    if len(tables["ratios"]):
        print()
        print(tables["ratios"].to_string(index=False))
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpdecode",
        description="Online Bayesian decoding of continuous-pursuit kinematics from EEG.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate synthetic pursuit runs")
    p_synth.add_argument("--out", default="synth_out", help="output directory")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--packets", type=int, default=1000)
    p_synth.add_argument("--features", type=int, default=20)
    p_synth.add_argument("--relevant", type=int, default=10)
    p_synth.add_argument("--noise", type=float, default=0.05)
    p_synth.add_argument("--drift", default="none", help="none, switch:FRAC, or walk:RATE")
    p_synth.add_argument("--gen-mode", default="velocity",
                         choices=["velocity", "acceleration"],
                         help="layer at which the linear ground truth acts")
    p_synth.add_argument("--runs", type=int, default=1)
    p_synth.add_argument("--sessions", type=int, default=1)
    p_synth.add_argument("--subject", type=int, default=1)
    p_synth.add_argument("--condition", default="SY")
    p_synth.add_argument("--raw-channels", type=int, default=8)
    p_synth.add_argument("--no-csv", action="store_true", help="skip CSV mirrors")
    p_synth.set_defaults(func=cmd_synth)

    p_eval = sub.add_parser("evaluate", help="run decoders and score NMSE")
    p_eval.add_argument("--input", nargs="*", default=None,
                        help=f"run files or directories (default: ${DATA_DIR_ENV})")
    p_eval.add_argument("--glob", default="*.npz", help="pattern inside input dirs")
    p_eval.add_argument("--model", default="bayes_ard",
                        help="comma list: bayes_ard,bayes_iso,ar,eegnet")
    p_eval.add_argument("--mode", default="velocity",
                        help="comma list: velocity,acceleration")
    p_eval.add_argument("--out", default="eval_out")
    p_eval.add_argument("--session-accumulative", action="store_true",
                        help="calibrate each session from all earlier sessions")
    p_eval.add_argument("--predictions-from", default=None,
                        help="prediction-exchange CSV (or directory of them) for --model eegnet")
    p_eval.add_argument("--traces", action="store_true",
                        help="write per-run predicted-vs-true CSV and PNG")
    p_eval.add_argument("--frozen", action="store_true",
                        help="disable online adaptation of Bayes decoders")
    p_eval.add_argument("--label-source", default="velocity",
                        choices=["velocity", "pos_error", "auto"])
    p_eval.add_argument("--key-map", default=None, help="JSON key mapping for .mat files")
    p_eval.add_argument("--bands", default="theta:4-7,alpha:8-13,beta:13-30")
    p_eval.add_argument("--fs", type=float, default=250.0)
    p_eval.add_argument("--fp", type=float, default=25.0)
    p_eval.add_argument("--window-sec", type=float, default=0.25)
    p_eval.add_argument("--step-sec", type=float, default=0.04)
    p_eval.add_argument("--lambda-forget", type=float, default=0.98)
    p_eval.add_argument("--update-interval", type=int, default=50)
    p_eval.add_argument("--sigma2-init", type=float, default=0.01)
    p_eval.add_argument("--beta-r", type=float, default=0.05)
    p_eval.add_argument("--r-min", type=float, default=0.001)
    p_eval.add_argument("--r-max", type=float, default=1.0)
    p_eval.add_argument("--alpha-init", type=float, default=1.0)
    p_eval.add_argument("--lambda-ridge", type=float, default=1e-3)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.set_defaults(func=cmd_evaluate)

    p_rep = sub.add_parser("report", help="aggregate report files")
    p_rep.add_argument("reports", nargs="+", help="reports.json files or directories")
    p_rep.add_argument("--out", default="report_out")
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except CPDecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
