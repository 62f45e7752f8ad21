"""Data ingestion and persistence.

Reads recordings stored as MATLAB v7.3 (HDF5) containers with a
configurable key mapping, generates synthetic pursuit data with known
ground-truth weights for verification, and round-trips all streams through
a versioned single-file container (NPZ) with CSV mirrors for inspection.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    CorruptDataError,
    MissingDataError,
    SchemaError,
    SchemaVersionError,
)
from .evaluation import RunData, RunReport
from .labels import LabelStream, Trajectory, align_streams, build_labels, integrate_acceleration, resample_to_packets
from .signal_pipeline import (
    BandSpec,
    PacketizerConfig,
    PacketStream,
    build_feature_streams,
    decimate,
)

__all__ = [
    "RunRecord",
    "SynthConfig",
    "DEFAULT_KEY_MAP",
    "parse_run_filename",
    "load_run",
    "prepare_run",
    "synth_generate",
    "export_streams",
    "import_streams",
    "export_csv_mirrors",
    "save_reports",
    "load_reports",
    "reports_to_csv",
]

STREAM_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1

# Logical name -> dataset path inside the HDF5 container. The public
# dataset's internal naming is confirmed at integration time by editing a
# JSON copy of this mapping and passing it to load_run.
DEFAULT_KEY_MAP = {
    "eeg": "eeg",
    "srate": "srate",
    "cursor_pos": "cursor_pos",
    "target_pos": "target_pos",
    "cursor_vel": "cursor_vel",
    "kin_time": "kin_time",
    "kin_rate": "kin_rate",
    "n_channels": 62,
}

_RUN_NAME_RE = re.compile(r"^S(\d+)_Se(\d+)_([A-Za-z]+)_R(\d+)$")


def parse_run_filename(name: str, strict: bool = False) -> dict | None:
    """Parse subject/session/condition/run from names like ``S16_Se02_CL_R01``."""
    stem = Path(name).stem
    m = _RUN_NAME_RE.match(stem)
    if m is None:
        if strict:
            raise MissingDataError(
                f"filename {stem!r} does not follow the S##_Se##_COND_R## convention"
            )
        return None
    return {
        "subject": int(m.group(1)),
        "session": int(m.group(2)),
        "condition": m.group(3),
        "run": int(m.group(4)),
    }


@dataclass
class RunRecord:
    """Raw contents of one recording file before any processing."""

    eeg: np.ndarray  # C x T at fs_in
    fs_in: float
    traj: Trajectory
    meta: dict = field(default_factory=dict)


def _read_key_map(key_map: dict | str | Path | None) -> dict:
    if key_map is None:
        return dict(DEFAULT_KEY_MAP)
    if isinstance(key_map, (str, Path)):
        with open(key_map) as fh:
            loaded = json.load(fh)
        merged = dict(DEFAULT_KEY_MAP)
        merged.update(loaded)
        return merged
    merged = dict(DEFAULT_KEY_MAP)
    merged.update(key_map)
    return merged


def _orient(arr: np.ndarray, leading: int) -> np.ndarray:
    """Fix MATLAB column-major transposition: put the size-``leading`` axis first."""
    if arr.ndim != 2:
        raise CorruptDataError(f"expected a 2-D dataset, got shape {arr.shape}")
    if arr.shape[0] == leading:
        return arr
    if arr.shape[1] == leading:
        return arr.T
    # fall back to the longer axis as time
    return arr if arr.shape[0] < arr.shape[1] else arr.T


def load_run(path: str | Path, key_map: dict | str | Path | None = None) -> RunRecord:
    """Load one recording from an HDF5 (MATLAB v7.3) container.

    Requires the EEG matrix, the sampling-rate attribute, and at least one
    kinematic source (cursor+target positions, or cursor velocities).
    Missing keys raise a schema error listing them; a truncated or
    unreadable file raises a corrupt-data error without returning a
    partial record. The loader never resamples or filters.
    """
    import h5py

    path = Path(path)
    keys = _read_key_map(key_map)
    try:
        fh = h5py.File(path, "r")
    except (OSError, IOError) as exc:
        raise CorruptDataError(f"cannot open {path}: {exc}") from exc
    with fh:
        def maybe(name):
            ds = keys.get(name)
            if ds and ds in fh:
                return np.asarray(fh[ds], dtype=float)
            return None

        missing = [keys["eeg"]] if keys["eeg"] not in fh else []
        if keys["srate"] not in fh:
            missing.append(keys["srate"])
        cursor = maybe("cursor_pos")
        target = maybe("target_pos")
        vel = maybe("cursor_vel")
        if (cursor is None or target is None) and vel is None:
            missing.append(f"{keys['cursor_pos']}+{keys['target_pos']} or {keys['cursor_vel']}")
        if missing:
            raise SchemaError(f"{path.name}: missing dataset keys: {', '.join(missing)}")

        try:
            eeg = _orient(np.asarray(fh[keys["eeg"]], dtype=float), int(keys["n_channels"]))
            fs_in = float(np.asarray(fh[keys["srate"]]).squeeze())
        except (OSError, ValueError) as exc:
            raise CorruptDataError(f"{path.name}: unreadable contents: {exc}") from exc

        kin_arrays = {}
        n_kin = None
        for name, arr in (("cursor_pos", cursor), ("target_pos", target), ("cursor_vel", vel)):
            if arr is not None:
                if arr.ndim != 2:
                    raise CorruptDataError(f"{path.name}: {name} is not 2-D")
                if arr.shape[1] != 2 and arr.shape[0] == 2:
                    arr = arr.T  # MATLAB orientation
                if arr.shape[1] != 2:
                    raise CorruptDataError(f"{path.name}: {name} is not T x 2")
                kin_arrays[name] = arr
                n_kin = arr.shape[0] if n_kin is None else min(n_kin, arr.shape[0])
        kin_arrays = {k: v[:n_kin] for k, v in kin_arrays.items()}

        t_kin = maybe("kin_time")
        if t_kin is not None:
            t_kin = np.asarray(t_kin, dtype=float).ravel()[:n_kin]
            if t_kin.size > 1 and not np.all(np.diff(t_kin) > 0):
                raise CorruptDataError(f"{path.name}: kinematic timestamps not monotone")
        else:
            rate_ds = keys.get("kin_rate")
            rate = 25.0
            if rate_ds and rate_ds in fh:
                rate = float(np.asarray(fh[rate_ds]).squeeze())
            t_kin = np.arange(n_kin) / rate

    traj = Trajectory(t=t_kin, **kin_arrays)
    meta = parse_run_filename(path.name) or {}
    return RunRecord(eeg=eeg, fs_in=fs_in, traj=traj, meta=meta)


def prepare_run(
    record: RunRecord,
    cfg: PacketizerConfig | None = None,
    bands: list[BandSpec] | None = None,
    label_source: str = "velocity",
) -> RunData:
    """Full ingestion: decimate, extract features, build labels, align.

    The default label source is velocity (the evaluation metric is defined
    over velocities); pass ``pos_error`` or ``auto`` to use the
    target-minus-cursor vector where available.
    """
    cfg = cfg or PacketizerConfig(fs_in=record.fs_in)
    factor = cfg.decimation_factor
    eeg = decimate(record.eeg, factor) if factor > 1 else record.eeg
    packets = build_feature_streams(eeg, cfg, bands)
    y, mode = build_labels(record.traj, label_source)
    Y = resample_to_packets(y, record.traj.t, packets.t)
    labels = LabelStream(Y, mode, cfg.dt)
    packets, labels = align_streams(packets, labels)
    meta = record.meta
    return RunData(
        packets=packets,
        labels=labels,
        subject=f"S{meta.get('subject', 0):02d}",
        session=int(meta.get("session", 1)),
        condition=str(meta.get("condition", "NA")),
        run=int(meta.get("run", 1)),
    )


@dataclass
class SynthConfig:
    """Synthetic pursuit-data generator settings.

    Features are temporally smoothed positive processes (bandpower-like);
    labels are a linear map of the features plus Gaussian noise, with only
    the first ``n_relevant`` weight rows nonzero. ``drift`` is one of
    none, switch_at_fraction (weights replaced at ``drift_at`` through the
    stream), or random_walk_rate (relevant rows take Gaussian steps of
    scale ``drift_rate`` per packet). ``mode`` selects whether the linear
    map generates velocities directly or accelerations that are integrated
    into the returned velocity labels.
    """

    seed: int = 0
    n_packets: int = 1000
    n_features: int = 20
    n_relevant: int = 10
    noise_std: float = 0.05
    drift: str = "none"
    drift_at: float = 0.5
    drift_rate: float = 0.0
    mode: str = "velocity"
    raw_channels: int = 8
    raw_len: int = 63

    def __post_init__(self) -> None:
        if self.n_relevant > self.n_features:
            raise ConfigError("n_relevant cannot exceed n_features")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be nonnegative")
        if self.drift not in ("none", "switch_at_fraction", "random_walk_rate"):
            raise ConfigError(f"unknown drift kind {self.drift!r}")
        if self.mode not in ("velocity", "acceleration"):
            raise ConfigError(f"unknown generation mode {self.mode!r}")


def synth_generate(cfg: SynthConfig) -> tuple[PacketStream, LabelStream, dict]:
    """Generate one synthetic run with known ground truth.

    Returns aligned (PacketStream, LabelStream, ground_truth). The label
    stream always carries velocities; in acceleration mode the linear map
    produces accelerations which are integrated (from rest) so that the
    within-run finite differences recover them. Deterministic under seed.
    """
    rng = np.random.default_rng(cfg.seed)
    N, D = cfg.n_packets, cfg.n_features
    pconf = PacketizerConfig()
    dt = pconf.dt

    rho = 0.9
    eps = rng.standard_normal((N, D))
    z = np.empty((N, D))
    z[0] = eps[0]
    scale = np.sqrt(1.0 - rho * rho)
    for k in range(1, N):
        z[k] = rho * z[k - 1] + scale * eps[k]
    X = np.logaddexp(0.0, z)  # softplus: positive, smooth

    W1 = np.zeros((D, 2))
    W1[: cfg.n_relevant] = rng.standard_normal((cfg.n_relevant, 2))
    switch_index = -1
    W2 = None
    if cfg.drift == "switch_at_fraction":
        switch_index = int(np.floor(cfg.drift_at * N))
        W2 = np.zeros((D, 2))
        W2[: cfg.n_relevant] = rng.standard_normal((cfg.n_relevant, 2))

    lin = np.empty((N, 2))
    W_t = W1.copy()
    for k in range(N):
        if cfg.drift == "switch_at_fraction" and k == switch_index:
            W_t = W2.copy()
        elif cfg.drift == "random_walk_rate" and k > 0:
            W_t[: cfg.n_relevant] += cfg.drift_rate * rng.standard_normal(
                (cfg.n_relevant, 2)
            )
        lin[k] = X[k] @ W_t
    lin += cfg.noise_std * rng.standard_normal((N, 2))

    if cfg.mode == "velocity":
        V = lin
    else:
        V = integrate_acceleration(lin, np.zeros(2), dt)
    labels = LabelStream(V, "velocity", dt)

    X_raw = _synth_raw_windows(rng, V, cfg, pconf.fs)
    t = (np.arange(N) * pconf.H + pconf.L) / pconf.fs
    packets = PacketStream(X_bp=X, X_raw=X_raw, t=t, C=cfg.raw_channels, bands=None)

    ground_truth = {
        "W1": W1,
        "W2": W2,
        "switch_index": switch_index,
        "drift": cfg.drift,
        "drift_rate": cfg.drift_rate,
        "generated_mode": cfg.mode,
        "noise_std": cfg.noise_std,
        "seed": cfg.seed,
    }
    return packets, labels, ground_truth


def _synth_raw_windows(
    rng: np.random.Generator, V: np.ndarray, cfg: SynthConfig, fs: float
) -> np.ndarray:
    """Raw windows whose per-channel amplitude linearly encodes the labels."""
    N = V.shape[0]
    C, L = cfg.raw_channels, cfg.raw_len
    v_scale = np.std(V, axis=0)
    v_scale[v_scale == 0] = 1.0
    y_norm = V / v_scale
    mix = rng.standard_normal((C, 2)) * 0.3
    carrier_freq = np.linspace(6.0, 30.0, C)
    phase = rng.uniform(0, 2 * np.pi, size=C)
    ts = np.arange(L) / fs
    carriers = np.sin(2 * np.pi * carrier_freq[:, None] * ts[None, :] + phase[:, None])
    amp = 1.0 + y_norm @ mix.T  # (N, C)
    raw = amp[:, :, None] * carriers[None, :, :]
    raw = raw + 0.05 * rng.standard_normal((N, C, L))
    return raw[:, None, :, :].astype(np.float32)


# -- stream container -------------------------------------------------------


def export_streams(
    packets: PacketStream,
    labels: LabelStream,
    path: str | Path,
    meta: dict | None = None,
) -> Path:
    """Write both streams to a single versioned binary container (.npz).

    The round trip through :func:`import_streams` is lossless to the bit.
    """
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(".npz")
    bands = packets.bands
    np.savez(
        path,
        schema_version=np.array(STREAM_SCHEMA_VERSION),
        X_bp=packets.X_bp,
        X_raw=packets.X_raw,
        t=packets.t,
        C=np.array(packets.C),
        has_bands=np.array(bands is not None),
        band_names=np.array([b.name for b in bands] if bands else [], dtype="U32"),
        band_lo=np.array([b.lo for b in bands] if bands else []),
        band_hi=np.array([b.hi for b in bands] if bands else []),
        Y=labels.Y,
        label_mode=np.array(labels.mode, dtype="U16"),
        dt=np.array(labels.dt),
        meta_json=np.array(json.dumps(meta or {}), dtype="U"),
    )
    return path


def import_streams(path: str | Path) -> tuple[PacketStream, LabelStream, dict]:
    """Read a stream container written by :func:`export_streams`."""
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            if "schema_version" not in data:
                raise SchemaVersionError(f"{path.name}: not a stream container")
            version = int(data["schema_version"])
            if version != STREAM_SCHEMA_VERSION:
                raise SchemaVersionError(
                    f"{path.name}: unsupported container version {version}"
                )
            required = ["X_bp", "X_raw", "t", "C", "Y", "label_mode", "dt"]
            absent = [k for k in required if k not in data]
            if absent:
                raise SchemaError(f"{path.name}: missing keys: {', '.join(absent)}")
            bands = None
            if bool(data["has_bands"]):
                bands = [
                    BandSpec(str(n), float(lo), float(hi))
                    for n, lo, hi in zip(data["band_names"], data["band_lo"], data["band_hi"])
                ]
            packets = PacketStream(
                X_bp=data["X_bp"],
                X_raw=data["X_raw"],
                t=data["t"],
                C=int(data["C"]),
                bands=bands,
            )
            labels = LabelStream(
                Y=data["Y"], mode=str(data["label_mode"]), dt=float(data["dt"])
            )
            meta = json.loads(str(data["meta_json"])) if "meta_json" in data else {}
    except (OSError, ValueError, KeyError, EOFError) as exc:
        raise CorruptDataError(f"cannot read stream container {path}: {exc}") from exc
    return packets, labels, meta


def export_csv_mirrors(
    packets: PacketStream, labels: LabelStream, base_path: str | Path
) -> tuple[Path, Path]:
    """Write human-inspectable CSV mirrors (features and labels, one packet per line)."""
    base = Path(base_path)
    feat_path = base.with_name(base.stem + "_features.csv")
    lab_path = base.with_name(base.stem + "_labels.csv")
    D = packets.n_features
    header = "t," + ",".join(f"f{j}" for j in range(D))
    np.savetxt(
        feat_path,
        np.column_stack([packets.t, packets.X_bp]),
        delimiter=",",
        header=header,
        comments="",
    )
    np.savetxt(
        lab_path,
        np.column_stack([packets.t[: labels.n_packets], labels.Y]),
        delimiter=",",
        header="t,y0,y1",
        comments="",
    )
    return feat_path, lab_path


# -- run reports -------------------------------------------------------------


def save_reports(reports: list[RunReport], path: str | Path) -> Path:
    path = Path(path)
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "reports": [r.to_dict() for r in reports],
    }
    path.write_text(json.dumps(payload, indent=2))
    return path


def load_reports(path: str | Path) -> list[RunReport]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptDataError(f"cannot read report file {path}: {exc}") from exc
    if payload.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise SchemaVersionError(f"{path.name}: unsupported report version")
    return [RunReport.from_dict(d) for d in payload["reports"]]


def reports_to_csv(reports: list[RunReport], path: str | Path) -> Path:
    import pandas as pd

    path = Path(path)
    pd.DataFrame([r.to_dict() for r in reports]).to_csv(path, index=False)
    return path
