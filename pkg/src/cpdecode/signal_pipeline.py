"""Streaming feature extraction from multichannel recordings.

Turns a continuous C-channel recording into per-packet features at the
control update rate: sliding windows (length ``L``, hop ``H``) feed a
Welch PSD whose band-integrated power becomes one feature vector per
packet, while a parallel path (common average reference + exponential
moving standardization) produces standardized raw windows for
convolutional decoders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import ConfigError, EmptyStreamError, InvalidInputError

__all__ = [
    "PacketizerConfig",
    "BandSpec",
    "StandardizerState",
    "PacketStream",
    "DEFAULT_BANDS",
    "round_half_away",
    "decimate",
    "packetize",
    "welch_psd",
    "bandpower",
    "car",
    "ems_standardize",
    "ems_apply",
    "build_feature_streams",
]


def round_half_away(x: float) -> int:
    """Round to nearest integer with halves going away from zero.

    ``round_half_away(62.5) == 63``, unlike banker's rounding.
    """
    return int(np.floor(x + 0.5)) if x >= 0 else int(np.ceil(x - 0.5))


@dataclass
class PacketizerConfig:
    """Window/hop geometry tying the sample rate to the packet rate.

    Attributes
    ----------
    fs_in : float
        Source sampling rate in Hz before decimation.
    fs : float
        Working sampling rate in Hz after decimation.
    fp : float
        Packet (control update) rate in Hz.
    window_sec, step_sec : float
        Sliding-window length and hop in seconds.

    Derived: ``L = round(window_sec * fs)`` and ``H = round(step_sec * fs)``
    with halves rounded away from zero, and ``dt = step_sec``. For the
    default values ``H * fp == fs``, so the hop matches the packet rate
    exactly.
    """

    fs_in: float = 1000.0
    fs: float = 250.0
    fp: float = 25.0
    window_sec: float = 0.25
    step_sec: float = 0.04

    def __post_init__(self) -> None:
        if self.fs_in <= 0 or self.fs <= 0 or self.fp <= 0:
            raise ConfigError("sampling and packet rates must be positive")
        if self.window_sec <= 0 or self.step_sec <= 0:
            raise ConfigError("window_sec and step_sec must be positive")
        if self.L < 1 or self.H < 1:
            raise ConfigError("window/step too short for the sampling rate")

    @property
    def L(self) -> int:
        """Window length in samples."""
        return round_half_away(self.window_sec * self.fs)

    @property
    def H(self) -> int:
        """Hop in samples."""
        return round_half_away(self.step_sec * self.fs)

    @property
    def dt(self) -> float:
        """Packet interval in seconds."""
        return self.step_sec

    @property
    def decimation_factor(self) -> int:
        factor = self.fs_in / self.fs
        if abs(factor - round(factor)) > 1e-9:
            raise ConfigError(
                f"fs_in={self.fs_in} is not an integer multiple of fs={self.fs}"
            )
        return int(round(factor))


@dataclass(frozen=True)
class BandSpec:
    """A named frequency band [lo, hi] in Hz."""

    name: str
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (0 < self.lo < self.hi):
            raise ConfigError(f"band {self.name}: need 0 < lo < hi, got [{self.lo}, {self.hi}]")


DEFAULT_BANDS = [
    BandSpec("theta", 4.0, 7.0),
    BandSpec("alpha", 8.0, 13.0),
    BandSpec("beta", 13.0, 30.0),
]
# A fourth sub-band (e.g. low gamma) can be appended by callers; the band
# list is configurable everywhere downstream.
LOW_GAMMA = BandSpec("low_gamma", 30.0, 50.0)


class StandardizerState:
    """Per-channel running mean/variance for exponential moving standardization.

    The state is lazily initialized from the first sample it sees:
    ``m0 = x`` and ``v0 = 1``. Updates are order-deterministic and the
    variance never goes negative.
    """

    def __init__(self, alpha: float = 0.001, eps: float = 1e-8):
        if not (0 < alpha <= 1):
            raise ConfigError("alpha must be in (0, 1]")
        if eps <= 0:
            raise ConfigError("eps must be positive")
        self.alpha = float(alpha)
        self.eps = float(eps)
        self.m: np.ndarray | None = None
        self.v: np.ndarray | None = None

    @property
    def initialized(self) -> bool:
        return self.m is not None


def ems_standardize(state: StandardizerState, sample: np.ndarray) -> np.ndarray:
    """Standardize one C-vector sample, updating ``state`` in place.

    Applies the recursions ``m <- (1-a)m + a*x`` then
    ``v <- (1-a)v + a*(x-m)^2`` (with the freshly updated mean) and returns
    ``(x - m) / sqrt(v + eps)``. Raises without touching the state if the
    sample is not finite.
    """
    x = np.asarray(sample, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("non-finite sample passed to ems_standardize")
    if state.m is None:
        state.m = x.copy()
        state.v = np.ones_like(x)
    a = state.alpha
    state.m = (1.0 - a) * state.m + a * x
    d = x - state.m
    state.v = (1.0 - a) * state.v + a * (d * d)
    return d / np.sqrt(state.v + state.eps)


def ems_apply(x: np.ndarray, state: StandardizerState) -> np.ndarray:
    """Run exponential moving standardization over a full C x T signal.

    Equivalent to calling :func:`ems_standardize` column by column (the
    recursions are first-order IIR filters, so they vectorize), and leaves
    ``state`` holding the final mean/variance.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise InvalidInputError("expected a C x T array")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("non-finite samples passed to ems_apply")
    if x.shape[1] == 0:
        return x.copy()
    if state.m is None:
        state.m = x[:, 0].copy()
        state.v = np.ones(x.shape[0])
    a = state.alpha
    b, aa = [a], [1.0, -(1.0 - a)]
    m, zm = sps.lfilter(b, aa, x, axis=1, zi=((1.0 - a) * state.m)[:, None])
    d = x - m
    v, zv = sps.lfilter(b, aa, d * d, axis=1, zi=((1.0 - a) * state.v)[:, None])
    state.m = m[:, -1].copy()
    state.v = v[:, -1].copy()
    return d / np.sqrt(v + state.eps)


def decimate(x: np.ndarray, factor: int) -> np.ndarray:
    """Zero-phase decimation of a C x T signal by an integer factor.

    Low-passes with an order-8 Butterworth at 0.4x the output rate applied
    forward-backward (no phase distortion, unit DC gain), then keeps every
    ``factor``-th sample. Output length is ``ceil(T / factor)``.
    """
    if not isinstance(factor, (int, np.integer)) or factor <= 0:
        raise ConfigError(f"decimation factor must be a positive integer, got {factor!r}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("non-finite samples passed to decimate")
    if factor == 1:
        return x.copy()
    # cutoff 0.4 * fs_out = 0.8 * output Nyquist, normalized to input Nyquist
    b, a = sps.butter(8, 0.8 / factor)
    y = sps.filtfilt(b, a, x, axis=-1)
    return y[..., ::factor]


def packetize(x: np.ndarray, cfg: PacketizerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Slice a C x T signal into overlapping windows.

    Window ``k`` covers samples ``[k*H, k*H + L)`` and is stamped with the
    time of its right edge, ``(k*H + L) / fs``, so a label aligned to a
    packet only ever sees past signal.

    Returns
    -------
    windows : ndarray, shape (N, C, L)
    t : ndarray, shape (N,)
        Timestamps in seconds; ``N = floor((T - L) / H) + 1``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    C, T = x.shape
    L, H = cfg.L, cfg.H
    if T < L:
        raise EmptyStreamError(
            f"recording too short to packetize: T={T} samples < window L={L}"
        )
    n = (T - L) // H + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, L, axis=1)[:, ::H, :]
    windows = np.ascontiguousarray(windows.transpose(1, 0, 2)[:n])
    t = (np.arange(n) * H + L) / cfg.fs
    return windows, t


def welch_psd(
    x: np.ndarray,
    fs: float,
    nperseg: int | None = None,
    overlap_frac: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    """One-sided Welch PSD (density scaling, Hann segments, mean detrend).

    ``nperseg`` defaults to ``min(L, 256)`` where L is the length of the
    last axis. Accepts any leading batch shape; the PSD is computed along
    the last axis. The integrated density is Parseval-consistent with the
    windowed mean-square power of the signal.
    """
    x = np.asarray(x, dtype=float)
    L = x.shape[-1]
    if L < 8:
        raise ConfigError(f"window too short for Welch PSD: L={L} < 8")
    if nperseg is None:
        nperseg = min(L, 256)
    noverlap = int(nperseg * overlap_frac)
    freqs, psd = sps.welch(
        x,
        fs=fs,
        window="hann",
        nperseg=nperseg,
        noverlap=noverlap,
        detrend="constant",
        scaling="density",
        axis=-1,
    )
    return freqs, psd


def bandpower(freqs: np.ndarray, psd: np.ndarray, bands: list[BandSpec]) -> np.ndarray:
    """Integrate PSD over each band with the trapezoidal rule.

    Band edges falling between PSD bins contribute linearly interpolated
    edge points, so powers over adjacent bands add up exactly to the power
    over their union.

    Parameters
    ----------
    freqs : ndarray, shape (F,)
    psd : ndarray, shape (..., F)
    bands : list of BandSpec

    Returns
    -------
    ndarray, shape (..., len(bands)), nonnegative.
    """
    freqs = np.asarray(freqs, dtype=float)
    psd = np.asarray(psd, dtype=float)
    nyquist = freqs[-1]
    out = np.empty(psd.shape[:-1] + (len(bands),))
    for k, band in enumerate(bands):
        if band.hi > nyquist + 1e-12 or band.lo < freqs[0]:
            raise ConfigError(
                f"band {band.name} [{band.lo}, {band.hi}] outside PSD range "
                f"[{freqs[0]}, {nyquist}]"
            )
        out[..., k] = _integrate_band(freqs, psd, band.lo, band.hi)
    return out


def _integrate_band(freqs: np.ndarray, psd: np.ndarray, lo: float, hi: float) -> np.ndarray:
    # interior bins strictly inside (lo, hi); interpolated values at the edges
    i0 = int(np.searchsorted(freqs, lo, side="right"))
    i1 = int(np.searchsorted(freqs, hi, side="left"))
    p_lo = _interp_last_axis(freqs, psd, lo)
    p_hi = _interp_last_axis(freqs, psd, hi)
    grid = np.concatenate(([lo], freqs[i0:i1], [hi]))
    vals = np.concatenate(
        [p_lo[..., None], psd[..., i0:i1], p_hi[..., None]], axis=-1
    )
    return np.trapezoid(vals, grid, axis=-1)


def _interp_last_axis(freqs: np.ndarray, psd: np.ndarray, f: float) -> np.ndarray:
    j = int(np.searchsorted(freqs, f, side="right"))
    if j == 0:
        return psd[..., 0].astype(float)
    if j >= len(freqs):
        return psd[..., -1].astype(float)
    f0, f1 = freqs[j - 1], freqs[j]
    w = (f - f0) / (f1 - f0)
    return (1.0 - w) * psd[..., j - 1] + w * psd[..., j]


def car(window: np.ndarray) -> np.ndarray:
    """Common average reference: subtract the cross-channel mean per sample."""
    window = np.asarray(window, dtype=float)
    if window.ndim != 2 or window.shape[0] < 2:
        raise ConfigError("CAR needs a C x L array with at least 2 channels")
    return window - window.mean(axis=0, keepdims=True)


@dataclass
class PacketStream:
    """Aligned per-packet feature matrices with timestamps.

    ``X_bp`` holds one bandpower feature vector per packet (channel-major,
    band-minor concatenation, so ``D = C * len(bands)`` for pipeline-built
    streams). ``X_raw`` holds the standardized raw windows shaped
    (N, 1, C, L) for convolutional decoders. Both share ``t``.
    """

    X_bp: np.ndarray
    X_raw: np.ndarray
    t: np.ndarray
    C: int
    bands: list[BandSpec] | None = field(default=None)

    @property
    def n_packets(self) -> int:
        return self.X_bp.shape[0]

    @property
    def n_features(self) -> int:
        return self.X_bp.shape[1]

    def validate(self) -> None:
        n = self.n_packets
        if self.X_raw.shape[0] != n or self.t.shape[0] != n:
            raise InvalidInputError("PacketStream arrays disagree on packet count")
        if self.bands is not None and self.n_features != self.C * len(self.bands):
            raise InvalidInputError(
                f"D={self.n_features} != C*K={self.C * len(self.bands)}"
            )
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise InvalidInputError("packet timestamps must be strictly increasing")

    def head(self, n: int) -> "PacketStream":
        return PacketStream(self.X_bp[:n], self.X_raw[:n], self.t[:n], self.C, self.bands)


def build_feature_streams(
    recording: np.ndarray,
    cfg: PacketizerConfig | None = None,
    bands: list[BandSpec] | None = None,
    standardizer: StandardizerState | None = None,
) -> PacketStream:
    """Run the full per-packet feature pipeline on a C x T recording at ``cfg.fs``.

    Bandpower features are computed from the raw (non-referenced) windows;
    the standardized raw windows go through CAR and exponential moving
    standardization over the continuous signal before windowing. Both
    streams share the packetizer and therefore the timestamps.
    """
    cfg = cfg or PacketizerConfig()
    bands = bands if bands is not None else list(DEFAULT_BANDS)
    recording = np.atleast_2d(np.asarray(recording, dtype=float))
    C = recording.shape[0]
    for band in bands:
        if band.hi > cfg.fs / 2:
            raise ConfigError(f"band {band.name} exceeds Nyquist {cfg.fs / 2} Hz")

    windows, t = packetize(recording, cfg)
    freqs, psd = welch_psd(windows, cfg.fs)
    powers = bandpower(freqs, psd, bands)  # (N, C, K)
    X_bp = powers.reshape(powers.shape[0], -1)

    referenced = car(recording) if C >= 2 else recording
    standardizer = standardizer or StandardizerState()
    standardized = ems_apply(referenced, standardizer)
    raw_windows, _ = packetize(standardized, cfg)
    X_raw = raw_windows[:, None, :, :].astype(np.float32)

    return PacketStream(X_bp=X_bp, X_raw=X_raw, t=t, C=C, bands=bands)
