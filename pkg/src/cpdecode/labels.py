"""Kinematic targets: construction, resampling, alignment, and the
velocity/acceleration conversions used by the two prediction modes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyStreamError,
    InsufficientDataError,
    InvalidInputError,
    MissingDataError,
)
from .signal_pipeline import PacketStream

__all__ = [
    "Trajectory",
    "LabelStream",
    "build_labels",
    "resample_to_packets",
    "align_streams",
    "to_acceleration",
    "integrate_acceleration",
]

LABEL_MODES = ("pos_error", "velocity", "acceleration")


@dataclass
class Trajectory:
    """Recorded cursor/target kinematics on their native time grid.

    At least one of (cursor_pos and target_pos) or cursor_vel must be
    present; timestamps must be strictly increasing.
    """

    t: np.ndarray
    cursor_pos: np.ndarray | None = None
    target_pos: np.ndarray | None = None
    cursor_vel: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=float)
        for name in ("cursor_pos", "target_pos", "cursor_vel"):
            val = getattr(self, name)
            if val is not None:
                arr = np.asarray(val, dtype=float)
                if arr.shape != (self.t.shape[0], 2):
                    raise InvalidInputError(
                        f"{name} must be T x 2 matching t, got {arr.shape}"
                    )
                setattr(self, name, arr)
        if self.t.size > 1 and not np.all(np.diff(self.t) > 0):
            raise InvalidInputError("trajectory timestamps must be strictly increasing")
        has_pos_error = self.cursor_pos is not None and self.target_pos is not None
        if not has_pos_error and self.cursor_vel is None:
            raise MissingDataError(
                "trajectory needs cursor_pos+target_pos or cursor_vel"
            )


@dataclass
class LabelStream:
    """Per-packet 2-D targets tagged with their kinematic mode."""

    Y: np.ndarray
    mode: str
    dt: float

    def __post_init__(self) -> None:
        if self.mode not in LABEL_MODES:
            raise InvalidInputError(f"unknown label mode {self.mode!r}")
        self.Y = np.asarray(self.Y, dtype=float)
        if self.Y.ndim != 2 or self.Y.shape[1] != 2:
            raise InvalidInputError(f"labels must be N x 2, got {self.Y.shape}")

    @property
    def n_packets(self) -> int:
        return self.Y.shape[0]

    def head(self, n: int) -> "LabelStream":
        return LabelStream(self.Y[:n], self.mode, self.dt)


def build_labels(traj: Trajectory, source: str = "auto") -> tuple[np.ndarray, str]:
    """Pick the continuous-time label signal from a trajectory.

    ``pos_error`` is the target-minus-cursor vector, ``velocity`` the
    recorded cursor velocity. ``auto`` prefers position error when both
    positions exist and falls back to velocity.

    Returns the T x 2 signal and the resolved mode name.
    """
    if source == "auto":
        if traj.cursor_pos is not None and traj.target_pos is not None:
            source = "pos_error"
        else:
            source = "velocity"
    if source == "pos_error":
        if traj.target_pos is None:
            raise MissingDataError("pos_error labels need field 'target_pos'")
        if traj.cursor_pos is None:
            raise MissingDataError("pos_error labels need field 'cursor_pos'")
        return traj.target_pos - traj.cursor_pos, "pos_error"
    if source == "velocity":
        if traj.cursor_vel is None:
            raise MissingDataError("velocity labels need field 'cursor_vel'")
        return traj.cursor_vel.copy(), "velocity"
    raise InvalidInputError(f"unknown label source {source!r}")


def resample_to_packets(y: np.ndarray, t: np.ndarray, t_k: np.ndarray) -> np.ndarray:
    """Linearly interpolate a T x 2 signal onto the packet timestamps.

    Packet times outside the recorded range clamp to the endpoint values.
    """
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    t_k = np.asarray(t_k, dtype=float)
    if y.shape[0] < 2:
        raise InsufficientDataError("need at least 2 label samples to resample")
    if t_k.size == 0:
        raise EmptyStreamError("no packet timestamps to resample onto")
    out = np.empty((t_k.shape[0], y.shape[1]))
    for j in range(y.shape[1]):
        out[:, j] = np.interp(t_k, t, y[:, j])
    return out


def align_streams(
    packets: PacketStream, labels: LabelStream
) -> tuple[PacketStream, LabelStream]:
    """Head-truncate feature and label streams to their common length.

    Rows are never reordered or interpolated; the shared length is
    ``min(N_bp, N_raw, N_Y)``.
    """
    n = min(packets.X_bp.shape[0], packets.X_raw.shape[0], labels.n_packets)
    if n == 0:
        raise EmptyStreamError("alignment produced zero packets")
    return packets.head(n), labels.head(n)


def to_acceleration(V: np.ndarray, dt: float) -> np.ndarray:
    """Finite-difference acceleration from an N x 2 velocity stream.

    ``A[k] = (V[k] - V[k-1]) / dt`` for k >= 1; row 0 is zero so the
    stream keeps its length and alignment.
    """
    V = np.asarray(V, dtype=float)
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    if V.shape[0] < 2:
        raise InsufficientDataError("need at least 2 velocity samples to differentiate")
    A = np.zeros_like(V)
    A[1:] = np.diff(V, axis=0) / dt
    return A


def integrate_acceleration(A: np.ndarray, v0: np.ndarray, dt: float) -> np.ndarray:
    """Cumulatively integrate N x 2 accelerations back to velocity.

    ``V[k] = V[k-1] + A[k] * dt`` starting from ``V[-1] = v0``; the exact
    discrete inverse of :func:`to_acceleration` when ``v0`` is the true
    velocity preceding the stream.
    """
    A = np.asarray(A, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    if not np.all(np.isfinite(v0)):
        raise InvalidInputError("non-finite initial velocity")
    return v0[None, :] + np.cumsum(A * dt, axis=0)
