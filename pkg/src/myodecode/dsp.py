"""Signal conditioning: grid restructure, padding, spatial smoothing, RMS features.

The 32 channels map onto the physical electrode grid of 16 rows by 2
columns (channel k sits at row k mod 16, column k div 16).  Rows wrap
around the arm, so row padding is circular; columns do not, so column
padding is zero.  A fixed 3x3 cross kernel (neighbors weighted 1, center
0.5, all divided by 4) suppresses spatial noise before one RMS value is
taken per channel over the buffered window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import WrongShape
from .proto import CHANNELS, FrameBuffer

GRID_ROWS = 16
GRID_COLS = 2

# 3x3 smoothing kernel; sums to 1.125, hence the 0.875 steady-state gain
# for constant input once the zero column padding removes one neighbor.
SMOOTHING_KERNEL = np.array(
    [[0.0, 1.0, 0.0],
     [1.0, 0.5, 1.0],
     [0.0, 1.0, 0.0]]
) / 4.0


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Per-channel RMS of the spatially filtered window."""

    rms: np.ndarray  # float64 [32], >= 0
    t_us: int  # timestamp of the newest contributing frame

    def __post_init__(self):
        r = np.asarray(self.rms)
        if r.shape != (CHANNELS,):
            raise WrongShape(f"expected {CHANNELS} features, got {r.shape}")
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise ValueError("features must be finite and non-negative")


def to_grid(signal: np.ndarray) -> np.ndarray:
    """Reshape a 32 x T channel matrix into the 16 x 2 x T electrode grid."""
    signal = np.asarray(signal)
    if signal.ndim != 2 or signal.shape[0] != CHANNELS:
        raise WrongShape(f"expected ({CHANNELS}, T), got {signal.shape}")
    # channel k -> (row k mod 16, col k div 16)
    return signal.reshape(GRID_COLS, GRID_ROWS, -1).transpose(1, 0, 2)


def from_grid(grid: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_grid`."""
    grid = np.asarray(grid)
    if grid.shape[:2] != (GRID_ROWS, GRID_COLS):
        raise WrongShape(f"expected ({GRID_ROWS}, {GRID_COLS}, T), got {grid.shape}")
    return grid.transpose(1, 0, 2).reshape(CHANNELS, -1)


def pad_grid(grid: np.ndarray) -> np.ndarray:
    """Circular row padding plus zero column padding: 16x2xT -> 18x4xT."""
    grid = np.asarray(grid, dtype=np.float64)
    rows, cols, T = grid.shape
    out = np.zeros((rows + 2, cols + 2, T))
    out[1:-1, 1:-1] = grid
    out[0, 1:-1] = grid[-1]   # last row added on top of the first
    out[-1, 1:-1] = grid[0]   # first row appended below the last
    return out


def spatial_filter(grid: np.ndarray) -> np.ndarray:
    """Apply the 3x3 cross kernel per time sample; shape preserved at 16x2xT."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.shape[:2] != (GRID_ROWS, GRID_COLS):
        raise WrongShape(f"expected ({GRID_ROWS}, {GRID_COLS}, T), got {grid.shape}")
    up = np.roll(grid, 1, axis=0)
    down = np.roll(grid, -1, axis=0)
    lr = np.zeros_like(grid)
    lr[:, :-1] += grid[:, 1:]
    lr[:, 1:] += grid[:, :-1]
    return ((up + down) + lr + 0.5 * grid) / 4.0


def extract_features(buf: FrameBuffer | np.ndarray, t_us: int | None = None) -> FeatureVector:
    """Full chain: reshape -> pad -> smooth -> per-channel RMS over the window.

    Accepts a full :class:`FrameBuffer` or a raw 32 x T signal matrix.
    Runs on the selected kernel backend (compiled or numpy).
    """
    if isinstance(buf, FrameBuffer):
        signal = buf.concat()
        t_us = buf.newest_t_us
    else:
        signal = np.asarray(buf)
        t_us = 0 if t_us is None else t_us
    grid = to_grid(signal.astype(np.float64, copy=False))
    rms = _kernels.filter_rms(np.ascontiguousarray(grid))
    return FeatureVector(rms=rms, t_us=t_us)
