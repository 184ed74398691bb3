"""Smooth moving average over per-frame probability rows, decoding, and window sweeps.

The window is centered with a left-heavy split (for window w, up to ceil((w-1)/2)
rows before frame t and floor((w-1)/2) after), truncated at the sequence edges and
divided by the number of rows actually included, so every output row stays a
probability vector and no phase lag is introduced.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import PhaseSequence
from .errors import DomainError, ShapeError


@dataclass(frozen=True)
class WindowSweepRow:
    w: int
    accuracy: float


def sma(probs: np.ndarray, w: int) -> np.ndarray:
    """Windowed mean of the rows of a (T, C) matrix via a sliding cumulative sum.

    w=1 is the exact identity. Output is float64, O(T*C) regardless of w.
    """
    if w < 1:
        raise DomainError(f"window size must be >= 1, got {w}")
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2:
        raise ShapeError(f"probs must be a (T, C) matrix, got shape {p.shape}")
    if w == 1:
        return p.copy()
    t = p.shape[0]
    left, right = w // 2, (w - 1) // 2  # ceil((w-1)/2), floor((w-1)/2)
    cum = np.vstack([np.zeros((1, p.shape[1])), np.cumsum(p, axis=0)])
    pos = np.arange(t)
    lo = np.maximum(0, pos - left)
    hi = np.minimum(t - 1, pos + right)
    counts = (hi - lo + 1).astype(np.float64)
    return (cum[hi + 1] - cum[lo]) / counts[:, None]


def argmax_decode(probs: np.ndarray) -> np.ndarray:
    """Per-row argmax; ties resolve to the lowest class index."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2:
        raise ShapeError(f"probs must be a (T, C) matrix, got shape {p.shape}")
    return p.argmax(axis=1).astype(np.int64)


def frame_accuracy(pred: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of frames whose predicted label equals ground truth."""
    a = np.asarray(pred, dtype=np.int64)
    b = np.asarray(truth, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ShapeError(f"need equal-length nonempty label vectors, got {a.shape} vs {b.shape}")
    return float(np.mean(a == b))


def sweep_window(seq: PhaseSequence, windows: list[int]) -> tuple[list[WindowSweepRow], int]:
    """Smoothed-then-decoded accuracy for each window size, in input order.

    Also returns the window with the highest accuracy (first wins on ties).
    """
    if not windows:
        raise DomainError("window list must not be empty")
    rows = []
    for w in windows:
        acc = frame_accuracy(argmax_decode(sma(seq.probs, w)), seq.truth)
        rows.append(WindowSweepRow(w=int(w), accuracy=acc))
    best = max(rows, key=lambda r: r.accuracy)
    return rows, best.w


def save_sweep_csv(rows: list[WindowSweepRow], path: str | Path) -> None:
    """Plot-ready 'w,accuracy' CSV, one row per window."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["w", "accuracy"])
        for row in rows:
            writer.writerow([row.w, repr(row.accuracy)])
