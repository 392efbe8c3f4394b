"""Objective metrics for generated songs and their corpus-level summary."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .score import Song

MAJOR = (0, 2, 4, 5, 7, 9, 11)
NATURAL_MINOR = (0, 2, 3, 5, 7, 8, 10)
Z95 = 1.96


class MetricError(ValueError):
    pass


def _pitch_classes(song: Song) -> np.ndarray:
    pcs = np.array([n.pitch % 12 for n in song.all_notes(include_drums=False)], dtype=np.int64)
    if pcs.size == 0:
        raise MetricError("empty pitch histogram")
    return pcs


def pitch_class_entropy(song: Song) -> float:
    """Shannon entropy (bits) of the non-drum pitch-class histogram."""
    hist = np.bincount(_pitch_classes(song), minlength=12)
    p = hist[hist > 0] / hist.sum()
    return float(-(p * np.log2(p)).sum())


def _scale_templates() -> np.ndarray:
    rows = []
    for scale in (MAJOR, NATURAL_MINOR):
        for root in range(12):
            row = np.zeros(12, dtype=bool)
            row[[(root + s) % 12 for s in scale]] = True
            rows.append(row)
    return np.array(rows)


_SCALES = _scale_templates()


def scale_consistency(song: Song) -> float:
    """Best in-scale note fraction over the 12 major and 12 natural minor scales."""
    hist = np.bincount(_pitch_classes(song), minlength=12)
    return float((_SCALES @ hist).max() / hist.sum())


def groove_consistency(song: Song) -> float:
    """One minus the mean normalized Hamming distance between neighbouring measures.

    Each measure becomes a binary onset pattern of ``steps_per_measure``
    cells. Drum notes count. The song spans ``ceil(end / steps_per_measure)``
    measures where ``end`` is the latest note offset.
    """
    res = song.steps_per_measure
    notes = song.all_notes(include_drums=True)
    end = max((n.onset + n.duration for n in notes), default=0)
    n_measures = -(-end // res)
    if n_measures < 2:
        raise MetricError("too short for groove")
    grid = np.zeros((n_measures, res), dtype=bool)
    onsets = np.array([n.onset for n in notes], dtype=np.int64)
    grid[onsets // res, onsets % res] = True
    hamming = np.count_nonzero(grid[:-1] != grid[1:])
    return 1.0 - hamming / (res * (n_measures - 1))


@dataclass(frozen=True)
class MetricReport:
    values: tuple[float, ...]
    mean: float
    ci95: float

    @property
    def n(self) -> int:
        return len(self.values)


def aggregate(values: Sequence[float]) -> MetricReport:
    """Mean and Gaussian 95% half-width, ``1.96 * s / sqrt(n)`` with the n-1 std."""
    vals = tuple(float(v) for v in values)
    n = len(vals)
    if n < 2:
        raise MetricError(f"need at least 2 values for a confidence interval, got {n}")
    mean = math.fsum(vals) / n
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return MetricReport(vals, mean, Z95 * math.sqrt(var) / math.sqrt(n))


METRICS = {
    "pitch_class_entropy": pitch_class_entropy,
    "scale_consistency": scale_consistency,
    "groove_consistency": groove_consistency,
}


def evaluate_songs(songs: Sequence[Song]) -> dict[str, MetricReport | None]:
    """Per-metric summary over ``songs``; songs a metric cannot score are skipped.

    A metric with fewer than two scorable songs maps to None.
    """
    out: dict[str, MetricReport | None] = {}
    for name, fn in METRICS.items():
        vals = []
        for song in songs:
            try:
                vals.append(fn(song))
            except MetricError:
                continue
        out[name] = aggregate(vals) if len(vals) >= 2 else None
    return out
