"""Fixed-length windowing, normalization and cross-validation folds.

Labelled streams become overlapping T x 9 windows labelled by majority vote;
per-channel normalization statistics are fitted on training folds only, and
stratified k-fold plans keep every class spread evenly across folds.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .stream import ActivityLabel, LabelledSample, StreamBundle

__all__ = [
    "WindowConfig",
    "Window",
    "NormStats",
    "FoldPlan",
    "make_windows",
    "windows_from_bundle",
    "stack_windows",
    "fit_norm",
    "apply_norm",
    "stratified_kfold",
    "stratified_kfold_labels",
    "split_by_user",
    "window_count",
]

NORM_EPS = 1e-6


@dataclass(frozen=True)
class WindowConfig:
    """Window length, overlap (samples by default, or percent) and purity."""

    length: int = 100
    overlap: int = 20
    purity_min: float = 0.6
    overlap_is_percent: bool = False

    def __post_init__(self) -> None:
        if self.length <= 0:
            raise ValueError("window length must be positive")
        if not 0.0 <= self.purity_min <= 1.0:
            raise ValueError("purity_min must be in [0, 1]")
        overlap = self.overlap_samples
        if not 0 <= overlap < self.length:
            raise ValueError("overlap must satisfy 0 <= overlap < length")

    @property
    def overlap_samples(self) -> int:
        if self.overlap_is_percent:
            return int(round(self.length * self.overlap / 100.0))
        return self.overlap

    @property
    def step(self) -> int:
        return self.length - self.overlap_samples


@dataclass(frozen=True)
class Window:
    """One training sequence: a T x 9 channel matrix with its majority label."""

    x: np.ndarray
    label: ActivityLabel
    user: str = ""
    mechanism: str = ""
    start_t_ms: int = 0

    def __post_init__(self) -> None:
        if self.x.ndim != 2 or self.x.shape[1] != 9:
            raise ValueError(f"window matrix must be T x 9, got {self.x.shape}")


def window_count(n_samples: int, length: int, step: int) -> int:
    """Closed-form count of unfiltered window starts: max(0, floor((N-T)/step)+1)."""
    if n_samples < length:
        return 0
    return (n_samples - length) // step + 1


def make_windows(
    samples: Sequence[LabelledSample],
    config: WindowConfig,
    user: str = "",
    mechanism: str = "",
) -> list[Window]:
    """Cut overlapping windows from time-ordered labelled samples.

    Windows start at indices 0, step, 2*step, ...; a window is dropped if it
    contains any unlabelled sample or if its modal label's share is below
    purity_min.  The window label is the modal label, ties broken toward the
    label of the window's last sample.
    """
    n = len(samples)
    T = config.length
    step = config.step
    values = np.array([s.frame.values() for s in samples], dtype=float) if n else np.empty((0, 9))
    labels = np.array([s.label_code for s in samples], dtype=int) if n else np.empty(0, dtype=int)

    out: list[Window] = []
    for start in range(0, n - T + 1, step):
        w_labels = labels[start : start + T]
        if np.any(w_labels < 0):
            continue
        counts = Counter(w_labels.tolist())
        top = max(counts.values())
        if top / T < config.purity_min:
            continue
        modal = [lab for lab, c in counts.items() if c == top]
        if len(modal) > 1:
            last = int(w_labels[-1])
            label = last if last in modal else min(modal)
        else:
            label = modal[0]
        out.append(
            Window(
                x=values[start : start + T].copy(),
                label=ActivityLabel(label),
                user=user,
                mechanism=mechanism,
                start_t_ms=samples[start].frame.t_ms,
            )
        )
    return out


def windows_from_bundle(bundle: StreamBundle, config: WindowConfig) -> list[Window]:
    return make_windows(
        bundle.samples(), config, user=bundle.meta.user, mechanism=bundle.meta.mechanism
    )


def stack_windows(windows: Sequence[Window]) -> tuple[np.ndarray, np.ndarray]:
    """Stack windows into (N, T, 9) data and (N,) label arrays."""
    if not windows:
        return np.empty((0, 0, 9)), np.empty(0, dtype=int)
    x = np.stack([w.x for w in windows])
    y = np.array([int(w.label) for w in windows], dtype=int)
    return x, y


@dataclass(frozen=True)
class NormStats:
    """Per-channel mean and epsilon-floored standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(np.asarray(d["mean"], float), np.asarray(d["std"], float))


def fit_norm(windows: Sequence[Window]) -> NormStats:
    """Fit per-channel statistics over all samples of the given windows."""
    if not windows:
        raise ValueError("cannot fit normalization on zero windows")
    x, _ = stack_windows(windows)
    flat = x.reshape(-1, x.shape[-1])
    mean = flat.mean(axis=0)
    std = np.maximum(flat.std(axis=0), NORM_EPS)
    return NormStats(mean=mean, std=std)


def apply_norm(windows: Sequence[Window], stats: NormStats) -> list[Window]:
    """Return normalized copies of the windows; the inputs are untouched."""
    return [
        Window(stats.transform(w.x), w.label, w.user, w.mechanism, w.start_t_ms)
        for w in windows
    ]


@dataclass(frozen=True)
class FoldPlan:
    """Disjoint, covering, class-stratified assignment of windows to k folds."""

    k: int
    assignment: np.ndarray
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def fingerprint(self) -> tuple:
        return (self.k, self.seed, tuple(self.assignment.tolist()))


def stratified_kfold(windows: Sequence[Window], k: int, seed: int) -> FoldPlan:
    """Assign windows to k folds, round-robin per class after a seeded shuffle.

    The round-robin cursor continues across classes so fold sizes differ by
    at most one window overall, and by at most one per class.
    """
    labels = np.array([int(w.label) for w in windows], dtype=int)
    return stratified_kfold_labels(labels, k, seed)


def stratified_kfold_labels(labels: np.ndarray, k: int, seed: int) -> FoldPlan:
    """stratified_kfold on a bare label array (e.g. permutation controls)."""
    if k < 2:
        raise ValueError("k must be at least 2")
    labels = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    assignment = np.full(len(labels), -1, dtype=int)
    cursor = 0
    for label in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == label)
        if len(idx) < k:
            raise ValueError(
                f"class {ActivityLabel(label).name} has {len(idx)} windows, needs at least {k}"
            )
        rng.shuffle(idx)
        for i in idx:
            assignment[i] = cursor % k
            cursor += 1
    return FoldPlan(k=k, assignment=assignment, seed=seed)


def split_by_user(windows: Sequence[Window], user: str) -> tuple[list[Window], list[Window]]:
    """Partition windows into (the user's, everyone else's)."""
    mine = [w for w in windows if w.user == user]
    rest = [w for w in windows if w.user != user]
    if not mine:
        raise ValueError(f"no windows for user {user!r}")
    return mine, rest
