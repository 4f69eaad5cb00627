"""Kohonen self-organizing map: activities, winner election, training.

Neurons live on a rectangular grid, indexed row-major: neuron n sits at
(row, col) = (n // width, n % width).  Activity uses a Gaussian kernel of the
*non-squared* Euclidean distance between input and weight, while the training
neighborhood uses the *squared* grid distance; the two exponents are not the
same shape on purpose.

Winner election during training runs on raw input distances (argmin); because
exp(-d/width) is strictly decreasing this elects the same neuron as the
activity argmax, a property the test suite pins down.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist

RSOM_MAGIC = b"RSOM"
GRID_METRICS = ("euclidean", "manhattan")


@dataclass
class TrainSchedule:
    """Per-epoch geometric decay of learning rate and neighborhood width."""

    epochs: int = 10
    lr_start: float = 1.0
    lr_end: float = 0.01
    sigma_start: float = 5.0
    sigma_end: float = 0.01

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("need at least one epoch")
        if not (self.lr_start >= self.lr_end > 0):
            raise ValueError("learning rate must satisfy start >= end > 0")
        if not (self.sigma_start >= self.sigma_end > 0):
            raise ValueError("sigma must satisfy start >= end > 0")


@dataclass
class SomGrid:
    """width x height neurons, each with an m-dimensional weight vector.

    ``labels`` is filled by the labeling procedures; training drops it.
    """

    width: int
    height: int
    weights: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        k = self.width * self.height
        if self.weights.ndim != 2 or self.weights.shape[0] != k:
            raise ValueError(
                f"expected {k} weight rows for a {self.width}x{self.height} grid, "
                f"got shape {self.weights.shape}"
            )
        if self.labels is not None:
            self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
            if self.labels.shape != (k,):
                raise ValueError("need exactly one label per neuron")

    @property
    def n_neurons(self) -> int:
        return self.width * self.height

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def positions(self) -> np.ndarray:
        """(k, 2) array of (row, col) grid coordinates, row-major."""
        idx = np.arange(self.n_neurons)
        return np.column_stack([idx // self.width, idx % self.width])

    def copy(self) -> "SomGrid":
        labels = None if self.labels is None else self.labels.copy()
        return SomGrid(self.width, self.height, self.weights.copy(), labels)


@dataclass
class ActivationField:
    """Per-neuron activities for one input, with elected best/worst units."""

    activities: np.ndarray
    bmu: int
    wmu: int


def make_som(width: int, height: int, dim: int, seed: int) -> SomGrid:
    """Fresh grid with weights drawn uniformly from [0, 1)."""
    rng = np.random.default_rng(seed)
    return SomGrid(width, height, rng.random((width * height, dim)))


def decay(t: int, t_final: int, v_start: float, v_end: float) -> float:
    """Geometric interpolation from v_start (t=0) to v_end (t=t_final)."""
    if not 0 <= t <= t_final:
        raise ValueError(f"epoch {t} outside [0, {t_final}]")
    return v_start * (v_end / v_start) ** (t / t_final)


def activity(v: np.ndarray, w: np.ndarray, kernel_width: float) -> float:
    """exp(-||v - w|| / kernel_width); the norm is NOT squared."""
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if v.shape != w.shape:
        raise ValueError(f"dimension mismatch: {v.shape} vs {w.shape}")
    if kernel_width <= 0:
        raise ValueError("kernel width must be positive")
    diff = v - w
    return float(np.exp(-np.sqrt(np.sum(diff * diff)) / kernel_width))


def neighborhood(p_n, p_s, sigma: float, grid_metric: str = "euclidean") -> float:
    """exp(-d^2 / (2 sigma^2)) over the chosen grid distance (squared here)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    dr = float(p_n[0] - p_s[0])
    dc = float(p_n[1] - p_s[1])
    if grid_metric == "manhattan":
        d = abs(dr) + abs(dc)
        dsq = d * d
    elif grid_metric == "euclidean":
        dsq = dr * dr + dc * dc
    else:
        raise ValueError(f"unknown grid metric {grid_metric!r}")
    return float(np.exp(-dsq / (2.0 * sigma * sigma)))


def elect_bmu_wmu(activities: np.ndarray) -> tuple[int, int]:
    """(argmax, argmin) with lowest-index tie-breaking."""
    activities = np.asarray(activities)
    if activities.size == 0:
        raise ValueError("empty activation field")
    return int(np.argmax(activities)), int(np.argmin(activities))


def activation_field(som: SomGrid, v: np.ndarray, kernel_width: float) -> ActivationField:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (som.dim,):
        raise ValueError(f"input dim {v.shape} does not match som dim {som.dim}")
    diff = v - som.weights
    acts = np.exp(-np.sqrt(np.sum(diff * diff, axis=1)) / kernel_width)
    bmu, wmu = elect_bmu_wmu(acts)
    return ActivationField(acts, bmu, wmu)


def activities_batch(som: SomGrid, values: np.ndarray, kernel_width: float) -> np.ndarray:
    """(n_samples, n_neurons) Gaussian activities."""
    if kernel_width <= 0:
        raise ValueError("kernel width must be positive")
    v = np.ascontiguousarray(values, dtype=np.float64)
    return np.exp(-cdist(v, som.weights) / kernel_width)


def bmu_stream(
    som: SomGrid, values: np.ndarray, kernel_width: float = 1.0, block: int = 4096
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample BMU index and BMU activity, computed in blocks."""
    v = np.ascontiguousarray(values, dtype=np.float64)
    idx = np.empty(v.shape[0], dtype=np.int64)
    val = np.empty(v.shape[0], dtype=np.float64)
    for start in range(0, v.shape[0], block):
        d = cdist(v[start : start + block], som.weights)
        b = np.argmin(d, axis=1)
        idx[start : start + d.shape[0]] = b
        val[start : start + d.shape[0]] = np.exp(
            -d[np.arange(d.shape[0]), b] / kernel_width
        )
    return idx, val


def grid_squared_distances(width: int, height: int, grid_metric: str) -> np.ndarray:
    """(k, k) squared pairwise grid distances under the chosen metric."""
    if grid_metric not in GRID_METRICS:
        raise ValueError(f"unknown grid metric {grid_metric!r}")
    idx = np.arange(width * height)
    rows, cols = idx // width, idx % width
    dr = np.abs(rows[:, None] - rows[None, :]).astype(np.float64)
    dc = np.abs(cols[:, None] - cols[None, :]).astype(np.float64)
    if grid_metric == "manhattan":
        d = dr + dc
        return d * d
    return dr * dr + dc * dc


def train(
    som: SomGrid,
    data: np.ndarray,
    schedule: TrainSchedule,
    seed: int,
    grid_metric: str = "euclidean",
) -> SomGrid:
    """Competitive training: per sample, every neuron moves toward the input
    proportionally to lr(t) * h_sigma(t)(n, winner).

    Sample order is reshuffled every epoch from ``seed``; lr and sigma decay
    once per epoch, so epoch t runs with decay(t, ...) throughout.  The result
    is bit-reproducible for a fixed (seed, data, schedule, metric).
    """
    X = np.ascontiguousarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != som.dim:
        raise ValueError(f"data shape {X.shape} does not match som dim {som.dim}")
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    W = som.weights.copy()
    dsq = grid_squared_distances(som.width, som.height, grid_metric)
    rng = np.random.default_rng(seed)
    for t in range(schedule.epochs):
        lr = decay(t, schedule.epochs, schedule.lr_start, schedule.lr_end)
        sigma = decay(t, schedule.epochs, schedule.sigma_start, schedule.sigma_end)
        denom = 2.0 * sigma * sigma
        for i in rng.permutation(X.shape[0]):
            v = X[i]
            diff = v - W
            dist = np.sqrt(np.sum(diff * diff, axis=1))
            s = int(np.argmin(dist))
            h = np.exp(-dsq[:, s] / denom)
            W += (lr * h)[:, None] * diff
    return replace(som, weights=W, labels=None)


# ---------------------------------------------------------------------------
# RSOM checkpoint: magic | u32 width,height,dim | u8 has_labels |
# f32 weights row-major | u16 labels.  Little-endian, like RSM1.
# ---------------------------------------------------------------------------

def save_som(som: SomGrid, path_or_file) -> None:
    f = path_or_file if hasattr(path_or_file, "write") else open(path_or_file, "wb")
    try:
        f.write(RSOM_MAGIC)
        f.write(struct.pack("<IIIB", som.width, som.height, som.dim,
                            0 if som.labels is None else 1))
        f.write(som.weights.astype("<f4").tobytes())
        if som.labels is not None:
            f.write(som.labels.astype("<u2").tobytes())
    finally:
        if f is not path_or_file:
            f.close()


def load_som(path_or_file) -> SomGrid:
    f = path_or_file if hasattr(path_or_file, "read") else open(path_or_file, "rb")
    try:
        magic = f.read(4)
        if magic != RSOM_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        width, height, dim, has_labels = struct.unpack("<IIIB", f.read(13))
        k = width * height
        weights = np.frombuffer(f.read(k * dim * 4), dtype="<f4").reshape(k, dim)
        labels = None
        if has_labels:
            labels = np.frombuffer(f.read(k * 2), dtype="<u2").astype(np.int64)
        return SomGrid(width, height, weights.astype(np.float64), labels)
    finally:
        if f is not path_or_file:
            f.close()


def roundtrip_som(som: SomGrid) -> SomGrid:
    """Pass a grid through the checkpoint encoding (weights rounded to f32).

    The pipeline always does this after training so that cached and freshly
    computed stages feed bit-identical weights downstream.
    """
    import io

    buf = io.BytesIO()
    save_som(som, buf)
    buf.seek(0)
    return load_som(buf)
