"""Synchronous cellular grid simulator: winner waves and local training.

Each cell talks only to its four cardinal neighbors.  A winner wave runs
exactly t_p = rows + cols - 2 lockstep steps; every step, each cell merges
its neighbors' previous-step best/worst records (value first, then lowest
row-major origin on ties).  Because a record travels one hop per step, the
step at which a cell last improves its best record equals its Manhattan
distance to the global best cell, which is what local training uses as the
neighborhood distance: no second wave is needed.

All step functions are double-buffered (new state built purely from the
previous snapshot), so results cannot depend on cell iteration order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .som import SomGrid, TrainSchedule, decay

CARDINAL_OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def propagation_steps(rows: int, cols: int) -> int:
    """Steps for any record to cover an entire rows x cols grid."""
    if rows < 1 or cols < 1:
        raise ValueError("grid sides must be positive")
    return rows + cols - 2


# ---------------------------------------------------------------------------
# Vectorized wave
# ---------------------------------------------------------------------------

@dataclass
class WaveResult:
    """Per-cell view after the wave; values/origins are uniform on completion."""

    best_values: np.ndarray
    best_origins: np.ndarray
    worst_values: np.ndarray
    worst_origins: np.ndarray
    distance_to_bmu: np.ndarray
    steps: int

    def _uniform(self, arr: np.ndarray) -> int:
        v = arr.flat[0]
        if not np.all(arr == v):
            raise AssertionError("wave did not converge to a uniform winner")
        return int(v)

    @property
    def bmu_index(self) -> int:
        return self._uniform(self.best_origins)

    @property
    def wmu_index(self) -> int:
        return self._uniform(self.worst_origins)

    @property
    def bmu_value(self) -> float:
        return float(self.best_values.flat[0])

    @property
    def wmu_value(self) -> float:
        return float(self.worst_values.flat[0])


def _shifted(arr: np.ndarray, dr: int, dc: int, fill) -> np.ndarray:
    """View of each cell's (dr, dc) neighbor, out-of-grid cells filled."""
    out = np.full_like(arr, fill)
    rows, cols = arr.shape
    rs = slice(max(dr, 0), rows + min(dr, 0))
    rd = slice(max(-dr, 0), rows + min(-dr, 0))
    cs = slice(max(dc, 0), cols + min(dc, 0))
    cd = slice(max(-dc, 0), cols + min(-dc, 0))
    out[rd, cd] = arr[rs, cs]
    return out


def _wave_init(activities: np.ndarray):
    a = np.ascontiguousarray(activities, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("activities must form a rectangular grid")
    rows, cols = a.shape
    origins = (np.arange(rows)[:, None] * cols + np.arange(cols)[None, :]).astype(np.int64)
    zero = np.zeros((rows, cols), dtype=np.int64)
    return {
        "best_values": a.copy(), "best_origins": origins.copy(), "best_steps": zero.copy(),
        "worst_values": a.copy(), "worst_origins": origins.copy(), "worst_steps": zero.copy(),
    }


def _wave_step(state: dict, step: int) -> dict:
    """One synchronous step from the previous snapshot (pure)."""
    nxt = {k: v.copy() for k, v in state.items()}
    big = np.iinfo(np.int64).max
    for sign, vkey, okey, skey, fill in (
        (+1, "best_values", "best_origins", "best_steps", -np.inf),
        (-1, "worst_values", "worst_origins", "worst_steps", np.inf),
    ):
        v, o = nxt[vkey], nxt[okey]
        for dr, dc in CARDINAL_OFFSETS:
            nv = _shifted(state[vkey], dr, dc, fill)
            no = _shifted(state[okey], dr, dc, big)
            better = (sign * nv > sign * v) | ((nv == v) & (no < o))
            v = np.where(better, nv, v)
            o = np.where(better, no, o)
        changed = (v != state[vkey]) | (o != state[okey])
        nxt[vkey], nxt[okey] = v, o
        nxt[skey] = np.where(changed, step, state[skey])
    return nxt


def winner_wave(activities: np.ndarray) -> WaveResult:
    """Run the full wave; distance_to_bmu is each cell's last-improvement step."""
    state = _wave_init(activities)
    rows, cols = state["best_values"].shape
    t_p = propagation_steps(rows, cols)
    for step in range(1, t_p + 1):
        state = _wave_step(state, step)
    return WaveResult(
        best_values=state["best_values"],
        best_origins=state["best_origins"],
        worst_values=state["worst_values"],
        worst_origins=state["worst_origins"],
        distance_to_bmu=state["best_steps"],
        steps=t_p,
    )


def wave_trace(activities: np.ndarray) -> list[dict]:
    """Per-step, per-cell state rows (for CSV debugging dumps)."""
    state = _wave_init(activities)
    rows, cols = state["best_values"].shape
    t_p = propagation_steps(rows, cols)
    out = []

    def snapshot(step):
        for r in range(rows):
            for c in range(cols):
                out.append({
                    "step": step, "row": r, "col": c,
                    "best_value": state["best_values"][r, c],
                    "best_origin": state["best_origins"][r, c],
                    "worst_value": state["worst_values"][r, c],
                    "worst_origin": state["worst_origins"][r, c],
                    "adopt_step": state["best_steps"][r, c],
                })

    snapshot(0)
    for step in range(1, t_p + 1):
        state = _wave_step(state, step)
        snapshot(step)
    return out


# ---------------------------------------------------------------------------
# Cell-wise reference (explicit neighbor passing)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellSummary:
    """Everything a cell shares with its neighbors in one step."""

    best_value: float
    best_origin: int
    worst_value: float
    worst_origin: int


def merge_summaries(own: CellSummary, seen: CellSummary) -> CellSummary:
    bv, bo = own.best_value, own.best_origin
    if (seen.best_value > bv) or (seen.best_value == bv and seen.best_origin < bo):
        bv, bo = seen.best_value, seen.best_origin
    wv, wo = own.worst_value, own.worst_origin
    if (seen.worst_value < wv) or (seen.worst_value == wv and seen.worst_origin < wo):
        wv, wo = seen.worst_value, seen.worst_origin
    return CellSummary(bv, bo, wv, wo)


def winner_wave_cellwise(activities: np.ndarray, cell_order=None) -> WaveResult:
    """Slow reference: each cell is handed only its cardinal neighbors' state.

    ``cell_order`` permutes the within-step update order; double buffering
    makes the result independent of it (pinned by tests).
    """
    a = np.asarray(activities, dtype=np.float64)
    rows, cols = a.shape
    cells = [(r, c) for r in range(rows) for c in range(cols)]
    if cell_order is None:
        cell_order = cells
    states = {
        (r, c): CellSummary(a[r, c], r * cols + c, a[r, c], r * cols + c)
        for r, c in cells
    }
    adopt = np.zeros((rows, cols), dtype=np.int64)
    t_p = propagation_steps(rows, cols)
    for step in range(1, t_p + 1):
        new = {}
        for r, c in cell_order:
            s = states[(r, c)]
            for dr, dc in CARDINAL_OFFSETS:
                nr, nc = r + dr, c + dc
                if 0 <= nr < rows and 0 <= nc < cols:
                    s = merge_summaries(s, states[(nr, nc)])
            new[(r, c)] = s
            if (s.best_value, s.best_origin) != (
                states[(r, c)].best_value, states[(r, c)].best_origin
            ):
                adopt[r, c] = step
        states = new
    bv = np.array([[states[(r, c)].best_value for c in range(cols)] for r in range(rows)])
    bo = np.array([[states[(r, c)].best_origin for c in range(cols)] for r in range(rows)])
    wv = np.array([[states[(r, c)].worst_value for c in range(cols)] for r in range(rows)])
    wo = np.array([[states[(r, c)].worst_origin for c in range(cols)] for r in range(rows)])
    return WaveResult(bv, bo, wv, wo, adopt, t_p)


# ---------------------------------------------------------------------------
# Cellular training
# ---------------------------------------------------------------------------

def ig_train_epoch(
    som: SomGrid, samples: np.ndarray, lr: float, sigma: float
) -> tuple[SomGrid, int]:
    """One epoch over ``samples`` in the given order; returns (grid, steps).

    Per sample each cell computes its own activity, the winner wave delivers
    the BMU and the cell's Manhattan distance to it, then the cell updates its
    own weights locally; that is t_p + 1 simulator steps per sample.
    """
    W = som.weights.copy()
    width, height = som.width, som.height
    denom = 2.0 * sigma * sigma
    t_p = propagation_steps(height, width)
    steps = 0
    for v in np.ascontiguousarray(samples, dtype=np.float64):
        acts = np.empty((height, width))
        for n in range(W.shape[0]):
            diff = v - W[n]
            acts[n // width, n % width] = np.exp(-np.sqrt(np.sum(diff * diff)))
        wave = winner_wave(acts)
        for n in range(W.shape[0]):
            d = wave.distance_to_bmu[n // width, n % width]
            h = np.exp(-(d * d) / denom)
            W[n] += (lr * h) * (v - W[n])
        steps += t_p + 1
    return replace(som, weights=W, labels=None), steps


def ig_train(som: SomGrid, data: np.ndarray, schedule: TrainSchedule, seed: int) -> SomGrid:
    """Cellular counterpart of som.train with the Manhattan grid metric.

    Uses the same seeded shuffling and per-epoch decay, so the final weights
    are bit-identical to train(..., grid_metric="manhattan").
    """
    X = np.ascontiguousarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != som.dim:
        raise ValueError(f"data shape {X.shape} does not match som dim {som.dim}")
    rng = np.random.default_rng(seed)
    out = som
    for t in range(schedule.epochs):
        lr = decay(t, schedule.epochs, schedule.lr_start, schedule.lr_end)
        sigma = decay(t, schedule.epochs, schedule.sigma_start, schedule.sigma_end)
        out, _ = ig_train_epoch(out, X[rng.permutation(X.shape[0])], lr, sigma)
    return out


# ---------------------------------------------------------------------------
# Cost accounting
# ---------------------------------------------------------------------------

@dataclass
class CostReport:
    rows: int
    cols: int
    n_cells: int
    t_p: int
    steps_per_sample: int
    total_steps: int
    messages_per_step: int
    messages_per_wave: int
    message_upper_bound: int
    centralized_ops_per_sample: int


def cost_report(rows: int, cols: int, n_samples: int) -> CostReport:
    """Step/message counts for the cellular path vs a centralized scan.

    Every cell sends its state to each in-grid cardinal neighbor once per
    step, so messages per step equal twice the number of grid edges; the
    4-per-cell bound is only reached away from the boundary.
    """
    t_p = propagation_steps(rows, cols)
    n = rows * cols
    edges = rows * (cols - 1) + cols * (rows - 1)
    return CostReport(
        rows=rows,
        cols=cols,
        n_cells=n,
        t_p=t_p,
        steps_per_sample=t_p + 1,
        total_steps=n_samples * (t_p + 1),
        messages_per_step=2 * edges,
        messages_per_wave=2 * edges * t_p,
        message_upper_bound=n * 4 * t_p,
        centralized_ops_per_sample=n,
    )
