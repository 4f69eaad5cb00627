"""Lateral synapses between two maps: sprouting, Hebb/Oja learning, pruning.

A directed synapse src -> dst exists only after its endpoints were BMUs for
the same paired sample at least once.  The first co-occurrence sprouts the
synapse at weight 0 and does not update it; later co-occurrences apply the
learning rule.  Pruning is local to each source neuron: it keeps the top
ceil(keep_fraction * n_target) of that neuron's synapses by weight, where the
quota counts *potential* targets (the full size of the other map), not the
synapses that happen to exist.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import ceil

import numpy as np

from .data import PairedDataset
from .som import SomGrid, bmu_stream

RLAT_MAGIC = b"RLAT"
RULES = ("hebb", "oja")


@dataclass
class LateralSynapses:
    """Dense (n_source, n_target) weights masked by an existence flag."""

    n_source: int
    n_target: int
    weights: np.ndarray
    exists: np.ndarray
    rule: str | None = None
    eta: float | None = None

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.exists = np.ascontiguousarray(self.exists, dtype=bool)
        shape = (self.n_source, self.n_target)
        if self.weights.shape != shape or self.exists.shape != shape:
            raise ValueError(f"weights/exists must both be {shape}")

    @classmethod
    def empty(cls, n_source: int, n_target: int, rule=None, eta=None) -> "LateralSynapses":
        return cls(
            n_source,
            n_target,
            np.zeros((n_source, n_target)),
            np.zeros((n_source, n_target), dtype=bool),
            rule,
            eta,
        )

    @property
    def n_synapses(self) -> int:
        return int(self.exists.sum())

    def counts_per_source(self) -> np.ndarray:
        return self.exists.sum(axis=1)

    def targets_of(self, src: int) -> tuple[np.ndarray, np.ndarray]:
        idx = np.flatnonzero(self.exists[src])
        return idx, self.weights[src, idx]

    def connected_sources(self) -> np.ndarray:
        """Mask of target neurons reachable through at least one synapse."""
        return self.exists.any(axis=0)

    def copy(self) -> "LateralSynapses":
        return LateralSynapses(
            self.n_source, self.n_target, self.weights.copy(), self.exists.copy(),
            self.rule, self.eta,
        )


def hebb_update(w: float, a_src: float, a_dst: float, eta: float) -> float:
    return w + eta * a_src * a_dst


def oja_update(w: float, a_src: float, a_dst: float, eta: float) -> float:
    return w + eta * (a_src * a_dst - w * a_dst * a_dst)


_UPDATES = {"hebb": hebb_update, "oja": oja_update}


def learn_direction(
    n_source: int,
    n_target: int,
    src_bmus: np.ndarray,
    src_acts: np.ndarray,
    dst_bmus: np.ndarray,
    dst_acts: np.ndarray,
    rule: str = "hebb",
    eta: float = 1.0,
    epochs: int = 1,
) -> LateralSynapses:
    """Sprout/update one direction from aligned BMU co-occurrence streams.

    Never touches the opposite direction; ``associate`` simply calls this
    twice with the roles swapped.
    """
    if rule not in _UPDATES:
        raise ValueError(f"unknown rule {rule!r}")
    update = _UPDATES[rule]
    syn = LateralSynapses.empty(n_source, n_target, rule, eta)
    W, E = syn.weights, syn.exists
    for _ in range(epochs):
        for s, t, a_s, a_t in zip(src_bmus, dst_bmus, src_acts, dst_acts):
            if not E[s, t]:
                E[s, t] = True  # sprout at 0; no update on first co-occurrence
            else:
                W[s, t] = update(W[s, t], a_s, a_t, eta)
    return syn


def associate(
    som_x: SomGrid,
    som_y: SomGrid,
    pairs: PairedDataset,
    rule: str = "hebb",
    eta: float = 1.0,
    epochs: int = 1,
) -> tuple[LateralSynapses, LateralSynapses]:
    """Learn both synapse directions over one (or more) passes of the pairs.

    Activities use the training kernel (width 1).  Returns (x->y, y->x).
    """
    bx, ax = bmu_stream(som_x, pairs.x.values)
    by, ay = bmu_stream(som_y, pairs.y_values)
    syn_xy = learn_direction(som_x.n_neurons, som_y.n_neurons, bx, ax, by, ay, rule, eta, epochs)
    syn_yx = learn_direction(som_y.n_neurons, som_x.n_neurons, by, ay, bx, ax, rule, eta, epochs)
    return syn_xy, syn_yx


def prune_quota(keep_fraction: float, n_target: int) -> int:
    if keep_fraction <= 0:
        raise ValueError("keep_fraction must be positive")
    return ceil(keep_fraction * n_target)


def prune(syn: LateralSynapses, keep_fraction: float) -> LateralSynapses:
    """Keep each source neuron's strongest synapses, up to its quota.

    Weight ties keep the lower target index (stable sort), so pruning is
    deterministic.  Neurons with fewer synapses than the quota keep them all.
    """
    quota = prune_quota(keep_fraction, syn.n_target)
    out = LateralSynapses.empty(syn.n_source, syn.n_target, syn.rule, syn.eta)
    for s in range(syn.n_source):
        idx, w = syn.targets_of(s)
        if idx.size > quota:
            order = np.lexsort((idx, -w))[:quota]
            idx, w = idx[order], w[order]
        out.exists[s, idx] = True
        out.weights[s, idx] = w
    return out


# ---------------------------------------------------------------------------
# RLAT synapse file: magic | 2-byte direction tag | u32 n_source | u32
# n_target | u32 n_triples | (u16 src, u16 dst, f32 w) triples sorted by
# (src, dst).  Little-endian.
# ---------------------------------------------------------------------------

def save_synapses(syn: LateralSynapses, path_or_file, direction: str = "XY") -> None:
    tag = direction.encode("ascii")
    if len(tag) != 2:
        raise ValueError("direction tag must be two characters")
    src, dst = np.nonzero(syn.exists)
    f = path_or_file if hasattr(path_or_file, "write") else open(path_or_file, "wb")
    try:
        f.write(RLAT_MAGIC + tag)
        f.write(struct.pack("<III", syn.n_source, syn.n_target, src.size))
        triples = np.empty(
            src.size, dtype=np.dtype([("s", "<u2"), ("d", "<u2"), ("w", "<f4")])
        )
        triples["s"], triples["d"] = src, dst
        triples["w"] = syn.weights[src, dst]
        f.write(triples.tobytes())
    finally:
        if f is not path_or_file:
            f.close()


def load_synapses(path_or_file) -> tuple[LateralSynapses, str]:
    f = path_or_file if hasattr(path_or_file, "read") else open(path_or_file, "rb")
    try:
        magic = f.read(4)
        if magic != RLAT_MAGIC:
            raise ValueError(f"bad synapse file magic {magic!r}")
        direction = f.read(2).decode("ascii")
        n_source, n_target, count = struct.unpack("<III", f.read(12))
        triples = np.frombuffer(
            f.read(count * 8), dtype=np.dtype([("s", "<u2"), ("d", "<u2"), ("w", "<f4")])
        )
        syn = LateralSynapses.empty(n_source, n_target)
        syn.exists[triples["s"], triples["d"]] = True
        syn.weights[triples["s"], triples["d"]] = triples["w"].astype(np.float64)
        return syn, direction
    finally:
        if f is not path_or_file:
            f.close()


def roundtrip_synapses(syn: LateralSynapses) -> LateralSynapses:
    """Pass synapses through the file encoding (weights rounded to f32)."""
    import io

    buf = io.BytesIO()
    save_synapses(syn, buf)
    buf.seek(0)
    out, _ = load_synapses(buf)
    out.rule, out.eta = syn.rule, syn.eta
    return out
