"""Post-training interpretability: class maps, masks, segmentation, pair checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyClass, ShapeMismatch
from .graph import Graph

__all__ = [
    "ActivationMap",
    "class_average_maps",
    "top_decile_mask",
    "segment_by_class",
    "pair_assignment_check",
    "write_pgm",
    "write_map_csv",
    "write_segmentation_csv",
]


@dataclass(frozen=True)
class ActivationMap:
    """Per-node activation values with a display shape and a provenance id."""

    values: np.ndarray
    shape: tuple
    provenance: int | str = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        shape = tuple(int(d) for d in self.shape)
        if int(np.prod(shape)) != v.shape[0]:
            raise ShapeMismatch(f"shape {shape} does not hold {v.shape[0]} values")
        if not np.all(np.isfinite(v)):
            raise ValueError("activation map contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "shape", shape)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def class_average_maps(acts, labels, class_count: int, shape=None) -> list[ActivationMap]:
    """Mean activation row per class; every class must have a sample."""
    values = np.asarray(getattr(acts, "values", acts), dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != values.shape[0]:
        raise ShapeMismatch("labels do not match activation rows")
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        raise ValueError("labels outside [0, class_count)")
    shape = tuple(shape) if shape is not None else (values.shape[1],)
    maps = []
    for c in range(class_count):
        mask = labels == c
        if not mask.any():
            raise EmptyClass(f"class {c} has no samples")
        maps.append(ActivationMap(values[mask].mean(axis=0), shape, provenance=c))
    return maps


def top_decile_mask(amap: ActivationMap) -> np.ndarray:
    """Boolean mask of the ceil(n/10) largest values; ties go to lower index."""
    n = amap.n
    if n < 10:
        raise ValueError(f"need at least 10 nodes, got {n}")
    count = -(-n // 10)
    order = np.argsort(-amap.values, kind="stable")
    mask = np.zeros(n, dtype=bool)
    mask[order[:count]] = True
    return mask


def segment_by_class(maps: list[ActivationMap]) -> np.ndarray:
    """Assign each node to the class whose max-normalized map is largest there.

    Normalizing by each map's maximum stops one high-magnitude class from
    claiming every node; ties resolve to the lower class id.
    """
    if len(maps) < 2:
        raise ShapeMismatch("need at least two class maps")
    shape = maps[0].shape
    if any(m.shape != shape for m in maps):
        raise ShapeMismatch("class maps disagree on shape")
    stacked = np.stack([m.values for m in maps])
    peaks = stacked.max(axis=1, keepdims=True)
    peaks = np.where(peaks == 0.0, 1.0, peaks)
    return np.argmax(stacked / peaks, axis=0)


def _require_disjoint_pairs(g: Graph) -> int:
    if g.n % 2 != 0:
        raise ShapeMismatch("pair graph needs an even node count")
    pairs = g.n // 2
    expected = np.zeros_like(g.weights, dtype=bool)
    for p in range(pairs):
        expected[2 * p, 2 * p + 1] = expected[2 * p + 1, 2 * p] = True
    if np.any((g.weights > 0) != expected):
        raise ShapeMismatch("graph is not a disjoint-pairs graph")
    return pairs


def pair_assignment_check(acts, super_labels, sub_labels, g: Graph) -> tuple[float, float]:
    """Score how cleanly node pairs encode superclusters and their halves.

    super_purity: fraction of superclusters whose average-activation argmax
    falls on a pair claimed by no other supercluster. sub_separation:
    fraction of superclusters whose two subclusters argmax onto different
    nodes of that supercluster's pair. Argmax ties resolve to lower index.
    """
    values = np.asarray(getattr(acts, "values", acts), dtype=np.float64)
    pairs = _require_disjoint_pairs(g)
    if values.shape[1] != 2 * pairs:
        raise ShapeMismatch(
            f"activations have {values.shape[1]} columns, graph has {2 * pairs} nodes"
        )
    super_labels = np.asarray(super_labels, dtype=np.int64)
    sub_labels = np.asarray(sub_labels, dtype=np.int64)
    if super_labels.shape[0] != values.shape[0] or sub_labels.shape[0] != values.shape[0]:
        raise ShapeMismatch("labels do not match activation rows")

    supers = np.unique(super_labels)
    chosen_pair = {}
    for s in supers:
        mean_map = values[super_labels == s].mean(axis=0)
        chosen_pair[int(s)] = int(np.argmax(mean_map)) // 2

    counts = np.zeros(pairs, dtype=np.int64)
    for p in chosen_pair.values():
        counts[p] += 1
    unique = sum(1 for p in chosen_pair.values() if counts[p] == 1)
    super_purity = unique / len(supers)

    separated = 0
    for s in supers:
        p = chosen_pair[int(s)]
        node_choices = set()
        subs = np.unique(sub_labels[super_labels == s])
        for b in subs:
            rows = (super_labels == s) & (sub_labels == b)
            pair_mean = values[rows].mean(axis=0)[2 * p : 2 * p + 2]
            node_choices.add(int(np.argmax(pair_mean)))
        if len(node_choices) == len(subs):
            separated += 1
    sub_separation = separated / len(supers)
    return float(super_purity), float(sub_separation)


def write_pgm(amap: ActivationMap, path) -> None:
    """8-bit binary PGM, min-max scaled per map; constant maps render black."""
    if len(amap.shape) == 2:
        rows, cols = amap.shape
    else:
        rows, cols = 1, amap.n
    lo = amap.values.min()
    hi = amap.values.max()
    if hi > lo:
        scaled = np.rint((amap.values - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(amap.values)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(scaled.astype(np.uint8).tobytes())


def write_map_csv(amap: ActivationMap, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("node,value\n")
        for i, v in enumerate(amap.values):
            fh.write(f"{i},{v:.9g}\n")


def write_segmentation_csv(assignment: np.ndarray, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("node,class\n")
        for i, c in enumerate(assignment):
            fh.write(f"{i},{int(c)}\n")
