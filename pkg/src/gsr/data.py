"""Dataset generation and MNIST IDX ingestion, all seeded and reproducible."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BadMagic, DimensionMismatch, TruncatedFile

__all__ = [
    "Dataset",
    "gen_binary_clusters",
    "gen_hierarchical_clusters",
    "load_mnist_idx",
    "write_mnist_idx",
    "export_csv",
    "load_csv",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    """inputs (N x D), targets (N x C), and per-row ground-truth labels.

    Targets equal the inputs for autoencoding tasks and are one-hot rows for
    classification. metadata maps a label name (cluster, super, sub, label)
    to an integer array of length N.
    """

    inputs: np.ndarray
    targets: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        t = np.asarray(self.targets, dtype=np.float64)
        if x.ndim != 2 or t.ndim != 2 or x.shape[0] != t.shape[0]:
            raise DimensionMismatch(f"inputs {x.shape} vs targets {t.shape}")
        if x.shape[0] < 1:
            raise ValueError("dataset needs at least one row")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(t))):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", t)
        object.__setattr__(
            self,
            "metadata",
            {k: np.asarray(v, dtype=np.int64) for k, v in self.metadata.items()},
        )

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


def _one_hot(labels: np.ndarray, classes: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def gen_binary_clusters(
    n: int,
    repeats: int = 5,
    samples: int = 512,
    noise_sd: float = 0.1,
    seed: int = 0,
) -> Dataset:
    """Noisy tiled binary codes: n independent bits, each spread over
    `repeats` adjacent columns, so the features form n co-activation groups.

    Each row draws a code uniformly from {0 .. 2^n - 1}, writes its bits
    (least significant first), tiles every bit `repeats` times and adds
    Gaussian noise. Targets equal inputs (autoencoding); metadata stores the
    code under 'cluster'.
    """
    if not 1 <= n <= 16:
        raise ValueError("n must lie in [1, 16]")
    if repeats < 1 or samples < 1:
        raise ValueError("repeats and samples must be positive")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    if samples < 2**n:
        warnings.warn(
            f"samples={samples} < 2^{n}; not every code can appear", stacklevel=2
        )
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 2**n, size=samples)
    bits = ((codes[:, None] >> np.arange(n)[None, :]) & 1).astype(np.float64)
    clean = np.repeat(bits, repeats, axis=1)
    inputs = clean + noise_sd * rng.standard_normal(clean.shape)
    return Dataset(inputs, inputs.copy(), {"cluster": codes})


def gen_hierarchical_clusters(
    superclusters: int = 3,
    subclusters_per: int = 2,
    dim: int = 15,
    samples: int = 600,
    seed: int = 0,
    center_distance: float = 10.0,
    sub_offset: float = 2.0,
    noise_sd: float = 0.5,
) -> Dataset:
    """Gaussian subclusters nested inside well-separated superclusters.

    Supercluster centers sit on a scaled simplex (pairwise distance
    `center_distance`); each subcluster center is offset from its parent by a
    random vector of norm `sub_offset`; samples are isotropic Gaussian around
    subcluster centers. Rows cycle round-robin through the
    supercluster x subcluster combinations.
    """
    if superclusters < 1 or subclusters_per < 1:
        raise ValueError("cluster counts must be positive")
    if superclusters > dim:
        raise ValueError("need dim >= superclusters to embed the simplex")
    k = superclusters * subclusters_per
    if samples % k != 0:
        warnings.warn(
            f"samples={samples} not divisible by {k}; assigning round-robin",
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    super_centers = np.zeros((superclusters, dim))
    for s in range(superclusters):
        super_centers[s, s] = center_distance / np.sqrt(2.0)
    sub_centers = np.zeros((superclusters, subclusters_per, dim))
    for s in range(superclusters):
        for p in range(subclusters_per):
            direction = rng.standard_normal(dim)
            direction /= np.linalg.norm(direction)
            sub_centers[s, p] = super_centers[s] + sub_offset * direction

    combined = np.arange(samples) % k
    super_labels = combined // subclusters_per
    sub_labels = combined % subclusters_per
    inputs = sub_centers[super_labels, sub_labels] + noise_sd * rng.standard_normal(
        (samples, dim)
    )
    return Dataset(inputs, inputs.copy(), {"super": super_labels, "sub": sub_labels})


def _read_exact(fh, count: int, path) -> bytes:
    blob = fh.read(count)
    if len(blob) != count:
        raise TruncatedFile(f"{path}: expected {count} bytes, got {len(blob)}")
    return blob


def load_mnist_idx(images_path, labels_path) -> Dataset:
    """Read the standard big-endian IDX pair; pixels scale to [0, 1].

    Images must carry magic 0x00000803 with 28 x 28 geometry, labels magic
    0x00000801 and the same record count. Targets are one-hot over 10 digits.
    """
    with open(images_path, "rb") as fh:
        magic, count, rows, cols = struct.unpack(
            ">IIII", _read_exact(fh, 16, images_path)
        )
        if magic != IDX_IMAGES_MAGIC:
            raise BadMagic(f"{images_path}: magic {magic:#010x}, want {IDX_IMAGES_MAGIC:#010x}")
        if (rows, cols) != (28, 28):
            raise DimensionMismatch(f"{images_path}: geometry {rows}x{cols}, want 28x28")
        pixels = np.frombuffer(
            _read_exact(fh, count * rows * cols, images_path), dtype=np.uint8
        )
    with open(labels_path, "rb") as fh:
        magic, label_count = struct.unpack(">II", _read_exact(fh, 8, labels_path))
        if magic != IDX_LABELS_MAGIC:
            raise BadMagic(f"{labels_path}: magic {magic:#010x}, want {IDX_LABELS_MAGIC:#010x}")
        labels = np.frombuffer(_read_exact(fh, label_count, labels_path), dtype=np.uint8)
    if count != label_count:
        raise DimensionMismatch(f"{count} images but {label_count} labels")
    inputs = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    labels = labels.astype(np.int64)
    if np.any(labels > 9):
        raise ValueError(f"{labels_path}: label outside 0..9")
    return Dataset(inputs, _one_hot(labels, 10), {"label": labels})


def write_mnist_idx(dataset: Dataset, images_path, labels_path) -> None:
    """Inverse of load_mnist_idx, for building test fixtures.

    Inputs must be 784-wide values in [0, 1] that are exact multiples of
    1/255, so a write/load round trip reproduces the dataset bit-for-bit.
    """
    if dataset.dim != 784:
        raise DimensionMismatch(f"need 784 columns, got {dataset.dim}")
    pixels = np.rint(dataset.inputs * 255.0).astype(np.uint8)
    labels = dataset.metadata["label"].astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, dataset.n, 28, 28))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, dataset.n))
        fh.write(labels.tobytes())


def export_csv(dataset: Dataset, path) -> None:
    """Write x0..x{D-1} plus one column per metadata label, 9 significant digits."""
    keys = list(dataset.metadata)
    header = [f"x{i}" for i in range(dataset.dim)] + keys
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for r in range(dataset.n):
            cells = [f"{v:.9g}" for v in dataset.inputs[r]]
            cells += [str(int(dataset.metadata[k][r])) for k in keys]
            fh.write(",".join(cells) + "\n")


def load_csv(path, autoencode: bool = False, classes: int | None = None) -> Dataset:
    """Read a CSV written by export_csv.

    Label columns are every trailing non-x column. Targets are one-hot over
    the first label column unless autoencode is set.
    """
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        rows = [ln.strip().split(",") for ln in fh if ln.strip()]
    n_x = 0
    while n_x < len(header) and header[n_x] == f"x{n_x}":
        n_x += 1
    if n_x == 0:
        raise ValueError(f"{path}: no x columns found")
    keys = header[n_x:]
    data = np.array([[float(c) for c in row[:n_x]] for row in rows])
    metadata = {
        k: np.array([int(row[n_x + i]) for row in rows], dtype=np.int64)
        for i, k in enumerate(keys)
    }
    if autoencode or not keys:
        targets = data.copy()
    else:
        labels = metadata[keys[0]]
        classes = classes if classes is not None else int(labels.max()) + 1
        targets = _one_hot(labels, classes)
    return Dataset(data, targets, metadata)
