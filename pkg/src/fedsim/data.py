"""Dataset loading, synthetic generation, and non-IID label partitioning.

Shards are immutable after construction.  The partitioner implements the
classic two-classes-per-client scheme: samples are sorted by label, cut
into label-homogeneous blocks of near-equal size, and each client is
assigned ``classes_per_client`` blocks with pairwise-distinct labels.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FormatError, PartitionError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Shard:
    """Feature matrix plus integer labels owned by one client (or "global")."""

    features: np.ndarray
    labels: np.ndarray
    owner: int | str = "global"

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise DataError(
                f"features ({len(self.features)}) and labels ({len(self.labels)}) disagree"
            )
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return len(self.labels)

    def select(self, indices, owner=None) -> "Shard":
        return Shard(
            np.ascontiguousarray(self.features[indices]),
            np.ascontiguousarray(self.labels[indices]),
            self.owner if owner is None else owner,
        )


@dataclass(frozen=True)
class PartitionPlan:
    """Per-client sample-index assignments over one training dataset."""

    assignments: list  # list of np.ndarray of sample indices
    classes_per_client: int = 2
    num_samples: int = 0

    def shards(self, dataset: Shard) -> list:
        return [
            dataset.select(idx, owner=client)
            for client, idx in enumerate(self.assignments)
        ]


def load_idx(images_path, labels_path) -> Shard:
    """Read a big-endian IDX image/label file pair into a Shard.

    Pixels are scaled to [0, 1]; images are flattened to rows.
    """
    with open(images_path, "rb") as f:
        header = f.read(16)
        if len(header) < 16:
            raise FormatError(f"{images_path}: truncated IDX header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IDX_IMAGES_MAGIC:
            raise FormatError(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        raw = f.read()
    expected = count * rows * cols
    if len(raw) != expected:
        raise FormatError(
            f"{images_path}: expected {expected} pixel bytes, found {len(raw)}"
        )
    features = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0
    features = features.reshape(count, rows * cols)

    with open(labels_path, "rb") as f:
        header = f.read(8)
        if len(header) < 8:
            raise FormatError(f"{labels_path}: truncated IDX header")
        magic, label_count = struct.unpack(">II", header)
        if magic != IDX_LABELS_MAGIC:
            raise FormatError(
                f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        raw = f.read()
    if len(raw) != label_count:
        raise FormatError(
            f"{labels_path}: expected {label_count} label bytes, found {len(raw)}"
        )
    if label_count != count:
        raise FormatError(
            f"image count {count} does not match label count {label_count}"
        )
    labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
    return Shard(features, labels)


def load_csv(path) -> Shard:
    """Read a CSV dataset with a header row and a column named "label"."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty CSV") from None
        if "label" not in header:
            raise FormatError(f'{path}: no column named "label"')
        label_col = header.index("label")
        feats, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                labels.append(int(row[label_col]))
                feats.append(
                    [float(v) for i, v in enumerate(row) if i != label_col]
                )
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if not feats:
        raise DataError(f"{path}: no data rows")
    return Shard(np.asarray(feats, dtype=np.float64), np.asarray(labels, dtype=np.int64))


def synth_classes(
    num_classes: int,
    per_class: int,
    input_dim: int,
    separation: float,
    rng: np.random.Generator,
) -> Shard:
    """Gaussian blobs with one mean per class at distance ``separation``.

    Class means sit at ``separation`` times a random unit direction; each
    sample adds unit-variance isotropic noise.  Deterministic per seed.
    """
    if num_classes < 1 or per_class < 1 or input_dim < 1:
        raise DataError("num_classes, per_class and input_dim must all be >= 1")
    directions = rng.normal(size=(num_classes, input_dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = separation * directions
    features = np.repeat(means, per_class, axis=0) + rng.normal(
        size=(num_classes * per_class, input_dim)
    )
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    return Shard(features, labels)


def _block_counts(label_sizes, num_blocks, num_clients):
    """Blocks per label, proportional to label frequency.

    Counts are clipped to [1, num_clients] so that every label is covered
    and a distinct-label assignment exists, then adjusted by largest
    remainder to sum exactly to ``num_blocks``.
    """
    total = sum(label_sizes)
    ideal = [s * num_blocks / total for s in label_sizes]
    counts = [min(num_clients, max(1, int(q))) for q in ideal]
    remainders = sorted(
        range(len(ideal)), key=lambda i: (ideal[i] - int(ideal[i])), reverse=True
    )
    k = 0
    while sum(counts) < num_blocks:
        i = remainders[k % len(remainders)]
        if counts[i] < num_clients:
            counts[i] += 1
        k += 1
    k = 0
    order = remainders[::-1]
    while sum(counts) > num_blocks:
        i = order[k % len(order)]
        if counts[i] > 1:
            counts[i] -= 1
        k += 1
    return counts


def shard_two_class(
    dataset: Shard,
    num_clients: int,
    classes_per_client: int,
    rng: np.random.Generator,
) -> PartitionPlan:
    """Assign each client ``classes_per_client`` label-homogeneous blocks.

    Samples are sorted by label (stable), each label's run is split into
    near-equal contiguous blocks, and blocks are dealt to clients by a
    seeded permutation such that every client receives blocks of
    pairwise-distinct labels.
    """
    n = len(dataset)
    labels = np.unique(dataset.labels)
    c = classes_per_client
    if c < 1 or num_clients < 1:
        raise PartitionError("num_clients and classes_per_client must be >= 1")
    if len(labels) < c:
        raise PartitionError(
            f"dataset has {len(labels)} labels, fewer than classes_per_client={c}"
        )
    num_blocks = num_clients * c
    if num_blocks > n:
        raise PartitionError(
            f"{num_blocks} blocks requested but dataset has only {n} samples"
        )
    if len(labels) > num_blocks:
        raise PartitionError(
            f"{len(labels)} labels cannot be covered by {num_blocks} blocks"
        )

    by_label = [np.flatnonzero(dataset.labels == lab) for lab in labels]
    counts = _block_counts([len(ix) for ix in by_label], num_blocks, num_clients)

    # blocks[label] is a stack of index arrays, dealt out from the end
    blocks = []
    for ix, b in zip(by_label, counts):
        parts = np.array_split(ix, b)
        if any(len(p) == 0 for p in parts):
            raise PartitionError(
                f"label with {len(ix)} samples cannot form {b} nonempty blocks"
            )
        blocks.append(list(parts))

    remaining = np.array(counts)
    client_order = rng.permutation(num_clients)
    assignments = [None] * num_clients
    for client in client_order:
        # serve the labels with the most blocks left (keeps the deal feasible);
        # rng breaks ties so repeated seeds vary the class mix
        tiebreak = rng.permutation(len(labels))
        chosen = sorted(
            range(len(labels)), key=lambda i: (-remaining[i], tiebreak[i])
        )[:c]
        picked = []
        for lab_i in chosen:
            if remaining[lab_i] == 0:
                raise PartitionError("block deal became infeasible")
            remaining[lab_i] -= 1
            picked.append(blocks[lab_i].pop())
        assignments[client] = np.sort(np.concatenate(picked))
    return PartitionPlan(assignments, classes_per_client=c, num_samples=n)


def train_test_split(shard: Shard, test_fraction: float, rng: np.random.Generator):
    """Split one shard into disjoint (train, test) parts, stratified by label.

    The test side holds ceil(n * test_fraction) samples, allocated across
    labels by largest remainder so per-label proportions stay within one
    sample of the global fraction.
    """
    n = len(shard)
    if not 0.0 < test_fraction < 1.0:
        raise DataError("test_fraction must be in (0, 1)")
    n_test = int(np.ceil(n * test_fraction))
    if n < 2 or n_test >= n or n_test < 1:
        raise DataError(
            f"cannot split {n} samples into nonempty train/test at fraction {test_fraction}"
        )

    labels = np.unique(shard.labels)
    by_label = [np.flatnonzero(shard.labels == lab) for lab in labels]
    ideal = [len(ix) * n_test / n for ix in by_label]
    take = [int(q) for q in ideal]
    order = sorted(range(len(labels)), key=lambda i: ideal[i] - take[i], reverse=True)
    k = 0
    while sum(take) < n_test:
        i = order[k % len(order)]
        if take[i] < len(by_label[i]):
            take[i] += 1
        k += 1

    test_idx = []
    for ix, t in zip(by_label, take):
        perm = rng.permutation(len(ix))
        test_idx.append(ix[perm[:t]])
    test_idx = np.sort(np.concatenate(test_idx))
    mask = np.ones(n, dtype=bool)
    mask[test_idx] = False
    train_idx = np.flatnonzero(mask)
    return shard.select(train_idx), shard.select(test_idx)
