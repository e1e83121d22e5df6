"""Data generation and ingestion: the two-arc toy sampler, IDX file
parsing, pool splitting with hidden labels, and the optional train-time
image augmentation."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, FormatError, ParameterError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

YINYANG_RED = 1
YINYANG_BLUE = 2


def generate_yinyang(n_per_class, seed_or_rng):
    """Draw n_per_class samples from each of the two interleaved arcs.

    Radius r ~ N(1, (1/4)^2) and angle phi ~ N(1/2, (1/3)^2) in half-turns
    (the arc angle is pi*phi, sweeping ~90 +- 60 degrees, which produces the
    interlocking hooks); negative radii are kept as drawn. Red points arc up
    from (1/3, -1/10), blue points mirror them down from (-1/3, 1/10).
    Returns (points (2n,2) float32, classes (2n,) with red=1 first, blue=2
    after).
    """
    if n_per_class < 1:
        raise ParameterError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = _as_rng(seed_or_rng)
    pts = np.empty((2 * n_per_class, 2), dtype=np.float32)
    labels = np.empty(2 * n_per_class, dtype=np.int64)
    for ci, (cx, cy, ysign) in enumerate(
        [(1 / 3, -1 / 10, 1.0), (-1 / 3, 1 / 10, -1.0)]
    ):
        r = rng.normal(1.0, 0.25, size=n_per_class)
        phi = rng.normal(0.5, 1.0 / 3.0, size=n_per_class)
        ang = np.pi * phi
        sl = slice(ci * n_per_class, (ci + 1) * n_per_class)
        pts[sl, 0] = cx + r * np.cos(ang)
        pts[sl, 1] = cy + ysign * r * np.sin(ang)
        labels[sl] = ci + 1
    return pts, labels


def save_yinyang_csv(path, points, labels):
    """Write (x, y, class) rows for external plotting."""
    with open(path, "w") as f:
        f.write("x,y,class\n")
        for (x, y), c in zip(points, labels):
            f.write(f"{x:.6f},{y:.6f},{int(c)}\n")


def _as_rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def _read_be32(f, path, what):
    raw = f.read(4)
    if len(raw) != 4:
        raise FormatError(f"{path}: truncated while reading {what}")
    return struct.unpack(">I", raw)[0]


def load_idx_images(path):
    """Parse a big-endian IDX image file into a (n, rows, cols) uint8 array."""
    with open(path, "rb") as f:
        magic = _read_be32(f, path, "magic")
        if magic != IDX_IMAGE_MAGIC:
            raise FormatError(
                f"{path}: bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
            )
        n = _read_be32(f, path, "image count")
        rows = _read_be32(f, path, "row count")
        cols = _read_be32(f, path, "column count")
        raw = f.read(n * rows * cols)
        if len(raw) != n * rows * cols:
            raise FormatError(
                f"{path}: truncated pixel data, expected {n * rows * cols} bytes, got {len(raw)}"
            )
    return np.frombuffer(raw, dtype=np.uint8).reshape(n, rows, cols)


def load_idx_labels(path):
    """Parse a big-endian IDX label file into a (n,) uint8 array."""
    with open(path, "rb") as f:
        magic = _read_be32(f, path, "magic")
        if magic != IDX_LABEL_MAGIC:
            raise FormatError(
                f"{path}: bad label magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}"
            )
        n = _read_be32(f, path, "label count")
        raw = f.read(n)
        if len(raw) != n:
            raise FormatError(
                f"{path}: truncated label data, expected {n} bytes, got {len(raw)}"
            )
    return np.frombuffer(raw, dtype=np.uint8).copy()


def save_idx_images(path, images):
    """Write a (n, rows, cols) uint8 array in IDX image format."""
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, n, rows, cols))
        f.write(images.tobytes())


def save_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABEL_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


def load_mnist_idx(images_path, labels_path):
    """Load an images/labels IDX pair; pixels scaled to [0,1] float32.

    Returns (images (n,28,28) float32, digits (n,) int64 in 0..9).
    """
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(
            f"image count {images.shape[0]} ({images_path}) does not match "
            f"label count {labels.shape[0]} ({labels_path})"
        )
    return images.astype(np.float32) / np.float32(255.0), labels.astype(np.int64)


class HiddenTruth:
    """Capability object guarding the labels of nominally unlabeled samples.

    Only the simulated oracle and diagnostics receive a reference; the
    training loop never sees one.
    """

    def __init__(self, labels):
        self._labels = np.asarray(labels, dtype=np.int64)

    def __len__(self):
        return self._labels.shape[0]

    def reveal(self, sample_ids):
        ids = np.asarray(sample_ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= len(self)):
            raise KeyError(f"sample ids out of range 0..{len(self) - 1}")
        out = self._labels[ids]
        return int(out) if np.ndim(sample_ids) == 0 else out


@dataclass
class DataPools:
    """Labeled pool (X, G), unlabeled pool X', and the per-iteration
    pseudo-labeled additions that together form the training set (D, L).

    Sample ids index into `inputs`. `unlabeled_ids` stays sorted ascending,
    which fixes the tie-break order for acquisition policies.
    """

    inputs: np.ndarray
    n_classes: int
    labeled_ids: np.ndarray
    labels: np.ndarray
    unlabeled_ids: np.ndarray
    pseudo_ids: np.ndarray = None
    pseudo_labels: np.ndarray = None

    def __post_init__(self):
        if self.pseudo_ids is None:
            self.pseudo_ids = np.empty(0, dtype=np.int64)
        if self.pseudo_labels is None:
            self.pseudo_labels = np.empty(0, dtype=np.int64)

    @property
    def n_labeled(self):
        return int(self.labeled_ids.shape[0])

    @property
    def n_unlabeled(self):
        return int(self.unlabeled_ids.shape[0])

    @property
    def n_pseudo(self):
        return int(self.pseudo_ids.shape[0])

    def labeled_inputs(self):
        return self.inputs[self.labeled_ids]

    def unlabeled_inputs(self):
        return self.inputs[self.unlabeled_ids]

    def set_pseudo(self, ids, labels):
        """Replace the pseudo-labeled additions (rebuilt every iteration)."""
        ids = np.asarray(ids, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if ids.shape != labels.shape:
            raise ParameterError("pseudo ids and labels must align")
        if labels.size and (labels.min() < 1 or labels.max() > self.n_classes):
            raise ParameterError(f"pseudo labels must lie in 1..{self.n_classes}")
        self.pseudo_ids = ids
        self.pseudo_labels = labels

    def acquire(self, sample_id, label):
        """Move one sample from X' into (X, G) with its oracle label.

        Ground-truth labels are never reassigned: acquiring an already
        labeled sample is an error.
        """
        if sample_id in self.labeled_ids:
            raise ParameterError(f"sample {sample_id} already has a ground-truth label")
        pos = np.searchsorted(self.unlabeled_ids, sample_id)
        if pos >= self.n_unlabeled or self.unlabeled_ids[pos] != sample_id:
            raise ParameterError(f"sample {sample_id} is not in the unlabeled pool")
        if not 1 <= label <= self.n_classes:
            raise ParameterError(f"label {label} outside 1..{self.n_classes}")
        self.unlabeled_ids = np.delete(self.unlabeled_ids, pos)
        self.labeled_ids = np.append(self.labeled_ids, np.int64(sample_id))
        self.labels = np.append(self.labels, np.int64(label))
        keep = self.pseudo_ids != sample_id
        if not keep.all():
            self.pseudo_ids = self.pseudo_ids[keep]
            self.pseudo_labels = self.pseudo_labels[keep]

    def training_set(self):
        """The current (D, L) as (input index, label, source) triples."""
        triples = [
            (int(i), int(g), "ground_truth")
            for i, g in zip(self.labeled_ids, self.labels)
        ]
        triples += [
            (int(i), int(l), "pseudo")
            for i, l in zip(self.pseudo_ids, self.pseudo_labels)
        ]
        return triples

    def check(self):
        """Assert the structural invariants; used by tests."""
        assert np.intersect1d(self.labeled_ids, self.unlabeled_ids).size == 0
        assert self.labeled_ids.shape == self.labels.shape
        if self.pseudo_ids.size:
            assert np.isin(self.pseudo_ids, self.unlabeled_ids).all()
            assert self.pseudo_labels.min() >= 1
            assert self.pseudo_labels.max() <= self.n_classes


def make_pools(inputs, labels, n_labeled, balanced, seed_or_rng, n_classes=None):
    """Split a dataset into a labeled pool and an unlabeled pool.

    Labels must already be 1-based classes. Returns (DataPools, HiddenTruth);
    the truth table covers every sample and is the only place the unlabeled
    pool's labels survive.
    """
    inputs = np.asarray(inputs)
    labels = np.asarray(labels, dtype=np.int64)
    n = inputs.shape[0]
    if labels.shape[0] != n:
        raise ConfigError(f"{n} inputs but {labels.shape[0]} labels")
    if not 0 < n_labeled <= n:
        raise ConfigError(f"n_labeled must be in 1..{n}, got {n_labeled}")
    c = int(n_classes if n_classes is not None else labels.max())
    rng = _as_rng(seed_or_rng)
    if balanced:
        if n_labeled % c:
            raise ConfigError(
                f"balanced split needs n_labeled divisible by {c} classes, got {n_labeled}"
            )
        per_class = n_labeled // c
        chosen = []
        for cls in range(1, c + 1):
            members = np.flatnonzero(labels == cls)
            if members.size < per_class:
                raise ConfigError(
                    f"class {cls} has only {members.size} samples, need {per_class}"
                )
            chosen.append(rng.choice(members, size=per_class, replace=False))
        labeled_ids = np.sort(np.concatenate(chosen))
    else:
        labeled_ids = np.sort(rng.choice(n, size=n_labeled, replace=False))
    mask = np.ones(n, dtype=bool)
    mask[labeled_ids] = False
    pools = DataPools(
        inputs=inputs,
        n_classes=c,
        labeled_ids=labeled_ids.astype(np.int64),
        labels=labels[labeled_ids].copy(),
        unlabeled_ids=np.flatnonzero(mask).astype(np.int64),
    )
    return pools, HiddenTruth(labels)


def augment(image, rng, max_rotation_deg=10.0, max_scale=0.05):
    """Randomly rotate (< max_rotation_deg) and scale height/width
    independently (within +-max_scale), bilinear, zero fill, clipped to [0,1].

    The transform is applied about the image center, so content stays
    centered on the canvas.
    """
    img = np.asarray(image)
    squeeze = img.ndim == 3 and img.shape[2] == 1
    if squeeze:
        img = img[:, :, 0]
    angle = np.deg2rad(rng.uniform(-max_rotation_deg, max_rotation_deg))
    sy = rng.uniform(1.0 - max_scale, 1.0 + max_scale)
    sx = rng.uniform(1.0 - max_scale, 1.0 + max_scale)
    out = _affine_about_center(img, angle, sy, sx)
    return out[:, :, None] if squeeze else out


def _affine_about_center(img, angle, sy, sx):
    # output = rotate(scale(input)); ndimage maps output -> input coordinates,
    # so we pass the inverse: scale^-1 . rotation^-1
    cos, sin = np.cos(angle), np.sin(angle)
    rot_inv = np.array([[cos, sin], [-sin, cos]])
    scale_inv = np.array([[1.0 / sy, 0.0], [0.0, 1.0 / sx]])
    matrix = scale_inv @ rot_inv
    center = (np.asarray(img.shape) - 1) / 2.0
    offset = center - matrix @ center
    out = ndimage.affine_transform(
        img.astype(np.float32), matrix, offset=offset, order=1, mode="constant", cval=0.0
    )
    return np.clip(out, 0.0, 1.0).astype(np.float32)
