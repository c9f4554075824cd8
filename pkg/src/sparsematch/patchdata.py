"""Patch datasets: UBC photo-tour loaders and a synthetic pair generator.

Patches are stored as rows of a float64 array of shape ``(n_patches, side**2)``
flattened in row-major order with intensities scaled into ``[0, 1]``.  Pairs
are an ``(n_pairs, 3)`` integer array with columns ``idx_a, idx_b, label``.
"""

import csv
import glob
import os
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from ._binio import atomic_write
from .errors import ConfigError, CorruptionError, DataError, FormatError

DATASET_MAGIC = b"SPMP"
DATASET_VERSION = 1


@dataclass
class PatchDataset:
    patches: np.ndarray
    pairs: np.ndarray
    name: str = "dataset"
    side: int = 0
    prototype_ids: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.patches = np.asarray(self.patches, dtype=np.float64)
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 3)
        if self.side == 0 and self.patches.shape[1:]:
            self.side = int(round(np.sqrt(self.patches.shape[1])))
        if len(self.pairs) and self.pairs[:, :2].max() >= len(self.patches):
            raise DataError("pair index out of range for dataset "
                            f"{self.name!r} with {len(self.patches)} patches")

    @property
    def m(self):
        return self.patches.shape[1]

    @property
    def positive_fraction(self):
        if len(self.pairs) == 0:
            return 0.0
        return float(self.pairs[:, 2].mean())

    def subset_pairs(self, index):
        """Dataset sharing the patches but keeping only ``pairs[index]``."""
        return PatchDataset(self.patches, self.pairs[index], self.name,
                            self.side, self.prototype_ids, dict(self.meta))


def standardize(patches):
    """Per-patch zero-mean, unit-variance rescaling (off by default)."""
    patches = np.asarray(patches, dtype=np.float64)
    centered = patches - patches.mean(axis=1, keepdims=True)
    scale = centered.std(axis=1, keepdims=True)
    scale[scale == 0] = 1.0
    return centered / scale


def load_patch_sheet(path, patch_side=64, grid=16):
    """Cut a square bitmap sheet into ``grid**2`` patches, row-major.

    Returns an array of shape ``(grid**2, patch_side**2)`` scaled by 1/255.
    """
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "P", "1"):
                raise FormatError(f"{path}: expected 8-bit grayscale image, "
                                  f"got mode {img.mode}")
            pixels = np.asarray(img.convert("L"), dtype=np.float64)
    except OSError as exc:
        raise DataError(f"cannot read patch sheet {path}: {exc}") from exc
    size = grid * patch_side
    if pixels.shape != (size, size):
        raise FormatError(f"{path}: expected {size}x{size} sheet, "
                          f"got {pixels.shape[1]}x{pixels.shape[0]}")
    blocks = pixels.reshape(grid, patch_side, grid, patch_side)
    patches = blocks.transpose(0, 2, 1, 3).reshape(grid * grid, -1)
    return patches / 255.0


def load_patch_directory(directory, patch_side=64, grid=16, n_patches=None,
                         pattern="*.bmp"):
    """Load every sheet in ``directory`` in lexicographic file order.

    ``n_patches`` truncates the trailing blank cells of the final sheet.
    """
    paths = sorted(glob.glob(os.path.join(directory, pattern)))
    if not paths:
        raise DataError(f"no patch sheets matching {pattern} in {directory}")
    patches = np.concatenate(
        [load_patch_sheet(p, patch_side, grid) for p in paths])
    if n_patches is not None:
        if n_patches > len(patches):
            raise DataError(f"{directory}: {n_patches} patches requested but "
                            f"sheets hold only {len(patches)}")
        patches = patches[:n_patches]
    return patches


def load_info_file(path):
    """Read the per-patch 3D point ids (first column of ``info.txt``)."""
    ids = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                fields = line.split()
                if not fields:
                    continue
                try:
                    ids.append(int(fields[0]))
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: bad point id "
                                    f"{fields[0]!r}") from exc
    except OSError as exc:
        raise DataError(f"cannot read info file {path}: {exc}") from exc
    return np.asarray(ids, dtype=np.int64)


def load_match_file(path, point_ids=None):
    """Parse a match file into an ``(n, 3)`` array of ``idx_a, idx_b, label``.

    Each record reads ``patchID1 pointID1 _ patchID2 pointID2 _``; the label is
    1 when the two point ids agree.  When ``point_ids`` (one id per patch) is
    given, patch indices are range checked and the point ids cross-checked.
    """
    rows = []
    n_patches = None if point_ids is None else len(point_ids)
    try:
        fh = open(path)
    except OSError as exc:
        raise DataError(f"cannot read match file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) < 6:
                raise DataError(f"{path}:{lineno}: expected at least 6 "
                                f"fields, got {len(fields)}")
            try:
                pa, qa, _, pb, qb, _ = (int(v) for v in fields[:6])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-integer field") from exc
            if n_patches is not None:
                for idx in (pa, pb):
                    if not 0 <= idx < n_patches:
                        raise DataError(f"{path}:{lineno}: patch index {idx} "
                                        f"out of range [0, {n_patches})")
                if point_ids[pa] != qa or point_ids[pb] != qb:
                    raise DataError(f"{path}:{lineno}: point ids disagree "
                                    "with the info file")
            rows.append((pa, pb, int(qa == qb)))
    return np.asarray(rows, dtype=np.int64).reshape(-1, 3)


def load_ubc_subset(directory, match_file, patch_side=64, grid=16,
                    info_file="info.txt"):
    """Load one UBC subset directory (sheets, ``info.txt``, a match file)."""
    point_ids = load_info_file(os.path.join(directory, info_file))
    patches = load_patch_directory(directory, patch_side, grid,
                                   n_patches=len(point_ids))
    if not os.path.isabs(match_file):
        match_file = os.path.join(directory, match_file)
    pairs = load_match_file(match_file, point_ids)
    name = os.path.basename(os.path.normpath(directory))
    return PatchDataset(patches, pairs, name=name, side=patch_side,
                        meta={"source": os.path.abspath(directory)})


def _prototype(rng, size):
    """Smooth random image in [0, 1]: a few oriented gratings and blobs."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.zeros((size, size))
    for _ in range(3):
        theta = rng.uniform(0, np.pi)
        freq = rng.uniform(0.5, 2.5)
        phase = rng.uniform(0, 2 * np.pi)
        img += rng.uniform(0.5, 1.0) * np.cos(
            2 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta))
            + phase)
    for _ in range(2):
        cy, cx = rng.uniform(0, 1, size=2)
        width = rng.uniform(0.1, 0.3)
        sign = rng.choice([-1.0, 1.0])
        img += 2 * sign * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2)
                                 / (2 * width ** 2))
    img -= img.min()
    peak = img.max()
    return img / peak if peak > 0 else img


def synth_dataset(seed, n_prototypes, pairs_per_class, side, noise_sigma=0.05,
                  shift_max=1, name=None):
    """Synthetic balanced pair dataset built from random prototype images.

    Every pair draws two fresh views (crop offset in ``[-shift_max,
    shift_max]`` plus Gaussian noise, clipped to [0, 1]).  Matching pairs take
    both views from one prototype; non-matching pairs from two different
    prototypes.  ``n_prototypes * pairs_per_class`` pairs are produced, half of
    them matching, with prototype ``i % n_prototypes`` anchoring pair ``i``
    within each class.
    """
    if n_prototypes < 2:
        raise ConfigError("synth_dataset needs n_prototypes >= 2 to form "
                          "non-matching pairs")
    if side < 4:
        raise ConfigError(f"side must be >= 4, got {side}")
    if noise_sigma < 0:
        raise ConfigError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if not 0 <= shift_max < side / 2:
        raise ConfigError(f"shift_max must lie in [0, side/2), got {shift_max}")
    total = n_prototypes * pairs_per_class
    if total % 2:
        raise ConfigError("n_prototypes * pairs_per_class must be even for an "
                          "exact 50% label balance")
    rng = np.random.default_rng(seed)
    big = side + 2 * shift_max
    protos = np.stack([_prototype(rng, big) for _ in range(n_prototypes)])

    def view(pid):
        dy, dx = rng.integers(0, 2 * shift_max + 1, size=2)
        patch = protos[pid, dy:dy + side, dx:dx + side]
        if noise_sigma > 0:
            patch = np.clip(patch + rng.normal(0, noise_sigma, patch.shape),
                            0.0, 1.0)
        return patch.ravel()

    n_pos = total // 2
    anchors = np.arange(n_pos) % n_prototypes
    labels = np.zeros(total, dtype=np.int64)
    labels[:n_pos] = 1
    patches = np.empty((2 * total, side * side))
    proto_ids = np.empty(2 * total, dtype=np.int64)
    for i in range(total):
        a = anchors[i % n_pos]
        if labels[i]:
            b = a
        else:
            b = (a + rng.integers(1, n_prototypes)) % n_prototypes
        for slot, pid in ((2 * i, a), (2 * i + 1, b)):
            patches[slot] = view(pid)
            proto_ids[slot] = pid
    order = rng.permutation(total)
    pairs = np.column_stack([2 * order, 2 * order + 1, labels[order]])
    return PatchDataset(
        patches, pairs, name=name or f"synth-{seed}", side=side,
        prototype_ids=proto_ids,
        meta={"seed": seed, "n_prototypes": n_prototypes,
              "pairs_per_class": pairs_per_class, "noise_sigma": noise_sigma,
              "shift_max": shift_max})


def save_dataset(dataset, path, pairs_path=None):
    """Write the binary patch container plus a ``idx_a,idx_b,label`` CSV.

    Container layout: ``b"SPMP"``, version u32, m u32, n u32, then the
    patches as row-major little-endian float64.
    """
    n, m = dataset.patches.shape
    header = DATASET_MAGIC + struct.pack("<III", DATASET_VERSION, m, n)
    atomic_write(path, header + np.ascontiguousarray(
        dataset.patches, dtype="<f8").tobytes())
    if pairs_path is None:
        pairs_path = os.path.splitext(os.fspath(path))[0] + "_pairs.csv"
    save_pairs_csv(dataset.pairs, pairs_path)
    return pairs_path


def load_dataset(path, pairs_path=None, name=None):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    if data[:4] != DATASET_MAGIC:
        raise FormatError(f"{path}: not a patch dataset container")
    if len(data) < 16:
        raise CorruptionError(f"{path}: truncated header")
    version, m, n = struct.unpack_from("<III", data, 4)
    if version != DATASET_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if len(data) != 16 + 8 * m * n:
        raise CorruptionError(f"{path}: expected {16 + 8 * m * n} bytes, "
                              f"found {len(data)}")
    patches = np.frombuffer(data, dtype="<f8", offset=16).reshape(n, m)
    if pairs_path is None:
        pairs_path = os.path.splitext(os.fspath(path))[0] + "_pairs.csv"
    pairs = load_pairs_csv(pairs_path)
    return PatchDataset(patches.astype(np.float64), pairs,
                        name=name or os.path.basename(os.fspath(path)))


def save_pairs_csv(pairs, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["idx_a", "idx_b", "label"])
        writer.writerows(np.asarray(pairs, dtype=np.int64).tolist())


def load_pairs_csv(path):
    rows = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["idx_a", "idx_b", "label"]:
                raise FormatError(f"{path}: bad pair CSV header {header}")
            for lineno, row in enumerate(reader, 2):
                try:
                    a, b, label = (int(v) for v in row)
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: malformed pair row "
                                    f"{row}") from exc
                if label not in (0, 1):
                    raise DataError(f"{path}:{lineno}: label must be 0 or 1")
                rows.append((a, b, label))
    except OSError as exc:
        raise DataError(f"cannot read pair list {path}: {exc}") from exc
    return np.asarray(rows, dtype=np.int64).reshape(-1, 3)
