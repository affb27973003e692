"""Feature files, synthetic ground truth and few-shot episode sampling.

Binary feature file layout (little-endian)::

    b"SPFX" | version u32 | dim u32 | n_images u32
    then per image:
        id_len u32 | id utf-8 | label_len u32 | label utf-8 | n_crops u32
        n_crops * dim float32, row-major

A CSV variant with header ``image_id,label,crop_index,f0,...,f{dim-1}`` is
read and written when the path ends in ``.csv``.
"""
import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .errors import (
    BadMagicError,
    DimensionMismatchError,
    DuplicateImageError,
    FeatureFileError,
    InvalidInputError,
    TruncatedFileError,
)

MAGIC = b"SPFX"
FORMAT_VERSION = 1
DEFAULT_CROPS = 200

_U32 = struct.Struct("<I")
_HEADER = struct.Struct("<4sIII")


@dataclass
class FeatureDataset:
    """Crop features of many labelled images.

    ``features`` and ``labels`` are keyed by image id; their insertion
    order is the dataset order used for seeding and class enumeration.
    """

    features: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        if set(self.features) != set(self.labels):
            raise InvalidInputError("features and labels must cover the same image ids")
        dims = set()
        for image_id, X in list(self.features.items()):
            X = np.asarray(X, dtype=np.float64)
            if X.ndim != 2 or X.shape[0] < 1:
                raise InvalidInputError(f"image {image_id!r} needs a non-empty 2-D crop matrix")
            if not np.all(np.isfinite(X)):
                raise InvalidInputError(f"image {image_id!r} has non-finite features")
            self.features[image_id] = X
            dims.add(X.shape[1])
        if len(dims) > 1:
            raise InvalidInputError(f"images disagree on feature dimension: {sorted(dims)}")

    @classmethod
    def from_items(cls, items):
        """Build from ``(image_id, label, X)`` triples."""
        features, labels = {}, {}
        for image_id, label, X in items:
            if image_id in features:
                raise InvalidInputError(f"duplicate image id {image_id!r}")
            features[image_id] = X
            labels[image_id] = label
        return cls(features, labels)

    def __len__(self):
        return len(self.features)

    @property
    def image_ids(self):
        return list(self.features)

    @property
    def dim(self):
        for X in self.features.values():
            return X.shape[1]
        return 0

    @property
    def class_index(self):
        """Label -> image ids, classes ordered by first appearance."""
        index = {}
        for image_id, label in self.labels.items():
            index.setdefault(label, []).append(image_id)
        return index

    def subset(self, image_ids):
        keep = set(image_ids)
        return FeatureDataset(
            {i: X for i, X in self.features.items() if i in keep},
            {i: y for i, y in self.labels.items() if i in keep},
        )

    def relabel(self, mapping):
        return FeatureDataset(dict(self.features),
                              {i: mapping[y] for i, y in self.labels.items()})

    def class_mean(self, label):
        ids = self.class_index.get(label)
        if not ids:
            raise InvalidInputError(f"unknown class label {label!r}")
        return np.vstack([self.features[i] for i in ids]).mean(axis=0)

    def equals(self, other):
        if self.image_ids != other.image_ids or self.labels != other.labels:
            return False
        return all(np.array_equal(self.features[i], other.features[i]) for i in self.features)


# --------------------------------------------------------------------------
# serialization

def save_features(dataset, path):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        _save_csv(dataset, path)
        return
    dim = dataset.dim
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dim, len(dataset)))
        for image_id, X in dataset.features.items():
            for text in (image_id, dataset.labels[image_id]):
                raw = str(text).encode("utf-8")
                fh.write(_U32.pack(len(raw)))
                fh.write(raw)
            fh.write(_U32.pack(X.shape[0]))
            fh.write(np.ascontiguousarray(X, dtype="<f4").tobytes())


def load_features(path):
    """Read a binary (or ``.csv``) feature file.

    Raises
    ------
    BadMagicError, TruncatedFileError, DimensionMismatchError, DuplicateImageError
        Each names the offending record where one exists.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _load_csv(path)
    return parse_features(path.read_bytes())


def parse_features(buf):
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError(f"bad magic {bytes(buf[:4])!r}, expected {MAGIC!r}")
    if len(buf) < _HEADER.size:
        raise TruncatedFileError("file ends inside the header")
    _, version, dim, count = _HEADER.unpack_from(buf, 0)
    if version != FORMAT_VERSION:
        raise FeatureFileError(f"unsupported format version {version}")
    if dim < 1:
        raise DimensionMismatchError(f"header declares dimension {dim}")
    pos = _HEADER.size
    features, labels = {}, {}

    def take(n, what):
        nonlocal pos
        if pos + n > len(buf):
            raise TruncatedFileError(what)
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    for index in range(count):
        where = f"record {index}"
        (id_len,) = _U32.unpack(take(4, f"truncated {where}: id length"))
        image_id = bytes(take(id_len, f"truncated {where}: image id")).decode("utf-8")
        where = f"record {index} (image {image_id!r})"
        (label_len,) = _U32.unpack(take(4, f"truncated {where}: label length"))
        label = bytes(take(label_len, f"truncated {where}: label")).decode("utf-8")
        (n_crops,) = _U32.unpack(take(4, f"truncated {where}: crop count"))
        if n_crops < 1:
            raise FeatureFileError(f"{where} declares zero crops")
        nbytes = 4 * n_crops * dim
        if pos + nbytes > len(buf):
            have = (len(buf) - pos) // (4 * dim)
            raise TruncatedFileError(
                f"truncated {where}: declares {n_crops} crops but carries {have}")
        payload = np.frombuffer(take(nbytes, where), dtype="<f4").reshape(n_crops, dim)
        if image_id in features:
            raise DuplicateImageError(f"duplicate image id {image_id!r} at record {index}")
        features[image_id] = payload.astype(np.float64)
        labels[image_id] = label
    if pos != len(buf):
        raise FeatureFileError(f"{len(buf) - pos} trailing bytes after {count} records")
    return FeatureDataset(features, labels)


def _save_csv(dataset, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "label", "crop_index"] + [f"f{j}" for j in range(dataset.dim)])
        for image_id, X in dataset.features.items():
            label = dataset.labels[image_id]
            for c, row in enumerate(np.asarray(X, dtype=np.float32)):
                writer.writerow([image_id, label, c] + [repr(float(v)) for v in row])


def _load_csv(path):
    rows = {}
    labels = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["image_id", "label", "crop_index"]:
            raise BadMagicError(f"{path}: missing image_id,label,crop_index header")
        dim = len(header) - 3
        if dim < 1:
            raise DimensionMismatchError(f"{path}: header has no feature columns")
        for line_no, rec in enumerate(reader, start=2):
            if len(rec) != dim + 3:
                raise DimensionMismatchError(
                    f"{path}:{line_no}: image {rec[0] if rec else '?'!r} has "
                    f"{len(rec) - 3} features, expected {dim}")
            image_id, label = rec[0], rec[1]
            if image_id in labels and labels[image_id] != label:
                raise DuplicateImageError(
                    f"{path}:{line_no}: image {image_id!r} appears with two labels")
            labels[image_id] = label
            try:
                values = [float(v) for v in rec[3:]]
            except ValueError as exc:
                raise FeatureFileError(f"{path}:{line_no}: {exc}") from None
            rows.setdefault(image_id, []).append((int(rec[2]), values))
    features = {}
    for image_id, entries in rows.items():
        entries.sort(key=lambda e: e[0])
        if [e[0] for e in entries] != list(range(len(entries))):
            raise DuplicateImageError(f"{path}: image {image_id!r} has repeated or missing crop indices")
        features[image_id] = np.asarray([e[1] for e in entries], dtype=np.float32).astype(np.float64)
    return FeatureDataset(features, labels)


# --------------------------------------------------------------------------
# synthetic ground truth

@dataclass(frozen=True)
class SyntheticTruth:
    true_vertices: np.ndarray
    true_weights: np.ndarray
    noise_sigma: float


def generate_synthetic(k, n, dim, noise_sigma=0.0, separation=10.0, concentration=1.0, seed=0):
    """Sample a point cloud inside a random simplex with known vertices.

    Vertices are standard normal draws rescaled so that the closest pair is
    exactly ``separation`` apart.  Weight rows are symmetric Dirichlet
    draws except the first ``k``, which are the one-hot corners so every
    vertex is witnessed by a data row.

    Returns
    -------
    X : ndarray, shape (n, dim)
    truth : SyntheticTruth
    """
    if k < 1 or n < k or dim < max(k - 1, 1):
        raise InvalidInputError(f"infeasible sizes k={k}, n={n}, dim={dim}")
    if not separation > 0 or not concentration > 0 or noise_sigma < 0:
        raise InvalidInputError("need separation > 0, concentration > 0, noise_sigma >= 0")
    rng = np.random.default_rng(int(seed))
    vertices = rng.standard_normal((k, dim))
    if k > 1:
        closest = pdist(vertices).min()
        if closest <= 0:
            raise InvalidInputError("degenerate vertex draw")
        vertices *= separation / closest
    if k == 1:
        weights = np.ones((n, 1))
    else:
        weights = rng.dirichlet(np.full(k, float(concentration)), size=n)
    weights[:k] = np.eye(k)
    X = weights @ vertices
    if noise_sigma > 0:
        X = X + noise_sigma * rng.standard_normal(X.shape)
    return X, SyntheticTruth(vertices, weights, float(noise_sigma))


def save_truth(truth, path):
    with open(path, "wb") as fh:
        np.savez(fh, true_vertices=truth.true_vertices, true_weights=truth.true_weights,
                 noise_sigma=np.float64(truth.noise_sigma))


def load_truth(path):
    with np.load(path) as z:
        return SyntheticTruth(z["true_vertices"], z["true_weights"], float(z["noise_sigma"]))


def generate_dataset(n_classes, images_per_class, n_crops=20, dim=16, max_objects=3,
                     separation=10.0, noise_sigma=0.0, concentration=1.0, seed=0):
    """Multi-class dataset of synthetic multi-object images.

    Every class owns a prototype vector.  Each image shows its class
    prototype plus up to ``max_objects - 1`` distractor objects drawn
    fresh per image; crops are Dirichlet mixtures of the image's objects.
    """
    rng = np.random.default_rng(int(seed))
    prototypes = rng.standard_normal((n_classes, dim))
    if n_classes > 1:
        prototypes *= separation / pdist(prototypes).min()
    items = []
    for c in range(n_classes):
        for m in range(images_per_class):
            n_obj = int(rng.integers(1, min(max_objects, n_crops) + 1))
            objects = np.vstack([prototypes[c], separation * rng.standard_normal((n_obj - 1, dim))])
            w = rng.dirichlet(np.full(n_obj, float(concentration)), size=n_crops)
            w[:n_obj] = np.eye(n_obj)
            X = w @ objects
            if noise_sigma > 0:
                X = X + noise_sigma * rng.standard_normal(X.shape)
            items.append((f"c{c:03d}_i{m:03d}", f"class{c:03d}", X))
    return FeatureDataset.from_items(items)


# --------------------------------------------------------------------------
# episodes

@dataclass(frozen=True)
class EpisodeSpec:
    """One 1-shot task: ``support_ids[c]`` is the single shot of ``classes[c]``."""

    classes: tuple
    support_ids: tuple
    query_ids: tuple
    query_labels: tuple
    seed: int
    way: int = 5
    queries_per_class: int = 15
    shots: int = 1


def eligible_classes(class_index, queries_per_class):
    return [c for c, ids in class_index.items() if len(ids) >= 1 + queries_per_class]


def sample_episode(dataset, way=5, queries_per_class=15, seed=0, *, class_index=None):
    """Uniformly sample ``way`` classes, then one support and the queries per class.

    ``class_index`` may be passed to reuse a precomputed (possibly filtered)
    label -> ids map.
    """
    index = dataset.class_index if class_index is None else class_index
    pool = eligible_classes(index, queries_per_class)
    if way < 1 or queries_per_class < 0:
        raise InvalidInputError("way must be >= 1 and queries_per_class >= 0")
    if len(pool) < way:
        sizes = {c: len(ids) for c, ids in index.items()}
        raise InvalidInputError(
            f"need {way} classes with >= {1 + queries_per_class} images, "
            f"have {len(pool)}; class sizes {sizes}")
    rng = np.random.default_rng(int(seed))
    chosen = rng.choice(len(pool), size=way, replace=False)
    classes, supports, queries, query_labels = [], [], [], []
    for ci in chosen:
        label = pool[ci]
        ids = index[label]
        picks = rng.choice(len(ids), size=1 + queries_per_class, replace=False)
        classes.append(label)
        supports.append(ids[picks[0]])
        queries.extend(ids[p] for p in picks[1:])
        query_labels.extend([label] * queries_per_class)
    return EpisodeSpec(tuple(classes), tuple(supports), tuple(queries), tuple(query_labels),
                       int(seed), way, queries_per_class)
