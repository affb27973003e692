import struct

import numpy as np
import pytest

from simplexshot.data import (
    EpisodeSpec,
    FeatureDataset,
    MAGIC,
    generate_dataset,
    generate_synthetic,
    load_features,
    load_truth,
    parse_features,
    sample_episode,
    save_features,
    save_truth,
)
from simplexshot.errors import (
    BadMagicError,
    DimensionMismatchError,
    DuplicateImageError,
    FeatureFileError,
    InvalidInputError,
    TruncatedFileError,
)


def small_dataset(rng, dim=4):
    return FeatureDataset.from_items([
        ("img-a", "cat", rng.normal(size=(5, dim)).astype(np.float32)),
        ("img-b", "dog", rng.normal(size=(3, dim)).astype(np.float32)),
        ("ïmg-ç", "cat", rng.normal(size=(1, dim)).astype(np.float32)),
    ])


def _record(image_id, label, X):
    out = b""
    for text in (image_id, label):
        raw = text.encode()
        out += struct.pack("<I", len(raw)) + raw
    return out + struct.pack("<I", X.shape[0]) + X.astype("<f4").tobytes()


# ---------------------------------------------------------------- files

@pytest.mark.parametrize("suffix", [".spfx", ".csv"])
def test_round_trip(tmp_path, rng, suffix):
    ds = small_dataset(rng)
    path = tmp_path / f"feats{suffix}"
    save_features(ds, path)
    back = load_features(path)
    assert back.equals(ds)
    assert back.class_index == {"cat": ["img-a", "ïmg-ç"], "dog": ["img-b"]}


def test_header_layout(tmp_path, rng):
    ds = small_dataset(rng)
    path = tmp_path / "f.bin"
    save_features(ds, path)
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    assert struct.unpack_from("<III", raw, 4) == (1, 4, 3)


def test_bad_magic(tmp_path, rng):
    path = tmp_path / "f.bin"
    save_features(small_dataset(rng), path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(BadMagicError):
        load_features(path)


def test_declared_rows_exceed_payload_names_image():
    X = np.ones((4, 2), dtype=np.float32)
    body = _record("short-one", "x", X)
    # claim five crops while only four rows follow
    body = body.replace(struct.pack("<I", 4), struct.pack("<I", 5), 1)
    buf = struct.pack("<4sIII", MAGIC, 1, 2, 1) + body
    with pytest.raises(TruncatedFileError, match="short-one"):
        parse_features(buf)


def test_every_truncation_is_rejected(tmp_path, rng):
    path = tmp_path / "f.bin"
    save_features(small_dataset(rng, dim=2), path)
    raw = path.read_bytes()
    for cut in range(len(raw)):
        with pytest.raises(FeatureFileError):
            parse_features(raw[:cut])


def test_trailing_bytes_rejected(tmp_path, rng):
    path = tmp_path / "f.bin"
    save_features(small_dataset(rng), path)
    with pytest.raises(FeatureFileError):
        parse_features(path.read_bytes() + b"\x00")


def test_duplicate_image_id():
    X = np.zeros((1, 2), dtype=np.float32)
    buf = struct.pack("<4sIII", MAGIC, 1, 2, 2) + _record("dup", "a", X) + _record("dup", "b", X)
    with pytest.raises(DuplicateImageError, match="dup"):
        parse_features(buf)


def test_csv_dimension_mismatch(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("image_id,label,crop_index,f0,f1\na,x,0,1.0,2.0\nb,y,0,1.0\n")
    with pytest.raises(DimensionMismatchError, match="'b'"):
        load_features(path)


def test_csv_bad_header(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("id,foo\n")
    with pytest.raises(BadMagicError):
        load_features(path)


def test_empty_file(tmp_path):
    path = tmp_path / "empty.bin"
    path.write_bytes(b"")
    with pytest.raises(FeatureFileError):
        load_features(path)


def test_dataset_rejects_mixed_dimensions(rng):
    with pytest.raises(InvalidInputError):
        FeatureDataset.from_items([("a", "x", rng.normal(size=(2, 3))),
                                   ("b", "x", rng.normal(size=(2, 4)))])


# ---------------------------------------------------------------- synthetic

def _hull_residual(x, V):
    # barycentric least squares with the affine constraint appended
    A = np.vstack([V.T, np.ones(len(V))])
    b = np.append(x, 1.0)
    w, *_ = np.linalg.lstsq(A, b, rcond=None)
    return np.linalg.norm(A @ w - b), w


def test_noise_free_points_lie_in_hull():
    X, truth = generate_synthetic(3, 60, 5, 0.0, 10.0, 1.0, seed=3)
    for x in X:
        residual, w = _hull_residual(x, truth.true_vertices)
        assert residual < 1e-9
        assert w.min() > -1e-9


def test_corner_witnesses_and_separation():
    X, truth = generate_synthetic(3, 50, 6, 0.0, 7.5, 0.5, seed=1)
    np.testing.assert_array_equal(X[:3], truth.true_vertices)
    np.testing.assert_allclose(truth.true_weights.sum(axis=1), 1.0, atol=1e-12)
    d = [np.linalg.norm(truth.true_vertices[a] - truth.true_vertices[b])
         for a in range(3) for b in range(a + 1, 3)]
    assert min(d) == pytest.approx(7.5)


def test_single_vertex_mean_concentrates():
    sigma, n = 0.5, 4000
    X, truth = generate_synthetic(1, n, 8, sigma, 1.0, 1.0, seed=12)
    assert np.linalg.norm(X.mean(axis=0) - truth.true_vertices[0]) < 4 * sigma * np.sqrt(8) / np.sqrt(n)


def test_synthetic_is_deterministic():
    a = generate_synthetic(2, 30, 4, 0.1, 5.0, 1.0, seed=99)
    b = generate_synthetic(2, 30, 4, 0.1, 5.0, 1.0, seed=99)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1].true_weights, b[1].true_weights)


@pytest.mark.parametrize("args", [
    (0, 10, 3), (3, 2, 3), (4, 10, 2),
])
def test_synthetic_infeasible(args):
    with pytest.raises(InvalidInputError):
        generate_synthetic(*args)


def test_truth_round_trip(tmp_path):
    _, truth = generate_synthetic(3, 20, 4, 0.25, 3.0, 1.0, seed=5)
    save_truth(truth, tmp_path / "t.npz")
    back = load_truth(tmp_path / "t.npz")
    np.testing.assert_array_equal(back.true_vertices, truth.true_vertices)
    np.testing.assert_array_equal(back.true_weights, truth.true_weights)
    assert back.noise_sigma == 0.25


# ---------------------------------------------------------------- episodes

def test_episode_uses_all_classes_when_forced():
    ds = generate_dataset(5, 16, n_crops=3, dim=4, seed=0)
    ep = sample_episode(ds, 5, 15, seed=1)
    assert sorted(ep.classes) == sorted(ds.class_index)
    assert isinstance(ep, EpisodeSpec)


def test_episode_structure_and_determinism():
    ds = generate_dataset(8, 10, n_crops=3, dim=4, seed=0)
    a = sample_episode(ds, 5, 4, seed=17)
    assert a == sample_episode(ds, 5, 4, seed=17)
    assert not set(a.support_ids) & set(a.query_ids)
    assert len(a.query_ids) == 20
    for label, sid in zip(a.classes, a.support_ids):
        assert ds.labels[sid] == label
        assert a.query_labels.count(label) == 4
    for qid, label in zip(a.query_ids, a.query_labels):
        assert ds.labels[qid] == label


def test_episode_class_frequencies_are_uniform():
    ds = generate_dataset(20, 3, n_crops=1, dim=2, max_objects=1, seed=0)
    index = ds.class_index
    counts = dict.fromkeys(index, 0)
    for s in range(10_000):
        for label in sample_episode(ds, 5, 2, seed=s, class_index=index).classes:
            counts[label] += 1
    freq = np.array(list(counts.values())) / 10_000
    assert np.all(np.abs(freq - 5 / 20) <= 0.02)


def test_episode_insufficient_pool():
    ds = generate_dataset(4, 16, n_crops=2, dim=3, seed=0)
    with pytest.raises(InvalidInputError, match="class sizes"):
        sample_episode(ds, 5, 15, seed=0)
