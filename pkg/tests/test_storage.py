import math
import struct

import numpy as np
import pytest

from frameseek import (CodebookSet, FrameGeometry, LocalRecord,
                       binary_centers_train, build_global_index,
                       build_local_index, encode_frame_local, gmm_train,
                       make_signature, pca_fit, pq_train)
from frameseek.bits import pack_bits
from frameseek.global_index import GlobalSignature
from frameseek import storage
from frameseek.storage import (FileFormatError, read_codebooks,
                               read_global_features, read_global_index,
                               read_ground_truth, read_local_descriptors,
                               read_local_index, read_run, write_codebooks,
                               write_global_features, write_global_index,
                               write_ground_truth, write_local_descriptors,
                               write_local_index, write_run)


@pytest.fixture(scope="module")
def books(small_bow, small_pq):
    gen = np.random.default_rng(110)
    pca = pca_fit(gen.normal(size=(100, 12)), d_out=4)
    gmm = gmm_train(gen.normal(size=(200, 4)), 2, iters=15, seed=110)
    centers = binary_centers_train(pack_bits(gen.integers(0, 2, size=(100, 8)).astype(np.uint8)),
                                   8, k=4, iters=10, seed=110)
    return CodebookSet(bow=small_bow, pq=small_pq, pca=pca, gmm=gmm,
                       binary_centers=centers)


def random_frames(gen, n_frames=4, keypoints=6):
    frames = []
    for fid in range(n_frames):
        records = [
            LocalRecord(frame_id=fid, video_id=fid // 2,
                        x=float(gen.uniform(0, 1280)), y=float(gen.uniform(0, 720)),
                        theta=float(gen.uniform(-math.pi, math.pi)),
                        log_scale=float(gen.uniform(0, 4)),
                        descriptor=gen.normal(size=128).astype(np.float32))
            for _ in range(keypoints)
        ]
        frames.append((fid, fid // 2, records))
    return frames


# --- codebook bundle ------------------------------------------------------

def test_codebooks_roundtrip_byte_identical(books, tmp_path):
    p1, p2 = tmp_path / "a.i2vc", tmp_path / "b.i2vc"
    write_codebooks(books, p1)
    loaded = read_codebooks(p1)
    write_codebooks(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()
    np.testing.assert_array_equal(loaded.bow.centers, books.bow.centers)
    np.testing.assert_array_equal(loaded.binary_centers.centers,
                                  books.binary_centers.centers)
    assert loaded.pq.n_centers == books.pq.n_centers


def test_codebooks_magic_and_version():
    assert storage.MAGIC_CODEBOOK == b"I2VC"
    assert storage.FORMAT_VERSION == 1


def test_codebooks_bad_magic(tmp_path, books):
    p = tmp_path / "bad.i2vc"
    write_codebooks(books, p)
    data = bytearray(p.read_bytes())
    data[:4] = b"NOPE"
    p.write_bytes(bytes(data))
    with pytest.raises(FileFormatError, match="bad magic"):
        read_codebooks(p)


def test_codebooks_version_mismatch_names_both(tmp_path, books):
    p = tmp_path / "future.i2vc"
    write_codebooks(books, p)
    data = bytearray(p.read_bytes())
    data[4:6] = struct.pack("<H", 9)
    p.write_bytes(bytes(data))
    with pytest.raises(FileFormatError, match="version 9.*version 1"):
        read_codebooks(p)


def test_codebooks_truncated(tmp_path, books):
    p = tmp_path / "cut.i2vc"
    write_codebooks(books, p)
    p.write_bytes(p.read_bytes()[:50])
    with pytest.raises(FileFormatError, match="truncated"):
        read_codebooks(p)


# --- descriptor files ---------------------------------------------------------

def test_local_descriptors_roundtrip(tmp_path):
    gen = np.random.default_rng(111)
    frames = random_frames(gen)
    p1, p2 = tmp_path / "a.ldsc", tmp_path / "b.ldsc"
    write_local_descriptors(frames, p1)
    loaded = read_local_descriptors(p1)
    write_local_descriptors(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert len(loaded) == len(frames)
    got = loaded[2][2][3]
    want = frames[2][2][3]
    assert got.frame_id == want.frame_id and got.video_id == want.video_id
    np.testing.assert_allclose(got.x, want.x, rtol=1e-6)
    np.testing.assert_array_equal(got.descriptor, want.descriptor)


def test_local_descriptors_text_variant(tmp_path):
    desc = " ".join(str(i % 7) for i in range(128))
    lines = [f"3 1 100.5 200.25 0.5 1.5 {desc}", f"3 1 50.0 60.0 -0.25 2.0 {desc}"]
    p = tmp_path / "frames.txt"
    p.write_text("\n".join(lines) + "\n")
    frames = read_local_descriptors(p)
    assert len(frames) == 1
    fid, vid, records = frames[0]
    assert (fid, vid, len(records)) == (3, 1, 2)
    assert records[0].x == 100.5 and records[1].theta == -0.25
    assert records[0].descriptor.shape == (128,)


def test_local_descriptors_text_bad_column_count(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("3 1 0.0 0.0 0.0 0.0 1.0 2.0\n")
    with pytest.raises(FileFormatError, match="expected 134 fields"):
        read_local_descriptors(p)


def test_global_features_roundtrip(tmp_path):
    gen = np.random.default_rng(112)
    frames = [(i, i // 2, gen.normal(size=(5, 384)).astype(np.float32)) for i in range(4)]
    p1, p2 = tmp_path / "a.gdsc", tmp_path / "b.gdsc"
    write_global_features(frames, p1)
    loaded = read_global_features(p1)
    write_global_features(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()
    np.testing.assert_array_equal(loaded[3][2], frames[3][2])


def test_global_features_dimension_enforced(tmp_path):
    with pytest.raises(FileFormatError, match="expected 384"):
        write_global_features([(0, 0, np.zeros((2, 100), dtype=np.float32))],
                              tmp_path / "x.gdsc")


# --- indices ----------------------------------------------------------------------

def test_local_index_roundtrip_and_rebuild_identical(small_bow, small_pq, tmp_path):
    gen = np.random.default_rng(113)
    frames = random_frames(gen, n_frames=6, keypoints=8)
    geometry = FrameGeometry()

    def build():
        postings = []
        for _, _, records in frames:
            recs32 = [LocalRecord(r.frame_id, r.video_id, r.x, r.y, r.theta,
                                  r.log_scale, r.descriptor[:32]) for r in records]
            postings.extend(encode_frame_local(recs32, small_bow, small_pq, geometry))
        return build_local_index(postings, {f: v for f, v, _ in frames},
                                 n_words=small_bow.k, m=small_pq.m,
                                 n_pq_centers=small_pq.n_centers,
                                 prune_fraction=0.1, geometry=geometry)

    p1, p2, p3 = (tmp_path / n for n in ("a.lidx", "b.lidx", "c.lidx"))
    index = build()
    write_local_index(index, p1)
    write_local_index(build(), p2)
    assert p1.read_bytes() == p2.read_bytes()  # rebuild determinism

    loaded = read_local_index(p1)
    write_local_index(loaded, p3)
    assert p1.read_bytes() == p3.read_bytes()  # read/write round-trip
    assert loaded.n_frames == index.n_frames
    assert loaded.frame_to_video == index.frame_to_video
    np.testing.assert_array_equal(loaded.stop_mask, index.stop_mask)
    np.testing.assert_array_equal(loaded.idf, index.idf)
    for word in index.postings:
        for key in index.postings[word]:
            np.testing.assert_array_equal(loaded.postings[word][key],
                                          index.postings[word][key])


def test_global_index_roundtrip(tmp_path):
    gen = np.random.default_rng(114)
    centers = binary_centers_train(pack_bits(gen.integers(0, 2, size=(60, 48)).astype(np.uint8)),
                                   48, k=4, iters=10, seed=114)
    sigs = [GlobalSignature(frame_id=i, video_id=i % 3,
                            bits=pack_bits(gen.integers(0, 2, size=48).astype(np.uint8)),
                            n_bits=48) for i in range(20)]
    index = build_global_index(sigs, centers, n_gmm_components=6)
    p1, p2 = tmp_path / "a.gidx", tmp_path / "b.gidx"
    write_global_index(index, p1)
    loaded = read_global_index(p1)
    write_global_index(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert loaded.n_bits == 48 and loaded.n_gmm_components == 6
    for a, b in zip(loaded.clusters, index.clusters):
        np.testing.assert_array_equal(a["codes"], b["codes"])


# --- run files and ground truth -----------------------------------------------------

def test_run_file_roundtrip(tmp_path):
    runs = {2: [(10, 0.9), (11, 0.5)], 1: [(20, 0.75)]}
    p = tmp_path / "a.run"
    write_run(runs, p)
    assert p.read_text().splitlines()[0] == "1\t20\t1\t0.750000"
    assert read_run(p) == {1: [(20, 0.75)], 2: [(10, 0.9), (11, 0.5)]}


def test_run_file_rejects_duplicates(tmp_path):
    p = tmp_path / "dup.run"
    p.write_text("1\t10\t1\t0.900000\n1\t10\t2\t0.500000\n")
    with pytest.raises(FileFormatError, match="duplicate"):
        read_run(p)


def test_run_file_rejects_rank_gap(tmp_path):
    p = tmp_path / "gap.run"
    p.write_text("1\t10\t1\t0.900000\n1\t11\t3\t0.500000\n")
    with pytest.raises(FileFormatError, match="contiguity"):
        read_run(p)


def test_run_file_rejects_increasing_scores(tmp_path):
    p = tmp_path / "inc.run"
    p.write_text("1\t10\t1\t0.300000\n1\t11\t2\t0.500000\n")
    with pytest.raises(FileFormatError, match="increase"):
        read_run(p)


def test_ground_truth_roundtrip(tmp_path):
    gt = {5: {1, 2}, 3: {9}}
    p = tmp_path / "gt.tsv"
    write_ground_truth(gt, p)
    assert read_ground_truth(p) == gt
    assert p.read_text() == "3\t9\n5\t1\n5\t2\n"
