import gzip
import struct

import numpy as np
import pytest

from infoplane.data import (
    Dataset,
    SubsampleSpec,
    fetch_dataset,
    load_dataset,
    parse_cifar10,
    parse_idx_images,
    parse_idx_labels,
    serialize_idx_images,
    serialize_idx_labels,
    subsample,
)
from infoplane.errors import (
    BadMagicError,
    ChecksumError,
    ConfigError,
    LabelRangeError,
    TruncatedDataError,
)


def image_fixture():
    header = struct.pack(">IIII", 2051, 2, 2, 2)
    payload = bytes([0, 255, 0, 255, 255, 0, 255, 0])
    return header + payload


def label_fixture():
    return struct.pack(">II", 2049, 3) + bytes([0, 5, 9])


class TestIdxImages:
    def test_hand_built_fixture(self):
        imgs = parse_idx_images(image_fixture())
        assert imgs.shape == (2, 2, 2, 1)
        assert np.array_equal(imgs[0, :, :, 0], [[0.0, 1.0], [0.0, 1.0]])
        assert np.array_equal(imgs[1, :, :, 0], [[1.0, 0.0], [1.0, 0.0]])

    def test_label_magic_rejected(self):
        with pytest.raises(BadMagicError):
            parse_idx_images(struct.pack(">IIII", 2049, 2, 2, 2) + bytes(8))

    def test_truncated_payload(self):
        with pytest.raises(TruncatedDataError):
            parse_idx_images(image_fixture()[:-1])

    def test_truncated_header(self):
        with pytest.raises(TruncatedDataError):
            parse_idx_images(b"\x00\x00\x08\x03")

    def test_gzip_transparent(self):
        imgs = parse_idx_images(gzip.compress(image_fixture()))
        assert imgs.shape == (2, 2, 2, 1)

    def test_round_trip(self):
        raw = image_fixture()
        assert serialize_idx_images(parse_idx_images(raw)) == raw


class TestIdxLabels:
    def test_hand_built_fixture(self):
        assert parse_idx_labels(label_fixture()).tolist() == [0, 5, 9]

    def test_out_of_range_label(self):
        raw = struct.pack(">II", 2049, 1) + bytes([10])
        with pytest.raises(LabelRangeError):
            parse_idx_labels(raw)

    def test_bad_magic(self):
        with pytest.raises(BadMagicError):
            parse_idx_labels(struct.pack(">II", 2051, 0))

    def test_empty_accepted_at_parse_rejected_at_dataset(self):
        empty = parse_idx_labels(struct.pack(">II", 2049, 0))
        assert empty.shape == (0,)
        with pytest.raises(ConfigError):
            Dataset(np.zeros((0, 2, 2, 1)), empty, "x", "train")

    def test_round_trip(self):
        raw = label_fixture()
        assert serialize_idx_labels(parse_idx_labels(raw)) == raw


def cifar_record(label, r, g, b):
    return bytes([label]) + bytes([r] * 1024) + bytes([g] * 1024) + bytes([b] * 1024)


class TestCifar:
    def test_white_record(self):
        ds = parse_cifar10(cifar_record(3, 255, 255, 255))
        assert np.array_equal(ds.images, np.ones((1, 32, 32, 1)))
        assert ds.labels.tolist() == [3]

    def test_channel_average(self):
        ds = parse_cifar10(cifar_record(0, 30, 60, 90))
        assert np.allclose(ds.images, 60 / 255, atol=1e-15)

    def test_two_records_shape(self):
        raw = cifar_record(1, 10, 10, 10) + cifar_record(2, 20, 20, 20)
        ds = parse_cifar10(raw)
        assert ds.images.shape == (2, 32, 32, 1)
        assert ds.labels.tolist() == [1, 2]

    def test_bad_length(self):
        with pytest.raises(TruncatedDataError):
            parse_cifar10(cifar_record(0, 1, 2, 3)[:-1])


@pytest.fixture
def small_dataset():
    rng = np.random.default_rng(0)
    images = rng.uniform(0, 1, (50, 4, 4, 1))
    labels = rng.integers(0, 10, 50)
    return Dataset(images, labels, "toy", "train")


class TestSubsample:
    def test_full_count_is_permutation(self, small_dataset):
        out = subsample(small_dataset, SubsampleSpec(50, 3))
        assert sorted(out.labels.tolist()) == sorted(small_dataset.labels.tolist())
        assert np.allclose(np.sort(out.images.sum(axis=(1, 2, 3))),
                           np.sort(small_dataset.images.sum(axis=(1, 2, 3))))

    def test_same_seed_identical(self, small_dataset):
        a = subsample(small_dataset, SubsampleSpec(20, 7))
        b = subsample(small_dataset, SubsampleSpec(20, 7))
        assert np.array_equal(a.images, b.images)
        assert np.array_equal(a.labels, b.labels)

    @pytest.mark.parametrize("seed", range(5))
    def test_without_replacement(self, small_dataset, seed):
        out = subsample(small_dataset, SubsampleSpec(30, seed))
        keys = {out.images[i].tobytes() for i in range(30)}
        assert len(keys) == 30

    def test_count_exceeds_size(self, small_dataset):
        with pytest.raises(ConfigError):
            subsample(small_dataset, SubsampleSpec(51, 0))


class TestFetch:
    def make_source(self, tmp_path, content=b"dataset-bytes"):
        src = tmp_path / "src" / "file.bin"
        src.parent.mkdir()
        src.write_bytes(content)
        return src, "file://" + str(src)

    def test_fetch_then_cache_hit_without_source(self, tmp_path):
        src, url = self.make_source(tmp_path)
        cache = tmp_path / "cache"
        p1 = fetch_dataset("toy", url, None, cache_dir=cache)
        assert p1.read_bytes() == b"dataset-bytes"
        src.unlink()  # second call must not touch the source
        p2 = fetch_dataset("toy", url, None, cache_dir=cache)
        assert p1 == p2

    def test_corrupted_cache_detected(self, tmp_path):
        src, url = self.make_source(tmp_path)
        cache = tmp_path / "cache"
        p = fetch_dataset("toy", url, None, cache_dir=cache)
        p.write_bytes(b"corrupted!")
        with pytest.raises(ChecksumError):
            fetch_dataset("toy", url, None, cache_dir=cache)

    def test_explicit_hash_mismatch_refused(self, tmp_path):
        src, url = self.make_source(tmp_path)
        with pytest.raises(ChecksumError):
            fetch_dataset("toy", url, "0" * 64, cache_dir=tmp_path / "cache")
        assert not (tmp_path / "cache" / "toy" / "file.bin").exists()

    def test_explicit_hash_match(self, tmp_path):
        import hashlib

        src, url = self.make_source(tmp_path)
        digest = hashlib.sha256(b"dataset-bytes").hexdigest()
        p = fetch_dataset("toy", url, digest, cache_dir=tmp_path / "cache")
        assert p.exists()


class TestLoadDataset:
    def test_synthetic_splits(self, cache_dir):
        train = load_dataset("synthetic", "train", cache_dir=cache_dir)
        test = load_dataset("synthetic", "test", cache_dir=cache_dir)
        assert len(train) == 60000 and len(test) == 10000
        assert train.images.shape[1:] == (28, 28, 1)
        assert 0 <= train.labels.min() and train.labels.max() <= 9
        assert train.images.min() >= 0.0 and train.images.max() <= 1.0

    def test_unknown_dataset(self, tmp_path):
        with pytest.raises(ConfigError):
            load_dataset("nope", "train", cache_dir=tmp_path)
