"""Dataset ingestion: IDX and CIFAR-10 binary parsing, subsampling, and a
checksum-verified download cache.

Pixel values are normalized to [0,1] by dividing by 255. CIFAR-10 images are
reduced to a single channel by averaging R, G and B before normalization.
"""

import gzip
import hashlib
import os
import struct
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ChecksumError,
    ConfigError,
    FetchError,
    LabelRangeError,
    TruncatedDataError,
)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073  # 1 label byte + 3 * 32 * 32 pixels

CACHE_ENV_VAR = "INFOPLANE_CACHE_DIR"

# Official distribution files. Checksums are pinned on first successful
# download (stored next to the file) and verified on every later use.
DATASET_FILES = {
    "mnist": {
        "base": "https://ossci-datasets.s3.amazonaws.com/mnist/",
        "files": [
            "train-images-idx3-ubyte.gz",
            "train-labels-idx1-ubyte.gz",
            "t10k-images-idx3-ubyte.gz",
            "t10k-labels-idx1-ubyte.gz",
        ],
        "format": "idx",
    },
    "fashion-mnist": {
        "base": "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",
        "files": [
            "train-images-idx3-ubyte.gz",
            "train-labels-idx1-ubyte.gz",
            "t10k-images-idx3-ubyte.gz",
            "t10k-labels-idx1-ubyte.gz",
        ],
        "format": "idx",
    },
    "cifar10": {
        "base": "https://www.cs.toronto.edu/~kriz/",
        "files": ["cifar-10-binary.tar.gz"],
        "format": "cifar",
    },
}


@dataclass
class Dataset:
    images: np.ndarray  # [N,H,W,1], float64 in [0,1]
    labels: np.ndarray  # [N], integers in [0, class_count)
    name: str
    split: str  # train | test
    class_count: int = 10

    def __post_init__(self):
        n = self.images.shape[0]
        if n == 0:
            raise ConfigError("dataset must be nonempty")
        if self.labels.shape != (n,):
            raise ConfigError(f"labels count {self.labels.shape} != image count {n}")
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise LabelRangeError(
                f"labels must lie in [0, {self.class_count}), got "
                f"[{self.labels.min()}, {self.labels.max()}]"
            )
        lo, hi = self.images.min(), self.images.max()
        if lo < 0.0 or hi > 1.0:
            raise ConfigError(f"pixel values outside [0,1]: [{lo}, {hi}]")

    def __len__(self):
        return self.images.shape[0]


@dataclass(frozen=True)
class SubsampleSpec:
    count: int
    seed: int


def _maybe_gunzip(raw: bytes) -> bytes:
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def parse_idx_images(raw: bytes) -> np.ndarray:
    """Parse big-endian IDX image bytes into a [N,H,W,1] array scaled to [0,1]."""
    raw = _maybe_gunzip(raw)
    if len(raw) < 16:
        raise TruncatedDataError(f"IDX image header needs 16 bytes, got {len(raw)}")
    magic, n, h, w = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise BadMagicError(f"expected image magic {IDX_IMAGE_MAGIC}, got {magic}")
    expected = 16 + n * h * w
    if len(raw) < expected:
        raise TruncatedDataError(f"IDX image payload needs {expected} bytes, got {len(raw)}")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=n * h * w, offset=16)
    return pixels.reshape(n, h, w, 1).astype(np.float64) / 255.0


def parse_idx_labels(raw: bytes, class_count: int = 10) -> np.ndarray:
    """Parse big-endian IDX label bytes into an integer vector."""
    raw = _maybe_gunzip(raw)
    if len(raw) < 8:
        raise TruncatedDataError(f"IDX label header needs 8 bytes, got {len(raw)}")
    magic, n = struct.unpack(">II", raw[:8])
    if magic != IDX_LABEL_MAGIC:
        raise BadMagicError(f"expected label magic {IDX_LABEL_MAGIC}, got {magic}")
    if len(raw) < 8 + n:
        raise TruncatedDataError(f"IDX label payload needs {8 + n} bytes, got {len(raw)}")
    labels = np.frombuffer(raw, dtype=np.uint8, count=n, offset=8).astype(np.int64)
    if n and labels.max() >= class_count:
        raise LabelRangeError(f"label {labels.max()} >= class_count {class_count}")
    return labels


def serialize_idx_images(images: np.ndarray) -> bytes:
    """Inverse of parse_idx_images for images whose values are multiples of 1/255."""
    n, h, w, _ = images.shape
    header = struct.pack(">IIII", IDX_IMAGE_MAGIC, n, h, w)
    pixels = np.rint(images * 255.0).astype(np.uint8)
    return header + pixels.tobytes()


def serialize_idx_labels(labels: np.ndarray) -> bytes:
    header = struct.pack(">II", IDX_LABEL_MAGIC, len(labels))
    return header + np.asarray(labels, dtype=np.uint8).tobytes()


def parse_cifar10(raw: bytes, name: str = "cifar10", split: str = "train") -> Dataset:
    """Parse CIFAR-10 binary records into a channel-averaged grayscale Dataset."""
    if len(raw) % CIFAR_RECORD_BYTES != 0:
        raise TruncatedDataError(
            f"CIFAR-10 payload length {len(raw)} is not a multiple of {CIFAR_RECORD_BYTES}"
        )
    n = len(raw) // CIFAR_RECORD_BYTES
    records = np.frombuffer(raw, dtype=np.uint8).reshape(n, CIFAR_RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    planes = records[:, 1:].reshape(n, 3, 32, 32).astype(np.float64)
    gray = planes.mean(axis=1) / 255.0
    return Dataset(gray[..., None], labels, name=name, split=split)


def subsample(dataset: Dataset, spec: SubsampleSpec) -> Dataset:
    """Uniform sample without replacement, deterministic per seed."""
    n = len(dataset)
    if spec.count > n:
        raise ConfigError(f"subsample count {spec.count} exceeds dataset size {n}")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    idx = rng.choice(n, size=spec.count, replace=False)
    return Dataset(
        dataset.images[idx], dataset.labels[idx], dataset.name, dataset.split,
        dataset.class_count,
    )


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "infoplane"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fetch_dataset(name: str, url: str, expected_sha256, cache_dir=None) -> Path:
    """Download one distribution file into <cache>/<name>/<filename>.

    A cached file is reused without network access when its hash matches.
    With expected_sha256=None the hash is pinned on first download (written to
    <filename>.sha256) and enforced afterwards. Returns the local path.
    """
    cache_dir = Path(cache_dir) if cache_dir else default_cache_dir()
    target_dir = cache_dir / name
    target_dir.mkdir(parents=True, exist_ok=True)
    filename = url.rstrip("/").rsplit("/", 1)[-1]
    target = target_dir / filename
    pin_file = target_dir / (filename + ".sha256")

    expected = expected_sha256
    if expected is None and pin_file.exists():
        expected = pin_file.read_text().strip()

    if target.exists():
        actual = _sha256(target)
        if expected is None:
            pin_file.write_text(actual + "\n")
            return target
        if actual != expected:
            raise ChecksumError(
                f"{target} sha256 {actual} does not match expected {expected}"
            )
        return target

    lock = target_dir / (filename + ".lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise FetchError(f"another download of {filename} is in progress ({lock})")
    try:
        tmp = target_dir / (filename + ".part")
        try:
            with urllib.request.urlopen(url, timeout=60) as resp, open(tmp, "wb") as out:
                while True:
                    chunk = resp.read(1 << 20)
                    if not chunk:
                        break
                    out.write(chunk)
        except OSError as exc:
            if tmp.exists():
                tmp.unlink()
            raise FetchError(f"failed to download {url}: {exc}")
        actual = _sha256(tmp)
        if expected is not None and actual != expected:
            tmp.unlink()
            raise ChecksumError(f"{url} sha256 {actual} does not match expected {expected}")
        tmp.replace(target)
        if expected is None:
            pin_file.write_text(actual + "\n")
        return target
    finally:
        os.close(fd)
        lock.unlink()


def fetch_all(name: str, cache_dir=None):
    """Fetch every distribution file of a known dataset; returns local paths."""
    if name not in DATASET_FILES:
        raise ConfigError(f"unknown dataset {name!r}; known: {sorted(DATASET_FILES)}")
    entry = DATASET_FILES[name]
    return [
        fetch_dataset(name, entry["base"] + fn, None, cache_dir=cache_dir)
        for fn in entry["files"]
    ]


def _load_idx_pair(img_path: Path, lbl_path: Path, name: str, split: str) -> Dataset:
    images = parse_idx_images(img_path.read_bytes())
    labels = parse_idx_labels(lbl_path.read_bytes())
    return Dataset(images, labels, name=name, split=split)


def load_dataset(name: str, split: str, cache_dir=None) -> Dataset:
    """Load a cached dataset split. Synthetic corpora are generated on demand."""
    cache_dir = Path(cache_dir) if cache_dir else default_cache_dir()
    if name == "synthetic":
        from .synthetic import ensure_synthetic_corpus

        ensure_synthetic_corpus(cache_dir)
    ddir = cache_dir / name
    if name in ("mnist", "fashion-mnist", "synthetic"):
        prefix = "train" if split == "train" else "t10k"
        img = _first_existing(ddir, f"{prefix}-images-idx3-ubyte")
        lbl = _first_existing(ddir, f"{prefix}-labels-idx1-ubyte")
        return _load_idx_pair(img, lbl, name, split)
    if name == "cifar10":
        return _load_cifar_split(ddir, split)
    raise ConfigError(f"unknown dataset {name!r}")


def _first_existing(ddir: Path, stem: str) -> Path:
    for suffix in ("", ".gz"):
        p = ddir / (stem + suffix)
        if p.exists():
            return p
    raise FetchError(f"dataset file {stem} not found in {ddir}; run fetch first")


def _load_cifar_split(ddir: Path, split: str) -> Dataset:
    import tarfile

    archive = ddir / "cifar-10-binary.tar.gz"
    if split == "train":
        members = [f"cifar-10-batches-bin/data_batch_{i}.bin" for i in range(1, 6)]
    else:
        members = ["cifar-10-batches-bin/test_batch.bin"]
    if archive.exists():
        raws = []
        with tarfile.open(archive, "r:gz") as tf:
            for m in members:
                raws.append(tf.extractfile(m).read())
        raw = b"".join(raws)
    else:
        paths = [ddir / m.rsplit("/", 1)[-1] for m in members]
        missing = [p for p in paths if not p.exists()]
        if missing:
            raise FetchError(f"CIFAR-10 files not found in {ddir}; run fetch first")
        raw = b"".join(p.read_bytes() for p in paths)
    return parse_cifar10(raw, name="cifar10", split=split)
