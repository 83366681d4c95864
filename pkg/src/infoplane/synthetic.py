"""Deterministic synthetic digit corpus in MNIST's on-disk layout.

Used for offline development and desk-scale tests: ten seven-segment glyph
classes, rendered 28x28 grayscale with per-sample shift, amplitude jitter and
pixel noise, written as gzipped IDX files so the normal ingestion path is
exercised end to end. Generation is a pure function of the seed.
"""

import gzip
from pathlib import Path

import numpy as np

from .data import serialize_idx_images, serialize_idx_labels

TRAIN_COUNT = 60000
TEST_COUNT = 10000
SIZE = 28
SEED = 20240817

# seven-segment encoding: (top, top-left, top-right, middle, bottom-left,
# bottom-right, bottom) per digit 0-9
_SEGMENTS = {
    0: (1, 1, 1, 0, 1, 1, 1),
    1: (0, 0, 1, 0, 0, 1, 0),
    2: (1, 0, 1, 1, 1, 0, 1),
    3: (1, 0, 1, 1, 0, 1, 1),
    4: (0, 1, 1, 1, 0, 1, 0),
    5: (1, 1, 0, 1, 0, 1, 1),
    6: (1, 1, 0, 1, 1, 1, 1),
    7: (1, 0, 1, 0, 0, 1, 0),
    8: (1, 1, 1, 1, 1, 1, 1),
    9: (1, 1, 1, 1, 0, 1, 1),
}


def _glyph(digit: int) -> np.ndarray:
    g = np.zeros((SIZE, SIZE))
    t = 3  # stroke thickness
    x0, x1 = 8, 20
    y_top, y_mid, y_bot = 5, 13, 21
    top, tl, tr, mid, bl, br, bot = _SEGMENTS[digit]
    if top:
        g[y_top : y_top + t, x0 : x1 + t] = 1.0
    if mid:
        g[y_mid : y_mid + t, x0 : x1 + t] = 1.0
    if bot:
        g[y_bot : y_bot + t, x0 : x1 + t] = 1.0
    if tl:
        g[y_top : y_mid + t, x0 : x0 + t] = 1.0
    if tr:
        g[y_top : y_mid + t, x1 : x1 + t] = 1.0
    if bl:
        g[y_mid : y_bot + t, x0 : x0 + t] = 1.0
    if br:
        g[y_mid : y_bot + t, x1 : x1 + t] = 1.0
    return g


def generate_split(count: int, seed: int):
    """Render `count` jittered glyph images; returns (images [N,28,28,1], labels)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    glyphs = np.stack([_glyph(d) for d in range(10)])
    labels = rng.integers(0, 10, size=count)
    shifts = rng.integers(-3, 4, size=(count, 2))
    amps = rng.uniform(0.65, 1.0, size=count)
    noise = rng.uniform(0.0, 0.25, size=(count, SIZE, SIZE))
    images = np.empty((count, SIZE, SIZE))
    for i in range(count):
        img = np.roll(glyphs[labels[i]], tuple(shifts[i]), axis=(0, 1)) * amps[i]
        images[i] = np.clip(img + noise[i], 0.0, 1.0)
    # quantize to the uint8 grid the IDX format stores
    images = np.rint(images * 255.0) / 255.0
    return images[..., None], labels.astype(np.int64)


def ensure_synthetic_corpus(cache_dir, train_count=TRAIN_COUNT, test_count=TEST_COUNT):
    """Write the synthetic corpus into <cache>/synthetic/ unless already present."""
    ddir = Path(cache_dir) / "synthetic"
    files = {
        "train-images-idx3-ubyte.gz": None,
        "train-labels-idx1-ubyte.gz": None,
        "t10k-images-idx3-ubyte.gz": None,
        "t10k-labels-idx1-ubyte.gz": None,
    }
    if all((ddir / f).exists() for f in files):
        return ddir
    ddir.mkdir(parents=True, exist_ok=True)
    train_images, train_labels = generate_split(train_count, SEED)
    test_images, test_labels = generate_split(test_count, SEED + 1)
    payloads = {
        "train-images-idx3-ubyte.gz": serialize_idx_images(train_images),
        "train-labels-idx1-ubyte.gz": serialize_idx_labels(train_labels),
        "t10k-images-idx3-ubyte.gz": serialize_idx_images(test_images),
        "t10k-labels-idx1-ubyte.gz": serialize_idx_labels(test_labels),
    }
    for fn, payload in payloads.items():
        # mtime=0 keeps the gzip output byte-deterministic
        (ddir / fn).write_bytes(gzip.compress(payload, mtime=0))
    return ddir
