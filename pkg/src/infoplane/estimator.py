"""Binned mutual-information estimation over layer activations.

Per sample, a layer's activation tensor is flattened channel-by-channel into
one vector h, quantized to integer bins floor(h / bin_size), and reduced to a
128-bit fingerprint. Entropies are plug-in estimates over the empirical
fingerprint frequencies, in bits. Because the network is deterministic,
I(X;T) = H(T); I(T;Y) = H(T) - sum_y p(y) H(T | Y=y).
"""

import hashlib
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimatorError

FINGERPRINT_BYTES = 16


@dataclass(frozen=True)
class EstimatorConfig:
    bin_size: float = 0.67
    # retain exact bin vectors to check fingerprint injectivity; only viable
    # for runs with at most ~1e4 samples
    verify_injectivity: bool = False

    def __post_init__(self):
        if self.bin_size <= 0:
            raise EstimatorError(f"bin_size must be positive, got {self.bin_size}")


@dataclass
class EpochMIRecord:
    epoch: int
    layer: int
    split: str  # train | test
    i_xt_bits: float
    i_ty_bits: float
    distinct_codes: int
    sample_count: int


@dataclass
class DPIViolation:
    quantity: str  # i_xt | i_ty
    from_layer: int
    to_layer: int
    increase: float


def bin_activations(h, bin_size):
    """Quantize a flat activation vector: element i -> floor(h_i / bin_size)."""
    h = np.asarray(h, dtype=np.float64)
    if not np.isfinite(h).all():
        raise EstimatorError("non-finite activation value")
    return np.floor(h / bin_size).astype(np.int64)


def flatten_layer(tensor):
    """Flatten a traced layer output to per-sample vectors [N, D].

    Image outputs [N,H,W,C] are rearranged so each channel's pixels form a
    contiguous run (channel 0's image first, then channel 1's, ...); dense
    outputs [N,U] pass through.
    """
    t = np.asarray(tensor)
    if t.ndim == 2:
        return t
    if t.ndim == 4:
        n, h, w, c = t.shape
        return t.transpose(0, 3, 1, 2).reshape(n, c * h * w)
    raise EstimatorError(f"cannot flatten a {t.ndim}-d trace entry")


def fingerprint_bins(bins) -> bytes:
    """128-bit collision-resistant digest of one sample's bin-index vector."""
    arr = np.ascontiguousarray(bins, dtype=np.int64)
    return hashlib.blake2b(arr.tobytes(), digest_size=FINGERPRINT_BYTES).digest()


def fingerprint_samples(flat, bin_size, context=""):
    """Bin and fingerprint each row of a [N, D] activation matrix."""
    flat = np.asarray(flat, dtype=np.float64)
    if not np.isfinite(flat).all():
        raise EstimatorError(f"non-finite activation {context}".strip())
    bins = np.floor(flat / bin_size).astype(np.int64)
    return [
        hashlib.blake2b(bins[i].tobytes(), digest_size=FINGERPRINT_BYTES).digest()
        for i in range(bins.shape[0])
    ], bins


def _entropy_from_counts(counts, n) -> float:
    """H = log2 n - (1/n) sum c log2 c; exact log2 n when all counts are 1."""
    counts = np.asarray(counts, dtype=np.float64)
    if n <= 0:
        raise EstimatorError("entropy of an empty code multiset is undefined")
    if len(counts) == 1:
        return 0.0  # avoids the c*log2(c)/n rounding residue when c == n
    # clamp the floating-point cancellation residue on near-constant multisets
    return max(0.0, float(np.log2(n) - (counts * np.log2(counts)).sum() / n))


def plug_in_entropy(codes) -> float:
    """Plug-in entropy (bits) of a multiset of codes."""
    counter = Counter(codes)
    n = sum(counter.values())
    if n == 0:
        raise EstimatorError("entropy of an empty code multiset is undefined")
    return _entropy_from_counts(list(counter.values()), n)


def mi_x_t(codes) -> float:
    """I(X;T) = H(T): the map X -> T is deterministic, so H(T|X) = 0."""
    return plug_in_entropy(codes)


def mi_t_y(codes, labels, label_counts=None) -> float:
    """I(T;Y) = H(T) - sum_y p(y) H(T | Y=y), clamped to >= 0."""
    codes = list(codes)
    labels = np.asarray(labels)
    if len(codes) != len(labels):
        raise EstimatorError(
            f"codes ({len(codes)}) and labels ({len(labels)}) length mismatch"
        )
    n = len(codes)
    h_t = plug_in_entropy(codes)
    cond = 0.0
    for y in np.unique(labels):
        idx = np.nonzero(labels == y)[0]
        cond += (len(idx) / n) * plug_in_entropy([codes[i] for i in idx])
    return max(0.0, h_t - cond)


class MIAccumulator:
    """Streaming per-layer MI measurement over a fixed-order evaluation split.

    Activations are binned and fingerprinted chunk by chunk; only the 16-byte
    codes (and labels) are retained, never the float activations.
    """

    def __init__(self, layer_count, config: EstimatorConfig, epoch=None, split=None):
        self.config = config
        self.epoch = epoch
        self.split = split
        self._codes = [[] for _ in range(layer_count)]
        self._labels = []
        self._exact = [{} for _ in range(layer_count)] if config.verify_injectivity else None

    def update(self, trace, labels):
        if len(trace) != len(self._codes):
            raise EstimatorError(
                f"trace has {len(trace)} layers, accumulator expects {len(self._codes)}"
            )
        self._labels.extend(int(v) for v in labels)
        for li, tensor in enumerate(trace):
            ctx = f"(layer {li}, epoch {self.epoch}, split {self.split})"
            codes, bins = fingerprint_samples(
                flatten_layer(tensor), self.config.bin_size, context=ctx
            )
            self._codes[li].extend(codes)
            if self._exact is not None and len(self._labels) <= 10_000:
                seen = self._exact[li]
                for code, row in zip(codes, bins):
                    key = row.tobytes()
                    prev = seen.setdefault(code, key)
                    if prev != key:
                        raise EstimatorError(
                            f"fingerprint collision between distinct bin vectors {ctx}"
                        )

    def records(self):
        out = []
        for li, codes in enumerate(self._codes):
            out.append(
                EpochMIRecord(
                    epoch=self.epoch if self.epoch is not None else -1,
                    layer=li,
                    split=self.split or "",
                    i_xt_bits=mi_x_t(codes),
                    i_ty_bits=mi_t_y(codes, self._labels),
                    distinct_codes=len(set(codes)),
                    sample_count=len(codes),
                )
            )
        return out


def measure_layers(trace, labels, config: EstimatorConfig, epoch=None, split=None):
    """One EpochMIRecord per traced layer for a full evaluation split."""
    acc = MIAccumulator(len(trace), config, epoch=epoch, split=split)
    acc.update(trace, labels)
    return acc.records()


def input_entropy_bits(images) -> tuple:
    """H(X) over raw input images: log2 N when all images are distinct.

    Returns (entropy_bits, distinct_count). Distinctness is over the exact
    pixel arrays, matching the treatment of each image as one symbol.
    """
    n = images.shape[0]
    codes = [
        hashlib.blake2b(
            np.ascontiguousarray(images[i]).tobytes(), digest_size=FINGERPRINT_BYTES
        ).digest()
        for i in range(n)
    ]
    return plug_in_entropy(codes), len(set(codes))


def dpi_diagnostic(records, tolerance=1e-6):
    """Report adjacent-layer MI increases beyond tolerance; diagnostic only.

    The input records must belong to one (epoch, split) pair, ordered by layer.
    Independent per-layer binning means empirical violations can occur even
    though the underlying chain obeys the inequality.
    """
    violations = []
    for prev, cur in zip(records, records[1:]):
        if cur.i_xt_bits > prev.i_xt_bits + tolerance:
            violations.append(
                DPIViolation("i_xt", prev.layer, cur.layer, cur.i_xt_bits - prev.i_xt_bits)
            )
        if cur.i_ty_bits > prev.i_ty_bits + tolerance:
            violations.append(
                DPIViolation("i_ty", prev.layer, cur.layer, cur.i_ty_bits - prev.i_ty_bits)
            )
    return violations
