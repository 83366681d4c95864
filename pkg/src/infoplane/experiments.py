"""Experiment configs, the training/measurement orchestrator, and run persistence.

A run trains one network with Adam and cross-entropy on shuffled mini-batches
and, at scheduled epochs, measures per-layer mutual information over the full
train and test splits in fixed sample order. Everything is deterministic given
the config (including run_seed).
"""

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import data as data_mod
from .errors import ConfigError, SchemaVersionError, TrainingDivergedError
from .estimator import (
    EstimatorConfig,
    MIAccumulator,
    dpi_diagnostic,
    input_entropy_bits,
)
from .network import LayerSpec, NetworkSpec, forward, forward_with_trace, init_params, backward
from .optim import AdamState, adam_step
from .layers import cross_entropy_loss

SCHEMA_VERSION = 1

# split sizes, batching and schedule presets; "paper" is the full-scale setup,
# "desk" a reduced one that keeps the qualitative behavior but runs in minutes
PROFILES = {
    "desk": {
        "train_count": 1000,
        "test_count": 1000,
        "batch_size": 100,
        "total_epochs": 150,
        "measurement_points": 30,
    },
    "paper": {
        "train_count": 10000,
        "test_count": 10000,
        "batch_size": 1000,
        "total_epochs": 2000,
        "measurement_points": 40,
    },
}
# CIFAR-10 full-scale runs train on the whole 50k training split
CIFAR_PAPER_TRAIN_COUNT = 50000


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    train_count: int
    test_count: int
    seed: int = 0


@dataclass(frozen=True)
class ArchitectureConfig:
    conv_widths: tuple
    kernel_sizes: tuple
    pooling: tuple = ()  # ((after_conv_index, pool_size), ...)
    fc_widths: tuple = (10,)

    def __post_init__(self):
        if len(self.conv_widths) != len(self.kernel_sizes):
            raise ConfigError(
                "architecture.conv_widths and architecture.kernel_sizes must have "
                f"equal length, got {len(self.conv_widths)} and {len(self.kernel_sizes)}"
            )
        for after, pool in self.pooling:
            if not (0 <= after < len(self.conv_widths)):
                raise ConfigError(f"architecture.pooling after-layer {after} out of range")
            if pool < 2:
                raise ConfigError(f"architecture.pooling size {pool} must be >= 2")


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-3
    batch_size: int = 1000

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("optimizer.learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("optimizer.batch_size must be >= 1")


@dataclass(frozen=True)
class ScheduleConfig:
    total_epochs: int
    measurement_epochs: tuple

    def __post_init__(self):
        eps = self.measurement_epochs
        if not eps:
            raise ConfigError("schedule.measurement_epochs must be nonempty")
        if list(eps) != sorted(set(eps)):
            raise ConfigError("schedule.measurement_epochs must be strictly increasing")
        if eps[0] < 1 or eps[-1] > self.total_epochs:
            raise ConfigError(
                "schedule.measurement_epochs must lie within [1, total_epochs]"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    architecture: ArchitectureConfig
    optimizer: OptimizerConfig
    schedule: ScheduleConfig
    bin_size: float = 0.67
    run_seed: int = 0
    class_count: int = 10

    def __post_init__(self):
        if self.bin_size <= 0:
            raise ConfigError("estimator.bin_size must be positive")
        if self.architecture.fc_widths[-1] != self.class_count:
            raise ConfigError(
                f"architecture.fc_widths must end in class_count ({self.class_count})"
            )


def measurement_schedule(total_epochs: int, points: int):
    """Geometrically spaced measurement epochs including 1 and total_epochs."""
    if points < 2:
        raise ConfigError(f"schedule needs points >= 2, got {points}")
    if total_epochs <= points:
        # a denser request than the run is long collapses to every epoch
        return tuple(range(1, total_epochs + 1))
    raw = np.geomspace(1, total_epochs, points)
    eps = sorted({int(round(e)) for e in raw} | {1, total_epochs})
    return tuple(eps)


def build_network(config: ExperimentConfig, input_shape) -> NetworkSpec:
    """Conv stack (tanh) with pooling insertions, flatten, FC stack, softmax out."""
    arch = config.architecture
    pool_after = dict(arch.pooling)
    specs = []
    for i, (width, kernel) in enumerate(zip(arch.conv_widths, arch.kernel_sizes)):
        specs.append(LayerSpec("conv", width=width, kernel=kernel, activation="tanh"))
        if i in pool_after:
            specs.append(LayerSpec("maxpool", pool=pool_after[i]))
    specs.append(LayerSpec("flatten"))
    for width in arch.fc_widths[:-1]:
        specs.append(LayerSpec("dense", width=width, activation="tanh"))
    specs.append(LayerSpec("dense", width=arch.fc_widths[-1], activation="softmax"))
    return NetworkSpec(tuple(specs), tuple(input_shape), config.class_count)


# ---------------------------------------------------------------------------
# config (de)serialization; unknown keys are rejected with their key path
# ---------------------------------------------------------------------------

def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "dataset": {
            "name": config.dataset.name,
            "train_count": config.dataset.train_count,
            "test_count": config.dataset.test_count,
            "seed": config.dataset.seed,
        },
        "architecture": {
            "conv_widths": list(config.architecture.conv_widths),
            "kernel_sizes": list(config.architecture.kernel_sizes),
            "pooling": [list(p) for p in config.architecture.pooling],
            "fc_widths": list(config.architecture.fc_widths),
        },
        "optimizer": {
            "learning_rate": config.optimizer.learning_rate,
            "batch_size": config.optimizer.batch_size,
        },
        "schedule": {
            "total_epochs": config.schedule.total_epochs,
            "measurement_epochs": list(config.schedule.measurement_epochs),
        },
        "estimator": {"bin_size": config.bin_size},
        "run_seed": config.run_seed,
    }


def _take(d: dict, path: str, keys):
    extra = set(d) - set(keys)
    if extra:
        raise ConfigError(f"unknown key {path}.{sorted(extra)[0]}")
    missing = [k for k in keys if k not in d]
    if missing:
        raise ConfigError(f"missing key {path}.{missing[0]}")


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    _take(doc, "config", ["schema_version", "dataset", "architecture", "optimizer",
                          "schedule", "estimator", "run_seed"])
    if doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"config schema_version {doc['schema_version']} unsupported "
            f"(this code reads {SCHEMA_VERSION})"
        )
    ds = doc["dataset"]
    _take(ds, "dataset", ["name", "train_count", "test_count", "seed"])
    ar = doc["architecture"]
    _take(ar, "architecture", ["conv_widths", "kernel_sizes", "pooling", "fc_widths"])
    op = doc["optimizer"]
    _take(op, "optimizer", ["learning_rate", "batch_size"])
    sc = doc["schedule"]
    _take(sc, "schedule", ["total_epochs", "measurement_epochs"])
    est = doc["estimator"]
    _take(est, "estimator", ["bin_size"])
    if not (isinstance(est["bin_size"], (int, float)) and est["bin_size"] > 0):
        raise ConfigError("estimator.bin_size must be a positive number")
    return ExperimentConfig(
        dataset=DatasetConfig(ds["name"], ds["train_count"], ds["test_count"], ds["seed"]),
        architecture=ArchitectureConfig(
            tuple(ar["conv_widths"]),
            tuple(ar["kernel_sizes"]),
            tuple(tuple(p) for p in ar["pooling"]),
            tuple(ar["fc_widths"]),
        ),
        optimizer=OptimizerConfig(op["learning_rate"], op["batch_size"]),
        schedule=ScheduleConfig(sc["total_epochs"], tuple(sc["measurement_epochs"])),
        bin_size=float(est["bin_size"]),
        run_seed=doc["run_seed"],
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        return config_from_dict(json.load(f))


def save_config(config: ExperimentConfig, path):
    with open(path, "w") as f:
        json.dump(config_to_dict(config), f, indent=2, sort_keys=True)
        f.write("\n")


def run_id_for(config: ExperimentConfig) -> str:
    blob = json.dumps(config_to_dict(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def make_config(
    dataset="synthetic",
    profile="desk",
    conv_widths=(6, 6, 6),
    kernel_sizes=None,
    pooling=(),
    fc_widths=(10,),
    bin_size=0.67,
    run_seed=0,
    dataset_seed=0,
    total_epochs=None,
    measurement_points=None,
    learning_rate=1e-3,
) -> ExperimentConfig:
    """Convenience constructor applying a profile's split/batch/schedule defaults."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; known: {sorted(PROFILES)}")
    prof = PROFILES[profile]
    if kernel_sizes is None:
        kernel_sizes = tuple(3 for _ in conv_widths)
    train_count = prof["train_count"]
    if profile == "paper" and dataset == "cifar10":
        train_count = CIFAR_PAPER_TRAIN_COUNT
    epochs = total_epochs if total_epochs is not None else prof["total_epochs"]
    points = measurement_points if measurement_points is not None else prof["measurement_points"]
    return ExperimentConfig(
        dataset=DatasetConfig(dataset, train_count, prof["test_count"], dataset_seed),
        architecture=ArchitectureConfig(
            tuple(conv_widths), tuple(kernel_sizes), tuple(pooling), tuple(fc_widths)
        ),
        optimizer=OptimizerConfig(learning_rate, prof["batch_size"]),
        schedule=ScheduleConfig(epochs, measurement_schedule(epochs, points)),
        bin_size=bin_size,
        run_seed=run_seed,
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    family: str
    variants: tuple  # ((variant_name, ExperimentConfig), ...)


def default_sweeps(profile="paper", dataset="mnist", run_seed=0):
    """The eight sweep families with their full-scale architecture parameters."""
    cifar = "cifar10"
    sweeps = []

    def cfg(ds, **kw):
        return make_config(dataset=ds, profile=profile, run_seed=run_seed, **kw)

    sweeps.append(SweepSpec("width", tuple(
        (f"width-{w}", cfg(dataset, conv_widths=(w,) * 6))
        for w in (1, 3, 6, 12)
    )))
    kernel_variants = []
    for depth, kernels in ((3, (3, 7, 11)), (6, (3, 5, 7))):
        for k in kernels:
            kernel_variants.append((
                f"depth{depth}-kernel{k}",
                cfg(dataset, conv_widths=(3,) * depth, kernel_sizes=(k,) * depth),
            ))
    sweeps.append(SweepSpec("kernel", tuple(kernel_variants)))
    sweeps.append(SweepSpec("depth", tuple(
        (f"depth-{d}", cfg(dataset, conv_widths=(6,) * d))
        for d in (2, 3, 7, 10)
    )))
    sweeps.append(SweepSpec("pooling", (
        ("no-pooling", cfg(dataset, conv_widths=(12, 12, 12))),
        ("with-pooling", cfg(dataset, conv_widths=(12, 12, 12), pooling=((1, 2),))),
    )))
    sweeps.append(SweepSpec("multi_fc", (
        ("fc-500-1024-500-10", cfg(
            dataset, conv_widths=(3,) * 5, fc_widths=(500, 1024, 500, 10)
        )),
    )))
    sweeps.append(SweepSpec("cifar_width", tuple(
        (f"width-{w}", cfg(cifar, conv_widths=(w,) * 6))
        for w in (3, 6, 12)
    )))
    sweeps.append(SweepSpec("cifar_depth", tuple(
        (f"depth-{d}", cfg(cifar, conv_widths=(6,) * d))
        for d in (2, 4, 7, 10)
    )))
    sweeps.append(SweepSpec("cifar_pooling", (
        ("no-pooling", cfg(cifar, conv_widths=(6, 6, 6))),
        ("with-pooling", cfg(cifar, conv_widths=(6, 6, 6), pooling=((1, 2),))),
    )))
    return sweeps


def sweep_by_name(family, **kw) -> SweepSpec:
    for sweep in default_sweeps(**kw):
        if sweep.family == family:
            return sweep
    names = [s.family for s in default_sweeps(**kw)]
    raise ConfigError(f"unknown sweep family {family!r}; known: {names}")


# ---------------------------------------------------------------------------
# run result + orchestration
# ---------------------------------------------------------------------------

@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float


@dataclass
class RunResult:
    config: ExperimentConfig
    run_id: str
    sweep: str = ""
    variant: str = ""
    input_entropy_bits: dict = field(default_factory=dict)  # split -> H(X)
    label_entropy_bits: dict = field(default_factory=dict)  # split -> H(Y)
    epochs: list = field(default_factory=list)  # EpochMetrics
    mi_records: list = field(default_factory=list)  # estimator.EpochMIRecord
    dpi: list = field(default_factory=list)  # {"epoch","split","violations":[...]}
    wall_clock_seconds: float = 0.0  # volatile; excluded from the canonical file

    def records_for(self, epoch=None, split=None, layer=None):
        out = self.mi_records
        if epoch is not None:
            out = [r for r in out if r.epoch == epoch]
        if split is not None:
            out = [r for r in out if r.split == split]
        if layer is not None:
            out = [r for r in out if r.layer == layer]
        return out

    @property
    def recorded_layer_count(self):
        return 1 + max(r.layer for r in self.mi_records) if self.mi_records else 0


def _eval_split(net, params, images, labels, chunk):
    loss_sum, correct = 0.0, 0
    n = images.shape[0]
    for lo in range(0, n, chunk):
        batch = images[lo : lo + chunk]
        lab = labels[lo : lo + chunk]
        _, probs, _ = forward(net, params, batch)
        loss, _ = cross_entropy_loss(probs, lab)
        loss_sum += loss * len(lab)
        correct += int((probs.argmax(axis=1) == lab).sum())
    return loss_sum / n, correct / n


def _measure_split(net, params, images, labels, est_config, epoch, split, chunk):
    n_layers = len(net.recorded_layers())
    acc = MIAccumulator(n_layers, est_config, epoch=epoch, split=split)
    for lo in range(0, images.shape[0], chunk):
        trace, _ = forward_with_trace(net, params, images[lo : lo + chunk])
        acc.update(trace, labels[lo : lo + chunk])
    return acc.records()


def _label_entropy(labels) -> float:
    _, counts = np.unique(labels, return_counts=True)
    n = counts.sum()
    return float(np.log2(n) - (counts * np.log2(counts)).sum() / n)


def prepare_splits(config: ExperimentConfig, cache_dir=None):
    """Load and deterministically subsample the train/test splits."""
    train = data_mod.load_dataset(config.dataset.name, "train", cache_dir=cache_dir)
    test = data_mod.load_dataset(config.dataset.name, "test", cache_dir=cache_dir)
    if config.dataset.train_count < len(train):
        train = data_mod.subsample(
            train, data_mod.SubsampleSpec(config.dataset.train_count, config.dataset.seed)
        )
    if config.dataset.test_count < len(test):
        test = data_mod.subsample(
            test, data_mod.SubsampleSpec(config.dataset.test_count, config.dataset.seed + 1)
        )
    return train, test


def run_experiment(
    config: ExperimentConfig,
    cache_dir=None,
    sweep="",
    variant="",
    verify_injectivity=False,
    progress=None,
) -> RunResult:
    """Train per config and measure MI at the scheduled epochs.

    progress, if given, is called with a summary dict at each measurement epoch.
    """
    t0 = time.monotonic()
    train, test = prepare_splits(config, cache_dir=cache_dir)
    net = build_network(config, train.images.shape[1:])
    params = init_params(net, config.run_seed)
    state = AdamState.for_params(params, learning_rate=config.optimizer.learning_rate)
    est_config = EstimatorConfig(
        bin_size=config.bin_size, verify_injectivity=verify_injectivity
    )

    result = RunResult(config=config, run_id=run_id_for(config), sweep=sweep, variant=variant)
    for split, ds in (("train", train), ("test", test)):
        h_x, distinct = input_entropy_bits(ds.images)
        result.input_entropy_bits[split] = h_x
        result.label_entropy_bits[split] = _label_entropy(ds.labels)

    batch = config.optimizer.batch_size
    measure_at = set(config.schedule.measurement_epochs)
    n_train = len(train)
    for epoch in range(1, config.schedule.total_epochs + 1):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
            [config.run_seed, epoch]
        )))
        order = rng.permutation(n_train)
        loss_sum, correct = 0.0, 0
        for lo in range(0, n_train, batch):
            idx = order[lo : lo + batch]
            x, y = train.images[idx], train.labels[idx]
            _, probs, cache = forward(net, params, x, keep_cache=True)
            loss, grad = cross_entropy_loss(probs, y)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
            loss_sum += loss * len(idx)
            correct += int((probs.argmax(axis=1) == y).sum())
            grads = backward(net, params, cache, grad)
            params, state = adam_step(params, grads, state)
        test_loss, test_acc = _eval_split(net, params, test.images, test.labels, batch)
        result.epochs.append(EpochMetrics(
            epoch, loss_sum / n_train, correct / n_train, test_loss, test_acc
        ))
        if epoch in measure_at:
            for split, ds in (("train", train), ("test", test)):
                records = _measure_split(
                    net, params, ds.images, ds.labels, est_config, epoch, split, batch
                )
                result.mi_records.extend(records)
                violations = dpi_diagnostic(records)
                result.dpi.append({
                    "epoch": epoch,
                    "split": split,
                    "violations": [
                        {"quantity": v.quantity, "from_layer": v.from_layer,
                         "to_layer": v.to_layer, "increase": v.increase}
                        for v in violations
                    ],
                })
            if progress is not None:
                last = result.records_for(epoch=epoch, split="train")[-1]
                progress({
                    "epoch": epoch,
                    "train_loss": result.epochs[-1].train_loss,
                    "train_acc": result.epochs[-1].train_acc,
                    "test_acc": result.epochs[-1].test_acc,
                    "final_layer_i_xt": last.i_xt_bits,
                    "final_layer_i_ty": last.i_ty_bits,
                })
    result.wall_clock_seconds = time.monotonic() - t0
    return result


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def result_to_dict(result: RunResult) -> dict:
    """Canonical serializable form; excludes volatile wall-clock timing so
    identical configs yield byte-identical files."""
    from .estimator import EpochMIRecord  # noqa: F401 (documents the record shape)

    return {
        "schema_version": SCHEMA_VERSION,
        "run_id": result.run_id,
        "sweep": result.sweep,
        "variant": result.variant,
        "config": config_to_dict(result.config),
        "input_entropy_bits": result.input_entropy_bits,
        "label_entropy_bits": result.label_entropy_bits,
        "epochs": [asdict(e) for e in result.epochs],
        "mi_records": [asdict(r) for r in result.mi_records],
        "dpi": result.dpi,
    }


def persist_run(result: RunResult, path):
    with open(path, "w") as f:
        json.dump(result_to_dict(result), f, indent=1, sort_keys=True)
        f.write("\n")


def load_run(path) -> RunResult:
    from .estimator import EpochMIRecord

    with open(path) as f:
        doc = json.load(f)
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise ConfigError(f"{path} is not a run-result file")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"result schema_version {doc['schema_version']} unsupported "
            f"(this code reads {SCHEMA_VERSION})"
        )
    result = RunResult(
        config=config_from_dict(doc["config"]),
        run_id=doc["run_id"],
        sweep=doc["sweep"],
        variant=doc["variant"],
        input_entropy_bits=doc["input_entropy_bits"],
        label_entropy_bits=doc["label_entropy_bits"],
        epochs=[EpochMetrics(**e) for e in doc["epochs"]],
        mi_records=[EpochMIRecord(**r) for r in doc["mi_records"]],
        dpi=doc["dpi"],
    )
    return result
