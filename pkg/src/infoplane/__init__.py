"""Information-plane instrumentation for small convolutional networks.

A from-scratch, deterministic CNN training engine (numpy), a binned plug-in
mutual-information estimator over layer activations, sweep orchestration, and
CSV/SVG report generation.
"""

from .estimator import (
    EstimatorConfig,
    EpochMIRecord,
    bin_activations,
    dpi_diagnostic,
    flatten_layer,
    measure_layers,
    mi_t_y,
    mi_x_t,
    plug_in_entropy,
)
from .experiments import (
    ExperimentConfig,
    RunResult,
    build_network,
    default_sweeps,
    load_run,
    make_config,
    measurement_schedule,
    persist_run,
    run_experiment,
)
from .network import LayerSpec, NetworkSpec, forward_with_trace, init_params
from .report import compression_diagnostic, emit_csv, emit_infoplane_svg, emit_mi_epoch_svg

__all__ = [
    "EstimatorConfig",
    "EpochMIRecord",
    "ExperimentConfig",
    "LayerSpec",
    "NetworkSpec",
    "RunResult",
    "bin_activations",
    "build_network",
    "compression_diagnostic",
    "default_sweeps",
    "dpi_diagnostic",
    "emit_csv",
    "emit_infoplane_svg",
    "emit_mi_epoch_svg",
    "flatten_layer",
    "forward_with_trace",
    "init_params",
    "load_run",
    "make_config",
    "measure_layers",
    "measurement_schedule",
    "mi_t_y",
    "mi_x_t",
    "persist_run",
    "plug_in_entropy",
    "run_experiment",
]
