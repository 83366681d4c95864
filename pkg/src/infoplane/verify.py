"""Structural and information-theoretic re-checks of a persisted run result."""

import math
from dataclasses import dataclass

from .estimator import dpi_diagnostic
from .report import compression_diagnostic, curves_from_result

MI_SLACK_BITS = 1e-9


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    detail: str = ""


def verify_result(result):
    """Returns (outcomes, warnings). A failed outcome is a structural problem;
    warnings carry DPI violations, which are diagnostic only."""
    outcomes = []
    warnings = []

    layer_count = result.recorded_layer_count
    epochs = sorted({r.epoch for r in result.mi_records})
    expected = layer_count * len(epochs) * 2
    outcomes.append(CheckOutcome(
        "record-count",
        len(result.mi_records) == expected and
        list(result.config.schedule.measurement_epochs) == epochs,
        f"{len(result.mi_records)} records, expected {expected} "
        f"({layer_count} layers x {len(epochs)} epochs x 2 splits)",
    ))

    bounds_ok, detail = True, ""
    for rec in result.mi_records:
        n = rec.sample_count
        if not (0.0 <= rec.i_xt_bits <= math.log2(n) + MI_SLACK_BITS):
            bounds_ok, detail = False, f"i_xt out of [0, log2 {n}] at epoch {rec.epoch} layer {rec.layer}"
            break
        if not (0.0 <= rec.i_ty_bits <= rec.i_xt_bits + MI_SLACK_BITS):
            bounds_ok, detail = False, f"i_ty exceeds i_xt at epoch {rec.epoch} layer {rec.layer}"
            break
        h_y = result.label_entropy_bits[rec.split]
        if rec.i_ty_bits > h_y + MI_SLACK_BITS:
            bounds_ok, detail = False, f"i_ty exceeds H(Y) at epoch {rec.epoch} layer {rec.layer}"
            break
    outcomes.append(CheckOutcome("mi-bounds", bounds_ok, detail or "all records in bounds"))

    for epoch in epochs:
        for split in ("train", "test"):
            recs = sorted(result.records_for(epoch=epoch, split=split), key=lambda r: r.layer)
            for v in dpi_diagnostic(recs):
                warnings.append(
                    f"DPI: {v.quantity} increases by {v.increase:.4f} bits from layer "
                    f"{v.from_layer} to {v.to_layer} (epoch {epoch}, {split})"
                )

    curves = curves_from_result(result, "train")
    if curves and len(curves[-1].points) >= 4:
        verdict = compression_diagnostic(curves[-1])
        outcomes.append(CheckOutcome(
            "compression-diagnostic", True,
            f"final layer: {verdict.verdict} (drop {verdict.drop_bits:.4f} bits, "
            f"threshold {verdict.threshold_bits})",
        ))

    return outcomes, warnings
