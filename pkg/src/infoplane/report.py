"""Analysis artifacts from run results: CSV tables, MI-vs-epoch charts,
information-plane trajectories (static SVG 1.1), and the compression trend
diagnostic. All emitters are pure functions of the RunResult: byte-identical
inputs give byte-identical files.
"""

import math
from dataclasses import dataclass

from .errors import InfoplaneError

CSV_COLUMNS = [
    "run_id", "sweep", "variant", "dataset", "split", "epoch", "layer",
    "i_xt_bits", "i_ty_bits", "train_acc", "test_acc",
]

# fixed layer palette so figures from different sweeps are comparable
PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896",
]

DEFAULT_COMPRESSION_THRESHOLD_BITS = 0.5


@dataclass
class MICurve:
    layer: int
    split: str
    points: list  # ordered (epoch, i_xt_bits, i_ty_bits)


@dataclass
class InfoPlaneSeries:
    layer: int
    split: str
    points: list  # ordered by epoch: (epoch, i_xt_bits, i_ty_bits)


@dataclass
class CompressionVerdict:
    verdict: str  # "compression" | "no compression"
    drop_bits: float
    threshold_bits: float


def curves_from_result(result, split):
    by_layer = {}
    for rec in result.records_for(split=split):
        by_layer.setdefault(rec.layer, []).append((rec.epoch, rec.i_xt_bits, rec.i_ty_bits))
    return [
        MICurve(layer, split, sorted(pts))
        for layer, pts in sorted(by_layer.items())
    ]


def emit_csv(results, path):
    """One row per MI record. UTF-8, LF line endings, '.' decimal separator;
    floats written with shortest lossless repr."""
    lines = [",".join(CSV_COLUMNS)]
    for result in results:
        acc_by_epoch = {e.epoch: e for e in result.epochs}
        for rec in result.mi_records:
            em = acc_by_epoch.get(rec.epoch)
            lines.append(",".join([
                result.run_id,
                result.sweep,
                result.variant,
                result.config.dataset.name,
                rec.split,
                str(rec.epoch),
                str(rec.layer),
                repr(rec.i_xt_bits),
                repr(rec.i_ty_bits),
                repr(em.train_acc) if em else "",
                repr(em.test_acc) if em else "",
            ]))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# SVG helpers
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.3f}"


class _Panel:
    """Maps data coordinates into one panel's pixel rectangle."""

    def __init__(self, x0, y0, width, height, xlim, ylim, xlog=False):
        self.x0, self.y0, self.width, self.height = x0, y0, width, height
        self.xlim, self.ylim, self.xlog = xlim, ylim, xlog

    def px(self, x):
        lo, hi = self.xlim
        if self.xlog:
            lo, hi, x = math.log10(lo), math.log10(hi), math.log10(x)
        frac = 0.0 if hi == lo else (x - lo) / (hi - lo)
        return self.x0 + frac * self.width

    def py(self, y):
        lo, hi = self.ylim
        frac = 0.0 if hi == lo else (y - lo) / (hi - lo)
        return self.y0 + self.height - frac * self.height


def _polyline(points, color, cls, dash=None):
    coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<polyline class="{cls}" fill="none" stroke="{color}" '
        f'stroke-width="1.5" points="{coords}"{extra}/>'
    )


def _text(x, y, s, size=11, anchor="start"):
    return (
        f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
        f'font-family="sans-serif" text-anchor="{anchor}">{s}</text>'
    )


def _svg_document(width, height, body):
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )


def _panel_frame(panel, title, xlabel, ylabel):
    parts = [
        f'<rect x="{_fmt(panel.x0)}" y="{_fmt(panel.y0)}" width="{_fmt(panel.width)}" '
        f'height="{_fmt(panel.height)}" fill="none" stroke="#444444" stroke-width="1"/>',
        _text(panel.x0 + panel.width / 2, panel.y0 - 8, title, size=13, anchor="middle"),
        _text(panel.x0 + panel.width / 2, panel.y0 + panel.height + 28, xlabel,
              anchor="middle"),
        _text(panel.x0 - 34, panel.y0 + panel.height / 2, ylabel, anchor="middle"),
    ]
    # y ticks at quarters
    lo, hi = panel.ylim
    for i in range(5):
        v = lo + (hi - lo) * i / 4
        parts.append(_text(panel.x0 - 6, panel.py(v) + 4, f"{v:.1f}", size=9, anchor="end"))
    # x ticks at powers of ten (log) or quarters (linear)
    if panel.xlog:
        e = 1
        while e <= panel.xlim[1]:
            if e >= panel.xlim[0]:
                parts.append(_text(panel.px(e), panel.y0 + panel.height + 14, str(e),
                                   size=9, anchor="middle"))
            e *= 10
    else:
        for i in range(5):
            v = panel.xlim[0] + (panel.xlim[1] - panel.xlim[0]) * i / 4
            parts.append(_text(panel.px(v), panel.y0 + panel.height + 14, f"{v:.1f}",
                               size=9, anchor="middle"))
    return parts


def emit_mi_epoch_svg(result, split, path):
    """Two panels (I(X;T) and I(Y;T) vs epoch, log epoch axis), one colored
    polyline per layer, reference lines at H(X) and H(Y)."""
    curves = curves_from_result(result, split)
    if not curves:
        raise InfoplaneError("result has no MI records for split " + split)
    h_x = result.input_entropy_bits[split]
    h_y = result.label_entropy_bits[split]
    epochs = [p[0] for p in curves[0].points]
    xlim = (min(epochs), max(max(epochs), min(epochs) + 1))
    ymax = max(h_x, max(p[1] for c in curves for p in c.points)) * 1.05

    width, height = 860, 360
    panels = [
        _Panel(60, 40, 340, 260, xlim, (0.0, ymax), xlog=True),
        _Panel(480, 40, 340, 260, xlim, (0.0, max(h_y, 1e-9) * 1.3), xlog=True),
    ]
    body = []
    for pi, (panel, title, ref, ref_label) in enumerate(zip(
        panels,
        ["I(X;T) vs epoch", "I(Y;T) vs epoch"],
        [h_x, h_y],
        ["H(X)", "H(Y)"],
    )):
        body.append(f'<g id="panel-{("ixt", "ity")[pi]}">')
        body.extend(_panel_frame(panel, title, "epoch", "bits"))
        ref_y = min(ref, panel.ylim[1])
        body.append(_polyline(
            [(panel.px(xlim[0]), panel.py(ref_y)), (panel.px(xlim[1]), panel.py(ref_y))],
            "#999999", "ref", dash="4,3",
        ))
        body.append(_text(panel.px(xlim[1]) - 4, panel.py(ref_y) - 4, ref_label,
                          size=9, anchor="end"))
        for curve in curves:
            vals = [p[1 + pi] for p in curve.points]
            pts = [(panel.px(e), panel.py(min(v, panel.ylim[1])))
                   for e, v in zip(epochs, vals)]
            body.append(_polyline(pts, PALETTE[curve.layer % len(PALETTE)], "layer"))
        body.append("</g>")
    # legend
    for curve in curves:
        y = 44 + 14 * curve.layer
        body.append(_polyline([(width - 120, y), (width - 100, y)],
                              PALETTE[curve.layer % len(PALETTE)], "legend"))
        body.append(_text(width - 94, y + 4, f"layer {curve.layer}", size=9))
    svg = _svg_document(width, height, body)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(svg)


def emit_infoplane_svg(result, split, path):
    """Information-plane trajectory: one marker per (layer, epoch) at
    (I(X;T), I(Y;T)); epoch encoded as a dark-to-bright gradient per layer."""
    curves = curves_from_result(result, split)
    if not curves:
        raise InfoplaneError("result has no MI records for split " + split)
    h_x = result.input_entropy_bits[split]
    h_y = result.label_entropy_bits[split]
    width, height = 520, 480
    panel = _Panel(70, 40, 380, 360, (0.0, h_x * 1.05), (0.0, h_y + 0.5))
    body = [_panel_frame(panel, f"information plane ({split})", "I(X;T) bits",
                         "I(Y;T) bits")]
    body = body[0]
    n_epochs = max(len(c.points) for c in curves)
    for curve in curves:
        base = PALETTE[curve.layer % len(PALETTE)]
        for i, (epoch, ixt, ity) in enumerate(curve.points):
            # later epochs drawn more opaque
            opacity = 0.25 + 0.75 * (i / max(1, n_epochs - 1))
            x = panel.px(min(ixt, panel.xlim[1]))
            y = panel.py(min(ity, panel.ylim[1]))
            body.append(
                f'<circle class="pt" cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" '
                f'fill="{base}" fill-opacity="{opacity:.3f}"/>'
            )
        y = 44 + 14 * curve.layer
        body.append(_polyline([(width - 60, y), (width - 44, y)], base, "legend"))
        body.append(_text(width - 40, y + 4, f"L{curve.layer}", size=9))
    svg = _svg_document(width, height, body)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(svg)


def compression_diagnostic(curve: MICurve,
                           threshold_bits=DEFAULT_COMPRESSION_THRESHOLD_BITS):
    """Largest drop of I(X;T) below its running maximum, evaluated over the
    second half of the measured epochs. A drop above the threshold is reported
    as a compression phase."""
    if len(curve.points) < 4:
        raise InfoplaneError(
            f"compression diagnostic needs >= 4 points, got {len(curve.points)}"
        )
    values = [p[1] for p in curve.points]
    half = len(values) // 2
    running_max = max(values[: half + 1])
    drop = 0.0
    for i in range(half, len(values)):
        running_max = max(running_max, values[i])
        drop = max(drop, running_max - values[i])
    verdict = "compression" if drop > threshold_bits else "no compression"
    return CompressionVerdict(verdict, drop, threshold_bits)
