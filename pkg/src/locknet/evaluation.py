"""Accuracy metrics and report rendering.

A report row carries the three headline numbers for one experiment: clean
accuracy of the baseline model, and trusted (stamped inputs) / unverified
(clean inputs) accuracy of the locked model, the latter two as mean and
sample standard deviation over seeds.
"""

import io
from dataclasses import dataclass

import numpy as np

from locknet.errors import ShapeError
from locknet.nn.network import forward, infer_shapes

EVAL_BATCH = 512

CSV_COLUMNS = (
    "dataset,strategy,motif,placement,baseline,"
    "trusted_mean,trusted_std,unverified_mean,unverified_std,seeds"
)


def predict(ckpt, dataset, batch_size=EVAL_BATCH):
    """Argmax class per sample; ties break to the lowest class index."""
    if dataset.class_count != ckpt.spec.class_count:
        raise ShapeError(
            f"dataset has {dataset.class_count} classes but checkpoint "
            f"expects {ckpt.spec.class_count}"
        )
    infer_shapes(ckpt.spec, dataset.images.shape[1:])
    dtype = ckpt.dtype
    out = np.empty(len(dataset), dtype=np.int64)
    for start in range(0, len(dataset), batch_size):
        batch = dataset.images[start : start + batch_size].astype(dtype) / 255.0
        logits = forward(ckpt, batch)
        out[start : start + len(batch)] = logits.argmax(axis=1)
    return out

def accuracy(ckpt, dataset):
    """Top-1 accuracy in percent."""
    hits = predict(ckpt, dataset) == dataset.labels
    return 100.0 * float(np.count_nonzero(hits)) / len(dataset)


def per_class_accuracy(ckpt, dataset):
    """Accuracy per ground-truth class, as {class: percent}.

    Classes with no samples are absent from the result, not reported as 0.
    """
    pred = predict(ckpt, dataset)
    result = {}
    for cls in range(dataset.class_count):
        mask = dataset.labels == cls
        total = int(np.count_nonzero(mask))
        if total == 0:
            continue
        result[cls] = 100.0 * float(np.count_nonzero(pred[mask] == dataset.labels[mask])) / total
    return result


def mean_std(values):
    """Mean and sample std (n-1 denominator; 0 when n == 1)."""
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return mean, std


@dataclass(frozen=True)
class ReportRow:
    dataset: str
    strategy: str
    motif: str
    placement: str
    baseline: float
    trusted_mean: float
    trusted_std: float
    unverified_mean: float
    unverified_std: float
    seeds: int


@dataclass
class EvalReport:
    rows: list
    config_digest: str = ""
    failed_seeds: tuple = ()


def render_csv(report):
    """Machine rendering: full-precision floats, byte-stable."""
    out = io.StringIO()
    out.write(CSV_COLUMNS + "\n")
    for r in report.rows:
        out.write(
            f"{r.dataset},{r.strategy},{r.motif},{r.placement},{r.baseline!r},"
            f"{r.trusted_mean!r},{r.trusted_std!r},{r.unverified_mean!r},"
            f"{r.unverified_std!r},{r.seeds}\n"
        )
    return out.getvalue()


def parse_csv(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_COLUMNS:
        raise ShapeError("unrecognized report CSV header")
    rows = []
    for ln in lines[1:]:
        f = ln.split(",")
        if len(f) != 10:
            raise ShapeError(f"report row has {len(f)} fields, expected 10")
        rows.append(
            ReportRow(
                f[0], f[1], f[2], f[3],
                float(f[4]), float(f[5]), float(f[6]), float(f[7]), float(f[8]),
                int(f[9]),
            )
        )
    return EvalReport(rows)


def render_table(report):
    """Human rendering: aligned columns, mean +/- std to 2 decimals."""
    header = ("dataset", "strategy", "motif", "placement", "baseline",
              "trusted", "unverified", "seeds")
    body = [
        (
            r.dataset,
            r.strategy,
            r.motif,
            r.placement,
            f"{r.baseline:.2f}",
            f"{r.trusted_mean:.2f} ± {r.trusted_std:.2f}",
            f"{r.unverified_mean:.2f} ± {r.unverified_std:.2f}",
            str(r.seeds),
        )
        for r in report.rows
    ]
    widths = [
        max(len(header[i]), *(len(row[i]) for row in body)) if body else len(header[i])
        for i in range(len(header))
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    if report.failed_seeds:
        lines.append(f"failed seeds: {', '.join(str(s) for s in report.failed_seeds)}")
    return "\n".join(lines) + "\n"
