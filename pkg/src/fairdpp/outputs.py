"""CSV, manifest and SVG artifacts for an experiment run."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from fairdpp import __version__  # noqa: E402
from fairdpp.experiments import SAMPLERS, ExperimentConfig, ResultRecord, SummaryRow  # noqa: E402

RECORD_COLUMNS = (
    "experiment", "sampler", "x_value", "repetition", "entropy_bits", "effective_diversity",
    "ln_G", "singular_flag", "seconds", "constrained_effective_diversity", "subset", "error",
)
PLOTTED_METRICS = ("effective_diversity", "ln_G")
X_LABELS = {1: "k", 2: "k", 3: "bias fraction"}


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return repr(v)
    return str(v)


def _x(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def records_csv(records: Sequence[ResultRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        w.writerow([
            r.experiment, r.sampler, _x(r.x_value), r.repetition, _fmt(r.entropy_bits),
            _fmt(r.effective_diversity), _fmt(r.ln_G), int(r.singular), _fmt(r.seconds),
            _fmt(r.constrained_effective_diversity), " ".join(map(str, r.subset)), r.error or "",
        ])
    return buf.getvalue()


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    others = [s for s in SAMPLERS if any(s in r.p_values or s == r.sampler for r in rows)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sampler", "x_value", "metric", "mean", "sem", "count", "excluded"]
               + [f"p_vs_{s}" for s in others])
    for r in rows:
        w.writerow([r.sampler, _x(r.x_value), r.metric, _fmt(r.mean), _fmt(r.sem), r.count, r.excluded]
                   + [_fmt(r.p_values[s]) if s in r.p_values else "" for s in others])
    return buf.getvalue()


def blob_hash(data: bytes) -> str:
    """Content hash in the format git uses for blob objects."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def input_hash(cfg: ExperimentConfig) -> str:
    if cfg.features_path is not None:
        parts = [Path(cfg.features_path).read_bytes(), Path(cfg.labels_path).read_bytes()]
    else:
        parts = [json.dumps(cfg.synthetic.to_dict(), sort_keys=True).encode()]
    return blob_hash(b"".join(parts))


def manifest_text(cfg: ExperimentConfig) -> str:
    lines = [
        f"tool=fairdpp {__version__}",
        f"experiment={cfg.experiment}",
        f"master_seed={cfg.master_seed}",
        f"input_hash={input_hash(cfg)}",
    ]
    for key, value in sorted(cfg.to_dict().items()):
        lines.append(f"config.{key}={json.dumps(value, sort_keys=True)}")
    return "\n".join(lines) + "\n"


def plot_metric(rows: Sequence[SummaryRow], metric: str, path: Path, xlabel: str) -> None:
    """One error-bar curve per sampler; error bars are one SEM."""
    plt.rcParams["svg.hashsalt"] = "fairdpp"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for sampler in SAMPLERS:
        cell = sorted((r for r in rows if r.metric == metric and r.sampler == sampler),
                      key=lambda r: r.x_value)
        if not cell:
            continue
        container = ax.errorbar([r.x_value for r in cell], [r.mean for r in cell],
                                yerr=[r.sem for r in cell], label=sampler, capsize=3, marker="o")
        container.lines[0].set_gid(f"curve-{sampler}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(metric)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_outputs(summary: Sequence[SummaryRow], records: Sequence[ResultRecord],
                 cfg: ExperimentConfig, out_dir: str | Path) -> list[Path]:
    """Write records.csv, summary.csv, manifest.txt and one SVG per plotted metric."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in (("records.csv", records_csv(records)),
                       ("summary.csv", summary_csv(summary)),
                       ("manifest.txt", manifest_text(cfg))):
        (out / name).write_text(text)
        written.append(out / name)
    for metric in PLOTTED_METRICS:
        path = out / f"{metric}.svg"
        plot_metric(summary, metric, path, X_LABELS[cfg.experiment])
        written.append(path)
    return written
