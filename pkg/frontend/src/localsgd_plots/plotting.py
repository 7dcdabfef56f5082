"""Multi-panel suboptimality figures from sweep CSV files.

Input is the simulator's sweep/figure1 CSV (schema v1): optional leading
``#`` comment lines, then exactly the header

    algorithm,M,K,R,eta,round,mean_subopt,stderr,reps,argmin_flag,seed

One panel per (M, K) cell (rows = M, columns = K); each panel shows, per
algorithm, the tuned curve g(r) = min over the stepsize grid of the mean
suboptimality at round r (the rows flagged ``argmin_flag = 1``), on a log
y-axis.  Rendering is deterministic: identical CSV bytes and spec give a
byte-identical image under a fixed matplotlib version.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

CSV_HEADER = ["algorithm", "M", "K", "R", "eta", "round", "mean_subopt",
              "stderr", "reps", "argmin_flag", "seed"]

SVG_HASHSALT = "localsgd-plots-v1"


class SchemaError(ValueError):
    """The CSV header does not match the documented schema."""


@dataclass
class PlotSpec:
    csv_paths: Sequence[str]
    out_path: str
    panel_keys: tuple = ("M", "K")
    logy: bool = True
    title: Optional[str] = None


@dataclass
class RenderReport:
    out_path: str
    n_rows: int
    n_deduplicated: int
    panels: list
    missing: list        # (panel, algorithm) pairs with incomplete series
    ok: bool


def read_rows(paths: Sequence[str]) -> tuple[list, int]:
    """Read and concatenate sweep CSVs, dropping exact duplicate rows.

    Returns (rows, number of duplicates dropped).  Refuses files whose
    header line differs from the documented schema.
    """
    rows = []
    seen = set()
    dropped = 0
    for path in paths:
        text = Path(path).read_text()
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        if not lines:
            raise SchemaError(f"{path}: empty CSV")
        reader = csv.reader(io.StringIO("\n".join(lines)))
        header = next(reader)
        if header != CSV_HEADER:
            raise SchemaError(
                f"{path}: header {header!r} does not match schema v1 {CSV_HEADER!r}")
        for raw in reader:
            if not raw:
                continue
            key = tuple(raw)
            if key in seen:
                dropped += 1
                continue
            seen.add(key)
            rows.append({
                "algorithm": raw[0], "M": int(raw[1]), "K": int(raw[2]),
                "R": int(raw[3]), "eta": float(raw[4]), "round": int(raw[5]),
                "mean_subopt": float(raw[6]), "stderr": float(raw[7]),
                "reps": int(raw[8]), "argmin_flag": int(raw[9]), "seed": int(raw[10]),
            })
    return rows, dropped


def tuned_curves(rows: list):
    """Tuned curve per (M, K, algorithm): round -> min-over-grid suboptimality."""
    curves = {}
    for row in rows:
        if row["argmin_flag"] != 1:
            continue
        key = (row["M"], row["K"], row["algorithm"])
        curves.setdefault(key, {})[row["round"]] = row["mean_subopt"]
    return curves


def render_figure(spec: PlotSpec) -> RenderReport:
    rows, dropped = read_rows(spec.csv_paths)
    if not rows:
        raise SchemaError("no data rows")
    curves = tuned_curves(rows)
    m_values = sorted({m for (m, _, _) in curves})
    k_values = sorted({k for (_, k, _) in curves})
    algorithms = sorted({a for (_, _, a) in curves})
    r_max = {(m, k): max(row["R"] for row in rows if row["M"] == m and row["K"] == k)
             for m in m_values for k in k_values
             if any(row["M"] == m and row["K"] == k for row in rows)}

    n_rows, n_cols = len(m_values), len(k_values)
    fig, axes = plt.subplots(n_rows, n_cols,
                             figsize=(3.6 * n_cols, 2.9 * n_rows),
                             squeeze=False, sharex=False)
    missing = []
    panels = []
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for i, m in enumerate(m_values):
        for j, k in enumerate(k_values):
            ax = axes[i][j]
            panel = (m, k)
            if panel not in r_max:
                ax.set_axis_off()
                continue
            panels.append(panel)
            for ai, algorithm in enumerate(algorithms):
                series = curves.get((m, k, algorithm))
                expected = set(range(1, r_max[panel] + 1))
                if not series or set(series) != expected:
                    missing.append((panel, algorithm))
                    if not series:
                        continue
                rounds = sorted(series)
                ax.plot(rounds, [series[r] for r in rounds],
                        label=algorithm, color=colors[ai % len(colors)])
            if spec.logy:
                ax.set_yscale("log")
            ax.set_title(f"M={m}, K={k}", fontsize=9)
            ax.set_xlabel("round r", fontsize=8)
            if j == 0:
                ax.set_ylabel("tuned suboptimality", fontsize=8)
            ax.tick_params(labelsize=7)
            if [(p, a) for (p, a) in missing if p == panel]:
                ax.annotate("warning: incomplete series", xy=(0.5, 0.5),
                            xycoords="axes fraction", ha="center",
                            fontsize=8, color="red")
    handles, labels = axes[0][0].get_legend_handles_labels()
    if handles:
        fig.legend(handles, labels, loc="upper center", ncol=len(labels),
                   fontsize=8, frameon=False)
    if spec.title:
        fig.suptitle(spec.title, fontsize=10)
    fig.tight_layout(rect=(0, 0, 1, 0.93))
    _save_deterministic(fig, spec.out_path)
    plt.close(fig)
    return RenderReport(out_path=spec.out_path, n_rows=len(rows),
                        n_deduplicated=dropped, panels=panels,
                        missing=missing, ok=not missing)


def _save_deterministic(fig, out_path: str) -> None:
    out = str(out_path)
    if out.endswith(".svg"):
        with matplotlib.rc_context({"svg.hashsalt": SVG_HASHSALT}):
            fig.savefig(out, metadata={"Date": None})
    elif out.endswith(".png"):
        fig.savefig(out, dpi=150)
    else:
        raise ValueError(f"unsupported image format: {out} (use .png or .svg)")
