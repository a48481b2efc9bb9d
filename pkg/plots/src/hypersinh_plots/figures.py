"""Render experiment CSV/JSON outputs into annotated figures.

Each figure kind consumes the file schema written by the corresponding
experiment, overlays its reference law and annotates the fitted value that
the experiment reported.  Figures are pure functions of their inputs; the
PASS/FAIL logic stays in the experiment outputs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

TWO_PI = 2.0 * math.pi

KINDS = ("scaling", "covariance", "invariance-hist", "kernel-trend")


class SchemaMismatch(Exception):
    """Input files do not carry the columns/keys the figure kind expects."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = list(missing)


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input paths, figure kind, reference law, output path."""

    kind: str
    inputs: dict
    output: str
    reference: float | None = None
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


def _read_csv(path, required):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaMismatch(f"{path}: missing columns {missing}", missing)
        rows = list(reader)
    if not rows:
        raise SchemaMismatch(f"{path}: no data rows", required)
    return rows


def _read_json(path, required):
    with open(path) as fh:
        payload = json.load(fh)
    missing = [k for k in required if k not in payload]
    if missing:
        raise SchemaMismatch(f"{path}: missing keys {missing}", missing)
    return payload


def _render_scaling(spec: FigureSpec, ax):
    rows = _read_csv(spec.inputs["csv"], ["estimate", "stderr"])
    x_col = "r" if "r" in rows[0] else "width"
    if x_col not in rows[0]:
        raise SchemaMismatch("scaling csv needs an 'r' or 'width' column", [x_col])
    summary = _read_json(spec.inputs["summary"], ["exponent", "target"])
    x = np.array([float(r[x_col]) for r in rows])
    y = np.array([float(r["estimate"]) for r in rows])
    se = np.array([float(r["stderr"]) for r in rows])
    ax.errorbar(x, y, yerr=se, fmt="o", capsize=3, label="estimates")
    anchor = y[-1] / x[-1] ** summary["exponent"]
    xs = np.geomspace(x.min(), x.max(), 64)
    ax.plot(xs, anchor * xs ** summary["exponent"], "-",
            label=f"fit: slope {summary['exponent']:.3f}")
    ref = spec.reference if spec.reference is not None else summary["target"]
    ax.plot(xs, anchor * (xs / x[-1]) ** ref * y[-1], "--",
            label=f"reference slope {ref:g}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(x_col)
    ax.set_ylabel("moment estimate")
    ax.annotate(f"fitted exponent = {summary['exponent']:.3f} (reference {ref:g})",
                xy=(0.03, 0.95), xycoords="axes fraction", va="top")


def _render_covariance(spec: FigureSpec, ax):
    rows = _read_csv(spec.inputs["csv"], ["r", "gamma", "stderr", "N"])
    summary = _read_json(spec.inputs["summary"], ["slope", "target"])
    n_cut = float(rows[0]["N"])
    x = np.log(np.array([float(r["r"]) for r in rows]) + 1.0 / n_cut)
    y = np.array([float(r["gamma"]) for r in rows])
    se = np.array([float(r["stderr"]) for r in rows])
    ax.errorbar(x, y, yerr=se, fmt="o", capsize=3, label="covariance")
    ref = spec.reference if spec.reference is not None else summary["target"]
    xs = np.linspace(x.min(), x.max(), 32)
    mid = len(x) // 2
    ax.plot(xs, y[mid] + ref * (xs - x[mid]), "--", label=f"slope {ref:.4f} guide")
    ax.plot(xs, y[mid] + summary["slope"] * (xs - x[mid]), "-",
            label=f"fit: slope {summary['slope']:.4f}")
    ax.set_xlabel("log(|x| + 1/N)")
    ax.set_ylabel("covariance")
    ax.annotate(f"fitted slope = {summary['slope']:.4f} (reference {ref:.4f})",
                xy=(0.03, 0.95), xycoords="axes fraction", va="top")


def _render_invariance(spec: FigureSpec, fig):
    rows = _read_csv(spec.inputs["csv"], ["observable", "ensemble", "value"])
    report = _read_json(spec.inputs["summary"], ["observables"])
    names = sorted({r["observable"] for r in rows})
    n = len(names)
    cols = min(3, n)
    grid = fig.subplots(math.ceil(n / cols), cols, squeeze=False)
    for i, name in enumerate(names):
        ax = grid[i // cols][i % cols]
        a = [float(r["value"]) for r in rows if r["observable"] == name and r["ensemble"] == "A"]
        b = [float(r["value"]) for r in rows if r["observable"] == name and r["ensemble"] == "B"]
        bins = np.histogram_bin_edges(a + b, bins=24)
        ax.hist(a, bins=bins, alpha=0.55, label="fresh")
        ax.hist(b, bins=bins, alpha=0.55, label="evolved")
        ks = report["observables"].get(name, {}).get("ks_p")
        ax.set_title(f"{name} (ks p={ks:.3f})" if ks is not None else name, fontsize=8)
    for j in range(n, grid.shape[0] * cols):
        grid[j // cols][j % cols].axis("off")
    grid[0][0].legend(fontsize=7)


def _render_kernel_trend(spec: FigureSpec, ax):
    names = ("time_smoothing", "space_smoothing", "frac_derivative")
    report = _read_json(spec.inputs["summary"], list(names))
    for name in names:
        table = report[name]["max_ratio"]
        ns = sorted(int(k) for k in table)
        ax.plot(ns, [table[str(k)] if str(k) in table else table[k] for k in ns],
                "o-", label=f"{name} (slope {report[name]['slope']:.3f})")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("mollification parameter")
    ax.set_ylabel("max ratio to majorant")
    ax.annotate("flat trend = bound uniform in the mollification",
                xy=(0.03, 0.95), xycoords="axes fraction", va="top")


def render(spec: FigureSpec) -> str:
    """Draw the figure described by spec and write it to spec.output."""
    fig = plt.figure(figsize=(7.2, 5.4), dpi=110)
    try:
        if spec.kind == "invariance-hist":
            _render_invariance(spec, fig)
        else:
            ax = fig.add_subplot(111)
            {"scaling": _render_scaling,
             "covariance": _render_covariance,
             "kernel-trend": _render_kernel_trend}[spec.kind](spec, ax)
            ax.legend(loc="lower right", fontsize=8)
        if spec.title:
            fig.suptitle(spec.title)
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, metadata={"Software": None})
        return str(out)
    finally:
        plt.close(fig)


def describe(spec: FigureSpec) -> dict:
    """Structural summary of the rendered figure (for golden checks)."""
    fig = plt.figure(figsize=(7.2, 5.4), dpi=110)
    try:
        if spec.kind == "invariance-hist":
            _render_invariance(spec, fig)
        else:
            ax = fig.add_subplot(111)
            {"scaling": _render_scaling,
             "covariance": _render_covariance,
             "kernel-trend": _render_kernel_trend}[spec.kind](spec, ax)
            ax.legend(loc="lower right", fontsize=8)
        axes_info = []
        for ax in fig.axes:
            axes_info.append({
                "xlabel": ax.get_xlabel(),
                "ylabel": ax.get_ylabel(),
                "title": ax.get_title(),
                "n_lines": len(ax.get_lines()),
                "annotations": [t.get_text() for t in ax.texts],
                "legend": [t.get_text() for t in ax.get_legend().get_texts()]
                if ax.get_legend() else [],
            })
        return {"kind": spec.kind, "axes": axes_info}
    finally:
        plt.close(fig)
