"""PNG figures next to the CSV tables; headless backend only."""

from __future__ import annotations

import os
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams.update({
    "figure.figsize": (6.0, 3.8),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.frameon": False,
})


def _num(values):
    out = []
    for v in values:
        try:
            out.append(float(v))
        except (TypeError, ValueError):
            out.append(float("nan"))
    return out


def render(report, out_dir: str) -> List[str]:
    paths = []
    for spec in report.figures:
        table = report.tables[spec.table]
        fig, ax = plt.subplots()
        xs = table.column(spec.x)
        if spec.kind == "hist":
            for y in spec.ys:
                ax.hist(_num(table.column(y)), bins=30, alpha=0.8, label=y)
        elif spec.kind == "bar":
            width = 0.8 / max(len(spec.ys), 1)
            pos = list(range(len(xs)))
            for i, y in enumerate(spec.ys):
                ax.bar([p + i * width for p in pos], _num(table.column(y)), width, label=y)
            ax.set_xticks([p + width * (len(spec.ys) - 1) / 2 for p in pos])
            ax.set_xticklabels([str(x) for x in xs])
        else:
            xn = _num(xs)
            for y in spec.ys:
                ax.plot(xn, _num(table.column(y)), marker="o", label=y)
            if spec.reference is not None:
                ax.plot(xn, list(spec.reference), linestyle="none", marker="x", color="k",
                        label="reference")
        if spec.logy:
            ax.set_yscale("log")
        ax.set_title(spec.title)
        ax.set_xlabel(spec.xlabel or spec.x)
        ax.set_ylabel(spec.ylabel)
        if len(spec.ys) > 1 or spec.reference is not None:
            ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, f"{spec.name}.png")
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
        paths.append(path)
    return paths
