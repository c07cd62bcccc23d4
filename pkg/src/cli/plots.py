"""
SVG figures for the analyze and evaluate commands.

Rendered with the non-interactive Agg backend; the SVG hash salt and
metadata are pinned so identical data gives identical files.
"""

from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from src.models.errors import IoFailure  # noqa: E402
from src.utils.logger import LoggerMixin  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "cvssbench"
matplotlib.rcParams["svg.fonttype"] = "none"

SVG_METADATA = {"Date": None, "Creator": None}


class PlotRenderer(LoggerMixin):
    """Renders distribution bars and heatmaps as SVG files."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)

    def _save(self, fig, name: str) -> Path:
        path = self.out_dir / name
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata=SVG_METADATA, bbox_inches="tight")
        except OSError as e:
            raise IoFailure(f"Cannot write {path}: {e}")
        finally:
            plt.close(fig)
        self.logger.debug("Figure written", path=str(path))
        return path

    def class_distributions(self, frame: pd.DataFrame) -> Path:
        """One bar panel per metric from the class-distribution table."""
        metrics = list(dict.fromkeys(frame["metric"]))
        fig, axes = plt.subplots(2, 4, figsize=(14, 6))
        for ax, metric in zip(axes.flat, metrics):
            part = frame[frame["metric"] == metric]
            ax.bar(part["value"], part["count"], color="steelblue")
            ax.set_title(metric)
            ax.grid(True, axis="y", alpha=0.3)
        fig.suptitle("Class distribution per base metric")
        fig.tight_layout()
        return self._save(fig, "class_distribution.svg")

    def severity_distribution(self, frame: pd.DataFrame) -> Path:
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.bar(frame["severity"], frame["count"], color="indianred")
        ax.set_xlabel("Severity")
        ax.set_ylabel("CVEs")
        ax.set_title("Severity of computed base scores")
        ax.grid(True, axis="y", alpha=0.3)
        fig.tight_layout()
        return self._save(fig, "severity_distribution.svg")

    def heatmap(
        self,
        values: np.ndarray,
        rows: List[str],
        columns: List[str],
        title: str,
        name: str,
        fmt: str = "{:.2f}"
    ) -> Path:
        """Annotated heatmap; NaN cells are left blank."""
        fig, ax = plt.subplots(figsize=(1 + 0.8 * len(columns), 1 + 0.6 * len(rows)))
        im = ax.imshow(np.ma.masked_invalid(values), cmap="Blues")
        for i in range(len(rows)):
            for j in range(len(columns)):
                if np.isfinite(values[i, j]):
                    ax.text(j, i, fmt.format(values[i, j]), ha="center", va="center", fontsize=8)
        ax.set_xticks(range(len(columns)))
        ax.set_yticks(range(len(rows)))
        ax.set_xticklabels(columns)
        ax.set_yticklabels(rows)
        ax.set_title(title)
        fig.colorbar(im, ax=ax)
        fig.tight_layout()
        return self._save(fig, name)

    def association(self, frame: pd.DataFrame) -> Path:
        labels = list(frame["metric"])
        values = frame[labels].to_numpy(dtype=float)
        return self.heatmap(values, labels, labels, "Cramér's V between base metrics", "association.svg")

    def confusion(self, frame: pd.DataFrame) -> List[Path]:
        """One heatmap per (metric, model) from the long confusion table."""
        paths = []
        for (metric, model), part in frame.groupby(["metric", "model"], sort=False):
            table = part.pivot(index="truth", columns="pred", values="count")
            rows = list(dict.fromkeys(part["truth"]))
            columns = list(dict.fromkeys(part["pred"]))
            table = table.loc[rows, columns]
            safe_model = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in str(model))
            paths.append(self.heatmap(
                table.to_numpy(dtype=float),
                rows,
                columns,
                f"{metric}: {model}",
                f"confusion/{metric}_{safe_model}.svg",
                fmt="{:.0f}",
            ))
        return paths
