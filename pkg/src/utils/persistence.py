"""
Persistence utilities for datasets, prediction tables and report outputs.

This module saves and loads the line-delimited dataset, the prediction CSV
and writes every tabular/JSON output with deterministic bytes.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import pandas as pd

from src.models.data_models import PREDICTION_COLUMNS, CveEntry, PredictionSet
from src.models.errors import IoFailure, SchemaMismatch
from src.utils.logger import LoggerMixin

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.6f"
FORMAT_VERSION = "1.0"


class PersistenceManager(LoggerMixin):
    """
    Manager for persisting datasets, predictions and outputs.

    Output files go under out_dir; dataset and prediction paths are given
    explicitly since they are shared between subcommands.
    """

    def __init__(self, out_dir: PathLike = "out"):
        """
        Initialize persistence manager.

        Args:
            out_dir: Directory for report outputs (created lazily)
        """
        self.out_dir = Path(out_dir)

    def output_path(self, name: str) -> Path:
        path = self.out_dir / name
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise IoFailure(f"Cannot create output directory {path.parent}: {e}")
        return path

    # Dataset

    def save_dataset(self, entries: Iterable[CveEntry], path: PathLike) -> int:
        """
        Save entries as UTF-8 JSON lines.

        Args:
            entries: Dataset entries in the order to write them
            path: Target file

        Returns:
            Number of entries written

        Raises:
            IoFailure: If the file cannot be written
        """
        target = Path(path)
        count = 0
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, "w", encoding="utf-8", newline="\n") as f:
                for entry in entries:
                    f.write(json.dumps(entry.to_dict(), ensure_ascii=False) + "\n")
                    count += 1
        except OSError as e:
            self.logger.error("Failed to save dataset", path=str(target), error=str(e))
            raise IoFailure(f"Cannot write dataset {target}: {e}")

        self.logger.info("Dataset saved", path=str(target), entries=count)
        return count

    def load_dataset(self, path: PathLike) -> List[CveEntry]:
        """
        Load a dataset written by save_dataset.

        Raises:
            IoFailure: If the file does not exist or cannot be read
            SchemaMismatch: If a line is not a valid dataset record
        """
        source = Path(path)
        try:
            lines = source.read_text(encoding="utf-8").splitlines()
        except OSError as e:
            self.logger.error("Failed to load dataset", path=str(source), error=str(e))
            raise IoFailure(f"Cannot read dataset {source}: {e}")

        entries = []
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaMismatch(f"{source}:{line_no} is not valid JSON: {e}")
            if not isinstance(data, dict):
                raise SchemaMismatch(f"{source}:{line_no} is not a JSON object")
            entries.append(CveEntry.from_dict(data))

        self.logger.info("Dataset loaded", path=str(source), entries=len(entries))
        return entries

    # Predictions

    def save_predictions(self, predictions: Iterable[PredictionSet], path: PathLike) -> int:
        """Write predictions as CSV in the order given."""
        frame = pd.DataFrame(
            [prediction.to_row() for prediction in predictions],
            columns=list(PREDICTION_COLUMNS),
        )
        self.write_frame(frame, Path(path))
        self.logger.info("Predictions saved", path=str(path), rows=len(frame))
        return len(frame)

    def load_predictions(self, path: PathLike) -> List[PredictionSet]:
        """
        Read a prediction CSV.

        Raises:
            IoFailure: If the file cannot be read
            SchemaMismatch: If columns are missing or a label is invalid
        """
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        except (OSError, pd.errors.EmptyDataError) as e:
            raise IoFailure(f"Cannot read predictions {path}: {e}")
        except pd.errors.ParserError as e:
            raise SchemaMismatch(f"Predictions file {path} is not valid CSV: {e}")

        missing = [column for column in PREDICTION_COLUMNS if column not in frame.columns]
        if missing:
            raise SchemaMismatch(f"Predictions file {path} is missing columns: {', '.join(missing)}")

        predictions = [PredictionSet.from_row(row) for row in frame.to_dict(orient="records")]
        self.logger.info("Predictions loaded", path=str(path), rows=len(predictions))
        return predictions

    # Outputs

    def write_frame(self, frame: pd.DataFrame, path: PathLike) -> Path:
        """Write a DataFrame as CSV with fixed float format and LF endings."""
        target = Path(path)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(
                target,
                index=False,
                lineterminator="\n",
                float_format=FLOAT_FORMAT,
                encoding="utf-8",
            )
        except OSError as e:
            self.logger.error("Failed to write table", path=str(target), error=str(e))
            raise IoFailure(f"Cannot write {target}: {e}")
        return target

    def write_table(self, frame: pd.DataFrame, name: str) -> Path:
        """Write a DataFrame under the output directory."""
        path = self.write_frame(frame, self.output_path(name))
        self.logger.debug("Table written", path=str(path), rows=len(frame))
        return path

    def write_json(self, payload: Dict[str, Any], name: str) -> Path:
        """
        Write a JSON document under the output directory.

        A format version is added; keys are sorted so identical payloads
        give identical bytes.
        """
        path = self.output_path(name)
        document = {"format_version": FORMAT_VERSION, **payload}
        try:
            path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except OSError as e:
            self.logger.error("Failed to write JSON", path=str(path), error=str(e))
            raise IoFailure(f"Cannot write {path}: {e}")
        return path
