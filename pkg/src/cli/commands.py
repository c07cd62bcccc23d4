"""
Subcommand implementations for the CVSS scoring bench.

Each command reads its inputs through the persistence layer, runs the
matching service and writes CSV/JSON (and optionally SVG) outputs under
the configured output directory. Commands return the process exit code;
errors propagate as BenchError subclasses.
"""

import asyncio
import sys
from pathlib import Path
from typing import Callable, List, Mapping, Optional, TextIO, Tuple

import pandas as pd

from src.cli.messages import ConsoleMessages
from src.cli.plots import PlotRenderer
from src.data.cve_reader import CveReader
from src.data.llm_client import ChatTransport
from src.data.replay_cache import ReplayCache
from src.models.cvss import REPORT_ORDER, base_score, format_vector_string, parse_vector_string
from src.models.data_models import CveEntry, PredictionSet
from src.models.errors import CacheMiss, ConfigError, ProviderFailure
from src.services import report_service
from src.services.evaluation_service import EvaluationService, association_matrix
from src.services.meta_classifier_service import MetaClassifierService
from src.services.prediction_service import PredictionService, RunMode
from src.services.prompt_service import make_prompt_spec
from src.services.text_analysis_service import TextAnalysisService, length_stats
from src.utils.config import AppConfig, load_providers
from src.utils.logger import LoggerMixin
from src.utils.persistence import PersistenceManager

EXIT_OK = 0


class BenchCommands(LoggerMixin):
    """
    The seven subcommands.

    transport, environ and sleep are injection points for tests; the
    defaults use aiohttp, os.environ and asyncio.sleep.
    """

    def __init__(
        self,
        config: AppConfig,
        stdout: Optional[TextIO] = None,
        transport: Optional[ChatTransport] = None,
        environ: Optional[Mapping[str, str]] = None,
        sleep: Callable = asyncio.sleep,
        plots: bool = False,
        strict: bool = False
    ):
        self.config = config
        self.stdout = stdout or sys.stdout
        self.transport = transport
        self.environ = environ
        self.sleep = sleep
        self.plots = plots
        self.strict = strict
        self.persistence = PersistenceManager(config.out_dir)
        self.messages = ConsoleMessages()

    def _print(self, text: Optional[str]) -> None:
        if text:
            print(text, file=self.stdout)

    def _load_inputs(self) -> Tuple[List[CveEntry], List[PredictionSet]]:
        dataset = self.persistence.load_dataset(self.config.dataset_path)
        predictions = self.persistence.load_predictions(self.config.predictions_path)
        return dataset, predictions

    # ingest

    def cmd_ingest(self, input_dir: Optional[str] = None) -> int:
        """
        Parse and filter raw CVE records into the dataset file.

        Writes the dataset JSONL and filter_report.csv.
        """
        source = input_dir or self.config.data_dir
        if not source:
            raise ConfigError("No input directory given (argument or CVSSBENCH_DATA_DIR)")

        reader = CveReader(strict=self.strict)
        try:
            entries, report = reader.ingest(source)
        except Exception as e:
            self.logger.error("Ingest failed", path=str(source), error=str(e))
            raise

        self.persistence.save_dataset(entries, self.config.dataset_path)
        report_path = self.persistence.write_table(report_service.filter_frame(report), "filter_report.csv")
        self._print(self.messages.ingest_summary(report, self.config.dataset_path, str(report_path)))
        return EXIT_OK

    # score

    def cmd_score(self, target: str) -> int:
        """
        Score one vector string, or every entry of a dataset file.

        A dataset also yields scores.csv under the output directory.
        """
        if not target.startswith("CVSS:") and Path(target).is_file():
            entries = self.persistence.load_dataset(target)
            rows = []
            for entry in entries:
                breakdown = base_score(entry.truth)
                rows.append({
                    "cve_id": entry.cve_id,
                    "vector": format_vector_string(entry.truth),
                    "exploitability": breakdown.exploitability,
                    "impact": breakdown.impact,
                    "base_score": breakdown.base_score,
                    "severity": breakdown.severity.value,
                })
            frame = pd.DataFrame(
                rows,
                columns=["cve_id", "vector", "exploitability", "impact", "base_score", "severity"],
            )
            path = self.persistence.write_table(frame, "scores.csv")
            for row in rows:
                self._print(f"{row['cve_id']}: {row['base_score']:.1f} {row['severity']}")
            self._print(self.messages.outputs_written([path], str(self.persistence.out_dir)))
            return EXIT_OK

        breakdown = base_score(parse_vector_string(target))
        self._print(self.messages.score_line(target, breakdown))
        return EXIT_OK

    # predict

    async def cmd_predict(self) -> int:
        """
        Predict the dataset with every configured provider.

        Returns 0, or 3 when a provider failed; the rows of the other
        providers (and the finished batches of the failed one) are written
        either way.
        """
        if not self.config.providers_file:
            raise ConfigError("No provider file configured (--providers or CVSSBENCH_PROVIDERS_FILE)")

        providers = load_providers(self.config.providers_file)
        dataset = self.persistence.load_dataset(self.config.dataset_path)
        spec = make_prompt_spec(
            self.config.shots,
            self.config.batch_size,
            [entry.description for entry in dataset],
        )
        service = PredictionService(
            providers,
            ReplayCache(self.config.cache_path),
            mode=RunMode(self.config.mode),
            transport=self.transport,
            max_attempts=self.config.max_retries,
            backoff_base=self.config.backoff_base,
            request_timeout=self.config.request_timeout,
            sleep=self.sleep,
            environ=self.environ,
        )

        try:
            run = await service.run_predictions(dataset, spec)
        except CacheMiss as e:
            self._print(self.messages.cache_miss(e.missing_keys))
            raise

        self.persistence.save_predictions(run.predictions, self.config.predictions_path)
        self._print(self.messages.predict_summary(run, self.config.predictions_path))

        if run.failed_providers:
            self.logger.error("Providers failed", providers=run.failed_providers)
            return ProviderFailure.exit_code
        return EXIT_OK

    # evaluate

    def cmd_evaluate(self) -> int:
        """Evaluation report, confusion, overlap, pairwise and severity tables."""
        dataset, predictions = self._load_inputs()
        result = EvaluationService().evaluate(dataset, predictions)

        evaluation = report_service.evaluation_frame(result)
        confusion = report_service.confusion_frame(result)
        paths = [
            self.persistence.write_table(evaluation, "evaluation.csv"),
            self.persistence.write_table(confusion, "confusion.csv"),
            self.persistence.write_table(report_service.overlap_frame(result), "overlap.csv"),
            self.persistence.write_table(report_service.pairwise_frame(result), "pairwise_overlap.csv"),
            self.persistence.write_table(report_service.severity_agreement_frame(result), "severity_agreement.csv"),
        ]
        if self.plots:
            paths.extend(PlotRenderer(self.persistence.out_dir).confusion(confusion))

        self._print(self.messages.table("Overall", evaluation[evaluation["metric"] == "OVERALL"]))
        self._print(self.messages.outputs_written(paths, str(self.persistence.out_dir)))
        return EXIT_OK

    # analyze

    def cmd_analyze(self) -> int:
        """
        Dataset distributions, metric association and description analysis.

        Correctness correlations and bucket tables need the prediction file;
        without it only the dataset-side outputs are written.
        """
        dataset = self.persistence.load_dataset(self.config.dataset_path)
        paths = []

        distribution = report_service.distribution_frame(dataset)
        severity = report_service.severity_distribution_frame(dataset)
        association = report_service.association_frame(association_matrix([e.truth for e in dataset]))
        stats = length_stats([entry.description for entry in dataset])

        paths.append(self.persistence.write_table(distribution, "class_distribution.csv"))
        paths.append(self.persistence.write_table(severity, "severity_distribution.csv"))
        paths.append(self.persistence.write_table(association, "association.csv"))
        paths.append(self.persistence.write_table(report_service.length_stats_frame(stats), "length_stats.csv"))
        paths.append(self.persistence.write_table(report_service.histogram_frame(stats), "length_histogram.csv"))

        if Path(self.config.predictions_path).is_file():
            predictions = self.persistence.load_predictions(self.config.predictions_path)
            analysis = TextAnalysisService()
            correlations = analysis.correctness_correlates(dataset, predictions)
            paths.append(self.persistence.write_table(
                report_service.correlation_frame(correlations), "correlations.csv"
            ))
            paths.append(self.persistence.write_table(
                analysis.bucket_table(dataset, predictions, "words"), "accuracy_by_length.csv"
            ))
            paths.append(self.persistence.write_table(
                analysis.bucket_table(dataset, predictions, "entities", width=1), "accuracy_by_entities.csv"
            ))
        else:
            self.logger.warning(
                "No prediction file, skipping correctness analysis",
                path=self.config.predictions_path
            )

        if self.plots:
            renderer = PlotRenderer(self.persistence.out_dir)
            paths.append(renderer.class_distributions(distribution))
            paths.append(renderer.severity_distribution(severity))
            paths.append(renderer.association(association))

        self._print(self.messages.outputs_written(paths, str(self.persistence.out_dir)))
        return EXIT_OK

    # meta

    def cmd_meta(self) -> int:
        """Meta-classification report, CV scores, model files and explanations."""
        dataset, predictions = self._load_inputs()
        service = MetaClassifierService(seed=self.config.seed, rf_trees=self.config.rf_trees)
        reports, skipped = service.run_all(dataset, predictions)

        meta = report_service.meta_frame(reports, skipped)
        paths = [
            self.persistence.write_table(meta, "meta_report.csv"),
            self.persistence.write_table(report_service.cv_frame(reports), "meta_cv.csv"),
        ]
        for kind in REPORT_ORDER:
            report = reports.get(kind)
            if report is None:
                continue
            paths.append(self.persistence.write_json(report.model.to_dict(), f"models/meta_{kind.value}.json"))
            explanation = report_service.explanation_frame(report.model)
            if explanation is not None:
                paths.append(self.persistence.write_table(explanation, f"meta_explanation_{kind.value}.csv"))

        self._print(self.messages.table("Meta classification", meta))
        self._print(self.messages.skipped_metrics(kind.value for kind in skipped))
        self._print(self.messages.outputs_written(paths, str(self.persistence.out_dir)))
        return EXIT_OK

    # report

    def cmd_report(self) -> int:
        """evaluate, analyze and meta into one output directory."""
        for step in (self.cmd_evaluate, self.cmd_analyze, self.cmd_meta):
            code = step()
            if code != EXIT_OK:
                return code
        return EXIT_OK

