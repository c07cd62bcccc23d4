"""
Text analysis service for description quality.

Length statistics and word-length histograms, a heuristic named-entity
counter, corpus information content (token surprisal) and Pearson
correlation of each against per-CVE prediction correctness.
"""

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.stats

from src.models.cvss import REPORT_ORDER, MetricKind
from src.models.data_models import CveEntry, PredictionSet, cve_sort_key
from src.models.errors import ConfigError, EmptyInput, EmptyText, LengthMismatch, ZeroVariance
from src.services.evaluation_service import group_predictions
from src.utils.logger import LoggerMixin

WORD_BUCKET = 20
SIGNIFICANCE = 0.05
OVERALL = "OVERALL"
FEATURES = ("length", "entities", "ic")

_IC_TOKEN = re.compile(r"[a-z0-9]+")
_ENTITY_TOKEN = re.compile(r"\w(?:[\w.+]*\w)?|[^\w\s]")
_SENTENCE_END = {".", "!", "?", ";", ":"}

# Capitalised words that start clauses or name nothing in particular.
ENTITY_STOPWORDS = frozenset({
    "a", "an", "the", "this", "that", "these", "those", "it", "its", "in",
    "on", "of", "for", "to", "by", "with", "when", "if", "an", "and", "or",
    "but", "as", "at", "from", "via", "after", "before", "prior", "versions",
    "version", "note", "affected", "successful", "exploitation", "users",
    "attackers", "attacker", "there", "due", "improper", "insufficient",
    "multiple", "some", "all", "any", "other", "i", "we", "you",
})


@dataclass
class DescriptionStats:
    """Character-length summary and word-length histogram."""

    n: int
    mean_chars: float
    median_chars: float
    min_chars: int
    max_chars: int
    word_histogram: List[Tuple[int, int]]


@dataclass
class CorrelationResult:
    """Pearson r with its two-sided p-value."""

    r: float
    p_value: float
    n: int

    @property
    def p_band(self) -> str:
        return f"<{SIGNIFICANCE}" if self.p_value < SIGNIFICANCE else f"{self.p_value:.4f}"


def word_count(text: str) -> int:
    return len(text.split())


def length_stats(descriptions: Sequence[str]) -> DescriptionStats:
    """
    Exact character lengths of the raw text; words are whitespace-separated
    and bucketed in steps of 20 (every bucket up to the longest is listed).
    """
    if not descriptions:
        raise EmptyInput("No descriptions")

    chars = np.array([len(text) for text in descriptions])
    buckets = Counter((word_count(text) // WORD_BUCKET) * WORD_BUCKET for text in descriptions)
    top = max(buckets)
    histogram = [(start, buckets.get(start, 0)) for start in range(0, top + WORD_BUCKET, WORD_BUCKET)]

    return DescriptionStats(
        n=len(descriptions),
        mean_chars=float(chars.mean()),
        median_chars=float(np.median(chars)),
        min_chars=int(chars.min()),
        max_chars=int(chars.max()),
        word_histogram=histogram,
    )


class EntityCounter(Protocol):
    def count(self, text: str) -> int:
        ...


class HeuristicEntityCounter:
    """
    Counts runs of name-like tokens.

    A token is name-like when it starts with a capital letter or mixes
    letters and digits, is not sentence-initial and is not a stopword.
    Consecutive name-like tokens form one entity; punctuation ends a run.
    """

    def __init__(self, stopwords: Iterable[str] = ENTITY_STOPWORDS):
        self.stopwords = frozenset(word.lower() for word in stopwords)

    def _name_like(self, token: str) -> bool:
        if token.lower() in self.stopwords:
            return False
        has_alpha = any(ch.isalpha() for ch in token)
        has_digit = any(ch.isdigit() for ch in token)
        return token[0].isupper() or (has_alpha and has_digit)

    def count(self, text: str) -> int:
        entities = 0
        in_run = False
        sentence_start = True
        for token in _ENTITY_TOKEN.findall(text or ""):
            if not token[0].isalnum() and token[0] != "_":
                in_run = False
                sentence_start = token in _SENTENCE_END
                continue
            if not sentence_start and self._name_like(token):
                if not in_run:
                    entities += 1
                in_run = True
            else:
                in_run = False
            sentence_start = False
        return entities


def tokenize(text: str) -> List[str]:
    return _IC_TOKEN.findall(text.lower())


@dataclass
class IcModel:
    """Token probabilities over a corpus."""

    counts: Dict[str, int]
    total: int

    @classmethod
    def build(cls, texts: Iterable[str]) -> "IcModel":
        counts: Counter = Counter()
        for text in texts:
            counts.update(tokenize(text))
        if not counts:
            raise EmptyText("Corpus has no tokens")
        return cls(counts=dict(counts), total=sum(counts.values()))

    @property
    def vocabulary_size(self) -> int:
        return len(self.counts)

    def probability(self, token: str) -> float:
        """Relative frequency; unseen tokens get 1 / (total + vocabulary)."""
        count = self.counts.get(token)
        if count:
            return count / self.total
        return 1.0 / (self.total + self.vocabulary_size)


def information_content(text: str, model: IcModel) -> float:
    """Mean surprisal −log2 p(token) over the text's tokens."""
    tokens = tokenize(text)
    if not tokens:
        raise EmptyText("Text has no tokens")
    return float(np.mean([-math.log2(model.probability(token)) for token in tokens]))


def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """
    Product-moment correlation with a two-sided t-test p-value.

    Raises:
        LengthMismatch: If x and y differ in length
        EmptyInput: If fewer than three pairs are given
        ZeroVariance: If either series is constant
    """
    if len(x) != len(y):
        raise LengthMismatch(f"x has {len(x)} values, y {len(y)}")
    if len(x) < 3:
        raise EmptyInput("Pearson correlation needs at least three pairs")

    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if np.ptp(xs) == 0 or np.ptp(ys) == 0:
        raise ZeroVariance("Correlation is undefined for a constant series")

    r, p_value = scipy.stats.pearsonr(xs, ys)
    return CorrelationResult(
        r=float(min(1.0, max(-1.0, r))),
        p_value=float(min(1.0, max(0.0, p_value))),
        n=len(xs),
    )


def correctness(entry: CveEntry, prediction: PredictionSet) -> float:
    """Share of the eight metrics predicted exactly."""
    return sum(prediction[kind] == entry.truth[kind] for kind in MetricKind) / len(MetricKind)


@dataclass
class CorrelationRow:
    model: str
    metric: str
    feature: str
    result: Optional[CorrelationResult]


class TextAnalysisService(LoggerMixin):
    """Description features and their relation to prediction correctness."""

    def __init__(self, entity_counter: Optional[EntityCounter] = None):
        self.entity_counter = entity_counter or HeuristicEntityCounter()

    def description_features(self, dataset: Sequence[CveEntry]) -> pd.DataFrame:
        """One row per CVE: chars, words, entities and corpus IC."""
        if not dataset:
            raise EmptyInput("Dataset is empty")

        entries = sorted(dataset, key=lambda entry: cve_sort_key(entry.cve_id))
        model = IcModel.build(entry.description for entry in entries)
        rows = []
        for entry in entries:
            try:
                ic = information_content(entry.description, model)
            except EmptyText:
                ic = float("nan")
            rows.append({
                "cve_id": entry.cve_id,
                "chars": len(entry.description),
                "words": word_count(entry.description),
                "entities": self.entity_counter.count(entry.description),
                "ic": ic,
            })

        self.logger.debug("Description features computed", entries=len(rows), vocabulary=model.vocabulary_size)
        return pd.DataFrame(rows)

    def correctness_table(
        self,
        dataset: Sequence[CveEntry],
        predictions: Sequence[PredictionSet]
    ) -> pd.DataFrame:
        """
        Per (CVE, model): overall correctness and one 0/1 column per metric.

        Raises:
            CoverageMismatch: If predictions do not cover the dataset
        """
        grouped = group_predictions(dataset, predictions)
        entries = sorted(dataset, key=lambda entry: cve_sort_key(entry.cve_id))
        rows = []
        for model, by_cve in grouped.items():
            for entry in entries:
                prediction = by_cve[entry.cve_id]
                row = {"cve_id": entry.cve_id, "model": model, OVERALL: correctness(entry, prediction)}
                for kind in REPORT_ORDER:
                    row[kind.value] = float(prediction[kind] == entry.truth[kind])
                rows.append(row)
        return pd.DataFrame(rows)

    def correctness_correlates(
        self,
        dataset: Sequence[CveEntry],
        predictions: Sequence[PredictionSet],
        features: Sequence[str] = FEATURES
    ) -> List[CorrelationRow]:
        """
        Correlate each description feature with correctness, per model and
        per metric (plus the overall share). Undefined correlations carry
        result None.
        """
        unknown = [feature for feature in features if feature not in FEATURES]
        if unknown:
            raise ConfigError(f"Unknown features: {unknown}")

        feature_frame = self.description_features(dataset).rename(columns={"chars": "length"})
        table = self.correctness_table(dataset, predictions).merge(
            feature_frame, on="cve_id", how="left"
        )

        rows: List[CorrelationRow] = []
        metrics = [OVERALL] + [kind.value for kind in REPORT_ORDER]
        for model, frame in table.groupby("model", sort=True):
            for metric in metrics:
                for feature in features:
                    valid = frame[[feature, metric]].dropna()
                    try:
                        result = pearson(valid[feature].tolist(), valid[metric].tolist())
                    except (ZeroVariance, EmptyInput):
                        result = None
                    rows.append(CorrelationRow(model=str(model), metric=metric, feature=feature, result=result))

        self.logger.info(
            "Correctness correlations computed",
            rows=len(rows),
            undefined=sum(row.result is None for row in rows)
        )
        return rows

    def bucket_table(
        self,
        dataset: Sequence[CveEntry],
        predictions: Sequence[PredictionSet],
        feature: str = "words",
        width: int = WORD_BUCKET
    ) -> pd.DataFrame:
        """
        Per model and feature bucket: CVE count and mean overall correctness.

        feature is "words" (bucket width 20 by default) or "entities"
        (width 1 gives one bucket per entity count).
        """
        features = self.description_features(dataset)
        table = self.correctness_table(dataset, predictions).merge(
            features[["cve_id", feature]], on="cve_id", how="left"
        )
        table["bucket_start"] = (table[feature] // width) * width
        summary = (
            table.groupby(["model", "bucket_start"], sort=True)[OVERALL]
            .agg(count="count", mean_correctness="mean")
            .reset_index()
        )
        summary["bucket_start"] = summary["bucket_start"].astype(int)
        return summary
