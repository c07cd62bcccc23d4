"""
CVE record reader and dataset filter.

Parses CVE Record v5 JSON documents (NVD 2.0 items are accepted too),
applies the dataset quality rules and produces the sorted dataset together
with its filter report.
"""

import json
import re
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Tuple, Union

from src.models.cvss import VECTOR_PREFIX, parse_vector_string
from src.models.data_models import (
    MIN_PUBLISHED_YEAR,
    CveEntry,
    FilterReport,
    RawCveRecord,
    RejectionReason,
    cve_sort_key,
)
from src.models.errors import IoFailure, MalformedRecord, MalformedVector
from src.utils.logger import LoggerMixin

ENGLISH_STOPWORDS = frozenset({
    "the", "of", "and", "to", "a", "in", "is", "that", "for", "it",
    "as", "was", "with", "be", "by", "on", "not", "this", "are", "or",
})
MIN_ASCII_SHARE = 0.9
MIN_STOPWORDS = 2

_WORD = re.compile(r"[a-z]+")


def parse_cve_record(raw: Any) -> RawCveRecord:
    """
    Extract the fields the dataset needs from one record document.

    Args:
        raw: Record content as bytes/text, or an already decoded document;
            any other value is malformed

    Returns:
        RawCveRecord with every description, the first CVSS v3.1 vector
        found (CNA container before ADP containers) and the publication year

    Raises:
        MalformedRecord: If the document is not JSON or has no CVE id
    """
    if isinstance(raw, dict):
        document = raw
    elif not isinstance(raw, (bytes, bytearray, str)):
        raise MalformedRecord("Record document must be a JSON object")
    else:
        try:
            if isinstance(raw, (bytes, bytearray)):
                raw = bytes(raw).decode("utf-8-sig")
            document = json.loads(raw)
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise MalformedRecord(f"Record is not valid JSON: {e}")

    if not isinstance(document, dict):
        raise MalformedRecord("Record document must be a JSON object")

    if "cveMetadata" in document:
        return _parse_v5(document)
    if "cve" in document and isinstance(document["cve"], dict):
        return _parse_nvd(document["cve"])
    if "id" in document and "descriptions" in document:
        return _parse_nvd(document)
    raise MalformedRecord("Record has no CVE id")


def _parse_v5(document: Dict[str, Any]) -> RawCveRecord:
    metadata = document.get("cveMetadata") or {}
    cve_id = metadata.get("cveId")
    if not cve_id:
        raise MalformedRecord("Record has no CVE id")

    containers = document.get("containers") or {}
    cna = containers.get("cna") or {}
    adp = containers.get("adp") or []

    vector = None
    for container in [cna, *adp]:
        for metric in container.get("metrics") or []:
            block = metric.get("cvssV3_1") if isinstance(metric, dict) else None
            if block and block.get("vectorString"):
                vector = block["vectorString"]
                break
        if vector:
            break

    return RawCveRecord(
        cve_id=cve_id,
        descriptions=_descriptions(cna.get("descriptions")),
        cvss31_vector=vector,
        published_year=_year(metadata.get("datePublished")),
    )


def _parse_nvd(cve: Dict[str, Any]) -> RawCveRecord:
    cve_id = cve.get("id")
    if not cve_id:
        raise MalformedRecord("Record has no CVE id")

    vector = None
    for metric in (cve.get("metrics") or {}).get("cvssMetricV31") or []:
        vector = (metric.get("cvssData") or {}).get("vectorString")
        if vector:
            break

    return RawCveRecord(
        cve_id=cve_id,
        descriptions=_descriptions(cve.get("descriptions")),
        cvss31_vector=vector,
        published_year=_year(cve.get("published")),
    )


def _descriptions(items: Any) -> List[Tuple[str, str]]:
    descriptions = []
    for item in items or []:
        if isinstance(item, dict) and isinstance(item.get("value"), str):
            descriptions.append((str(item.get("lang") or ""), item["value"]))
    return descriptions


def _year(timestamp: Any) -> Optional[int]:
    if not isinstance(timestamp, str) or len(timestamp) < 4 or not timestamp[:4].isdigit():
        return None
    return int(timestamp[:4])


def is_english_tag(tag: str) -> bool:
    tag = tag.strip().lower().replace("_", "-")
    return tag == "en" or tag.startswith("en-")


def detect_english(text: str, lang_tag: Optional[str] = None) -> bool:
    """
    Decide whether a description is English.

    A language tag, when present, decides on its own. Untagged text is
    English when at least 90% of its characters are ASCII and at least two
    distinct common English stopwords occur in it.
    """
    if lang_tag:
        return is_english_tag(lang_tag)
    if not text:
        return False

    ascii_chars = sum(1 for ch in text if ord(ch) < 128)
    if ascii_chars / len(text) < MIN_ASCII_SHARE:
        return False

    words = set(_WORD.findall(text.lower()))
    return len(words & ENGLISH_STOPWORDS) >= MIN_STOPWORDS


def _pick_description(descriptions: List[Tuple[str, str]]) -> Optional[Tuple[str, str]]:
    """First non-blank English-tagged description, else the first non-blank one."""
    non_blank = [(tag, text) for tag, text in descriptions if text and text.strip()]
    for tag, text in non_blank:
        if tag and is_english_tag(tag):
            return tag, text
    return non_blank[0] if non_blank else None


def to_entry(record: Optional[RawCveRecord]) -> Union[CveEntry, RejectionReason]:
    """
    Apply the dataset rules in order; the first failing rule is returned.

    Order: malformed, pre_2019, not_v31 / incomplete_metrics,
    empty_description, non_english. A None record (an unparseable document)
    is malformed.
    """
    if record is None or record.published_year is None:
        return RejectionReason.MALFORMED
    if record.published_year < MIN_PUBLISHED_YEAR:
        return RejectionReason.PRE_2019

    vector = (record.cvss31_vector or "").strip()
    if not vector.startswith(VECTOR_PREFIX):
        return RejectionReason.NOT_V31
    try:
        truth = parse_vector_string(vector)
    except MalformedVector:
        return RejectionReason.INCOMPLETE_METRICS

    chosen = _pick_description(record.descriptions)
    if chosen is None:
        return RejectionReason.EMPTY_DESCRIPTION

    tag, text = chosen
    text = text.strip()
    if not detect_english(text, tag or None):
        return RejectionReason.NON_ENGLISH

    return CveEntry(
        cve_id=record.cve_id,
        description=text,
        truth=truth,
        published_year=record.published_year,
    )


class CveReader(LoggerMixin):
    """
    Reads CVE record files and builds the filtered dataset.

    In lenient mode (default) unparseable documents are counted as
    malformed; strict mode aborts on the first one.
    """

    def __init__(self, strict: bool = False):
        self.strict = strict

    def read_records(self, path: Union[str, Path]) -> Iterator[Optional[RawCveRecord]]:
        """
        Walk a directory (or read a single file) of record documents.

        *.json files hold one record (or a JSON list of records); *.jsonl
        files hold one record per line. Files are visited in sorted path
        order. Unparseable documents are yielded as None.

        Raises:
            IoFailure: If the path does not exist or cannot be read
            MalformedRecord: In strict mode, on the first bad document
        """
        root = Path(path)
        if not root.exists():
            raise IoFailure(f"Input path does not exist: {root}")

        if root.is_file():
            files = [root]
        else:
            try:
                files = sorted(
                    p for p in root.rglob("*")
                    if p.is_file() and p.suffix.lower() in (".json", ".jsonl")
                )
            except OSError as e:
                raise IoFailure(f"Cannot list {root}: {e}")

        self.logger.info("Reading CVE records", path=str(root), files=len(files))

        for file_path in files:
            try:
                content = file_path.read_bytes()
            except OSError as e:
                self.logger.error("Failed to read record file", path=str(file_path), error=str(e))
                raise IoFailure(f"Cannot read {file_path}: {e}")

            if file_path.suffix.lower() == ".jsonl":
                documents = [line for line in content.splitlines() if line.strip()]
            else:
                documents = self._split_json_file(content, file_path)

            for document in documents:
                yield self._parse_one(document, file_path)

    def _split_json_file(self, content: bytes, file_path: Path) -> List[Any]:
        try:
            decoded = json.loads(content.decode("utf-8-sig"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            # let _parse_one report it
            return [content]
        if isinstance(decoded, list):
            return decoded
        if isinstance(decoded, dict) and isinstance(decoded.get("vulnerabilities"), list):
            return decoded["vulnerabilities"]
        return [decoded]

    def _parse_one(self, document: Any, file_path: Path) -> Optional[RawCveRecord]:
        try:
            return parse_cve_record(document)
        except MalformedRecord as e:
            if self.strict:
                self.logger.error("Malformed record", path=str(file_path), error=str(e))
                raise MalformedRecord(f"{file_path}: {e}")
            self.logger.warning("Skipping malformed record", path=str(file_path), error=str(e))
            return None

    def build_dataset(
        self,
        records: Iterable[Optional[RawCveRecord]]
    ) -> Tuple[List[CveEntry], FilterReport]:
        """
        Filter records into dataset entries.

        Args:
            records: Parsed records; None stands for an unparseable document

        Returns:
            Entries sorted by CVE id, and the balanced filter report.
            A repeated CVE id keeps its first occurrence; repeats are
            counted as malformed.
        """
        report = FilterReport()
        kept: Dict[str, CveEntry] = {}

        for record in records:
            outcome = to_entry(record)
            if isinstance(outcome, RejectionReason):
                report.reject(outcome)
                continue
            if outcome.cve_id in kept:
                self.logger.warning("Duplicate CVE record", cve_id=outcome.cve_id)
                report.reject(RejectionReason.MALFORMED)
                continue
            kept[outcome.cve_id] = outcome

        entries = sorted(kept.values(), key=lambda entry: cve_sort_key(entry.cve_id))
        report.kept = len(entries)

        self.logger.info(
            "Dataset built",
            kept=report.kept,
            total=report.total,
            rejected={reason.value: count for reason, count in report.counts.items() if count},
        )
        return entries, report

    def ingest(self, path: Union[str, Path]) -> Tuple[List[CveEntry], FilterReport]:
        """Read every record under path and build the dataset."""
        return self.build_dataset(self.read_records(path))
