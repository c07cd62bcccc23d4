"""
Prompt construction and response parsing for metric prediction.

Prompts follow a two-step protocol (extract the eight base metrics, then
emit them in a fixed pipe-delimited format) with optional worked examples.
Responses are parsed line by line into PredictionSets; malformed content
never raises.
"""

import re
import string
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from src.models.cvss import (
    METRIC_VALUES,
    REPORT_ORDER,
    UNKNOWN,
    VALUE_WORDS,
    BaseVector,
    MetricKind,
    parse_vector_string,
)
from src.models.data_models import PredictionSet, PromptSpec, ShotExample
from src.models.errors import ConfigError, EmptyBatch, OversizedBatch
from src.utils.logger import LoggerMixin

FIELD_SEPARATOR = " | "
ID_PLACEHOLDER = "[vulnerability id]"

_CVE_ID = re.compile(r"cve-[\w-]*", re.IGNORECASE)
_ENUMERATION = re.compile(
    r"^\s*(?:(?:answer|line|description|output)\s*)?\d+\s*[.):\-]\s*", re.IGNORECASE
)
_BULLET = re.compile(r"^\s*[-*•]\s+")
_RULE_LINE = re.compile(r"^[\s|:\-]+$")
_STRIP_CHARS = string.whitespace + string.punctuation

# Accepted spellings per metric, upper-case, built from codes and full words.
_SYNONYMS: Dict[MetricKind, Dict[str, str]] = {}
for _kind in MetricKind:
    table = {code: code for code in METRIC_VALUES[_kind]}
    for code, word in VALUE_WORDS[_kind].items():
        table[word] = code
    _SYNONYMS[_kind] = table
_SYNONYMS[MetricKind.AV]["ADJACENT NETWORK"] = "A"

_HEADER_WORDS = {kind.value for kind in MetricKind} | {kind.full_name.upper() for kind in MetricKind}

ROLE_INSTRUCTION = (
    "You are a cybersecurity expert trained in analysing vulnerability "
    "descriptions and deriving their CVSS v3.1 base metrics."
)

TASK_INSTRUCTION = (
    "Work in two steps. Step 1: for each vulnerability description, extract "
    "the eight CVSS v3.1 base metrics from the text. Step 2: output them in "
    "the fixed format below."
)


def _format_instruction() -> str:
    names = FIELD_SEPARATOR.join(kind.full_name for kind in REPORT_ORDER)
    allowed = "\n".join(
        f"- {kind.full_name}: {', '.join(VALUE_WORDS[kind][code] for code in METRIC_VALUES[kind])}"
        for kind in REPORT_ORDER
    )
    return (
        "Output format: exactly one line per description, in the order the "
        "descriptions are given. Each line holds eight fields separated by "
        f"'{FIELD_SEPARATOR.strip()}' in this order:\n{names}\n"
        f"Allowed values:\n{allowed}\n"
        "Do not add numbering, headers or any other text."
    )


OUTPUT_FORMAT_INSTRUCTION = _format_instruction()


def format_labels(labels: BaseVector) -> str:
    """Answer line for a vector, full words in report order."""
    return FIELD_SEPARATOR.join(
        VALUE_WORDS[kind][labels[kind]] if labels[kind] != UNKNOWN else UNKNOWN
        for kind in REPORT_ORDER
    )


def redact_identifiers(text: str) -> str:
    """Replace CVE identifiers inside free text."""
    return _CVE_ID.sub(ID_PLACEHOLDER, text)


def _shot(description: str, vector: str) -> ShotExample:
    return ShotExample(description=description, labels=parse_vector_string(vector))


# Synthetic vulnerabilities; none of them describes a real product or record.
SHOT_POOL: Tuple[ShotExample, ...] = (
    _shot(
        "A SQL injection flaw in the search endpoint of the Larkspur Ticketing "
        "web portal allows unauthenticated remote attackers to read and modify "
        "arbitrary database records and to crash the database service.",
        "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H",
    ),
    _shot(
        "The Quillmark desktop note editor follows symbolic links when saving "
        "temporary files, allowing a local user with a low-privileged account "
        "to overwrite files owned by other users if the victim opens a crafted "
        "notebook.",
        "CVSS:3.1/AV:L/AC:L/PR:L/UI:R/S:U/C:N/I:H/A:N",
    ),
    _shot(
        "A stored cross-site scripting issue in the comment widget of the "
        "Brightfern CMS lets an authenticated author inject script that runs in "
        "the browser of an administrator viewing the page.",
        "CVSS:3.1/AV:N/AC:L/PR:L/UI:R/S:C/C:L/I:L/A:N",
    ),
    _shot(
        "A race condition in the packet reassembly code of the Tidewater "
        "router firmware lets an attacker on the same network segment cause a "
        "device reboot by sending fragmented frames with precise timing.",
        "CVSS:3.1/AV:A/AC:H/PR:N/UI:N/S:U/C:N/I:N/A:H",
    ),
    _shot(
        "The debug UART header on the Ostrava smart thermostat exposes a root "
        "shell without authentication to anyone with physical access to the "
        "circuit board.",
        "CVSS:3.1/AV:P/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H",
    ),
    _shot(
        "An information disclosure issue in the Corvid metrics exporter "
        "returns internal hostnames in error messages to remote users who "
        "send malformed queries.",
        "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:L/I:N/A:N",
    ),
    _shot(
        "A use-after-free in the image decoder of the Palisade document viewer "
        "allows remote attackers to execute arbitrary code if a user opens a "
        "crafted file.",
        "CVSS:3.1/AV:N/AC:L/PR:N/UI:R/S:U/C:H/I:H/A:H",
    ),
    _shot(
        "Improper permission checks in the Halcyon hypervisor management agent "
        "allow a guest administrator to write to host memory and take control "
        "of other virtual machines on the host.",
        "CVSS:3.1/AV:L/AC:L/PR:H/UI:N/S:C/C:H/I:H/A:H",
    ),
    _shot(
        "A missing rate limit in the login form of the Juniper Lane booking "
        "service allows remote attackers to exhaust worker threads and make "
        "the service unavailable.",
        "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:H",
    ),
    _shot(
        "An open redirect in the logout handler of the Marrow single sign-on "
        "gateway can be abused, when a user clicks a crafted link, to send the "
        "user to an attacker-controlled site.",
        "CVSS:3.1/AV:N/AC:L/PR:N/UI:R/S:C/C:L/I:L/A:N",
    ),
)


def select_shots(shots: int, exclude_descriptions: Iterable[str] = ()) -> Tuple[ShotExample, ...]:
    """
    Take the first `shots` pool examples that do not appear in the dataset.

    Raises:
        ConfigError: If the pool cannot supply enough examples
    """
    excluded: Set[str] = {text.strip() for text in exclude_descriptions}
    chosen = [example for example in SHOT_POOL if example.description.strip() not in excluded]
    if len(chosen) < shots:
        raise ConfigError(f"Only {len(chosen)} usable shot examples, {shots} requested")
    return tuple(chosen[:shots])


def make_prompt_spec(
    shots: int,
    batch_size: int,
    exclude_descriptions: Iterable[str] = ()
) -> PromptSpec:
    return PromptSpec(
        shots=shots,
        shot_examples=select_shots(shots, exclude_descriptions),
        batch_size=batch_size,
    )


@dataclass(frozen=True)
class Prompt:
    """System and user parts of one chat prompt."""

    system: str
    user: str

    @property
    def text(self) -> str:
        """Full prompt text; this is what the replay cache key hashes."""
        return f"{self.system}\n\n{self.user}"


def build_prompt(descriptions: Sequence[str], spec: PromptSpec) -> Prompt:
    """
    Build the prompt for one batch.

    Args:
        descriptions: Batch descriptions in order
        spec: Prompt settings

    Returns:
        Prompt with the role instruction as system message and task,
        format, worked examples and queries as user message

    Raises:
        EmptyBatch: If descriptions is empty
        OversizedBatch: If there are more descriptions than spec.batch_size
    """
    if not descriptions:
        raise EmptyBatch("Cannot build a prompt for an empty batch")
    if len(descriptions) > spec.batch_size:
        raise OversizedBatch(
            f"Batch of {len(descriptions)} exceeds batch size {spec.batch_size}"
        )

    sections: List[str] = [TASK_INSTRUCTION, OUTPUT_FORMAT_INSTRUCTION]

    if spec.shot_examples:
        examples = []
        for number, example in enumerate(spec.shot_examples, start=1):
            examples.append(
                f"Example {number}\n"
                f"Description: {redact_identifiers(example.description)}\n"
                f"Answer: {format_labels(example.labels)}"
            )
        sections.append("Worked examples:\n\n" + "\n\n".join(examples))

    queries = [
        f"Description {number}: {redact_identifiers(text)}"
        for number, text in enumerate(descriptions, start=1)
    ]
    sections.append(
        f"Now answer for the following {len(descriptions)} description(s):\n\n" + "\n\n".join(queries)
    )

    return Prompt(system=ROLE_INSTRUCTION, user="\n\n".join(sections))


def normalize_label(field: str, kind: MetricKind) -> str:
    """
    Map one response field onto a metric code, or UNKNOWN.

    Case-insensitive; accepts codes ("N") and words ("NETWORK"), surrounding
    whitespace/punctuation and "AV:N" style prefixes.
    """
    if field is None:
        return UNKNOWN
    value = str(field).strip(_STRIP_CHARS)
    if ":" in value:
        value = value.rsplit(":", 1)[1]
    value = " ".join(value.replace("_", " ").split()).strip(_STRIP_CHARS).upper()
    return _SYNONYMS[MetricKind(kind)].get(value, UNKNOWN)


def _answer_lines(raw: str) -> List[str]:
    """
    Answer lines in position order.

    Fences, table rules, header rows and an introduction ending in ":" before
    the first answer are dropped. Any other non-empty line keeps its slot, so a
    prose line in place of an answer spoils only its own CVE.
    """
    lines: List[str] = []
    for line in (raw or "").splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("```"):
            continue
        if "|" not in stripped:
            if not lines and stripped.endswith(":"):
                continue
            lines.append(stripped)
            continue
        if _RULE_LINE.match(stripped):
            continue
        stripped = _BULLET.sub("", _ENUMERATION.sub("", stripped))
        if stripped.lower().startswith("answer:"):
            stripped = stripped[len("answer:"):]
        cells = [cell.strip().upper() for cell in stripped.strip().strip("|").split("|")]
        if cells and all(cell in _HEADER_WORDS for cell in cells):
            continue
        lines.append(stripped.strip())
    return lines


def parse_line(line: str, cve_id: str, model_id: str) -> PredictionSet:
    fields = [cell for cell in line.strip().strip("|").split("|")]
    if len(fields) != len(REPORT_ORDER):
        return PredictionSet.all_unknown(cve_id, model_id)
    values = {kind: normalize_label(text, kind) for kind, text in zip(REPORT_ORDER, fields)}
    return PredictionSet(cve_id=cve_id, model_id=model_id, labels=BaseVector.from_mapping(values))


class ResponseParser(LoggerMixin):
    """Maps a raw provider response onto the batch's CVE ids."""

    def parse(self, raw: str, cve_ids: Sequence[str], model_id: str) -> List[PredictionSet]:
        """
        The i-th answer line belongs to the i-th CVE; missing or malformed
        lines give all-UNKNOWN predictions and surplus lines are dropped.
        """
        if not cve_ids:
            raise EmptyBatch("Cannot parse a response for an empty batch")

        lines = _answer_lines(raw)
        if len(lines) != len(cve_ids):
            self.logger.warning(
                "Response line count differs from batch",
                model_id=model_id,
                expected=len(cve_ids),
                received=len(lines)
            )

        predictions = []
        for index, cve_id in enumerate(cve_ids):
            line: Optional[str] = lines[index] if index < len(lines) else None
            if line is None:
                predictions.append(PredictionSet.all_unknown(cve_id, model_id))
            else:
                predictions.append(parse_line(line, cve_id, model_id))
        return predictions


def parse_response(raw: str, cve_ids: Sequence[str], model_id: str = "") -> List[PredictionSet]:
    return ResponseParser().parse(raw, cve_ids, model_id)
