"""Gold-label construction via an external annotator.

For each probing utterance, in temporal order, a client extracts the
earlier utterances that caused it (with one free-text rationale per
selection). An iterative labeling pass then grows chain labels: the
first extraction opens a fresh chain; later extractions merge into an
existing chain whenever any returned utterance (causal or an earlier
probing) is already labeled, and open a fresh chain otherwise. The raw
replies are logged so a run can be replayed deterministically.
"""

from __future__ import annotations

import abc
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .corpus import Dialogue, MentionRef, Utterance
from .errors import ConfigError, DataValidationError, ExternalServiceError

logger = logging.getLogger(__name__)

TEMPLATES = ("causal-extraction", "probing-detection")

DEFAULT_CONTEXT_LIMIT = 25  # prior utterances shown to the annotator

_CAUSAL_LINE = re.compile(r"^CAUSAL:\s*(\d+)\s*\|\s*RATIONALE:\s*(.*)$")
_PROBING_LINE = re.compile(r"^PROBING:\s*(yes|no)\s*\|\s*RATIONALE:\s*(.*)$", re.IGNORECASE)

_CAUSAL_PROMPT = """\
You are analyzing a multiparty collaborative dialogue. A probing utterance \
elicits responses or deliberation from the other participants without \
introducing new information. Your task: select every earlier utterance that \
directly contributed to the probing utterance below arising when it did.

Dialogue history (one utterance per line, numbered):
{context}

Probing utterance:
[{probing_index}] {probing_speaker}: {probing_text}

Select one or more causal antecedents from the numbered history. Earlier \
probing utterances are valid selections. Reply with exactly one line per \
selection, formatted as:
CAUSAL: <utterance number> | RATIONALE: <one sentence explaining the choice>
"""

_PROBING_PROMPT = """\
You are analyzing a multiparty collaborative dialogue. A probing utterance \
elicits responses or deliberation from the other participants without \
introducing new information of its own. Decide whether the target utterance \
below is probing.

Dialogue history (one utterance per line, numbered):
{context}

Target utterance:
[{probing_index}] {probing_speaker}: {probing_text}

Reply with exactly one line, formatted as:
PROBING: <yes or no> | RATIONALE: <one sentence explaining the decision>
"""


def render_prompt(
    probing: Utterance,
    context: list[Utterance],
    template: str = "causal-extraction",
) -> str:
    """Fill a prompt template with numbered context and the target utterance."""
    if template not in TEMPLATES:
        raise ConfigError(f"unknown template {template!r}")
    if not context:
        raise DataValidationError(
            f"utterance {probing.index} has no prior context to annotate against"
        )
    if any(u.index >= probing.index for u in context):
        raise DataValidationError("context must precede the probing utterance")
    lines = "\n".join(f"[{u.index}] {u.speaker}: {u.text}" for u in context)
    body = _CAUSAL_PROMPT if template == "causal-extraction" else _PROBING_PROMPT
    return body.format(
        context=lines,
        probing_index=probing.index,
        probing_speaker=probing.speaker,
        probing_text=probing.text,
    )


@dataclass(frozen=True)
class AnnotationResponse:
    causal_refs: tuple[int, ...]
    rationales: tuple[str, ...]
    raw_reply: str = ""


def parse_reply(reply: str) -> AnnotationResponse:
    """Extract CAUSAL/RATIONALE lines; anything unparseable yields no refs."""
    refs, rationales = [], []
    for line in reply.splitlines():
        match = _CAUSAL_LINE.match(line.strip())
        if match:
            refs.append(int(match.group(1)))
            rationales.append(match.group(2).strip())
    if not refs and reply.strip():
        logger.warning("annotator reply had no parseable CAUSAL lines: %r", reply[:120])
    return AnnotationResponse(
        causal_refs=tuple(refs), rationales=tuple(rationales), raw_reply=reply
    )


def parse_probing_reply(reply: str) -> bool | None:
    """yes/no from a probing-detection reply; None when unparseable."""
    for line in reply.splitlines():
        match = _PROBING_LINE.match(line.strip())
        if match:
            return match.group(1).lower() == "yes"
    return None


class AnnotatorClient(abc.ABC):
    @abc.abstractmethod
    def annotate(
        self,
        probing: Utterance,
        context: list[Utterance],
        template: str = "causal-extraction",
    ) -> AnnotationResponse: ...


class MockAnnotator(AnnotatorClient):
    """Scripted client: maps probing utterance index → [(ref, rationale)]."""

    def __init__(self, script: dict[int, list[tuple[int, str]]]):
        self.script = script

    def annotate(self, probing, context, template="causal-extraction"):
        render_prompt(probing, context, template)  # same validation as a real call
        entries = self.script.get(probing.index, [])
        reply = "\n".join(f"CAUSAL: {ref} | RATIONALE: {why}" for ref, why in entries)
        return parse_reply(reply)


class ReplayClient(AnnotatorClient):
    """Replays a logged transcript in call order."""

    def __init__(self, records: list[dict]):
        self.records = list(records)
        self.cursor = 0

    @classmethod
    def from_transcript(cls, path: str | Path) -> "ReplayClient":
        records = []
        with Path(path).open(encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    records.append(json.loads(line))
        return cls(records)

    def annotate(self, probing, context, template="causal-extraction"):
        render_prompt(probing, context, template)
        if self.cursor >= len(self.records):
            raise DataValidationError("transcript exhausted before annotation finished")
        record = self.records[self.cursor]
        self.cursor += 1
        if record["probing_index"] != probing.index:
            raise DataValidationError(
                f"transcript out of sync: recorded probing {record['probing_index']}, "
                f"requested {probing.index}"
            )
        return parse_reply(record["raw_reply"])


@dataclass(frozen=True)
class AnnotatorEndpointConfig:
    url: str
    model: str
    credential_env: str = "ANNOTATOR_API_KEY"
    timeout: float = 30.0
    max_attempts: int = 3
    backoff_base: float = 0.5


class HttpAnnotator(AnnotatorClient):
    """Chat-completion client with bounded exponential-backoff retries.

    The credential is read from the configured environment variable, and
    a custom httpx transport can be injected for tests. Thread-safe for
    concurrent dialogue workers (one httpx client, no mutable state).
    """

    def __init__(
        self,
        config: AnnotatorEndpointConfig,
        transport: httpx.BaseTransport | None = None,
        sleeper=time.sleep,
    ):
        key = os.environ.get(config.credential_env)
        if not key:
            raise ConfigError(
                f"annotator credential missing: set ${config.credential_env}"
            )
        self.config = config
        self._sleep = sleeper
        self._client = httpx.Client(
            transport=transport,
            timeout=config.timeout,
            headers={"Authorization": f"Bearer {key}"},
        )

    def annotate(self, probing, context, template="causal-extraction"):
        prompt = render_prompt(probing, context, template)
        payload = {
            "model": self.config.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        }
        last_error: Exception | None = None
        for attempt in range(self.config.max_attempts):
            if attempt:
                self._sleep(self.config.backoff_base * 2 ** (attempt - 1))
            try:
                response = self._client.post(self.config.url, json=payload)
                response.raise_for_status()
                reply = response.json()["choices"][0]["message"]["content"]
                return parse_reply(reply)
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                logger.warning("annotator attempt %d failed: %s", attempt + 1, exc)
        raise ExternalServiceError(
            f"annotator failed after {self.config.max_attempts} attempts: {last_error}"
        )


def http_annotator(
    config: AnnotatorEndpointConfig,
    transport: httpx.BaseTransport | None = None,
    sleeper=time.sleep,
) -> HttpAnnotator:
    return HttpAnnotator(config, transport=transport, sleeper=sleeper)


# ---------------------------------------------------------------------------
# Iterative gold cluster mapping
# ---------------------------------------------------------------------------

@dataclass
class AnnotationRecord:
    dialogue_id: str
    probing_index: int
    causal_refs: list[int]
    dropped_refs: list[int]
    rationales: list[str]
    raw_reply: str

    def to_dict(self) -> dict:
        return {
            "dialogue_id": self.dialogue_id,
            "probing_index": self.probing_index,
            "causal_refs": self.causal_refs,
            "dropped_refs": self.dropped_refs,
            "rationales": self.rationales,
            "raw_reply": self.raw_reply,
        }


@dataclass
class GoldMap:
    labels: dict[MentionRef, str] = field(default_factory=dict)
    responses: list[AnnotationRecord] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def clusters(self) -> dict[str, list[MentionRef]]:
        out: dict[str, list[MentionRef]] = {}
        for ref, label in self.labels.items():
            out.setdefault(label, []).append(ref)
        for members in out.values():
            members.sort()
        return out


def gold_cluster_mapping(
    dialogues: list[Dialogue],
    probing_lists: dict[str, list[int]],
    client: AnnotatorClient,
    context_limit: int | None = DEFAULT_CONTEXT_LIMIT,
) -> GoldMap:
    """Iteratively label chains from per-probing causal extractions.

    Per dialogue, probing utterances are visited in temporal order. The
    first extraction assigns one fresh chain label to the probing and
    all its returned antecedents. For later probings: if any returned
    antecedent already carries a label, the probing inherits it and the
    still-unlabeled antecedents join that chain; if instead a returned
    antecedent is an earlier (unlabeled) probing, both probings and all
    returned antecedents merge under one label, overwriting any labels
    the antecedents held (each overwrite is flagged); otherwise a fresh
    label is opened exactly as for the first probing.
    """
    goldmap = GoldMap()
    counter = 0

    def fresh() -> str:
        nonlocal counter
        counter += 1
        return f"g{counter}"

    for dialogue in dialogues:
        probings = probing_lists.get(dialogue.id, [])
        if sorted(probings) != list(probings):
            raise DataValidationError(
                f"probing list for dialogue {dialogue.id!r} is not in temporal order"
            )
        earlier_probings: list[int] = []
        for t in probings:
            if not (0 <= t < len(dialogue)):
                raise DataValidationError(
                    f"probing index {t} outside dialogue {dialogue.id!r}"
                )
            lo = 0 if context_limit is None else max(0, t - context_limit)
            context = list(dialogue.utterances[lo:t])
            if not context:
                goldmap.flags.append(f"{dialogue.id}:{t}: no prior context, skipped")
                earlier_probings.append(t)
                continue

            response = client.annotate(dialogue.utterances[t], context)
            in_range = {u.index for u in context}
            valid = [r for r in response.causal_refs if r in in_range]
            dropped = [r for r in response.causal_refs if r not in in_range]
            for r in dropped:
                goldmap.flags.append(
                    f"{dialogue.id}:{t}: annotator returned out-of-range utterance {r}"
                )
            goldmap.responses.append(
                AnnotationRecord(
                    dialogue_id=dialogue.id,
                    probing_index=t,
                    causal_refs=valid,
                    dropped_refs=dropped,
                    rationales=list(response.rationales),
                    raw_reply=response.raw_reply,
                )
            )
            if not valid:
                goldmap.flags.append(f"{dialogue.id}:{t}: empty extraction, left unlabeled")
                earlier_probings.append(t)
                continue

            refs = [(dialogue.id, r) for r in valid]
            probing_ref = (dialogue.id, t)
            labeled = [ref for ref in refs if ref in goldmap.labels]
            if labeled:
                label = goldmap.labels[labeled[0]]
                goldmap.labels[probing_ref] = label
                for ref in refs:
                    if ref not in goldmap.labels:
                        goldmap.labels[ref] = label
            else:
                merge_target = next((r for r in valid if r in earlier_probings), None)
                if merge_target is not None:
                    target_ref = (dialogue.id, merge_target)
                    label = goldmap.labels.get(target_ref)
                    if label is None:
                        label = fresh()
                        goldmap.labels[target_ref] = label
                    goldmap.labels[probing_ref] = label
                    for ref in refs:
                        previous = goldmap.labels.get(ref)
                        if previous is not None and previous != label:
                            goldmap.flags.append(
                                f"{dialogue.id}:{ref[1]}: relabeled {previous} -> {label} "
                                f"while merging into probing {merge_target}"
                            )
                        goldmap.labels[ref] = label
                else:
                    label = fresh()
                    for ref in refs:
                        goldmap.labels[ref] = label
                    goldmap.labels[probing_ref] = goldmap.labels[refs[0]]
            earlier_probings.append(t)

            assert all(isinstance(v, str) and v for v in goldmap.labels.values())
    return goldmap


def transcript_text(goldmap: GoldMap) -> str:
    return "".join(
        json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) + "\n"
        for r in goldmap.responses
    )


def write_transcript(goldmap: GoldMap, path: str | Path) -> None:
    Path(path).write_text(transcript_text(goldmap), encoding="utf-8")


def goldmap_records(goldmap: GoldMap, probing_lists: dict[str, list[int]]) -> list[dict]:
    """Flat {dialogue_id, index, label, cluster} rows for the gold-map artifact."""
    probing_refs = {
        (did, idx) for did, indices in probing_lists.items() for idx in indices
    }
    rows = []
    for (did, idx), cluster in sorted(goldmap.labels.items()):
        rows.append(
            {
                "dialogue_id": did,
                "index": idx,
                "label": "P" if (did, idx) in probing_refs else "C",
                "cluster": cluster,
            }
        )
    return rows
