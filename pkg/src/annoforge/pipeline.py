"""Four-stage generation pipeline over one document at a time.

Stage order is strict: summarize the document, reorganize it into structured
JSON, derive per-document annotation guidelines (dataclass notation), then
extract instances of those classes. Each stage's prompt renders only from
earlier outputs plus the original document, every model call is audited as
a StageRecord, and unparseable output triggers a bounded repair loop before
the document is rejected.

Documents are independent; they may run concurrently, but results are
assembled in input order so a replay-backed run is byte-deterministic.
"""

from __future__ import annotations

import hashlib
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .corpus import Document
from .dataset import DatasetRecord
from .llm import LLMClient, LLMError, user_request
from .notation import (
    InstanceSet,
    ParseError,
    Schema,
    parse_guidelines,
    parse_instances,
    print_guidelines,
)
from .validation import filter_instances

STAGES = ("summarize", "structure", "guidelines", "instances")
STAGE_PLACEHOLDERS = {
    "summarize": ("document",),
    "structure": ("document", "summary"),
    "guidelines": ("document", "summary", "structured_json"),
    "instances": ("document", "structured_json", "guidelines"),
}
_PLACEHOLDER_RE = re.compile(r"\{(document|summary|structured_json|guidelines)\}")
_FENCE_RE = re.compile(r"```[a-zA-Z]*\s*\n(.*?)```", re.DOTALL)

MAX_PARSE_ATTEMPTS = 3  # first ask plus two repair re-asks


class StageError(Exception):
    def __init__(self, stage: str, doc_id: str, reason: str) -> None:
        self.stage = stage
        self.doc_id = doc_id
        self.reason = reason
        super().__init__(f"stage {stage} failed for {doc_id}: {reason}")


@dataclass
class PromptTemplate:
    """A stage prompt with named placeholders, versioned by content hash."""

    stage: str
    template_text: str
    version: str = ""

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        required = STAGE_PLACEHOLDERS[self.stage]
        found = _PLACEHOLDER_RE.findall(self.template_text)
        for name in required:
            if found.count(name) != 1:
                raise ValueError(f"{self.stage} template must use {{{name}}} exactly "
                                 f"once, found {found.count(name)}")
        for name in found:
            if name not in required:
                raise ValueError(f"{self.stage} template must not use {{{name}}}")
        if not self.version:
            digest = hashlib.sha256(self.template_text.encode("utf-8")).hexdigest()
            self.version = digest[:8]

    def render(self, **bindings: str) -> str:
        required = STAGE_PLACEHOLDERS[self.stage]
        missing = [name for name in required if name not in bindings]
        if missing:
            raise ValueError(f"unbound placeholders: {missing}")
        # single pass, so placeholder-like text inside bindings is left alone
        return _PLACEHOLDER_RE.sub(lambda m: bindings[m.group(1)], self.template_text)


def load_template(path: str | Path, stage: str) -> PromptTemplate:
    return PromptTemplate(stage=stage,
                          template_text=Path(path).read_text(encoding="utf-8"))


def default_templates() -> dict[str, PromptTemplate]:
    """The packaged template assets, one per stage."""
    directory = Path(__file__).parent / "templates"
    return {stage: load_template(directory / f"{stage}.txt", stage)
            for stage in STAGES}


@dataclass
class StageRecord:
    doc_id: str
    stage: str
    rendered_prompt: str
    raw_response: str
    parsed_ok: bool
    attempt: int


@dataclass
class StructuredEntry:
    label: str
    attributes: dict[str, str | list[str]]


@dataclass
class StructuredRecord:
    doc_id: str
    entries: list[StructuredEntry]


@dataclass
class RejectEntry:
    doc_id: str
    stage: str
    reason: str


@dataclass
class PipelineResult:
    records: list[DatasetRecord]
    rejects: list[RejectEntry]
    trail: list[StageRecord] = field(default_factory=list)


def _ask(client: LLMClient, prompt: str, parse, doc_id: str, stage: str,
         trail: list[StageRecord]):
    """Ask, parse, and re-ask with the parser's complaint appended on failure."""
    last_error = "no attempts made"
    for attempt in range(1, MAX_PARSE_ATTEMPTS + 1):
        rendered = prompt if attempt == 1 else (
            f"{prompt}\n\nYour previous response could not be used "
            f"({last_error}). Answer again, following the required format exactly.")
        try:
            response = client.complete(user_request(rendered, params=client.params))
        except LLMError as exc:
            raise StageError(stage, doc_id, str(exc)) from exc
        if response.finish_reason == "length":
            last_error = "response truncated by the token limit"
            trail.append(StageRecord(doc_id=doc_id, stage=stage,
                                     rendered_prompt=rendered,
                                     raw_response=response.text,
                                     parsed_ok=False, attempt=attempt))
            continue
        try:
            value = parse(response.text)
            parsed_ok = True
        except (ParseError, ValueError) as exc:
            last_error = str(exc)
            parsed_ok = False
        trail.append(StageRecord(doc_id=doc_id, stage=stage,
                                 rendered_prompt=rendered,
                                 raw_response=response.text,
                                 parsed_ok=parsed_ok, attempt=attempt))
        if parsed_ok:
            return value
    raise StageError(stage, doc_id, last_error)


def strip_fences(text: str) -> str:
    """Return the contents of the first markdown code fence, if any."""
    m = _FENCE_RE.search(text)
    return m.group(1) if m else text


def stage_summarize(doc: Document, tmpl: PromptTemplate, client: LLMClient,
                    trail: list[StageRecord], doc_text: str | None = None) -> str:
    def parse(text: str) -> str:
        if not text.strip():
            raise ValueError("empty summary")
        return text.strip()

    prompt = tmpl.render(document=doc_text if doc_text is not None else doc.text)
    return _ask(client, prompt, parse, doc.doc_id, "summarize", trail)


def _parse_structured(text: str, doc_id: str) -> StructuredRecord:
    try:
        payload = json.loads(strip_fences(text).strip())
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc.msg}") from exc
    if isinstance(payload, dict) and isinstance(payload.get("entities"), list):
        payload = payload["entities"]
    if isinstance(payload, dict):
        payload = [{"label": label, "attributes": attrs}
                   for label, attrs in payload.items()]
    if not isinstance(payload, list):
        raise ValueError("expected a JSON array of entities")
    entries = []
    for item in payload:
        if not isinstance(item, dict):
            raise ValueError("each entity must be a JSON object")
        label = item.get("label") or item.get("type") or item.get("entity")
        if not isinstance(label, str) or not label.strip():
            raise ValueError("entity without a label")
        raw_attrs = item.get("attributes")
        if raw_attrs is None:
            raw_attrs = {k: v for k, v in item.items()
                         if k not in ("label", "type", "entity")}
        if not isinstance(raw_attrs, dict):
            raise ValueError(f"attributes of {label!r} must be an object")
        attrs: dict[str, str | list[str]] = {}
        for name, value in raw_attrs.items():
            attrs[name] = _coerce_value(label, name, value)
        entries.append(StructuredEntry(label=label.strip(), attributes=attrs))
    if not entries:
        raise ValueError("empty structured record")
    return StructuredRecord(doc_id=doc_id, entries=entries)


def _coerce_value(label: str, name: str, value) -> str | list[str]:
    def scalar(v) -> str:
        if isinstance(v, (dict, list)):
            raise ValueError(f"nested value for {label}.{name} is not supported")
        text = v if isinstance(v, str) else json.dumps(v)
        if not text.strip():
            raise ValueError(f"empty value for {label}.{name}")
        return text

    if isinstance(value, list):
        if not value:
            raise ValueError(f"empty value for {label}.{name}")
        return [scalar(v) for v in value]
    return scalar(value)


def structured_to_json(record: StructuredRecord) -> str:
    return json.dumps([{"label": e.label, "attributes": e.attributes}
                       for e in record.entries], indent=2, ensure_ascii=False)


def stage_structure(doc: Document, summary: str, tmpl: PromptTemplate,
                    client: LLMClient, trail: list[StageRecord],
                    doc_text: str | None = None) -> StructuredRecord:
    prompt = tmpl.render(document=doc_text if doc_text is not None else doc.text,
                         summary=summary)
    return _ask(client, prompt, lambda text: _parse_structured(text, doc.doc_id),
                doc.doc_id, "structure", trail)


def stage_guidelines(doc: Document, summary: str, record: StructuredRecord,
                     tmpl: PromptTemplate, client: LLMClient,
                     trail: list[StageRecord],
                     doc_text: str | None = None) -> tuple[str, Schema]:
    def parse(text: str):
        return text, parse_guidelines(strip_fences(text))

    prompt = tmpl.render(document=doc_text if doc_text is not None else doc.text,
                         summary=summary,
                         structured_json=structured_to_json(record))
    return _ask(client, prompt, parse, doc.doc_id, "guidelines", trail)


def stage_instances(doc: Document, record: StructuredRecord, schema: Schema,
                    tmpl: PromptTemplate, client: LLMClient,
                    trail: list[StageRecord],
                    doc_text: str | None = None) -> InstanceSet:
    prompt = tmpl.render(document=doc_text if doc_text is not None else doc.text,
                         structured_json=structured_to_json(record),
                         guidelines=print_guidelines(schema))
    return _ask(client, prompt,
                lambda text: parse_instances(text, schema=schema, doc_id=doc.doc_id),
                doc.doc_id, "instances", trail)


def truncate_document(text: str, max_chars: int | None) -> tuple[str, bool]:
    """Tail-first truncation to a character budget, cut at a word boundary."""
    if max_chars is None or len(text) <= max_chars:
        return text, False
    cut = text[:max_chars]
    split_mid_word = (max_chars > 0 and not cut[-1].isspace()
                      and not text[max_chars].isspace())
    if split_mid_word and any(c.isspace() for c in cut.strip()):
        cut = cut.rsplit(None, 1)[0]
    return cut, True


def run_pipeline(docs: list[Document], templates: dict[str, PromptTemplate],
                 client: LLMClient, *, parallelism: int = 1,
                 keep_empty: bool = False, grounding: str = "normalized",
                 max_doc_chars: int | None = None,
                 skip_ids: frozenset[str] | set[str] = frozenset()) -> PipelineResult:
    """Run all four stages per document; failures reject, never abort.

    ``skip_ids`` supports resuming: documents already present in an output
    dataset are not reprocessed.
    """
    for stage in STAGES:
        if stage not in templates:
            raise ValueError(f"missing template for stage {stage!r}")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    pending = [doc for doc in docs if doc.doc_id not in skip_ids]

    def process(doc: Document):
        trail: list[StageRecord] = []
        doc_text, truncated = truncate_document(doc.text, max_doc_chars)
        try:
            summary = stage_summarize(doc, templates["summarize"], client,
                                      trail, doc_text)
            structured = stage_structure(doc, summary, templates["structure"],
                                         client, trail, doc_text)
            guidelines_text, schema = stage_guidelines(
                doc, summary, structured, templates["guidelines"], client,
                trail, doc_text)
            raw_instances = stage_instances(doc, structured, schema,
                                            templates["instances"], client,
                                            trail, doc_text)
        except StageError as exc:
            return None, RejectEntry(doc_id=doc.doc_id, stage=exc.stage,
                                     reason=exc.reason), trail
        kept, errors = filter_instances(raw_instances, schema, doc_text,
                                        grounding=grounding)
        if not kept.instances and not keep_empty:
            return None, RejectEntry(
                doc_id=doc.doc_id, stage="filter",
                reason=f"no instances survived validation "
                       f"({len(raw_instances.instances)} raw, "
                       f"{len(errors)} errors)"), trail
        record = DatasetRecord(
            doc_id=doc.doc_id,
            document=doc_text,
            summary=summary,
            structured=structured,
            guidelines_text=guidelines_text,
            schema=schema,
            instances=kept,
            validation={
                "grounding": grounding,
                "raw_count": len(raw_instances.instances),
                "kept_count": len(kept.instances),
                "errors": [{"code": e.code.value, "instance_index": e.instance_index,
                            "class_name": e.class_name, "field": e.field,
                            "message": e.message} for e in errors],
            },
            meta={
                "templates": {stage: templates[stage].version for stage in STAGES},
                "model": client.params.model_name,
                "backend": client.backend,
                "truncated": truncated,
                "grounding": grounding,
                # wall-clock stamps would break replay byte-determinism
                "generated_at": (None if client.backend == "replay" else
                                 datetime.now(timezone.utc).isoformat()),
            },
        )
        return record, None, trail

    if parallelism == 1 or len(pending) <= 1:
        outcomes = [process(doc) for doc in pending]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(process, pending))

    result = PipelineResult(records=[], rejects=[])
    for record, reject, trail in outcomes:  # input order, for determinism
        result.trail.extend(trail)
        if record is not None:
            result.records.append(record)
        else:
            result.rejects.append(reject)
    return result


def write_trail(trail: list[StageRecord], path: str | Path) -> None:
    """Audit log: one StageRecord per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in trail:
            fh.write(json.dumps({
                "doc_id": record.doc_id, "stage": record.stage,
                "attempt": record.attempt, "parsed_ok": record.parsed_ok,
                "rendered_prompt": record.rendered_prompt,
                "raw_response": record.raw_response,
            }, sort_keys=True, ensure_ascii=False) + "\n")
