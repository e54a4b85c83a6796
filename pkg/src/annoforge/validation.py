"""Static checks that bind extracted instances to a schema and a document.

Every check is purely structural; no model is consulted. The error taxonomy:

* ``UndefinedEntityType`` -- the instance names a class the schema lacks
* ``MisalignedAttribute`` -- a keyword that is not a field of the class
* ``MissingRequiredField`` -- a non-Optional field with no assignment
* ``TypeMismatch`` -- a list where text is declared, or text where a list is
* ``UngroundedSpan`` -- a value that does not occur in the source document
* ``EmptyValue`` -- a blank string, an empty list, or a blank list element

Grounding is controlled by a policy: ``exact`` requires verbatim substring
presence, ``normalized`` (the default) compares after case folding and
whitespace collapsing, ``off`` disables the check.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .notation import TEXT, TEXT_LIST, InstanceSet, Schema

GROUNDING_POLICIES = ("exact", "normalized", "off")


class ErrorCode(str, enum.Enum):
    UNDEFINED_ENTITY_TYPE = "UndefinedEntityType"
    MISALIGNED_ATTRIBUTE = "MisalignedAttribute"
    MISSING_REQUIRED_FIELD = "MissingRequiredField"
    TYPE_MISMATCH = "TypeMismatch"
    UNGROUNDED_SPAN = "UngroundedSpan"
    EMPTY_VALUE = "EmptyValue"

    def __str__(self) -> str:  # "ErrorCode.X" would leak into messages
        return self.value


@dataclass
class ValidationError:
    code: ErrorCode
    doc_id: str
    instance_index: int
    class_name: str
    field: str | None
    message: str


def normalize_span(text: str) -> str:
    """Collapse runs of whitespace and fold case, for lenient span matching."""
    return " ".join(text.split()).casefold()


def validate(instance_set: InstanceSet, schema: Schema, document: str,
             grounding: str = "normalized") -> list[ValidationError]:
    """Check every instance against the schema and the document.

    Returns one entry per violation, in instance order; an empty list means
    the set is clean under the given grounding policy.
    """
    if grounding not in GROUNDING_POLICIES:
        raise ValueError(f"unknown grounding policy {grounding!r}")
    classes = schema.class_map()
    norm_doc = normalize_span(document) if grounding == "normalized" else None
    errors: list[ValidationError] = []

    def add(code: ErrorCode, index: int, cname: str, fname: str | None, msg: str) -> None:
        errors.append(ValidationError(code=code, doc_id=instance_set.doc_id,
                                      instance_index=index, class_name=cname,
                                      field=fname, message=msg))

    for index, inst in enumerate(instance_set.instances):
        cls = classes.get(inst.class_name)
        if cls is None:
            add(ErrorCode.UNDEFINED_ENTITY_TYPE, index, inst.class_name, None,
                f"no class named {inst.class_name!r} in the schema")
        fields = cls.field_map() if cls is not None else {}
        for key, value in inst.assignments.items():
            fdef = fields.get(key)
            if cls is not None and fdef is None:
                add(ErrorCode.MISALIGNED_ATTRIBUTE, index, inst.class_name, key,
                    f"{inst.class_name} has no field {key!r}")
            elif fdef is not None:
                if fdef.kind == TEXT and isinstance(value, list):
                    add(ErrorCode.TYPE_MISMATCH, index, inst.class_name, key,
                        f"{key!r} expects text but got a list")
                elif fdef.kind == TEXT_LIST and isinstance(value, str):
                    add(ErrorCode.TYPE_MISMATCH, index, inst.class_name, key,
                        f"{key!r} expects a list but got text")
            spans = value if isinstance(value, list) else [value]
            if not spans or any(not s.strip() for s in spans):
                add(ErrorCode.EMPTY_VALUE, index, inst.class_name, key,
                    f"{key!r} is empty")
                continue
            if grounding == "off":
                continue
            for span in spans:
                grounded = (span in document if grounding == "exact"
                            else normalize_span(span) in norm_doc)
                if not grounded:
                    add(ErrorCode.UNGROUNDED_SPAN, index, inst.class_name, key,
                        f"value {span!r} of {key!r} does not occur in the document")
        if cls is not None:
            for fdef in cls.fields:
                if fdef.required and fdef.name not in inst.assignments:
                    add(ErrorCode.MISSING_REQUIRED_FIELD, index, inst.class_name,
                        fdef.name, f"required field {fdef.name!r} is not assigned")
    return errors


def filter_instances(instance_set: InstanceSet, schema: Schema, document: str,
                     grounding: str = "normalized"
                     ) -> tuple[InstanceSet, list[ValidationError]]:
    """Drop every instance with at least one violation.

    Returns the surviving instances (original order) plus all errors found.
    The survivors always re-validate cleanly under the same policy.
    """
    errors = validate(instance_set, schema, document, grounding=grounding)
    flagged = {e.instance_index for e in errors}
    kept = [inst for i, inst in enumerate(instance_set.instances) if i not in flagged]
    return InstanceSet(doc_id=instance_set.doc_id, instances=kept,
                       source_text=instance_set.source_text), errors
