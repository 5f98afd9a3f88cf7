"""Prompt assembly from templates.

Templates are plain strings with named placeholders: {field} pulls a text
field from the example and {label} its (optionally verbalized) label.
Literal braces are written {{ and }}. A full prompt is the optional task
description, each rendered demonstration in the order the action dictates,
and the rendered query with its answer slot left empty, joined by the
separator (default: one newline).
"""

from __future__ import annotations

from dataclasses import dataclass
from string import Formatter

from .errors import InvalidInputError, RenderError
from .selection import Example

_FORMATTER = Formatter()

LABEL_PLACEHOLDER = "label"


def placeholders(pattern: str) -> list[str]:
    """Placeholder names in a pattern, in order; rejects non-name syntax."""
    names = []
    try:
        parsed = list(_FORMATTER.parse(pattern))
    except ValueError as exc:
        raise RenderError(f"malformed template {pattern!r}: {exc}") from exc
    for _, name, spec, conversion in parsed:
        if name is None:
            continue
        if name == "" or spec or conversion or not name.isidentifier():
            raise RenderError(
                f"template {pattern!r}: only plain named placeholders are supported, "
                f"got {{{name}{'!' + conversion if conversion else ''}"
                f"{':' + spec if spec else ''}}}"
            )
        names.append(name)
    return names


@dataclass(frozen=True)
class Template:
    """A pattern plus an optional label -> verbalizer map."""

    pattern: str
    answer_choices: dict[str, str] | None = None

    def __post_init__(self):
        placeholders(self.pattern)  # validate syntax eagerly


def _label_text(t: Template, e: Example) -> str:
    if e.label is None:
        raise RenderError("template uses {label} but the example has no label")
    if t.answer_choices is None:
        return e.label
    text = t.answer_choices.get(e.label)
    if text is None:
        raise RenderError(f"label {e.label!r} has no entry in answer_choices")
    return text


def render_example(t: Template, e: Example) -> str:
    """Substitute the example's fields and verbalized label into the pattern."""
    out = []
    for literal, name, _, _ in _FORMATTER.parse(t.pattern):
        out.append(literal)
        if name is None:
            continue
        if name == LABEL_PLACEHOLDER:
            out.append(_label_text(t, e))
        elif name in e.fields:
            out.append(e.fields[name])
        else:
            raise RenderError(f"unresolved placeholder {{{name}}} for example {e.index}")
    return "".join(out)


def render_query(t: Template, fields: dict[str, str]) -> str:
    """Render the test query with the answer slot left empty.

    The pattern is truncated at the {label} placeholder, keeping whatever
    context precedes it (e.g. a trailing "Sentiment:").
    """
    out = []
    for literal, name, _, _ in _FORMATTER.parse(t.pattern):
        out.append(literal)
        if name is None:
            continue
        if name == LABEL_PLACEHOLDER:
            break
        if name not in fields:
            raise RenderError(f"unresolved placeholder {{{name}}} in the query")
        out.append(fields[name])
    return "".join(out)


@dataclass(frozen=True)
class PromptSpec:
    """Everything needed to turn ordered demonstrations plus a query into text."""

    template: Template
    query_template: Template | None = None  # None: reuse template, answer slot emptied
    task_description: str | None = None
    separator: str = "\n"

    def __post_init__(self):
        if self.separator == "":
            raise InvalidInputError("separator must be non-empty (default is a newline)")


def build_prompt(
    spec: PromptSpec, ordered: list[Example], query_fields: dict[str, str]
) -> str:
    """Concatenate task description, demonstrations in order, and the query."""
    segments = []
    if spec.task_description:
        segments.append(spec.task_description)
    for example in ordered:
        segments.append(render_example(spec.template, example))
    query_template = spec.query_template if spec.query_template is not None else spec.template
    segments.append(render_query(query_template, query_fields))
    return spec.separator.join(segments)
