"""Retrieval of in-context examples: nearest neighbors with label balancing.

Given a query embedding, the m most useful demonstrations are the
semantically closest ones. For classification tasks the pool is balanced
across labels so the prompt does not tilt toward whichever class happens to
sit nearby. The returned list is always sorted by descending similarity;
that canonical order is what defines rank 1 for the action encoding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .encoder import Embedding, EncoderBackend, cosine_similarity
from .errors import InvalidInputError, SelectionError


@dataclass
class Example:
    """One dataset row: text fields, an optional label, and a stable index."""

    index: int
    fields: dict[str, str]
    label: str | None = None
    embedding: Embedding | None = None


def retrieval_text(example_fields: dict[str, str], retrieval_fields: Sequence[str]) -> str:
    """Text used for similarity: the declared fields joined by a single space."""
    parts = []
    for name in retrieval_fields:
        value = example_fields.get(name)
        if not value:
            raise InvalidInputError(f"retrieval field {name!r} is missing or empty")
        parts.append(value)
    return " ".join(parts)


@dataclass
class InContextSet:
    """The pool demonstrations are drawn from, embedded and label-checked."""

    examples: list[Example]
    retrieval_fields: list[str]
    label_space: tuple[str, ...] | None = None  # kept sorted: the fixed label order

    def __post_init__(self):
        if not self.examples:
            raise InvalidInputError("in-context set is empty")
        seen: set[int] = set()
        dim = None
        for ex in self.examples:
            if ex.index in seen:
                raise InvalidInputError(f"duplicate example index {ex.index}")
            seen.add(ex.index)
            if ex.embedding is None:
                raise InvalidInputError(f"example {ex.index} has no embedding")
            if dim is None:
                dim = ex.embedding.dim
            elif ex.embedding.dim != dim:
                raise InvalidInputError(
                    f"example {ex.index} has dim {ex.embedding.dim}, expected {dim}"
                )
        if self.label_space is not None:
            self.label_space = tuple(sorted(self.label_space))
            allowed = set(self.label_space)
            for ex in self.examples:
                if ex.label not in allowed:
                    raise InvalidInputError(
                        f"example {ex.index} has label {ex.label!r} outside the label space"
                    )

    @property
    def dim(self) -> int:
        return self.examples[0].embedding.dim


def build_in_context_set(
    examples: Sequence[Example],
    encoder: EncoderBackend,
    retrieval_fields: Sequence[str],
    label_space: Sequence[str] | None = None,
) -> InContextSet:
    """Embed each example's retrieval text and assemble the pool."""
    texts = [retrieval_text(ex.fields, retrieval_fields) for ex in examples]
    embeddings = encoder.encode(texts)
    embedded = [replace(ex, embedding=emb) for ex, emb in zip(examples, embeddings)]
    return InContextSet(
        examples=embedded,
        retrieval_fields=list(retrieval_fields),
        label_space=tuple(label_space) if label_space is not None else None,
    )


def select_examples(s: Embedding, ic: InContextSet, m: int) -> list[Example]:
    """Pick the m demonstrations for a query state.

    Without a label space this is plain nearest-neighbor retrieval. With G
    labels and G < m, each label contributes its floor(m/G) closest examples
    and any remaining slots go to the globally closest unused ones; with
    G >= m, labels are visited in sorted order taking one closest example
    each until m are chosen. The result is sorted by descending similarity
    (ties broken by ascending index), which defines the rank-1-first
    canonical order downstream.
    """
    if m < 1:
        raise InvalidInputError(f"m must be >= 1, got {m}")
    if m > len(ic.examples):
        raise SelectionError(
            f"need {m} examples but the in-context set holds {len(ic.examples)}"
        )
    sims = {ex.index: cosine_similarity(s, ex.embedding) for ex in ic.examples}
    ranked = sorted(ic.examples, key=lambda ex: (-sims[ex.index], ex.index))

    if ic.label_space is None:
        chosen = ranked[:m]
    else:
        labels = ic.label_space
        if len(labels) < m:
            quota = m // len(labels)
            by_label: dict[str, list[Example]] = {lab: [] for lab in labels}
            for ex in ranked:
                by_label[ex.label].append(ex)
            chosen = []
            for lab in labels:
                pool = by_label[lab]
                if len(pool) < quota:
                    raise SelectionError(
                        f"label {lab!r} has only {len(pool)} examples, need {quota}"
                    )
                chosen.extend(pool[:quota])
            used = {ex.index for ex in chosen}
            for ex in ranked:  # fill the m - G*quota remainder globally
                if len(chosen) == m:
                    break
                if ex.index not in used:
                    chosen.append(ex)
                    used.add(ex.index)
        else:
            chosen = []
            for lab in labels:
                if len(chosen) == m:
                    break
                pool = [ex for ex in ranked if ex.label == lab]
                if not pool:
                    raise SelectionError(f"label {lab!r} has no examples to draw from")
                chosen.append(pool[0])

    return sorted(chosen, key=lambda ex: (-sims[ex.index], ex.index))


def load_examples(path: str | Path) -> list[Example]:
    """Read a JSON Lines dataset: {"index": n, "fields": {...}, "label": "..."} per line.

    "index" defaults to the 0-based position of the line; "label" is optional.
    Errors carry the file path and line number.
    """
    path = Path(path)
    out: list[Example] = []
    seen: set[int] = set()
    position = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or not isinstance(obj.get("fields"), dict):
                raise InvalidInputError(
                    f"{path}:{lineno}: each line needs a 'fields' object"
                )
            fields = {}
            for key, value in obj["fields"].items():
                if not isinstance(value, str):
                    raise InvalidInputError(
                        f"{path}:{lineno}: field {key!r} must be a string"
                    )
                fields[key] = value
            index = obj.get("index", position)
            if not isinstance(index, int) or index < 0:
                raise InvalidInputError(
                    f"{path}:{lineno}: 'index' must be a non-negative integer"
                )
            if index in seen:
                raise InvalidInputError(f"{path}:{lineno}: duplicate index {index}")
            seen.add(index)
            label = obj.get("label")
            if label is not None and not isinstance(label, str):
                raise InvalidInputError(f"{path}:{lineno}: 'label' must be a string")
            out.append(Example(index=index, fields=fields, label=label))
            position += 1
    if not out:
        raise InvalidInputError(f"{path}: dataset is empty")
    return out
