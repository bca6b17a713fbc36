"""Dual-level integration at the language interface.

Detects which scene objects a query mentions, rewrites injected descriptions
per the reference-style policy (names, names+ids, or ids only), and assembles
the dialogue prompt around the serialized scene tokens.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .core import Scene, object_identifier
from .descriptions import DescriptionRecord, DescriptionStatus, scene_display_names, scene_name_map
from .errors import DomainError

log = logging.getLogger(__name__)

# Dialogue template defaults; config/prompt_templates.kv in the repo carries
# the same values for users who want to override them per run.
SYSTEM_TEMPLATE = (
    "A chat between a curious user and an artificial intelligence assistant. "
    "The assistant gives helpful, detailed, and polite answers to the user’s questions. "
    "The conversation centers around an indoor scene: [{scene_tokens}]."
)
USER_PREFIX = "User:"
ASSISTANT_PREFIX = "Assistant:"
SYSTEM_PREFIX = "System:"
FEATURE_PLACEHOLDER = "<FEAT{index:03d}>"

IDENTIFIER_PATTERN = re.compile(r"<OBJ(\d{3})>")


class ReferenceStyle(Enum):
    NAME_ONLY = "name"
    NAME_WITH_ID = "name-id"
    ID_ONLY = "id"

    @staticmethod
    def parse(value: str) -> "ReferenceStyle":
        for style in ReferenceStyle:
            if style.value == value:
                return style
        raise DomainError(f"unknown reference style {value!r} (expected name|name-id|id)")


@dataclass(frozen=True)
class IntegrationFlags:
    """Which of the two text-integration levels are active."""

    embedding_fusion: bool = True
    prompt_injection: bool = True


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    scene_token_placeholder: str
    injected_descriptions: tuple[str, ...]
    user_text: str
    full_text: str


@dataclass(frozen=True)
class PromptTemplates:
    system_template: str = SYSTEM_TEMPLATE
    system_prefix: str = SYSTEM_PREFIX
    user_prefix: str = USER_PREFIX
    assistant_prefix: str = ASSISTANT_PREFIX
    feature_placeholder: str = FEATURE_PLACEHOLDER


@dataclass(frozen=True)
class SceneVocabulary:
    """Lowercased name -> object indices, plus the identifier token map."""

    name_to_indices: Mapping[str, tuple[int, ...]]
    identifier_to_index: Mapping[str, int]

    def names(self) -> list[str]:
        return list(self.name_to_indices)


def build_scene_vocabulary(scene: Scene) -> SceneVocabulary:
    """Display names, bare category names, and identifier tokens of a scene.

    Display names map to their single object; a bare category maps to every
    object bearing it (ascending index).
    """
    display = scene_display_names(scene)
    name_to_indices: dict[str, tuple[int, ...]] = {}
    for index, name in display.items():
        name_to_indices[name.lower()] = (index,)
    categories: dict[str, list[int]] = {}
    for obj in scene.objects:
        categories.setdefault((obj.label or "object").lower(), []).append(obj.index)
    for label, indices in categories.items():
        if label not in name_to_indices:
            name_to_indices[label] = tuple(sorted(indices))
    identifiers = {obj.identifier: obj.index for obj in scene.objects}
    return SceneVocabulary(name_to_indices, identifiers)


def _name_alternation(names: Sequence[str], plural_tolerant: bool) -> re.Pattern:
    # Longest name first so the regex alternation is effectively longest-match.
    ordered = sorted(names, key=len, reverse=True)
    suffix = r"(?:e?s)?" if plural_tolerant else ""
    body = "|".join(f"(?:{re.escape(name)}){suffix}" for name in ordered)
    return re.compile(rf"(?<![a-z0-9])(?:{body})(?![a-z0-9])", re.IGNORECASE)


def detect_referenced_objects(query: str, vocabulary: SceneVocabulary) -> list[int]:
    """Objects a query mentions by name or identifier token.

    Longest-match, case-insensitive scan for names (plural-tolerant, word
    anchored); identifier tokens match exactly. A bare category name matches
    every object bearing it. Ordered by first occurrence, deduplicated.
    """
    hits: list[tuple[int, int]] = []  # (position in query, object index)
    for match in IDENTIFIER_PATTERN.finditer(query):
        token = match.group(0)
        if token in vocabulary.identifier_to_index:
            hits.append((match.start(), vocabulary.identifier_to_index[token]))
    names = vocabulary.names()
    if names:
        lowered = query.lower()
        pattern = _name_alternation(names, plural_tolerant=True)
        for match in pattern.finditer(lowered):
            surface = match.group(0)
            indices = vocabulary.name_to_indices.get(surface)
            if indices is None and surface.endswith("s"):
                indices = vocabulary.name_to_indices.get(surface[:-1])
            if indices is None and surface.endswith("es"):
                indices = vocabulary.name_to_indices.get(surface[:-2])
            if indices is None:
                continue
            for index in indices:
                hits.append((match.start(), index))
    hits.sort(key=lambda h: h[0])
    seen: set[int] = set()
    ordered = []
    for _, index in hits:
        if index not in seen:
            seen.add(index)
            ordered.append(index)
    return ordered


def rewrite_description(
    record: DescriptionRecord,
    style: ReferenceStyle,
    name_map: Mapping[str, int],
) -> str:
    """Apply the reference-style policy to one description.

    NAME_ONLY leaves the text as is. NAME_WITH_ID appends " (<OBJnnn>)" to the
    first occurrence of each name. ID_ONLY replaces every name occurrence with
    its identifier token. Matching is longest-first and word anchored so
    "table" never corrupts "vegetable".
    """
    text = record.text
    if style is ReferenceStyle.NAME_ONLY or not name_map:
        return text
    pattern = _name_alternation(list(name_map), plural_tolerant=False)
    lowered_map = {name.lower(): index for name, index in name_map.items()}

    if style is ReferenceStyle.ID_ONLY:
        def substitute(match: re.Match) -> str:
            return object_identifier(lowered_map[match.group(0).lower()])

        return pattern.sub(substitute, text)

    appended: set[str] = set()

    def append_id(match: re.Match) -> str:
        name = match.group(0).lower()
        if name in appended:
            return match.group(0)
        appended.add(name)
        return f"{match.group(0)} ({object_identifier(lowered_map[name])})"

    return pattern.sub(append_id, text)


def assemble_prompt(
    scene: Scene,
    records: Mapping[int, DescriptionRecord],
    query: str,
    style: ReferenceStyle = ReferenceStyle.ID_ONLY,
    flags: IntegrationFlags = IntegrationFlags(),
    templates: PromptTemplates = PromptTemplates(),
) -> PromptBundle:
    """Build the dialogue prompt for one query.

    With prompt injection on, the rewritten descriptions of the referenced
    objects are prepended to the user turn in detection order (objects with a
    Missing record are skipped with a warning). The embedding-fusion flag
    never touches the text; it only governs the token blocks.
    """
    placeholder = " ".join(
        f"{obj.identifier} {templates.feature_placeholder.format(index=obj.index)}"
        for obj in sorted(scene.objects, key=lambda o: o.index)
    )
    system_text = templates.system_template.format(scene_tokens=placeholder)

    injected: list[str] = []
    if flags.prompt_injection:
        vocabulary = build_scene_vocabulary(scene)
        name_map = scene_name_map(scene)
        for index in detect_referenced_objects(query, vocabulary):
            record = records.get(index)
            if record is None or record.status is DescriptionStatus.MISSING:
                log.warning("query references object %d but it has no description", index)
                continue
            injected.append(rewrite_description(record, style, name_map))

    user_text = " ".join(injected + [query]) if injected else query
    full_text = (
        f"{templates.system_prefix} {system_text}\n"
        f"{templates.user_prefix} {user_text}\n"
        f"{templates.assistant_prefix}"
    )
    return PromptBundle(
        system_text=system_text,
        scene_token_placeholder=placeholder,
        injected_descriptions=tuple(injected),
        user_text=user_text,
        full_text=full_text,
    )
