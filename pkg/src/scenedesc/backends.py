"""Model-call seams: an OpenAI-style chat-completion HTTP client for the
describer and responder roles, and deterministic mocks for offline runs.

Request bodies are canonical JSON (sorted keys, compact separators) so golden
protocol fixtures stay byte-stable. Auth tokens come only from the environment
variable named in the config, never from files.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import time
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import requests

from .core import Scene
from .descriptions import DescriptionRecord, DescriptionStatus, VlmRequest, mock_describe
from .errors import BackendError, DomainError, ProtocolError
from .metrics import tokenize
from .prompting import PromptBundle, build_scene_vocabulary, detect_referenced_objects

log = logging.getLogger(__name__)

RESPONSE_EXCERPT = 200


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str
    model_name: str
    timeout_ms: int = 30000
    max_retries: int = 2
    auth_token_env_var: str = ""
    request_parallelism: int = 4

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise DomainError("timeout must be positive")
        if self.request_parallelism < 1:
            raise DomainError("request parallelism must be >= 1")
        if self.max_retries < 0:
            raise DomainError("max_retries must be >= 0")


def canonical_body(model: str, messages: Sequence[Mapping]) -> bytes:
    """Chat-completion body with a stable byte encoding."""
    payload = {"model": model, "messages": list(messages)}
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def annotation_text(request: VlmRequest) -> str:
    """Render label-overlay metadata into the prompt when no image renderer
    is configured; anchors are reported as integer pixels."""
    if not request.annotations:
        return request.prompt_text
    parts = [
        f"{name} at ({anchor[0]:.0f}, {anchor[1]:.0f})"
        for _, anchor, name in request.annotations
    ]
    return f"{request.prompt_text}\nObjects annotated in the image: {', '.join(parts)}."


def _post_chat(config: BackendConfig, body: bytes) -> str:
    headers = {"Content-Type": "application/json"}
    if config.auth_token_env_var:
        token = os.environ.get(config.auth_token_env_var, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
    timeout = config.timeout_ms / 1000.0
    last_error: Optional[Exception] = None
    for attempt in range(config.max_retries + 1):
        if attempt:
            time.sleep(min(0.5 * 2 ** (attempt - 1), 4.0))
        try:
            response = requests.post(config.endpoint_url, data=body, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            last_error = exc
            log.warning("backend request failed (attempt %d): %s", attempt + 1, exc)
            continue
        if response.status_code >= 500:
            last_error = BackendError(f"server error {response.status_code}")
            log.warning("backend returned %d (attempt %d)", response.status_code, attempt + 1)
            continue
        if response.status_code != 200:
            raise BackendError(f"backend returned status {response.status_code}")
        try:
            data = response.json()
            content = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise ProtocolError(
                f"malformed chat-completion response: {response.text[:RESPONSE_EXCERPT]!r}"
            ) from None
        if not isinstance(content, str):
            raise ProtocolError(f"non-text content in response: {str(content)[:RESPONSE_EXCERPT]!r}")
        return content
    raise BackendError(f"backend unreachable after {config.max_retries + 1} attempts: {last_error}")


def vlm_describe(config: BackendConfig, request: VlmRequest, image_bytes: Optional[bytes] = None) -> str:
    """Ask the vision-language endpoint to describe a key object's relations.

    Without image bytes the annotation metadata is folded into the text
    prompt; with them the image travels as a base64 data URL.
    """
    if image_bytes is None:
        content = [{"type": "text", "text": annotation_text(request)}]
    else:
        encoded = base64.b64encode(image_bytes).decode("ascii")
        content = [
            {"type": "text", "text": request.prompt_text},
            {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{encoded}"}},
        ]
    body = canonical_body(config.model_name, [{"content": content, "role": "user"}])
    return _post_chat(config, body)


def llm_answer(config: BackendConfig, bundle: PromptBundle) -> str:
    """Send an assembled prompt bundle to the responder endpoint."""
    messages = [
        {"content": bundle.system_text, "role": "system"},
        {"content": bundle.user_text, "role": "user"},
    ]
    body = canonical_body(config.model_name, messages)
    return _post_chat(config, body)


class HttpDescriptionBackend:
    """DescriptionBackend adapter over the chat-completion client."""

    def __init__(self, config: BackendConfig):
        self.config = config

    def describe(self, request: VlmRequest) -> str:
        return vlm_describe(self.config, request)


class MockVlmBackend:
    """Deterministic describer answering from scene geometry."""

    def __init__(self, scene: Scene):
        self.scene = scene

    def describe(self, request: VlmRequest) -> str:
        return mock_describe(request, self.scene)


class MockLlmBackend:
    """Deterministic responder for the end-to-end mock path.

    The query (the user turn minus any injected descriptions) is resolved to
    an object by name/identifier detection first, then by best lexical
    overlap with the stored descriptions (Jaccard over tokens, minimum 0.5,
    ties broken by lowest index). Queries containing the token "describe" get
    that object's description back; everything else gets its identifier; an
    unresolvable query yields an empty answer.
    """

    MIN_OVERLAP = 0.5

    def __init__(self, scene: Scene, records: Mapping[int, DescriptionRecord]):
        self.scene = scene
        self.records = {
            index: record
            for index, record in records.items()
            if record.status is not DescriptionStatus.MISSING
        }
        self._vocabulary = build_scene_vocabulary(scene)

    def _best_overlap(self, query: str) -> Optional[int]:
        query_tokens = set(tokenize(query))
        best_index, best_score = None, self.MIN_OVERLAP
        for index in sorted(self.records):
            desc_tokens = set(tokenize(self.records[index].text))
            union = query_tokens | desc_tokens
            score = len(query_tokens & desc_tokens) / len(union) if union else 0.0
            if score > best_score:
                best_index, best_score = index, score
        return best_index

    def resolve(self, query: str) -> Optional[int]:
        detected = [i for i in detect_referenced_objects(query, self._vocabulary) if i in self.records]
        if detected:
            return detected[0]
        return self._best_overlap(query)

    def answer(self, bundle: PromptBundle) -> str:
        query = bundle.user_text
        for injected in bundle.injected_descriptions:
            query = query.replace(injected, "", 1)
        query = query.strip()
        best = self.resolve(query)
        if best is None:
            return ""
        if "describe" in tokenize(query):
            return self.records[best].text
        return self.scene.object_by_index(best).identifier
