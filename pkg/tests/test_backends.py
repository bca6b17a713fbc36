from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import pytest

from scenedesc.backends import (
    BackendConfig,
    MockLlmBackend,
    annotation_text,
    canonical_body,
    llm_answer,
    vlm_describe,
)
from scenedesc.descriptions import DescriptionRecord, DescriptionStatus, VlmRequest
from scenedesc.errors import BackendError, DomainError, ProtocolError
from scenedesc.prompting import PromptBundle

DATA = Path(__file__).parent / "data"


def sample_request():
    return VlmRequest(
        view_id="view_front",
        key_object_index=0,
        visible_object_indices=(0, 1),
        prompt_text=(
            "Describe clearly and briefly the relationships between the table in the "
            "scene and nearby objects (chair 1). Do not describe objects you cannot see."
        ),
        annotations=((0, (320.0, 302.5), "table"), (1, (176.0, 292.0), "chair 1")),
    )


def test_canonical_body_is_byte_stable():
    body = canonical_body("m", [{"content": "hi", "role": "user"}])
    assert body == canonical_body("m", [{"role": "user", "content": "hi"}])
    assert body == b'{"messages":[{"content":"hi","role":"user"}],"model":"m"}'


def test_vlm_request_body_matches_golden_fixture():
    body = canonical_body(
        "vlm-test",
        [{"content": [{"text": annotation_text(sample_request()), "type": "text"}], "role": "user"}],
    )
    assert body == (DATA / "vlm_request_golden.json").read_bytes()


def test_llm_request_body_matches_golden_fixture():
    body = canonical_body(
        "llm-test",
        [{"content": "SYSTEM TEXT", "role": "system"}, {"content": "USER TEXT", "role": "user"}],
    )
    assert body == (DATA / "llm_request_golden.json").read_bytes()


def test_annotation_text_renders_anchors():
    text = annotation_text(sample_request())
    assert text.endswith("Objects annotated in the image: table at (320, 302), chair 1 at (176, 292).")


def test_backend_config_validation():
    with pytest.raises(DomainError):
        BackendConfig("http://x", "m", timeout_ms=0)
    with pytest.raises(DomainError):
        BackendConfig("http://x", "m", request_parallelism=0)


class ScriptedHandler(BaseHTTPRequestHandler):
    """Serves a scripted sequence of (status, payload) responses."""

    script = []
    bodies = []
    lock = threading.Lock()

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = self.rfile.read(length)
        with ScriptedHandler.lock:
            ScriptedHandler.bodies.append((self.headers.get("Authorization"), body))
            status, payload = (
                ScriptedHandler.script.pop(0) if ScriptedHandler.script else (200, b"{}")
            )
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def scripted_server():
    server = HTTPServer(("127.0.0.1", 0), ScriptedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    ScriptedHandler.script = []
    ScriptedHandler.bodies = []
    yield server
    server.shutdown()
    thread.join(timeout=2)


def ok_payload(text):
    return json.dumps({"choices": [{"message": {"content": text}}]}).encode()


def config_for(server, **overrides):
    host, port = server.server_address
    defaults = dict(timeout_ms=2000, max_retries=2, auth_token_env_var="")
    defaults.update(overrides)
    return BackendConfig(f"http://{host}:{port}/v1/chat/completions", "test-model", **defaults)


def test_vlm_describe_success(scripted_server, monkeypatch):
    ScriptedHandler.script = [(200, ok_payload("a table next to a chair"))]
    config = config_for(scripted_server)
    assert vlm_describe(config, sample_request()) == "a table next to a chair"
    _, body = ScriptedHandler.bodies[0]
    payload = json.loads(body)
    assert payload["model"] == "test-model"
    assert payload["messages"][0]["content"][0]["type"] == "text"


def test_retry_then_success(scripted_server, monkeypatch):
    monkeypatch.setattr("scenedesc.backends.time.sleep", lambda s: None)
    ScriptedHandler.script = [(500, b"boom"), (500, b"boom"), (200, ok_payload("ok"))]
    config = config_for(scripted_server, max_retries=2)
    assert vlm_describe(config, sample_request()) == "ok"
    assert len(ScriptedHandler.bodies) == 3
    # retries resend the identical body
    assert ScriptedHandler.bodies[0][1] == ScriptedHandler.bodies[1][1] == ScriptedHandler.bodies[2][1]


def test_retries_exhausted_raises_backend_error(scripted_server, monkeypatch):
    monkeypatch.setattr("scenedesc.backends.time.sleep", lambda s: None)
    ScriptedHandler.script = [(500, b"x")] * 3
    config = config_for(scripted_server, max_retries=2)
    with pytest.raises(BackendError, match="after 3 attempts"):
        vlm_describe(config, sample_request())


def test_client_error_is_not_retried(scripted_server):
    ScriptedHandler.script = [(403, b"denied")]
    config = config_for(scripted_server, max_retries=2)
    with pytest.raises(BackendError, match="status 403"):
        vlm_describe(config, sample_request())
    assert len(ScriptedHandler.bodies) == 1


def test_malformed_response_is_protocol_error(scripted_server):
    ScriptedHandler.script = [(200, b'{"unexpected": "shape"}')]
    config = config_for(scripted_server)
    with pytest.raises(ProtocolError, match="malformed chat-completion response"):
        vlm_describe(config, sample_request())


def test_auth_header_from_env(scripted_server, monkeypatch):
    monkeypatch.setenv("SCENEDESC_TOKEN", "secret-token")
    ScriptedHandler.script = [(200, ok_payload("hi"))]
    config = config_for(scripted_server, auth_token_env_var="SCENEDESC_TOKEN")
    bundle = PromptBundle("sys", "", (), "user text", "full")
    assert llm_answer(config, bundle) == "hi"
    auth, body = ScriptedHandler.bodies[0]
    assert auth == "Bearer secret-token"
    payload = json.loads(body)
    assert payload["messages"][0] == {"content": "sys", "role": "system"}
    assert payload["messages"][1] == {"content": "user text", "role": "user"}


def test_unreachable_endpoint(monkeypatch):
    monkeypatch.setattr("scenedesc.backends.time.sleep", lambda s: None)
    config = BackendConfig("http://127.0.0.1:1/cc", "m", timeout_ms=200, max_retries=1)
    with pytest.raises(BackendError):
        llm_answer(config, PromptBundle("s", "", (), "u", "f"))


def test_mock_llm_strips_injected_text(toy):
    from scenedesc.backends import MockVlmBackend
    from scenedesc.descriptions import describe_scene
    from scenedesc.pipeline import project_scene
    from scenedesc.prompting import assemble_prompt

    records = describe_scene(toy, project_scene(toy), MockVlmBackend(toy))
    backend = MockLlmBackend(toy, records)
    query = f"Which object matches this description: {records[2].text}"
    bundle = assemble_prompt(toy, records, query)
    assert bundle.injected_descriptions  # injection happened
    assert backend.answer(bundle) == "<OBJ002>"


def test_mock_llm_unresolvable_query_is_empty(toy):
    records = {
        0: DescriptionRecord(0, "There is a table in the room.", "v", DescriptionStatus.GENERATED)
    }
    backend = MockLlmBackend(toy, records)
    bundle = PromptBundle("s", "", (), "Are there any bathtubs or sinks here?", "f")
    assert backend.answer(bundle) == ""
