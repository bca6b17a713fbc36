"""Command-line front door chaining the pipeline stages and the evaluator.

Each stage reads and writes only the documented file formats, and every
output is a pure function of the inputs plus the seed, so re-running a stage
with unchanged inputs is a byte-level no-op.

Exit codes: 0 success, 2 validation error, 3 backend failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from . import io_formats
from .backends import BackendConfig, HttpDescriptionBackend, MockVlmBackend, llm_answer
from .core import Scene
from .descriptions import describe_scene
from .errors import BackendError, DomainError, FormatError
from .metrics import evaluate
from .pipeline import (
    EmbeddingDims,
    answer_tasks_mock,
    answer_to_prediction,
    build_scene_blocks,
    mock_point_embeddings,
    mock_visual_embeddings,
    project_scene,
    prompts_for_tasks,
    scene_tokens_with_flags,
    text_embeddings_for_records,
)
from .projection import KeyObjectPolicy
from .prompting import IntegrationFlags, PromptTemplates, ReferenceStyle
from .text_encoding import MockTextEncoder, encode_records
from .toy import toy_scene, toy_tasks

USAGE_EXIT = 64
VALIDATION_EXIT = 2
BACKEND_EXIT = 3


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(USAGE_EXIT)


@dataclass(frozen=True)
class RunConfig:
    scene: Optional[str] = None
    tasks: Optional[str] = None
    out: Optional[str] = None
    style: str = "id"
    embed_fusion: bool = True
    prompt_inject: bool = True
    backend: str = "mock"
    parallelism: int = 4
    seed: int = 42
    central_margin: float = 0.25
    min_visible: int = 50
    token_dim: int = 64
    text_dim: int = 768
    point_dim: int = 1024
    visual_dim: int = 1024


def parse_kv_config(path: Path) -> dict[str, str]:
    """Plain-text `key = value` config; '#' starts a comment."""
    values = {}
    for lineno, raw in enumerate(path.read_text("utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}: line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def load_run_config(path: Optional[str]) -> RunConfig:
    config = RunConfig()
    if not path:
        return config
    values = parse_kv_config(Path(path))
    updates = {}
    for key, value in values.items():
        if not hasattr(config, key):
            raise FormatError(f"{path}: unknown config key {key!r}")
        current = getattr(config, key)
        if isinstance(current, bool):
            if value.lower() not in _BOOL:
                raise FormatError(f"{path}: {key} must be a boolean, got {value!r}")
            updates[key] = _BOOL[value.lower()]
        elif isinstance(current, int):
            updates[key] = int(value)
        elif isinstance(current, float):
            updates[key] = float(value)
        else:
            updates[key] = value
    for key in ("scene", "tasks"):
        referenced = updates.get(key)
        if referenced and not Path(referenced).exists():
            raise FormatError(f"{path}: {key} path {referenced!r} does not exist")
    backend = updates.get("backend")
    if backend and backend != "mock" and not Path(backend).exists():
        raise FormatError(f"{path}: backend config {backend!r} does not exist")
    return replace(config, **updates)


def load_backend_config(path: str) -> BackendConfig:
    values = parse_kv_config(Path(path))
    try:
        return BackendConfig(
            endpoint_url=values["endpoint_url"],
            model_name=values["model_name"],
            timeout_ms=int(values.get("timeout_ms", 30000)),
            max_retries=int(values.get("max_retries", 2)),
            auth_token_env_var=values.get("auth_token_env_var", ""),
            request_parallelism=int(values.get("request_parallelism", 4)),
        )
    except KeyError as exc:
        raise FormatError(f"{path}: missing backend config key {exc}") from None


def load_templates(path: Optional[str]) -> PromptTemplates:
    if not path:
        return PromptTemplates()
    values = parse_kv_config(Path(path))
    known = {f.name for f in fields(PromptTemplates)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise FormatError(f"{path}: unknown template keys {unknown}")
    return PromptTemplates(**values)


def _load_scene(args) -> Scene:
    scene = io_formats.read_scene(args.scene) if getattr(args, "scene", None) else toy_scene()
    if getattr(args, "views", None):
        views = io_formats.read_views(args.views)
        scene = Scene(
            scene_id=scene.scene_id, objects=scene.objects, views=views,
            proposal_cap=scene.proposal_cap,
        )
    return scene


def _policy(args) -> KeyObjectPolicy:
    return KeyObjectPolicy(central_margin=args.central_margin, min_visible=args.min_visible)


def _projections_from_file(path: str):
    by_view: dict[str, list] = {}
    for row in io_formats.read_jsonl(path):
        view_id, result = io_formats.projection_from_row(row, source=path)
        by_view.setdefault(view_id, []).append(result)
    return by_view


def _descriptions_from_file(path: str):
    records = {}
    for row in io_formats.read_jsonl(path):
        record = io_formats.description_from_row(row, source=path)
        records[record.object_index] = record
    return records


def _tasks_from_file(path: str):
    return [io_formats.task_from_row(row, source=path) for row in io_formats.read_jsonl(path)]


def _vlm_backend(args, scene):
    if args.backend == "mock":
        return MockVlmBackend(scene)
    return HttpDescriptionBackend(load_backend_config(args.backend))


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.toy:
        scene = toy_scene()
        projections = project_scene(scene)
        records = describe_scene(scene, projections, MockVlmBackend(scene))
        tasks = toy_tasks(scene, records)
        io_formats.write_scene(out / "scene.json", scene)
        io_formats.write_jsonl(out / "tasks.jsonl", [io_formats.task_to_row(t) for t in tasks])
        print(f"wrote toy scene ({len(scene.objects)} objects, {len(scene.views)} views, "
              f"{len(tasks)} tasks) to {out}")
    else:
        if not args.scene:
            raise DomainError("ingest needs --scene or --toy")
        scene = io_formats.read_scene(args.scene)
        io_formats.write_scene(out / "scene.json", scene)
        print(f"validated and rewrote scene {scene.scene_id!r} to {out}")
    return 0


def cmd_project(args) -> int:
    scene = _load_scene(args)
    projections = project_scene(scene)
    rows = []
    for view in scene.views:
        for result in projections[view.view_id]:
            rows.append(io_formats.projection_to_row(view.view_id, result))
    io_formats.write_jsonl(args.out, rows)
    print(f"projected {len(scene.objects)} objects into {len(scene.views)} views -> {args.out}")
    return 0


def cmd_describe(args) -> int:
    scene = _load_scene(args)
    projections = (
        _projections_from_file(args.projections) if args.projections else project_scene(scene)
    )
    backend = _vlm_backend(args, scene)
    parallelism = args.parallelism
    if isinstance(backend, HttpDescriptionBackend):
        parallelism = min(parallelism, backend.config.request_parallelism)
    records = describe_scene(
        scene, projections, backend,
        policy=_policy(args), parallelism=parallelism, fallback=not args.no_fallback,
    )
    rows = [io_formats.description_to_row(records[i]) for i in sorted(records)]
    io_formats.write_jsonl(args.out, rows)
    print(f"described {len(rows)} objects -> {args.out}")
    return 0


def cmd_encode(args) -> int:
    records = _descriptions_from_file(args.descriptions)
    vectors = {
        i: rec.vector for i, rec in encode_records(records, MockTextEncoder(args.dim)).items()
    }
    io_formats.write_embedding_file(args.out, io_formats.FileKind.TEXT, args.dim, vectors)
    print(f"encoded {len(vectors)} descriptions at dim {args.dim} -> {args.out}")
    return 0


def cmd_fuse(args) -> int:
    scene = _load_scene(args)
    dims = EmbeddingDims(args.point_dim, args.visual_dim, args.text_dim, args.token_dim)
    if args.text_embeddings:
        _, text_vectors = io_formats.read_embedding_file(
            args.text_embeddings, expected_dim=dims.text, expected_kind=io_formats.FileKind.TEXT
        )
    else:
        raise DomainError("fuse needs --text-embeddings (run `encode` first)")
    if args.point_embeddings:
        _, point_vectors = io_formats.read_embedding_file(
            args.point_embeddings, expected_dim=dims.point, expected_kind=io_formats.FileKind.POINT3D
        )
    else:
        point_vectors = mock_point_embeddings(scene, dims.point, args.seed)
    if args.visual_embeddings:
        _, visual_vectors = io_formats.read_embedding_file(
            args.visual_embeddings, expected_dim=dims.visual, expected_kind=io_formats.FileKind.VISUAL2D
        )
    else:
        visual_vectors = mock_visual_embeddings(scene, project_scene(scene), dims.visual, args.seed)
    blocks = build_scene_blocks(scene, point_vectors, visual_vectors, text_vectors, dims, args.seed)
    flags = IntegrationFlags(embedding_fusion=not args.no_embed_fusion, prompt_injection=True)
    tokens = scene_tokens_with_flags(scene, blocks, flags)
    io_formats.write_scene_tokens(Path(args.out), scene.scene_id, tokens)
    print(f"fused {len(blocks)} token blocks (token dim {dims.token}) -> {args.out}")
    return 0


def cmd_prompt(args) -> int:
    scene = _load_scene(args)
    records = _descriptions_from_file(args.descriptions)
    tasks = _tasks_from_file(args.tasks)
    style = ReferenceStyle.parse(args.style)
    flags = IntegrationFlags(embedding_fusion=True, prompt_injection=not args.no_prompt_inject)
    bundles = prompts_for_tasks(scene, records, tasks, style, flags, load_templates(args.templates))
    io_formats.write_jsonl(
        args.out, [io_formats.bundle_to_row(iid, bundle) for iid, bundle in bundles]
    )
    print(f"assembled {len(bundles)} prompts (style {style.value}) -> {args.out}")
    return 0


def cmd_answer(args) -> int:
    scene = _load_scene(args)
    records = _descriptions_from_file(args.descriptions)
    tasks = _tasks_from_file(args.tasks)
    bundles = dict(
        io_formats.bundle_from_row(row, source=args.prompts)
        for row in io_formats.read_jsonl(args.prompts)
    )
    if args.backend == "mock":
        predictions = answer_tasks_mock(scene, records, tasks, bundles)
    else:
        config = load_backend_config(args.backend)
        predictions = [
            answer_to_prediction(scene, task, llm_answer(config, bundles[task.instance_id]))
            for task in tasks
        ]
    rows = [
        io_formats.prediction_to_row(task.instance_id, prediction)
        for task, prediction in zip(tasks, predictions)
    ]
    io_formats.write_jsonl(args.out, rows)
    print(f"answered {len(rows)} tasks -> {args.out}")
    return 0


def _print_report(results: dict) -> None:
    for task_kind in sorted(results["per_task"]):
        metrics = results["per_task"][task_kind]
        rendered = ", ".join(
            f"{name}={value:.4f}" if isinstance(value, float) else f"{name}={value}"
            for name, value in sorted(metrics.items())
        )
        print(f"{task_kind}: {rendered}")


def cmd_eval(args) -> int:
    tasks = _tasks_from_file(args.tasks)
    by_id = dict(
        io_formats.prediction_from_row(row, source=args.predictions)
        for row in io_formats.read_jsonl(args.predictions)
    )
    missing = [t.instance_id for t in tasks if t.instance_id not in by_id]
    if missing:
        raise DomainError(f"predictions missing for instances: {missing}")
    predictions = [by_id[t.instance_id] for t in tasks]
    results = evaluate(tasks, predictions)
    io_formats.write_results(args.out, results)
    _print_report(results)
    print(f"results -> {args.out}")
    return 0


def cmd_run_e2e_mock(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scene = _load_scene(args)
    policy = _policy(args)
    style = ReferenceStyle.parse(args.style)
    flags = IntegrationFlags(
        embedding_fusion=not args.no_embed_fusion,
        prompt_injection=not args.no_prompt_inject,
    )
    dims = EmbeddingDims(args.point_dim, args.visual_dim, args.text_dim, args.token_dim)

    io_formats.write_scene(out / "scene.json", scene)
    projections = project_scene(scene)
    rows = [
        io_formats.projection_to_row(view.view_id, result)
        for view in scene.views
        for result in projections[view.view_id]
    ]
    io_formats.write_jsonl(out / "projections.jsonl", rows)

    records = describe_scene(
        scene, projections, MockVlmBackend(scene), policy=policy, parallelism=args.parallelism
    )
    io_formats.write_jsonl(
        out / "descriptions.jsonl",
        [io_formats.description_to_row(records[i]) for i in sorted(records)],
    )

    text_vectors = text_embeddings_for_records(records, dims.text)
    io_formats.write_embedding_file(
        out / "text_embeddings.d3de", io_formats.FileKind.TEXT, dims.text, text_vectors
    )
    point_vectors = mock_point_embeddings(scene, dims.point, args.seed)
    visual_vectors = mock_visual_embeddings(scene, projections, dims.visual, args.seed)
    blocks = build_scene_blocks(scene, point_vectors, visual_vectors, text_vectors, dims, args.seed)
    tokens = scene_tokens_with_flags(scene, blocks, flags)
    io_formats.write_scene_tokens(out / "tokens.json", scene.scene_id, tokens)

    if args.tasks:
        tasks = _tasks_from_file(args.tasks)
    else:
        tasks = toy_tasks(scene, records)
    io_formats.write_jsonl(out / "tasks.jsonl", [io_formats.task_to_row(t) for t in tasks])

    bundles = prompts_for_tasks(scene, records, tasks, style, flags, load_templates(args.templates))
    io_formats.write_jsonl(
        out / "prompts.jsonl", [io_formats.bundle_to_row(iid, b) for iid, b in bundles]
    )

    predictions = answer_tasks_mock(scene, records, tasks, dict(bundles))
    io_formats.write_jsonl(
        out / "predictions.jsonl",
        [io_formats.prediction_to_row(t.instance_id, p) for t, p in zip(tasks, predictions)],
    )

    results = evaluate(tasks, predictions)
    io_formats.write_results(out / "results.json", results)
    _print_report(results)
    print(f"end-to-end mock run complete -> {out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_policy_flags(parser, config: RunConfig):
    parser.add_argument("--central-margin", type=float, default=config.central_margin,
                        help="fraction of each image dimension outside the central region")
    parser.add_argument("--min-visible", type=int, default=config.min_visible,
                        help="minimum visible points for key-object eligibility")


def _add_dim_flags(parser, config: RunConfig):
    parser.add_argument("--point-dim", type=int, default=config.point_dim)
    parser.add_argument("--visual-dim", type=int, default=config.visual_dim)
    parser.add_argument("--text-dim", type=int, default=config.text_dim)
    parser.add_argument("--token-dim", type=int, default=config.token_dim)


def build_parser(config: RunConfig) -> CliParser:
    parser = CliParser(prog="scenedesc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a scene file (or emit the bundled toy scene)")
    p.add_argument("--scene", default=config.scene)
    p.add_argument("--views", default=None, help="optional camera file overriding the manifest views")
    p.add_argument("--toy", action="store_true")
    p.add_argument("--out", required=config.out is None, default=config.out)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("project", help="project objects into every view")
    p.add_argument("--scene", default=config.scene)
    p.add_argument("--views", default=None, help="optional camera file overriding the manifest views")
    p.add_argument("--out", required=config.out is None, default=config.out)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("describe", help="generate per-object relational descriptions")
    p.add_argument("--scene", default=config.scene)
    p.add_argument("--views", default=None, help="optional camera file overriding the manifest views")
    p.add_argument("--projections", default=None)
    p.add_argument("--backend", default=config.backend, help='"mock" or a backend config path')
    p.add_argument("--parallelism", type=int, default=config.parallelism)
    p.add_argument("--no-fallback", action="store_true")
    p.add_argument("--out", required=config.out is None, default=config.out)
    _add_policy_flags(p, config)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("encode", help="encode descriptions into text embeddings")
    p.add_argument("--descriptions", required=True)
    p.add_argument("--dim", type=int, default=config.text_dim)
    p.add_argument("--out", required=config.out is None, default=config.out)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("fuse", help="project embeddings through heads into token blocks")
    p.add_argument("--scene", default=config.scene)
    p.add_argument("--text-embeddings", required=True)
    p.add_argument("--point-embeddings", default=None)
    p.add_argument("--visual-embeddings", default=None)
    p.add_argument("--seed", type=int, default=config.seed)
    p.add_argument("--no-embed-fusion", action="store_true")
    p.add_argument("--out", required=config.out is None, default=config.out)
    _add_dim_flags(p, config)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("prompt", help="assemble dialogue prompts for tasks")
    p.add_argument("--scene", default=config.scene)
    p.add_argument("--descriptions", required=True)
    p.add_argument("--tasks", default=config.tasks, required=config.tasks is None)
    p.add_argument("--style", choices=["name", "name-id", "id"], default=config.style)
    p.add_argument("--no-prompt-inject", action="store_true")
    p.add_argument("--templates", default=None, help="key-value file overriding the prompt templates")
    p.add_argument("--out", required=config.out is None, default=config.out)
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("answer", help="run the responder over assembled prompts")
    p.add_argument("--prompts", required=True)
    p.add_argument("--scene", default=config.scene)
    p.add_argument("--descriptions", required=True)
    p.add_argument("--tasks", default=config.tasks, required=config.tasks is None)
    p.add_argument("--backend", default=config.backend)
    p.add_argument("--out", required=config.out is None, default=config.out)
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("eval", help="score predictions against tasks")
    p.add_argument("--tasks", default=config.tasks, required=config.tasks is None)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=config.out is None, default=config.out)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run-e2e-mock", help="chain every stage with mock backends")
    p.add_argument("--scene", default=config.scene)
    p.add_argument("--views", default=None, help="optional camera file overriding the manifest views")
    p.add_argument("--tasks", default=config.tasks)
    p.add_argument("--seed", type=int, default=config.seed)
    p.add_argument("--style", choices=["name", "name-id", "id"], default=config.style)
    p.add_argument("--no-embed-fusion", action="store_true", default=not config.embed_fusion)
    p.add_argument("--no-prompt-inject", action="store_true", default=not config.prompt_inject)
    p.add_argument("--parallelism", type=int, default=config.parallelism)
    p.add_argument("--templates", default=None, help="key-value file overriding the prompt templates")
    p.add_argument("--out", required=config.out is None, default=config.out)
    _add_policy_flags(p, config)
    _add_dim_flags(p, config)
    p.set_defaults(func=cmd_run_e2e_mock)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    config_path = None
    if "--config" in argv:
        at = argv.index("--config")
        if at + 1 >= len(argv):
            sys.stderr.write("error: --config needs a path\n")
            return USAGE_EXIT
        config_path = argv[at + 1]
        del argv[at : at + 2]
    try:
        config = load_run_config(config_path)
        parser = build_parser(config)
        args = parser.parse_args(argv)
        return args.func(args)
    except (DomainError, FormatError, FileNotFoundError, NotADirectoryError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return VALIDATION_EXIT
    except BackendError as exc:
        sys.stderr.write(f"backend error: {exc}\n")
        return BACKEND_EXIT


if __name__ == "__main__":
    sys.exit(main())
