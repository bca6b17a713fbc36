"""The whole pipeline on the bundled toy scene, through the library API:
project -> describe -> encode -> fuse -> prompt -> answer -> evaluate.

The CLI equivalent is a single command:
    scenedesc run-e2e-mock --out /tmp/run --seed 42

Run: python demos/08_end_to_end.py
"""

import json

from scenedesc.backends import MockVlmBackend
from scenedesc.descriptions import describe_scene
from scenedesc.fusion import serialize_scene_tokens
from scenedesc.metrics import evaluate
from scenedesc.pipeline import (
    EmbeddingDims,
    answer_tasks_mock,
    build_scene_blocks,
    mock_point_embeddings,
    mock_visual_embeddings,
    project_scene,
    prompts_for_tasks,
    text_embeddings_for_records,
)
from scenedesc.prompting import IntegrationFlags, ReferenceStyle
from scenedesc.toy import toy_scene, toy_tasks

seed = 42
scene = toy_scene()

projections = project_scene(scene)
records = describe_scene(scene, projections, MockVlmBackend(scene))
print(f"described {len(records)} objects across {len(scene.views)} views")

dims = EmbeddingDims()
blocks = build_scene_blocks(
    scene,
    mock_point_embeddings(scene, dims.point, seed),
    mock_visual_embeddings(scene, projections, dims.visual, seed),
    text_embeddings_for_records(records, dims.text),
    dims,
    seed,
)
tokens = serialize_scene_tokens(scene, blocks)
print("scene token matrix:", tokens.matrix.shape)

tasks = toy_tasks(scene, records)
bundles = prompts_for_tasks(
    scene, records, tasks, ReferenceStyle.ID_ONLY, IntegrationFlags()
)
predictions = answer_tasks_mock(scene, records, tasks, dict(bundles))

results = evaluate(tasks, predictions)
print("\nper-task metrics:")
print(json.dumps(results["per_task"], indent=2, sort_keys=True))
