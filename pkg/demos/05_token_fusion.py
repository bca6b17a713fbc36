"""Token fusion: per-modality projection heads, fused object blocks, scene
serialization, and the response-token cross-entropy objective.

Run: python demos/05_token_fusion.py
"""

import numpy as np

from scenedesc.backends import MockVlmBackend
from scenedesc.descriptions import describe_scene
from scenedesc.fusion import apply_head, head_gradient, response_cross_entropy
from scenedesc.pipeline import (
    EmbeddingDims,
    build_scene_blocks,
    mock_point_embeddings,
    mock_visual_embeddings,
    project_scene,
    text_embeddings_for_records,
)
from scenedesc.fusion import HeadSet, serialize_scene_tokens
from scenedesc.toy import toy_scene

scene = toy_scene()
projections = project_scene(scene)
records = describe_scene(scene, projections, MockVlmBackend(scene))

# Three seeded heads (3-layer MLPs) map point/visual/text embeddings into a
# shared token space; each object becomes [identifier, point, visual, text].
dims = EmbeddingDims(point=64, visual=64, text=96, token=16)
blocks = build_scene_blocks(
    scene,
    mock_point_embeddings(scene, dims.point, seed=42),
    mock_visual_embeddings(scene, projections, dims.visual, seed=42),
    text_embeddings_for_records(records, dims.text),
    dims,
    seed=42,
)
tokens = serialize_scene_tokens(scene, blocks)
print("serialized sequence:", " ".join(identifier for identifier, _ in tokens.entries))
print("flat matrix:", tokens.matrix.shape, "(4 rows per object)")

# Gradients through a head check out against finite differences.
heads = HeadSet.random(8, 8, 8, token_dim=4, hidden_dim=6, seed=1)
z = np.linspace(-1.0, 1.0, 8)
upstream = np.ones(4)
grads = head_gradient(heads.point, z, upstream)
step = 1e-5
weights = [w.copy() for w in heads.point.weights]
weights[0][0, 0] += step
from scenedesc.fusion import ProjectionHead  # noqa: E402

up = float(upstream @ apply_head(ProjectionHead(tuple(weights), heads.point.biases), z))
weights[0][0, 0] -= 2 * step
down = float(upstream @ apply_head(ProjectionHead(tuple(weights), heads.point.biases), z))
print("\nanalytic dW[0][0,0]:", round(grads.weight_grads[0][0, 0], 8))
print("finite difference:  ", round((up - down) / (2 * step), 8))

# The training objective sums -log P over response positions only.
vocab, k = 10, 3
probs = np.full((6, vocab), 1.0 / vocab)
loss = response_cross_entropy(probs, targets=[0] * 6, response_span=(3, k))
print(f"\nuniform-prediction loss over k={k} tokens:", round(loss.total, 6),
      "= k ln V =", round(k * np.log(vocab), 6))
