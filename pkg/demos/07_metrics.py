"""The benchmark metric suite: thresholded grounding accuracy, multi-object
set F1, n-gram captioning scores, IoU-gated captioning, and QA exact match.

Run: python demos/07_metrics.py
"""

from scenedesc.core import Aabb
from scenedesc.metrics import (
    Prediction,
    TaskInstance,
    TaskKind,
    acc_at_iou,
    bleu,
    captioning_at_iou,
    cider,
    em_refined,
    exact_match,
    instance_f1,
    meteor_lite,
    multi_object_f1,
    rouge_l,
)

unit = Aabb((0, 0, 0), (1, 1, 1))
near = Aabb((0.1, 0, 0), (1.1, 1, 1))   # IoU ~ 0.82
poor = Aabb((0.6, 0, 0), (1.6, 1, 1))   # IoU ~ 0.25

# Single-object grounding: fraction with IoU strictly above the threshold.
instances = [TaskInstance(f"g{i}", TaskKind.GROUND_SINGLE, "q", gt_boxes=(unit,)) for i in range(3)]
predictions = [Prediction(boxes=(b,)) for b in (unit, near, poor)]
print("Acc@0.25:", round(acc_at_iou(instances, predictions, 0.25), 4))
print("Acc@0.5: ", round(acc_at_iou(instances, predictions, 0.5), 4))

# Multi-object grounding: optimal one-to-one matching, then set F1.
print("\nF1, 2 GT vs 3 predictions (1 match):",
      instance_f1([unit, poor.translated((5, 0, 0)), near.translated((9, 0, 0))],
                  [unit, unit.translated((20, 0, 0))], 0.5))
zt = [TaskInstance("zt", TaskKind.GROUND_MULTI, "q", gt_boxes=())]
print("zero-target with empty prediction:", multi_object_f1(zt, [Prediction()], 0.5))

# Captioning metrics share one fixed tokenizer (lowercase, strip punctuation).
candidate = ["a brown chair stands near the table"]
references = [["a brown chair is near the table", "the chair sits by a table"]]
print("\nBLEU-4:  ", round(bleu(candidate, references, 4), 4))
print("ROUGE-L: ", round(rouge_l(candidate, references), 4))
print("METEOR:  ", round(meteor_lite(candidate, references), 4))
print("CIDEr:   ", round(cider(candidate + ["a green sofa"], references + [["a red sofa"]]), 4))

# IoU-gated captioning: a wrong box zeroes the text score for that instance.
caption_tasks = [
    TaskInstance("c1", TaskKind.CAPTION, "q", gt_boxes=(unit,), gt_texts=("a brown chair",)),
    TaskInstance("c2", TaskKind.CAPTION, "q", gt_boxes=(unit,), gt_texts=("a white lamp",)),
]
caption_preds = [
    Prediction(boxes=(unit,), text="a brown chair"),
    Prediction(boxes=(unit.translated((4, 4, 4)),), text="a white lamp"),
]
print("\nCIDEr@0.5 (second box misses):",
      round(captioning_at_iou(caption_tasks, caption_preds, 0.5, "cider"), 4))

# QA: exact match and its containment-tolerant refinement.
print("\nEM  ('the brown chair' vs 'brown chair'):", exact_match("the brown chair", ["brown chair"]))
print("EM-R('the brown chair' vs 'brown chair'):", em_refined("the brown chair", ["brown chair"]))
