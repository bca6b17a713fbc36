"""Benchmark metric suite: thresholded grounding accuracy, multi-object set
F1 with optimal matching, n-gram captioning metrics (BLEU, ROUGE-L, a lite
METEOR, CIDEr), IoU-gated captioning, and exact-match QA scoring.

Tokenization is fixed (lowercase, strip [.,!?;:'"()], whitespace split) so
every score is reproducible bit for bit. Scores do not chase third-party
toolkits digit for digit; tokenization differences exist and are documented
in the README.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Aabb, iou_aabb
from .errors import DomainError

log = logging.getLogger(__name__)

PUNCTUATION = ".,!?;:'\"()"
ROUGE_BETA = 1.2
METEOR_ALIGN_STAGES = ("exact", "stem")
CIDER_MAX_N = 4
CIDER_SCALE = 10.0
SENTENCE_BLEU_EPS = 1e-9


class TaskKind(Enum):
    GROUND_SINGLE = "ground_single"
    GROUND_MULTI = "ground_multi"
    CAPTION = "caption"
    QA = "qa"


@dataclass(frozen=True)
class TaskInstance:
    """One benchmark item with its ground truth."""

    instance_id: str
    task_kind: TaskKind
    query: str
    gt_boxes: tuple[Aabb, ...] = ()
    gt_texts: tuple[str, ...] = ()
    target_object: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "gt_boxes", tuple(self.gt_boxes))
        object.__setattr__(self, "gt_texts", tuple(self.gt_texts))
        kind = self.task_kind
        if kind is TaskKind.GROUND_SINGLE and len(self.gt_boxes) != 1:
            raise DomainError(f"{self.instance_id}: single grounding needs exactly 1 GT box")
        if kind is TaskKind.CAPTION and (len(self.gt_boxes) != 1 or not self.gt_texts):
            raise DomainError(f"{self.instance_id}: captioning needs 1 GT box and >=1 reference")
        if kind is TaskKind.QA and not self.gt_texts:
            raise DomainError(f"{self.instance_id}: QA needs >=1 ground-truth answer")


@dataclass(frozen=True)
class Prediction:
    boxes: tuple[Aabb, ...] = ()
    text: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))


# ---------------------------------------------------------------------------
# text plumbing


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation characters, split on whitespace."""
    cleaned = text.lower().translate(str.maketrans("", "", PUNCTUATION))
    return cleaned.split()


def normalize_answer(text: str) -> str:
    return " ".join(tokenize(text))


def ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def _stem(word: str) -> str:
    # deliberately small suffix stripper; documented as part of meteor_lite
    for suffix in ("ing", "ies", "ed", "es", "s"):
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            return word[: -len(suffix)]
    return word


# ---------------------------------------------------------------------------
# grounding metrics


def acc_at_iou(
    instances: Sequence[TaskInstance],
    predictions: Sequence[Prediction],
    thr: float,
) -> float:
    """Fraction of single-object grounding instances whose predicted box has
    IoU strictly exceeding `thr` with the ground truth."""
    if len(instances) != len(predictions):
        raise DomainError("instances and predictions differ in length")
    if not instances:
        raise DomainError("empty grounding corpus")
    hits = 0
    for instance, prediction in zip(instances, predictions):
        if instance.task_kind is not TaskKind.GROUND_SINGLE:
            raise DomainError(f"{instance.instance_id}: not a single-grounding instance")
        if len(prediction.boxes) != 1:
            log.warning("%s: expected 1 predicted box, got %d; scoring 0",
                        instance.instance_id, len(prediction.boxes))
            continue
        if iou_aabb(prediction.boxes[0], instance.gt_boxes[0]) > thr:
            hits += 1
    return hits / len(instances)


def _matched_pairs(pred_boxes: Sequence[Aabb], gt_boxes: Sequence[Aabb], thr: float) -> int:
    """Maximum one-to-one matching count where a pair counts iff IoU >= thr."""
    if not pred_boxes or not gt_boxes:
        return 0
    indicator = np.array(
        [[1.0 if iou_aabb(p, g) >= thr else 0.0 for g in gt_boxes] for p in pred_boxes]
    )
    rows, cols = linear_sum_assignment(-indicator)
    return int(indicator[rows, cols].sum())


def instance_f1(pred_boxes: Sequence[Aabb], gt_boxes: Sequence[Aabb], thr: float) -> float:
    """Set F1 for one instance; empty GT with empty prediction scores 1
    (zero-target convention), empty GT with predictions scores 0."""
    if not pred_boxes and not gt_boxes:
        return 1.0
    tp = _matched_pairs(pred_boxes, gt_boxes, thr)
    return 2.0 * tp / (len(pred_boxes) + len(gt_boxes))


def multi_object_f1(
    instances: Sequence[TaskInstance],
    predictions: Sequence[Prediction],
    thr: float,
) -> float:
    """Mean per-instance set F1 over multi-object grounding instances."""
    if len(instances) != len(predictions):
        raise DomainError("instances and predictions differ in length")
    if not instances:
        raise DomainError("empty grounding corpus")
    scores = []
    for instance, prediction in zip(instances, predictions):
        if instance.task_kind is not TaskKind.GROUND_MULTI:
            raise DomainError(f"{instance.instance_id}: not a multi-grounding instance")
        scores.append(instance_f1(prediction.boxes, instance.gt_boxes, thr))
    return float(np.mean(scores))


# ---------------------------------------------------------------------------
# n-gram captioning metrics


def _closest_ref_length(candidate_len: int, ref_lens: Sequence[int]) -> int:
    return min(ref_lens, key=lambda r: (abs(r - candidate_len), r))


def bleu(candidates: Sequence[str], references: Sequence[Sequence[str]], n: int = 4) -> float:
    """Corpus BLEU-n: geometric mean of modified n-gram precisions for orders
    1..n with the brevity penalty, no smoothing."""
    if n < 1:
        raise DomainError("BLEU order must be >= 1")
    if not candidates or len(candidates) != len(references):
        raise DomainError("need a non-empty, aligned candidate/reference corpus")
    clipped = [0] * n
    totals = [0] * n
    cand_len = 0
    ref_len = 0
    for candidate, refs in zip(candidates, references):
        if not refs:
            raise DomainError("every candidate needs at least one reference")
        cand_tokens = tokenize(candidate)
        ref_tokens = [tokenize(r) for r in refs]
        cand_len += len(cand_tokens)
        ref_len += _closest_ref_length(len(cand_tokens), [len(r) for r in ref_tokens])
        for order in range(1, n + 1):
            counts = Counter(ngrams(cand_tokens, order))
            max_ref: Counter = Counter()
            for r in ref_tokens:
                for gram, count in Counter(ngrams(r, order)).items():
                    max_ref[gram] = max(max_ref[gram], count)
            clipped[order - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            totals[order - 1] += sum(counts.values())
    if cand_len == 0 or any(t == 0 for t in totals) or any(c == 0 for c in clipped):
        return 0.0
    log_precision = sum(math.log(c / t) for c, t in zip(clipped, totals)) / n
    brevity = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return brevity * math.exp(log_precision)


def sentence_bleu(
    candidate: str,
    references: Sequence[str],
    n: int = 4,
    eps: float = SENTENCE_BLEU_EPS,
) -> float:
    """Single-sentence BLEU-n with add-epsilon smoothing, for diagnostics and
    per-item gated captioning."""
    if not references:
        raise DomainError("need at least one reference")
    cand_tokens = tokenize(candidate)
    ref_tokens = [tokenize(r) for r in references]
    if not cand_tokens:
        return 0.0
    log_precision = 0.0
    for order in range(1, n + 1):
        counts = Counter(ngrams(cand_tokens, order))
        max_ref: Counter = Counter()
        for r in ref_tokens:
            for gram, count in Counter(ngrams(r, order)).items():
                max_ref[gram] = max(max_ref[gram], count)
        clipped = sum(min(c, max_ref[g]) for g, c in counts.items())
        total = max(sum(counts.values()), 1)
        log_precision += math.log(max(clipped, eps) / total)
    ref_len = _closest_ref_length(len(cand_tokens), [len(r) for r in ref_tokens])
    brevity = 1.0 if len(cand_tokens) > ref_len else math.exp(1.0 - ref_len / len(cand_tokens))
    return brevity * math.exp(log_precision / n)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for token in a:
        cur = [0]
        for j, other in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if token == other else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidates: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    """Corpus-mean ROUGE-L F-measure with beta = 1.2, max over references."""
    if not candidates or len(candidates) != len(references):
        raise DomainError("need a non-empty, aligned candidate/reference corpus")
    beta_sq = ROUGE_BETA * ROUGE_BETA
    scores = []
    for candidate, refs in zip(candidates, references):
        cand_tokens = tokenize(candidate)
        best = 0.0
        for ref in refs:
            ref_tokens = tokenize(ref)
            lcs = _lcs_length(cand_tokens, ref_tokens)
            if lcs == 0:
                continue
            recall = lcs / len(ref_tokens)
            precision = lcs / len(cand_tokens)
            best = max(best, (1 + beta_sq) * recall * precision / (recall + beta_sq * precision))
        scores.append(best)
    return float(np.mean(scores))


def _align(cand: Sequence[str], ref: Sequence[str]) -> list[tuple[int, int]]:
    """Greedy leftmost unigram alignment: exact matches first, then stems."""
    pairs: list[tuple[int, int]] = []
    cand_free = [True] * len(cand)
    ref_free = [True] * len(ref)
    for stage in METEOR_ALIGN_STAGES:
        key = (lambda w: w) if stage == "exact" else _stem
        for i, token in enumerate(cand):
            if not cand_free[i]:
                continue
            for j, other in enumerate(ref):
                if ref_free[j] and key(token) == key(other):
                    pairs.append((i, j))
                    cand_free[i] = False
                    ref_free[j] = False
                    break
    pairs.sort()
    return pairs


def _chunks(pairs: Sequence[tuple[int, int]]) -> int:
    count = 0
    prev = None
    for i, j in pairs:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            count += 1
        prev = (i, j)
    return count


def meteor_lite(candidates: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    """Corpus-mean unigram METEOR with exact + suffix-stem matching and the
    fragmentation penalty 0.5 * (chunks / matches)^3; no synonym dictionary
    (hence "lite")."""
    if not candidates or len(candidates) != len(references):
        raise DomainError("need a non-empty, aligned candidate/reference corpus")
    scores = []
    for candidate, refs in zip(candidates, references):
        cand_tokens = tokenize(candidate)
        best = 0.0
        for ref in refs:
            ref_tokens = tokenize(ref)
            if not cand_tokens or not ref_tokens:
                continue
            pairs = _align(cand_tokens, ref_tokens)
            matches = len(pairs)
            if matches == 0:
                continue
            precision = matches / len(cand_tokens)
            recall = matches / len(ref_tokens)
            f_mean = 10.0 * precision * recall / (recall + 9.0 * precision)
            penalty = 0.5 * (_chunks(pairs) / matches) ** 3
            best = max(best, f_mean * (1.0 - penalty))
        scores.append(best)
    return float(np.mean(scores))


def _cider_idf(reference_sets: Sequence[Sequence[str]]) -> list[dict[tuple[str, ...], float]]:
    """Per-order idf: log(N / df), with df counted once per item and clipped
    at 1 so unseen grams get idf log(N)."""
    n_items = len(reference_sets)
    idf: list[dict[tuple[str, ...], float]] = []
    for order in range(1, CIDER_MAX_N + 1):
        df: Counter = Counter()
        for refs in reference_sets:
            grams = set()
            for ref in refs:
                grams.update(ngrams(tokenize(ref), order))
            df.update(grams)
        idf.append({g: math.log(n_items / max(1, c)) for g, c in df.items()})
    return idf


def _tfidf_vector(
    tokens: Sequence[str], order: int, idf: Mapping[tuple[str, ...], float], n_items: int
) -> dict[tuple[str, ...], float]:
    default_idf = math.log(n_items)
    return {
        g: c * idf.get(g, default_idf)
        for g, c in Counter(ngrams(tokens, order)).items()
    }


def _cosine(a: Mapping, b: Mapping) -> float:
    dot = sum(v * b[g] for g, v in a.items() if g in b)
    norm_a = math.sqrt(sum(v * v for v in a.values()))
    norm_b = math.sqrt(sum(v * v for v in b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


def cider_items(candidates: Sequence[str], reference_sets: Sequence[Sequence[str]]) -> list[float]:
    """Per-item CIDEr: tf-idf n-gram cosine similarity against each reference,
    averaged over references and orders 1..4, scaled by 10. The idf statistics
    come from the full reference corpus."""
    if not candidates or len(candidates) != len(reference_sets):
        raise DomainError("need a non-empty, aligned candidate/reference corpus")
    n_items = len(reference_sets)
    idf = _cider_idf(reference_sets)
    scores = []
    for candidate, refs in zip(candidates, reference_sets):
        cand_tokens = tokenize(candidate)
        per_order = []
        for order in range(1, CIDER_MAX_N + 1):
            cand_vec = _tfidf_vector(cand_tokens, order, idf[order - 1], n_items)
            sims = [
                _cosine(cand_vec, _tfidf_vector(tokenize(ref), order, idf[order - 1], n_items))
                for ref in refs
            ]
            per_order.append(float(np.mean(sims)) if sims else 0.0)
        scores.append(CIDER_SCALE * float(np.mean(per_order)))
    return scores


def cider(candidates: Sequence[str], reference_sets: Sequence[Sequence[str]]) -> float:
    return float(np.mean(cider_items(candidates, reference_sets)))


# ---------------------------------------------------------------------------
# IoU-gated captioning


def captioning_at_iou(
    instances: Sequence[TaskInstance],
    predictions: Sequence[Prediction],
    thr: float = 0.5,
    metric: str = "cider",
) -> float:
    """Captioning score gated by box overlap: instances whose predicted box
    has IoU < thr contribute 0; the rest contribute their per-item text
    metric. CIDEr idf is computed over the full reference corpus regardless
    of gating."""
    if metric not in ("cider", "bleu4"):
        raise DomainError(f"unknown captioning metric {metric!r}")
    if len(instances) != len(predictions):
        raise DomainError("instances and predictions differ in length")
    if not instances:
        raise DomainError("empty captioning corpus")
    for instance in instances:
        if instance.task_kind is not TaskKind.CAPTION:
            raise DomainError(f"{instance.instance_id}: not a captioning instance")

    texts = [p.text or "" for p in predictions]
    if metric == "cider":
        per_item = cider_items(texts, [i.gt_texts for i in instances])
    else:
        per_item = [
            sentence_bleu(text, instance.gt_texts, n=4) if text else 0.0
            for text, instance in zip(texts, instances)
        ]
    scores = []
    for instance, prediction, item_score in zip(instances, predictions, per_item):
        if len(prediction.boxes) != 1:
            log.warning("%s: expected 1 predicted box, got %d; scoring 0",
                        instance.instance_id, len(prediction.boxes))
            scores.append(0.0)
        elif iou_aabb(prediction.boxes[0], instance.gt_boxes[0]) < thr:
            scores.append(0.0)
        else:
            scores.append(item_score)
    return float(np.mean(scores))


# ---------------------------------------------------------------------------
# QA metrics


def exact_match(pred: str, gt_answers: Sequence[str]) -> int:
    """1 iff the normalized prediction equals any normalized answer."""
    norm = normalize_answer(pred)
    return int(any(norm == normalize_answer(gt) for gt in gt_answers))


def em_refined(pred: str, gt_answers: Sequence[str]) -> int:
    """Relaxed exact match: also 1 when one normalized string contains the
    other (both non-empty)."""
    if exact_match(pred, gt_answers):
        return 1
    norm = normalize_answer(pred)
    if not norm:
        return 0
    for gt in gt_answers:
        gt_norm = normalize_answer(gt)
        if gt_norm and (gt_norm in norm or norm in gt_norm):
            return 1
    return 0


# ---------------------------------------------------------------------------
# corpus evaluation


def evaluate(
    instances: Sequence[TaskInstance],
    predictions: Sequence[Prediction],
) -> dict:
    """Score a mixed-task corpus; returns per-task metrics plus a per-instance
    breakdown, all in deterministic order."""
    if len(instances) != len(predictions):
        raise DomainError("instances and predictions differ in length")
    by_kind: dict[TaskKind, list[tuple[TaskInstance, Prediction]]] = {k: [] for k in TaskKind}
    for instance, prediction in zip(instances, predictions):
        by_kind[instance.task_kind].append((instance, prediction))

    per_task: dict[str, dict] = {}
    per_instance: list[dict] = []

    pairs = by_kind[TaskKind.GROUND_SINGLE]
    if pairs:
        ins, preds = [p[0] for p in pairs], [p[1] for p in pairs]
        per_task["ground_single"] = {
            "acc@0.25": acc_at_iou(ins, preds, 0.25),
            "acc@0.5": acc_at_iou(ins, preds, 0.5),
            "count": len(pairs),
        }
    pairs = by_kind[TaskKind.GROUND_MULTI]
    if pairs:
        ins, preds = [p[0] for p in pairs], [p[1] for p in pairs]
        per_task["ground_multi"] = {
            "f1@0.25": multi_object_f1(ins, preds, 0.25),
            "f1@0.5": multi_object_f1(ins, preds, 0.5),
            "count": len(pairs),
        }
    pairs = by_kind[TaskKind.CAPTION]
    if pairs:
        ins, preds = [p[0] for p in pairs], [p[1] for p in pairs]
        per_task["caption"] = {
            "cider@0.5": captioning_at_iou(ins, preds, 0.5, "cider"),
            "bleu4@0.5": captioning_at_iou(ins, preds, 0.5, "bleu4"),
            "count": len(pairs),
        }
    pairs = by_kind[TaskKind.QA]
    if pairs:
        ins, preds = [p[0] for p in pairs], [p[1] for p in pairs]
        texts = [p.text or "" for p in preds]
        refs = [i.gt_texts for i in ins]
        per_task["qa"] = {
            "em": float(np.mean([exact_match(t, r) for t, r in zip(texts, refs)])),
            "em_r": float(np.mean([em_refined(t, r) for t, r in zip(texts, refs)])),
            "cider": cider(texts, refs),
            "bleu4": bleu(texts, refs, 4),
            "rouge_l": rouge_l(texts, refs),
            "meteor": meteor_lite(texts, refs),
            "count": len(pairs),
        }

    for instance, prediction in zip(instances, predictions):
        entry: dict = {"instance_id": instance.instance_id, "task_kind": instance.task_kind.value}
        if instance.task_kind is TaskKind.GROUND_SINGLE:
            entry["iou"] = (
                iou_aabb(prediction.boxes[0], instance.gt_boxes[0])
                if len(prediction.boxes) == 1
                else 0.0
            )
        elif instance.task_kind is TaskKind.GROUND_MULTI:
            entry["f1@0.5"] = instance_f1(prediction.boxes, instance.gt_boxes, 0.5)
        elif instance.task_kind is TaskKind.CAPTION:
            entry["iou"] = (
                iou_aabb(prediction.boxes[0], instance.gt_boxes[0])
                if len(prediction.boxes) == 1
                else 0.0
            )
        else:
            entry["em"] = exact_match(prediction.text or "", instance.gt_texts)
        per_instance.append(entry)

    return {"per_task": per_task, "per_instance": per_instance}
