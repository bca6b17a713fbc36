"""Bit-exact file formats for scenes, embeddings, descriptions, tasks,
predictions, prompts, token blocks, and results.

Manifests are JSON (sorted keys, two-space indent) so they diff cleanly; bulk
floats live in little-endian binary blobs so round-trips are bitwise. The
embedding interchange layout is:

    magic "D3DE" | version u16 = 1 | kind u8 | dim u32 | count u32
    then `count` records of: object_index u32, dim x float32

kind: 0 = Point3D, 1 = Visual2D, 2 = Text, 3 = HeadWeights. Head-weight files
insert a descriptor (depth u8, in_dim u32, hidden_dim u32, out_dim u32) after
the header and store all parameters flattened as a single record.

The scene point blob holds, per object in ascending index order: point count
u32, then count x 6 float32 (x, y, z, r, g, b). The manifest carries the
blob's SHA-256.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .core import Aabb, ObjectProposal, Scene
from .descriptions import DescriptionRecord, DescriptionStatus
from .errors import DomainError, FormatError
from .fusion import ProjectionHead, SceneTokens
from .metrics import Prediction, TaskInstance, TaskKind
from .projection import CameraView, ProjectionResult
from .prompting import PromptBundle

MAGIC = b"D3DE"
VERSION = 1
_HEADER = struct.Struct("<4sHBII")
_HEAD_DESCRIPTOR = struct.Struct("<BIII")


class FileKind(Enum):
    POINT3D = 0
    VISUAL2D = 1
    TEXT = 2
    HEAD_WEIGHTS = 3


@dataclass(frozen=True)
class EmbeddingFileHeader:
    version: int
    kind: FileKind
    dim: int
    count: int


def _json_bytes(payload) -> bytes:
    return (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# embedding interchange files


def write_embedding_file(
    path: Union[str, Path],
    kind: FileKind,
    dim: int,
    vectors: Mapping[int, np.ndarray],
) -> None:
    """Write vectors in ascending object-index order, raw float32 bits."""
    path = Path(path)
    chunks = [_HEADER.pack(MAGIC, VERSION, kind.value, dim, len(vectors))]
    for index in sorted(vectors):
        vec = np.ascontiguousarray(np.asarray(vectors[index], dtype=np.float32))
        if vec.shape != (dim,):
            raise DomainError(f"vector for object {index} has shape {vec.shape}, expected ({dim},)")
        if not np.all(np.isfinite(vec)):
            raise DomainError(f"vector for object {index} has non-finite entries")
        chunks.append(struct.pack("<I", index) + vec.tobytes())
    path.write_bytes(b"".join(chunks))


def read_embedding_file(
    path: Union[str, Path],
    expected_dim: Optional[int] = None,
    expected_kind: Optional[FileKind] = None,
) -> tuple[EmbeddingFileHeader, dict[int, np.ndarray]]:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, version, kind_byte, dim, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    try:
        kind = FileKind(kind_byte)
    except ValueError:
        raise FormatError(f"{path}: unknown kind byte {kind_byte}") from None
    if expected_kind is not None and kind is not expected_kind:
        raise FormatError(f"{path}: kind is {kind.name}, expected {expected_kind.name}")
    if expected_dim is not None and dim != expected_dim:
        raise FormatError(f"{path}: dimension is {dim}, expected {expected_dim}")

    record_size = 4 + 4 * dim
    offset = _HEADER.size
    vectors: dict[int, np.ndarray] = {}
    for record in range(count):
        if len(data) - offset < record_size:
            raise FormatError(f"{path}: record {record} truncated")
        (index,) = struct.unpack_from("<I", data, offset)
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset + 4).copy()
        if not np.all(np.isfinite(vec)):
            raise FormatError(f"{path}: record {record} (object {index}) has non-finite values")
        if index in vectors:
            raise FormatError(f"{path}: record {record} duplicates object index {index}")
        vectors[index] = vec
        offset += record_size
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes after {count} records")
    header = EmbeddingFileHeader(version, kind, dim, count)
    return header, vectors


def write_head_weights(path: Union[str, Path], head: ProjectionHead) -> None:
    """Serialize a projection head: descriptor + all parameters flattened
    (W then b per layer, row-major) as one float32 record."""
    flat = np.concatenate(
        [np.concatenate([w.ravel(), b]) for w, b in zip(head.weights, head.biases)]
    ).astype(np.float32)
    hidden = head.weights[0].shape[0] if head.depth == 3 else 0
    path = Path(path)
    payload = (
        _HEADER.pack(MAGIC, VERSION, FileKind.HEAD_WEIGHTS.value, flat.shape[0], 1)
        + _HEAD_DESCRIPTOR.pack(head.depth, head.in_dim, hidden, head.out_dim)
        + struct.pack("<I", 0)
        + flat.tobytes()
    )
    path.write_bytes(payload)


def read_head_weights(path: Union[str, Path]) -> ProjectionHead:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size + _HEAD_DESCRIPTOR.size:
        raise FormatError(f"{path}: truncated head-weights file")
    magic, version, kind_byte, dim, count = _HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise FormatError(f"{path}: bad magic/version for head-weights file")
    if kind_byte != FileKind.HEAD_WEIGHTS.value:
        raise FormatError(f"{path}: kind byte {kind_byte} is not HeadWeights")
    depth, in_dim, hidden, out_dim = _HEAD_DESCRIPTOR.unpack_from(data, _HEADER.size)
    if depth == 1:
        shapes = [(out_dim, in_dim)]
    elif depth == 3:
        shapes = [(hidden, in_dim), (hidden, hidden), (out_dim, hidden)]
    else:
        raise FormatError(f"{path}: unsupported head depth {depth}")
    expected = sum(r * c + r for r, c in shapes)
    if dim != expected or count != 1:
        raise FormatError(f"{path}: descriptor implies {expected} parameters, header says {dim}")
    offset = _HEADER.size + _HEAD_DESCRIPTOR.size + 4
    if len(data) - offset != 4 * dim:
        raise FormatError(f"{path}: parameter record truncated")
    flat = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float64)
    if not np.all(np.isfinite(flat)):
        raise FormatError(f"{path}: non-finite head parameters")
    weights, biases = [], []
    cursor = 0
    for rows, cols in shapes:
        weights.append(flat[cursor : cursor + rows * cols].reshape(rows, cols))
        cursor += rows * cols
        biases.append(flat[cursor : cursor + rows])
        cursor += rows
    return ProjectionHead(tuple(weights), tuple(biases))


# ---------------------------------------------------------------------------
# scene manifest + point blob


def write_scene(manifest_path: Union[str, Path], scene: Scene) -> None:
    manifest_path = Path(manifest_path)
    blob_name = manifest_path.stem + ".points.bin"
    chunks = []
    for obj in sorted(scene.objects, key=lambda o: o.index):
        pts = np.ascontiguousarray(obj.points, dtype="<f4")
        chunks.append(struct.pack("<I", obj.point_count) + pts.tobytes())
    blob = b"".join(chunks)
    manifest = {
        "scene_id": scene.scene_id,
        "proposal_cap": scene.proposal_cap,
        "objects": [
            {"index": obj.index, "label": obj.label, "point_count": obj.point_count}
            for obj in sorted(scene.objects, key=lambda o: o.index)
        ],
        "views": [_view_to_entry(view) for view in scene.views],
        "points_file": blob_name,
        "points_sha256": hashlib.sha256(blob).hexdigest(),
    }
    (manifest_path.parent / blob_name).write_bytes(blob)
    manifest_path.write_bytes(_json_bytes(manifest))


def _view_to_entry(view: CameraView) -> dict:
    return {
        "view_id": view.view_id,
        "fx": view.fx,
        "fy": view.fy,
        "cx": view.cx,
        "cy": view.cy,
        "width": view.width,
        "height": view.height,
        "world_to_camera": [[float(v) for v in row] for row in view.world_to_camera],
        "image_ref": view.image_ref,
    }


def _view_from_entry(entry: Mapping, source: str) -> CameraView:
    try:
        return CameraView(
            view_id=entry["view_id"],
            fx=float(entry["fx"]),
            fy=float(entry["fy"]),
            cx=float(entry["cx"]),
            cy=float(entry["cy"]),
            world_to_camera=np.array(entry["world_to_camera"], dtype=np.float64),
            width=int(entry["width"]),
            height=int(entry["height"]),
            image_ref=entry.get("image_ref"),
        )
    except (DomainError, KeyError, ValueError) as exc:
        raise FormatError(f"{source}: view {entry.get('view_id')!r}: {exc}") from None


def write_views(path: Union[str, Path], views: Sequence[CameraView]) -> None:
    """Standalone camera file for pipelines whose proposals and cameras come
    from different exports."""
    Path(path).write_bytes(_json_bytes({"views": [_view_to_entry(v) for v in views]}))


def read_views(path: Union[str, Path]) -> tuple[CameraView, ...]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from None
    if "views" not in payload:
        raise FormatError(f"{path}: missing 'views' field")
    return tuple(_view_from_entry(entry, str(path)) for entry in payload["views"])


def read_scene(manifest_path: Union[str, Path]) -> Scene:
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid JSON: {exc}") from None
    for key in ("scene_id", "objects", "views", "points_file", "points_sha256"):
        if key not in manifest:
            raise FormatError(f"{manifest_path}: manifest missing field {key!r}")
    blob_path = manifest_path.parent / manifest["points_file"]
    if not blob_path.exists():
        raise FormatError(f"{manifest_path}: point blob {manifest['points_file']!r} not found")
    blob = blob_path.read_bytes()
    digest = hashlib.sha256(blob).hexdigest()
    if digest != manifest["points_sha256"]:
        raise FormatError(f"{blob_path}: checksum mismatch (blob {digest[:12]}..., manifest "
                          f"{str(manifest['points_sha256'])[:12]}...)")

    objects = []
    offset = 0
    for entry in manifest["objects"]:
        index = entry["index"]
        if len(blob) - offset < 4:
            raise FormatError(f"{blob_path}: object {index} header truncated")
        (point_count,) = struct.unpack_from("<I", blob, offset)
        if point_count != entry["point_count"]:
            raise FormatError(
                f"{blob_path}: object {index} has {point_count} points, manifest says "
                f"{entry['point_count']}"
            )
        offset += 4
        nbytes = point_count * 6 * 4
        if len(blob) - offset < nbytes:
            raise FormatError(f"{blob_path}: object {index} point data truncated")
        pts = np.frombuffer(blob, dtype="<f4", count=point_count * 6, offset=offset).reshape(-1, 6)
        offset += nbytes
        try:
            objects.append(ObjectProposal(index=index, points=pts.copy(), label=entry["label"]))
        except DomainError as exc:
            raise FormatError(f"{manifest_path}: object {index}: {exc}") from None
    if offset != len(blob):
        raise FormatError(f"{blob_path}: {len(blob) - offset} trailing bytes")

    views = [_view_from_entry(entry, str(manifest_path)) for entry in manifest["views"]]
    try:
        return Scene(
            scene_id=manifest["scene_id"],
            objects=tuple(objects),
            views=tuple(views),
            proposal_cap=int(manifest.get("proposal_cap", 100)),
        )
    except DomainError as exc:
        raise FormatError(f"{manifest_path}: {exc}") from None


# ---------------------------------------------------------------------------
# JSONL records


def write_jsonl(path: Union[str, Path], rows: Sequence[Mapping]) -> None:
    text = "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)
    Path(path).write_bytes(text.encode("utf-8"))


def read_jsonl(path: Union[str, Path]) -> list[dict]:
    path = Path(path)
    rows = []
    for lineno, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: line {lineno}: invalid JSON: {exc}") from None
    return rows


def _merge_extras(row: dict, extras: Optional[Mapping]) -> dict:
    if extras:
        merged = dict(extras)
        merged.update(row)
        return merged
    return row


DESCRIPTION_FIELDS = {"object_index", "text", "source_view", "status"}


def description_to_row(record: DescriptionRecord, extras: Optional[Mapping] = None) -> dict:
    row = {
        "object_index": record.object_index,
        "text": record.text,
        "source_view": record.source_view,
        "status": record.status.value,
    }
    return _merge_extras(row, extras)


def description_from_row(row: Mapping, source: str = "descriptions") -> DescriptionRecord:
    try:
        return DescriptionRecord(
            object_index=int(row["object_index"]),
            text=row["text"],
            source_view=row["source_view"],
            status=DescriptionStatus(row["status"]),
        )
    except (KeyError, ValueError, DomainError) as exc:
        raise FormatError(f"{source}: bad description record {row!r}: {exc}") from None


def _box_to_list(box: Aabb) -> list[float]:
    return [*box.min_corner, *box.max_corner]


def _box_from_list(values, source: str) -> Aabb:
    vals = [float(v) for v in values]
    if len(vals) != 6:
        raise FormatError(f"{source}: box needs 6 values, got {len(vals)}")
    try:
        return Aabb(tuple(vals[:3]), tuple(vals[3:]))
    except DomainError as exc:
        raise FormatError(f"{source}: {exc}") from None


TASK_FIELDS = {"instance_id", "task_kind", "query", "gt_boxes", "gt_texts", "target_object"}


def task_to_row(instance: TaskInstance, extras: Optional[Mapping] = None) -> dict:
    row = {
        "instance_id": instance.instance_id,
        "task_kind": instance.task_kind.value,
        "query": instance.query,
        "gt_boxes": [_box_to_list(b) for b in instance.gt_boxes],
        "gt_texts": list(instance.gt_texts),
        "target_object": instance.target_object,
    }
    return _merge_extras(row, extras)


def task_from_row(row: Mapping, source: str = "tasks") -> TaskInstance:
    try:
        return TaskInstance(
            instance_id=row["instance_id"],
            task_kind=TaskKind(row["task_kind"]),
            query=row["query"],
            gt_boxes=tuple(_box_from_list(b, source) for b in row.get("gt_boxes", [])),
            gt_texts=tuple(row.get("gt_texts", [])),
            target_object=row.get("target_object"),
        )
    except (KeyError, ValueError, DomainError) as exc:
        raise FormatError(f"{source}: bad task record {row!r}: {exc}") from None


def prediction_to_row(instance_id: str, prediction: Prediction, extras: Optional[Mapping] = None) -> dict:
    row = {
        "instance_id": instance_id,
        "boxes": [_box_to_list(b) for b in prediction.boxes],
        "text": prediction.text,
    }
    return _merge_extras(row, extras)


def prediction_from_row(row: Mapping, source: str = "predictions") -> tuple[str, Prediction]:
    try:
        prediction = Prediction(
            boxes=tuple(_box_from_list(b, source) for b in row.get("boxes", [])),
            text=row.get("text"),
        )
        return row["instance_id"], prediction
    except (KeyError, ValueError, DomainError) as exc:
        raise FormatError(f"{source}: bad prediction record {row!r}: {exc}") from None


def projection_to_row(view_id: str, result: ProjectionResult) -> dict:
    return {
        "view_id": view_id,
        "object_index": result.object_index,
        "visible_point_count": result.visible_point_count,
        "visible_fraction": result.visible_fraction,
        "center_px": list(result.center_px) if result.center_px else None,
        "bbox2d": list(result.bbox2d) if result.bbox2d else None,
        "mean_depth": result.mean_depth,
    }


def projection_from_row(row: Mapping, source: str = "projections") -> tuple[str, ProjectionResult]:
    try:
        result = ProjectionResult(
            object_index=int(row["object_index"]),
            visible_point_count=int(row["visible_point_count"]),
            visible_fraction=float(row["visible_fraction"]),
            center_px=tuple(row["center_px"]) if row.get("center_px") else None,
            bbox2d=tuple(row["bbox2d"]) if row.get("bbox2d") else None,
            mean_depth=row.get("mean_depth"),
        )
        return row["view_id"], result
    except (KeyError, ValueError, DomainError) as exc:
        raise FormatError(f"{source}: bad projection record {row!r}: {exc}") from None


def bundle_to_row(instance_id: str, bundle: PromptBundle, extras: Optional[Mapping] = None) -> dict:
    row = {
        "instance_id": instance_id,
        "system_text": bundle.system_text,
        "scene_token_placeholder": bundle.scene_token_placeholder,
        "injected_descriptions": list(bundle.injected_descriptions),
        "user_text": bundle.user_text,
        "full_text": bundle.full_text,
    }
    return _merge_extras(row, extras)


def bundle_from_row(row: Mapping, source: str = "prompts") -> tuple[str, PromptBundle]:
    try:
        bundle = PromptBundle(
            system_text=row["system_text"],
            scene_token_placeholder=row["scene_token_placeholder"],
            injected_descriptions=tuple(row["injected_descriptions"]),
            user_text=row["user_text"],
            full_text=row["full_text"],
        )
        return row["instance_id"], bundle
    except KeyError as exc:
        raise FormatError(f"{source}: bad prompt record {row!r}: missing {exc}") from None


# ---------------------------------------------------------------------------
# scene token blocks and results


def write_scene_tokens(manifest_path: Union[str, Path], scene_id: str, tokens: SceneTokens) -> None:
    manifest_path = Path(manifest_path)
    blob_name = manifest_path.stem + ".matrix.bin"
    matrix = np.ascontiguousarray(tokens.matrix, dtype="<f4")
    blob = matrix.tobytes()
    manifest = {
        "scene_id": scene_id,
        "identifiers": [identifier for identifier, _ in tokens.entries],
        "rows": int(matrix.shape[0]),
        "token_dim": int(matrix.shape[1]) if matrix.ndim == 2 and matrix.shape[0] else 0,
        "matrix_file": blob_name,
        "matrix_sha256": hashlib.sha256(blob).hexdigest(),
    }
    (manifest_path.parent / blob_name).write_bytes(blob)
    manifest_path.write_bytes(_json_bytes(manifest))


def read_scene_tokens_matrix(manifest_path: Union[str, Path]) -> tuple[dict, np.ndarray]:
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text("utf-8"))
    blob_path = manifest_path.parent / manifest["matrix_file"]
    blob = blob_path.read_bytes()
    if hashlib.sha256(blob).hexdigest() != manifest["matrix_sha256"]:
        raise FormatError(f"{blob_path}: checksum mismatch")
    rows, dim = manifest["rows"], manifest["token_dim"]
    if len(blob) != rows * dim * 4:
        raise FormatError(f"{blob_path}: expected {rows * dim * 4} bytes, found {len(blob)}")
    matrix = np.frombuffer(blob, dtype="<f4").reshape(rows, dim) if rows else np.zeros((0, 0))
    return manifest, matrix


def write_results(path: Union[str, Path], results: Mapping) -> None:
    Path(path).write_bytes(_json_bytes(results))


def read_results(path: Union[str, Path]) -> dict:
    return json.loads(Path(path).read_text("utf-8"))
