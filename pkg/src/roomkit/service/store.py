"""File-backed scene store with append-only revision history.

Each scene is one JSONL event log under ``<root>/scenes/``; image bytes
live content-addressed under ``<root>/blobs/``. Revisions are immutable;
corrections use optimistic concurrency against the latest revision id, so
of two concurrent writers on the same base exactly one wins and the other
gets StaleBaseError. Reads are lock-free snapshots; writes serialize per
scene.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .. import scenegraph
from ..scenegraph import RelationType, RelationTriple, SceneGraph
from ..scenevqa import QARecord, gen_graph_qa

__all__ = [
    "ServiceError",
    "DuplicateImageError",
    "StaleBaseError",
    "InvalidEditError",
    "UnknownSceneError",
    "NotReviewedError",
    "Revision",
    "SceneRecord",
    "Correction",
    "SceneStore",
    "apply_ops",
]


class ServiceError(Exception):
    pass


class DuplicateImageError(ServiceError):
    def __init__(self, image: str, scene_id: str):
        super().__init__(f"image {image} is already queued as {scene_id}")
        self.scene_id = scene_id


class StaleBaseError(ServiceError):
    def __init__(self, latest: str):
        super().__init__(f"base revision is stale; latest is {latest}")
        self.latest = latest


class InvalidEditError(ServiceError):
    def __init__(self, op: dict, reason: str):
        super().__init__(f"invalid edit {op.get('op', '?')}: {reason}")
        self.op = op
        self.reason = reason


class UnknownSceneError(ServiceError):
    def __init__(self, scene_id: str):
        super().__init__(f"unknown scene {scene_id}")
        self.scene_id = scene_id


class NotReviewedError(ServiceError):
    def __init__(self, scene_id: str):
        super().__init__(
            f"scene {scene_id} has no human revision; approve with accept_as_is "
            "to record an explicit accept"
        )


@dataclass(frozen=True)
class Revision:
    revision_id: str
    graph: SceneGraph
    author: str  # "model" or "human"
    timestamp: float


@dataclass
class SceneRecord:
    scene_id: str
    image: str
    objects: list[str]
    revisions: list[Revision] = field(default_factory=list)
    status: str = "pending"  # pending -> in_review -> approved

    @property
    def latest(self) -> Revision | None:
        return self.revisions[-1] if self.revisions else None

    def summary(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "status": self.status,
            "revision_count": len(self.revisions),
            "object_count": len(self.objects),
        }


@dataclass(frozen=True)
class Correction:
    """Ordered edit ops against a specific base revision."""

    base_revision_id: str
    ops: tuple[dict, ...]

    @classmethod
    def from_dict(cls, doc: dict) -> "Correction":
        return cls(doc["base_revision_id"], tuple(doc.get("ops", [])))


# -- graph edit ops ----------------------------------------------------------------


def _parse_relation(op: dict) -> RelationType:
    try:
        return RelationType.parse(op["relation"])
    except scenegraph.UnknownRelationError as exc:
        raise InvalidEditError(op, str(exc)) from exc


def _descendants(triples: list[RelationTriple], label: str) -> set[str]:
    children: dict[str, list[str]] = {}
    for t in triples:
        children.setdefault(t.parent, []).append(t.child)
    out: set[str] = set()
    stack = [label]
    while stack:
        for child in children.get(stack.pop(), []):
            if child not in out:
                out.add(child)
                stack.append(child)
    return out


def apply_ops(graph: SceneGraph, ops) -> SceneGraph:
    """Apply correction ops in order; any tree violation raises InvalidEditError."""
    triples = graph.to_pairwise()
    for op in ops:
        kind = op.get("op")
        labels = {t.parent for t in triples} | {t.child for t in triples}
        labels |= set(scenegraph.ROOT_LABELS)
        if kind == "add_relation":
            parent, child = op["parent"], op["child"]
            relation = _parse_relation(op)
            if parent not in labels:
                raise InvalidEditError(op, f"unknown parent {parent!r}")
            if child in labels:
                raise InvalidEditError(op, f"{child!r} already has a parent (tree violated)")
            triples.append(RelationTriple(parent, relation, child))
        elif kind == "remove_relation":
            parent, child = op["parent"], op["child"]
            edge = next(
                (t for t in triples if t.parent == parent and t.child == child), None
            )
            if edge is None:
                raise InvalidEditError(op, f"no edge {parent!r} -> {child!r}")
            doomed = _descendants(triples, child) | {child}
            triples = [t for t in triples if t.child not in doomed]
        elif kind == "move_subtree":
            child, new_parent = op["child"], op["new_parent"]
            relation = _parse_relation(op)
            if child in scenegraph.ROOT_LABELS:
                raise InvalidEditError(op, "cannot move a root")
            if new_parent not in labels:
                raise InvalidEditError(op, f"unknown parent {new_parent!r}")
            if new_parent == child or new_parent in _descendants(triples, child):
                raise InvalidEditError(op, "new parent is inside the moved subtree")
            old = next((t for t in triples if t.child == child), None)
            if old is None:
                raise InvalidEditError(op, f"unknown node {child!r}")
            triples = [t for t in triples if t is not old]
            triples.append(RelationTriple(new_parent, relation, child))
        elif kind == "rename":
            old_label, new_label = op["old"], op["new"]
            if old_label in scenegraph.ROOT_LABELS:
                raise InvalidEditError(op, "cannot rename a root")
            if old_label not in labels:
                raise InvalidEditError(op, f"unknown node {old_label!r}")
            if not str(new_label).strip():
                raise InvalidEditError(op, "empty new label")
            if new_label in labels:
                raise InvalidEditError(op, f"{new_label!r} already exists")
            triples = [
                RelationTriple(
                    new_label if t.parent == old_label else t.parent,
                    t.relation,
                    new_label if t.child == old_label else t.child,
                )
                for t in triples
            ]
        elif kind == "set_relation":
            parent, child = op["parent"], op["child"]
            relation = _parse_relation(op)
            index = next(
                (i for i, t in enumerate(triples) if t.parent == parent and t.child == child),
                None,
            )
            if index is None:
                raise InvalidEditError(op, f"no edge {parent!r} -> {child!r}")
            triples[index] = RelationTriple(parent, relation, child)
        else:
            raise InvalidEditError(op, f"unknown op kind {kind!r}")
    try:
        return SceneGraph.from_triples(triples)
    except scenegraph.SceneGraphError as exc:
        raise InvalidEditError({"op": "rebuild"}, str(exc)) from exc


# -- the store ---------------------------------------------------------------------


class SceneStore:
    def __init__(self, root):
        self.root = Path(root)
        (self.root / "scenes").mkdir(parents=True, exist_ok=True)
        (self.root / "blobs").mkdir(parents=True, exist_ok=True)
        self._scenes: dict[str, SceneRecord] = {}
        self._scene_locks: dict[str, threading.Lock] = {}
        self._store_lock = threading.Lock()
        self._replay()

    # -- persistence -----------------------------------------------------

    def _log_path(self, scene_id: str) -> Path:
        return self.root / "scenes" / f"{scene_id}.jsonl"

    def _replay(self):
        for path in sorted((self.root / "scenes").glob("*.jsonl")):
            record: SceneRecord | None = None
            with path.open() as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        event = json.loads(line)
                    except json.JSONDecodeError:
                        break  # torn trailing write; the prefix is the valid log
                    record = self._apply_event(record, event)
            if record is not None:
                self._scenes[record.scene_id] = record
                self._scene_locks[record.scene_id] = threading.Lock()

    @staticmethod
    def _apply_event(record: SceneRecord | None, event: dict) -> SceneRecord:
        kind = event["event"]
        if kind == "created":
            return SceneRecord(
                scene_id=event["scene_id"],
                image=event["image"],
                objects=list(event["objects"]),
            )
        if record is None:
            raise ServiceError("event log does not start with a created event")
        if kind == "revision":
            record.revisions.append(
                Revision(
                    revision_id=event["revision_id"],
                    graph=scenegraph.parse_graph(event["graph"], strict=True),
                    author=event["author"],
                    timestamp=event["ts"],
                )
            )
        elif kind == "status":
            record.status = event["status"]
        else:
            raise ServiceError(f"unknown event kind {kind!r}")
        return record

    def _append_event(self, scene_id: str, event: dict):
        line = json.dumps(event, ensure_ascii=False, sort_keys=True)
        with self._log_path(scene_id).open("a") as fh:
            fh.write(line + "\n")
            fh.flush()

    # -- blobs -------------------------------------------------------------

    def put_blob(self, data: bytes) -> str:
        ref = "sha256:" + hashlib.sha256(data).hexdigest()
        path = self.root / "blobs" / ref.replace(":", "_")
        if not path.exists():
            path.write_bytes(data)
        return ref

    def get_blob(self, ref: str) -> bytes | None:
        path = self.root / "blobs" / ref.replace(":", "_")
        return path.read_bytes() if path.exists() else None

    # -- scene lifecycle -----------------------------------------------------

    def enqueue_scene(
        self,
        image: str,
        objects,
        proposal: SceneGraph | None = None,
    ) -> str:
        """Queue a scene for review; the proposal becomes model revision r0."""
        objects = list(objects)
        if proposal is None and not objects:
            raise ServiceError("a scene without a proposal needs a non-empty object list")
        with self._store_lock:
            for record in self._scenes.values():
                if record.image == image and record.status != "approved":
                    raise DuplicateImageError(image, record.scene_id)
            scene_id = f"scene-{len(self._scenes) + 1:06d}"
            record = SceneRecord(scene_id=scene_id, image=image, objects=objects)
            self._append_event(
                scene_id,
                {"event": "created", "scene_id": scene_id, "image": image, "objects": objects},
            )
            if proposal is not None:
                revision = Revision("r0", proposal, "model", time.time())
                self._append_event(
                    scene_id,
                    {
                        "event": "revision",
                        "revision_id": revision.revision_id,
                        "author": revision.author,
                        "graph": scenegraph.graph_to_doc(proposal),
                        "ts": revision.timestamp,
                    },
                )
                record.revisions.append(revision)
            self._scenes[scene_id] = record
            self._scene_locks[scene_id] = threading.Lock()
        return scene_id

    def get(self, scene_id: str) -> SceneRecord:
        record = self._scenes.get(scene_id)
        if record is None:
            raise UnknownSceneError(scene_id)
        return record

    def apply_correction(self, scene_id: str, correction: Correction) -> str:
        """Append a human revision; rejects corrections on a stale base."""
        record = self.get(scene_id)
        with self._scene_locks[scene_id]:
            latest = record.latest
            if latest is None:
                raise InvalidEditError({"op": "correction"}, "scene has no revision yet")
            if correction.base_revision_id != latest.revision_id:
                raise StaleBaseError(latest.revision_id)
            new_graph = apply_ops(latest.graph, correction.ops)
            report = scenegraph.validate(new_graph)
            if not report.ok:
                raise InvalidEditError(
                    {"op": "correction"},
                    "; ".join(issue.message for issue in report.errors),
                )
            revision = Revision(
                revision_id=f"r{len(record.revisions)}",
                graph=new_graph,
                author="human",
                timestamp=time.time(),
            )
            self._append_event(
                scene_id,
                {
                    "event": "revision",
                    "revision_id": revision.revision_id,
                    "author": revision.author,
                    "graph": scenegraph.graph_to_doc(new_graph),
                    "ts": revision.timestamp,
                },
            )
            record.revisions.append(revision)
            if record.status == "pending":
                record.status = "in_review"
                self._append_event(scene_id, {"event": "status", "status": "in_review"})
            return revision.revision_id

    def approve(self, scene_id: str, accept_as_is: bool = False) -> SceneRecord:
        """Mark a scene approved; requires a human revision or an explicit accept."""
        record = self.get(scene_id)
        with self._scene_locks[scene_id]:
            if record.status == "approved":
                return record
            if record.latest is None:
                raise InvalidEditError({"op": "approve"}, "scene has no revision to approve")
            has_human = any(r.author == "human" for r in record.revisions)
            if not has_human and not accept_as_is:
                raise NotReviewedError(scene_id)
            record.status = "approved"
            self._append_event(scene_id, {"event": "status", "status": "approved"})
        return record

    def _snapshot(self) -> list[SceneRecord]:
        with self._store_lock:
            return list(self._scenes.values())

    def queue(self, status: str | None = None, page: int = 0, page_size: int = 50) -> list[dict]:
        """Paged scene summaries in deterministic scene-id order."""
        records = sorted(self._snapshot(), key=lambda r: r.scene_id)
        if status is not None:
            records = [r for r in records if r.status == status]
        start = page * page_size
        return [r.summary() for r in records[start : start + page_size]]

    def export_approved(self) -> list[QARecord]:
        """Training records from each approved scene's latest revision.

        Deterministic: same store state yields a byte-identical stream.
        """
        records: list[QARecord] = []
        for scene in sorted(self._snapshot(), key=lambda r: r.scene_id):
            if scene.status != "approved" or scene.latest is None:
                continue
            records.append(
                gen_graph_qa(
                    scene.latest.graph,
                    scene.image,
                    provenance="approved",
                    record_id=scene.scene_id,
                )
            )
        return records

    def export_jsonl(self) -> str:
        return "".join(record.to_json_line() + "\n" for record in self.export_approved())
