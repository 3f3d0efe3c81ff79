"""Iterative object perception over pluggable backends.

One run is a deterministic, sequential state machine:

* Round 0: describe the image, detect every described object, keep each
  object's best candidate box (or discard the object when no candidate
  clears the score floor).
* Rounds 1..max_depth: for every container found in the previous round,
  scale its box, re-describe and re-detect inside the crop, map accepted
  boxes back to image coordinates, and merge them into the object list
  with IoU-based duplicate dropping.

Candidate selection keeps candidates at or above ``min_score``; when the
top two survivors are separated by more than ``gap_threshold`` the best
one wins outright, otherwise the select backend arbitrates between
color-coded candidates.

Every backend call and decision is appended to a replayable trace, so a
run against a fixed mock script is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import geometry
from .backends import BackendClient, BackendError, SELECT_COLOR_PALETTE
from .geometry import BBox
from .metrics import EmptyBatchError
from .scenegraph import dedupe_label

__all__ = [
    "PerceptionConfig",
    "DetectedObject",
    "PerceptionResult",
    "PerceptionAborted",
    "filter_and_update",
    "perceive",
    "perception_stats",
]


class PerceptionAborted(Exception):
    """A backend failed mid-run; carries the partial trace."""

    def __init__(self, cause: Exception, trace: list[dict]):
        super().__init__(f"perception aborted: {cause}")
        self.cause = cause
        self.trace = trace


@dataclass(frozen=True)
class PerceptionConfig:
    min_score: float = 0.3       # candidate boxes below this are dropped
    gap_threshold: float = 0.15  # top-two score gap that skips the select call
    crop_scale: float = 1.5      # container box magnification before re-detection
    max_depth: int = 2           # container recursion rounds
    dedup_iou: float = 0.5       # same-label overlap that merges duplicates

    def __post_init__(self):
        if not (0 < self.min_score < 1):
            raise ValueError("min_score must be in (0, 1)")
        if not (0 <= self.gap_threshold < 1):
            raise ValueError("gap_threshold must be in [0, 1)")
        if self.crop_scale < 1:
            raise ValueError("crop_scale must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


@dataclass(frozen=True)
class DetectedObject:
    label: str
    container: bool
    bbox: BBox
    score: float
    depth_level: int
    parent_container: str | None = None

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "container": self.container,
            "bbox": list(self.bbox.as_tuple()),
            "score": self.score,
            "depth_level": self.depth_level,
            "parent_container": self.parent_container,
        }


@dataclass
class PerceptionResult:
    objects: list[DetectedObject]
    trace: list[dict]
    counts_per_round: dict[int, int]
    image_size: tuple[int, int]

    def as_dict(self) -> dict:
        return {
            "objects": [obj.as_dict() for obj in self.objects],
            "trace": self.trace,
            "counts_per_round": {str(k): v for k, v in self.counts_per_round.items()},
            "image_size": list(self.image_size),
        }


def filter_and_update(
    candidates,
    description: str,
    cfg: PerceptionConfig,
    select_fn=None,
    trace: list[dict] | None = None,
) -> tuple[BBox, float] | None:
    """Pick one box from scored candidates, or None to discard the object.

    ``select_fn(description, colors, boxes) -> color`` is only consulted
    when at least two candidates survive the score floor and their top-two
    gap does not exceed the threshold. A color outside the offered palette
    falls back to the best-scored candidate and records a warning.
    """
    candidates = [(box, float(score)) for box, score in candidates]
    if trace is None:
        trace = []
    scores = [score for _, score in candidates]
    if not candidates or max(scores) <= cfg.min_score:
        trace.append(
            {
                "event": "filter",
                "label": description,
                "decision": "discard",
                "scores": scores,
            }
        )
        return None
    survivors = sorted(
        (c for c in candidates if c[1] >= cfg.min_score),
        key=lambda c: -c[1],
    )
    if len(survivors) == 1 or survivors[0][1] - survivors[1][1] > cfg.gap_threshold:
        trace.append(
            {
                "event": "filter",
                "label": description,
                "decision": "top1",
                "scores": [s for _, s in survivors],
            }
        )
        return survivors[0]

    colors = list(SELECT_COLOR_PALETTE[: len(survivors)])
    boxes = [box for box, _ in survivors]
    try:
        color = select_fn(description, colors, boxes)
    except BackendError as exc:
        trace.append(
            {
                "event": "filter",
                "label": description,
                "decision": "select_failed",
                "warning": f"select backend failed ({exc}); falling back to top score",
                "scores": [s for _, s in survivors],
            }
        )
        return survivors[0]
    if color not in colors:
        trace.append(
            {
                "event": "filter",
                "label": description,
                "decision": "select_failed",
                "warning": f"select backend chose unknown color {color!r}; "
                "falling back to top score",
                "scores": [s for _, s in survivors],
            }
        )
        return survivors[0]
    chosen = survivors[colors.index(color)]
    trace.append(
        {
            "event": "filter",
            "label": description,
            "decision": "select",
            "color": color,
            "scores": [s for _, s in survivors],
        }
    )
    return chosen


def _as_bbox(raw) -> BBox:
    return BBox(*raw)


def perceive(
    client: BackendClient,
    image: str,
    image_size: tuple[int, int],
    cfg: PerceptionConfig | None = None,
) -> PerceptionResult:
    """Run the full iterative perception loop against one image reference."""
    cfg = cfg or PerceptionConfig()
    trace: list[dict] = []
    objects: list[DetectedObject] = []
    taken_labels: set[str] = set()
    counts: dict[int, int] = {}
    width, height = image_size

    def select_in(region):
        def select_fn(description, colors, boxes):
            return client.select(
                image,
                description,
                colors,
                [b.as_tuple() for b in boxes],
                region=region,
            )

        return select_fn

    def accept(label: str, container: bool, box: BBox, score: float, round_no: int, parent):
        final_label = dedupe_label(label, taken_labels)
        taken_labels.add(final_label)
        box = geometry.clamp_bbox(box, (width, height))
        objects.append(
            DetectedObject(final_label, container, box, score, round_no, parent)
        )
        counts[round_no] = counts.get(round_no, 0) + 1

    try:
        described = client.describe(image)
        trace.append(
            {
                "event": "describe",
                "objects": [
                    {"description": item.description, "container": item.container}
                    for item in described
                ],
            }
        )
        if described:
            detections = client.detect(image, [item.description for item in described])
            trace.append(
                {"event": "detect", "labels": [item.description for item in described]}
            )
            for item in described:
                candidates = [
                    (_as_bbox(box), score)
                    for box, score in detections.get(item.description, [])
                ]
                chosen = filter_and_update(
                    candidates, item.description, cfg, select_in(None), trace
                )
                if chosen is not None:
                    accept(item.description, item.container, *chosen, 0, None)

        pending = [obj for obj in objects if obj.container]
        for round_no in range(1, cfg.max_depth + 1):
            if not pending:
                break
            next_pending: list[DetectedObject] = []
            for container in pending:
                crop = geometry.scale_bbox(container.bbox, cfg.crop_scale, (width, height))
                region = crop.as_tuple()
                trace.append(
                    {
                        "event": "crop",
                        "container": container.label,
                        "bbox": list(region),
                        "round": round_no,
                    }
                )
                sub_items = client.subobjects(image, container.label, region=region)
                trace.append(
                    {
                        "event": "subobjects",
                        "container": container.label,
                        "objects": [item.description for item in sub_items],
                    }
                )
                if not sub_items:
                    continue
                detections = client.detect(
                    image, [item.description for item in sub_items], region=region
                )
                for item in sub_items:
                    candidates = [
                        (_as_bbox(box), score)
                        for box, score in detections.get(item.description, [])
                    ]
                    chosen = filter_and_update(
                        candidates, item.description, cfg, select_in(region), trace
                    )
                    if chosen is None:
                        continue
                    local_box, score = chosen
                    global_box = geometry.to_global(local_box, (crop.x0, crop.y0))
                    duplicate = next(
                        (
                            existing
                            for existing in objects
                            if _base_label(existing.label) == item.description
                            and geometry.bbox_iou(existing.bbox, global_box) > cfg.dedup_iou
                        ),
                        None,
                    )
                    if duplicate is not None:
                        trace.append(
                            {
                                "event": "dedup",
                                "label": item.description,
                                "kept": duplicate.label,
                                "iou": geometry.bbox_iou(duplicate.bbox, global_box),
                            }
                        )
                        continue
                    accept(
                        item.description,
                        item.container,
                        global_box,
                        score,
                        round_no,
                        container.label,
                    )
                    if item.container:
                        next_pending.append(objects[-1])
            pending = next_pending
    except BackendError as exc:
        raise PerceptionAborted(exc, trace) from exc

    return PerceptionResult(objects, trace, counts, image_size)


def _base_label(label: str) -> str:
    """Undo numeric suffixing for duplicate comparison (mug_1 -> mug)."""
    head, sep, tail = label.rpartition("_")
    if sep and tail.isdigit():
        return head
    return label


def perception_stats(results) -> dict:
    """Before/after-iteration statistics over a batch of perception runs.

    Reports mean object counts and mean box areas for the initial round
    versus the full run, plus the mean area of objects discovered in the
    container rounds.
    """
    results = list(results)
    if not results:
        raise EmptyBatchError("no perception results")

    initial_counts = []
    final_counts = []
    initial_areas: list[float] = []
    final_areas: list[float] = []
    later_areas: list[float] = []
    for result in results:
        initial = [obj for obj in result.objects if obj.depth_level == 0]
        later = [obj for obj in result.objects if obj.depth_level >= 1]
        initial_counts.append(len(initial))
        final_counts.append(len(result.objects))
        initial_areas.extend(geometry.bbox_area(obj.bbox) for obj in initial)
        final_areas.extend(geometry.bbox_area(obj.bbox) for obj in result.objects)
        later_areas.extend(geometry.bbox_area(obj.bbox) for obj in later)

    def mean(values):
        values = list(values)
        return sum(values) / len(values) if values else None

    return {
        "runs": len(results),
        "object_count_before": mean(initial_counts),
        "object_count_after": mean(final_counts),
        "object_count_change": mean(final_counts) - mean(initial_counts),
        "bbox_area_before": mean(initial_areas),
        "bbox_area_after": mean(final_areas),
        "new_objects_bbox_area": mean(later_areas),
        "mean_image_width": mean(r.image_size[0] for r in results),
        "mean_image_height": mean(r.image_size[1] for r in results),
    }
