"""Evaluation metrics for scene graphs and distance answers.

Graph predictions are scored from four perspectives, each a set comparison
between ground truth and prediction:

* pairwise: relation triples (parent, relation, child)
* objectwise: per-object relation sets
* layerwise: per-depth label sets
* nodes: individual labels

Each perspective yields precision, recall, F1, and IoU from TP/FP/FN
counts. Distance answers are scored by parseability (the "number rate")
and by inclusive accuracy bands expressed as percentages of ground truth.
"""

from __future__ import annotations

import re
import statistics
from dataclasses import dataclass, field

from . import scenegraph
from .scenegraph import SceneGraph

__all__ = [
    "MetricCounts",
    "Scores",
    "GraphEvalReport",
    "GraphBatchReport",
    "DistanceBand",
    "DistanceReport",
    "ErrorStats",
    "EmptyBatchError",
    "PERSPECTIVES",
    "DEFAULT_BANDS",
    "set_counts",
    "scores_from_counts",
    "eval_graph",
    "eval_graph_batch",
    "parse_distance_answer",
    "parse_distance_answers",
    "pair_multi_answers",
    "eval_distance_batch",
    "error_stats",
]

PERSPECTIVES = ("pairwise", "objectwise", "layerwise", "nodes")


class EmptyBatchError(ValueError):
    """A batch operation received no samples."""


@dataclass(frozen=True)
class MetricCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    def __add__(self, other: "MetricCounts") -> "MetricCounts":
        return MetricCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    iou: float

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "iou": self.iou,
        }


def set_counts(gt, pred) -> MetricCounts:
    """TP/FP/FN of a set comparison; inputs are any hashable collections."""
    gt = set(gt)
    pred = set(pred)
    return MetricCounts(
        tp=len(gt & pred),
        fp=len(pred - gt),
        fn=len(gt - pred),
    )


def _ratio(num: float, den: float, empty: bool) -> float:
    if den == 0:
        return 1.0 if empty else 0.0
    return num / den


def scores_from_counts(c: MetricCounts) -> Scores:
    """Precision, recall, F1, and IoU from raw counts.

    A 0/0 denominator scores 1.0 only for the perfect empty match
    (tp = fp = fn = 0) and 0.0 otherwise.
    """
    empty = c.tp == 0 and c.fp == 0 and c.fn == 0
    precision = _ratio(c.tp, c.tp + c.fp, empty)
    recall = _ratio(c.tp, c.tp + c.fn, empty)
    f1 = _ratio(2 * precision * recall, precision + recall, empty)
    iou = _ratio(c.tp, c.tp + c.fp + c.fn, empty)
    return Scores(precision, recall, f1, iou)


# -- graph evaluation --------------------------------------------------------


def _graph_units(g: SceneGraph) -> dict[str, set]:
    return {
        "pairwise": set(g.to_pairwise()),
        "objectwise": set(g.to_objectwise()),
        "layerwise": set(g.layers()),
        "nodes": set(g.nodes()),
    }


@dataclass(frozen=True)
class GraphEvalReport:
    json_parsed: bool
    counts: dict[str, MetricCounts]
    scores: dict[str, Scores]

    @property
    def pairwise(self) -> Scores:
        return self.scores["pairwise"]

    @property
    def objectwise(self) -> Scores:
        return self.scores["objectwise"]

    @property
    def layerwise(self) -> Scores:
        return self.scores["layerwise"]

    @property
    def nodes(self) -> Scores:
        return self.scores["nodes"]


def eval_graph(gt: SceneGraph, pred_text: str) -> GraphEvalReport:
    """Score one prediction text against a ground-truth graph.

    The prediction is extracted with ``extract_json_block`` and parsed
    leniently. Unparseable predictions score zero everywhere and count
    against the JSON rate; their counts treat the prediction as an empty
    set so pooled batch scores stay meaningful.
    """
    pred_graph = None
    block = scenegraph.extract_json_block(pred_text or "")
    if block is not None:
        try:
            pred_graph = scenegraph.parse_graph(block)
        except scenegraph.SceneGraphError:
            pred_graph = None

    gt_units = _graph_units(gt)
    if pred_graph is None:
        counts = {p: MetricCounts(0, 0, len(gt_units[p])) for p in PERSPECTIVES}
        scores = {p: Scores(0.0, 0.0, 0.0, 0.0) for p in PERSPECTIVES}
        return GraphEvalReport(False, counts, scores)

    pred_units = _graph_units(pred_graph)
    counts = {p: set_counts(gt_units[p], pred_units[p]) for p in PERSPECTIVES}
    scores = {p: scores_from_counts(counts[p]) for p in PERSPECTIVES}
    return GraphEvalReport(True, counts, scores)


@dataclass(frozen=True)
class GraphBatchReport:
    n: int
    json_pct: float
    micro: dict[str, Scores]
    macro: dict[str, Scores]
    pooled_counts: dict[str, MetricCounts]
    reports: tuple[GraphEvalReport, ...]

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "json_pct": self.json_pct,
            "micro": {p: s.as_dict() for p, s in self.micro.items()},
            "macro": {p: s.as_dict() for p, s in self.macro.items()},
        }


def eval_graph_batch(samples) -> GraphBatchReport:
    """Evaluate (gt graph, prediction text) pairs.

    Headline scores are micro-averaged from pooled counts; macro averages
    (mean of per-sample scores) are reported alongside.
    """
    samples = list(samples)
    if not samples:
        raise EmptyBatchError("no samples")
    reports = tuple(eval_graph(gt, pred) for gt, pred in samples)
    pooled = {p: MetricCounts() for p in PERSPECTIVES}
    for report in reports:
        for p in PERSPECTIVES:
            pooled[p] = pooled[p] + report.counts[p]
    micro = {p: scores_from_counts(pooled[p]) for p in PERSPECTIVES}
    macro = {
        p: Scores(
            *(
                statistics.fmean(getattr(r.scores[p], f) for r in reports)
                for f in ("precision", "recall", "f1", "iou")
            )
        )
        for p in PERSPECTIVES
    }
    json_pct = 100.0 * sum(r.json_parsed for r in reports) / len(reports)
    return GraphBatchReport(len(reports), json_pct, micro, macro, pooled, reports)


# -- distance evaluation -------------------------------------------------------

_NUMBER_UNIT_RE = re.compile(
    r"(\d+(?:\.\d+)?)\s*(meters?|metres?|m\b|centimeters?|centimetres?|cm\b|feet|foot|ft\b)?",
    re.IGNORECASE,
)

_UNIT_FACTORS = {
    "m": 1.0,
    "meter": 1.0,
    "meters": 1.0,
    "metre": 1.0,
    "metres": 1.0,
    "cm": 0.01,
    "centimeter": 0.01,
    "centimeters": 0.01,
    "centimetre": 0.01,
    "centimetres": 0.01,
    "ft": 0.3048,
    "foot": 0.3048,
    "feet": 0.3048,
}


def parse_distance_answers(text: str) -> list[float]:
    """All numeric distance tokens in a text, converted to meters, in order."""
    if not text:
        return []
    values = []
    for match in _NUMBER_UNIT_RE.finditer(text):
        value = float(match.group(1))
        unit = (match.group(2) or "m").lower()
        values.append(value * _UNIT_FACTORS[unit])
    return values


def parse_distance_answer(text: str) -> float | None:
    """The first numeric distance token in meters, or None.

    A bare number is read as meters; "cm" and "ft"/"feet" are converted.
    """
    values = parse_distance_answers(text)
    return values[0] if values else None


def pair_multi_answers(gts, text: str) -> list[tuple[float, float | None]]:
    """Pair a multi-pair question's ground truths with its answer's values.

    The k-th ground truth pairs with the k-th numeric token in question
    order; a missing k-th number pairs with None and counts as unparsed
    downstream. The result feeds eval_distance_batch directly.
    """
    values = parse_distance_answers(text)
    return [
        (float(gt), values[i] if i < len(values) else None)
        for i, gt in enumerate(gts)
    ]


@dataclass(frozen=True)
class DistanceBand:
    """Inclusive accuracy band in percent of ground truth, e.g. (80, 120)."""

    low: float
    high: float

    def __post_init__(self):
        if not (0 < self.low <= 100 <= self.high):
            raise ValueError(f"invalid band [{self.low}, {self.high}]")

    def contains(self, gt: float, pred: float) -> bool:
        return self.low * gt / 100.0 <= pred <= self.high * gt / 100.0

    @property
    def name(self) -> str:
        def fmt(x: float) -> str:
            return str(int(x)) if float(x).is_integer() else str(x)

        return f"[{fmt(self.low)},{fmt(self.high)}]"


DEFAULT_BANDS = (DistanceBand(80, 120), DistanceBand(50, 200))


@dataclass(frozen=True)
class DistanceReport:
    n: int
    number_rate: float
    band_accuracy: dict[DistanceBand, float]
    abs_errors: tuple[float, ...]
    rel_errors: tuple[float, ...]

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "number_pct": 100.0 * self.number_rate,
            "bands": {band.name: acc for band, acc in self.band_accuracy.items()},
        }


def eval_distance_batch(pairs, bands=DEFAULT_BANDS) -> DistanceReport:
    """Score (gt meters, answer) pairs against inclusive accuracy bands.

    Answers may be raw text (first numeric token is used), a float, or
    None. Unparseable answers count against the number rate and against
    every band.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptyBatchError("no pairs")
    bands = tuple(bands)
    parsed: list[tuple[float, float | None]] = []
    for gt, answer in pairs:
        gt = float(gt)
        if gt <= 0:
            raise ValueError(f"ground truth distance must be positive, got {gt}")
        if answer is None or isinstance(answer, (int, float)):
            pred = None if answer is None else float(answer)
        else:
            pred = parse_distance_answer(answer)
        parsed.append((gt, pred))

    n = len(parsed)
    with_number = [(gt, pred) for gt, pred in parsed if pred is not None]
    band_accuracy = {
        band: sum(band.contains(gt, pred) for gt, pred in with_number) / n
        for band in bands
    }
    abs_errors = tuple(abs(pred - gt) for gt, pred in with_number)
    rel_errors = tuple(abs(pred - gt) / gt for gt, pred in with_number)
    return DistanceReport(n, len(with_number) / n, band_accuracy, abs_errors, rel_errors)


# -- error statistics ---------------------------------------------------------

ABS_ERROR_LEVELS = (0.5, 1.0, 2.0, 5.0)
REL_ERROR_LEVELS = (0.10, 0.20, 0.30)


@dataclass(frozen=True)
class ErrorStats:
    n: int
    abs_under: dict[float, float] = field(default_factory=dict)
    rel_under: dict[float, float] = field(default_factory=dict)
    mean_abs: float = 0.0
    median_abs: float = 0.0
    mean_rel: float = 0.0
    median_rel: float = 0.0

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "abs_under_m": {str(k): v for k, v in self.abs_under.items()},
            "rel_under_pct": {str(int(k * 100)): v for k, v in self.rel_under.items()},
            "mean_abs_m": self.mean_abs,
            "median_abs_m": self.median_abs,
            "mean_rel": self.mean_rel,
            "median_rel": self.median_rel,
        }


def error_stats(pairs) -> ErrorStats:
    """Error histogram summary over (gt meters, predicted meters) pairs.

    Reports the fraction of pairs with absolute error strictly under
    0.5/1/2/5 m and relative error strictly under 10/20/30 %, plus means
    and medians of both error kinds.
    """
    pairs = [(float(gt), float(pred)) for gt, pred in pairs]
    if not pairs:
        raise EmptyBatchError("no pairs")
    for gt, _ in pairs:
        if gt <= 0:
            raise ValueError(f"ground truth distance must be positive, got {gt}")
    abs_errors = [abs(pred - gt) for gt, pred in pairs]
    rel_errors = [abs(pred - gt) / gt for gt, pred in pairs]
    n = len(pairs)
    return ErrorStats(
        n=n,
        abs_under={level: sum(e < level for e in abs_errors) / n for level in ABS_ERROR_LEVELS},
        rel_under={level: sum(e < level for e in rel_errors) / n for level in REL_ERROR_LEVELS},
        mean_abs=statistics.fmean(abs_errors),
        median_abs=statistics.median(abs_errors),
        mean_rel=statistics.fmean(rel_errors),
        median_rel=statistics.median(rel_errors),
    )
