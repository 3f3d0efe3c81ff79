"""Training-record generation for scene QA datasets.

Two record families:

* graph records: the hierarchical-relationship question for an image, with
  an answer made of a natural-language walkthrough of the tree followed by
  the canonical JSON document;
* distance records: templated questions about the distance between one,
  two, or three object pairs, answered with one-decimal meter values.

Also the dataset curation rules: CLIP-score image filtering and the object
vocabulary blocklists.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import sys
from dataclasses import dataclass

from . import scenegraph
from .backends.protocol import graph_prompt
from .geometry import DistanceMatrix
from .scenegraph import RelationType, SceneGraph

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "QARecord",
    "TemplateBank",
    "FilterRuleSet",
    "TooFewObjectsError",
    "MissingPromptScoreError",
    "POSITIVE_IMAGE_PROMPT",
    "NEGATIVE_IMAGE_PROMPTS",
    "DISTANCE_UNIT_HINT",
    "default_bank",
    "format_meters",
    "gen_distance_qa",
    "gen_graph_cot",
    "gen_graph_qa",
    "filter_scene_image",
    "filter_vocabulary",
    "dataset_stats",
]


class TooFewObjectsError(ValueError):
    """Not enough distinct objects for the requested question arity."""


class MissingPromptScoreError(KeyError):
    """An image filter decision is missing a required prompt score."""


# Appended to distance queries when probing models that otherwise dodge
# numeric answers.
DISTANCE_UNIT_HINT = "Please output how many meters, for example: 2.1m"


@dataclass(frozen=True)
class QARecord:
    """One training example; ``payload`` is the structured ground truth."""

    id: str
    image: str
    task: str  # "graph" or "distance"
    question: str
    answer: str
    payload: dict | list
    provenance: str = "generated"  # generated | corrected | approved
    source: str = ""
    split: str = "train"

    def to_json_line(self) -> str:
        doc = {
            "id": self.id,
            "image": self.image,
            "task": self.task,
            "question": self.question,
            "answer": self.answer,
            "payload": self.payload,
            "provenance": self.provenance,
        }
        if self.source:
            doc["source"] = self.source
        if self.split != "train":
            doc["split"] = self.split
        return json.dumps(doc, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "QARecord":
        doc = json.loads(line)
        return cls(
            id=doc["id"],
            image=doc["image"],
            task=doc["task"],
            question=doc["question"],
            answer=doc["answer"],
            payload=doc["payload"],
            provenance=doc.get("provenance", "generated"),
            source=doc.get("source", ""),
            split=doc.get("split", "train"),
        )


# -- distance question templates ------------------------------------------------

SINGLE_TEMPLATES = (
    "What's the distance from [A] to [B]?",
    "Can you calculate the length between [A] and [B]?",
    "Could you find out how far [A] is from [B]?",
    "Tell me how much space is between [A] and [B].",
    "Can you estimate the distance from [A] to [B]?",
    "What's the measurement of the distance between [A] and [B]?",
    "Do you know how many meters are between [A] and [B]?",
    "Can you tell the distance between [A] and [B]?",
    "How many steps would it take to get from [A] to [B]?",
    "Please measure the space between [A] and [B].",
    "How far would I need to walk to get from [A] to [B]?",
    "Please calculate the distance of [A] from [B].",
    "How many feet are between [A] and [B]?",
    "Could you provide an estimate of the distance from [A] to [B]?",
    "Can you measure how far [A] is from [B]?",
)

DUAL_TEMPLATES = (
    "Can you determine the distance from [A] to [B] and also from [C] to [D]?",
    "What is the measurement of the space separating [A] and [B], and also [C] and [D]?",
    "Could you calculate the lengths between [A] and [B], and between [C] and [D]?",
    "Please provide the distances from [A] to [B] and from [C] to [D].",
    "How far apart are [A] and [B], and what about the distance between [C] and [D]?",
    "Can you estimate how many meters separate [A] from [B] and [C] from [D]?",
    "Tell me the distance between [A] and [B], and also calculate it for [C] and [D].",
    "Could you measure the space from [A] to [B] and compare it with the distance from [C] to [D]?",
    "What's the length from [A] to [B] and from [C] to [D]?",
    "How many steps would it take to walk from [A] to [B] and from [C] to [D]?",
    "Please estimate the distance between [A] and [B], and also between [C] and [D].",
    "Can you tell me how much space separates [A] from [B], and the same for [C] and [D]?",
    "How many feet are there between [A] and [B], and also between [C] and [D]?",
    "Could you inform me about the distances from [A] to [B] and from [C] to [D]?",
    "What are the measurements of the distances between [A] and [B], and [C] and [D]?",
)

TRIPLE_TEMPLATES = (
    "Can you determine the distance from [A] to [B], and also from [C] to [D], and from [E] to [F]?",
    "Please calculate the lengths between [A] and [B], [C] and [D], and [E] and [F].",
    "How far is it from [A] to [B], and could you also tell me the distance between [C] and [D], and [E] and [F]?",
    "Could you measure the spaces between [A] and [B], [C] and [D], and [E] and [F]?",
    "What are the distances from [A] to [B], from [C] to [D], and from [E] to [F]?",
    "I need to know how many meters separate [A] and [B], [C] and [D], and [E] and [F]. Can you help?",
    "Can you provide the measurements of the distances between [A] and [B], [C] and [D], and [E] and [F]?",
    "How many steps would it take to walk from [A] to [B], from [C] to [D], and from [E] to [F]?",
    "Please inform me about the distance from [A] to [B], the distance from [C] to [D], and the distance from [E] to [F].",
    "Can you estimate how far [A] is from [B], how far [C] is from [D], and how far [E] is from [F]?",
    "What is the length from [A] to [B], from [C] to [D], and from [E] to [F]?",
    "Could you tell me how much space separates [A] and [B], [C] and [D], and [E] and [F]?",
    "How many feet are there between [A] and [B], between [C] and [D], and between [E] and [F]?",
    "Could you provide an estimate of the distances from [A] to [B], from [C] to [D], and from [E] to [F]?",
    "Please measure how far [A] is from [B], how far [C] is from [D], and how far [E] is from [F].",
)

PLACEHOLDERS = ("[A]", "[B]", "[C]", "[D]", "[E]", "[F]")


@dataclass(frozen=True)
class TemplateBank:
    """Exactly 45 distance-question templates: 15 single, 15 dual, 15 triple."""

    single: tuple[str, ...] = SINGLE_TEMPLATES
    dual: tuple[str, ...] = DUAL_TEMPLATES
    triple: tuple[str, ...] = TRIPLE_TEMPLATES

    def __post_init__(self):
        for name, templates, arity in (
            ("single", self.single, 2),
            ("dual", self.dual, 4),
            ("triple", self.triple, 6),
        ):
            if len(templates) != 15:
                raise ValueError(f"{name} templates must number 15, got {len(templates)}")
            expected = set(PLACEHOLDERS[:arity])
            for template in templates:
                found = {p for p in PLACEHOLDERS if p in template}
                if found != expected:
                    raise ValueError(
                        f"{name} template has placeholders {sorted(found)}, "
                        f"expected {sorted(expected)}: {template!r}"
                    )

    def __len__(self) -> int:
        return len(self.single) + len(self.dual) + len(self.triple)

    @classmethod
    def from_toml(cls, path) -> "TemplateBank":
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        return cls(
            single=tuple(doc["templates"]["single"]),
            dual=tuple(doc["templates"]["dual"]),
            triple=tuple(doc["templates"]["triple"]),
        )


def default_bank() -> TemplateBank:
    return TemplateBank()


def format_meters(value: float) -> str:
    """One-decimal meter formatting with half-up rounding: 2.1 -> "2.1m"."""
    import decimal

    quantized = decimal.Decimal(repr(float(value))).quantize(
        decimal.Decimal("0.1"), rounding=decimal.ROUND_HALF_UP
    )
    return f"{quantized}m"


def _fill(template: str, labels) -> str:
    out = template
    for placeholder, label in zip(PLACEHOLDERS, labels):
        out = out.replace(placeholder, label)
    return out


def gen_distance_qa(
    objects,
    distances: DistanceMatrix,
    bank: TemplateBank | None = None,
    seed: int = 0,
    counts: tuple[int, int, int] = (5, 2, 1),
) -> list[QARecord]:
    """Sample distance questions for one scene.

    ``counts`` controls how many single/dual/triple records to draw; each
    record derives its own RNG from (seed, index) so the output does not
    depend on how a batch is partitioned. Answers list one-decimal meter
    values in question order.
    """
    bank = bank or default_bank()
    objects = list(objects)
    templates_by_arity = {2: bank.single, 4: bank.dual, 6: bank.triple}
    records: list[QARecord] = []
    record_index = 0
    for arity, n_records in zip((2, 4, 6), counts):
        if n_records and len(objects) < arity:
            raise TooFewObjectsError(
                f"need {arity} distinct objects for {n_records} "
                f"{'single' if arity == 2 else 'dual' if arity == 4 else 'triple'} "
                f"questions, have {len(objects)}"
            )
        for _ in range(n_records):
            rng = random.Random(f"{seed}:{record_index}")
            chosen = rng.sample(objects, arity)
            template = rng.choice(templates_by_arity[arity])
            question = _fill(template, chosen)
            pairs = [(chosen[i], chosen[i + 1]) for i in range(0, arity, 2)]
            meters = [distances.get(a, b) for a, b in pairs]
            answer = ", ".join(format_meters(m) for m in meters)
            payload = [
                {"pair": [a, b], "meters": m} for (a, b), m in zip(pairs, meters)
            ]
            digest = hashlib.sha1(
                f"{seed}:{record_index}:{question}".encode()
            ).hexdigest()[:12]
            records.append(
                QARecord(
                    id=f"dist-{digest}",
                    image="",
                    task="distance",
                    question=question,
                    answer=answer,
                    payload=payload,
                )
            )
            record_index += 1
    return records


# -- graph records ---------------------------------------------------------------


def _join_labels(labels, article: bool) -> str:
    def wrap(label: str) -> str:
        if not article:
            return label
        word = "an" if label[:1].lower() in "aeiou" else "a"
        return f"{word} {label}"

    labels = [wrap(label) for label in labels]
    if len(labels) == 1:
        return labels[0]
    if len(labels) == 2:
        return f"{labels[0]} and {labels[1]}"
    return ", ".join(labels[:-1]) + f", and {labels[-1]}"


def _group_sentence(parent: str, relation: RelationType, children: list[str], is_root: bool) -> str:
    plural = len(children) > 1
    if relation is RelationType.SUPPORT and not is_root:
        listing = _join_labels(children, article=True)
        return f"On top of the {parent}, there {'are' if plural else 'is'} {listing}."
    if relation is RelationType.SUPPORT:
        listing = _join_labels(children, article=False)
        return f"The {listing} {'are' if plural else 'is'} supported by the {parent}."
    if relation is RelationType.CONTAIN:
        listing = _join_labels(children, article=True)
        return f"Inside the {parent}, there {'are' if plural else 'is'} {listing}."
    if relation is RelationType.HANG:
        listing = _join_labels(children, article=False)
        return f"The {listing} {'are' if plural else 'is'} hanging on the {parent}."
    listing = _join_labels(children, article=False)
    return f"The {listing} {'are' if plural else 'is'} attached to the {parent}."


def gen_graph_cot(g: SceneGraph) -> str:
    """Deterministic walkthrough paragraph mentioning every edge exactly once.

    Edges are grouped by (parent, relation) and emitted in depth-first
    canonical order, one sentence per group.
    """
    sentences: list[str] = []

    def walk(node, is_root: bool):
        groups: dict[RelationType, list[str]] = {}
        for relation, child in node.children:
            groups.setdefault(relation, []).append(child.label)
        for relation, children in groups.items():
            sentences.append(_group_sentence(node.label, relation, children, is_root))
        for _, child in node.children:
            walk(child, False)

    for root in g.roots():
        walk(root, True)
    if not sentences:
        return "The room contains no annotated objects."
    return " ".join(sentences)


def _traversal_labels(g: SceneGraph) -> list[str]:
    labels: list[str] = []

    def walk(node):
        for _, child in node.children:
            labels.append(child.label)
            walk(child)

    for root in g.roots():
        walk(root)
    return labels


def gen_graph_qa(
    g: SceneGraph,
    image: str,
    cot_client=None,
    provenance: str = "generated",
    record_id: str | None = None,
) -> QARecord:
    """Build one graph record: templated question, walkthrough + JSON answer.

    When ``cot_client`` is given, its ``cot`` endpoint may reword the
    walkthrough; the reworded text is kept only if the JSON block and
    payload still round-trip.
    """
    object_list = _traversal_labels(g)
    question = graph_prompt(object_list)
    cot = gen_graph_cot(g)
    if cot_client is not None:
        reworded = cot_client.cot(cot).strip()
        # keep the rewording only if it cannot corrupt the answer's single
        # JSON block
        if reworded and scenegraph.extract_json_block(reworded) is None:
            cot = reworded
    document = scenegraph.serialize_graph(g)
    answer = f"{cot}\n\n{document}"
    if record_id is None:
        digest = hashlib.sha1(f"{image}:{document}".encode()).hexdigest()[:12]
        record_id = f"graph-{digest}"
    return QARecord(
        id=record_id,
        image=image,
        task="graph",
        question=question,
        answer=answer,
        payload=scenegraph.graph_to_doc(g),
        provenance=provenance,
    )


# -- image filtering ---------------------------------------------------------------

POSITIVE_IMAGE_PROMPT = "An iphone photo of an indoor scene."

NEGATIVE_IMAGE_PROMPTS = (
    "A close up shot of a single object.",
    "A product displayed in front of a white background.",
    "An artwork.",
    "A painting.",
    "A screenshot of graphics user interface.",
    "A piece of text.",
    "A sketch.",
    "A cartoon.",
)


def filter_scene_image(scores: dict) -> tuple[bool, str | None]:
    """Keep an image iff the positive prompt strictly beats every negative.

    ``scores`` maps each of the nine prompts to its similarity score.
    Returns (keep, reason); the reason of a dropped image is the strongest
    negative prompt.
    """
    try:
        positive = scores[POSITIVE_IMAGE_PROMPT]
        negatives = {prompt: scores[prompt] for prompt in NEGATIVE_IMAGE_PROMPTS}
    except KeyError as exc:
        raise MissingPromptScoreError(exc.args[0]) from exc
    worst = max(negatives, key=lambda p: negatives[p])
    if positive > negatives[worst]:
        return True, None
    return False, worst


# -- vocabulary filtering -------------------------------------------------------------

# Root-surface names are dropped on exact match only ("floor" is not an
# object, but "floor lamp" is).
ROOT_SURFACE_LABELS = frozenset(
    {"wall", "walls", "ceiling", "ceilings", "floor", "floors"}
)

DEFAULT_STRUCTURE_TERMS = (
    "paneling",
    "panelling",
    "wainscoting",
    "baseboard",
    "molding",
    "moulding",
    "drywall",
    "wallpaper",
    "plaster",
    "tiling",
)

DEFAULT_HUMAN_TERMS = (
    "adult",
    "person",
    "people",
    "human",
    "man",
    "men",
    "woman",
    "women",
    "child",
    "children",
    "boy",
    "girl",
    "baby",
    "lady",
    "guy",
    "kid",
)

DEFAULT_OUTDOOR_TERMS = (
    "mountain",
    "mountains",
    "sky",
    "cloud",
    "clouds",
    "street",
    "road",
    "grass",
    "sun",
    "moon",
    "ocean",
    "sea",
    "beach",
    "forest",
)

DEFAULT_NON_ENTITY_TERMS = (
    "window view",
    "view",
    "reflection",
    "shadow",
    "sunlight",
    "daylight",
    "scenery",
    "background",
)

GARBLED_NON_ALPHA_LIMIT = 0.30


@dataclass(frozen=True)
class FilterRuleSet:
    """Blocklists and heuristics for cleaning detected object vocabularies."""

    structure_terms: tuple[str, ...] = DEFAULT_STRUCTURE_TERMS
    human_terms: tuple[str, ...] = DEFAULT_HUMAN_TERMS
    outdoor_terms: tuple[str, ...] = DEFAULT_OUTDOOR_TERMS
    non_entity_terms: tuple[str, ...] = DEFAULT_NON_ENTITY_TERMS
    english_only: bool = True
    garbled_heuristic: bool = True

    def __post_init__(self):
        for name in ("structure_terms", "human_terms", "outdoor_terms", "non_entity_terms"):
            terms = getattr(self, name)
            normalized = tuple(dict.fromkeys(t.strip().lower() for t in terms))
            object.__setattr__(self, name, normalized)

    @classmethod
    def from_toml(cls, path) -> "FilterRuleSet":
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        rules = doc.get("filters", doc)
        kwargs = {}
        for key in ("structure_terms", "human_terms", "outdoor_terms", "non_entity_terms"):
            if key in rules:
                kwargs[key] = tuple(rules[key])
        for key in ("english_only", "garbled_heuristic"):
            if key in rules:
                kwargs[key] = bool(rules[key])
        return cls(**kwargs)


def _word_match(term: str, label: str) -> bool:
    return re.search(rf"\b{re.escape(term)}\b", label) is not None


def _is_garbled(label: str) -> bool:
    if any(not ch.isprintable() for ch in label):
        return True
    meaningful = [ch for ch in label if not ch.isspace()]
    if not meaningful:
        return True
    non_alpha = sum(not ch.isalpha() for ch in meaningful)
    return non_alpha / len(meaningful) > GARBLED_NON_ALPHA_LIMIT


def _drop_reason(label: str, rules: FilterRuleSet) -> str | None:
    lowered = label.strip().lower()
    if not lowered:
        return "empty label"
    if lowered in ROOT_SURFACE_LABELS:
        return f"structure term {lowered!r}"
    for term in rules.structure_terms:
        if _word_match(term, lowered):
            return f"structure term {term!r}"
    if rules.garbled_heuristic and _is_garbled(lowered):
        return "garbled text"
    if rules.english_only and not lowered.isascii():
        return "non-English characters"
    for term in rules.human_terms:
        if _word_match(term, lowered):
            return f"human term {term!r}"
    for term in rules.outdoor_terms:
        if _word_match(term, lowered):
            return f"outdoor term {term!r}"
    for term in rules.non_entity_terms:
        if _word_match(term, lowered):
            return f"non-entity term {term!r}"
    return None


def filter_vocabulary(
    labels, rules: FilterRuleSet | None = None
) -> tuple[list[str], list[tuple[str, str]]]:
    """Split labels into kept and (dropped, reason) lists, order-preserving.

    Idempotent: filtering the kept output again changes nothing.
    """
    rules = rules or FilterRuleSet()
    kept: list[str] = []
    dropped: list[tuple[str, str]] = []
    for label in labels:
        reason = _drop_reason(label, rules)
        if reason is None:
            kept.append(label)
        else:
            dropped.append((label, reason))
    return kept, dropped


# -- dataset statistics -----------------------------------------------------------


def _labels_of(record: QARecord) -> set[str]:
    if record.task == "graph":
        try:
            graph = scenegraph.parse_graph(record.payload)
        except scenegraph.SceneGraphError:
            return set()
        return graph.nodes() - set(scenegraph.ROOT_LABELS)
    labels: set[str] = set()
    for entry in record.payload:
        labels.update(entry.get("pair", []))
    return labels


def dataset_stats(records) -> dict:
    """Table-shaped dataset summary: per-task/per-source counts and label stats."""
    records = list(records)
    totals = {"graph": 0, "distance": 0, "test": 0}
    per_source: dict[str, dict[str, int]] = {}
    distinct: set[str] = set()
    graph_object_counts: list[int] = []
    for record in records:
        source = record.source or "unknown"
        row = per_source.setdefault(source, {"graph": 0, "distance": 0, "test": 0})
        if record.split == "test":
            totals["test"] += 1
            row["test"] += 1
        elif record.task in totals:
            totals[record.task] += 1
            row[record.task] += 1
        labels = _labels_of(record)
        distinct.update(labels)
        if record.task == "graph":
            graph_object_counts.append(len(labels))
    return {
        "records": len(records),
        "totals": totals,
        "per_source": per_source,
        "distinct_labels": len(distinct),
        "mean_objects_per_graph": (
            sum(graph_object_counts) / len(graph_object_counts)
            if graph_object_counts
            else None
        ),
    }
