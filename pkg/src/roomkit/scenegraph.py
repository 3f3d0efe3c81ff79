"""Hierarchical indoor scene graphs.

A scene graph is a tree rooted at three fixed structural nodes (ceiling,
wall, floor). Every edge carries one of four spatial relations: support
(child rests on the parent's upper surface), contain (child is inside the
parent), hang (child is suspended from the parent), attach (child is fixed
below the parent, e.g. a ceiling light).

The JSON wire format nests objects as ``label -> relation -> [ {child: ...} ]``:

    {
        "ceiling": {},
        "wall": {"hang": [{"art frame": {}}]},
        "floor": {"support": [{"desk": {"support": [{"mug": {}}]}}]}
    }

This module parses and canonically serializes that format, and decomposes a
graph into the units used for evaluation: pairwise relation triples,
per-object relation sets, per-depth layers, and the plain node set.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field

__all__ = [
    "RelationType",
    "SceneNode",
    "SceneGraph",
    "RelationTriple",
    "ObjectRelationUnit",
    "LayerUnit",
    "ValidationIssue",
    "ValidationReport",
    "SceneGraphError",
    "MalformedJsonError",
    "UnknownRelationError",
    "NonRootTopLevelKeyError",
    "DuplicateLabelError",
    "ROOT_LABELS",
    "parse_graph",
    "serialize_graph",
    "extract_json_block",
    "validate",
    "empty_graph",
    "dedupe_label",
]

ROOT_LABELS = ("ceiling", "wall", "floor")


class SceneGraphError(Exception):
    """Base error for scene graph parsing and construction."""


class MalformedJsonError(SceneGraphError):
    """Input is not valid JSON or does not follow the tree document shape."""


class UnknownRelationError(SceneGraphError):
    def __init__(self, name: str):
        super().__init__(f"unknown relation: {name!r}")
        self.name = name


class NonRootTopLevelKeyError(SceneGraphError):
    def __init__(self, name: str):
        super().__init__(f"top-level key is not a root node: {name!r}")
        self.name = name


class DuplicateLabelError(SceneGraphError):
    def __init__(self, name: str):
        super().__init__(f"duplicate label: {name!r}")
        self.name = name


class RelationType(enum.Enum):
    """The four spatial relations, in canonical serialization order."""

    SUPPORT = "support"
    CONTAIN = "contain"
    HANG = "hang"
    ATTACH = "attach"

    @classmethod
    def parse(cls, name: str) -> "RelationType":
        try:
            return cls(name)
        except ValueError:
            raise UnknownRelationError(name) from None

    def __str__(self) -> str:
        return self.value


_RELATION_ORDER = {r: i for i, r in enumerate(RelationType)}


@dataclass(frozen=True)
class RelationTriple:
    """One parent -> child edge, the unit of pairwise evaluation."""

    parent: str
    relation: RelationType
    child: str

    def __post_init__(self):
        if self.parent == self.child:
            raise SceneGraphError(f"self-relation on {self.parent!r}")

    def sort_key(self):
        return (self.parent, _RELATION_ORDER[self.relation], self.child)


@dataclass(frozen=True)
class ObjectRelationUnit:
    """All triples touching one label (as parent or child), canonically sorted."""

    label: str
    relations: tuple[RelationTriple, ...]


@dataclass(frozen=True)
class LayerUnit:
    """The set of labels at one tree depth (roots are depth 0)."""

    depth: int
    labels: frozenset[str]


@dataclass(frozen=True)
class SceneNode:
    """A labeled node with an ordered list of (relation, child) pairs.

    Children are normalized on construction: grouped by relation in
    canonical relation order, preserving insertion order within each
    relation. Nodes are immutable and safe to share.
    """

    label: str
    children: tuple[tuple[RelationType, "SceneNode"], ...] = ()

    def __post_init__(self):
        label = self.label.strip()
        if not label:
            raise SceneGraphError("empty node label")
        normalized = tuple(
            sorted(self.children, key=lambda rc: _RELATION_ORDER[rc[0]])
        )
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "children", normalized)


@dataclass(frozen=True)
class SceneGraph:
    """A validated scene graph; construction rejects duplicate labels."""

    ceiling: SceneNode = field(default_factory=lambda: SceneNode("ceiling"))
    wall: SceneNode = field(default_factory=lambda: SceneNode("wall"))
    floor: SceneNode = field(default_factory=lambda: SceneNode("floor"))

    def __post_init__(self):
        for node, expected in zip(self.roots(), ROOT_LABELS):
            if node.label != expected:
                raise SceneGraphError(
                    f"root labeled {node.label!r}, expected {expected!r}"
                )
        seen: set[str] = set()
        for label in self._walk_labels():
            if label in seen:
                raise DuplicateLabelError(label)
            seen.add(label)

    def roots(self) -> tuple[SceneNode, SceneNode, SceneNode]:
        return (self.ceiling, self.wall, self.floor)

    def _walk_labels(self):
        stack = list(reversed(self.roots()))
        while stack:
            node = stack.pop()
            yield node.label
            stack.extend(child for _, child in reversed(node.children))

    # -- decompositions ---------------------------------------------------

    def nodes(self) -> set[str]:
        """All labels in the graph, roots included."""
        return set(self._walk_labels())

    def to_pairwise(self) -> list[RelationTriple]:
        """One triple per edge, in depth-first traversal order."""
        triples: list[RelationTriple] = []

        def walk(node: SceneNode):
            for relation, child in node.children:
                triples.append(RelationTriple(node.label, relation, child.label))
                walk(child)

        for root in self.roots():
            walk(root)
        return triples

    def to_objectwise(self) -> list[ObjectRelationUnit]:
        """One unit per node, holding every triple that touches its label."""
        by_label: dict[str, list[RelationTriple]] = {
            label: [] for label in self._walk_labels()
        }
        for triple in self.to_pairwise():
            by_label[triple.parent].append(triple)
            by_label[triple.child].append(triple)
        return [
            ObjectRelationUnit(label, tuple(sorted(ts, key=RelationTriple.sort_key)))
            for label, ts in by_label.items()
        ]

    def layers(self) -> list[LayerUnit]:
        """Labels grouped by tree depth; depth 0 is the three roots."""
        levels: list[set[str]] = []
        frontier = list(self.roots())
        depth = 0
        while frontier:
            levels.append({node.label for node in frontier})
            frontier = [child for node in frontier for _, child in node.children]
            depth += 1
        return [LayerUnit(d, frozenset(labels)) for d, labels in enumerate(levels)]

    # -- structure queries -------------------------------------------------

    def find(self, label: str) -> SceneNode | None:
        for node in self._walk_nodes():
            if node.label == label:
                return node
        return None

    def _walk_nodes(self):
        stack = list(reversed(self.roots()))
        while stack:
            node = stack.pop()
            yield node
            stack.extend(child for _, child in reversed(node.children))

    def parent_of(self, label: str) -> tuple[str, RelationType] | None:
        """The (parent label, relation) of a node, or None for roots."""
        for triple in self.to_pairwise():
            if triple.child == label:
                return (triple.parent, triple.relation)
        return None

    @classmethod
    def from_triples(cls, triples) -> "SceneGraph":
        """Build a graph from an ordered edge list.

        Edge order determines child insertion order. Rejects nodes with
        more than one parent and edges unreachable from the roots.
        """
        children: dict[str, list[tuple[RelationType, str]]] = {}
        parent_count: dict[str, int] = {}
        for t in triples:
            if not isinstance(t, RelationTriple):
                t = RelationTriple(*t)
            children.setdefault(t.parent, []).append((t.relation, t.child))
            parent_count[t.child] = parent_count.get(t.child, 0) + 1
            if parent_count[t.child] > 1:
                raise DuplicateLabelError(t.child)
        for root in ROOT_LABELS:
            if parent_count.get(root):
                raise SceneGraphError(f"root {root!r} cannot have a parent")

        building: set[str] = set()

        def build(label: str) -> SceneNode:
            if label in building:
                raise SceneGraphError(f"cycle through {label!r}")
            building.add(label)
            node = SceneNode(
                label,
                tuple((rel, build(child)) for rel, child in children.get(label, [])),
            )
            building.discard(label)
            return node

        graph = cls(*(build(root) for root in ROOT_LABELS))
        orphans = set(children) - graph.nodes()
        if orphans:
            raise SceneGraphError(f"edges unreachable from roots: {sorted(orphans)}")
        return graph


def empty_graph() -> SceneGraph:
    return SceneGraph()


def dedupe_label(label: str, taken: set[str]) -> str:
    """Resolve a duplicate by numeric suffixing: first free ``label_k``, k >= 0."""
    if label not in taken:
        return label
    k = 0
    while f"{label}_{k}" in taken:
        k += 1
    return f"{label}_{k}"


# -- parsing ---------------------------------------------------------------


def _parse_node_body(
    label: str,
    body,
    taken: set[str],
    strict: bool,
    issues: list["ValidationIssue"] | None,
) -> SceneNode:
    if not isinstance(body, dict):
        raise MalformedJsonError(f"node body of {label!r} must be an object")
    children: list[tuple[RelationType, SceneNode]] = []
    for relation_name, entries in body.items():
        try:
            relation = RelationType.parse(relation_name)
        except UnknownRelationError:
            if issues is not None:
                issues.append(
                    ValidationIssue("error", f"unknown relation {relation_name!r} under {label!r}")
                )
                continue
            raise
        if not isinstance(entries, list):
            raise MalformedJsonError(
                f"relation {relation_name!r} under {label!r} must map to a list"
            )
        for entry in entries:
            if not isinstance(entry, dict) or len(entry) != 1:
                raise MalformedJsonError(
                    f"child entries under {label!r}/{relation_name} must be single-key objects"
                )
            (child_label, child_body), = entry.items()
            child_label = str(child_label).strip()
            if not child_label:
                raise MalformedJsonError(f"empty child label under {label!r}")
            if child_label in taken:
                if strict:
                    raise DuplicateLabelError(child_label)
                if issues is not None:
                    issues.append(
                        ValidationIssue("error", f"duplicate label {child_label!r}")
                    )
                child_label = dedupe_label(child_label, taken)
            taken.add(child_label)
            children.append(
                (relation, _parse_node_body(child_label, child_body, taken, strict, issues))
            )
    return SceneNode(label, tuple(children))


def _parse_document(doc, strict: bool, issues: list["ValidationIssue"] | None) -> SceneGraph:
    if not isinstance(doc, dict):
        raise MalformedJsonError("top level must be a JSON object")
    trimmed = {str(k).strip(): v for k, v in doc.items()}
    for key in trimmed:
        if key not in ROOT_LABELS:
            if issues is not None:
                issues.append(ValidationIssue("error", f"top-level key {key!r} is not a root"))
            else:
                raise NonRootTopLevelKeyError(key)
    taken = set(ROOT_LABELS)
    roots = [
        _parse_node_body(root, trimmed.get(root, {}), taken, strict, issues)
        for root in ROOT_LABELS
    ]
    return SceneGraph(*roots)


def parse_graph(text: str | dict, strict: bool = False) -> SceneGraph:
    """Parse a scene graph document.

    Missing top-level roots are materialized empty. Duplicate labels are
    renamed by numeric suffixing unless ``strict`` is set, in which case
    they raise DuplicateLabelError.
    """
    if isinstance(text, dict):
        doc = text
    else:
        try:
            doc = json.loads(text)
        except (json.JSONDecodeError, TypeError) as exc:
            raise MalformedJsonError(str(exc)) from exc
    return _parse_document(doc, strict, issues=None)


# -- serialization ---------------------------------------------------------


def _node_to_doc(node: SceneNode) -> dict:
    body: dict[str, list] = {}
    for relation, child in node.children:
        body.setdefault(relation.value, []).append({child.label: _node_to_doc(child)})
    # children are already grouped canonically; rebuild in canonical key order
    return {
        rel.value: body[rel.value] for rel in RelationType if rel.value in body
    }


def graph_to_doc(g: SceneGraph) -> dict:
    """The graph as a plain nested dict in canonical key order."""
    return {root.label: _node_to_doc(root) for root in g.roots()}


def serialize_graph(g: SceneGraph) -> str:
    """Canonical serialization: fixed root and relation order, 4-space indent.

    Deterministic: equal graphs produce byte-equal documents, and
    ``parse_graph(serialize_graph(g))`` reproduces ``g`` exactly.
    """
    return json.dumps(graph_to_doc(g), indent=4, ensure_ascii=False)


# -- JSON block extraction ---------------------------------------------------

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*")


def extract_json_block(model_output: str) -> str | None:
    """Extract the first parseable outermost ``{...}`` block from free text.

    Code fences are stripped first. Brace tracking is string-aware, so
    braces inside JSON string values do not terminate the block. Returns
    None when no parseable block exists; absence is a value, not an error.
    """
    if not model_output:
        return None
    text = _FENCE_RE.sub(" ", model_output)
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    block = text[start : i + 1]
                    try:
                        json.loads(block)
                    except json.JSONDecodeError:
                        break
                    return block
        start = text.find("{", start + 1)
    return None


# -- validation --------------------------------------------------------------


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" or "warning"
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...]
    warnings: tuple[ValidationIssue, ...]
    graph: SceneGraph | None

    @property
    def ok(self) -> bool:
        return not self.errors


# Advisory priors only: real scenes break them (a pillow can end up on the
# floor), so these never block.
_PRIOR_WARNINGS = {
    ("floor", RelationType.HANG): "nothing hangs from the floor",
    ("floor", RelationType.ATTACH): "nothing attaches below the floor",
    ("ceiling", RelationType.SUPPORT): "the ceiling has no upper surface to support",
}


def validate(source: str | dict | SceneGraph) -> ValidationReport:
    """Check a document or graph; hard errors plus advisory prior warnings.

    Accepts raw JSON text, a parsed document, or an already-built graph.
    Structural problems (duplicate labels, unknown relations, stray
    top-level keys) are errors; edges that merely violate placement priors
    are warnings and never block.
    """
    issues: list[ValidationIssue] = []
    if isinstance(source, SceneGraph):
        graph = source
    else:
        try:
            doc = json.loads(source) if isinstance(source, str) else source
        except (json.JSONDecodeError, TypeError) as exc:
            issue = ValidationIssue("error", f"malformed JSON: {exc}")
            return ValidationReport((issue,), (), None)
        try:
            graph = _parse_document(doc, strict=False, issues=issues)
        except SceneGraphError as exc:
            issues.append(ValidationIssue("error", str(exc)))
            graph = None

    warnings: list[ValidationIssue] = []
    if graph is not None:
        for triple in graph.to_pairwise():
            note = _PRIOR_WARNINGS.get((triple.parent, triple.relation))
            if note:
                warnings.append(
                    ValidationIssue(
                        "warning",
                        f"({triple.parent}, {triple.relation}, {triple.child}): {note}",
                    )
                )
    errors = tuple(i for i in issues if i.severity == "error")
    return ValidationReport(errors, tuple(warnings), graph)
