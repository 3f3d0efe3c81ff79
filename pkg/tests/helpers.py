"""Shared test utilities: random graph documents and independent oracles.

The oracles walk raw JSON documents recursively and never touch the
library's graph type, so they stay independent of the code paths they
check.
"""

import random

RELATIONS = ("support", "contain", "hang", "attach")

LABEL_POOL = (
    "sofa", "armchair", "coffee table", "bookcase", "lamp", "rug", "plant",
    "mirror", "poster", "clock", "curtain", "television", "speaker",
    "console", "drawer", "cabinet", "vase", "candle", "tray", "basket",
    "cushion", "blanket", "monitor", "keyboard", "mouse", "notebook",
    "pen holder", "mug", "bottle", "bowl", "plate", "fruit basket",
    "toaster", "kettle", "pan", "shelf", "stool", "bench", "wardrobe",
    "nightstand", "bed", "pillow",
)


def random_graph_doc(rng: random.Random, max_nodes: int = 12) -> dict:
    """A random tree document with between 3 and max_nodes nodes."""
    n_extra = rng.randint(0, max_nodes - 3)
    labels = rng.sample(LABEL_POOL, n_extra)
    attached = ["ceiling", "wall", "floor"]
    edges = []
    for label in labels:
        parent = rng.choice(attached)
        edges.append((parent, rng.choice(RELATIONS), label))
        attached.append(label)

    children: dict[str, list[tuple[str, str]]] = {}
    for parent, relation, child in edges:
        children.setdefault(parent, []).append((relation, child))

    def body(label: str) -> dict:
        out: dict[str, list] = {}
        for relation, child in children.get(label, []):
            out.setdefault(relation, []).append({child: body(child)})
        return out

    return {root: body(root) for root in ("ceiling", "wall", "floor")}


# -- oracles over raw documents ----------------------------------------------


def oracle_edges(doc: dict) -> list[tuple[str, str, str]]:
    edges = []

    def walk(label: str, node_body: dict):
        for relation, entries in node_body.items():
            for entry in entries:
                ((child, child_body),) = entry.items()
                edges.append((label, relation, child))
                walk(child, child_body)

    for root in ("ceiling", "wall", "floor"):
        walk(root, doc.get(root, {}))
    return edges


def oracle_nodes(doc: dict) -> set[str]:
    labels = {"ceiling", "wall", "floor"}
    labels.update(child for _, _, child in oracle_edges(doc))
    return labels


def oracle_layers(doc: dict) -> list[set[str]]:
    parent_of = {child: parent for parent, _, child in oracle_edges(doc)}

    def depth(label: str) -> int:
        d = 0
        while label in parent_of:
            label = parent_of[label]
            d += 1
        return d

    layers: dict[int, set[str]] = {}
    for label in oracle_nodes(doc):
        layers.setdefault(depth(label), set()).add(label)
    return [layers[d] for d in sorted(layers)]


def oracle_objectwise(doc: dict) -> dict[str, set[tuple[str, str, str]]]:
    grouped: dict[str, set] = {label: set() for label in oracle_nodes(doc)}
    for parent, relation, child in oracle_edges(doc):
        grouped[parent].add((parent, relation, child))
        grouped[child].add((parent, relation, child))
    return grouped
