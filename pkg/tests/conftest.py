import json

import pytest

from roomkit import scenegraph

# Toy scene: art frame on the wall, bookshelf/desk/chair on the floor,
# three small objects on the desk. 10 nodes, 7 edges, 3 layers.
TOY_DOC = {
    "wall": {"hang": [{"art frame": {}}]},
    "ceiling": {},
    "floor": {
        "support": [
            {"bookshelf_0": {}},
            {
                "desk": {
                    "support": [
                        {"mug": {}},
                        {"toothbrush holder": {}},
                        {"notebook": {}},
                    ]
                }
            },
            {"chair": {}},
        ]
    },
}

# Office scene with 17 nodes, 14 edges, 4 layers; the floor carries exactly
# four objects and depth 1 holds seven nodes in total.
SEVENTEEN_DOC = {
    "ceiling": {"attach": [{"ceiling lamp": {}}]},
    "wall": {"hang": [{"painting": {}}, {"clock": {}}]},
    "floor": {
        "support": [
            {
                "desk": {
                    "support": [
                        {"monitor": {}},
                        {"keyboard": {}},
                        {"mug": {"contain": [{"toothbrush": {}}]}},
                    ]
                }
            },
            {
                "bookshelf": {
                    "contain": [
                        {"books": {}},
                        {"vase": {"contain": [{"flower": {}}]}},
                    ]
                }
            },
            {"chair": {}},
            {"rug": {}},
        ]
    },
}


@pytest.fixture
def toy_doc() -> str:
    return json.dumps(TOY_DOC)


@pytest.fixture
def toy_graph():
    return scenegraph.parse_graph(json.dumps(TOY_DOC))


@pytest.fixture
def seventeen_doc() -> str:
    return json.dumps(SEVENTEEN_DOC)


@pytest.fixture
def seventeen_graph():
    return scenegraph.parse_graph(json.dumps(SEVENTEEN_DOC))
