"""The scripted office scene used by the perception tests.

Hand-simulated expectations:

* "office chair" has candidates 0.9/0.6 (gap 0.30 > 0.15) -> best box wins
  without a select call;
* "floor lamp" has a single 0.25 candidate (max <= 0.3) -> discarded;
* "trash bin" has candidates 0.50/0.45 (gap 0.05) -> select call; the
  scripted pick is "green", the second-best box;
* "wooden desk" (container) crop = its box scaled 1.5x about the center:
  (40,40,60,60) -> (35,35,65,65);
* "storage shelf" (container) crop clamps at the image border:
  (70,70,95,95) -> (63.75,63.75,100,100);
* the desk yields sub-objects mug (kept), notebook (select call, "red"),
  pen (0.2, discarded); the shelf yields one kept sub-object;
* final count: 4 initial objects + 3 accepted sub-objects.
"""

from roomkit.backends import MockRule, MockScript

IMAGE = "sha256:" + "ab" * 32
IMAGE_SIZE = (100, 100)

PHASE1_LABELS = [
    "wooden desk",
    "office chair",
    "floor lamp",
    "trash bin",
    "storage shelf",
]

DESK_CROP = (35.0, 35.0, 65.0, 65.0)
SHELF_CROP = (63.75, 63.75, 100.0, 100.0)

EXPECTED_DECISIONS = [
    ("wooden desk", "top1"),
    ("office chair", "top1"),
    ("floor lamp", "discard"),
    ("trash bin", "select"),
    ("storage shelf", "top1"),
    ("mug", "top1"),
    ("notebook", "select"),
    ("pen", "discard"),
    ("box of files", "top1"),
]


def office_script() -> MockScript:
    return MockScript(
        [
            MockRule(
                "describe",
                {
                    "objects": [
                        {"description": "wooden desk", "container": True},
                        {"description": "office chair", "container": False},
                        {"description": "floor lamp", "container": False},
                        {"description": "trash bin", "container": False},
                        {"description": "storage shelf", "container": True},
                    ]
                },
            ),
            MockRule(
                "detect",
                {
                    "detections": {
                        "wooden desk": [{"bbox": [40, 40, 60, 60], "score": 0.85}],
                        "office chair": [
                            {"bbox": [10, 60, 30, 90], "score": 0.9},
                            {"bbox": [12, 62, 32, 92], "score": 0.6},
                        ],
                        "floor lamp": [{"bbox": [70, 10, 80, 50], "score": 0.25}],
                        "trash bin": [
                            {"bbox": [80, 70, 95, 95], "score": 0.50},
                            {"bbox": [78, 68, 93, 93], "score": 0.45},
                        ],
                        "storage shelf": [{"bbox": [70, 70, 95, 95], "score": 0.75}],
                    }
                },
                match={"labels": PHASE1_LABELS},
            ),
            MockRule(
                "select",
                {"reason": "the lower-left bin matches", "color": "green"},
                match={"description": "trash bin"},
            ),
            MockRule(
                "subobjects",
                {
                    "objects": [
                        {"description": "mug"},
                        {"description": "notebook"},
                        {"description": "pen"},
                    ]
                },
                match={"container": "wooden desk"},
            ),
            MockRule(
                "detect",
                {
                    "detections": {
                        "mug": [{"bbox": [5, 5, 12, 12], "score": 0.8}],
                        "notebook": [
                            {"bbox": [20, 20, 30, 28], "score": 0.6},
                            {"bbox": [21, 21, 31, 29], "score": 0.58},
                        ],
                        "pen": [{"bbox": [2, 2, 4, 4], "score": 0.2}],
                    }
                },
                match={"labels": ["mug", "notebook", "pen"]},
            ),
            MockRule(
                "select",
                {"reason": "the left notebook", "color": "red"},
                match={"description": "notebook"},
            ),
            MockRule(
                "subobjects",
                {"objects": [{"description": "box of files"}]},
                match={"container": "storage shelf"},
            ),
            MockRule(
                "detect",
                {"detections": {"box of files": [{"bbox": [5, 5, 15, 15], "score": 0.7}]}},
                match={"labels": ["box of files"]},
            ),
        ]
    )


def dedup_script() -> MockScript:
    """A desk sub-object re-detects the desk itself at the same spot."""
    return MockScript(
        [
            MockRule(
                "describe",
                {"objects": [{"description": "wooden desk", "container": True}]},
            ),
            MockRule(
                "detect",
                {"detections": {"wooden desk": [{"bbox": [40, 40, 60, 60], "score": 0.85}]}},
                match={"labels": ["wooden desk"]},
            ),
            MockRule(
                "subobjects",
                {
                    "objects": [
                        {"description": "mug"},
                        {"description": "wooden desk"},
                    ]
                },
                match={"container": "wooden desk"},
            ),
            MockRule(
                "detect",
                {
                    "detections": {
                        "mug": [{"bbox": [5, 5, 12, 12], "score": 0.8}],
                        # crop-space box that maps exactly onto the original desk
                        "wooden desk": [{"bbox": [5, 5, 25, 25], "score": 0.9}],
                    }
                },
                match={"labels": ["mug", "wooden desk"]},
            ),
        ]
    )


def no_container_script() -> MockScript:
    return MockScript(
        [
            MockRule(
                "describe",
                {"objects": [{"description": "office chair", "container": False}]},
            ),
            MockRule(
                "detect",
                {"detections": {"office chair": [{"bbox": [10, 60, 30, 90], "score": 0.9}]}},
                match={"labels": ["office chair"]},
            ),
        ]
    )
