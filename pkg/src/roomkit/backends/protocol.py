"""Endpoint schemas and prompt templates for the model backend protocol.

Every endpoint is ``POST /v1/<name>`` with a UTF-8 JSON body. A backend
may answer any request with ``{"refusal": "<text>"}`` instead of its
normal response shape. Boxes are ``[x0, y0, x1, y1]`` pixel arrays; when a
request carries a ``region``, the backend works on that crop and returns
crop-relative coordinates. Compositing (drawing candidate boxes for the
select endpoint) is the backend adapter's job.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass

import jsonschema

from ..scenegraph import extract_json_block


class BackendError(Exception):
    """Base error for backend protocol failures."""


class TransportError(BackendError):
    """The backend was unreachable or kept failing after retries."""


class SchemaViolationError(BackendError):
    """A request or response does not match its endpoint schema."""


class BackendRefusalError(BackendError):
    """The backend answered with a refusal instead of a result."""


class UnparseableError(BackendError):
    """Free-form model output held no usable JSON payload."""


SELECT_COLOR_PALETTE = (
    "red",
    "green",
    "blue",
    "yellow",
    "purple",
    "cyan",
    "orange",
    "magenta",
)


def blob_ref(data: bytes) -> str:
    """Content-addressed reference for an uploaded blob."""
    return "sha256:" + hashlib.sha256(data).hexdigest()


# -- schemas -------------------------------------------------------------------

_BOX = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 4,
    "maxItems": 4,
}

_IMAGE = {"type": "string", "minLength": 1}

_SCORE = {"type": "number", "minimum": 0, "maximum": 1}

_DESCRIBED_OBJECT = {
    "type": "object",
    "properties": {
        "description": {"type": "string", "minLength": 1},
        "container": {"type": "boolean"},
    },
    "required": ["description", "container"],
    "additionalProperties": False,
}

_SUB_OBJECT = {
    "type": "object",
    "properties": {
        "description": {"type": "string", "minLength": 1},
        "container": {"type": "boolean"},
    },
    "required": ["description"],
    "additionalProperties": False,
}

REQUEST_SCHEMAS: dict[str, dict] = {
    "describe": {
        "type": "object",
        "properties": {"image": _IMAGE},
        "required": ["image"],
        "additionalProperties": False,
    },
    "subobjects": {
        "type": "object",
        "properties": {
            "image": _IMAGE,
            "container": {"type": "string", "minLength": 1},
            "region": _BOX,
        },
        "required": ["image", "container"],
        "additionalProperties": False,
    },
    "select": {
        "type": "object",
        "properties": {
            "image": _IMAGE,
            "description": {"type": "string", "minLength": 1},
            "count": {"type": "integer", "minimum": 1},
            "colors": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "boxes": {"type": "array", "items": _BOX, "minItems": 1},
            "region": _BOX,
        },
        "required": ["image", "description", "colors", "boxes"],
        "additionalProperties": False,
    },
    "detect": {
        "type": "object",
        "properties": {
            "image": _IMAGE,
            "labels": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "region": _BOX,
        },
        "required": ["image", "labels"],
        "additionalProperties": False,
    },
    "segment": {
        "type": "object",
        "properties": {"image": _IMAGE, "bbox": _BOX},
        "required": ["image", "bbox"],
        "additionalProperties": False,
    },
    "depth": {
        "type": "object",
        "properties": {"image": _IMAGE},
        "required": ["image"],
        "additionalProperties": False,
    },
    "clipscore": {
        "type": "object",
        "properties": {
            "image": _IMAGE,
            "prompts": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        },
        "required": ["image", "prompts"],
        "additionalProperties": False,
    },
    "cot": {
        "type": "object",
        "properties": {"prompt": {"type": "string", "minLength": 1}},
        "required": ["prompt"],
        "additionalProperties": False,
    },
}

RESPONSE_SCHEMAS: dict[str, dict] = {
    "describe": {
        "type": "object",
        "properties": {"objects": {"type": "array", "items": _DESCRIBED_OBJECT}},
        "required": ["objects"],
        "additionalProperties": False,
    },
    "subobjects": {
        "type": "object",
        "properties": {"objects": {"type": "array", "items": _SUB_OBJECT}},
        "required": ["objects"],
        "additionalProperties": False,
    },
    "select": {
        "type": "object",
        "properties": {
            "reason": {"type": "string"},
            "color": {"type": "string", "minLength": 1},
        },
        "required": ["color"],
        "additionalProperties": False,
    },
    "detect": {
        "type": "object",
        "properties": {
            "detections": {
                "type": "object",
                "additionalProperties": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {"bbox": _BOX, "score": _SCORE},
                        "required": ["bbox", "score"],
                        "additionalProperties": False,
                    },
                },
            }
        },
        "required": ["detections"],
        "additionalProperties": False,
    },
    "segment": {
        "type": "object",
        "properties": {
            "mask": {
                "type": "object",
                "properties": {
                    "size": {
                        "type": "array",
                        "items": {"type": "integer"},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                    "counts": {"type": ["string", "array"]},
                },
                "required": ["size", "counts"],
                "additionalProperties": False,
            }
        },
        "required": ["mask"],
        "additionalProperties": False,
    },
    "depth": {
        "type": "object",
        "properties": {
            "width": {"type": "integer", "minimum": 1},
            "height": {"type": "integer", "minimum": 1},
            "scale": {"type": "number", "exclusiveMinimum": 0},
            "values": {"type": "array", "items": {"type": "number"}},
        },
        "required": ["width", "height", "scale", "values"],
        "additionalProperties": False,
    },
    "clipscore": {
        "type": "object",
        "properties": {"scores": {"type": "array", "items": {"type": "number"}}},
        "required": ["scores"],
        "additionalProperties": False,
    },
    "cot": {
        "type": "object",
        "properties": {"text": {"type": "string"}},
        "required": ["text"],
        "additionalProperties": False,
    },
}

ENDPOINTS = tuple(REQUEST_SCHEMAS)

REFUSAL_SCHEMA = {
    "type": "object",
    "properties": {"refusal": {"type": "string", "minLength": 1}},
    "required": ["refusal"],
    "additionalProperties": False,
}


def _validate(schema: dict, payload, what: str):
    try:
        jsonschema.validate(payload, schema)
    except jsonschema.ValidationError as exc:
        raise SchemaViolationError(f"{what}: {exc.message}") from exc


def validate_request(endpoint: str, payload: dict):
    if endpoint not in REQUEST_SCHEMAS:
        raise SchemaViolationError(f"unknown endpoint {endpoint!r}")
    _validate(REQUEST_SCHEMAS[endpoint], payload, f"{endpoint} request")


def validate_response(endpoint: str, payload: dict):
    """Check a response body; a refusal raises BackendRefusalError."""
    if endpoint not in RESPONSE_SCHEMAS:
        raise SchemaViolationError(f"unknown endpoint {endpoint!r}")
    if isinstance(payload, dict) and "refusal" in payload:
        _validate(REFUSAL_SCHEMA, payload, f"{endpoint} refusal")
        raise BackendRefusalError(payload["refusal"])
    _validate(RESPONSE_SCHEMAS[endpoint], payload, f"{endpoint} response")
    if endpoint == "depth":
        expected = payload["width"] * payload["height"]
        if len(payload["values"]) != expected:
            raise SchemaViolationError(
                f"depth response carries {len(payload['values'])} values, "
                f"expected {expected}"
            )


# -- model output parsing -------------------------------------------------------


@dataclass(frozen=True)
class DescribeItem:
    description: str
    container: bool = False


_OBJECT_KEY_RE = re.compile(r"^object(\d+)$")

_NO_OBJECTS_SENTINEL = "-1"


def parse_model_object_json(text: str) -> list[DescribeItem]:
    """Parse raw model output into described objects.

    Accepts the ``{"object1": {"description": ..., "container": ...}}``
    map shape, with container given as the strings "True"/"False" or as
    booleans. The sentinel "-1" means no suitable objects and yields an
    empty list. Raises UnparseableError when no JSON block exists and
    SchemaViolationError when a block exists but has the wrong shape.
    """
    stripped = (text or "").strip()
    if stripped == _NO_OBJECTS_SENTINEL:
        return []
    block = extract_json_block(stripped)
    if block is None:
        raise UnparseableError("no JSON block in model output")
    doc = json.loads(block)
    if not isinstance(doc, dict):
        raise SchemaViolationError("object payload must be a JSON object")
    keyed: list[tuple[int, DescribeItem]] = []
    for key, value in doc.items():
        match = _OBJECT_KEY_RE.match(key)
        if not match:
            raise SchemaViolationError(f"unexpected key {key!r} in object payload")
        if not isinstance(value, dict) or "description" not in value:
            raise SchemaViolationError(f"{key} must hold a description")
        description = value["description"]
        if not isinstance(description, str) or not description.strip():
            raise SchemaViolationError(f"{key} has an empty description")
        container = value.get("container", False)
        if isinstance(container, str):
            if container not in ("True", "False"):
                raise SchemaViolationError(
                    f"{key} container must be 'True' or 'False', got {container!r}"
                )
            container = container == "True"
        elif not isinstance(container, bool):
            raise SchemaViolationError(f"{key} container must be a boolean")
        keyed.append((int(match.group(1)), DescribeItem(description.strip(), container)))
    keyed.sort(key=lambda pair: pair[0])
    return [item for _, item in keyed]


# -- prompt templates -----------------------------------------------------------
#
# Shipped verbatim; placeholders {container}, {count}, {colors},
# {description}, and {object list} are substituted literally (the JSON
# example braces rule out str.format).

SYSTEM_PROMPT = "You are an assistant who perfectly describes images."

OBJECT_PROMPT = """Given an image, please create a JSON representation where each entry consists of a key "object" with a numerical suffix starting from 1. The value of each "object" key contains a "description" key and a "container" key, in which the value of the "description" key is a concise, up to eight-word sentence describing each main, clear, distinct object in the image while the "container" key's value should be either "True" or "False", indicating whether the targeted object has other sub-objects on or inside it.

Please note the following requirements:

1. Each entry should uniquely describe one element without repeating values.

2. For the "container" key, its value should be "True" if the object is containing or supporting other objects, and "False" otherwise.

3. The possible container that could only be a desk, shelf, bed or other similar items. Please consider a desk and its tablecloth as one object.

4. Do not miss any suitable object.

5. Ensure that your output can be parsed by python's json.loads() directly.

Following is an example: {"object1": {"description": "trash bin with liner", "container": "False"}, "object2": {"description": "retangular dinner table with tablecloths", "container": "True"}, "object3": {"description": "wooden shelf with electronic devices", "container": "True"}}"""

SUBOBJECT_PROMPT = """Given an image of a "{container}", please create a JSON representation where each entry consists of a key "object" with a numerical suffix starting from 1. The value of each "object" key contains a "description" key, in which the value of the "description" key is a concise, up to eight-word sentence describing each main, clear, distinct object on or inside the "{container}".

Please note the following requirements:

1. Each entry should uniquely describe one element without repeating values.

2. Only describe the objects that is on or inside the "{container}". Please ignore other parts of the image.

3. Do not miss any small object that is on or inside the "{container}".

4. Do not include the objects that are near, under or behind the "{container}". If there is no suitable object, please return -1.

5. Do not include the "{container}" in your output.

6. Ensure that the described objects are suitable for measuring distances between them and exclude elements like walls or floors.

7. Make sure that your output can be parsed by python's json.loads() directly.

Following is an example: {"object1": {"description": "rectangular silver tray"}, "object2": {"description": "bottle of wine on table"}, "object3": {"description": "round decorative doily"}}"""

SELECT_PROMPT = """Please analyze an image that contains {count} bounding boxes. Each bounding box corresponds to one color. Your task is to identify the bounding box that best corresponds to the provided description of an object within the image and return the color of your selected bounding box.

In the image, there are {count} bounding boxes.
The colors of these boxes include: {colors}.

Following is the requirement:

1. You must select the most appropriate bounding box and object based on orientation words within the description, such as "left", "center/middle" or "right". For instance, if an image contains three side-by-side computers, and the description states "center computer", you should output the color corresponding to the computer in the center.

2. It is possible that there are three similar objects (left, center and right respectively) in the image while only two of thems are enclosed by bounding boxes. In this situation, you still need to select the the suitable bounding box based on the relative position of these three objects.

3. Please provide an output in JSON format with the keys "reason" and "color". In the "reason" value, explain the rationale behind your selection, and in the "color" value, return the color of your chosen bounding box.

4. If there is no orientation word, you should select the bounding box that best corresponds to the given description. If none of the bounding box meets the description, you should select one randomly.

5. You can only select one box and the "color" value can only be one of the element from this color list: {colors}

6. The order of the color list is meaningless. You should select the bounding box and its corresponding color according to the description.

7. Make sure that your output can be parsed by python's json.loads() directly.

Following is the provided description: "{description}\""""

GRAPH_PROMPT = """Please determine the hierarchical relationships between the objects ({object list}) marked as point in the image. Use only these four hierarchical relationships: support, contain, attach, and hang.

For example, use "support" for objects on a table or chair, "contain" for objects inside a bookshelf or bottle, and "hang" for objects on the wall like doors, curtains, or paintings. Objects on the ceiling, such as lights, should use "attach". If there's a drawer in a table or objects inside the drawer, the relationship should be "contain". For objects on the floor, like tables on a carpet, the relationship is "floor supports rug supports table".

Present the relationships in a JSON tree format, with the ceiling, wall, floor as the root nodes. Here's an example JSON structure:
{
    "ceiling": {
        "attach": [
            {
                "object": {}
            }
        ]
    },
    "wall": {},
    "floor": {
        "support": [
            {
                "object": {
                    "support": [
                        {
                            "object": {
                                "support": [
                                    {
                                        "object": {}
                                    }
                                ]
                            }
                        },
                        {
                            "object": {}
                        }
                    ]
                }
            },
            {
                "object": {}
            }
        ]
    }
}"""


def describe_prompt() -> str:
    return OBJECT_PROMPT


def subobject_prompt(container: str) -> str:
    return SUBOBJECT_PROMPT.replace("{container}", container)


def select_prompt(count: int, colors, description: str) -> str:
    color_list = ", ".join(colors)
    return (
        SELECT_PROMPT.replace("{count}", str(count))
        .replace("{colors}", color_list)
        .replace("{description}", description)
    )


def graph_prompt(object_list) -> str:
    return GRAPH_PROMPT.replace("{object list}", ", ".join(object_list))
