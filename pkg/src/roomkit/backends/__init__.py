"""Wire protocol to model backends, a retrying client, and a scripted mock.

Model inference (description, detection, segmentation, depth, scoring,
selection) happens behind a JSON-over-HTTP boundary so the core toolkit
needs no ML runtime. Images travel by content-addressed reference
(``sha256:<hex>``) via a blob endpoint instead of inline base64.
"""

from .protocol import (
    ENDPOINTS,
    SELECT_COLOR_PALETTE,
    DescribeItem,
    BackendError,
    TransportError,
    SchemaViolationError,
    BackendRefusalError,
    UnparseableError,
    parse_model_object_json,
    validate_request,
    validate_response,
    blob_ref,
    describe_prompt,
    subobject_prompt,
    select_prompt,
    graph_prompt,
)
from .client import BackendClient, RetryPolicy
from .mock import MockRule, MockScript, MockServerHandle, UnmatchedRequestError, serve_mock

__all__ = [
    "ENDPOINTS",
    "SELECT_COLOR_PALETTE",
    "DescribeItem",
    "BackendError",
    "TransportError",
    "SchemaViolationError",
    "BackendRefusalError",
    "UnparseableError",
    "UnmatchedRequestError",
    "parse_model_object_json",
    "validate_request",
    "validate_response",
    "blob_ref",
    "describe_prompt",
    "subobject_prompt",
    "select_prompt",
    "graph_prompt",
    "BackendClient",
    "RetryPolicy",
    "MockRule",
    "MockScript",
    "MockServerHandle",
    "serve_mock",
]
