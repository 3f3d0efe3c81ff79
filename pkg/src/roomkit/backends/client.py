"""Retrying HTTP client for the backend protocol.

All protocol requests are read-only by contract, so retries are safe.
Transport failures and 5xx responses are retried with exponential backoff
up to a per-call deadline; 4xx responses fail immediately. Accepted
responses are schema-validated before being returned.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass

import httpx

from . import protocol
from .protocol import (
    BackendRefusalError,
    SchemaViolationError,
    TransportError,
    validate_request,
    validate_response,
)


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff_base: float = 0.25
    deadline: float = 30.0


class BackendClient:
    """Thread-shareable client with a bounded in-flight request limit."""

    def __init__(
        self,
        base_url: str,
        policy: RetryPolicy | None = None,
        token: str | None = None,
        max_inflight: int = 4,
    ):
        self.policy = policy or RetryPolicy()
        headers = {}
        if token:
            headers["authorization"] = f"Bearer {token}"
        self._http = httpx.Client(base_url=base_url, headers=headers)
        self._inflight = threading.BoundedSemaphore(max_inflight)

    def close(self):
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- transport -------------------------------------------------------

    def _post(self, path: str, deadline_at: float, **kwargs) -> httpx.Response:
        remaining = deadline_at - time.monotonic()
        if remaining <= 0:
            raise TransportError(f"deadline exhausted before {path}")
        headers = {"x-request-id": uuid.uuid4().hex}
        headers.update(kwargs.pop("headers", {}))
        with self._inflight:
            return self._http.post(path, timeout=remaining, headers=headers, **kwargs)

    def _post_with_retries(self, path: str, **kwargs) -> httpx.Response:
        policy = self.policy
        deadline_at = time.monotonic() + policy.deadline
        last_error: Exception | None = None
        for attempt in range(policy.attempts):
            if attempt:
                delay = policy.backoff_base * (2 ** (attempt - 1))
                delay = min(delay, max(0.0, deadline_at - time.monotonic()))
                if delay > 0:
                    time.sleep(delay)
            try:
                response = self._post(path, deadline_at, **kwargs)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = TransportError(
                    f"{path} returned {response.status_code}: {response.text[:200]}"
                )
                continue
            if response.status_code >= 400:
                raise TransportError(
                    f"{path} returned {response.status_code}: {response.text[:200]}"
                )
            return response
        raise TransportError(
            f"{path} failed after {policy.attempts} attempts: {last_error}"
        )

    def call(self, endpoint: str, payload: dict) -> dict:
        """POST one protocol request and return its schema-valid response."""
        validate_request(endpoint, payload)
        response = self._post_with_retries(f"/v1/{endpoint}", json=payload)
        try:
            body = response.json()
        except ValueError as exc:
            raise SchemaViolationError(f"{endpoint} response is not JSON: {exc}") from exc
        validate_response(endpoint, body)  # raises BackendRefusalError on refusal
        return body

    # -- blobs -----------------------------------------------------------

    def upload_blob(self, data: bytes) -> str:
        response = self._post_with_retries(
            "/v1/blobs", content=data, headers={"content-type": "application/octet-stream"}
        )
        body = response.json()
        ref = body.get("ref")
        expected = protocol.blob_ref(data)
        if ref != expected:
            raise SchemaViolationError(f"blob ref mismatch: {ref!r} != {expected!r}")
        return ref

    def get_blob(self, ref: str) -> bytes:
        try:
            response = self._http.get(f"/v1/blobs/{ref}", timeout=self.policy.deadline)
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if response.status_code != 200:
            raise TransportError(f"blob {ref} returned {response.status_code}")
        return response.content

    # -- typed endpoint helpers -------------------------------------------

    def describe(self, image: str) -> list[protocol.DescribeItem]:
        body = self.call("describe", {"image": image})
        return [
            protocol.DescribeItem(obj["description"], obj["container"])
            for obj in body["objects"]
        ]

    def subobjects(self, image: str, container: str, region=None) -> list[protocol.DescribeItem]:
        payload = {"image": image, "container": container}
        if region is not None:
            payload["region"] = list(region)
        body = self.call("subobjects", payload)
        return [
            protocol.DescribeItem(obj["description"], obj.get("container", False))
            for obj in body["objects"]
        ]

    def detect(self, image: str, labels, region=None) -> dict[str, list[tuple[tuple, float]]]:
        payload = {"image": image, "labels": list(labels)}
        if region is not None:
            payload["region"] = list(region)
        body = self.call("detect", payload)
        return {
            label: [(tuple(c["bbox"]), c["score"]) for c in candidates]
            for label, candidates in body["detections"].items()
        }

    def select(self, image: str, description: str, colors, boxes, region=None) -> str:
        payload = {
            "image": image,
            "description": description,
            "count": len(list(colors)),
            "colors": list(colors),
            "boxes": [list(b) for b in boxes],
        }
        if region is not None:
            payload["region"] = list(region)
        return self.call("select", payload)["color"]

    def segment(self, image: str, bbox) -> dict:
        return self.call("segment", {"image": image, "bbox": list(bbox)})["mask"]

    def depth(self, image: str) -> dict:
        return self.call("depth", {"image": image})

    def clipscore(self, image: str, prompts) -> dict[str, float]:
        prompts = list(prompts)
        body = self.call("clipscore", {"image": image, "prompts": prompts})
        scores = body["scores"]
        if len(scores) != len(prompts):
            raise SchemaViolationError(
                f"clipscore returned {len(scores)} scores for {len(prompts)} prompts"
            )
        return dict(zip(prompts, scores))

    def cot(self, prompt: str) -> str:
        return self.call("cot", {"prompt": prompt})["text"]


__all__ = ["BackendClient", "RetryPolicy", "BackendRefusalError"]
