"""Annotation and review service for the semi-automated labeling loop.

A model proposes a scene graph, humans correct and approve it through an
HTTP API, and approved scenes export as training records. Persistence is
an append-only per-scene event log with content-addressed image blobs;
crash recovery replays the log.
"""

from .store import (
    Correction,
    DuplicateImageError,
    InvalidEditError,
    NotReviewedError,
    Revision,
    SceneRecord,
    SceneStore,
    ServiceError,
    StaleBaseError,
    UnknownSceneError,
    apply_ops,
)
from .app import create_app

__all__ = [
    "SceneStore",
    "SceneRecord",
    "Revision",
    "Correction",
    "ServiceError",
    "DuplicateImageError",
    "StaleBaseError",
    "InvalidEditError",
    "UnknownSceneError",
    "NotReviewedError",
    "apply_ops",
    "create_app",
]
