"""Depth-to-distance geometry.

Back-projects metric depth maps through pinhole intrinsics into camera-frame
point clouds (+z forward), derives per-object centroids from pixel masks,
and measures inter-object centroid distances. Also the bounding-box
arithmetic used by the perception loop (center scaling, crop-to-global
mapping, IoU).

Depth maps load from 16-bit PGM or raw float32 with a JSON sidecar
``{width, height, scale}``; masks travel as COCO-style RLE strings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "GeometryError",
    "DimensionMismatchError",
    "TooFewPointsError",
    "TooFewObjectsError",
    "Intrinsics",
    "DepthMap",
    "Mask",
    "BBox",
    "PointCloud",
    "DistanceMatrix",
    "backproject",
    "object_centroid",
    "pair_distance",
    "distance_matrix",
    "scale_bbox",
    "to_global",
    "clamp_bbox",
    "bbox_iou",
    "bbox_area",
]


class GeometryError(Exception):
    pass


class DimensionMismatchError(GeometryError):
    pass


class TooFewPointsError(GeometryError):
    def __init__(self, count: int, needed: int):
        super().__init__(f"mask selects {count} valid points, need {needed}")
        self.count = count
        self.needed = needed


class TooFewObjectsError(GeometryError):
    pass


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GeometryError("principal point outside image")

    @classmethod
    def from_fov(cls, width: int, height: int, hfov_deg: float = 60.0) -> "Intrinsics":
        """Square-pixel intrinsics from a horizontal field of view.

        The default 60 degrees with a centered principal point is the
        fallback when no calibration is available.
        """
        fx = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
        return cls(fx=fx, fy=fx, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel depth in meters, row-major; 0 marks invalid pixels."""

    values: np.ndarray  # (height, width) float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise GeometryError("depth map must be 2-D")
        if not np.isfinite(values).all() or (values < 0).any():
            raise GeometryError("depth values must be finite and non-negative")
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_pgm(cls, path, scale: float = 0.001) -> "DepthMap":
        """Load a 16-bit (or 8-bit) single-channel PGM; meters = value * scale."""
        raw = Path(path).read_bytes()
        fields: list[bytes] = []
        pos = 0
        while len(fields) < 4:
            while pos < len(raw) and raw[pos : pos + 1].isspace():
                pos += 1
            if raw[pos : pos + 1] == b"#":
                while pos < len(raw) and raw[pos] != 0x0A:
                    pos += 1
                continue
            start = pos
            while pos < len(raw) and not raw[pos : pos + 1].isspace():
                pos += 1
            fields.append(raw[start:pos])
        magic, width, height, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
        if magic == b"P5":
            pos += 1  # single whitespace after maxval
            dtype = ">u2" if maxval > 255 else "u1"
            data = np.frombuffer(raw, dtype=dtype, count=width * height, offset=pos)
        elif magic == b"P2":
            data = np.array(raw[pos:].split()[: width * height], dtype=np.uint32)
        else:
            raise GeometryError(f"not a PGM file: magic {magic!r}")
        values = data.reshape(height, width).astype(np.float64) * scale
        return cls(values)

    @classmethod
    def from_raw(cls, path, sidecar=None) -> "DepthMap":
        """Load raw little-endian float32 with a {width, height, scale} sidecar."""
        path = Path(path)
        sidecar = Path(sidecar) if sidecar else path.with_suffix(path.suffix + ".json")
        meta = json.loads(sidecar.read_text())
        data = np.fromfile(path, dtype="<f4")
        expected = meta["width"] * meta["height"]
        if data.size != expected:
            raise DimensionMismatchError(
                f"raw file holds {data.size} values, sidecar says {expected}"
            )
        values = data.reshape(meta["height"], meta["width"]).astype(np.float64)
        return cls(values * float(meta.get("scale", 1.0)))


@dataclass(frozen=True)
class Mask:
    """Boolean pixel selection with a COCO-style RLE codec."""

    values: np.ndarray  # (height, width) bool

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=bool))
        if self.values.ndim != 2:
            raise GeometryError("mask must be 2-D")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_pixels(cls, width: int, height: int, pixels) -> "Mask":
        """Build from (u, v) pixel coordinates."""
        values = np.zeros((height, width), dtype=bool)
        for u, v in pixels:
            values[v, u] = True
        return cls(values)

    @classmethod
    def from_rle(cls, rle: dict) -> "Mask":
        """Decode {"size": [h, w], "counts": str | [int]} in column-major order."""
        h, w = rle["size"]
        counts = rle["counts"]
        if isinstance(counts, str):
            counts = _rle_string_to_counts(counts)
        flat = np.zeros(h * w, dtype=bool)
        pos = 0
        value = False
        for run in counts:
            if value:
                flat[pos : pos + run] = True
            pos += run
            value = not value
        if pos != h * w:
            raise DimensionMismatchError(f"RLE covers {pos} pixels, mask has {h * w}")
        return cls(flat.reshape((h, w), order="F"))

    def to_rle(self, compress: bool = True) -> dict:
        flat = self.values.flatten(order="F")
        counts: list[int] = []
        value = False
        run = 0
        for bit in flat:
            if bit == value:
                run += 1
            else:
                counts.append(run)
                value = not value
                run = 1
        counts.append(run)
        return {
            "size": [self.height, self.width],
            "counts": _counts_to_rle_string(counts) if compress else counts,
        }

    def eroded(self) -> "Mask":
        """One-pixel 4-neighborhood erosion (suppresses boundary depth bleed)."""
        m = self.values
        out = m.copy()
        out[1:, :] &= m[:-1, :]
        out[:-1, :] &= m[1:, :]
        out[:, 1:] &= m[:, :-1]
        out[:, :-1] &= m[:, 1:]
        out[0, :] = False
        out[-1, :] = False
        out[:, 0] = False
        out[:, -1] = False
        return Mask(out)


def _counts_to_rle_string(counts) -> str:
    # 6 bits per char over ASCII 48..111, with runs delta-coded against
    # the run two places back (same layout COCO tools use).
    chars = []
    for i, count in enumerate(counts):
        x = int(count)
        if i > 2:
            x -= int(counts[i - 2])
        more = True
        while more:
            c = x & 0x1F
            x >>= 5
            more = (x != -1) if (c & 0x10) else (x != 0)
            if more:
                c |= 0x20
            chars.append(chr(c + 48))
    return "".join(chars)


def _rle_string_to_counts(s: str) -> list[int]:
    counts: list[int] = []
    pos = 0
    while pos < len(s):
        x = 0
        k = 0
        more = True
        while more:
            c = ord(s[pos]) - 48
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            pos += 1
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(counts) > 2:
            x += counts[-2]
        counts.append(x)
    return counts


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, x0 < x1 and y0 < y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise GeometryError(f"degenerate box {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)


@dataclass(frozen=True)
class PointCloud:
    """Camera-frame points (+z forward) that remember their source pixels."""

    points: np.ndarray  # (n, 3) float
    pixel_indices: np.ndarray | None = None  # flat row-major indices, (n,)
    width: int = 0
    height: int = 0

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.isfinite(points).all():
            raise GeometryError("point coordinates must be finite")
        object.__setattr__(self, "points", points)
        if self.pixel_indices is not None:
            object.__setattr__(
                self, "pixel_indices", np.asarray(self.pixel_indices, dtype=np.int64)
            )

    def __len__(self) -> int:
        return self.points.shape[0]


def backproject(depth: DepthMap, intrinsics: Intrinsics) -> PointCloud:
    """Lift valid depth pixels to 3-D: x=(u-cx)z/fx, y=(v-cy)z/fy, z=depth."""
    if (depth.width, depth.height) != (intrinsics.width, intrinsics.height):
        raise DimensionMismatchError(
            f"depth {depth.width}x{depth.height} vs intrinsics "
            f"{intrinsics.width}x{intrinsics.height}"
        )
    vs, us = np.nonzero(depth.values > 0)
    z = depth.values[vs, us]
    x = (us - intrinsics.cx) * z / intrinsics.fx
    y = (vs - intrinsics.cy) * z / intrinsics.fy
    points = np.column_stack([x, y, z])
    return PointCloud(points, vs * depth.width + us, depth.width, depth.height)


def object_centroid(
    cloud: PointCloud,
    mask: Mask,
    min_points: int = 10,
    erode: bool = True,
) -> tuple[float, float, float]:
    """Mean 3-D point over the masked pixels.

    The mask is eroded by one pixel to drop boundary depth bleed; if the
    eroded mask keeps fewer than ``min_points`` valid pixels the original
    mask is used instead. Raises TooFewPointsError when even the original
    selection is too small.
    """
    if cloud.pixel_indices is None:
        raise GeometryError("point cloud does not carry pixel indices")
    if (mask.width, mask.height) != (cloud.width, cloud.height):
        raise DimensionMismatchError(
            f"mask {mask.width}x{mask.height} vs cloud {cloud.width}x{cloud.height}"
        )

    def select(m: Mask) -> np.ndarray:
        flat = m.values.reshape(-1)
        return cloud.points[flat[cloud.pixel_indices]]

    selected = select(mask.eroded()) if erode else select(mask)
    if erode and len(selected) < min_points:
        selected = select(mask)
    if len(selected) < min_points:
        raise TooFewPointsError(len(selected), min_points)
    centroid = selected.mean(axis=0)
    return (float(centroid[0]), float(centroid[1]), float(centroid[2]))


def pair_distance(a, b) -> float:
    """Euclidean distance between two centroids."""
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)))


@dataclass(frozen=True)
class DistanceMatrix:
    labels: tuple[str, ...]
    values: np.ndarray  # (n, n) symmetric, zero diagonal

    def get(self, a: str, b: str) -> float:
        i, j = self.labels.index(a), self.labels.index(b)
        return float(self.values[i, j])

    def as_dict(self) -> dict:
        return {"labels": list(self.labels), "matrix": self.values.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "DistanceMatrix":
        return cls(tuple(doc["labels"]), np.asarray(doc["matrix"], dtype=np.float64))


def distance_matrix(objects) -> DistanceMatrix:
    """Pairwise centroid distances for (label, centroid) pairs."""
    objects = list(objects)
    if len(objects) < 2:
        raise TooFewObjectsError(f"need at least 2 objects, got {len(objects)}")
    labels = tuple(label for label, _ in objects)
    points = np.asarray([centroid for _, centroid in objects], dtype=np.float64)
    deltas = points[:, None, :] - points[None, :, :]
    values = np.sqrt((deltas**2).sum(axis=2))
    np.fill_diagonal(values, 0.0)
    return DistanceMatrix(labels, values)


# -- bounding boxes ------------------------------------------------------------


def scale_bbox(box: BBox, factor: float, bounds: tuple[int, int]) -> BBox:
    """Scale about the box center by ``factor``, then clamp to (width, height)."""
    if factor < 1:
        raise GeometryError("scale factor must be >= 1")
    cx, cy = box.center
    half_w = (box.x1 - box.x0) * factor / 2.0
    half_h = (box.y1 - box.y0) * factor / 2.0
    width, height = bounds
    return BBox(
        max(0.0, cx - half_w),
        max(0.0, cy - half_h),
        min(float(width), cx + half_w),
        min(float(height), cy + half_h),
    )


def to_global(box: BBox, crop_origin: tuple[float, float]) -> BBox:
    """Translate a crop-space box into image coordinates."""
    ox, oy = crop_origin
    return BBox(box.x0 + ox, box.y0 + oy, box.x1 + ox, box.y1 + oy)


def clamp_bbox(box: BBox, bounds: tuple[int, int]) -> BBox:
    """Clamp a box to (width, height) image bounds."""
    width, height = bounds
    return BBox(
        max(0.0, box.x0),
        max(0.0, box.y0),
        min(float(width), box.x1),
        min(float(height), box.y1),
    )


def bbox_area(box: BBox) -> float:
    return (box.x1 - box.x0) * (box.y1 - box.y0)


def bbox_iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 when disjoint, 1 for identical boxes."""
    ix0 = max(a.x0, b.x0)
    iy0 = max(a.y0, b.y0)
    ix1 = min(a.x1, b.x1)
    iy1 = min(a.y1, b.y1)
    if ix0 >= ix1 or iy0 >= iy1:
        return 0.0
    inter = (ix1 - ix0) * (iy1 - iy0)
    return inter / (bbox_area(a) + bbox_area(b) - inter)
