"""Pinhole camera transforms and ground-plane back-projection.

Coordinate conventions used throughout the package:

  Pixel frame:   origin at the image top-left corner, x rightward,
                 y downward, units pixels. Sub-pixel values are allowed
                 and never rounded here.
  Image frame:   metric sensor plane, origin at the principal point
                 (image center), axes parallel to the pixel axes.
  Camera frame:  right-handed, X right, Y down (same direction as pixel y),
                 Z forward along the optical axis. z is the depth.

The camera is assumed to have zero roll and zero in-plane yaw; its
attitude is a single pitch angle measured from the horizontal, so
pitch = pi/2 means the optical axis points straight down (nadir).
Under those conventions the ground plane, at `agl` meters below the
camera, satisfies

    -cos(pitch) * y - sin(pitch) * z + agl = 0

in camera coordinates, and a pixel ray (x_i*t, y_i*t, f*t) strikes it at

    t = agl / (y_i * cos(pitch) + f * sin(pitch)).

All functions are pure and operate on immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

from .errors import NonPositiveDepth, RayMissesGround

# Rays whose plane-equation denominator falls at or below this bound (meters)
# are treated as horizon rays rather than returning near-infinite points.
HORIZON_EPS = 1e-9


class PixelPoint(NamedTuple):
    x: float
    y: float


class ImagePoint(NamedTuple):
    x: float
    y: float


class CameraPoint(NamedTuple):
    x: float
    y: float
    z: float


class SpatialMeasures(NamedTuple):
    depth: float
    distance: float


# Any (x, y) / (x, y, z) sequence is accepted where a point is expected.
Point2Like = Union[PixelPoint, ImagePoint, Sequence[float]]
Point3Like = Union[CameraPoint, Sequence[float]]


def _xy(pt: Point2Like) -> tuple[float, float]:
    x, y = pt
    return float(x), float(y)


def _xyz(pt: Point3Like) -> tuple[float, float, float]:
    x, y, z = pt
    return float(x), float(y), float(z)


@dataclass(frozen=True)
class CameraModel:
    """Intrinsics and single-pitch extrinsics of a downward-looking camera.

    focal_length and pixel_size are in meters; pitch is in radians,
    measured from the horizontal (pi/2 = nadir); agl is the camera height
    above the ground plane in meters.
    """

    focal_length: float
    pixel_size: float
    image_width: int
    image_height: int
    pitch: float
    agl: float

    def __post_init__(self) -> None:
        if not self.focal_length > 0:
            raise ValueError(f"focal_length must be > 0, got {self.focal_length}")
        if not self.pixel_size > 0:
            raise ValueError(f"pixel_size must be > 0, got {self.pixel_size}")
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError(
                f"image size must be >= 1x1, got {self.image_width}x{self.image_height}"
            )
        if not 0 < self.pitch <= math.pi / 2:
            raise ValueError(f"pitch must be in (0, pi/2], got {self.pitch}")
        if not self.agl > 0:
            raise ValueError(f"agl must be > 0, got {self.agl}")

    @property
    def principal_point(self) -> PixelPoint:
        return PixelPoint(self.image_width / 2.0, self.image_height / 2.0)


def pixel_to_image(pt: Point2Like, cam: CameraModel) -> ImagePoint:
    """Map a pixel to metric image-plane coordinates about the principal point."""
    x, y = _xy(pt)
    return ImagePoint(
        (x - cam.image_width / 2.0) * cam.pixel_size,
        (y - cam.image_height / 2.0) * cam.pixel_size,
    )


def image_to_pixel(pt: Point2Like, cam: CameraModel) -> PixelPoint:
    """Exact inverse of :func:`pixel_to_image`."""
    x, y = _xy(pt)
    return PixelPoint(
        x / cam.pixel_size + cam.image_width / 2.0,
        y / cam.pixel_size + cam.image_height / 2.0,
    )


def project_to_pixel(pt: Point3Like, cam: CameraModel) -> PixelPoint:
    """Perspective-project a camera-frame point onto the pixel grid.

    Raises NonPositiveDepth for points at or behind the camera plane.
    """
    x, y, z = _xyz(pt)
    if not z > 0:
        raise NonPositiveDepth(f"point has depth z={z}, must be > 0")
    image = ImagePoint(
        cam.focal_length * x / z,
        cam.focal_length * y / z,
    )
    return image_to_pixel(image, cam)


def ground_denominator(pt: Point2Like, cam: CameraModel) -> float:
    """Denominator of the ray/ground-plane intersection for this pixel.

    Positive and bounded away from zero for rays that strike the ground in
    front of the camera; approaches zero at the horizon.
    """
    image = pixel_to_image(pt, cam)
    return image.y * math.cos(cam.pitch) + cam.focal_length * math.sin(cam.pitch)


def backproject_to_ground(
    pt: Point2Like, cam: CameraModel, eps: float = HORIZON_EPS
) -> CameraPoint:
    """Intersect the pixel's viewing ray with the ground plane.

    Returns the camera-frame ground point (x_i*t, y_i*t, f*t) with
    t = agl / (y_i*cos(pitch) + f*sin(pitch)). Raises RayMissesGround when
    the denominator is <= eps, i.e. the pixel sits at or above the horizon.
    """
    px, py = _xy(pt)
    image = pixel_to_image((px, py), cam)
    denom = image.y * math.cos(cam.pitch) + cam.focal_length * math.sin(cam.pitch)
    if denom <= eps:
        raise RayMissesGround(
            f"pixel ({px}, {py}) is at or above the horizon (denominator {denom:.3e})"
        )
    t = cam.agl / denom
    return CameraPoint(image.x * t, image.y * t, cam.focal_length * t)


def ground_plane_residual(pt: Point3Like, cam: CameraModel) -> float:
    """Signed value of the ground-plane equation at a camera-frame point.

    Zero on the plane, positive on the camera side.
    """
    x, y, z = _xyz(pt)
    return -math.cos(cam.pitch) * y - math.sin(cam.pitch) * z + cam.agl


def spatial_measures(pt: Point3Like) -> SpatialMeasures:
    """Depth (z) and straight-line distance from the camera origin."""
    x, y, z = _xyz(pt)
    return SpatialMeasures(depth=z, distance=math.sqrt(x * x + y * y + z * z))
