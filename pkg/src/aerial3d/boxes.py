"""2D boxes, ground-plane 3D cuboids, BEV IoU, and location wire formats.

Ground frame
------------
A camera with pitch from the horizontal sees the ground plane
-cos(pitch)*y - sin(pitch)*z + agl = 0. On that plane we use the
orthonormal basis

    e_lat = (1, 0, 0)                 lateral, parallel to the image x-axis
    n     = (0, -cos p, -sin p)       plane normal, pointing toward the camera
    e_lon = n x e_lat                 longitudinal, away from the camera foot

A cuboid's yaw is the rotation of its length axis within the ground plane,
measured from e_lat, and is reported modulo pi (vehicles carry no heading
annotation, so direction is ambiguous).

Wire formats
------------
    Box3D  ->  <Xc,Yc,Zc,L,W,H,yaw_deg>      meters/degrees, 2 decimals
    OBB    ->  [cx,cy,w,h,angle_deg]         integer pixels, angle 2 decimals
    HBB    ->  [x1,y1,x2,y2]                 integer pixels

Bracket style plus field count disambiguates the three formats on parse.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from .camera import (
    CameraModel,
    CameraPoint,
    PixelPoint,
    backproject_to_ground,
    project_to_pixel,
)
from .errors import DegenerateYaw, ParseError

# Yaw probes closer together than this (meters) cannot define a direction.
_YAW_BASELINE_EPS = 1e-12


def wrap_angle_half_pi(angle: float) -> float:
    """Wrap an angle into [-pi/2, pi/2) (direction modulo pi)."""
    return (angle + math.pi / 2.0) % math.pi - math.pi / 2.0


@dataclass(frozen=True)
class OrientedBox2D:
    """Rotated pixel-space rectangle; angle is the long-axis direction.

    Convention: width >= height, angle in [-pi/2, pi/2) measured from the
    pixel x-axis. Use :meth:`normalized` to coerce arbitrary (w, h, angle)
    triples into this convention.
    """

    cx: float
    cy: float
    width: float
    height: float
    angle: float

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"box sides must be positive, got {self.width}x{self.height}")
        if self.width < self.height:
            raise ValueError(
                f"width ({self.width}) must be >= height ({self.height}); "
                "use OrientedBox2D.normalized to swap axes"
            )
        if not -math.pi / 2 <= self.angle < math.pi / 2:
            raise ValueError(f"angle must be in [-pi/2, pi/2), got {self.angle}")

    @classmethod
    def normalized(
        cls, cx: float, cy: float, width: float, height: float, angle: float
    ) -> "OrientedBox2D":
        """Build an OBB, swapping axes / wrapping the angle into convention."""
        if width < height:
            width, height = height, width
            angle += math.pi / 2.0
        return cls(cx, cy, width, height, wrap_angle_half_pi(angle))

    def corners(self) -> np.ndarray:
        """4x2 pixel corners in counter-clockwise order (y-down frame)."""
        ca, sa = math.cos(self.angle), math.sin(self.angle)
        long_axis = np.array([ca, sa])
        short_axis = np.array([-sa, ca])
        center = np.array([self.cx, self.cy])
        hw, hh = self.width / 2.0, self.height / 2.0
        return np.array(
            [
                center + hw * long_axis + hh * short_axis,
                center - hw * long_axis + hh * short_axis,
                center - hw * long_axis - hh * short_axis,
                center + hw * long_axis - hh * short_axis,
            ]
        )


@dataclass(frozen=True)
class HorizontalBox2D:
    """Axis-aligned pixel rectangle with x1 < x2 and y1 < y2."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(
                f"degenerate box [{self.x1},{self.y1},{self.x2},{self.y2}]: "
                "need x1 < x2 and y1 < y2"
            )

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


class BoxDims(NamedTuple):
    """Cuboid dimensions in meters."""

    length: float
    width: float
    height: float


def dims_from_mm(length_mm: float, width_mm: float, height_mm: float) -> BoxDims:
    """Convert millimeter dimensions (table/annotation units) to meters."""
    return BoxDims(length_mm / 1000.0, width_mm / 1000.0, height_mm / 1000.0)


@dataclass(frozen=True)
class Box3D:
    """Ground-resting cuboid in camera coordinates.

    `center` is the geometric center of the cuboid (half the height above
    the ground plane along the plane normal); yaw rotates the length axis
    from e_lat within the plane.
    """

    center: CameraPoint
    length: float
    width: float
    height: float
    yaw: float

    def __post_init__(self) -> None:
        if not (self.length >= self.width > 0):
            raise ValueError(
                f"need length >= width > 0, got length={self.length} width={self.width}"
            )
        if not self.height > 0:
            raise ValueError(f"height must be positive, got {self.height}")


class GroundBasis(NamedTuple):
    e_lat: CameraPoint
    e_lon: CameraPoint
    normal: CameraPoint


def ground_basis(cam: CameraModel) -> GroundBasis:
    """Orthonormal (lateral, longitudinal, normal) frame of the ground plane."""
    c, s = math.cos(cam.pitch), math.sin(cam.pitch)
    normal = np.array([0.0, -c, -s])
    normal /= np.linalg.norm(normal)
    # Toward-camera normals point into the z<0 hemisphere for any pitch in
    # (0, pi/2]; flip defensively if a sign convention ever changes upstream.
    if normal[2] > 0:
        normal = -normal
    e_lat = np.array([1.0, 0.0, 0.0])
    e_lon = np.cross(normal, e_lat)
    e_lon /= np.linalg.norm(e_lon)
    return GroundBasis(
        CameraPoint(*e_lat), CameraPoint(*e_lon), CameraPoint(*normal)
    )


def _basis_arrays(cam: CameraModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    basis = ground_basis(cam)
    return np.array(basis.e_lat), np.array(basis.e_lon), np.array(basis.normal)


def ground_uv(pt: CameraPoint, cam: CameraModel) -> tuple[float, float]:
    """In-plane (lateral, longitudinal) coordinates of a camera-frame point."""
    e_lat, e_lon, _ = _basis_arrays(cam)
    p = np.array(pt)
    return float(p @ e_lat), float(p @ e_lon)


def derive_box3d(
    obb: OrientedBox2D,
    dims: BoxDims,
    cam: CameraModel,
    inflation: float = 1.0,
) -> Box3D:
    """Lift an annotated 2D OBB plus known metric dimensions to a 3D cuboid.

    The OBB center back-projects to the cuboid's ground-contact center. Yaw
    comes from back-projecting two probe points offset +-height/4 pixels
    along the OBB long axis: the plane-to-image map sends lines to lines, so
    the probes' ground displacement lies exactly along the vehicle's length
    axis. Dimensions are scaled by `inflation` (annotation boxes are often
    drawn slightly larger than the vehicle), and the center is lifted half
    the inflated height along the plane normal.
    """
    if inflation <= 0:
        raise ValueError(f"inflation must be positive, got {inflation}")
    e_lat, e_lon, normal = _basis_arrays(cam)

    center_ground = np.array(backproject_to_ground(PixelPoint(obb.cx, obb.cy), cam))

    delta = obb.height / 4.0
    ca, sa = math.cos(obb.angle), math.sin(obb.angle)
    probe_fwd = backproject_to_ground(
        PixelPoint(obb.cx + delta * ca, obb.cy + delta * sa), cam
    )
    probe_back = backproject_to_ground(
        PixelPoint(obb.cx - delta * ca, obb.cy - delta * sa), cam
    )
    displacement = np.array(probe_fwd) - np.array(probe_back)
    u, v = float(displacement @ e_lat), float(displacement @ e_lon)
    if math.hypot(u, v) < _YAW_BASELINE_EPS:
        raise DegenerateYaw(
            f"yaw probes around ({obb.cx}, {obb.cy}) back-project to coincident points"
        )
    yaw = wrap_angle_half_pi(math.atan2(v, u))

    length = dims.length * inflation
    width = dims.width * inflation
    height = dims.height * inflation
    center = center_ground + (height / 2.0) * normal
    return Box3D(CameraPoint(*center), length, width, height, yaw)


def box3d_corners(box: Box3D, cam: CameraModel) -> tuple[CameraPoint, ...]:
    """The cuboid's 8 corners: bottom face first, then the top face above it.

    Within each face the order is (+L,+W), (-L,+W), (-L,-W), (+L,-W) in the
    yaw-aligned in-plane frame; corner i+4 sits directly above corner i.
    """
    e_lat, e_lon, normal = _basis_arrays(cam)
    d_yaw = math.cos(box.yaw) * e_lat + math.sin(box.yaw) * e_lon
    d_perp = -math.sin(box.yaw) * e_lat + math.cos(box.yaw) * e_lon
    center = np.array(box.center)
    hl, hw, hh = box.length / 2.0, box.width / 2.0, box.height / 2.0

    corners = []
    for sign_h in (-1.0, 1.0):  # bottom face (away from camera) first
        for sign_l, sign_w in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
            corners.append(
                CameraPoint(
                    *(center + sign_l * hl * d_yaw + sign_w * hw * d_perp + sign_h * hh * normal)
                )
            )
    return tuple(corners)


class ProjectedBox3D(NamedTuple):
    corners_px: tuple[PixelPoint, ...]
    hbb: HorizontalBox2D


def project_box3d(box: Box3D, cam: CameraModel) -> ProjectedBox3D:
    """Project all 8 corners to pixels; the HBB is their axis-aligned hull.

    Raises NonPositiveDepth if any corner lies at or behind the camera.
    """
    corners_px = tuple(project_to_pixel(c, cam) for c in box3d_corners(box, cam))
    xs = [p.x for p in corners_px]
    ys = [p.y for p in corners_px]
    return ProjectedBox3D(corners_px, HorizontalBox2D(min(xs), min(ys), max(xs), max(ys)))


# --------------------------------------------------------------------------
# BEV footprints and polygon IoU
# --------------------------------------------------------------------------


def bev_footprint(box: Box3D, cam: CameraModel) -> np.ndarray:
    """4x2 counter-clockwise footprint rectangle in ground (u, v) coordinates."""
    e_lat, e_lon, _ = _basis_arrays(cam)
    center = np.array(box.center)
    cu, cv = float(center @ e_lat), float(center @ e_lon)
    ca, sa = math.cos(box.yaw), math.sin(box.yaw)
    rot = np.array([[ca, -sa], [sa, ca]])
    hl, hw = box.length / 2.0, box.width / 2.0
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    return ensure_ccw(local @ rot.T + np.array([cu, cv]))


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area; positive for counter-clockwise vertex order."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def ensure_ccw(poly: np.ndarray) -> np.ndarray:
    """Return the polygon with counter-clockwise orientation."""
    return poly if polygon_area(poly) >= 0 else poly[::-1]


def clip_convex(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex subject by a CCW convex clipper."""
    output = list(subject)
    for i in range(len(clipper)):
        if not output:
            break
        a, b = clipper[i], clipper[(i + 1) % len(clipper)]
        edge = b - a
        points, output = output, []
        for j in range(len(points)):
            p, q = points[j], points[(j + 1) % len(points)]
            # Interior of a CCW clipper lies left of each edge: cross >= 0.
            p_in = edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0]) >= 0
            q_in = edge[0] * (q[1] - a[1]) - edge[1] * (q[0] - a[0]) >= 0
            if p_in:
                output.append(p)
            if p_in != q_in:
                # Crossing point of segment pq with the infinite edge line.
                # A segment collinear with the edge can still land here when
                # rounding puts its endpoints a few ulps on opposite sides;
                # its denominator is ~0 and the "crossing" is anywhere along
                # the shared line, so skip it (the endpoints are within
                # ~1e-12*|pq| of the line and already handled above).
                d = q - p
                denom = edge[0] * d[1] - edge[1] * d[0]
                if abs(denom) > 1e-12 * math.hypot(*edge) * math.hypot(*d):
                    t = (edge[0] * (a[1] - p[1]) - edge[1] * (a[0] - p[0])) / denom
                    output.append(p + t * d)
    return np.array(output) if output else np.empty((0, 2))


def bev_iou(a: Box3D, b: Box3D, cam: CameraModel) -> float:
    """Bird's-eye-view IoU of two cuboid footprints on the ground plane."""
    poly_a = bev_footprint(a, cam)
    poly_b = bev_footprint(b, cam)
    inter_poly = clip_convex(poly_a, poly_b)
    inter = abs(polygon_area(inter_poly))
    union = abs(polygon_area(poly_a)) + abs(polygon_area(poly_b)) - inter
    if union <= 0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def hbb_iou(a: HorizontalBox2D, b: HorizontalBox2D) -> float:
    """Axis-aligned intersection-over-union in [0, 1]."""
    ix = max(0.0, min(a.x2, b.x2) - max(a.x1, b.x1))
    iy = max(0.0, min(a.y2, b.y2) - max(a.y1, b.y1))
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def obb_to_hbb(obb: OrientedBox2D) -> HorizontalBox2D:
    """Axis-aligned hull of the OBB's corners."""
    corners = obb.corners()
    return HorizontalBox2D(
        float(corners[:, 0].min()),
        float(corners[:, 1].min()),
        float(corners[:, 0].max()),
        float(corners[:, 1].max()),
    )


def fit_min_area_obb(points: Sequence[Sequence[float]]) -> OrientedBox2D:
    """Minimal-area rotated rectangle enclosing a 2D point set.

    Rotating-calipers over the convex hull: the optimal rectangle has one
    side collinear with a hull edge, so trying every hull-edge direction is
    exact. Raises ValueError on degenerate (collinear) input.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least 3 points of shape (n, 2)")
    hull = _convex_hull(pts)
    if len(hull) < 3:
        raise ValueError("points are collinear; no area-minimal rectangle exists")

    best = None
    for i in range(len(hull)):
        edge = hull[(i + 1) % len(hull)] - hull[i]
        angle = math.atan2(edge[1], edge[0])
        ca, sa = math.cos(-angle), math.sin(-angle)
        rot = np.array([[ca, -sa], [sa, ca]])
        local = hull @ rot.T
        lo, hi = local.min(axis=0), local.max(axis=0)
        w, h = float(hi[0] - lo[0]), float(hi[1] - lo[1])
        area = w * h
        if best is None or area < best[0] - 1e-12:
            center_local = (lo + hi) / 2.0
            center = rot.T @ center_local
            best = (area, float(center[0]), float(center[1]), w, h, angle)

    _, cx, cy, w, h, angle = best
    return OrientedBox2D.normalized(cx, cy, w, h, angle)


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices in CCW order."""
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    # Drop exact duplicates to keep the cross-product tests meaningful.
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(np.diff(pts, axis=0) != 0, axis=1)
    pts = pts[keep]
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


# --------------------------------------------------------------------------
# Wire formats
# --------------------------------------------------------------------------

Location = Union[HorizontalBox2D, OrientedBox2D, Box3D]

_ANGLE_BRACKETS = re.compile(r"<([^<>]*)>")
_SQUARE_BRACKETS = re.compile(r"\[([^\[\]]*)\]")


def serialize_location(loc: Location) -> str:
    """Render a location in its text wire format (see module docstring)."""
    if isinstance(loc, Box3D):
        fields = (
            loc.center.x,
            loc.center.y,
            loc.center.z,
            loc.length,
            loc.width,
            loc.height,
            math.degrees(loc.yaw),
        )
        # round() first so values like -0.004 normalize to 0.00, not -0.00;
        # a "-0.00" would not survive a parse/serialize round trip.
        return "<" + ",".join(f"{round(v, 2) + 0.0:.2f}" for v in fields) + ">"
    if isinstance(loc, OrientedBox2D):
        ints = (loc.cx, loc.cy, loc.width, loc.height)
        angle_deg = round(math.degrees(loc.angle), 2) + 0.0
        return (
            "["
            + ",".join(str(int(round(v))) for v in ints)
            + f",{angle_deg:.2f}]"
        )
    if isinstance(loc, HorizontalBox2D):
        return (
            "["
            + ",".join(str(int(round(v))) for v in (loc.x1, loc.y1, loc.x2, loc.y2))
            + "]"
        )
    raise TypeError(f"not a serializable location: {type(loc).__name__}")


def _parse_fields(body: str, where: str) -> list[float]:
    parts = [p.strip() for p in body.split(",")]
    if any(not p for p in parts):
        raise ParseError(f"empty field in location {where!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ParseError(f"non-numeric field in location {where!r}: {exc}") from None


def parse_location(text: str) -> Location:
    """Parse a serialized HBB, OBB, or Box3D; inverse of serialize_location.

    Bracket style selects the family (<> = 3D, [] = 2D) and the field count
    selects HBB (4) vs OBB (5). Anything else raises ParseError.
    """
    stripped = text.strip()
    m = _ANGLE_BRACKETS.fullmatch(stripped)
    if m:
        vals = _parse_fields(m.group(1), stripped)
        if len(vals) != 7:
            raise ParseError(
                f"3D location needs 7 fields, got {len(vals)} in {stripped!r}"
            )
        x, y, z, length, width, height, yaw_deg = vals
        try:
            return Box3D(
                CameraPoint(x, y, z), length, width, height,
                wrap_angle_half_pi(math.radians(yaw_deg)),
            )
        except ValueError as exc:
            raise ParseError(f"invalid 3D box {stripped!r}: {exc}") from None
    m = _SQUARE_BRACKETS.fullmatch(stripped)
    if m:
        vals = _parse_fields(m.group(1), stripped)
        try:
            if len(vals) == 4:
                return HorizontalBox2D(*vals)
            if len(vals) == 5:
                cx, cy, w, h, angle_deg = vals
                return OrientedBox2D.normalized(cx, cy, w, h, math.radians(angle_deg))
        except ValueError as exc:
            raise ParseError(f"invalid 2D box {stripped!r}: {exc}") from None
        raise ParseError(
            f"2D location needs 4 (HBB) or 5 (OBB) fields, got {len(vals)} in {stripped!r}"
        )
    raise ParseError(f"no bracketed location in {text!r}")


def extract_location(text: str) -> Location | None:
    """First parseable location embedded anywhere in free text, else None."""
    candidates = []
    for m in _ANGLE_BRACKETS.finditer(text):
        candidates.append((m.start(), m.group(0)))
    for m in _SQUARE_BRACKETS.finditer(text):
        candidates.append((m.start(), m.group(0)))
    for _, token in sorted(candidates):
        try:
            return parse_location(token)
        except ParseError:
            continue
    return None
