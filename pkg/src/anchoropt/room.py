"""Room geometry, placement constraints and the mobile evaluation grid.

Coordinates follow the room box ``[0, Lx] x [0, Ly] x [0, Lz]`` with the floor
at ``z = 0``. Anchors may only be mounted on a subset of planes: the two large
side walls (``y = 0`` and ``y = Ly``) and the ceiling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError

# Fixed order, also used to break projection ties.
PLANE_ORDER = ("wall_y0", "wall_yMax", "ceiling")

# plane id -> (normal axis, at max side?)
_PLANE_AXIS = {
    "wall_y0": (1, False),
    "wall_yMax": (1, True),
    "ceiling": (2, True),
}

UNIT_TOL = 1e-9


@dataclass(frozen=True)
class Room:
    dims: tuple[float, float, float] = (8.0, 4.0, 2.4)
    allowed_planes: tuple[str, ...] = PLANE_ORDER
    anchor_offset: float = 0.03
    mobile_offset: float = 0.05

    def __post_init__(self):
        dims = tuple(float(d) for d in self.dims)
        if len(dims) != 3 or min(dims) <= 0:
            raise InvalidArgumentError(f"room extents must be three positive values, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        planes = tuple(p for p in PLANE_ORDER if p in set(self.allowed_planes))
        unknown = set(self.allowed_planes) - set(PLANE_ORDER)
        if unknown:
            raise InvalidArgumentError(f"unknown planes {sorted(unknown)}; choose from {PLANE_ORDER}")
        if not planes:
            raise InvalidArgumentError("at least one allowed plane is required")
        object.__setattr__(self, "allowed_planes", planes)
        half = min(dims) / 2
        for name in ("anchor_offset", "mobile_offset"):
            value = getattr(self, name)
            if not 0 < value < half:
                raise InvalidArgumentError(f"{name} must lie in (0, {half}), got {value}")

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.dims)

    @property
    def centroid(self) -> np.ndarray:
        return self.extent / 2

    @property
    def max_distance(self) -> float:
        return float(np.linalg.norm(self.extent))

    def plane_area(self, plane: str) -> float:
        axis, _ = _PLANE_AXIS[plane]
        others = [d for i, d in enumerate(self.dims) if i != axis]
        return others[0] * others[1]

    def surface_level(self, plane: str) -> float:
        """Coordinate along the plane normal at which anchors are mounted."""
        axis, at_max = _PLANE_AXIS[plane]
        return self.dims[axis] - self.anchor_offset if at_max else self.anchor_offset

    def surface_bounds(self, plane: str) -> tuple[np.ndarray, np.ndarray]:
        """Lower/upper corner of the rectangle anchors on ``plane`` may occupy.

        In-plane coordinates are kept ``anchor_offset`` away from adjacent
        planes too, so a corner anchor stays inside the room.
        """
        axis, _ = _PLANE_AXIS[plane]
        lo = np.full(3, self.anchor_offset)
        hi = self.extent - self.anchor_offset
        lo[axis] = hi[axis] = self.surface_level(plane)
        return lo, hi

    def distance_to_plane(self, point, plane: str) -> float:
        axis, at_max = _PLANE_AXIS[plane]
        return float(self.dims[axis] - point[axis] if at_max else point[axis])


def plane_normal_axis(plane: str) -> int:
    return _PLANE_AXIS[plane][0]


@dataclass(frozen=True, eq=False)
class MobileGrid:
    positions: np.ndarray
    spacing: np.ndarray
    counts: tuple[int, int, int] = field(default=(1, 1, 1))

    def __len__(self):
        return len(self.positions)


def build_grid(room: Room, counts: Sequence[int]) -> MobileGrid:
    """Regular grid over the room interior shrunk by ``mobile_offset``.

    Boundary rows sit exactly at ``mobile_offset`` from the planes; a single
    point along an axis is placed at the room centre.
    """
    counts = tuple(int(n) for n in counts)
    if len(counts) != 3 or min(counts) < 1:
        raise InvalidArgumentError(f"grid counts must be three integers >= 1, got {counts}")
    axes, spacing = [], np.zeros(3)
    for i, n in enumerate(counts):
        lo, hi = room.mobile_offset, room.dims[i] - room.mobile_offset
        if n == 1:
            axes.append(np.array([room.dims[i] / 2]))
        else:
            axes.append(np.linspace(lo, hi, n))
            spacing[i] = (hi - lo) / (n - 1)
    mesh = np.meshgrid(*axes, indexing="ij")
    positions = np.stack([m.ravel() for m in mesh], axis=1)
    positions.setflags(write=False)
    return MobileGrid(positions=positions, spacing=spacing, counts=counts)


def project_to_allowed_planes(point, room: Room) -> tuple[np.ndarray, str]:
    """Closest point on any allowed anchor surface, plus that surface's id."""
    point = np.asarray(point, dtype=float)
    best, best_plane, best_dist = None, None, np.inf
    for plane in room.allowed_planes:
        lo, hi = room.surface_bounds(plane)
        candidate = np.clip(point, lo, hi)
        dist = np.linalg.norm(candidate - point)
        if dist < best_dist:
            best, best_plane, best_dist = candidate, plane, dist
    return best, best_plane


def aim_at_centroid(anchor, room: Room) -> np.ndarray:
    delta = room.centroid - np.asarray(anchor, dtype=float)
    norm = np.linalg.norm(delta)
    if norm == 0:
        raise InvalidArgumentError("anchor coincides with the room centroid")
    return delta / norm


def cardioid_gain(directivity, toward) -> np.ndarray:
    """Cardioid transmit gain ``0.5 (1 + cos theta)``.

    Works on single vectors or on stacks of vectors along the last axis.
    """
    directivity = np.asarray(directivity, dtype=float)
    toward = np.asarray(toward, dtype=float)
    for name, vec in (("directivity", directivity), ("toward", toward)):
        if np.any(np.abs(np.linalg.norm(vec, axis=-1) - 1) > UNIT_TOL):
            raise InvalidArgumentError(f"{name} must be a unit vector")
    cos = np.clip(np.sum(directivity * toward, axis=-1), -1.0, 1.0)
    return 0.5 * (1 + cos)


@dataclass(frozen=True, eq=False)
class AnchorLayout:
    anchors: np.ndarray
    directivities: np.ndarray
    plane_of: tuple[str, ...]

    def __len__(self):
        return len(self.anchors)

    @property
    def stacked(self) -> np.ndarray:
        return self.anchors.ravel()

    def validate(self, room: Room, tol: float = 1e-9) -> None:
        if len(self.anchors) < 4:
            raise InvalidArgumentError(f"at least 4 anchors are required, got {len(self.anchors)}")
        if not (self.anchors.shape == self.directivities.shape == (len(self.plane_of), 3)):
            raise InvalidArgumentError("anchors, directivities and plane_of disagree in length")
        norms = np.linalg.norm(self.directivities, axis=1)
        if np.any(np.abs(norms - 1) > tol):
            raise InvalidArgumentError("directivity vectors must have unit norm")
        for j, (a, plane) in enumerate(zip(self.anchors, self.plane_of)):
            if plane not in room.allowed_planes:
                raise InvalidArgumentError(f"anchor {j} is assigned to disallowed plane {plane}")
            lo, hi = room.surface_bounds(plane)
            if np.any(a < lo - tol) or np.any(a > hi + tol):
                raise InvalidArgumentError(f"anchor {j} at {a.tolist()} is off the {plane} anchor surface")


def make_layout(positions, room: Room, planes: Sequence[str] | None = None) -> AnchorLayout:
    """Build and validate a layout from explicit positions.

    Without ``planes`` each anchor is assigned to the surface it lies on
    (ties follow the fixed plane order). Positions are not moved.
    """
    anchors = np.array(positions, dtype=float).reshape(-1, 3)
    if planes is None:
        planes = []
        for a in anchors:
            q, plane = project_to_allowed_planes(a, room)
            if np.linalg.norm(q - a) > 1e-9:
                raise InvalidArgumentError(f"anchor {a.tolist()} is not on an allowed anchor surface")
            planes.append(plane)
    directivities = np.array([aim_at_centroid(a, room) for a in anchors]).reshape(-1, 3)
    anchors.setflags(write=False)
    directivities.setflags(write=False)
    layout = AnchorLayout(anchors, directivities, tuple(planes))
    layout.validate(room)
    return layout


def project_layout(stacked, room: Room) -> AnchorLayout:
    """Project every anchor of a stacked 3M-vector onto the allowed surfaces."""
    points = np.asarray(stacked, dtype=float).reshape(-1, 3)
    projected, planes = zip(*(project_to_allowed_planes(p, room) for p in points))
    return make_layout(np.array(projected), room, planes)


def corner_layout(room: Room) -> AnchorLayout:
    """Non-optimized reference: four anchors in opposite wall/ceiling corners.

    Two anchors sit in diagonally opposite ceiling corners and one in a lower
    corner of each side wall, so the anchors' hull encloses the room.
    """
    lo = np.full(3, room.anchor_offset)
    hi = room.extent - room.anchor_offset
    positions = [
        (lo[0], lo[1], hi[2]),
        (hi[0], hi[1], hi[2]),
        (hi[0], lo[1], lo[2]),
        (lo[0], hi[1], lo[2]),
    ]
    planes = ["ceiling", "ceiling", "wall_y0", "wall_yMax"]
    planes = [p if p in room.allowed_planes else project_to_allowed_planes(x, room)[1]
              for p, x in zip(planes, positions)]
    return make_layout(positions, room, planes)
