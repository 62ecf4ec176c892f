"""Structured grids over intervals, rectangles, and masked disks.

Every grid is a uniform lattice whose nodes are classified interior,
boundary, or exterior.  Intervals and rectangles use all lattice nodes;
disks are masked out of their bounding box: interior nodes lie strictly
inside the circle and the boundary ring is the first layer of outside
nodes adjacent to an inside node (staircase approximation).  Boundary
values on a disk are read off the radial projection of the boundary node
onto the circle, so ``BoundaryPoint.coord`` is the projected point there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ConfigError


class NodeClass(IntEnum):
    INTERIOR = 0
    BOUNDARY = 1
    EXTERIOR = 2


_EXPORT_CHAR = {NodeClass.INTERIOR: "I", NodeClass.BOUNDARY: "B", NodeClass.EXTERIOR: "E"}

# fixed corner ownership for rectangles; see boundary_points
RECT_SIDES = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class DomainSpec:
    """Geometric domain description.

    kind/params:
      interval:  (a, b)
      rectangle: (ax, bx, ay, by)
      disk:      (cx, cy, radius)
    """

    kind: str
    params: tuple[float, ...]

    @staticmethod
    def interval(a: float, b: float) -> "DomainSpec":
        return DomainSpec("interval", (float(a), float(b)))

    @staticmethod
    def rectangle(ax: float, bx: float, ay: float, by: float) -> "DomainSpec":
        return DomainSpec("rectangle", (float(ax), float(bx), float(ay), float(by)))

    @staticmethod
    def disk(cx: float, cy: float, radius: float) -> "DomainSpec":
        return DomainSpec("disk", (float(cx), float(cy), float(radius)))


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable structured grid with node classification.

    ``mask`` holds :class:`NodeClass` codes, shape ``(nx,)`` in 1D and
    ``(ny, nx)`` (row-major in y) in 2D.
    """

    domain: DomainSpec
    dims: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...]
    mask: np.ndarray

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.dims))

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.dims[axis])

    def node_coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays shaped like ``mask`` (X, then Y in 2D)."""
        if self.ndim == 1:
            return (self.axis_coords(0),)
        X, Y = np.meshgrid(self.axis_coords(0), self.axis_coords(1))
        return X, Y

    def interior(self) -> np.ndarray:
        return self.mask == NodeClass.INTERIOR

    def boundary(self) -> np.ndarray:
        return self.mask == NodeClass.BOUNDARY

    def in_domain(self) -> np.ndarray:
        return self.mask != NodeClass.EXTERIOR


@dataclass(frozen=True)
class BoundaryPoint:
    """A boundary node together with its boundary parameterization.

    ``param`` is the angle theta in [0, 2*pi) for disks, a ``(side, s)``
    pair for rectangles (s = arclength along the side, counterclockwise),
    and ``"left"``/``"right"`` for intervals.  For disks ``coord`` is the
    radial projection of the node onto the circle.
    """

    index: tuple[int, ...]
    coord: tuple[float, ...]
    param: object


def _as_axis_counts(n, ndim: int) -> tuple[int, ...]:
    if isinstance(n, (tuple, list)):
        counts = tuple(int(v) for v in n)
        if len(counts) != ndim:
            raise ConfigError(f"expected {ndim} node counts, got {len(counts)}")
    else:
        counts = (int(n),) * ndim
    for c in counts:
        if c < 3:
            raise ConfigError(f"need at least 3 nodes per axis, got {c}")
    return counts


def build_grid(domain: DomainSpec, n) -> Grid:
    """Build a classified grid with ``n`` nodes per axis."""
    if domain.kind == "interval":
        a, b = domain.params
        if not b > a:
            raise ConfigError(f"degenerate interval [{a}, {b}]")
        (nx,) = _as_axis_counts(n, 1)
        h = (b - a) / (nx - 1)
        mask = np.full(nx, NodeClass.INTERIOR, dtype=np.int8)
        mask[0] = mask[-1] = NodeClass.BOUNDARY
        return Grid(domain, (nx,), (h,), (a,), mask)

    if domain.kind == "rectangle":
        ax, bx, ay, by = domain.params
        if not (bx > ax and by > ay):
            raise ConfigError(f"degenerate rectangle [{ax},{bx}]x[{ay},{by}]")
        nx, ny = _as_axis_counts(n, 2) if isinstance(n, (tuple, list)) else _as_axis_counts((n, n), 2)
        hx = (bx - ax) / (nx - 1)
        hy = (by - ay) / (ny - 1)
        mask = np.full((ny, nx), NodeClass.INTERIOR, dtype=np.int8)
        mask[0, :] = mask[-1, :] = NodeClass.BOUNDARY
        mask[:, 0] = mask[:, -1] = NodeClass.BOUNDARY
        return Grid(domain, (nx, ny), (hx, hy), (ax, ay), mask)

    if domain.kind == "disk":
        cx, cy, r = domain.params
        if not r > 0:
            raise ConfigError(f"degenerate disk, radius {r}")
        nx, ny = _as_axis_counts(n, 2) if isinstance(n, (tuple, list)) else _as_axis_counts((n, n), 2)
        hx = 2 * r / (nx - 1)
        hy = 2 * r / (ny - 1)
        x = (cx - r) + hx * np.arange(nx)
        y = (cy - r) + hy * np.arange(ny)
        X, Y = np.meshgrid(x, y)
        inside = (X - cx) ** 2 + (Y - cy) ** 2 < r**2
        ring = np.zeros_like(inside)
        ring[1:, :] |= inside[:-1, :]
        ring[:-1, :] |= inside[1:, :]
        ring[:, 1:] |= inside[:, :-1]
        ring[:, :-1] |= inside[:, 1:]
        ring &= ~inside
        mask = np.full((ny, nx), NodeClass.EXTERIOR, dtype=np.int8)
        mask[inside] = NodeClass.INTERIOR
        mask[ring] = NodeClass.BOUNDARY
        if not inside.any():
            raise ConfigError("degenerate disk: no interior nodes at this resolution")
        return Grid(domain, (nx, ny), (hx, hy), (cx - r, cy - r), mask)

    raise ConfigError(f"unknown domain kind {domain.kind!r}")


def boundary_points(g: Grid) -> list[BoundaryPoint]:
    """All boundary nodes with their parameters, in perimeter order.

    Intervals return (left, right).  Rectangles walk bottom, right, top,
    left; every corner belongs to exactly one side in that fixed order.
    Disks are sorted by increasing theta.
    """
    if g.domain.kind == "interval":
        a, b = g.domain.params
        return [
            BoundaryPoint((0,), (a,), "left"),
            BoundaryPoint((g.dims[0] - 1,), (b,), "right"),
        ]

    if g.domain.kind == "rectangle":
        ax, bx, ay, by = g.domain.params
        nx, ny = g.dims
        x = g.axis_coords(0)
        y = g.axis_coords(1)
        pts: list[BoundaryPoint] = []
        for ix in range(nx):  # bottom owns both of its corners
            pts.append(BoundaryPoint((ix, 0), (x[ix], ay), ("bottom", x[ix] - ax)))
        for iy in range(1, ny):  # right owns the top-right corner
            pts.append(BoundaryPoint((nx - 1, iy), (bx, y[iy]), ("right", y[iy] - ay)))
        for ix in range(nx - 2, -1, -1):  # top owns the top-left corner
            pts.append(BoundaryPoint((ix, ny - 1), (x[ix], by), ("top", bx - x[ix])))
        for iy in range(ny - 2, 0, -1):
            pts.append(BoundaryPoint((0, iy), (ax, y[iy]), ("left", by - y[iy])))
        return pts

    if g.domain.kind == "disk":
        cx, cy, r = g.domain.params
        X, Y = g.node_coords()
        iys, ixs = np.nonzero(g.boundary())
        pts = []
        for ix, iy in zip(ixs, iys):
            theta = math.atan2(Y[iy, ix] - cy, X[iy, ix] - cx) % (2 * math.pi)
            coord = (cx + r * math.cos(theta), cy + r * math.sin(theta))
            pts.append(BoundaryPoint((int(ix), int(iy)), coord, theta))
        pts.sort(key=lambda p: p.param)
        return pts

    raise ConfigError(f"unknown domain kind {g.domain.kind!r}")


def format_grid(g: Grid) -> str:
    """Serialize the grid: header line then one node-class character per
    node, row-major (one text line per grid row)."""
    dims = ",".join(str(d) for d in g.dims)
    h = ",".join(repr(float(s)) for s in g.spacing)
    origin = ",".join(repr(float(o)) for o in g.origin)
    lines = [f"# dims={dims} h={h} origin={origin}"]
    rows = g.mask.reshape(1, -1) if g.ndim == 1 else g.mask
    for row in rows:
        lines.append("".join(_EXPORT_CHAR[NodeClass(c)] for c in row))
    return "\n".join(lines) + "\n"
