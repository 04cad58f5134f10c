"""Axis-aligned rectangular meshes and box decompositions.

Elements are numbered row by row (``k = j * nx + i``). Edges are numbered in
lexicographic order of their midpoints, so every interface trace has the same
column layout regardless of the method that produces it. Each element lists its
edges in the local order ``(left, right, bottom, top)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGrid, InvalidPartition, MisalignedPartition

LEFT, RIGHT, BOTTOM, TOP = 0, 1, 2, 3
SIDES = ("left", "right", "bottom", "top")

INTERIOR, DIRICHLET, NEUMANN = 0, 1, 2
_KIND = {"dirichlet": DIRICHLET, "neumann": NEUMANN}


@dataclass(frozen=True, eq=False)
class Mesh:
    x: np.ndarray
    y: np.ndarray
    elem_edges: np.ndarray  # (n_elements, 4) global edge ids
    edge_elements: np.ndarray  # (n_edges, 2) element below/left, above/right; -1 if none
    edge_local: np.ndarray  # (n_edges, 2) local face index inside each adjacent element
    edge_midpoint: np.ndarray
    edge_length: np.ndarray
    edge_normal: np.ndarray  # +x for vertical edges, +y for horizontal ones
    edge_side: np.ndarray  # boundary side code, -1 for interior edges
    boundary_kind: np.ndarray  # INTERIOR / DIRICHLET / NEUMANN per edge

    @property
    def nx(self) -> int:
        return len(self.x) - 1

    @property
    def ny(self) -> int:
        return len(self.y) - 1

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def n_edges(self) -> int:
        return len(self.edge_length)

    @property
    def elem_dx(self) -> np.ndarray:
        return np.tile(np.diff(self.x), self.ny)

    @property
    def elem_dy(self) -> np.ndarray:
        return np.repeat(np.diff(self.y), self.nx)

    @property
    def elem_area(self) -> np.ndarray:
        return self.elem_dx * self.elem_dy

    @property
    def elem_center(self) -> np.ndarray:
        xc = 0.5 * (self.x[1:] + self.x[:-1])
        yc = 0.5 * (self.y[1:] + self.y[:-1])
        return np.column_stack([np.tile(xc, self.ny), np.repeat(yc, self.nx)])

    @property
    def elem_lower_left(self) -> np.ndarray:
        return np.column_stack([np.tile(self.x[:-1], self.ny), np.repeat(self.y[:-1], self.nx)])

    @property
    def domain_area(self) -> float:
        return float((self.x[-1] - self.x[0]) * (self.y[-1] - self.y[0]))

    @property
    def h(self) -> float:
        return float(np.max(np.hypot(self.elem_dx, self.elem_dy)))

    def boundary_edges(self, side: str | None = None) -> np.ndarray:
        if side is None:
            return np.flatnonzero(self.edge_side >= 0)
        return np.flatnonzero(self.edge_side == SIDES.index(side))


def uniform_coords(a: float, b: float, n: int) -> np.ndarray:
    return np.linspace(a, b, n + 1)


def build_mesh(x_coords, y_coords, boundary_spec=None) -> Mesh:
    """Build a tensor-product rectangular mesh.

    ``boundary_spec`` maps a side name (left/right/bottom/top) to "dirichlet"
    or "neumann"; missing sides default to Dirichlet.
    """
    x = np.asarray(x_coords, dtype=float)
    y = np.asarray(y_coords, dtype=float)
    for name, c in (("x", x), ("y", y)):
        if c.ndim != 1 or len(c) < 2:
            raise InvalidGrid(f"{name} coordinates need at least two entries")
        if not np.all(np.isfinite(c)) or np.any(np.diff(c) <= 0):
            raise InvalidGrid(f"{name} coordinates must be strictly increasing")
    spec = {s: "dirichlet" for s in SIDES}
    for side, kind in (boundary_spec or {}).items():
        if side not in spec or kind.lower() not in _KIND:
            raise InvalidGrid(f"bad boundary condition {side}={kind}")
        spec[side] = kind.lower()

    nx, ny = len(x) - 1, len(y) - 1
    xc = 0.5 * (x[1:] + x[:-1])
    yc = 0.5 * (y[1:] + y[:-1])

    # vertical edges: (i, j) with i in 0..nx, j in 0..ny-1
    vi, vj = np.meshgrid(np.arange(nx + 1), np.arange(ny), indexing="ij")
    vi, vj = vi.ravel(), vj.ravel()
    # horizontal edges: (i, j) with i in 0..nx-1, j in 0..ny
    hi, hj = np.meshgrid(np.arange(nx), np.arange(ny + 1), indexing="ij")
    hi, hj = hi.ravel(), hj.ravel()

    mid = np.vstack([np.column_stack([x[vi], yc[vj]]), np.column_stack([xc[hi], y[hj]])])
    order = np.lexsort((mid[:, 1], mid[:, 0]))
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    n_v = len(vi)
    vid = rank[:n_v].reshape(nx + 1, ny)
    hid = rank[n_v:].reshape(nx, ny + 1)

    n_edges = len(order)
    length = np.concatenate([np.diff(y)[vj], np.diff(x)[hi]])[order]
    normal = np.vstack([np.tile([1.0, 0.0], (n_v, 1)), np.tile([0.0, 1.0], (len(hi), 1))])[order]

    ei, ej = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ei, ej = ei.ravel(), ej.ravel()  # row-major element order
    elem_edges = np.column_stack([vid[ei, ej], vid[ei + 1, ej], hid[ei, ej], hid[ei, ej + 1]])

    n_el = nx * ny
    edge_elements = -np.ones((n_edges, 2), dtype=np.int64)
    edge_local = -np.ones((n_edges, 2), dtype=np.int64)
    k = np.arange(n_el)
    # the element on the "minus" side sees the edge as its right/top face
    edge_elements[elem_edges[:, RIGHT], 0] = k
    edge_local[elem_edges[:, RIGHT], 0] = RIGHT
    edge_elements[elem_edges[:, TOP], 0] = k
    edge_local[elem_edges[:, TOP], 0] = TOP
    edge_elements[elem_edges[:, LEFT], 1] = k
    edge_local[elem_edges[:, LEFT], 1] = LEFT
    edge_elements[elem_edges[:, BOTTOM], 1] = k
    edge_local[elem_edges[:, BOTTOM], 1] = BOTTOM

    side = -np.ones(n_edges, dtype=np.int64)
    side[vid[0, :]] = LEFT
    side[vid[nx, :]] = RIGHT
    side[hid[:, 0]] = BOTTOM
    side[hid[:, ny]] = TOP
    kind = np.zeros(n_edges, dtype=np.int64)
    for s, name in enumerate(SIDES):
        kind[side == s] = _KIND[spec[name]]

    return Mesh(
        x=x, y=y, elem_edges=elem_edges, edge_elements=edge_elements, edge_local=edge_local,
        edge_midpoint=mid[order], edge_length=length, edge_normal=normal,
        edge_side=side, boundary_kind=kind,
    )


@dataclass(frozen=True, eq=False)
class Decomposition:
    mesh: Mesh
    boxes: list
    elem_sub: np.ndarray  # subdomain label per element
    sub_elements: list  # sorted element ids per subdomain
    interface_edges: dict  # (i, j), i < j -> sorted edge ids
    neighbors: list  # N_i, sorted
    gamma_edges: np.ndarray = field(repr=False)  # all interface edges, sorted

    @property
    def n_sub(self) -> int:
        return len(self.sub_elements)

    def orientation(self, i: int, j: int) -> np.ndarray:
        """+1 where the edge normal points from subdomain i into j, else -1."""
        edges = self.interface_edges[(min(i, j), max(i, j))]
        minus_side = self.elem_sub[self.mesh.edge_elements[edges, 0]]
        return np.where(minus_side == i, 1.0, -1.0)

    def edge_subdomains(self, edges) -> np.ndarray:
        """Subdomain labels of the two elements adjacent to each edge."""
        ee = self.mesh.edge_elements[np.asarray(edges)]
        return np.where(ee >= 0, self.elem_sub[np.maximum(ee, 0)], -1)


def decompose(mesh: Mesh, boxes) -> Decomposition:
    """Split the mesh into axis-aligned boxes ``(x0, x1, y0, y1)``."""
    boxes = [tuple(float(v) for v in b) for b in boxes]
    if not boxes:
        raise InvalidPartition("at least one box is required")
    tol = 1e-9 * max(mesh.x[-1] - mesh.x[0], mesh.y[-1] - mesh.y[0])

    def on_lines(v, coords):
        return np.min(np.abs(coords - v)) <= tol

    for b in boxes:
        if len(b) != 4:
            raise InvalidPartition(f"box {b} must be (x0, x1, y0, y1)")
        x0, x1, y0, y1 = b
        if not (x1 > x0 and y1 > y0):
            raise InvalidPartition(f"box {b} is empty")
        if not (on_lines(x0, mesh.x) and on_lines(x1, mesh.x) and on_lines(y0, mesh.y) and on_lines(y1, mesh.y)):
            raise MisalignedPartition(f"box {b} does not lie on grid lines")

    centers = mesh.elem_center
    owner = -np.ones(mesh.n_elements, dtype=np.int64)
    for s, (x0, x1, y0, y1) in enumerate(boxes):
        inside = (centers[:, 0] > x0) & (centers[:, 0] < x1) & (centers[:, 1] > y0) & (centers[:, 1] < y1)
        if np.any(owner[inside] >= 0):
            raise InvalidPartition(f"box {s} overlaps another box")
        owner[inside] = s
    if np.any(owner < 0):
        raise InvalidPartition("boxes leave part of the domain uncovered")
    box_area = sum((b[1] - b[0]) * (b[3] - b[2]) for b in boxes)
    if abs(box_area - mesh.domain_area) > 1e-9 * mesh.domain_area:
        raise InvalidPartition("boxes extend outside the domain")

    sub_elements = [np.flatnonzero(owner == s) for s in range(len(boxes))]
    interior = np.flatnonzero(mesh.edge_side < 0)
    a = owner[mesh.edge_elements[interior, 0]]
    b = owner[mesh.edge_elements[interior, 1]]
    cut = a != b
    gamma = interior[cut]
    pairs = np.column_stack([np.minimum(a[cut], b[cut]), np.maximum(a[cut], b[cut])])
    interface_edges = {}
    neighbors = [set() for _ in boxes]
    for (i, j) in sorted({tuple(p) for p in pairs.tolist()}):
        interface_edges[(i, j)] = np.sort(gamma[(pairs[:, 0] == i) & (pairs[:, 1] == j)])
        neighbors[i].add(j)
        neighbors[j].add(i)
    return Decomposition(
        mesh=mesh, boxes=boxes, elem_sub=owner, sub_elements=sub_elements,
        interface_edges=interface_edges, neighbors=[sorted(n) for n in neighbors],
        gamma_edges=np.sort(gamma),
    )
