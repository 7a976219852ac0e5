"""Structured P1 triangulations of the unit square.

Two domain layouts are supported:

* ``heat2d``: outer region (subdomain 1) with a centered square block
  (subdomain 0); boundary tags ``base`` (y=0), ``top`` (y=1), ``side``.
* ``advdiff9d``: a 3x3 checkerboard of subdomains numbered 1..9 row-major
  from the bottom-left; boundary tags ``inlet`` (x=0), ``outlet`` (x=1),
  ``wall`` (y=0 and y=1).

Meshes are immutable after construction; derived quantities are cached.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import AssemblyError, ConfigurationError

logger = logging.getLogger(__name__)

LAYOUTS = ("heat2d", "advdiff9d")

# Cell counts must align with the subdomain partition of each layout.
_DIVISOR = {"heat2d": 4, "advdiff9d": 3}

_SIDE_TAGS = {
    "heat2d": {"bottom": "base", "top": "top", "left": "side", "right": "side"},
    "advdiff9d": {"bottom": "wall", "top": "wall", "left": "inlet", "right": "outlet"},
}


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation with subdomain ids and tagged boundary edges."""

    nodes: np.ndarray          # (n_nodes, 2) float64
    triangles: np.ndarray      # (n_triangles, 3) int, counter-clockwise
    subdomain_id: np.ndarray   # (n_triangles,) int
    boundary_edges: np.ndarray  # (n_edges, 2) int, endpoints
    boundary_tags: np.ndarray  # (n_edges,) str
    layout: str

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise AssemblyError(
                f"triangle {bad} has non-positive signed area {areas[bad]:.3e}"
            )
        return areas

    @cached_property
    def h_elem(self) -> np.ndarray:
        """Longest edge of each triangle (the local mesh size)."""
        p = self.nodes[self.triangles]
        e0 = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
        e1 = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
        e2 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
        return np.max(np.stack([e0, e1, e2], axis=1), axis=1)

    def edges_with_tag(self, tag: str) -> np.ndarray:
        return self.boundary_edges[self.boundary_tags == tag]

    def nodes_with_tag(self, *tags: str) -> np.ndarray:
        """Sorted unique node indices lying on edges with any of the tags."""
        mask = np.isin(self.boundary_tags, tags)
        return np.unique(self.boundary_edges[mask])

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges)


def _validate_resolution(nx: int, ny: int, layout: str) -> None:
    if layout not in LAYOUTS:
        raise ConfigurationError(
            f"unknown layout {layout!r}; expected one of {LAYOUTS}"
        )
    d = _DIVISOR[layout]
    for name, n in (("nx", nx), ("ny", ny)):
        if not isinstance(n, (int, np.integer)) or n < d:
            raise ConfigurationError(
                f"{name}={n!r} must be an integer >= {d} for layout {layout!r}"
            )
        if n % d != 0:
            raise ConfigurationError(
                f"{name}={n} must be divisible by {d} so cell boundaries align "
                f"with the {layout!r} subdomain partition"
            )


def build_unit_square_mesh(
    nx: int, ny: int, layout: str, block_side: float = 0.5
) -> Mesh:
    """Triangulate [0,1]^2 with nx-by-ny cells, two triangles per cell.

    ``block_side`` sets the side length of the centered heat2d block; the
    block edges are snapped outward to the nearest mesh lines so subdomain 0
    is always a union of whole cells.
    """
    _validate_resolution(nx, ny, layout)
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    xg, yg = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([xg.ravel(), yg.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ii = ii.ravel()
    jj = jj.ravel()
    v00 = nid(ii, jj)
    v10 = nid(ii + 1, jj)
    v01 = nid(ii, jj + 1)
    v11 = nid(ii + 1, jj + 1)
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    centroids = nodes[triangles].mean(axis=1)
    if layout == "heat2d":
        if not 0.0 < block_side < 1.0:
            raise ConfigurationError(
                f"block_side={block_side!r} must lie in (0, 1)"
            )
        lo_i = int(np.floor((0.5 - block_side / 2.0) * nx))
        lo_j = int(np.floor((0.5 - block_side / 2.0) * ny))
        x_lo, x_hi = xs[lo_i], xs[nx - lo_i]
        y_lo, y_hi = ys[lo_j], ys[ny - lo_j]
        if x_lo >= x_hi or y_lo >= y_hi:
            raise ConfigurationError(
                f"block_side={block_side} leaves no interior block on a "
                f"{nx}x{ny} mesh"
            )
        inside = (
            (centroids[:, 0] > x_lo) & (centroids[:, 0] < x_hi)
            & (centroids[:, 1] > y_lo) & (centroids[:, 1] < y_hi)
        )
        subdomain_id = np.where(inside, 0, 1).astype(np.int64)
    else:
        col = np.minimum((centroids[:, 0] * 3).astype(np.int64), 2)
        row = np.minimum((centroids[:, 1] * 3).astype(np.int64), 2)
        subdomain_id = 3 * row + col + 1

    tags = _SIDE_TAGS[layout]
    edges = []
    edge_tags = []
    for i in range(nx):
        edges.append((nid(i, 0), nid(i + 1, 0)))
        edge_tags.append(tags["bottom"])
        edges.append((nid(i, ny), nid(i + 1, ny)))
        edge_tags.append(tags["top"])
    for j in range(ny):
        edges.append((nid(0, j), nid(0, j + 1)))
        edge_tags.append(tags["left"])
        edges.append((nid(nx, j), nid(nx, j + 1)))
        edge_tags.append(tags["right"])

    mesh = Mesh(
        nodes=nodes,
        triangles=triangles,
        subdomain_id=subdomain_id,
        boundary_edges=np.asarray(edges, dtype=np.int64),
        boundary_tags=np.asarray(edge_tags),
        layout=layout,
    )
    mesh.triangle_areas  # fail fast on orientation defects
    return mesh


def resolution_for_target_nodes(target_nodes: int, layout: str) -> tuple[int, int]:
    """Smallest-error square resolution (nx, ny) with about target_nodes nodes.

    Only resolutions honoring the layout's divisibility constraint are
    considered; ties prefer the coarser mesh.
    """
    if layout not in LAYOUTS:
        raise ConfigurationError(
            f"unknown layout {layout!r}; expected one of {LAYOUTS}"
        )
    if not isinstance(target_nodes, (int, np.integer)) or target_nodes < 4:
        raise ConfigurationError(
            f"target_nodes={target_nodes!r} must be an integer >= 4"
        )
    d = _DIVISOR[layout]
    best = None
    n = d
    while True:
        err = abs((n + 1) ** 2 - target_nodes)
        if best is None or err < best[0]:
            best = (err, n)
        if (n + 1) ** 2 >= target_nodes and n > best[1]:
            break
        n += d
    return best[1], best[1]


def save_mesh(mesh: Mesh, path: str | Path) -> None:
    """Write a mesh as plain text (exact round trip with load_mesh)."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("mfmor-mesh 1\n")
        fh.write(f"layout {mesh.layout}\n")
        fh.write(f"nodes {mesh.n_nodes}\n")
        for x, y in mesh.nodes:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"triangles {mesh.n_triangles}\n")
        for (a, b, c), s in zip(mesh.triangles, mesh.subdomain_id):
            fh.write(f"{a} {b} {c} {s}\n")
        fh.write(f"boundary {len(mesh.boundary_edges)}\n")
        for (a, b), t in zip(mesh.boundary_edges, mesh.boundary_tags):
            fh.write(f"{a} {b} {t}\n")


def load_mesh(path: str | Path) -> Mesh:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().split()
        if header[:1] != ["mfmor-mesh"]:
            raise ConfigurationError(f"{path} is not a mesh file")
        layout = fh.readline().split()[1]
        n_nodes = int(fh.readline().split()[1])
        nodes = np.array(
            [[float(v) for v in fh.readline().split()] for _ in range(n_nodes)]
        )
        n_tri = int(fh.readline().split()[1])
        tri_rows = np.array(
            [[int(v) for v in fh.readline().split()] for _ in range(n_tri)],
            dtype=np.int64,
        )
        n_edges = int(fh.readline().split()[1])
        edges = np.empty((n_edges, 2), dtype=np.int64)
        tags = []
        for k in range(n_edges):
            a, b, t = fh.readline().split()
            edges[k] = (int(a), int(b))
            tags.append(t)
    return Mesh(
        nodes=nodes,
        triangles=tri_rows[:, :3],
        subdomain_id=tri_rows[:, 3],
        boundary_edges=edges,
        boundary_tags=np.asarray(tags),
        layout=layout,
    )
