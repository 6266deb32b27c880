"""Structured cube meshes, pixel partitions and Neumann patch layouts.

Node ``(i, j, k)`` has index ``i + (n+1) * (j + (n+1) * k)``; element
``(i, j, k)`` has index ``i + n * (j + n * k)``. Pixels and patches follow
the same x-fastest ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# face id -> (normal axis, side, in-plane axes)
FACES: dict[str, tuple[int, int, tuple[int, int]]] = {
    "x0": (0, 0, (1, 2)),
    "x1": (0, 1, (1, 2)),
    "y0": (1, 0, (0, 2)),
    "y1": (1, 1, (0, 2)),
    "z0": (2, 0, (0, 1)),
    "z1": (2, 1, (0, 1)),
}

# local hexahedron node offsets, counter-clockwise bottom then top
HEX_CORNERS = np.array(
    [
        [0, 0, 0],
        [1, 0, 0],
        [1, 1, 0],
        [0, 1, 0],
        [0, 0, 1],
        [1, 0, 1],
        [1, 1, 1],
        [0, 1, 1],
    ],
    dtype=np.int64,
)


class GeometryError(ValueError):
    pass


def inward_normal(face: str) -> np.ndarray:
    axis, side, _ = FACES[face]
    normal = np.zeros(3)
    normal[axis] = 1.0 if side == 0 else -1.0
    return normal


@dataclass(frozen=True, eq=False)
class CubeMesh:
    """Uniform hexahedral mesh of the cube ``[0, L]^3``."""

    n: int
    length: float
    nodes: np.ndarray
    elements: np.ndarray
    dirichlet_face: str = "z0"

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def n_elements(self) -> int:
        return self.n**3

    @property
    def n_nodes(self) -> int:
        return (self.n + 1) ** 3

    @property
    def n_dofs(self) -> int:
        return 3 * self.n_nodes

    def node_index(self, i, j, k):
        m = self.n + 1
        return i + m * (j + m * k)

    def element_ijk(self, e):
        e = np.asarray(e)
        n = self.n
        return np.stack([e % n, (e // n) % n, e // (n * n)], axis=-1)

    @property
    def centroids(self) -> np.ndarray:
        return (self.element_ijk(np.arange(self.n_elements)) + 0.5) * self.h

    @property
    def element_dofs(self) -> np.ndarray:
        """``(n_elements, 24)`` global dof indices, node-major (ux, uy, uz)."""
        return (3 * self.elements[:, :, None] + np.arange(3)).reshape(-1, 24)

    def face_facets(self, face: str) -> tuple[np.ndarray, np.ndarray]:
        """Facets on ``face`` as ``(quads, ab)``.

        ``quads`` is ``(n*n, 4)`` node ids ordered counter-clockwise in the
        face's in-plane coordinates, ``ab`` the ``(n*n, 2)`` in-plane facet
        indices.
        """
        axis, side, (ax_a, ax_b) = FACES[face]
        n = self.n
        b, a = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        a, b = a.ravel(), b.ravel()
        quads = np.empty((n * n, 4), dtype=np.int64)
        for c, (da, db) in enumerate([(0, 0), (1, 0), (1, 1), (0, 1)]):
            ijk = np.zeros((n * n, 3), dtype=np.int64)
            ijk[:, axis] = side * n
            ijk[:, ax_a] = a + da
            ijk[:, ax_b] = b + db
            quads[:, c] = self.node_index(ijk[:, 0], ijk[:, 1], ijk[:, 2])
        return quads, np.stack([a, b], axis=1)

    def dirichlet_nodes(self) -> np.ndarray:
        axis, side, _ = FACES[self.dirichlet_face]
        coord = np.rint(self.nodes[:, axis] / self.h).astype(np.int64)
        return np.flatnonzero(coord == side * self.n)

    def free_dofs(self) -> np.ndarray:
        fixed = np.zeros(self.n_nodes, dtype=bool)
        fixed[self.dirichlet_nodes()] = True
        return np.flatnonzero(np.repeat(~fixed, 3))


def build_mesh(n: int, length: float = 1.0, dirichlet_face: str = "z0") -> CubeMesh:
    if int(n) != n or n < 1:
        raise GeometryError(f"n must be a positive integer, got {n!r}")
    if not length > 0:
        raise GeometryError(f"edge length must be positive, got {length!r}")
    if dirichlet_face not in FACES:
        raise GeometryError(f"unknown face {dirichlet_face!r}")
    n = int(n)
    h = length / n
    m = n + 1
    k, j, i = np.meshgrid(np.arange(m), np.arange(m), np.arange(m), indexing="ij")
    nodes = np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1) * h

    ek, ej, ei = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    base = np.stack([ei.ravel(), ej.ravel(), ek.ravel()], axis=1)
    corners = base[:, None, :] + HEX_CORNERS[None, :, :]
    elements = corners[..., 0] + m * (corners[..., 1] + m * corners[..., 2])
    return CubeMesh(n, float(length), nodes, elements, dirichlet_face)


@dataclass(frozen=True, eq=False)
class PixelPartition:
    mesh: CubeMesh
    p: int
    element_pixel: np.ndarray

    @property
    def n_pixels(self) -> int:
        return self.p**3

    def pixel_ijk(self, s):
        s = np.asarray(s)
        p = self.p
        return np.stack([s % p, (s // p) % p, s // (p * p)], axis=-1)

    def elements_of(self, pixels) -> np.ndarray:
        pixels = np.atleast_1d(np.asarray(pixels, dtype=np.int64))
        if pixels.size and (pixels.min() < 0 or pixels.max() >= self.n_pixels):
            raise GeometryError(f"pixel index out of range [0, {self.n_pixels})")
        return np.flatnonzero(np.isin(self.element_pixel, pixels))

    def indicator(self, pixels) -> np.ndarray:
        """Per-element 0/1 indicator of a pixel set."""
        chi = np.zeros(self.mesh.n_elements)
        chi[self.elements_of(pixels)] = 1.0
        return chi

    def pixel_volumes(self) -> np.ndarray:
        counts = np.bincount(self.element_pixel, minlength=self.n_pixels)
        return counts * self.mesh.h**3


def build_partition(mesh: CubeMesh, p: int) -> PixelPartition:
    if int(p) != p or p < 1 or mesh.n % p:
        raise GeometryError(f"pixel count per axis p={p!r} must divide n={mesh.n}")
    p = int(p)
    ijk = np.floor(mesh.centroids / (mesh.length / p)).astype(np.int64)
    ijk = np.clip(ijk, 0, p - 1)
    element_pixel = ijk[:, 0] + p * (ijk[:, 1] + p * ijk[:, 2])
    return PixelPartition(mesh, p, element_pixel)


@dataclass(frozen=True, eq=False)
class Patch:
    face: str
    # (a0, a1, b0, b1) half-open facet index ranges in the face's in-plane axes
    facet_range: tuple[int, int, int, int]
    quads: np.ndarray
    traction: np.ndarray

    @property
    def n_facets(self) -> int:
        return len(self.quads)


@dataclass(frozen=True, eq=False)
class PatchLayout:
    mesh: CubeMesh
    q: int
    traction_magnitude: float
    patches: list[Patch] = field(default_factory=list)

    @property
    def M(self) -> int:
        return len(self.patches)

    def area(self, patch: Patch) -> float:
        return patch.n_facets * self.mesh.h**2


def build_patches(mesh: CubeMesh, q: int, traction_magnitude: float = 1.0) -> PatchLayout:
    """Tile the five loaded faces with ``q x q`` square patches.

    Each patch carries a constant traction of size ``traction_magnitude``
    along the inward face normal.
    """
    if int(q) != q or q < 1 or mesh.n % q:
        raise GeometryError(f"patches per axis q={q!r} must divide n={mesh.n}")
    if traction_magnitude == 0:
        raise GeometryError("traction magnitude must be nonzero")
    q = int(q)
    w = mesh.n // q
    patches = []
    for face in FACES:
        if face == mesh.dirichlet_face:
            continue
        quads, ab = mesh.face_facets(face)
        pa, pb = ab[:, 0] // w, ab[:, 1] // w
        g = traction_magnitude * inward_normal(face)
        for B in range(q):
            for A in range(q):
                sel = (pa == A) & (pb == B)
                patches.append(
                    Patch(face, (A * w, (A + 1) * w, B * w, (B + 1) * w), quads[sel], g)
                )
    return PatchLayout(mesh, q, float(traction_magnitude), patches)
