"""
Hexahedral meshes, the structured box mesher, the plain-text mesh format and
trilinear reference-element quadrature.

Local vertex order follows the VTK hexahedron: the bottom face (zeta = -1)
counter-clockwise, then the top face.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import AssemblyError, IoError, ParameterError
from .utils import format_float

logger = logging.getLogger(__name__)

BOX_FACE_TAGS = ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")

REFERENCE_VERTICES = np.array([
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
])

# local faces in cyclic vertex order: xi=-1, xi=+1, eta=-1, eta=+1, zeta=-1, zeta=+1
LOCAL_FACES = np.array([
    [0, 4, 7, 3],
    [1, 2, 6, 5],
    [0, 1, 5, 4],
    [3, 7, 6, 2],
    [0, 3, 2, 1],
    [4, 5, 6, 7],
])

GAUSS_POINT = 1.0 / math.sqrt(3.0)


def hex_quadrature():
    """2x2x2 Gauss rule on [-1, 1]^3; unit weights."""
    points = REFERENCE_VERTICES * GAUSS_POINT
    return points, np.ones(len(points))


def face_quadrature():
    """2x2 Gauss rule on [-1, 1]^2 in the cyclic corner order of LOCAL_FACES."""
    corners = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    return corners * GAUSS_POINT, np.ones(4)


def shape_functions(points):
    """
    Trilinear shape functions at reference points.

    Returns:
        (values (nq, 8), reference gradients (nq, 8, 3))
    """
    points = np.atleast_2d(points)
    factors = 1.0 + points[:, None, :] * REFERENCE_VERTICES[None, :, :]
    values = np.prod(factors, axis=-1) / 8.0
    gradients = np.empty(values.shape + (3,))
    for axis in range(3):
        others = [k for k in range(3) if k != axis]
        gradients[..., axis] = (
            REFERENCE_VERTICES[None, :, axis] * factors[..., others[0]] * factors[..., others[1]] / 8.0
        )
    return values, gradients


def face_shape_functions(points):
    """Bilinear face shape functions and their (s, t) derivatives."""
    corners = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    points = np.atleast_2d(points)
    factors = 1.0 + points[:, None, :] * corners[None, :, :]
    values = factors[..., 0] * factors[..., 1] / 4.0
    gradients = np.stack([
        corners[None, :, 0] * factors[..., 1] / 4.0,
        corners[None, :, 1] * factors[..., 0] / 4.0,
    ], axis=-1)
    return values, gradients


@dataclass
class Mesh:
    """
    vertices: (nv, 3) coordinates
    cells: (nc, 8) vertex indices
    boundary_faces: (nf, 2) (cell, local face) pairs
    boundary_tags: (nf,) tag name per boundary face
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_faces: np.ndarray
    boundary_tags: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, 8)
        self.boundary_faces = np.asarray(self.boundary_faces, dtype=np.int64).reshape(-1, 2)
        self.boundary_tags = np.asarray(self.boundary_tags, dtype=str).reshape(-1)
        if len(self.boundary_tags) != len(self.boundary_faces):
            raise ParameterError("every boundary face needs exactly one tag")
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() >= len(self.vertices)):
            raise ParameterError("cell connectivity refers to missing vertices")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def tags(self):
        return tuple(sorted(set(self.boundary_tags.tolist())))

    def face_vertices(self, mask=None):
        """(nf, 4) global vertex indices of the boundary faces."""
        faces = self.boundary_faces if mask is None else self.boundary_faces[mask]
        local = LOCAL_FACES[faces[:, 1]]
        return np.take_along_axis(self.cells[faces[:, 0]], local, axis=1)

    def jacobian_determinants(self):
        """(nc, 8) Jacobian determinants at the Gauss points."""
        points, _ = hex_quadrature()
        _, gradients = shape_functions(points)
        jacobians = np.einsum("cai,qaj->cqij", self.vertices[self.cells], gradients)
        return np.linalg.det(jacobians)

    def validate(self):
        """
        Check positive cell Jacobians and that the tagged faces are exactly the
        exterior faces, each listed once.
        """
        determinants = self.jacobian_determinants()
        if determinants.size and not np.all(determinants > 0):
            bad = np.unique(np.nonzero(determinants <= 0)[0])
            raise AssemblyError(f"nonpositive Jacobian in {bad.size} cell(s), first cell {bad[0]}")

        all_faces = np.sort(self.cells[:, LOCAL_FACES].reshape(-1, 4), axis=1)
        unique_faces, inverse, counts = np.unique(all_faces, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        exterior = set(np.flatnonzero(counts == 1).tolist())

        listed = inverse.reshape(self.n_cells, 6)[self.boundary_faces[:, 0], self.boundary_faces[:, 1]]
        if len(set(listed.tolist())) != len(listed):
            raise AssemblyError("a boundary face is listed more than once")
        interior = [face for face in listed.tolist() if face not in exterior]
        if interior:
            raise AssemblyError(f"{len(interior)} tagged face(s) are shared by two cells")
        if set(listed.tolist()) != exterior:
            raise AssemblyError(
                f"boundary tags cover {len(listed)} of {len(exterior)} exterior faces"
            )
        return True


def build_box_mesh(extent, resolution, origin=(0.0, 0.0, 0.0)):
    """
    Structured hexahedral mesh of an axis-aligned box.

    Args:
        extent: three positive edge lengths
        resolution: three positive cell counts
        origin: lower corner

    Returns:
        Mesh whose boundary faces carry the tags xmin, xmax, ymin, ymax, zmin, zmax
    """
    extent = [float(value) for value in extent]
    resolution = [int(value) for value in resolution]
    if len(extent) != 3 or len(resolution) != 3:
        raise ParameterError("box extent and resolution need three entries each")
    if min(extent) <= 0:
        raise ParameterError(f"box extent must be positive, got {extent}")
    if min(resolution) < 1:
        raise ParameterError(f"box resolution must be at least 1 per axis, got {resolution}")
    nx, ny, nz = resolution
    axes = [origin[i] + extent[i] * np.arange(resolution[i] + 1) / resolution[i] for i in range(3)]
    grid = np.meshgrid(*axes, indexing="ij")
    vertices = np.column_stack([coordinate.ravel(order="F") for coordinate in grid])

    def node(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    i, j, k = (index.ravel(order="F") for index in np.meshgrid(
        np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"))
    cells = np.column_stack([
        node(i, j, k), node(i + 1, j, k), node(i + 1, j + 1, k), node(i, j + 1, k),
        node(i, j, k + 1), node(i + 1, j, k + 1), node(i + 1, j + 1, k + 1), node(i, j + 1, k + 1),
    ])

    cell_ids = np.arange(len(cells))
    selections = [i == 0, i == nx - 1, j == 0, j == ny - 1, k == 0, k == nz - 1]
    faces, tags = [], []
    for local_face, (tag, selection) in enumerate(zip(BOX_FACE_TAGS, selections)):
        chosen = cell_ids[selection]
        faces.append(np.column_stack([chosen, np.full(chosen.size, local_face)]))
        tags.extend([tag] * chosen.size)

    mesh = Mesh(vertices=vertices, cells=cells, boundary_faces=np.vstack(faces), boundary_tags=np.array(tags))
    logger.debug(f"Built box mesh {resolution} with {mesh.n_vertices} vertices and {mesh.n_cells} cells")
    return mesh


def write_mesh(mesh, path):
    """
    Write the plain-text mesh format: a header line with the vertex, cell and
    boundary-face counts, then one line per vertex, cell and tagged face.
    """
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            handle.write(f"{mesh.n_vertices} {mesh.n_cells} {len(mesh.boundary_faces)}\n")
            for vertex in mesh.vertices:
                handle.write(" ".join(format_float(value) for value in vertex) + "\n")
            for cell in mesh.cells:
                handle.write(" ".join(str(int(index)) for index in cell) + "\n")
            for (cell, face), tag in zip(mesh.boundary_faces, mesh.boundary_tags):
                handle.write(f"{int(cell)} {int(face)} {tag}\n")
    except OSError as e:
        raise IoError(f"cannot write mesh file {path}: {e}") from e
    return path


def read_mesh(path):
    path = Path(path)
    try:
        lines = [line.split() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    except OSError as e:
        raise IoError(f"cannot read mesh file {path}: {e}") from e
    try:
        n_vertices, n_cells, n_faces = (int(value) for value in lines[0])
        body = lines[1:]
        if len(body) != n_vertices + n_cells + n_faces:
            raise ValueError(f"expected {n_vertices + n_cells + n_faces} data lines, found {len(body)}")
        vertices = [[float(value) for value in row] for row in body[:n_vertices]]
        cells = [[int(value) for value in row] for row in body[n_vertices:n_vertices + n_cells]]
        face_rows = body[n_vertices + n_cells:]
        faces = [[int(row[0]), int(row[1])] for row in face_rows]
        tags = [row[2] for row in face_rows]
        if any(len(row) != 3 for row in vertices) or any(len(row) != 8 for row in cells):
            raise ValueError("vertices need 3 coordinates and cells 8 vertex indices")
    except (ValueError, IndexError) as e:
        raise IoError(f"malformed mesh file {path}: {e}") from e
    return Mesh(vertices=vertices, cells=cells, boundary_faces=faces, boundary_tags=tags)
