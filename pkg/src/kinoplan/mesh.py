"""Triangular terrain meshes as bidirected edge graphs.

Vertices are 3D points in meters. Every undirected mesh edge is represented
by two directed edges (twins) so a planner can traverse it in either
direction. Edge ordering is deterministic: undirected edges are sorted by
(min endpoint, max endpoint) and the low-to-high direction comes first, so
variable indexing is reproducible across runs.
"""

from __future__ import annotations

import hashlib
import io
import warnings
from pathlib import Path

import numpy as np

from .errors import (
    MeshFormatError,
    MeshParseError,
    MeshValidationError,
    NonManifoldWarning,
)


class MeshGraph:
    """Immutable triangular mesh with its bidirected edge set.

    Attributes:
        vertices: (n_vertices, 3) float64 array, meters.
        faces: (n_faces, 3) int64 array of vertex indices.
        tails, heads: (n_edges,) vertex indices per directed edge.
        vectors: (n_edges, 3) head minus tail.
        lengths: (n_edges,) Euclidean edge lengths, strictly positive.
        twin: (n_edges,) index of the reversed edge; an involution.
    """

    def __init__(self, vertices, faces):
        vertices = np.asarray(vertices, dtype=np.float64)
        faces = np.asarray(faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshValidationError("vertices must be an (n, 3) array")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshValidationError("faces must be an (n, 3) array of vertex triples")
        if not np.all(np.isfinite(vertices)):
            raise MeshValidationError("vertex coordinates must be finite")
        n = len(vertices)
        if faces.size and (faces.min() < 0 or faces.max() >= n):
            raise MeshValidationError("face references a vertex index out of range")
        for f, (a, b, c) in enumerate(faces):
            if a == b or b == c or a == c:
                raise MeshValidationError(f"face {f} is degenerate (repeated vertex)")
        keys = np.sort(faces, axis=1)
        _, first = np.unique(keys, axis=0, return_index=True)
        if faces.shape[0] and len(first) != faces.shape[0]:
            dup = np.setdiff1d(np.arange(faces.shape[0]), first)[0]
            raise MeshValidationError(f"face {dup} duplicates an earlier face")

        self.vertices = vertices
        self.vertices.setflags(write=False)
        self.faces = faces
        self.faces.setflags(write=False)
        self._build_edges()

    def _build_edges(self):
        faces = self.faces
        if faces.shape[0]:
            pairs = np.concatenate(
                [faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]], axis=0
            )
            und = np.sort(pairs, axis=1)
            und, counts = np.unique(und, axis=0, return_counts=True)
            if np.any(counts > 2):
                bad = int(np.argmax(counts > 2))
                warnings.warn(
                    f"edge {tuple(und[bad])} is shared by {counts[bad]} faces",
                    NonManifoldWarning,
                    stacklevel=3,
                )
        else:
            und = np.empty((0, 2), dtype=np.int64)
        # np.unique sorts rows lexicographically, which is exactly the
        # (min endpoint, max endpoint) order the edge numbering contract needs.
        m = und.shape[0]
        tails = np.empty(2 * m, dtype=np.int64)
        heads = np.empty(2 * m, dtype=np.int64)
        tails[0::2], heads[0::2] = und[:, 0], und[:, 1]
        tails[1::2], heads[1::2] = und[:, 1], und[:, 0]
        twin = np.arange(2 * m, dtype=np.int64)
        twin[0::2] += 1
        twin[1::2] -= 1

        vectors = self.vertices[heads] - self.vertices[tails]
        lengths = np.linalg.norm(vectors, axis=1)
        if np.any(lengths <= 0.0):
            i = int(np.argmin(lengths))
            raise MeshValidationError(
                f"zero-length edge between vertices {tails[i]} and {heads[i]}"
            )

        self.tails = tails
        self.heads = heads
        self.twin = twin
        self.vectors = vectors
        self.lengths = lengths
        for arr in (tails, heads, twin, vectors, lengths):
            arr.setflags(write=False)

        out = [[] for _ in range(len(self.vertices))]
        inc = [[] for _ in range(len(self.vertices))]
        for e in range(2 * m):
            out[tails[e]].append(e)
            inc[heads[e]].append(e)
        self.out_edges = tuple(np.array(v, dtype=np.int64) for v in out)
        self.in_edges = tuple(np.array(v, dtype=np.int64) for v in inc)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_edges(self):
        """Directed edge count (twice the undirected count)."""
        return len(self.tails)

    def __repr__(self):
        return (
            f"MeshGraph(vertices={self.n_vertices}, faces={self.n_faces}, "
            f"directed_edges={self.n_edges})"
        )


def nearest_vertex(mesh, point):
    """Id of the mesh vertex closest to an arbitrary 3D point.

    Ties break toward the lowest vertex index.
    """
    point = np.asarray(point, dtype=np.float64).reshape(3)
    d2 = np.sum((mesh.vertices - point) ** 2, axis=1)
    return int(np.argmin(d2))


def _meaningful_lines(text):
    """Yield (line number, stripped content) skipping blanks and # comments."""
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def parse_off(text):
    """Parse an ASCII OFF file into a MeshGraph."""
    lines = _meaningful_lines(text)
    try:
        no, header = next(lines)
    except StopIteration:
        raise MeshParseError("empty OFF file") from None
    counts = None
    if header == "OFF":
        try:
            no, counts_line = next(lines)
        except StopIteration:
            raise MeshParseError("missing OFF counts line") from None
    elif header.startswith("OFF"):
        counts_line = header[3:].strip()
    else:
        raise MeshParseError("expected OFF header", no)
    parts = counts_line.split()
    if len(parts) != 3:
        raise MeshParseError("expected 'vertices faces edges' counts", no)
    try:
        n_vertices, n_faces = int(parts[0]), int(parts[1])
    except ValueError:
        raise MeshParseError("counts must be integers", no) from None

    vertices = np.empty((n_vertices, 3), dtype=np.float64)
    for i in range(n_vertices):
        try:
            no, line = next(lines)
        except StopIteration:
            raise MeshParseError(f"expected {n_vertices} vertices, found {i}") from None
        parts = line.split()
        if len(parts) != 3:
            raise MeshParseError("vertex line must hold exactly 3 coordinates", no)
        try:
            vertices[i] = [float(p) for p in parts]
        except ValueError:
            raise MeshParseError("bad vertex coordinate", no) from None

    faces = np.empty((n_faces, 3), dtype=np.int64)
    for i in range(n_faces):
        try:
            no, line = next(lines)
        except StopIteration:
            raise MeshParseError(f"expected {n_faces} faces, found {i}") from None
        parts = line.split()
        try:
            sides = int(parts[0])
        except (ValueError, IndexError):
            raise MeshParseError("face line must start with a vertex count", no) from None
        if sides != 3:
            raise MeshFormatError(f"line {no}: only triangular faces supported, got {sides}")
        if len(parts) != 4:
            raise MeshParseError("triangular face needs exactly 3 vertex indices", no)
        try:
            faces[i] = [int(p) for p in parts[1:4]]
        except ValueError:
            raise MeshParseError("bad face index", no) from None
    return MeshGraph(vertices, faces)


def parse_obj(text):
    """Parse a Wavefront OBJ file (v/f subset, triangles only) into a MeshGraph."""
    vertices = []
    faces = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshParseError("vertex line must hold 3 coordinates", no)
            try:
                vertices.append([float(p) for p in parts[1:4]])
            except ValueError:
                raise MeshParseError("bad vertex coordinate", no) from None
        elif tag == "f":
            refs = parts[1:]
            if len(refs) > 3:
                raise MeshFormatError(
                    f"line {no}: face with {len(refs)} vertices not supported "
                    "(triangles only, no fan-triangulation)"
                )
            if len(refs) < 3:
                raise MeshParseError("face needs 3 vertex references", no)
            face = []
            for ref in refs:
                token = ref.split("/", 1)[0]
                try:
                    idx = int(token)
                except ValueError:
                    raise MeshParseError(f"bad face reference {ref!r}", no) from None
                if idx <= 0:
                    raise MeshParseError(
                        "only positive 1-based face indices supported", no
                    )
                face.append(idx - 1)
            faces.append(face)
        # other OBJ record types (vn, vt, g, o, s, mtllib, usemtl) carry no
        # geometry we use and are skipped
    n = len(vertices)
    for f in faces:
        if max(f) >= n:
            raise MeshParseError(f"face references vertex {max(f) + 1} of {n}")
    return MeshGraph(
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
    )


def parse_mesh(source, fmt=None):
    """Parse OFF or OBJ from a path, text, or file-like object.

    Args:
        source: Path/str filename, or an open text stream.
        fmt: "off" or "obj"; inferred from the filename suffix when omitted.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        text = path.read_text()
        if fmt is None:
            fmt = path.suffix.lstrip(".").lower()
    else:
        text = source.read()
    if fmt is None:
        raise MeshFormatError("mesh format not given and not inferable from name")
    fmt = fmt.lower()
    if fmt == "off":
        return parse_off(text)
    if fmt == "obj":
        return parse_obj(text)
    raise MeshFormatError(f"unsupported mesh format {fmt!r}")


def write_off(mesh, target=None):
    """Serialize a MeshGraph as canonical OFF text.

    Floats use repr so parse -> write -> parse round-trips exactly.
    Writes to `target` (path or stream) when given, else returns the text.
    """
    buf = io.StringIO()
    buf.write("OFF\n")
    buf.write(f"{mesh.n_vertices} {mesh.n_faces} 0\n")
    for x, y, z in mesh.vertices:
        buf.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
    for a, b, c in mesh.faces:
        buf.write(f"3 {a} {b} {c}\n")
    text = buf.getvalue()
    if target is None:
        return text
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    else:
        target.write(text)
    return None


def content_hash(mesh):
    """SHA-256 hex digest of the canonical OFF serialization."""
    return hashlib.sha256(write_off(mesh).encode()).hexdigest()
