"""Scan ingestion and synthetic scene-pair generation.

Supported inputs: PLY 1.0 (ascii and binary_little_endian), a v/vn/f subset
of OBJ, whitespace-separated 4x4 or 3x4 pose files, and a small key-value
manifest format describing model/scene/pose triples. The synthetic generator
builds seeded desk-scale pairs (bumpy height field, bumpy sphere,
superellipsoid) with optional partial-view crops and nuisance schedules.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np

from .errors import NotARigidTransform, ParseError, UnsupportedEncoding
from .evaluate import ScenePair
from .geometry import (
    PointCloud,
    RigidTransform,
    Surface,
    TriangleMesh,
    _submesh,
    apply_transform,
    estimate_normals,
    mesh_vertex_normals,
    random_transform,
)
from .nuisance import NuisanceConfig, SceneComposition, apply_nuisance, composition_of

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


@dataclass
class _PlyElement:
    name: str
    count: int
    properties: list  # ("scalar", name, dtype) | ("list", name, count_dtype, item_dtype)


def _parse_ply_header(data: bytes):
    pos = 0
    line_no = 0
    fmt = None
    elements: list[_PlyElement] = []

    def next_line():
        nonlocal pos, line_no
        end = data.find(b"\n", pos)
        if end < 0:
            raise ParseError(f"unterminated header, missing end_header (line {line_no + 1})")
        raw = data[pos : end]
        pos = end + 1
        line_no += 1
        return raw.decode("ascii", errors="replace").strip()

    if next_line() != "ply":
        raise ParseError("not a PLY file: missing 'ply' magic (line 1)")
    while True:
        line = next_line()
        if line == "end_header":
            break
        parts = line.split()
        if not parts or parts[0] == "comment" or parts[0] == "obj_info":
            continue
        if parts[0] == "format":
            if len(parts) < 3:
                raise ParseError(f"malformed format line (line {line_no})")
            fmt = parts[1]
            if fmt == "binary_big_endian":
                raise UnsupportedEncoding(f"big-endian PLY is unsupported (line {line_no})")
            if fmt not in ("ascii", "binary_little_endian"):
                raise ParseError(f"unknown PLY format {fmt!r} (line {line_no})")
        elif parts[0] == "element":
            if len(parts) != 3:
                raise ParseError(f"malformed element line (line {line_no})")
            try:
                count = int(parts[2])
            except ValueError:
                raise ParseError(f"bad element count {parts[2]!r} (line {line_no})") from None
            elements.append(_PlyElement(parts[1], count, []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError(f"property before any element (line {line_no})")
            if parts[1] == "list":
                if len(parts) != 5:
                    raise ParseError(f"malformed list property (line {line_no})")
                try:
                    elements[-1].properties.append(
                        ("list", parts[4], _PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]])
                    )
                except KeyError as e:
                    raise ParseError(f"unknown PLY type {e.args[0]!r} (line {line_no})") from None
            else:
                if len(parts) != 3:
                    raise ParseError(f"malformed property line (line {line_no})")
                try:
                    elements[-1].properties.append(("scalar", parts[2], _PLY_TYPES[parts[1]]))
                except KeyError as e:
                    raise ParseError(f"unknown PLY type {e.args[0]!r} (line {line_no})") from None
        else:
            raise ParseError(f"unrecognized header keyword {parts[0]!r} (line {line_no})")
    if fmt is None:
        raise ParseError("header has no format line")
    return fmt, elements, pos


def _read_ascii_elements(text: str, elements):
    tokens = text.split()
    cursor = 0

    def take(n: int):
        nonlocal cursor
        if cursor + n > len(tokens):
            raise ParseError(f"unexpected end of data at token {cursor}")
        out = tokens[cursor : cursor + n]
        cursor += n
        return out

    tables = {}
    for el in elements:
        scalars = [p for p in el.properties if p[0] == "scalar"]
        lists = [p for p in el.properties if p[0] == "list"]
        rows = {p[1]: [] for p in scalars}
        list_rows = {p[1]: [] for p in lists}
        for _ in range(el.count):
            for kind, name, *rest in el.properties:
                if kind == "scalar":
                    tok = take(1)[0]
                    try:
                        rows[name].append(float(tok))
                    except ValueError:
                        raise ParseError(f"bad number {tok!r} at token {cursor - 1}") from None
                else:
                    try:
                        n = int(float(take(1)[0]))
                        list_rows[name].append([int(float(t)) for t in take(n)])
                    except ValueError:
                        raise ParseError(f"bad list entry near token {cursor - 1}") from None
        tables[el.name] = (
            {k: np.asarray(v) for k, v in rows.items()},
            list_rows,
        )
    return tables


def _read_binary_elements(data: bytes, offset: int, elements):
    tables = {}
    pos = offset
    for el in elements:
        has_list = any(p[0] == "list" for p in el.properties)
        if not has_list:
            dtype = np.dtype([(p[1], "<" + p[2]) for p in el.properties])
            need = dtype.itemsize * el.count
            if pos + need > len(data):
                raise ParseError(f"truncated binary data at byte {pos}")
            arr = np.frombuffer(data, dtype=dtype, count=el.count, offset=pos)
            pos += need
            tables[el.name] = (
                {p[1]: arr[p[1]].astype(np.float64) for p in el.properties},
                {},
            )
            continue
        rows = {p[1]: [] for p in el.properties if p[0] == "scalar"}
        list_rows = {p[1]: [] for p in el.properties if p[0] == "list"}
        for _ in range(el.count):
            for kind, name, *rest in el.properties:
                if kind == "scalar":
                    dt = np.dtype("<" + rest[0])
                    if pos + dt.itemsize > len(data):
                        raise ParseError(f"truncated binary data at byte {pos}")
                    rows[name].append(float(np.frombuffer(data, dt, 1, pos)[0]))
                    pos += dt.itemsize
                else:
                    count_dt = np.dtype("<" + rest[0])
                    item_dt = np.dtype("<" + rest[1])
                    if pos + count_dt.itemsize > len(data):
                        raise ParseError(f"truncated binary data at byte {pos}")
                    n = int(np.frombuffer(data, count_dt, 1, pos)[0])
                    pos += count_dt.itemsize
                    need = item_dt.itemsize * n
                    if pos + need > len(data):
                        raise ParseError(f"truncated binary data at byte {pos}")
                    list_rows[name].append(
                        np.frombuffer(data, item_dt, n, pos).astype(np.int64).tolist()
                    )
                    pos += need
        tables[el.name] = ({k: np.asarray(v) for k, v in rows.items()}, list_rows)
    return tables


def _faces_to_triangles(faces) -> np.ndarray:
    tris = []
    for f in faces:
        if len(f) < 3:
            raise ParseError(f"face with {len(f)} indices")
        for i in range(1, len(f) - 1):  # fan triangulation for polygons
            tris.append((f[0], f[i], f[i + 1]))
    return np.asarray(tris, dtype=np.int64)


def load_ply(path):
    """Load a PLY file as a TriangleMesh (when faces are present) or a
    PointCloud. Reads x/y/z, optional nx/ny/nz, and face vertex lists."""
    data = Path(path).read_bytes()
    fmt, elements, body_offset = _parse_ply_header(data)
    if fmt == "ascii":
        tables = _read_ascii_elements(data[body_offset:].decode("ascii", errors="replace"), elements)
    else:
        tables = _read_binary_elements(data, body_offset, elements)
    if "vertex" not in tables:
        raise ParseError("PLY file has no vertex element")
    vcols, _ = tables["vertex"]
    for c in ("x", "y", "z"):
        if c not in vcols:
            raise ParseError(f"vertex element lacks property {c!r}")
    pts = np.column_stack([vcols["x"], vcols["y"], vcols["z"]])
    normals = None
    if all(c in vcols for c in ("nx", "ny", "nz")):
        normals = np.column_stack([vcols["nx"], vcols["ny"], vcols["nz"]])
        lengths = np.linalg.norm(normals, axis=1)
        lengths[lengths == 0] = 1.0
        normals = normals / lengths[:, None]
    faces = None
    if "face" in tables:
        _, lists = tables["face"]
        for key in ("vertex_indices", "vertex_index"):
            if key in lists:
                faces = lists[key]
                break
    if faces:
        return TriangleMesh(pts, _faces_to_triangles(faces), normals)
    return PointCloud(pts, normals)


def save_ply(path, geometry, binary: bool = True) -> None:
    """Write a cloud or mesh; binary little-endian double precision by
    default so load/save round-trips are coordinate-exact."""
    if isinstance(geometry, TriangleMesh):
        pts, normals, tris = geometry.vertices, geometry.vertex_normals, geometry.triangles
    elif isinstance(geometry, PointCloud):
        pts, normals, tris = geometry.points, geometry.normals, None
    else:
        raise TypeError(f"cannot save {type(geometry)!r}")
    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {len(pts)}")
    header.extend(f"property double {c}" for c in ("x", "y", "z"))
    if normals is not None:
        header.extend(f"property double {c}" for c in ("nx", "ny", "nz"))
    if tris is not None:
        header.append(f"element face {len(tris)}")
        header.append("property list uchar int32 vertex_indices")
    header.append("end_header")
    vdata = pts if normals is None else np.hstack([pts, normals])
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            f.write(np.ascontiguousarray(vdata, dtype="<f8").tobytes())
            if tris is not None:
                rec = np.empty(
                    len(tris), dtype=np.dtype([("n", "<u1"), ("idx", "<i4", (3,))])
                )
                rec["n"] = 3
                rec["idx"] = tris
                f.write(rec.tobytes())
        else:
            lines = [" ".join(f"{v:.17g}" for v in row) for row in vdata]
            if tris is not None:
                lines.extend("3 " + " ".join(str(i) for i in row) for row in tris)
            f.write(("\n".join(lines) + "\n").encode("ascii"))


def load_obj(path):
    """Subset OBJ loader: v, vn and triangular f records; anything else is
    ignored with a warning. Returns a mesh when faces exist, else a cloud."""
    verts, normals, faces = [], [], []
    ignored = set()
    with open(path, "r", encoding="utf-8", errors="replace") as f:
        for line_no, line in enumerate(f, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ParseError(f"short vertex record (line {line_no})")
                verts.append([float(x) for x in parts[1:4]])
            elif tag == "vn":
                if len(parts) < 4:
                    raise ParseError(f"short normal record (line {line_no})")
                normals.append([float(x) for x in parts[1:4]])
            elif tag == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    ignored.add("non-triangle faces")
                    continue
                faces.append([i - 1 for i in idx])
            else:
                ignored.add(tag)
    if ignored:
        warnings.warn(f"ignored OBJ records: {sorted(ignored)}", stacklevel=2)
    pts = np.asarray(verts, dtype=np.float64)
    nrm = None
    if normals and len(normals) == len(verts):
        nrm = np.asarray(normals, dtype=np.float64)
        lengths = np.linalg.norm(nrm, axis=1)
        lengths[lengths == 0] = 1.0
        nrm = nrm / lengths[:, None]
    if faces:
        return TriangleMesh(pts, np.asarray(faces, dtype=np.int64), nrm)
    return PointCloud(pts, nrm)


def load_geometry(path):
    suffix = Path(path).suffix.lower()
    if suffix == ".ply":
        return load_ply(path)
    if suffix == ".obj":
        return load_obj(path)
    raise ParseError(f"unsupported geometry format {suffix!r}")


# ---------------------------------------------------------------------------
# poses

def load_pose(path, transpose: bool = False) -> RigidTransform:
    """Pose from 16 (4x4) or 12 (3x4) whitespace-separated reals, row-major.
    Rotation blocks with orthogonality drift up to 1e-3 are projected to the
    nearest rotation; anything worse (or a reflection) is rejected."""
    tokens = Path(path).read_text().split()
    try:
        vals = [float(t) for t in tokens]
    except ValueError as e:
        raise ParseError(f"pose file {path}: non-numeric token {e}") from None
    if len(vals) == 16:
        m = np.asarray(vals).reshape(4, 4)
        if np.abs(m[3] - np.array([0, 0, 0, 1.0])).max() > 1e-6:
            raise NotARigidTransform("last row of a 4x4 pose must be [0 0 0 1]")
        m = m[:3]
    elif len(vals) == 12:
        m = np.asarray(vals).reshape(3, 4)
    else:
        raise ParseError(f"pose file {path}: expected 12 or 16 numbers, got {len(vals)}")
    r = m[:, :3].T if transpose else m[:, :3]
    drift = np.abs(r.T @ r - np.eye(3)).max()
    if drift > 1e-3:
        raise NotARigidTransform(f"rotation drift {drift:.2e} exceeds 1e-3")
    if np.linalg.det(r) < 0:
        raise NotARigidTransform("pose rotation is a reflection")
    u, _, vt = np.linalg.svd(r)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1
        r = u @ vt
    return RigidTransform(r, m[:, 3])


def save_pose(path, transform: RigidTransform) -> None:
    rows = transform.matrix()
    text = "\n".join(" ".join(f"{v:.17g}" for v in row) for row in rows)
    Path(path).write_text(text + "\n")


# ---------------------------------------------------------------------------
# manifests

@dataclass
class ManifestEntry:
    model: str
    scene: str
    pose: str | None = None
    pose_inline: list[float] | None = None
    overlap: float | None = None
    tag: str = ""


@dataclass
class DatasetManifest:
    name: str
    entries: list[ManifestEntry]
    unit_scale: float = 1.0
    transpose_poses: bool = False
    base_dir: Path = Path(".")


def parse_manifest(path) -> DatasetManifest:
    path = Path(path)
    name = path.stem
    unit_scale = 1.0
    transpose = False
    entries: list[ManifestEntry] = []
    current: dict | None = None

    def flush(line_no):
        nonlocal current
        if current is None:
            return
        if "model" not in current or "scene" not in current:
            raise ParseError(f"pair before line {line_no} lacks model/scene")
        entries.append(
            ManifestEntry(
                model=current["model"],
                scene=current["scene"],
                pose=current.get("pose"),
                pose_inline=current.get("pose_inline"),
                overlap=float(current["overlap"]) if "overlap" in current else None,
                tag=current.get("tag", f"pair{len(entries)}"),
            )
        )
        current = None

    for line_no, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[pair]":
            flush(line_no)
            current = {}
            continue
        if ":" not in line:
            raise ParseError(f"manifest {path}: expected 'key: value' (line {line_no})")
        key, value = (s.strip() for s in line.split(":", 1))
        if current is None:
            if key == "name":
                name = value
            elif key == "unit_scale":
                unit_scale = float(value)
            elif key == "transpose_poses":
                transpose = value.lower() in ("1", "true", "yes")
            else:
                raise ParseError(f"manifest {path}: unknown header key {key!r} (line {line_no})")
        else:
            if key == "pose_inline":
                current["pose_inline"] = [float(t) for t in value.split()]
            else:
                current[key] = value
    flush(line_no="end")
    return DatasetManifest(name, entries, unit_scale, transpose, path.parent)


def _scale_geometry(geom, scale: float):
    if scale == 1.0:
        return geom
    if isinstance(geom, TriangleMesh):
        return TriangleMesh(geom.vertices * scale, geom.triangles, geom.vertex_normals)
    return PointCloud(geom.points * scale, geom.normals)


def surface_from_geometry(geom) -> Surface:
    """Wrap a loaded cloud/mesh, estimating normals when the file had none."""
    if isinstance(geom, TriangleMesh):
        if geom.vertex_normals is None:
            geom = TriangleMesh(geom.vertices, geom.triangles, mesh_vertex_normals(geom))
        return Surface.from_mesh(geom)
    if geom.normals is None:
        k = min(10, len(geom) - 1)
        geom, _ = estimate_normals(geom, k=k)
    return Surface(geom)


def load_manifest(
    path,
    overlap_min: float = 0.0,
    compute_composition: bool = True,
) -> tuple[list[ScenePair], list[str]]:
    """Scene pairs from a manifest; per-entry failures are collected rather
    than fatal, but a manifest where every entry fails raises. Pairs whose
    overlap falls below `overlap_min` are filtered out."""
    manifest = parse_manifest(path)
    pairs: list[ScenePair] = []
    errors: list[str] = []
    for entry in manifest.entries:
        try:
            model = surface_from_geometry(
                _scale_geometry(load_geometry(manifest.base_dir / entry.model), manifest.unit_scale)
            )
            scene = surface_from_geometry(
                _scale_geometry(load_geometry(manifest.base_dir / entry.scene), manifest.unit_scale)
            )
            if entry.pose_inline is not None:
                vals = np.asarray(entry.pose_inline, dtype=np.float64)
                if vals.size == 16:
                    gt = RigidTransform.from_matrix(vals.reshape(4, 4))
                elif vals.size == 12:
                    gt = RigidTransform.from_matrix(vals.reshape(3, 4))
                else:
                    raise ParseError("pose_inline needs 12 or 16 numbers")
            elif entry.pose is not None:
                gt = load_pose(manifest.base_dir / entry.pose, manifest.transpose_poses)
            else:
                gt = RigidTransform.identity()
            if manifest.unit_scale != 1.0:
                gt = RigidTransform(gt.rotation, gt.translation * manifest.unit_scale)
            pair = ScenePair.build(
                model, scene, gt, tag=entry.tag,
                compute_composition=compute_composition and entry.overlap is None,
            )
            if entry.overlap is not None:
                pair.composition = SceneComposition(None, None, entry.overlap)
            pairs.append(pair)
        except Exception as e:  # collected per entry
            errors.append(f"{entry.tag}: {type(e).__name__}: {e}")
    if manifest.entries and not pairs:
        raise ParseError(f"every manifest entry failed: {errors}")
    if overlap_min > 0.0:
        pairs = [
            p
            for p in pairs
            if p.composition is None or p.composition.overlap >= overlap_min
        ]
    return pairs, errors


# ---------------------------------------------------------------------------
# synthetic pairs

@dataclass
class SyntheticSpec:
    """Seeded recipe for a desk-scale scene pair."""

    shape: str = "bumpy-field"  # bumpy-field | sphere | superellipsoid
    density: int = 100
    bump_amplitude: float = 5.0
    bump_frequency: float = 0.15
    crop: str = "none"  # none | halfspace | cone
    crop_fraction: float = 0.5
    seed: int = 0
    nuisances: list[NuisanceConfig] = dataclass_field(default_factory=list)

    def __post_init__(self):
        if self.shape not in ("bumpy-field", "sphere", "superellipsoid"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.shape == "bumpy-field" and self.density < 23:
            raise ValueError("density too low: need at least ~500 vertices")
        if self.bump_amplitude < 0:
            raise ValueError("bump amplitude must be non-negative")
        if self.crop not in ("none", "halfspace", "cone"):
            raise ValueError(f"unknown crop {self.crop!r}")
        if not (0.0 < self.crop_fraction <= 1.0):
            raise ValueError("crop_fraction must be in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        nuis = [
            NuisanceConfig(x["kind"], float(x["level"]), int(x.get("seed", 0)))
            for x in d.get("nuisances", [])
        ]
        return cls(
            shape=d.get("shape", "bumpy-field"),
            density=int(d.get("density", 100)),
            bump_amplitude=float(d.get("bump_amplitude", 5.0)),
            bump_frequency=float(d.get("bump_frequency", 0.15)),
            crop=d.get("crop", "none"),
            crop_fraction=float(d.get("crop_fraction", 0.5)),
            seed=int(d.get("seed", 0)),
            nuisances=nuis,
        )


def _grid_triangles(n: int) -> np.ndarray:
    idx = np.arange(n * n).reshape(n, n)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    upper = np.column_stack([v00, v10, v11])
    lower = np.column_stack([v00, v11, v01])
    return np.concatenate([upper, lower])


def _bump_value(u: np.ndarray, v: np.ndarray, x, y, amplitude, frequency, rng) -> np.ndarray:
    """Asymmetric ridged bump pattern: one dominant wave along a random
    direction plus two weaker cross terms. Zero-mean-ish, O(amplitude)."""
    phases = rng.uniform(0.0, 2.0 * math.pi, size=5)
    f = frequency
    return amplitude * (
        np.sin(f * u + phases[0])
        + 0.35 * np.sin(1.7 * f * v + phases[1]) * np.sin(0.9 * f * u + phases[2])
        + 0.2 * np.sin(2.3 * f * x + phases[3]) * np.cos(1.3 * f * y + phases[4])
    )


def _bumpy_field_mesh(spec: SyntheticSpec, rng: np.random.Generator) -> TriangleMesh:
    n = spec.density
    coords = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    x, y = np.meshgrid(coords, coords, indexing="ij")
    theta = rng.uniform(0.0, 2.0 * math.pi)
    u = math.cos(theta) * x + math.sin(theta) * y
    v = -math.sin(theta) * x + math.cos(theta) * y
    z = _bump_value(u, v, x, y, spec.bump_amplitude, spec.bump_frequency, rng)
    verts = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    mesh = TriangleMesh(verts, _grid_triangles(n))
    return TriangleMesh(verts, mesh.triangles, mesh_vertex_normals(mesh))


_ICOSAHEDRON_VERTS = None
_ICOSAHEDRON_FACES = None


def _icosahedron():
    global _ICOSAHEDRON_VERTS, _ICOSAHEDRON_FACES
    if _ICOSAHEDRON_VERTS is None:
        phi = (1.0 + math.sqrt(5.0)) / 2.0
        v = np.array(
            [
                (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
                (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
                (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
            ],
            dtype=np.float64,
        )
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        f = np.array(
            [
                (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
                (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
                (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
                (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
            ],
            dtype=np.int64,
        )
        _ICOSAHEDRON_VERTS, _ICOSAHEDRON_FACES = v, f
    return _ICOSAHEDRON_VERTS.copy(), _ICOSAHEDRON_FACES.copy()


def _icosphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    verts, faces = _icosahedron()
    verts = list(verts)
    for _ in range(level):
        cache: dict[tuple[int, int], int] = {}
        new_faces = []

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                m /= np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(m)
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        faces = np.asarray(new_faces, dtype=np.int64)
    return np.asarray(verts), faces


def _sphere_mesh(spec: SyntheticSpec, rng: np.random.Generator) -> TriangleMesh:
    target = spec.density * spec.density
    level = 0
    while 10 * 4 ** (level + 1) + 2 <= target and level < 6:
        level += 1
    unit, faces = _icosphere(level)
    radius = 30.0
    bump = np.zeros(len(unit))
    if spec.bump_amplitude > 0:
        dirs = rng.normal(size=(3, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        phases = rng.uniform(0.0, 2.0 * math.pi, size=3)
        k = spec.bump_frequency * radius
        bump = spec.bump_amplitude * (
            np.sin(k * (unit @ dirs[0]) + phases[0])
            + 0.5 * np.sin(1.7 * k * (unit @ dirs[1]) + phases[1])
            * np.sin(0.9 * k * (unit @ dirs[2]) + phases[2])
        )
    verts = unit * (radius + bump)[:, None]
    mesh = TriangleMesh(verts, faces)
    return TriangleMesh(verts, faces, mesh_vertex_normals(mesh))


def _superellipsoid_mesh(spec: SyntheticSpec, rng: np.random.Generator) -> TriangleMesh:
    n = max(spec.density, 24)
    e1, e2 = 0.8, 1.2
    half = (30.0, 24.0, 18.0)

    def spow(w, e):
        return np.sign(w) * np.abs(w) ** e

    lat = np.linspace(-math.pi / 2 * 0.95, math.pi / 2 * 0.95, n)
    lon = np.linspace(-math.pi, math.pi, n, endpoint=False)
    latg, long_ = np.meshgrid(lat, lon, indexing="ij")
    cu, su = np.cos(latg), np.sin(latg)
    cv, sv = np.cos(long_), np.sin(long_)
    x = half[0] * spow(cu, e1) * spow(cv, e2)
    y = half[1] * spow(cu, e1) * spow(sv, e2)
    z = half[2] * spow(su, e1)
    verts = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    if spec.bump_amplitude > 0:
        unit = verts / np.linalg.norm(verts, axis=1, keepdims=True)
        dirs = rng.normal(size=(2, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        phases = rng.uniform(0.0, 2.0 * math.pi, size=2)
        k = spec.bump_frequency * half[0]
        bump = spec.bump_amplitude * (
            np.sin(k * (unit @ dirs[0]) + phases[0])
            + 0.5 * np.cos(1.6 * k * (unit @ dirs[1]) + phases[1])
        )
        verts = verts + unit * bump[:, None]
    # Grid triangulation with longitude wraparound.
    idx = np.arange(n * n).reshape(n, n)
    tris = []
    for i in range(n - 1):
        for j in range(n):
            j2 = (j + 1) % n
            tris.append((idx[i, j], idx[i, j2], idx[i + 1, j2]))
            tris.append((idx[i, j], idx[i + 1, j2], idx[i + 1, j]))
    mesh = TriangleMesh(verts, np.asarray(tris, dtype=np.int64))
    return TriangleMesh(verts, mesh.triangles, mesh_vertex_normals(mesh))


def _crop_mask(verts: np.ndarray, spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    centroid = verts.mean(axis=0)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    if spec.crop == "halfspace":
        t = (verts - centroid) @ direction
        cut = np.quantile(t, 1.0 - spec.crop_fraction)
        return t >= cut
    # view cone about a random axis from the centroid
    offsets = verts - centroid
    lengths = np.linalg.norm(offsets, axis=1)
    lengths[lengths == 0] = 1.0
    cosines = (offsets @ direction) / lengths
    cut = np.quantile(cosines, 1.0 - spec.crop_fraction)
    return cosines >= cut


def generate_synthetic(spec: SyntheticSpec) -> ScenePair:
    """Deterministic scene pair: base mesh, seeded rigid motion, optional
    partial-view crop of the scene, then the nuisance schedule."""
    rng = np.random.default_rng(spec.seed)
    if spec.shape == "bumpy-field":
        mesh = _bumpy_field_mesh(spec, rng)
    elif spec.shape == "sphere":
        mesh = _sphere_mesh(spec, rng)
    else:
        mesh = _superellipsoid_mesh(spec, rng)
    model = Surface.from_mesh(mesh)
    extent = float(np.linalg.norm(mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)))
    gt = random_transform(rng, max_translation=0.5 * extent)
    scene_mesh = apply_transform(mesh, gt)
    if spec.crop != "none":
        scene_mesh = _submesh(scene_mesh, _crop_mask(scene_mesh.vertices, spec, rng))
    scene = Surface.from_mesh(scene_mesh)
    for config in spec.nuisances:
        scene = apply_nuisance(scene, config, model.mr)
    return ScenePair.build(
        model, scene, gt, tag=f"synthetic-{spec.shape}-seed{spec.seed}"
    )


def write_pair(pair: ScenePair, outdir, name: str = "pair") -> dict[str, Path]:
    """PLY + pose + manifest stanza for a pair; reloadable via load_manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    model_path = outdir / f"{name}_model.ply"
    scene_path = outdir / f"{name}_scene.ply"
    pose_path = outdir / f"{name}_pose.txt"
    manifest_path = outdir / f"{name}_manifest.txt"
    save_ply(model_path, pair.model.mesh if pair.model.mesh is not None else pair.model.cloud)
    save_ply(scene_path, pair.scene.mesh if pair.scene.mesh is not None else pair.scene.cloud)
    save_pose(pose_path, pair.gt)
    manifest_path.write_text(
        f"name: {name}\n\n[pair]\nmodel: {model_path.name}\n"
        f"scene: {scene_path.name}\npose: {pose_path.name}\ntag: {pair.tag or name}\n"
    )
    return {
        "model": model_path,
        "scene": scene_path,
        "pose": pose_path,
        "manifest": manifest_path,
    }
