"""OBJ and PLY readers, OBJ writer, PLY point-cloud writer."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import EmptyMesh, ParseError
from .mesh import UV_TOL, TriMesh, check_face_indices


def load_mesh(path) -> TriMesh:
    """Read an OBJ or PLY (ASCII or binary) file into a TriMesh.

    Polygons with more than three corners are fan-triangulated as
    (v0, v1, v2), (v0, v2, v3), ...
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    ext = path.suffix.lower()
    if ext == ".obj":
        mesh = _load_obj(path)
    elif ext == ".ply":
        mesh = _load_ply(path)
    else:
        raise ParseError(f"unsupported extension {ext!r}", path)
    if mesh.n_faces == 0:
        raise EmptyMesh(f"{path}: no faces")
    return mesh


def _fan(poly):
    return [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]


def _obj_index(tok, count, path, lineno):
    i = int(tok)
    if i > 0:
        return i - 1
    if i < 0:
        return count + i
    raise ParseError("OBJ indices are 1-based; got 0", path, lineno)


def _load_obj(path: Path) -> TriMesh:
    verts, texcoords, vnormals = [], [], []
    faces, face_vt, face_vn, face_lines = [], [], [], []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            tag = parts[0]
            try:
                if tag == "v":
                    if len(parts) < 4:
                        raise ValueError("vertex needs 3 coordinates")
                    verts.append([float(x) for x in parts[1:4]])
                elif tag == "vt":
                    if len(parts) < 3:
                        raise ValueError("vt needs 2 coordinates")
                    texcoords.append([float(x) for x in parts[1:3]])
                elif tag == "vn":
                    if len(parts) < 4:
                        raise ValueError("vn needs 3 coordinates")
                    vnormals.append([float(x) for x in parts[1:4]])
                elif tag == "f":
                    if len(parts) < 4:
                        raise ValueError("face needs at least 3 corners")
                    vi, ti, ni = [], [], []
                    for corner in parts[1:]:
                        fields = corner.split("/")
                        vi.append(_obj_index(fields[0], len(verts), path, lineno))
                        ti.append(_obj_index(fields[1], len(texcoords), path, lineno)
                                  if len(fields) > 1 and fields[1] else None)
                        ni.append(_obj_index(fields[2], len(vnormals), path, lineno)
                                  if len(fields) > 2 and fields[2] else None)
                    for tri in _fan(list(range(len(vi)))):
                        faces.append([vi[k] for k in tri])
                        face_vt.append([ti[k] for k in tri])
                        face_vn.append([ni[k] for k in tri])
                        face_lines.append(lineno)
            except ParseError:
                raise
            except (ValueError, IndexError) as exc:
                raise ParseError(f"malformed {tag!r} record ({exc})", path, lineno) from None

    vertices = np.array(verts, dtype=np.float64).reshape(-1, 3)
    check_face_indices(faces, len(vertices), path, face_lines)

    uvs = None
    if faces and all(t is not None for tri in face_vt for t in tri):
        tc = np.array(texcoords, dtype=np.float64).reshape(-1, 2)
        idx = np.array(face_vt, dtype=np.int64)
        bad = np.nonzero(((idx < 0) | (idx >= len(tc))).any(axis=1))[0]
        if len(bad):
            raise ParseError("face references missing texture coordinate",
                             path, face_lines[bad[0]])
        uvs = tc[idx]
        out = np.nonzero(((uvs < -UV_TOL) | (uvs > 1 + UV_TOL)).reshape(len(idx), -1).any(axis=1))[0]
        if len(out):
            raise ParseError("texture coordinate outside [0, 1]", path, face_lines[out[0]])
        uvs = np.clip(uvs, 0.0, 1.0)

    normals = None
    if faces and vnormals and all(n is not None for tri in face_vn for n in tri):
        normals = _per_vertex_normals(len(vertices), faces, face_vn, vnormals)

    return TriMesh(vertices, np.array(faces, dtype=np.int64).reshape(-1, 3),
                   normals=normals, uvs=uvs)


def _per_vertex_normals(n_vertices, faces, face_vn, vnormals):
    # Only kept when each vertex maps to a single normal record.
    assign = [-1] * n_vertices
    for tri, ntri in zip(faces, face_vn):
        for v, n in zip(tri, ntri):
            if n < 0 or n >= len(vnormals):
                return None
            if assign[v] == -1:
                assign[v] = n
            elif assign[v] != n and vnormals[assign[v]] != vnormals[n]:
                return None
    if min(assign) < 0:
        return None
    n = np.array([vnormals[i] for i in assign], dtype=np.float64)
    ln = np.linalg.norm(n, axis=1)
    if np.any(ln < 1e-12):
        return None
    return n / ln[:, None]


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _parse_ply_header(fh, path):
    first = fh.readline().strip()
    if first != b"ply":
        raise ParseError("missing 'ply' magic", path, 1)
    fmt = None
    elements = []
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            raise ParseError("unterminated header", path, lineno)
        parts = raw.decode("ascii", errors="replace").split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append({"name": parts[1], "count": int(parts[2]), "props": []})
        elif parts[0] == "property":
            if not elements:
                raise ParseError("property before element", path, lineno)
            if parts[1] == "list":
                if parts[2] not in _PLY_TYPES or parts[3] not in _PLY_TYPES:
                    raise ParseError("unknown list type", path, lineno)
                elements[-1]["props"].append((parts[4], "list", parts[2], parts[3]))
            else:
                if parts[1] not in _PLY_TYPES:
                    raise ParseError(f"unknown type {parts[1]!r}", path, lineno)
                elements[-1]["props"].append((parts[2], parts[1]))
        elif parts[0] == "end_header":
            break
        else:
            raise ParseError(f"unexpected header line {parts[0]!r}", path, lineno)
    if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
        raise ParseError(f"unknown PLY format {fmt!r}", path)
    return fmt, elements, lineno


def _read_ply_elements(path):
    with open(path, "rb") as fh:
        fmt, elements, header_lines = _parse_ply_header(fh, path)
        data = {}
        if fmt == "ascii":
            lineno = header_lines
            for el in elements:
                rows = []
                for _ in range(el["count"]):
                    raw = fh.readline()
                    lineno += 1
                    if not raw:
                        raise ParseError(f"truncated {el['name']} data", path, lineno)
                    toks = raw.split()
                    rec, pos = {}, 0
                    try:
                        for prop in el["props"]:
                            if prop[1] == "list":
                                n = int(toks[pos])
                                rec[prop[0]] = [float(t) for t in toks[pos + 1:pos + 1 + n]]
                                if len(rec[prop[0]]) != n:
                                    raise IndexError
                                pos += 1 + n
                            else:
                                rec[prop[0]] = float(toks[pos])
                                pos += 1
                    except (ValueError, IndexError):
                        raise ParseError(f"malformed {el['name']} record", path, lineno) from None
                    rows.append(rec)
                data[el["name"]] = rows
        else:
            end = "<" if fmt == "binary_little_endian" else ">"
            for el in elements:
                if all(p[1] != "list" for p in el["props"]):
                    dt = np.dtype([(p[0], end + _PLY_TYPES[p[1]]) for p in el["props"]])
                    buf = fh.read(dt.itemsize * el["count"])
                    if len(buf) != dt.itemsize * el["count"]:
                        raise ParseError(f"truncated {el['name']} data", path)
                    arr = np.frombuffer(buf, dtype=dt)
                    data[el["name"]] = [
                        {name: float(arr[name][i]) for name in arr.dtype.names}
                        for i in range(len(arr))]
                    continue
                rows = []
                for i in range(el["count"]):
                    rec = {}
                    for prop in el["props"]:
                        if prop[1] == "list":
                            cdt = np.dtype(end + _PLY_TYPES[prop[2]])
                            raw = fh.read(cdt.itemsize)
                            if len(raw) != cdt.itemsize:
                                raise ParseError(f"truncated {el['name']} record {i}", path)
                            n = int(np.frombuffer(raw, cdt)[0])
                            idt = np.dtype(end + _PLY_TYPES[prop[3]])
                            raw = fh.read(idt.itemsize * n)
                            if len(raw) != idt.itemsize * n:
                                raise ParseError(f"truncated {el['name']} record {i}", path)
                            rec[prop[0]] = np.frombuffer(raw, idt).astype(float).tolist()
                        else:
                            sdt = np.dtype(end + _PLY_TYPES[prop[1]])
                            raw = fh.read(sdt.itemsize)
                            if len(raw) != sdt.itemsize:
                                raise ParseError(f"truncated {el['name']} record {i}", path)
                            rec[prop[0]] = float(np.frombuffer(raw, sdt)[0])
                    rows.append(rec)
                data[el["name"]] = rows
    return data, header_lines


def _load_ply(path: Path) -> TriMesh:
    data, header_lines = _read_ply_elements(path)
    vrows = data.get("vertex", [])
    try:
        vertices = np.array([[r["x"], r["y"], r["z"]] for r in vrows], dtype=np.float64)
    except KeyError:
        raise ParseError("vertex element lacks x/y/z", path) from None
    vertices = vertices.reshape(-1, 3)

    normals = None
    if vrows and all(k in vrows[0] for k in ("nx", "ny", "nz")):
        n = np.array([[r["nx"], r["ny"], r["nz"]] for r in vrows], dtype=np.float64)
        ln = np.linalg.norm(n, axis=1)
        if np.all(ln > 1e-12):
            normals = n / ln[:, None]

    vuv = None
    for ku, kv in (("u", "v"), ("s", "t"), ("texture_u", "texture_v")):
        if vrows and ku in vrows[0] and kv in vrows[0]:
            vuv = np.array([[r[ku], r[kv]] for r in vrows], dtype=np.float64)
            break

    faces, uv_corners, face_lines = [], [], []
    frows = data.get("face", [])
    face_line0 = header_lines + len(vrows) + 1
    for i, rec in enumerate(frows):
        idx = rec.get("vertex_indices", rec.get("vertex_index"))
        if idx is None or len(idx) < 3:
            raise ParseError("face needs a vertex_indices list of >= 3", path, face_line0 + i)
        poly = [int(x) for x in idx]
        tc = rec.get("texcoord")
        for tri in _fan(list(range(len(poly)))):
            faces.append([poly[k] for k in tri])
            face_lines.append(face_line0 + i)
            if tc is not None and len(tc) == 2 * len(poly):
                uv_corners.append([[tc[2 * k], tc[2 * k + 1]] for k in tri])
    check_face_indices(faces, len(vertices), path, face_lines)
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)

    uvs = None
    if uv_corners and len(uv_corners) == len(faces):
        uvs = np.array(uv_corners, dtype=np.float64)
    elif vuv is not None and len(faces):
        uvs = vuv[faces]
    if uvs is not None:
        if uvs.min() < -UV_TOL or uvs.max() > 1 + UV_TOL:
            raise ParseError("texture coordinate outside [0, 1]", path)
        uvs = np.clip(uvs, 0.0, 1.0)
    return TriMesh(vertices, faces, normals=normals, uvs=uvs)


def save_obj(mesh: TriMesh, path, mtllib: str | None = None, material: str | None = None) -> None:
    """Write an OBJ file. Floats use ``repr`` so a reload is bit-identical."""
    lines = []
    if mtllib:
        lines.append(f"mtllib {mtllib}")
    for x, y, z in mesh.vertices.tolist():
        lines.append(f"v {x!r} {y!r} {z!r}")
    if mesh.normals is not None:
        for x, y, z in mesh.normals.tolist():
            lines.append(f"vn {x!r} {y!r} {z!r}")
    if mesh.uvs is not None:
        for u, v in mesh.uvs.reshape(-1, 2).tolist():
            lines.append(f"vt {u!r} {v!r}")
    if material:
        lines.append(f"usemtl {material}")
    has_n = mesh.normals is not None
    for fi, tri in enumerate(mesh.faces.tolist()):
        corners = []
        for k, v in enumerate(tri):
            tok = str(v + 1)
            if mesh.uvs is not None:
                tok += f"/{3 * fi + k + 1}"
                if has_n:
                    tok += f"/{v + 1}"
            elif has_n:
                tok += f"//{v + 1}"
            corners.append(tok)
        lines.append("f " + " ".join(corners))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_point_cloud_ply(path, positions, normals=None) -> None:
    """Write points (and optional normals) as a binary little-endian PLY."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    props = ["x", "y", "z"]
    cols = [positions]
    if normals is not None:
        props += ["nx", "ny", "nz"]
        cols.append(np.asarray(normals, dtype=np.float64).reshape(-1, 3))
    header = ["ply", "format binary_little_endian 1.0",
              f"element vertex {len(positions)}"]
    header += [f"property double {p}" for p in props]
    header.append("end_header")
    body = np.ascontiguousarray(np.hstack(cols), dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(body)


def load_point_cloud_ply(path):
    """Return (positions, normals or None) from a PLY vertex element."""
    data, _ = _read_ply_elements(Path(path))
    rows = data.get("vertex", [])
    pos = np.array([[r["x"], r["y"], r["z"]] for r in rows], dtype=np.float64).reshape(-1, 3)
    nrm = None
    if rows and "nx" in rows[0]:
        nrm = np.array([[r["nx"], r["ny"], r["nz"]] for r in rows], dtype=np.float64)
    return pos, nrm


__all__ = ["load_mesh", "save_obj", "save_point_cloud_ply", "load_point_cloud_ply"]
