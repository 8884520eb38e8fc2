"""Reading and writing point clouds (ASCII PLY and x,y,z CSV)."""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from .geometry import PointCloud, estimate_normals

FORMATS = ("ply_ascii", "xyz_csv")
_PLY_TYPES = {"float", "float32", "double", "float64", "int", "int32", "uint", "uint8", "short", "char", "uchar", "int8", "int16", "uint16", "uint32"}


class CloudParseError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class EmptyCloudError(ValueError):
    pass


def infer_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".ply":
        return "ply_ascii"
    if suffix in (".csv", ".xyz", ".txt"):
        return "xyz_csv"
    raise ValueError(f"cannot infer cloud format from {path!r}; pass format explicitly")


def _parse_floats(tokens, path, lineno):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise CloudParseError(path, lineno, f"expected numbers, got {' '.join(tokens)!r}") from None


def _read_ply(path):
    with open(path, encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise CloudParseError(path, 1, "missing 'ply' magic line")

    elements = []  # (name, count, [properties])
    header_end = None
    for lineno, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] != "ascii":
                raise CloudParseError(path, lineno, f"only ASCII PLY is supported, got {raw.strip()!r}")
        elif tok[0] == "element":
            if len(tok) != 3 or not tok[2].isdigit():
                raise CloudParseError(path, lineno, f"bad element line {raw.strip()!r}")
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise CloudParseError(path, lineno, "property before any element")
            if tok[1] == "list":
                elements[-1][2].append(("list", tok[-1]))
            elif len(tok) == 3 and tok[1] in _PLY_TYPES:
                elements[-1][2].append(("scalar", tok[2]))
            else:
                raise CloudParseError(path, lineno, f"bad property line {raw.strip()!r}")
        elif tok[0] == "end_header":
            header_end = lineno
            break
        else:
            raise CloudParseError(path, lineno, f"unexpected header line {raw.strip()!r}")
    if header_end is None:
        raise CloudParseError(path, len(lines), "missing end_header")

    lineno = header_end
    points, normals = None, None
    for name, count, props in elements:
        if name != "vertex":
            lineno += count
            continue
        names = [p[1] for p in props]
        if any(p[0] == "list" for p in props):
            raise CloudParseError(path, header_end, "list properties on vertex are not supported")
        for axis in "xyz":
            if axis not in names:
                raise CloudParseError(path, header_end, f"vertex element lacks property {axis!r}")
        has_normals = all(a in names for a in ("nx", "ny", "nz"))
        rows = []
        for _ in range(count):
            lineno += 1
            if lineno > len(lines):
                raise CloudParseError(path, lineno, f"file ends after {len(rows)} of {count} vertices")
            tok = lines[lineno - 1].split()
            if len(tok) != len(names):
                raise CloudParseError(path, lineno, f"expected {len(names)} values, got {len(tok)}")
            rows.append(_parse_floats(tok, path, lineno))
        data = np.array(rows, dtype=np.float64).reshape(count, len(names))
        col = {n: i for i, n in enumerate(names)}
        points = data[:, [col["x"], col["y"], col["z"]]]
        if has_normals:
            normals = data[:, [col["nx"], col["ny"], col["nz"]]]
        break
    if points is None:
        raise CloudParseError(path, header_end, "no vertex element")
    return points, normals


def _read_csv(path):
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = [t.strip() for t in line.split(",")]
            if len(tok) not in (3, 6):
                raise CloudParseError(path, lineno, f"expected 3 or 6 fields, got {len(tok)}")
            if width is None:
                width = len(tok)
            elif len(tok) != width:
                raise CloudParseError(path, lineno, f"expected {width} fields like earlier rows, got {len(tok)}")
            rows.append(_parse_floats(tok, path, lineno))
    if not rows:
        return np.empty((0, 3)), None
    data = np.array(rows, dtype=np.float64)
    return data[:, :3], (data[:, 3:6] if width == 6 else None)


def load_cloud(path, format=None, *, normal_k=12, cloud_id=None) -> PointCloud:
    """Load a cloud; normals are estimated (k nearest) when the file has none."""
    path = Path(path)
    fmt = format or infer_format(path)
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    points, normals = _read_ply(path) if fmt == "ply_ascii" else _read_csv(path)
    if len(points) < 1:
        raise EmptyCloudError(f"{path}: no points")
    if not np.all(np.isfinite(points)):
        raise CloudParseError(path, 0, "non-finite coordinates")

    _, first = np.unique(points, axis=0, return_index=True)
    if len(first) != len(points):
        warnings.warn(f"{path}: dropped {len(points) - len(first)} duplicate point(s)", stacklevel=2)
        keep = np.sort(first)
        points = points[keep]
        normals = normals[keep] if normals is not None else None

    if normals is None:
        normals = estimate_normals(points, k=min(normal_k, len(points))) if len(points) >= 3 else np.tile([0.0, 0.0, 1.0], (len(points), 1))
    else:
        lengths = np.linalg.norm(normals, axis=1, keepdims=True)
        if np.any(lengths == 0):
            raise CloudParseError(path, 0, "zero-length normal")
        normals = normals / lengths
    return PointCloud(points, normals, cloud_id=cloud_id or path.stem)


def save_cloud(cloud: PointCloud, path, format=None, *, with_normals=True):
    path = Path(path)
    fmt = format or infer_format(path)
    data = np.hstack([cloud.points, cloud.normals]) if with_normals else cloud.points
    body = "\n".join(" ".join(repr(float(v)) for v in row) for row in data)
    if fmt == "ply_ascii":
        props = ["x", "y", "z"] + (["nx", "ny", "nz"] if with_normals else [])
        header = ["ply", "format ascii 1.0", f"comment cloud_id {cloud.cloud_id}", f"element vertex {cloud.count}"]
        header += [f"property double {p}" for p in props]
        header.append("end_header")
        text = "\n".join(header) + "\n" + body + "\n"
    elif fmt == "xyz_csv":
        cols = "x,y,z,nx,ny,nz" if with_normals else "x,y,z"
        text = f"# {cols}\n" + body.replace(" ", ",") + "\n"
    else:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    path.write_text(text, encoding="utf-8")
    return path
