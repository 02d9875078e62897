"""
Readers and writers for grid fields and result tables.

- VTK: legacy ASCII STRUCTURED_POINTS, x index fastest, ``%.17g`` values
- CSV: one row per node (coordinates then components) or free-form tables
- JSON: reports, manifests and error payloads
"""

import json
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from elastoscope.core.errors import FieldError, MissingData
from elastoscope.core.field_base import FieldBase
from elastoscope.core.grid import Grid
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.tensor import INDEX_PAIRS, SymTensorField
from elastoscope.interfaces.vector import VectorField
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)

_FLOAT = "%.17g"
_AXES = ("x", "y", "z")


def _require(path: Path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise MissingData(f"File not found: {path}", path=str(path))
    return path


def _xfast(values: np.ndarray) -> np.ndarray:
    """Flatten an ``indexing='ij'`` nodal array with the x index varying fastest."""
    return np.ascontiguousarray(values.T).ravel()


def _from_xfast(flat: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    return flat.reshape(shape[::-1]).T.copy()


# --- VTK ---


def write_vtk(path: Path, fields: Sequence[FieldBase], title: str = "elastoscope") -> Path:
    """Write fields sharing one grid into a legacy VTK file."""
    if not fields:
        raise FieldError("nothing to write")
    grid = fields[0].grid
    if any(f.grid != grid for f in fields):
        raise FieldError("all fields in one VTK file must share a grid")
    dims = list(grid.shape) + [1] * (3 - grid.dim)
    origin = list(grid.origin) + [0.0] * (3 - grid.dim)
    spacing = list(grid.spacing) + [1.0] * (3 - grid.dim)
    extents = ",".join(f"{e:.17g}" for e in grid.extents)
    lines = [
        "# vtk DataFile Version 3.0",
        f"{title} extents={extents}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS " + " ".join(str(n) for n in dims),
        "ORIGIN " + " ".join(_FLOAT % o for o in origin),
        "SPACING " + " ".join(_FLOAT % h for h in spacing),
        f"POINT_DATA {grid.node_count}",
    ]
    for f in fields:
        if isinstance(f, ScalarField):
            lines += [f"SCALARS {f.name} double 1", "LOOKUP_TABLE default"]
            lines += [_FLOAT % v for v in _xfast(f.values)]
        elif isinstance(f, VectorField):
            comps = [_xfast(c) for c in f.components()]
            comps += [np.zeros(grid.node_count)] * (3 - grid.dim)
            lines.append(f"VECTORS {f.name} double")
            lines += [" ".join(_FLOAT % v for v in row) for row in zip(*comps)]
        elif isinstance(f, SymTensorField):
            for k, (i, j) in enumerate(INDEX_PAIRS[grid.dim]):
                lines += [f"SCALARS {f.name}_{_AXES[i]}{_AXES[j]} double 1", "LOOKUP_TABLE default"]
                lines += [_FLOAT % v for v in _xfast(f.values[k])]
        else:
            raise FieldError(f"cannot write {type(f).__name__}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug(f"[-] Wrote {len(fields)} field(s) to {path}")
    return path


def read_vtk(path: Path) -> dict[str, ScalarField | VectorField]:
    """Read SCALARS and VECTORS blocks written by ``write_vtk``."""
    path = _require(path)
    try:
        tokens = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise MissingData(f"Cannot read {path}: {exc}", path=str(path)) from exc
    header = {}
    extents = None
    for line in tokens[:10]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] in ("DIMENSIONS", "ORIGIN", "SPACING", "POINT_DATA"):
            header[parts[0]] = parts[1:]
        for part in parts:
            if part.startswith("extents="):
                extents = tuple(float(v) for v in part.split("=", 1)[1].split(","))
    try:
        dims = [int(v) for v in header["DIMENSIONS"]]
        origin = [float(v) for v in header["ORIGIN"]]
        spacing = [float(v) for v in header["SPACING"]]
    except KeyError as exc:
        raise MissingData(f"{path} is not a structured-points VTK file", path=str(path)) from exc
    dim = 2 if dims[2] == 1 else 3
    cells = tuple(n - 1 for n in dims[:dim])
    if extents is None:
        extents = tuple(h * c for h, c in zip(spacing, cells))
    grid = Grid(cells=cells, extents=extents, origin=tuple(origin[:dim]))
    n = grid.node_count

    out: dict[str, ScalarField | VectorField] = {}
    i = next(k for k, line in enumerate(tokens) if line.startswith("POINT_DATA")) + 1
    while i < len(tokens):
        parts = tokens[i].split()
        if not parts:
            i += 1
            continue
        if parts[0] == "SCALARS":
            data = np.array([float(v) for v in tokens[i + 2 : i + 2 + n]])
            out[parts[1]] = ScalarField(grid, _from_xfast(data, grid.shape), name=parts[1])
            i += 2 + n
        elif parts[0] == "VECTORS":
            rows = np.array([[float(v) for v in line.split()] for line in tokens[i + 1 : i + 1 + n]])
            comps = np.stack([_from_xfast(rows[:, c], grid.shape) for c in range(dim)])
            out[parts[1]] = VectorField(grid, comps, name=parts[1])
            i += 1 + n
        else:
            raise MissingData(f"Unsupported VTK block '{parts[0]}' in {path}", path=str(path))
    return out


def read_vtk_field(path: Path, name: str) -> ScalarField | VectorField:
    fields = read_vtk(path)
    if name not in fields:
        raise MissingData(f"{path} has no field '{name}' (found {sorted(fields)})", path=str(path))
    return fields[name]


# --- CSV ---


def field_frame(fields: Sequence[FieldBase]) -> pd.DataFrame:
    """Node table: coordinates, then one column per component."""
    grid = fields[0].grid
    data: dict[str, np.ndarray] = {
        _AXES[a]: c.ravel() for a, c in enumerate(grid.coordinates())
    }
    for f in fields:
        if f.grid != grid:
            raise FieldError("all fields in one table must share a grid")
        comps = f.components()
        if len(comps) == 1:
            data[f.name] = comps[0].ravel()
        else:
            for k, c in enumerate(comps):
                data[f"{f.name}_{k}"] = c.ravel()
    return pd.DataFrame(data)


def write_field_csv(path: Path, fields: Sequence[FieldBase]) -> Path:
    return write_table(path, field_frame(fields))


def read_field_csv(path: Path, grid: Grid) -> dict[str, ScalarField | VectorField]:
    """Rebuild fields from a node table written on ``grid``."""
    frame = read_table(path)
    if len(frame) != grid.node_count:
        raise MissingData(f"{path} has {len(frame)} rows, grid has {grid.node_count} nodes")
    columns = [c for c in frame.columns if c not in _AXES[: grid.dim]]
    out: dict[str, ScalarField | VectorField] = {}
    vectors: dict[str, list[str]] = {}
    for c in columns:
        stem, _, idx = c.rpartition("_")
        if stem and idx.isdigit():
            vectors.setdefault(stem, []).append(c)
        else:
            out[c] = ScalarField(grid, frame[c].to_numpy().reshape(grid.shape), name=c)
    for stem, cols in vectors.items():
        comps = np.stack([frame[c].to_numpy().reshape(grid.shape) for c in sorted(cols)])
        out[stem] = VectorField(grid, comps, name=stem)
    return out


def write_table(path: Path, table: pd.DataFrame | Iterable[Mapping[str, Any]]) -> Path:
    frame = table if isinstance(table, pd.DataFrame) else pd.DataFrame(list(table))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=_FLOAT, lineterminator="\n")
    return path


def read_table(path: Path) -> pd.DataFrame:
    path = _require(path)
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except (OSError, ValueError) as exc:
        raise MissingData(f"Cannot parse {path}: {exc}", path=str(path)) from exc


# --- JSON ---


def write_json(path: Path, payload: BaseModel | Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(by_alias=True, indent=2)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True, default=str)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_json(path: Path) -> dict[str, Any]:
    path = _require(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MissingData(f"Cannot parse {path}: {exc}", path=str(path)) from exc
