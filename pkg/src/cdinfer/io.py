"""Serialization: provenance-stamped CSV/JSON schemas shared by all modules.

Every numeric file opens with comment lines carrying the package version and
the object's provenance. Reals are written with 17 significant digits so a
write/read cycle reproduces the doubles bit for bit.
"""

from __future__ import annotations

import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import SchemaError
from .pvfn import ConfidenceCurve, ConfidenceDensity, ParamGrid, PValueFunction

__all__ = [
    "write_pvfn",
    "read_pvfn",
    "write_curve_csv",
    "write_power_pvfn",
    "write_banded_csv",
    "write_table_csv",
    "read_matrix_csv",
    "write_sim_report",
    "report_environment",
    "fmt",
]

MAGIC = f"# cdinfer {__version__}"


def fmt(x: float) -> str:
    """17-significant-digit decimal text: lossless for double precision."""
    return format(float(x), ".17g")


def report_environment() -> dict:
    """Identifiers for everything that could move a reproduced number."""
    return {
        "package": f"cdinfer {__version__}",
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "special_functions": "scipy.special (cephes/boost)",
        "prng": "numpy.random.Philox",
    }


def _header(kind: str, meta: dict[str, str]) -> list[str]:
    lines = [f"{MAGIC} {kind}"]
    for key, val in meta.items():
        lines.append(f"# {key}: {val}")
    return lines


def write_pvfn(path, H: PValueFunction):
    """CSV with columns theta,value plus tail/source/grid comment headers."""
    grid = H.grid
    lines = _header(
        "pvfn",
        {
            "tail": H.tail,
            "source": H.source or "unspecified",
            "grid": f"{fmt(grid.lo)} {fmt(grid.hi)} {fmt(grid.step)} {grid.n_points}",
        },
    )
    lines.append("theta,value")
    for t, v in zip(grid.thetas, H.values):
        lines.append(f"{fmt(t)},{fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_pvfn(path) -> PValueFunction:
    """Parse a pvfn CSV; any structural defect raises SchemaError with the
    offending line number and no partial object."""
    text = Path(path).read_text()
    lines = text.splitlines()
    meta: dict[str, str] = {}
    body_start = None
    for i, line in enumerate(lines):
        if line.startswith("#"):
            if i == 0:
                if "pvfn" not in line or not line.startswith("# cdinfer"):
                    raise SchemaError("not a cdinfer pvfn file", line=1)
                continue
            if ":" in line:
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
            continue
        body_start = i
        break
    if body_start is None or not lines or not lines[0].startswith("#"):
        raise SchemaError("missing pvfn header")
    if lines[body_start] != "theta,value":
        raise SchemaError(
            f"expected column header 'theta,value', got {lines[body_start]!r}",
            line=body_start + 1,
        )
    if "tail" not in meta or "grid" not in meta:
        raise SchemaError("header must carry tail and grid lines")
    parts = meta["grid"].split()
    if len(parts) != 4:
        raise SchemaError(f"malformed grid metadata {meta['grid']!r}")
    try:
        grid = ParamGrid(float(parts[0]), float(parts[1]), float(parts[2]))
        n_expected = int(parts[3])
    except ValueError as exc:
        raise SchemaError(f"malformed grid metadata: {exc}") from None
    if grid.n_points != n_expected:
        raise SchemaError(
            f"grid metadata promises {n_expected} rows but the grid spans "
            f"{grid.n_points}"
        )
    rows = lines[body_start + 1 :]
    rows = [r for r in rows if r.strip()]
    if len(rows) != n_expected:
        raise SchemaError(
            f"expected {n_expected} data rows, found {len(rows)}",
            line=body_start + 2,
        )
    thetas = np.empty(n_expected)
    values = np.empty(n_expected)
    for j, row in enumerate(rows):
        cells = row.split(",")
        if len(cells) != 2:
            raise SchemaError(
                f"expected 2 columns, got {len(cells)}", line=body_start + 2 + j
            )
        try:
            thetas[j] = float(cells[0])
            values[j] = float(cells[1])
        except ValueError:
            raise SchemaError(
                f"unparseable real in {row!r}", line=body_start + 2 + j
            ) from None
    if np.max(np.abs(thetas - grid.thetas)) > 1e-12 * max(1.0, abs(grid.hi)):
        j = int(np.argmax(np.abs(thetas - grid.thetas)))
        raise SchemaError(
            f"theta column disagrees with grid metadata at row {j}",
            line=body_start + 2 + j,
        )
    return PValueFunction(grid, values, meta["tail"], meta.get("source", ""))


def write_curve_csv(path, xs, ys, kind: str, meta: dict[str, str], columns: str):
    """Generic two-column provenance-stamped CSV."""
    lines = _header(kind, meta)
    lines.append(columns)
    for x, y in zip(xs, ys):
        lines.append(f"{fmt(x)},{fmt(y)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_power_pvfn(path, ppv, meta: dict[str, str] | None = None):
    meta = {"source": ppv.source or "unspecified", **(meta or {})}
    write_curve_csv(path, ppv.powers, ppv.values, "power-pvfn", meta, "power,value")


def write_banded_csv(path, thetas, center, lower, upper, meta: dict[str, str]):
    lines = _header("banded-curve", meta)
    lines.append("theta,center,lower,upper")
    for t, c, lo, hi in zip(thetas, center, lower, upper):
        lines.append(f"{fmt(t)},{fmt(c)},{fmt(lo)},{fmt(hi)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_table_csv(path, row_labels, col_labels, cells, kind: str,
                    meta: dict[str, str] | None = None, corner: str = "row"):
    """Labeled table (screening blocks): cells may be floats or strings."""
    lines = _header(kind, meta or {})
    lines.append(",".join([corner, *col_labels]))
    for label, row in zip(row_labels, cells):
        rendered = [
            cell if isinstance(cell, str) else fmt(cell) for cell in row
        ]
        lines.append(",".join([label, *rendered]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path):
    """Operating-characteristics matrix: header row of statuses, one row per
    result. Returns (statuses, results, probs)."""
    lines = [
        line for line in Path(path).read_text().splitlines()
        if line.strip() and not line.startswith("#")
    ]
    if not lines:
        raise SchemaError("empty matrix file")
    header = lines[0].split(",")
    if len(header) < 2:
        raise SchemaError("matrix header needs a corner cell and statuses", line=1)
    statuses = [h.strip() for h in header[1:]]
    results = []
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(statuses) + 1:
            raise SchemaError(
                f"expected {len(statuses) + 1} cells, got {len(cells)}", line=i
            )
        results.append(cells[0].strip())
        try:
            rows.append([float(c) for c in cells[1:]])
        except ValueError:
            raise SchemaError(f"unparseable probability in {line!r}", line=i) from None
    return statuses, results, np.array(rows)


def write_sim_report(path, report):
    """SimReport as deterministic JSON (sorted keys, native float repr)."""
    Path(path).write_text(sim_report_json(report))


def sim_report_json(report) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
