"""Deterministic serialization: triples, sweep CSV files, JSON summaries.

Floats are written with shortest-roundtrip formatting capped at 12
significant digits, so identical inputs give byte-identical files.  Every
output file embeds a provenance block (tool version plus the full
configuration) sufficient to re-run it; provenance lives in '#' comment
lines for CSV and under a "provenance" key for JSON.
"""

from __future__ import annotations

import json
from typing import Iterable, Mapping, Sequence

from . import __version__
from .operators import OperatorExpr, format_complex, format_expr
from .slh import SlhTriple, check_triple

SIGNIFICANT_DIGITS = 12


def format_float(x: float) -> str:
    """Shortest representation that round-trips, capped at 12 significant digits."""
    if x != x:  # NaN
        return "nan"
    short = repr(float(x))
    if len(_mantissa_digits(short)) <= SIGNIFICANT_DIGITS:
        return short
    return format(float(x), f".{SIGNIFICANT_DIGITS}g")


def _mantissa_digits(text: str) -> str:
    mantissa = text.split("e")[0].split("E")[0]
    return mantissa.replace("-", "").replace("+", "").replace(".", "").lstrip("0")


def format_triple(triple: SlhTriple) -> str:
    """Canonical text document for a triple; terms in canonical order."""
    lines = ["slh-triple", f"channels {triple.n_channels}"]
    s = triple.scattering
    for i in range(s.shape[0]):
        for j in range(s.shape[1]):
            lines.append(f"S[{i},{j}] = {format_complex(s[i, j], SIGNIFICANT_DIGITS)}")
    for i, op in enumerate(triple.coupling):
        lines.append(f"L[{i}] = {format_expr(op)}")
    lines.append(f"H = {format_expr(triple.hamiltonian)}")
    checks = check_triple(triple)
    lines.append(
        "checks: unitarity-defect "
        + format_float(checks["scattering_unitarity_defect"])
        + " hermiticity-defect "
        + format_float(checks["hamiltonian_hermiticity_defect"])
    )
    return "\n".join(lines) + "\n"


def provenance_block(config: Mapping) -> dict:
    return {"tool": "cfnet", "version": __version__, "config": _plain(config)}


def _plain(value):
    """Recursively convert to JSON-serializable plain data."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "__dataclass_fields__"):
        return {f: _plain(getattr(value, f)) for f in value.__dataclass_fields__}
    if isinstance(value, OperatorExpr):
        return format_expr(value)
    if isinstance(value, (bool, int, str)) or value is None:
        return value
    if isinstance(value, complex):
        return format_complex(value, SIGNIFICANT_DIGITS)
    if isinstance(value, float):
        return format_float(value)
    if hasattr(value, "item") and not hasattr(value, "__len__"):  # numpy scalar
        return _plain(value.item())
    if hasattr(value, "tolist"):
        return _plain(value.tolist())
    return str(value)


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return format_float(float(value))


def write_csv(
    path: str,
    header: Sequence[str],
    rows: Iterable[Sequence],
    provenance: Mapping | None = None,
) -> None:
    """CSV with '#'-prefixed provenance comment lines before the header."""
    lines = []
    if provenance is not None:
        payload = json.dumps(provenance_block(provenance), sort_keys=True)
        lines.append(f"# provenance: {payload}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path: str) -> tuple[list[str], list[list[str]], dict | None]:
    """Inverse of :func:`write_csv`; returns (header, rows, provenance)."""
    provenance = None
    header: list[str] = []
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# provenance: "):
                provenance = json.loads(line[len("# provenance: "):])
                continue
            if line.startswith("#") or not line:
                continue
            if not header:
                header = line.split(",")
            else:
                rows.append(line.split(","))
    return header, rows, provenance


def write_json(path: str, payload: Mapping, provenance: Mapping | None = None) -> None:
    data = dict(_plain(payload))
    if provenance is not None:
        data["provenance"] = provenance_block(provenance)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
