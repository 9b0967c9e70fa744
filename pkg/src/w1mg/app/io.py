"""File formats: PGM and CSV density images, field CSVs, quiver CSVs and JSON reports."""

from __future__ import annotations

import csv
import io
import json
import re
from pathlib import Path
from typing import Union

import numpy as np

from ..grid import FluxField, GridSpec, ScalarField
from ..report import SolveReport
from .instances import DensityImage, InputError

PathLike = Union[str, Path]

FLUX_MARKER = "# y_edges"
_FMT = "%.17g"


# -- density images ----------------------------------------------------------------


def _pgm_tokens(data: bytes, count: int, start: int = 0) -> tuple[list[bytes], int]:
    """First ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    tokens: list[bytes] = []
    pos = start
    token_re = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")
    while len(tokens) < count:
        match = token_re.match(data, pos)
        if match is None:
            raise InputError("truncated PGM header")
        tokens.append(match.group(1))
        pos = match.end()
    return tokens, pos


def read_pgm(path: PathLike) -> DensityImage:
    """Read an ASCII (P2) or binary (P5) greymap with maxval up to 65535."""
    data = Path(path).read_bytes()
    (magic, w, h, maxval), pos = _pgm_tokens(data, 4)
    if magic not in (b"P2", b"P5"):
        raise InputError(f"{path}: not a P2/P5 PGM file (magic {magic!r})")
    try:
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise InputError(f"{path}: malformed PGM header") from exc
    if width <= 0 or height <= 0 or not 0 < maxval <= 65535:
        raise InputError(f"{path}: invalid PGM dimensions or maxval")
    n = width * height
    if magic == b"P2":
        try:
            values = np.array(data[pos:].split(), dtype=np.int64)
        except ValueError as exc:
            raise InputError(f"{path}: non-integer PGM sample") from exc
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        body = data[pos + 1:]  # single whitespace byte after maxval
        if len(body) < n * dtype.itemsize:
            raise InputError(f"{path}: PGM raster is truncated")
        values = np.frombuffer(body, dtype=dtype, count=n).astype(np.int64)
    if values.size != n:
        raise InputError(f"{path}: expected {n} samples, found {values.size}")
    if values.min() < 0 or values.max() > maxval:
        raise InputError(f"{path}: sample outside [0, {maxval}]")
    return DensityImage(values.reshape(height, width).astype(float))


def write_pgm(path: PathLike, pixels: np.ndarray, binary: bool = True, maxval: int = 65535) -> None:
    """Write pixels rescaled to ``[0, maxval]`` as a P5 (or P2) greymap."""
    px = np.asarray(pixels, dtype=float)
    if not 0 < maxval <= 65535:
        raise ValueError("maxval must lie in 1..65535")
    top = px.max()
    scaled = np.rint(px / top * maxval).astype(np.int64) if top > 0 else np.zeros(px.shape, np.int64)
    height, width = scaled.shape
    header = f"{'P5' if binary else 'P2'}\n{width} {height}\n{maxval}\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            dtype = ">u2" if maxval > 255 else "u1"
            fh.write(scaled.astype(dtype).tobytes())
        else:
            for row in scaled:
                fh.write((" ".join(map(str, row)) + "\n").encode())


def read_csv_image(path: PathLike) -> DensityImage:
    """Plain comma-separated pixel grid; a non-numeric first row is treated as a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise InputError(f"{path}: empty CSV image")
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        pixels = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric CSV entry") from exc
    if pixels.ndim != 2:
        raise InputError(f"{path}: ragged CSV rows")
    return DensityImage(pixels)


def write_csv_image(path: PathLike, pixels: np.ndarray) -> None:
    np.savetxt(path, np.asarray(pixels, dtype=float), fmt=_FMT, delimiter=",")


def read_image(path: PathLike) -> DensityImage:
    """Dispatch on content: PGM magic bytes, otherwise CSV."""
    path = Path(path)
    try:
        head = path.read_bytes()[:2]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    if head in (b"P2", b"P5"):
        return read_pgm(path)
    return read_csv_image(path)


# -- field export --------------------------------------------------------------------


def _block(values: np.ndarray) -> str:
    buf = io.StringIO()
    np.savetxt(buf, values, fmt=_FMT, delimiter=",")
    return buf.getvalue()


def _parse_block(lines: list[str], shape: tuple[int, int], what: str) -> np.ndarray:
    try:
        values = np.array([[float(v) for v in ln.split(",")] for ln in lines])
    except ValueError as exc:
        raise InputError(f"non-numeric entry in {what} block") from exc
    if values.shape != shape:
        raise InputError(f"{what} block has shape {values.shape}, expected {shape}")
    return values


def write_scalar_csv(path: PathLike, field: ScalarField) -> None:
    """Header ``# scalar N=<cells>`` then one row per node row."""
    with open(path, "w") as fh:
        fh.write(f"# scalar N={field.grid.cells_per_side}\n")
        fh.write(_block(field.values))


def write_flux_csv(path: PathLike, field: FluxField) -> None:
    """Header, the x-edge block, a marker line, then the y-edge block."""
    with open(path, "w") as fh:
        fh.write(f"# flux N={field.grid.cells_per_side}\n")
        fh.write("# x_edges\n")
        fh.write(_block(field.x_edges))
        fh.write(FLUX_MARKER + "\n")
        fh.write(_block(field.y_edges))


def _read_header(path: PathLike, kind: str) -> tuple[GridSpec, list[str]]:
    lines = Path(path).read_text().splitlines()
    match = re.fullmatch(rf"# {kind} N=(\d+)", lines[0].strip()) if lines else None
    if match is None:
        raise InputError(f"{path}: missing '# {kind} N=<cells>' header")
    return GridSpec(int(match.group(1))), [ln for ln in lines[1:] if ln.strip()]


def read_scalar_csv(path: PathLike) -> ScalarField:
    grid, lines = _read_header(path, "scalar")
    return ScalarField(grid, _parse_block(lines, grid.node_shape, "scalar"))


def read_flux_csv(path: PathLike) -> FluxField:
    grid, lines = _read_header(path, "flux")
    if lines and lines[0].strip() == "# x_edges":
        lines = lines[1:]
    try:
        split = [ln.strip() for ln in lines].index(FLUX_MARKER)
    except ValueError as exc:
        raise InputError(f"{path}: missing '{FLUX_MARKER}' block marker") from exc
    mx = _parse_block(lines[:split], grid.x_edge_shape, "x_edges")
    my = _parse_block(lines[split + 1:], grid.y_edge_shape, "y_edges")
    return FluxField(grid, mx, my)


def write_quiver_csv(path: PathLike, field: FluxField) -> None:
    """Node-centred arrows ``x,y,u,v``; each component averages its two incident edges."""
    grid = field.grid
    mx, my = field.x_edges, field.y_edges
    u = np.zeros(grid.node_shape)
    v = np.zeros(grid.node_shape)
    u[:, :-1] += 0.5 * mx
    u[:, 1:] += 0.5 * mx
    v[:-1, :] += 0.5 * my
    v[1:, :] += 0.5 * my
    x = grid.coordinates()
    xx, yy = np.meshgrid(x, x, indexing="xy")
    table = np.column_stack([xx.ravel(), yy.ravel(), u.ravel(), v.ravel()])
    np.savetxt(path, table, fmt=_FMT, delimiter=",", header="x,y,u,v", comments="")


# -- reports ---------------------------------------------------------------------------


def report_json(report: SolveReport) -> dict:
    out = report.to_dict()
    out["levels"] = [
        {k: lvl[k] for k in ("h", "eps", "iters", "fpr_final", "seconds")} for lvl in out["levels"]
    ]
    return out


def write_report(path: PathLike, report: SolveReport) -> None:
    Path(path).write_text(json.dumps(report_json(report), indent=2) + "\n")


__all__ = [
    "read_csv_image",
    "read_flux_csv",
    "read_image",
    "read_pgm",
    "read_scalar_csv",
    "report_json",
    "write_csv_image",
    "write_flux_csv",
    "write_pgm",
    "write_quiver_csv",
    "write_report",
    "write_scalar_csv",
]
