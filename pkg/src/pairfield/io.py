"""Binary and CSV persistence for lattices and field-state checkpoints.

Container layout (extension .pfld): header = magic b"PFLD", format version
u32, axis count u32, then per axis a u32 point count and f64 length; after
the header come one or more blocks of little-endian f64 samples in
row-major order.  A real lattice is one block; a complex lattice is two
(real part, imaginary part); a field-state checkpoint stores one block per
field and prefixes the whole container with a length-framed JSON manifest
([u32 byte length][UTF-8 JSON]) naming field order, time, constants and
the potential descriptor.  The two file kinds are distinguished by whether
the file starts with the magic bytes.

CSV export is a lossy human-readable dump: one row per site with its
coordinates and value(s).
"""

from __future__ import annotations

import json
import struct
from typing import BinaryIO

import numpy as np

from .dynamics import FieldState, PhysicalConstants
from .lattice import ComplexLattice, Grid, RealLattice, make_grid

MAGIC = b"PFLD"
FORMAT_VERSION = 1

_HEAD = struct.Struct("<4sII")
_AXIS = struct.Struct("<Id")
_FRAME = struct.Struct("<I")


class FormatError(ValueError):
    """Raised when a file does not match the container layout."""


def _write_header(fh: BinaryIO, grid: Grid):
    fh.write(_HEAD.pack(MAGIC, FORMAT_VERSION, grid.ndim))
    for pts, length in zip(grid.points, grid.lengths):
        fh.write(_AXIS.pack(pts, length))


def _read_exact(fh: BinaryIO, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise FormatError(f"truncated file: wanted {count} bytes, got {len(data)}")
    return data


def _read_header(fh: BinaryIO) -> Grid:
    magic, version, naxes = _HEAD.unpack(_read_exact(fh, _HEAD.size))
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    if not 1 <= naxes <= 3:
        raise FormatError(f"axis count {naxes} out of range")
    axes = []
    for _ in range(naxes):
        pts, length = _AXIS.unpack(_read_exact(fh, _AXIS.size))
        axes.append((int(pts), float(length)))
    try:
        return make_grid(axes)
    except ValueError as exc:
        raise FormatError(f"invalid grid in header: {exc}") from exc


def _write_block(fh: BinaryIO, values: np.ndarray):
    fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def _read_block(fh: BinaryIO, grid: Grid) -> np.ndarray:
    raw = _read_exact(fh, grid.num_sites * 8)
    return np.frombuffer(raw, dtype="<f8").reshape(grid.shape).astype(np.float64)


def save_lattice(path, lat: RealLattice | ComplexLattice):
    """Write a lattice: one block if real, Re + Im blocks if complex."""
    with open(path, "wb") as fh:
        _write_header(fh, lat.grid)
        if np.iscomplexobj(lat.values):
            _write_block(fh, lat.values.real)
            _write_block(fh, lat.values.imag)
        else:
            _write_block(fh, lat.values)


def load_lattice(path) -> RealLattice | ComplexLattice:
    """Read a lattice; block count (1 or 2) decides real vs complex."""
    with open(path, "rb") as fh:
        grid = _read_header(fh)
        first = _read_block(fh, grid)
        rest = fh.read()
    block_bytes = grid.num_sites * 8
    if len(rest) == 0:
        return RealLattice(grid, first)
    if len(rest) == block_bytes:
        imag = np.frombuffer(rest, dtype="<f8").reshape(grid.shape)
        return ComplexLattice(grid, first + 1j * imag)
    raise FormatError(
        f"expected 1 or 2 data blocks of {block_bytes} bytes, "
        f"found {block_bytes + len(rest)} bytes of data"
    )


def _field_names(ndim: int) -> list[str]:
    names = ["q", "p"]
    for prefix in ("Q", "P", "eta", "pi"):
        names += [f"{prefix}_{ax + 1}" for ax in range(ndim)]
    return names


def save_state(path, state: FieldState, constants: PhysicalConstants, potential_descriptor=None):
    """Checkpoint a field state with its constants and potential provenance.

    potential_descriptor is anything JSON-serializable describing where the
    potential came from (typically the scenario config's potential object);
    it is stored verbatim and returned on load.
    """
    manifest = {
        "kind": "field_state_checkpoint",
        "format_version": FORMAT_VERSION,
        "fields": _field_names(state.grid.ndim),
        "time": float(state.time),
        "constants": {"h": constants.h, "m": constants.m, "c": constants.c},
        "potential": potential_descriptor,
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_FRAME.pack(len(blob)))
        fh.write(blob)
        _write_header(fh, state.grid)
        for values in state.stacked():
            _write_block(fh, values)


def load_state(path) -> tuple[FieldState, PhysicalConstants, dict]:
    """Load a checkpoint; returns (state, constants, manifest)."""
    with open(path, "rb") as fh:
        head = _read_exact(fh, 4)
        if head == MAGIC:
            raise FormatError("file is a bare lattice snapshot, not a checkpoint")
        (length,) = _FRAME.unpack(head)
        if length > 1 << 20:
            raise FormatError("implausible manifest length; not a checkpoint file")
        try:
            manifest = json.loads(_read_exact(fh, length).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"manifest is not valid JSON: {exc}") from exc
        if manifest.get("kind") != "field_state_checkpoint":
            raise FormatError(f"unexpected manifest kind {manifest.get('kind')!r}")
        grid = _read_header(fh)
        expected = _field_names(grid.ndim)
        if manifest.get("fields") != expected:
            raise FormatError(
                f"manifest field order {manifest.get('fields')} does not match {expected}"
            )
        stacked = np.stack([_read_block(fh, grid) for _ in expected])
        trailing = fh.read(1)
    if trailing:
        raise FormatError("trailing bytes after the last field block")
    cons = manifest.get("constants", {})
    try:
        constants = PhysicalConstants(h=cons["h"], m=cons["m"], c=cons["c"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"manifest constants incomplete: {exc}") from exc
    state = FieldState.from_stacked(grid, stacked, float(manifest["time"]))
    return state, constants, manifest


def is_checkpoint(path) -> bool:
    """True if the file is a framed checkpoint, False if a bare lattice."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if len(head) < 4:
        raise FormatError("file too short")
    return head != MAGIC


def export_csv(path, lat: RealLattice | ComplexLattice):
    """Dump one row per site: coordinates then value (or re, im)."""
    grid = lat.grid
    axes = [grid.coords(ax) for ax in range(grid.ndim)]
    complex_valued = np.iscomplexobj(lat.values)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        cols = [f"x_{ax + 1}" for ax in range(grid.ndim)]
        cols += ["re", "im"] if complex_valued else ["value"]
        fh.write(",".join(cols) + "\n")
        for idx in np.ndindex(grid.shape):
            coords = [repr(float(axes[ax][i])) for ax, i in enumerate(idx)]
            v = lat.values[idx]
            if complex_valued:
                row = coords + [repr(float(v.real)), repr(float(v.imag))]
            else:
                row = coords + [repr(float(v))]
            fh.write(",".join(row) + "\n")
