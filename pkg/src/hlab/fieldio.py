"""Serialization of lattice fields: flat binary format, CSV export, JSON sidecars.

Binary layout (all integers little-endian):

    bytes 0..4    magic "HLAB1"
    bytes 5..8    dim   (uint32)
    bytes 9..12   side  (uint32)
    bytes 13..16  kind  (4 ASCII bytes)
    bytes 17..    payload, float64 little-endian, site order (row-major over
                  the [0, L) storage aliases; per site, components row-major;
                  complex values interleaved re, im)

Kinds: "rsca" real scalar, "csca" complex scalar, "cvec" complex d-vector,
"cmat" complex d x d matrix, "coef" real d x d coefficient matrix.

Every file written here gets a JSON sidecar (same path + ".json") embedding
the config hash and master seed, so artifacts are traceable and reruns can be
compared byte for byte.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .lattice import TorusGrid

MAGIC = b"HLAB1"

_KINDS = {
    "rsca": (0, False),  # (extra component axes, complex payload)
    "csca": (0, True),
    "cvec": (1, True),
    "cmat": (2, True),
    "coef": (2, False),
}


class IntegrityError(ValueError):
    """A serialized field failed its magic, size, or kind check."""


def _payload_count(kind: str, dim: int, n_sites: int) -> int:
    axes, is_complex = _KINDS[kind]
    per_site = dim**axes * (2 if is_complex else 1)
    return n_sites * per_site


def write_field(
    path: str | Path,
    grid: TorusGrid,
    values: np.ndarray,
    kind: str,
    *,
    config_hash: str = "",
    seed: int = 0,
) -> None:
    """Write one field in the flat binary format, plus its JSON sidecar."""
    if kind not in _KINDS:
        raise ValueError(f"unknown field kind {kind!r}")
    axes, is_complex = _KINDS[kind]
    want = (grid.dim,) * axes + grid.shape
    values = np.asarray(values)
    if values.shape != want:
        raise ValueError(f"kind {kind!r} expects shape {want}, got {values.shape}")

    # site-major payload: move component axes after the spatial ones
    site_major = np.moveaxis(values, tuple(range(axes)), tuple(range(-axes, 0)))
    if is_complex:
        flat = np.ascontiguousarray(site_major, dtype=np.complex128)
        payload = flat.view(np.float64).reshape(-1)
    else:
        if np.iscomplexobj(site_major):
            raise ValueError(f"kind {kind!r} takes real values")
        payload = np.ascontiguousarray(site_major, dtype=np.float64).reshape(-1)

    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", grid.dim, grid.side))
        fh.write(kind.encode("ascii"))
        fh.write(payload.astype("<f8", copy=False).tobytes())

    sidecar = {
        "config_sha256": config_hash,
        "kind": kind,
        "dim": grid.dim,
        "side": grid.side,
        "seed": int(seed),
    }
    with open(path.with_name(path.name + ".json"), "w") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_field(path: str | Path) -> tuple[TorusGrid, np.ndarray, str]:
    """Read a binary field, validating magic, kind, and payload size."""
    raw = Path(path).read_bytes()
    if len(raw) < 17:
        raise IntegrityError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:5] != MAGIC:
        raise IntegrityError(f"{path}: bad magic {raw[:5]!r}")
    dim, side = struct.unpack("<II", raw[5:13])
    kind = raw[13:17].decode("ascii", errors="replace")
    if kind not in _KINDS:
        raise IntegrityError(f"{path}: unknown kind tag {kind!r}")
    try:
        grid = TorusGrid(dim=dim, side=side)
    except ValueError as exc:
        raise IntegrityError(f"{path}: bad geometry: {exc}") from exc

    expect = _payload_count(kind, dim, grid.n_sites)
    payload = np.frombuffer(raw, dtype="<f8", offset=17)
    if payload.size != expect:
        raise IntegrityError(
            f"{path}: payload has {payload.size} doubles, expected {expect}"
        )

    axes, is_complex = _KINDS[kind]
    comp_shape = (dim,) * axes
    if is_complex:
        site_major = payload.view(np.complex128).reshape(grid.shape + comp_shape)
    else:
        site_major = payload.reshape(grid.shape + comp_shape)
    values = np.moveaxis(site_major, tuple(range(-axes, 0)), tuple(range(axes)))
    return grid, np.ascontiguousarray(values), kind


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(
    path: str | Path,
    grid: TorusGrid,
    columns: dict[str, np.ndarray],
    *,
    config_hash: str = "",
    seed: int = 0,
) -> None:
    """Write per-site columns as CSV: x_1..x_d, then one column per entry.

    Rows follow storage order; coordinates are the centered representatives in
    [-L/2, L/2).  The config hash and seed ride along as comment lines so the
    file is a self-describing artifact.
    """
    coords = grid.coordinate_arrays().reshape(grid.dim, -1)
    cols = {}
    for name, arr in columns.items():
        arr = np.asarray(arr)
        if arr.shape != grid.shape:
            raise ValueError(f"column {name!r} shape {arr.shape} != {grid.shape}")
        cols[name] = arr.reshape(-1)

    with open(path, "w") as fh:
        fh.write(f"# config_sha256={config_hash}\n")
        fh.write(f"# seed={int(seed)}\n")
        header = [f"x_{j + 1}" for j in range(grid.dim)] + list(cols)
        fh.write(",".join(header) + "\n")
        for i in range(grid.n_sites):
            row = [str(int(coords[j, i])) for j in range(grid.dim)]
            row += [_fmt(cols[name][i]) for name in cols]
            fh.write(",".join(row) + "\n")


def write_complex_csv(
    path: str | Path,
    grid: TorusGrid,
    values: np.ndarray,
    *,
    config_hash: str = "",
    seed: int = 0,
) -> None:
    """CSV export of one complex scalar field with columns x_1..x_d, re, im."""
    values = np.asarray(values)
    write_csv(
        path,
        grid,
        {"re": values.real, "im": values.imag},
        config_hash=config_hash,
        seed=seed,
    )
