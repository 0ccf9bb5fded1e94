"""Binary grid snapshots ("CQW1").

Layout, all little-endian: magic ``b"CQW1"``, then u32 format version, u32
lattice kind (0 honeycomb, 1 triangular, 2 square), u32 ``n1``, u32 ``n2``,
u32 spinors per cell (1 or 3), then for every cell in row-major order and
every spinor in the cell the f64 pairs ``(re, im)`` of the up and then the
down amplitude.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"CQW1"
VERSION = 1
KINDS = {"honeycomb": 0, "triangular": 1, "square": 2}
KIND_NAMES = {v: k for k, v in KINDS.items()}
_HEADER = struct.Struct("<4sIIIII")


class SnapshotError(ValueError):
    pass


@dataclass
class Snapshot:
    kind: str
    amplitudes: np.ndarray  # (n1, n2, spinors_per_cell, 2) complex

    @property
    def dims(self):
        return self.amplitudes.shape[:2]

    @property
    def spinors_per_cell(self) -> int:
        return self.amplitudes.shape[2]


def field_kind(fld) -> str:
    from .triangular import EdgeField

    if isinstance(fld, EdgeField):
        return "triangular"
    return "square" if fld.grid.dirs.is_square else "honeycomb"


def from_field(fld) -> Snapshot:
    """Cell-major amplitudes: ``(n1, n2, 1, 2)`` for sites, ``(m1, m2, 3, 2)`` for edges."""
    psi = fld.psi
    if psi.ndim == 4:
        amps = np.transpose(psi, (2, 3, 1, 0))
    else:
        amps = np.transpose(psi, (1, 2, 0))[:, :, None, :]
    return Snapshot(field_kind(fld), np.ascontiguousarray(amps))


def to_psi(snap: Snapshot) -> np.ndarray:
    """Inverse of :func:`from_field`'s reordering."""
    if snap.spinors_per_cell == 3:
        return np.ascontiguousarray(np.transpose(snap.amplitudes, (3, 2, 0, 1)))
    return np.ascontiguousarray(np.transpose(snap.amplitudes[:, :, 0, :], (2, 0, 1)))


def encode(snap: Snapshot) -> bytes:
    n1, n2 = snap.dims
    head = _HEADER.pack(MAGIC, VERSION, KINDS[snap.kind], n1, n2, snap.spinors_per_cell)
    body = np.ascontiguousarray(snap.amplitudes, dtype="<c16").tobytes()
    return head + body


def decode(data: bytes) -> Snapshot:
    if len(data) < _HEADER.size:
        raise SnapshotError("truncated snapshot header")
    magic, version, kind, n1, n2, spc = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    if kind not in KIND_NAMES or spc not in (1, 3):
        raise SnapshotError("corrupt snapshot header")
    count = n1 * n2 * spc * 2
    body = data[_HEADER.size:]
    if len(body) != 16 * count:
        raise SnapshotError(f"expected {16 * count} payload bytes, found {len(body)}")
    amps = np.frombuffer(body, dtype="<c16").astype(complex).reshape(n1, n2, spc, 2)
    return Snapshot(KIND_NAMES[kind], amps)


def write(path, fld):
    with open(path, "wb") as fh:
        fh.write(encode(from_field(fld)))


def read(path) -> Snapshot:
    with open(path, "rb") as fh:
        return decode(fh.read())
