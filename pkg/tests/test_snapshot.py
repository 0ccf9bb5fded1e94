import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvedqw import snapshot
from curvedqw.harness import gaussian_packet
from curvedqw.honeycomb import SpinorField
from curvedqw.lattice import BravaisGrid, TriangularGrid, honeycomb_directions, square_directions
from curvedqw.snapshot import SnapshotError, decode, encode, from_field, to_psi
from curvedqw.triangular import EdgeField


def test_header_layout():
    g = BravaisGrid(3, 2, 0.1, honeycomb_directions())
    psi = np.zeros((2, 3, 2), complex)
    psi[0, 0, 1] = 1 + 2j
    psi[1, 0, 1] = -3
    data = encode(from_field(SpinorField(psi, g)))
    assert data[:4] == b"CQW1"
    assert struct.unpack_from("<IIIII", data, 4) == (1, 0, 3, 2, 1)
    body = np.frombuffer(data[24:], dtype="<f8")
    assert body.size == 3 * 2 * 2 * 2
    # cell (0, 1) is the second in row-major order: up then down, (re, im) pairs
    np.testing.assert_array_equal(body[4:8], [1, 2, -3, 0])


def test_kinds():
    sq = SpinorField(np.zeros((2, 2, 2)), BravaisGrid(2, 2, 0.1, square_directions()))
    assert from_field(sq).kind == "square"
    tri = EdgeField(np.zeros((2, 3, 2, 2)), TriangularGrid(2, 2, 0.1))
    snap = from_field(tri)
    assert snap.kind == "triangular" and snap.spinors_per_cell == 3
    assert struct.unpack_from("<I", encode(snap), 8)[0] == 1


def test_triangular_spinor_order():
    g = TriangularGrid(2, 3, 0.1)
    psi = np.zeros((2, 3, 2, 3), complex)
    psi[1, 2, 0, 0] = 5  # down component of side 2 in cell (0, 0)
    body = np.frombuffer(encode(from_field(EdgeField(psi, g)))[24:], dtype="<f8")
    # cell (0, 0): sides 0, 1, 2, each up(re, im) down(re, im)
    assert body[2 * 4 + 2] == 5


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 2**31), st.booleans())
def test_round_trip(n1, n2, seed, tri):
    rng = np.random.default_rng(seed)
    if tri:
        g = TriangularGrid(n1, n2, 0.1)
        shape = (2, 3, n1, n2)
    else:
        g = BravaisGrid(n1, n2, 0.1, honeycomb_directions())
        shape = (2, n1, n2)
    psi = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    fld = EdgeField(psi, g) if tri else SpinorField(psi, g)
    snap = decode(encode(from_field(fld)))
    np.testing.assert_array_equal(to_psi(snap), psi)


def test_file_round_trip(tmp_path):
    g = BravaisGrid(8, 8, 0.2, honeycomb_directions())
    fld = gaussian_packet(g, 1.0, (1.0, 0.0))
    snapshot.write(tmp_path / "a.cqw", fld)
    snap = snapshot.read(tmp_path / "a.cqw")
    np.testing.assert_array_equal(to_psi(snap), fld.psi)
    assert (tmp_path / "a.cqw").stat().st_size == 24 + 8 * 8 * 2 * 16


@pytest.mark.parametrize(
    "data",
    [
        b"CQW",
        b"XXXX" + struct.pack("<IIIII", 1, 0, 1, 1, 1) + bytes(32),
        b"CQW1" + struct.pack("<IIIII", 2, 0, 1, 1, 1) + bytes(32),
        b"CQW1" + struct.pack("<IIIII", 1, 7, 1, 1, 1) + bytes(32),
        b"CQW1" + struct.pack("<IIIII", 1, 0, 1, 1, 2) + bytes(32),
        b"CQW1" + struct.pack("<IIIII", 1, 0, 1, 1, 1) + bytes(31),
    ],
)
def test_corrupt_snapshots(data):
    with pytest.raises(SnapshotError):
        decode(data)
