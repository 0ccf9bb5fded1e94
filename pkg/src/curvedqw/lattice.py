"""Lattice geometry: direction sets, Bravais grids and the triangular edge lattice.

Both the honeycomb walk and the triangular walk live on the same kind of
periodic torus.  A Bravais grid of shape ``(n1, n2)`` places site ``(a, b)``
at ``eps * (a * basis[0] + b * basis[1])``.  For the three-direction lattices
the basis is ``(u_0, u_1)``; ``u_2 = -u_0 - u_1`` is the composite step
``(-1, -1)``.

Triangular cells ``(a, b)`` hold an up-triangle and a down-triangle with side
length ``2 eps``.  Edges are stored once, owned by their up-triangle; the
midpoint of edge ``(k, a, b)`` sits on the Bravais grid of spacing ``eps``
(the kagome sublattice), so a triangular lattice of ``m x m`` cells shares the
torus of the ``2m x 2m`` Bravais grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class LatticeDirections:
    """Unit step directions ``u_i`` and their integer steps on the Bravais grid."""

    vectors: np.ndarray  # (D, 2)
    steps: tuple  # D integer (da, db) pairs
    basis: np.ndarray  # (2, 2) Bravais basis vectors (rows)
    name: str

    @property
    def count(self) -> int:
        return len(self.steps)

    @property
    def is_square(self) -> bool:
        return self.count == 2


def honeycomb_directions() -> LatticeDirections:
    u = np.array([[1.0, 0.0], [-0.5, SQRT3 / 2], [-0.5, -SQRT3 / 2]])
    return LatticeDirections(u, ((1, 0), (0, 1), (-1, -1)), u[:2].copy(), "honeycomb")


def square_directions() -> LatticeDirections:
    u = np.eye(2)
    return LatticeDirections(u, ((1, 0), (0, 1)), u.copy(), "square")


def directions_for(kind: str) -> LatticeDirections:
    if kind == "square":
        return square_directions()
    if kind in ("honeycomb", "triangular"):
        return honeycomb_directions()
    raise ValueError(f"unknown lattice kind {kind!r}")


@dataclass(frozen=True)
class Torus:
    """Periodic domain spanned by two period vectors (rows of ``periods``)."""

    periods: np.ndarray  # (2, 2)

    def fractional(self, pos: np.ndarray) -> np.ndarray:
        inv = np.linalg.inv(self.periods.T)
        return np.einsum("ij,...j->...i", inv, pos)

    def cartesian(self, frac: np.ndarray) -> np.ndarray:
        return np.einsum("ij,...i->...j", self.periods, frac)

    def wrap(self, pos: np.ndarray) -> np.ndarray:
        """Map positions into the fundamental cell ``[0, 1)^2`` (fractional)."""
        f = self.fractional(pos)
        f = f - np.floor(f)
        return self.cartesian(f)

    def displacement(self, pos: np.ndarray, origin) -> np.ndarray:
        """Displacement ``pos - origin`` reduced to fractional ``[-1/2, 1/2)``."""
        f = self.fractional(np.asarray(pos) - np.asarray(origin))
        f = f - np.floor(f + 0.5)
        return self.cartesian(f)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.periods[0] + self.periods[1])

    @property
    def area(self) -> float:
        return float(abs(np.linalg.det(self.periods)))


@dataclass(frozen=True)
class BravaisGrid:
    """``n1 x n2`` periodic grid with spacing ``eps`` along ``dirs.basis``."""

    n1: int
    n2: int
    eps: float
    dirs: LatticeDirections

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1 or not self.eps > 0:
            raise ValueError("grid dimensions and spacing must be positive")

    @property
    def shape(self):
        return (self.n1, self.n2)

    @property
    def torus(self) -> Torus:
        b = self.dirs.basis
        return Torus(np.array([self.n1 * self.eps * b[0], self.n2 * self.eps * b[1]]))

    @property
    def cell_area(self) -> float:
        return float(self.eps**2 * abs(np.linalg.det(self.dirs.basis)))

    def positions(self) -> np.ndarray:
        """``(n1, n2, 2)`` site positions inside the fundamental cell."""
        a = np.arange(self.n1)[:, None]
        b = np.arange(self.n2)[None, :]
        basis = self.dirs.basis
        x = self.eps * (a * basis[0, 0] + b * basis[1, 0])
        y = self.eps * (a * basis[0, 1] + b * basis[1, 1])
        return np.stack(np.broadcast_arrays(x, y), axis=-1)

    def gradient_matrix(self) -> np.ndarray:
        """Matrix ``M`` with ``grad f = M @ (d_a f, d_b f)`` for axis derivatives."""
        return np.linalg.inv(self.dirs.basis)

    def lattice_distance(self, a0: int, b0: int) -> np.ndarray:
        """Hop distance from site ``(a0, b0)`` using steps ``+-dirs.steps``."""
        da = (np.arange(self.n1)[:, None] - a0) % self.n1
        db = (np.arange(self.n2)[None, :] - b0) % self.n2
        best = np.full(self.shape, np.iinfo(np.int64).max, dtype=np.int64)
        for sa in (0, -self.n1):
            for sb in (0, -self.n2):
                best = np.minimum(best, _hops(da + sa, db + sb, self.dirs))
        return best


def _hops(da, db, dirs: LatticeDirections):
    if dirs.is_square:
        return np.abs(da) + np.abs(db)
    # steps +-(1,0), +-(0,1), +-(1,1)
    same = np.sign(da) * np.sign(db) >= 0
    return np.where(same, np.maximum(np.abs(da), np.abs(db)), np.abs(da) + np.abs(db))


# ---------------------------------------------------------------------------
# triangular edge lattice

# up-triangle (a, b), side k borders the down-triangle at (a, b) - DELTA[k];
# down-triangle (a, b), side k borders the up-triangle at (a, b) + DELTA[k].
DELTA = ((0, 0), (1, 0), (0, 1))


@dataclass(frozen=True)
class NeighborMap:
    """Adjacency of the periodic triangulation with ``m1 x m2`` cells.

    Triangles are labelled ``(parity, a, b)`` with parity 0 for up and 1 for
    down.  ``neighbor(v, k)`` is the triangle across side ``k`` of ``v``.
    """

    m1: int
    m2: int

    def __post_init__(self):
        if self.m1 < 2 or self.m2 < 2:
            raise ValueError("triangular grid needs at least 2 x 2 cells")

    def neighbor(self, v, k: int):
        parity, a, b = v
        da, db = DELTA[k]
        if parity == 0:
            return (1, (a - da) % self.m1, (b - db) % self.m2)
        return (0, (a + da) % self.m1, (b + db) % self.m2)

    def triangles(self):
        for parity in (0, 1):
            for a in range(self.m1):
                for b in range(self.m2):
                    yield (parity, a, b)

    def edge_owner(self, v, k: int):
        """Canonical storage index ``(k, a, b)`` of side ``k`` of triangle ``v``."""
        if v[0] == 0:
            return (k, v[1], v[2])
        up = self.neighbor(v, k)
        return (k, up[1], up[2])

    def down_source_offset(self, k: int):
        """Cell offset of the canonical edge feeding the down component of ``(k, a, b)``.

        The down component of edge ``(k, a, b)`` comes from side ``k - 1`` of
        the down-triangle across side ``k``.
        """
        da, db = DELTA[k]
        pa, pb = DELTA[(k - 1) % 3]
        return (pa - da, pb - db)


def build_neighbor_map(m1: int, m2: int) -> NeighborMap:
    return NeighborMap(int(m1), int(m2))


@dataclass(frozen=True)
class TriangularGrid:
    """Triangular lattice of ``m1 x m2`` cells, triangle side ``2 eps``."""

    m1: int
    m2: int
    eps: float

    def __post_init__(self):
        if self.m1 < 2 or self.m2 < 2 or not self.eps > 0:
            raise ValueError("triangular grid needs >= 2 x 2 cells and eps > 0")

    @property
    def shape(self):
        return (3, self.m1, self.m2)

    @property
    def neighbors(self) -> NeighborMap:
        return NeighborMap(self.m1, self.m2)

    @property
    def torus(self) -> Torus:
        u0, u1 = honeycomb_directions().basis
        if self.m1 == self.m2:
            # same point set as the (2m x 2m) Bravais torus; use its cell
            return Torus(np.array([2 * self.m1 * self.eps * u0, 2 * self.m2 * self.eps * u1]))
        return Torus(np.array([2 * self.m1 * self.eps * u0, 2 * self.m2 * self.eps * (u0 + u1)]))

    @property
    def edge_area(self) -> float:
        return float(2.0 * SQRT3 / 3.0 * self.eps**2)

    def bravais_indices(self):
        """``(p, q)`` integer coordinates (spacing ``eps``) of every edge midpoint.

        The embedding is the one for which the up component of an edge of
        side ``k - 1`` moves by ``+eps u_{k-1}`` when the triangles rotate.
        """
        a = np.arange(self.m1)[:, None]
        b = np.arange(self.m2)[None, :]
        p = np.empty((3, self.m1, self.m2), dtype=np.int64)
        q = np.empty_like(p)
        base_p = -2 * a - 2 * b
        base_q = -2 * b + 0 * a
        for k, (op, oq) in enumerate(((2, 1), (1, 1), (1, 0))):
            p[k] = base_p - op
            q[k] = base_q - oq
        return p, q

    def positions(self) -> np.ndarray:
        """``(3, m1, m2, 2)`` edge midpoints inside the fundamental cell."""
        p, q = self.bravais_indices()
        u0, u1 = honeycomb_directions().basis
        pos = self.eps * (p[..., None] * u0 + q[..., None] * u1)
        return self.torus.wrap(pos)


def kagome_indices(grid: TriangularGrid, n: int):
    """Bravais indices of the edges on an ``n x n`` grid with the same torus."""
    if grid.m1 != grid.m2 or n != 2 * grid.m1:
        raise ValueError("triangular grid of m x m cells matches the 2m x 2m Bravais grid")
    p, q = grid.bravais_indices()
    return p % n, q % n
