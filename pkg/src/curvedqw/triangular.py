"""Quantum walk on the edges of a triangular lattice.

Each physical edge carries one two-spinor.  A substep rotates amplitude
around the triangles: the up component of edge ``(v, k)`` is taken from side
``k - 1`` of the same triangle, the down component from side ``k - 1`` of the
neighbour ``e(v, k)``.  A full step is three substeps followed by the mass
phase.  Coins are sampled at edge midpoints and indexed by the direction of
travel: the amplitude leaving a side-``k - 1`` edge moves along ``u_{k-1}``,
so it is dressed by the direction ``k - 1`` coin of its source edge and undone
by the direction ``k - 1`` coin of its target edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .coins import CoinField, compile_coins
from .geometry import MetricFamily
from .honeycomb import Trajectory, WalkParams, evolve_with, mass_phase
from .lattice import NeighborMap, TriangularGrid


@dataclass
class EdgeField:
    """Two-spinor per edge, ``psi`` of shape ``(2, 3, m1, m2)`` indexed ``(spin, side, a, b)``."""

    psi: np.ndarray
    grid: TriangularGrid
    time: float = 0.0

    def __post_init__(self):
        self.psi = np.ascontiguousarray(self.psi, dtype=complex)
        if self.psi.shape != (2,) + self.grid.shape:
            raise ValueError(f"edge field shape {self.psi.shape} does not match grid {self.grid.shape}")

    @property
    def weight(self) -> float:
        return self.grid.edge_area

    def positions(self) -> np.ndarray:
        return self.grid.positions()

    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * self.weight)

    def copy(self) -> "EdgeField":
        return EdgeField(self.psi.copy(), self.grid, self.time)

    def cell_spinors(self) -> np.ndarray:
        """``(m1, m2, 3, 2)`` view ordered cell-major, side, spin (snapshot layout)."""
        return np.transpose(self.psi, (2, 3, 1, 0))


@dataclass(frozen=True)
class EdgeCoins:
    """Coin arrays arranged for the substep kernel (see module docstring)."""

    Usrc: np.ndarray
    Utgt: np.ndarray
    gamma: np.ndarray
    lapse: np.ndarray


def edge_coins(coins: CoinField) -> EdgeCoins:
    k = np.arange(3)
    km = (k - 1) % 3
    return EdgeCoins(
        np.ascontiguousarray(coins.U[k, k]),
        np.ascontiguousarray(coins.U[km, k]),
        np.ascontiguousarray(coins.gamma[k, k]),
        np.asarray(coins.lapse),
    )


def _offsets(nmap: NeighborMap):
    return tuple(nmap.down_source_offset(k) for k in range(3))


def substep(psi: EdgeField, coins: CoinField, nmap: NeighborMap | None = None,
            eps: float | None = None) -> EdgeField:
    """One rotation substep ``W``; returns a new field."""
    if tuple(coins.shape) != psi.grid.shape:
        raise ValueError(f"coin grid {coins.shape} does not match edge grid {psi.grid.shape}")
    nmap = nmap or psi.grid.neighbors
    eps = psi.grid.eps if eps is None else eps
    ec = edge_coins(coins)
    out = psi.psi.copy()
    _kernels.tri_substep(out, ec.Usrc, ec.Utgt, ec.gamma, eps, _offsets(nmap))
    return EdgeField(out, psi.grid, psi.time)


def step(psi: EdgeField, coins: CoinField, params: WalkParams) -> EdgeField:
    """Three substeps then the edge-wise mass phase."""
    if tuple(coins.shape) != psi.grid.shape:
        raise ValueError(f"coin grid {coins.shape} does not match edge grid {psi.grid.shape}")
    ec = edge_coins(coins)
    offsets = _offsets(psi.grid.neighbors)
    out = psi.psi.copy()
    for _ in range(3):
        _kernels.tri_substep(out, ec.Usrc, ec.Utgt, ec.gamma, params.eps, offsets)
    mass_phase(out, params.mass / ec.lapse, params.eps)
    return EdgeField(out, psi.grid, psi.time + params.eps)


def evolve(psi0: EdgeField, metric: MetricFamily, params: WalkParams, steps: int,
           recompile_every=None, dump_every=None, observer=None, threads: int = 1) -> Trajectory:
    def compile_fn(t):
        return compile_coins(metric, psi0.grid, t, threads=threads)

    return evolve_with(step, compile_fn, psi0, metric, params, steps, recompile_every,
                       dump_every, observer)
