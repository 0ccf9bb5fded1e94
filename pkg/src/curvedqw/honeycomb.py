"""Spacetime-dependent quantum walk on the honeycomb (three-direction) lattice.

One step is

    psi <- exp(-i m~ eps sigma^z) prod_{i=0,1,2} U_i^dag T_i U_i exp(-i eps gamma_i) psi

with factors applied in the order i = 0, 1, 2 and ``m~ = m / e^t_0``.  The
translation ``T_i`` moves the up component one lattice step along ``u_i`` and
the down component one step against it.  The square walk is the same update
with two directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .coins import CoinField, compile_coins
from .geometry import MetricFamily
from .lattice import BravaisGrid


@dataclass
class SpinorField:
    """Complex two-spinor per site, ``psi`` of shape ``(2, n1, n2)``."""

    psi: np.ndarray
    grid: BravaisGrid
    time: float = 0.0

    def __post_init__(self):
        self.psi = np.ascontiguousarray(self.psi, dtype=complex)
        if self.psi.shape != (2,) + self.grid.shape:
            raise ValueError(f"spinor shape {self.psi.shape} does not match grid {self.grid.shape}")

    @property
    def weight(self) -> float:
        """Area per degree of freedom."""
        return self.grid.cell_area

    def positions(self) -> np.ndarray:
        return self.grid.positions()

    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * self.weight)

    def copy(self) -> "SpinorField":
        return SpinorField(self.psi.copy(), self.grid, self.time)


@dataclass(frozen=True)
class WalkParams:
    eps: float
    mass: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("walk step eps must be positive")

    def mass_field(self, coins: CoinField) -> np.ndarray:
        """``m / e^t_0`` per site."""
        return self.mass / np.asarray(coins.lapse)


def _check(psi: SpinorField, coins: CoinField):
    if tuple(coins.shape) != psi.grid.shape:
        raise ValueError(f"coin grid {coins.shape} does not match field grid {psi.grid.shape}")


def translate(psi: SpinorField, i: int, inverse: bool = False) -> SpinorField:
    """Conditional shift along direction ``i``; ``inverse`` swaps the spin roles."""
    da, db = psi.grid.dirs.steps[i]
    s = -1 if inverse else 1
    out = np.empty_like(psi.psi)
    out[0] = np.roll(psi.psi[0], (s * da, s * db), axis=(0, 1))
    out[1] = np.roll(psi.psi[1], (-s * da, -s * db), axis=(0, 1))
    return SpinorField(out, psi.grid, psi.time)


def mass_phase(psi: np.ndarray, mt: np.ndarray, eps: float):
    """In place ``psi <- exp(-i m~ eps sigma^z) psi``."""
    ph = np.exp(-1j * eps * mt)
    psi[0] *= ph
    psi[1] *= np.conj(ph)


def step(psi: SpinorField, coins: CoinField, params: WalkParams) -> SpinorField:
    """One walk step; returns a new field at time ``psi.time + eps``."""
    _check(psi, coins)
    out = psi.psi.copy()
    for i, (da, db) in enumerate(psi.grid.dirs.steps):
        _kernels.bravais_factor(out, coins.U[i], coins.gamma[i], params.eps, da, db)
    mass_phase(out, params.mass_field(coins), params.eps)
    return SpinorField(out, psi.grid, psi.time + params.eps)


@dataclass
class Trajectory:
    """Final state plus the snapshots and observer records of a run."""

    final: object
    snapshots: list = field(default_factory=list)  # (step, field)
    coin_compiles: int = 0


def evolve_with(step_fn, compile_fn, psi0, metric: MetricFamily, params: WalkParams, steps: int,
                recompile_every=None, dump_every=None, observer=None) -> Trajectory:
    """Generic driver shared by the lattice walks."""
    if steps < 0:
        raise ValueError("number of steps must be non-negative")
    if recompile_every is None:
        recompile_every = steps + 1 if metric.is_static else 1
    if recompile_every < 1:
        raise ValueError("recompile_every must be >= 1")
    traj = Trajectory(psi0)
    psi = psi0
    if observer is not None:
        observer(0, psi)
    if dump_every:
        traj.snapshots.append((0, psi.copy()))
    coins = None
    for n in range(steps):
        if coins is None or n % recompile_every == 0:
            coins = compile_fn(psi.time)
            traj.coin_compiles += 1
        psi = step_fn(psi, coins, params)
        if observer is not None:
            observer(n + 1, psi)
        if dump_every and (n + 1) % dump_every == 0:
            traj.snapshots.append((n + 1, psi.copy()))
    traj.final = psi
    return traj


def evolve(psi0: SpinorField, metric: MetricFamily, params: WalkParams, steps: int,
           recompile_every=None, dump_every=None, observer=None, threads: int = 1) -> Trajectory:
    """Run ``steps`` walk steps under ``metric``, recompiling coins as needed.

    Static metrics are compiled once unless ``recompile_every`` is given;
    time-dependent metrics are recompiled every step by default.
    """
    def compile_fn(t):
        return compile_coins(metric, psi0.grid, t, threads=threads)

    return evolve_with(step, compile_fn, psi0, metric, params, steps, recompile_every,
                       dump_every, observer)
