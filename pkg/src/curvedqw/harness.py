"""Initial data, error metrics, observables, dispersion and convergence studies."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import honeycomb, oracle, triangular
from .coins import CoinField, angles_from_beta, unitary_from_angles
from .geometry import FlatMetric, MetricFamily
from .honeycomb import SpinorField, WalkParams
from .lattice import BravaisGrid, TriangularGrid, directions_for, honeycomb_directions, kagome_indices
from .triangular import EdgeField


class StudyError(RuntimeError):
    pass


class OracleNotConverged(StudyError):
    pass


# ---------------------------------------------------------------------------
# fields and initial data


def new_field(grid, psi):
    if isinstance(grid, TriangularGrid):
        return EdgeField(psi, grid)
    return SpinorField(psi, grid)


def make_grid(kind: str, n1: int, n2: int, eps: float):
    """Grid for a lattice kind; for triangular ``n1, n2`` count Bravais sites (``2m``)."""
    if kind == "triangular":
        if n1 % 2 or n2 % 2:
            raise ValueError("triangular lattices need even Bravais dimensions")
        return TriangularGrid(n1 // 2, n2 // 2, eps)
    return BravaisGrid(n1, n2, eps, directions_for(kind))


def _unit_spinor(spinor):
    s = np.asarray(spinor, dtype=complex)
    nrm = np.linalg.norm(s)
    if s.shape != (2,) or nrm == 0:
        raise ValueError("spinor must be a nonzero 2-vector")
    return s / nrm


def gaussian_packet(grid, width=1.0, momentum=(0.0, 0.0), spinor=(1.0, 0.0), center=None):
    """Gaussian packet of unit continuum norm, centred on the torus centre by default.

    ``psi = s exp(-|d|^2 / (2 w^2) + i k.d) / (sqrt(pi) w)`` with ``d`` the
    minimum-image displacement from the centre.
    """
    torus = grid.torus
    c = torus.center if center is None else np.asarray(center, dtype=float)
    d = torus.displacement(grid.positions(), c)
    amp = np.exp(-np.sum(d**2, axis=-1) / (2 * width**2) + 1j * (d @ np.asarray(momentum, float)))
    amp /= math.sqrt(math.pi) * width
    s = _unit_spinor(spinor)
    psi = s.reshape((2,) + (1,) * amp.ndim) * amp[None]
    return new_field(grid, psi)


def periodic_packet(grid, kappa=0.25, momentum=(0, 0), spinor=(1.0, 0.0)):
    """Smooth periodic bump ``exp(kappa (cos 2 pi f1 + cos 2 pi f2 - 2))``, normalized.

    ``momentum`` is given in whole Fourier modes of the torus so the phase stays periodic.
    """
    torus = grid.torus
    f = torus.fractional(grid.positions() - torus.center)
    amp = np.exp(kappa * (np.cos(2 * np.pi * f[..., 0]) + np.cos(2 * np.pi * f[..., 1]) - 2))
    amp = amp * np.exp(2j * np.pi * (momentum[0] * f[..., 0] + momentum[1] * f[..., 1]))
    s = _unit_spinor(spinor)
    fld = new_field(grid, s.reshape((2,) + (1,) * amp.ndim) * amp[None])
    fld.psi /= math.sqrt(fld.norm())
    return fld


def plane_wave(grid, k, branch=1, mass=0.0):
    pw = oracle.PlaneWaveSolution(np.asarray(k, dtype=float), branch, mass)
    pos = grid.positions()
    ph = np.exp(1j * (pos @ pw.k))
    psi = pw.spinor.reshape((2,) + (1,) * ph.ndim) * ph[None] / math.sqrt(grid.torus.area)
    return new_field(grid, psi)


def delta_field(grid, site=None, spinor=(1.0, 1.0)):
    """Unit-norm excitation of a single site (or edge)."""
    shape = grid.shape
    if site is None:
        site = tuple(s // 2 for s in shape)
    psi = np.zeros((2,) + tuple(shape), dtype=complex)
    psi[(slice(None),) + tuple(site)] = _unit_spinor(spinor)
    fld = new_field(grid, psi)
    fld.psi /= math.sqrt(fld.norm())
    return fld


# ---------------------------------------------------------------------------
# metrics and observables


def l2_distance(a, b) -> float:
    """``sqrt(sum |a - b|^2 * area)`` for fields on the same grid."""
    if a.psi.shape != b.psi.shape:
        raise ValueError(f"shape mismatch {a.psi.shape} vs {b.psi.shape}")
    return float(math.sqrt(np.sum(np.abs(a.psi - b.psi) ** 2) * a.weight))


def restrict(field: SpinorField, target):
    """Sample a Bravais-grid field onto a coarser grid or a triangular edge grid sharing its torus."""
    n1, n2 = field.grid.shape
    if isinstance(target, TriangularGrid):
        m = 2 * target.m1
        if n1 % m or n1 != n2 or target.m1 != target.m2:
            raise ValueError("oracle grid does not contain the edge midpoints")
        s = n1 // m
        p, q = kagome_indices(target, m)
        return EdgeField(field.psi[:, s * p, s * q], target, field.time)
    if n1 % target.n1 or n2 % target.n2 or n1 // target.n1 != n2 // target.n2:
        raise ValueError("target grid is not a subsampling of the field grid")
    s = n1 // target.n1
    if not math.isclose(field.grid.eps * s, target.eps, rel_tol=1e-9):
        raise ValueError("grid spacings are incompatible")
    return SpinorField(field.psi[:, ::s, ::s], target, field.time)


def mutual_distance(hc: SpinorField, tri: EdgeField) -> float:
    """Edge-weighted distance between a triangular field and a honeycomb field on the same torus."""
    return l2_distance(tri, restrict(hc, tri.grid))


@dataclass
class Observables:
    norm: float
    mean_x: float
    mean_y: float
    spread: float
    density_up: float
    density_down: float


def observables(fld) -> Observables:
    """Norm, circular mean position, RMS spread and per-component weights."""
    w = fld.weight
    dens = np.abs(fld.psi) ** 2
    p = dens.sum(axis=0)
    total = float(p.sum())
    norm = total * w
    torus = fld.grid.torus
    pos = fld.positions()
    if total == 0:
        c = torus.center
        return Observables(0.0, float(c[0]), float(c[1]), 0.0, 0.0, 0.0)
    f = torus.fractional(pos)
    mean_f = np.empty(2)
    for r in range(2):
        z = np.sum(p * np.exp(2j * np.pi * f[..., r])) / total
        if abs(z) < 1e-12:
            mean_f[r] = 0.5
        else:
            mean_f[r] = (np.angle(z) / (2 * np.pi)) % 1.0
    mean = torus.cartesian(mean_f)
    d = torus.displacement(pos, mean)
    spread = math.sqrt(float(np.sum(p * np.sum(d**2, axis=-1)) / total))
    return Observables(
        norm, float(mean[0]), float(mean[1]), spread,
        float(dens[0].sum() * w), float(dens[1].sum() * w),
    )


# ---------------------------------------------------------------------------
# dispersion


def bloch_matrix(n, mt: float, eps: float, k, dirs=None) -> np.ndarray:
    """One-step matrix of the homogeneous walk at wavevector ``k``.

    ``n`` holds one unit vector per direction; translations become
    ``diag(exp(-i eps u.k), exp(+i eps u.k))``.
    """
    dirs = dirs or (honeycomb_directions() if len(n) == 3 else directions_for("square"))
    U = unitary_from_angles(angles_from_beta(np.asarray(n, dtype=float)))
    k = np.asarray(k, dtype=float)
    M = np.eye(2, dtype=complex)
    for i, u in enumerate(dirs.vectors):
        ph = eps * float(u @ k)
        T = np.diag([np.exp(-1j * ph), np.exp(1j * ph)])
        M = U[i].conj().T @ T @ U[i] @ M
    return np.diag([np.exp(-1j * eps * mt), np.exp(1j * eps * mt)]) @ M


def dispersion_extract(coins, mt: float, eps: float, k) -> tuple:
    """Eigenphases (ascending) of the one-step Bloch matrix.

    ``coins`` is a homogeneous :class:`CoinField` or an array of unit vectors.
    """
    if isinstance(coins, CoinField):
        n = coins.n.reshape(coins.n.shape[0], -1, 3)
        if np.abs(n - n[:, :1]).max() > 1e-12 or np.abs(coins.gamma).max() > 0:
            raise ValueError("dispersion extraction needs homogeneous coins")
        n, dirs = n[:, 0], coins.dirs
    else:
        n, dirs = np.asarray(coins, dtype=float), None
    ev = np.linalg.eigvals(bloch_matrix(n, mt, eps, k, dirs))
    return tuple(sorted(float(a) for a in np.angle(ev)))


def group_velocity(n, mt, eps, direction, k0=0.05, dk=1e-4) -> float:
    """Slope of the upper eigenphase per unit time along ``direction`` at ``|k| = k0``."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    w1 = dispersion_extract(n, mt, eps, (k0 + dk) * d)[1]
    w0 = dispersion_extract(n, mt, eps, (k0 - dk) * d)[1]
    return (w1 - w0) / (2 * dk * eps)


# ---------------------------------------------------------------------------
# convergence studies


@dataclass
class StudySetup:
    lattice: str = "honeycomb"
    metric: MetricFamily = field(default_factory=FlatMetric)
    mass: float = 0.0
    time: float = 2.0
    domain: float = 12.8
    width: float = 1.0
    momentum: tuple = (1.0, 0.5)
    spinor: tuple = (1.0, 0.0)

    def describe(self) -> dict:
        return {
            "lattice": self.lattice, "metric": repr(self.metric), "mass": self.mass,
            "time": self.time, "domain": self.domain, "width": self.width,
            "momentum": list(self.momentum),
            "spinor": [[complex(s).real, complex(s).imag] for s in self.spinor],
        }


@dataclass
class ConvergenceReport:
    epsilons: list
    errors: list
    slope: float
    intercept: float
    fit_residual: float
    oracle_self_error: float = 0.0
    metadata: dict = field(default_factory=dict)

    def rows(self):
        return list(zip(self.epsilons, self.errors))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epsilon", "l2_error"])
            for e, err in self.rows():
                w.writerow([f"{e:.17g}", f"{err:.17g}"])

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def fit_order(epsilons, errors):
    """Least-squares slope of log(error) against log(eps); max abs residual."""
    x = np.log(np.asarray(epsilons, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.abs(A @ np.array([slope, intercept]) - y).max())
    return float(slope), float(intercept), resid


def check_halving(epsilons):
    eps = [float(e) for e in epsilons]
    if len(eps) < 3:
        raise StudyError("a convergence study needs at least three epsilons")
    for a, b in zip(eps, eps[1:]):
        if not math.isclose(a, 2 * b, rel_tol=1e-9):
            raise StudyError(f"epsilons must halve: {a} -> {b}")
    return eps


def grid_size(domain, eps):
    n = domain / eps
    if abs(n - round(n)) > 1e-9 * n:
        raise StudyError(f"domain {domain} is not a multiple of eps {eps}")
    return int(round(n))


def oracle_grid(setup: StudySetup, epsilons) -> BravaisGrid:
    """Oracle resolution: four times finer than the coarsest walk, never coarser than the finest."""
    h = min(epsilons[0] / 4, epsilons[-1])
    n = grid_size(setup.domain, h)
    return BravaisGrid(n, n, h, honeycomb_directions())


def walk_grid(setup, eps):
    """Walk grid of spacing ``eps`` covering the study domain."""
    n = grid_size(setup.domain, eps)
    return make_grid(setup.lattice, n, n, eps)


def walk_final(setup: StudySetup, eps: float, threads: int = 1):
    """Walk state at ``setup.time`` for spacing ``eps``."""
    return _walk(setup, walk_grid(setup, eps), eps, threads)


def _walk(setup, grid, eps, threads=1):
    psi0 = gaussian_packet(grid, setup.width, setup.momentum, setup.spinor)
    steps = int(round(setup.time / eps))
    if abs(steps * eps - setup.time) > 1e-9:
        raise StudyError(f"time {setup.time} is not a multiple of eps {eps}")
    mod = triangular if isinstance(grid, TriangularGrid) else honeycomb
    return mod.evolve(psi0, setup.metric, WalkParams(eps, setup.mass), steps, threads=threads).final


def run_oracle(setup: StudySetup, grid: BravaisGrid) -> SpinorField:
    chi0 = gaussian_packet(grid, setup.width, setup.momentum, setup.spinor)
    if isinstance(setup.metric, FlatMetric):
        return oracle.flat_evolve(chi0, setup.mass, setup.time)
    return oracle.evolve_rk4(chi0, setup.metric, setup.time, mass=setup.mass)


def convergence_study(setup: StudySetup, epsilons, threads: int = 1,
                      require_oracle=True) -> ConvergenceReport:
    """Walk error against the continuum solution for halving ``epsilons``.

    Flat metrics use the exact flat evolution on each walk grid.  Curved
    metrics use the RK4 oracle on a grid four times finer than the coarsest
    walk; its difference to a run at twice the spacing must stay ten times
    below the smallest walk error.
    """
    eps = check_halving(epsilons)
    flat = isinstance(setup.metric, FlatMetric) and setup.lattice != "triangular"
    grids = [walk_grid(setup, e) for e in eps]

    def one(k):
        return _walk(setup, grids[k], eps[k])

    with ThreadPoolExecutor(max(1, min(threads, len(eps)))) as pool:
        finals = list(pool.map(one, range(len(eps))))

    self_err = 0.0
    if flat:
        errors = [l2_distance(f, run_oracle(setup, g)) for f, g in zip(finals, grids)]
    else:
        og = oracle_grid(setup, eps)
        ref = run_oracle(setup, og)
        errors = [l2_distance(f, restrict(ref, g)) for f, g in zip(finals, grids)]
        if isinstance(setup.metric, FlatMetric):
            self_err = 0.0
        else:
            coarse = BravaisGrid(og.n1 // 2, og.n2 // 2, 2 * og.eps, og.dirs)
            self_err = l2_distance(run_oracle(setup, coarse), restrict(ref, coarse))
        if require_oracle and self_err >= 0.1 * min(errors):
            raise OracleNotConverged(
                f"oracle self-convergence {self_err:.3g} is not one order below the walk error "
                f"{min(errors):.3g}"
            )
    slope, intercept, resid = fit_order(eps, errors)
    meta = setup.describe()
    if not flat:
        meta["oracle_h"] = og.eps
    return ConvergenceReport(eps, [float(e) for e in errors], slope, intercept, resid,
                             float(self_err), meta)
