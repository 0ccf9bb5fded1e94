"""Coin compiler: deformation field -> beta matrices -> coin unitaries and phases.

For each site the three unit vectors ``n^i`` (``beta^i = n^i . sigma``) must
reproduce the deformed direction sum

    sum_i u_i^j n^i = (Lambda^j_1, Lambda^j_2, 0),    j in {x, y}

with ``|n^i| = 1``.  This is solved by damped Newton on the 9 unknowns,
continuing the solution from site to site so the branch stays smooth.  On the
square lattice the system has no freedom and is solvable only for unit rows.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import MetricFamily
from .lattice import BravaisGrid, LatticeDirections, TriangularGrid, honeycomb_directions

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50
NEWTON_MAXHALVE = 20
N_RESTARTS = 8
BAND_SITES = 4096  # sites per independently seeded continuation band
POLE_TOL = 1e-12

SIGMA = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)


class CoinError(RuntimeError):
    """The deformation cannot be absorbed into coin unitaries."""

    def __init__(self, message, site=None):
        self.site = site
        super().__init__(message if site is None else f"{message} (site {site})")


class Infeasible(CoinError):
    """A necessary solvability condition is violated."""


class NoSolution(CoinError):
    """Newton failed from the seed and from every restart."""


@dataclass(frozen=True)
class BetaTriple:
    """Unit vectors ``n[i]`` of ``beta^i = n[i] . sigma`` and the C1 residual."""

    n: np.ndarray
    residual: float = 0.0


@dataclass(frozen=True)
class CoinAngles:
    theta: np.ndarray
    phi: np.ndarray


def pauli(n) -> np.ndarray:
    """``n . sigma`` for vectors ``(..., 3)``."""
    return np.einsum("...k,kab->...ab", np.asarray(n, dtype=float), SIGMA)


def direction_sums(n, dirs: LatticeDirections) -> np.ndarray:
    """``sum_i u_i^j n^i`` for ``n`` of shape ``(..., D, 3)`` -> ``(..., 2, 3)``."""
    return np.einsum("ij,...ic->...jc", dirs.vectors, n)


def targets_from_deformation(lam) -> np.ndarray:
    """``(Lambda^j_1, Lambda^j_2, 0)`` rows; requires ``Lambda^s_0 = 0``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam[..., :, 0] != 0):
        raise CoinError("deformations with nonzero Lambda^s_0 cannot be absorbed into coins")
    tgt = np.zeros(lam.shape[:-2] + (2, 3))
    tgt[..., :, :2] = lam[..., :, 1:]
    return tgt


def c1_residual(n, lam, dirs: LatticeDirections) -> float:
    tgt = targets_from_deformation(lam)
    return float(np.abs(direction_sums(n, dirs) - tgt).max())


def flat_taus(dirs: LatticeDirections | None = None) -> BetaTriple:
    """Symmetric flat solution ``n^i = (2/3) u_i + (sqrt5/3) z``.

    On the square lattice the flat betas are simply ``sigma^x`` and ``sigma^y``.
    """
    dirs = dirs or honeycomb_directions()
    if dirs.is_square:
        return BetaTriple(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    n = np.zeros((3, 3))
    n[:, :2] = (2.0 / 3.0) * dirs.vectors
    n[:, 2] = np.sqrt(5.0) / 3.0
    return BetaTriple(n)


def square_feasible(lam, tol: float = 1e-10) -> bool:
    """True iff every row of the spatial deformation has unit Euclidean norm."""
    lam = np.asarray(lam, dtype=float)
    spatial = lam[..., :, 1:] if lam.shape[-1] == 3 else lam
    rows = np.sqrt(np.sum(spatial**2, axis=-1))
    return bool(np.all(np.abs(rows - 1.0) <= tol))


def speed_bound(dirs: LatticeDirections) -> np.ndarray:
    """Upper bound of ``|sum_i u_i^j n^i|`` over unit vectors, per axis j."""
    return np.abs(dirs.vectors).sum(axis=0)


def check_feasible(tgt, dirs: LatticeDirections):
    """Raise :class:`Infeasible` at the first site violating a necessary condition."""
    tgt = np.asarray(tgt).reshape(-1, 2, 3)
    if dirs.is_square:
        rows = np.sqrt(np.sum(tgt**2, axis=-1))
        bad = np.nonzero(np.any(np.abs(rows - 1.0) > 1e-10, axis=-1))[0]
        if bad.size:
            k = int(bad[0])
            raise Infeasible(
                "square lattice requires unit-norm deformation rows, sum_k (Lambda^j_k)^2 = 1; "
                f"got row norms {rows[k].round(12).tolist()}",
                site=k,
            )
        return
    norms = np.sqrt(np.sum(tgt**2, axis=-1))
    bad = np.nonzero(np.any(norms > speed_bound(dirs) + 1e-12, axis=-1))[0]
    if bad.size:
        k = int(bad[0])
        raise Infeasible(
            f"deformation rows {tgt[k, :, :2].round(12).tolist()} exceed the lattice bound "
            f"{speed_bound(dirs).round(12).tolist()}",
            site=k,
        )


def _restart_seeds(seed, count=N_RESTARTS):
    rng = np.random.default_rng(20180529)
    seeds = []
    for _ in range(count):
        s = np.asarray(seed) + 0.5 * rng.standard_normal(np.shape(seed))
        s /= np.linalg.norm(s, axis=-1, keepdims=True)
        seeds.append(s)
    return seeds


def _solve_site(tgt, dirs, seed):
    out = np.empty((3, 3))
    u = np.ascontiguousarray(dirs.vectors)
    tgt = np.ascontiguousarray(tgt, dtype=float)
    for s in [np.asarray(seed, dtype=float)] + _restart_seeds(seed):
        if _kernels.newton_solve(tgt, u, np.ascontiguousarray(s), out, NEWTON_TOL,
                                 NEWTON_MAXITER, NEWTON_MAXHALVE):
            return out
    return None


def solve_betas(lam, dirs: LatticeDirections | None = None, seed: BetaTriple | None = None):
    """Unit vectors satisfying the duality conditions at one point.

    ``lam`` is the 2x3 deformation ``Lambda^s_a``.  Raises :class:`Infeasible`
    when a necessary condition fails and :class:`NoSolution` when Newton does
    not converge from ``seed`` nor from the perturbed restarts.
    """
    dirs = dirs or honeycomb_directions()
    tgt = targets_from_deformation(lam)
    check_feasible(tgt, dirs)
    if dirs.is_square:
        n = tgt.copy()
        return BetaTriple(n, float(np.abs(direction_sums(n, dirs) - tgt).max()))
    seed = seed or flat_taus(dirs)
    n = _solve_site(tgt, dirs, seed.n)
    if n is None:
        raise NoSolution("Newton did not converge from the seed or any restart")
    return BetaTriple(n, float(np.abs(direction_sums(n, dirs) - tgt).max()))


def compile_betas(targets, dirs: LatticeDirections, seed=None, threads: int = 1,
                  band: int | None = None) -> np.ndarray:
    """Solve every site of ``targets`` (``(M, 2, 3)``) by continuation.

    Sites are split into fixed bands of ``band`` sites (default
    ``BAND_SITES``); within a band each site is seeded from the previous
    solution and every band starts from ``seed``.  The bands are kept only if
    the first site of each agrees with what continuation from the previous
    band gives, otherwise the whole sweep is redone sequentially.  The
    partition does not depend on ``threads``, so the output is bitwise
    independent of the thread count.
    """
    targets = np.ascontiguousarray(targets, dtype=float).reshape(-1, 2, 3)
    check_feasible(targets, dirs)
    if dirs.is_square:
        return targets.copy()
    seed = flat_taus(dirs).n if seed is None else np.asarray(seed, dtype=float)
    m = targets.shape[0]
    out = np.empty((m, 3, 3))
    bounds = list(range(0, m, band or BAND_SITES)) + [m]
    nb = len(bounds) - 1
    if nb > 1:
        def one(k):
            _sweep(targets, dirs, seed, out, bounds[k], bounds[k + 1])

        if threads > 1:
            with ThreadPoolExecutor(min(threads, nb)) as pool:
                list(pool.map(one, range(nb)))
        else:
            for k in range(nb):
                one(k)
        if _bands_consistent(targets, dirs, out, bounds):
            return out
        log.info("coin bands disagree with continuation; recompiling sequentially")
    _sweep(targets, dirs, seed, out, 0, m)
    return out


def _sweep(targets, dirs, seed, out, start, stop):
    u = np.ascontiguousarray(dirs.vectors)
    prev = np.asarray(seed, dtype=float)
    k = start
    while k < stop:
        done = _kernels.newton_sweep(targets[k:stop], u, np.ascontiguousarray(prev), out[k:stop],
                                     NEWTON_TOL, NEWTON_MAXITER, NEWTON_MAXHALVE)
        k += done
        if k >= stop:
            break
        sol = _solve_site(targets[k], dirs, prev if k == start else out[k - 1])
        if sol is None:
            raise NoSolution("Newton did not converge from the seed or any restart", site=k)
        out[k] = sol
        prev = out[k]
        k += 1


def _bands_consistent(targets, dirs, out, bounds) -> bool:
    u = np.ascontiguousarray(dirs.vectors)
    check = np.empty((3, 3))
    for b in bounds[1:-1]:
        ok = _kernels.newton_solve(targets[b], u, np.ascontiguousarray(out[b - 1]), check,
                                   NEWTON_TOL, NEWTON_MAXITER, NEWTON_MAXHALVE)
        if not ok or np.abs(check - out[b]).max() > 1e-12:
            return False
    return True


# ---------------------------------------------------------------------------
# angles and unitaries


def angles_from_beta(n) -> CoinAngles:
    """Polar angles of unit vectors; ``phi = 0`` at the poles."""
    n = np.asarray(n, dtype=float)
    rho = np.hypot(n[..., 0], n[..., 1])
    theta = np.arctan2(rho, n[..., 2])
    phi = np.where(rho < POLE_TOL, 0.0, np.arctan2(n[..., 1], n[..., 0]))
    return CoinAngles(theta, phi)


def beta_from_angles(a: CoinAngles) -> np.ndarray:
    st = np.sin(a.theta)
    return np.stack([st * np.cos(a.phi), st * np.sin(a.phi), np.cos(a.theta)], axis=-1)


def unitary_from_angles(a: CoinAngles) -> np.ndarray:
    """Coin unitaries with ``U^dag sigma^z U = n . sigma``."""
    theta = np.asarray(a.theta, dtype=float)
    phi = np.asarray(a.phi, dtype=float)
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    ep = np.exp(0.5j * phi)
    em = np.conj(ep)
    u = np.empty(theta.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = ep * c
    u[..., 0, 1] = em * s
    u[..., 1, 0] = -ep * s
    u[..., 1, 1] = em * c
    return u


def beta_matrices(U) -> np.ndarray:
    """``U^dag sigma^z U`` for stacks of unitaries."""
    U = np.asarray(U)
    return np.einsum("...ba,bc,...cd->...ad", U.conj(), SIGMA[2], U)


def wrap_angle(d):
    """Map angle differences to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - d, 2 * np.pi)


def gamma_field(angles: CoinAngles, grid: BravaisGrid) -> np.ndarray:
    """``gamma_i = -1/2 cos(theta_i) u_i . grad(phi_i)`` with central differences.

    ``angles`` arrays have shape ``(D, n1, n2)``.  Phase differences are taken
    between nearest representatives so 2 pi wraps never enter the gradient.
    """
    theta = np.asarray(angles.theta)
    phi = np.asarray(angles.phi)
    eps = grid.eps
    m = grid.gradient_matrix()
    out = np.empty(theta.shape)
    for i, u in enumerate(grid.dirs.vectors):
        p = phi[i]
        d = []
        for axis in (0, 1):
            fwd = wrap_angle(np.roll(p, -1, axis=axis) - p)
            bwd = wrap_angle(p - np.roll(p, 1, axis=axis))
            d.append((fwd + bwd) / (2 * eps))
        gx = m[0, 0] * d[0] + m[0, 1] * d[1]
        gy = m[1, 0] * d[0] + m[1, 1] * d[1]
        out[i] = -0.5 * np.cos(theta[i]) * (u[0] * gx + u[1] * gy)
    return out


def edge_gamma(angles: CoinAngles, grid: TriangularGrid) -> np.ndarray:
    """Phase fields on the triangular edge lattice, shape ``(D, 3, m1, m2)``.

    At an edge of side ``k`` the neighbours at ``+-eps u_k`` are edges of side
    ``k + 1`` and those at ``+-eps u_{k-1}`` are edges of side ``k - 1``; the
    gradient is rebuilt from these two directional differences.
    """
    theta = np.asarray(angles.theta)
    phi = np.asarray(angles.phi)
    eps = grid.eps
    nmap = grid.neighbors
    u = honeycomb_directions().vectors
    out = np.empty(theta.shape)
    for d in range(3):
        p = phi[d]
        for k in range(3):
            kp, km = (k + 1) % 3, (k - 1) % 3
            oa, ob = nmap.down_source_offset(kp)
            # +eps u_k: (kp, a, b); -eps u_k: (kp, (a, b) - off_kp)
            plus = p[kp]
            minus = np.roll(p[kp], (oa, ob), axis=(0, 1))
            dk = (wrap_angle(plus - p[k]) + wrap_angle(p[k] - minus)) / (2 * eps)
            oa, ob = nmap.down_source_offset(k)
            # +eps u_{k-1}: (km, (a, b) + off_k); -eps u_{k-1}: (km, a, b)
            plus = np.roll(p[km], (-oa, -ob), axis=(0, 1))
            minus = p[km]
            dkm = (wrap_angle(plus - p[k]) + wrap_angle(p[k] - minus)) / (2 * eps)
            m = np.linalg.inv(np.array([u[k], u[km]]))
            gx = m[0, 0] * dk + m[0, 1] * dkm
            gy = m[1, 0] * dk + m[1, 1] * dkm
            out[d, k] = -0.5 * np.cos(theta[d, k]) * (u[d, 0] * gx + u[d, 1] * gy)
    return out


# ---------------------------------------------------------------------------
# compiled fields


@dataclass(frozen=True)
class CoinField:
    """Per-site coins for every direction.

    Arrays carry the direction index first: ``n`` is ``(D, *shape, 3)``,
    ``theta``/``phi``/``gamma`` are ``(D, *shape)``, ``U`` is ``(D, *shape, 2, 2)``.
    ``lapse`` holds ``e^t_0`` per site.
    """

    dirs: LatticeDirections
    grid: object
    time: float
    n: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    gamma: np.ndarray
    U: np.ndarray
    lapse: np.ndarray
    residual: float = 0.0

    @property
    def shape(self):
        return self.theta.shape[1:]

    @property
    def eps(self):
        return self.grid.eps


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def coins_from_betas(n, grid, dirs, time=0.0, lapse=None, residual=0.0) -> CoinField:
    """Build a :class:`CoinField` from unit vectors ``n`` of shape ``(D, *shape, 3)``."""
    n = np.ascontiguousarray(n, dtype=float)
    angles = angles_from_beta(n)
    U = np.ascontiguousarray(unitary_from_angles(angles))
    if isinstance(grid, TriangularGrid):
        gamma = edge_gamma(angles, grid)
    else:
        gamma = gamma_field(angles, grid)
    gamma = np.ascontiguousarray(gamma)
    shape = n.shape[1:-1]
    lapse = np.ones(shape) if lapse is None else np.ascontiguousarray(lapse, dtype=float)
    theta = np.ascontiguousarray(angles.theta)
    phi = np.ascontiguousarray(angles.phi)
    _freeze(n, theta, phi, gamma, U, lapse)
    return CoinField(dirs, grid, float(time), n, theta, phi, gamma, U, lapse, residual)


def constant_coins(n, grid, dirs, time=0.0) -> CoinField:
    """Homogeneous coins: ``n[i]`` repeated over every site."""
    n = np.asarray(n, dtype=float)
    shape = grid.shape
    full = np.broadcast_to(n.reshape((n.shape[0],) + (1,) * len(shape) + (3,)),
                           (n.shape[0],) + tuple(shape) + (3,))
    return coins_from_betas(full.copy(), grid, dirs, time)


def compile_coins(metric: MetricFamily, grid, t: float = 0.0, threads: int = 1,
                  seed=None) -> CoinField:
    """Compile the coin field of ``metric`` at time ``t`` on ``grid``.

    ``grid`` is a :class:`BravaisGrid` (honeycomb or square directions) or a
    :class:`TriangularGrid` (coins sampled at edge midpoints).
    """
    if isinstance(grid, TriangularGrid):
        dirs = honeycomb_directions()
        pos = grid.positions()  # (3, m1, m2, 2)
        order = (1, 2, 0)  # sweep cells row-major, sides innermost
    else:
        dirs = grid.dirs
        pos = grid.positions()
        order = (0, 1)
    x, y = pos[..., 0], pos[..., 1]
    e = metric.tetrad_field(t, x, y)
    lam = e[..., 1:, :] / e[..., 0, 0][..., None, None]
    tgt = targets_from_deformation(lam)  # (*shape, 2, 3)
    shape = tgt.shape[:-2]
    swept = np.transpose(tgt, order + (len(shape), len(shape) + 1))
    n_flat = compile_betas(swept.reshape(-1, 2, 3), dirs, seed=seed, threads=threads)
    n_swept = n_flat.reshape(swept.shape[:-2] + (dirs.count, 3))
    inv = np.argsort(order)
    n_site = np.transpose(n_swept, tuple(inv) + (len(shape), len(shape) + 1))
    n = np.moveaxis(n_site, -2, 0)  # (D, *shape, 3)
    residual = float(np.abs(direction_sums(np.moveaxis(n, 0, -2), dirs) - tgt).max())
    return coins_from_betas(n, grid, dirs, t, lapse=e[..., 0, 0], residual=residual)
