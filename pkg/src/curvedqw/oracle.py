"""Reference solutions of the Dirac equation in Hamiltonian form.

``flat_evolve`` is the exact solution operator of the flat equation on a
periodic grid (per Fourier mode 2x2 exponentials).  ``evolve_rk4`` integrates

    i d_t chi = -(i/2)(B^s D_s + D_s B^s) chi + m~ sigma^z chi,
    B^s = Lambda^s_1 sigma^x + Lambda^s_2 sigma^y,   m~ = m / e^t_0

with fourth-order central differences along the two lattice axes and classic
RK4 in time.  The symmetrized form keeps the discrete generator Hermitian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import MetricFamily, sqrt_det_factor
from .honeycomb import SpinorField
from .lattice import BravaisGrid

CFL_LIMIT = 0.5
DEFAULT_COURANT = 0.25
MASS_PHASE_STEP = 0.05  # max |m~| dt per step for the default dt
DT_MAX = 0.01  # RK4 damps a resolved mode of frequency w by ~(w dt)^6 / 72 per step
DRIFT_BUDGET = 1e-8


class OracleError(RuntimeError):
    pass


class CFLError(OracleError):
    """Time step exceeds the stability bound."""


class DriftError(OracleError):
    """Norm drift exceeded the budget."""


# ---------------------------------------------------------------------------
# flat space, exact


def wavevectors(grid: BravaisGrid) -> np.ndarray:
    """Physical wavevectors ``(n1, n2, 2)`` of the FFT modes of ``grid``."""
    f1 = np.fft.fftfreq(grid.n1)
    f2 = np.fft.fftfreq(grid.n2)
    phase = 2 * np.pi * np.stack(np.meshgrid(f1, f2, indexing="ij"), axis=-1)
    # k . (eps basis_r) = phase_r
    return np.einsum("ij,...j->...i", np.linalg.inv(grid.eps * grid.dirs.basis), phase)


def dirac_symbol(k, m) -> np.ndarray:
    """``k_x sigma^x + k_y sigma^y + m sigma^z`` for wavevectors ``(..., 2)``."""
    k = np.asarray(k, dtype=float)
    h = np.empty(k.shape[:-1] + (2, 2), dtype=complex)
    h[..., 0, 0] = m
    h[..., 1, 1] = -m
    h[..., 0, 1] = k[..., 0] - 1j * k[..., 1]
    h[..., 1, 0] = k[..., 0] + 1j * k[..., 1]
    return h


def dirac_propagator(k, m, T) -> np.ndarray:
    """``exp(-i T H_D(k))`` computed as ``cos(ET) - i sin(ET) H/E``."""
    k = np.asarray(k, dtype=float)
    E = np.sqrt(np.sum(k**2, axis=-1) + m * m)
    c = np.cos(E * T)
    s = T * np.sinc(E * T / np.pi)  # sin(ET)/E, finite at E = 0
    h = dirac_symbol(k, m)
    return c[..., None, None] * np.eye(2) - 1j * s[..., None, None] * h


def flat_evolve(psi0: SpinorField, m: float, T: float) -> SpinorField:
    """Exact flat Dirac evolution of ``psi0`` over time ``T``."""
    if T == 0:
        return SpinorField(psi0.psi.copy(), psi0.grid, psi0.time)
    spec = np.fft.fft2(psi0.psi, axes=(1, 2))
    prop = dirac_propagator(wavevectors(psi0.grid), m, T)
    spec = np.einsum("...ab,b...->a...", prop, spec)
    out = np.fft.ifft2(spec, axes=(1, 2))
    return SpinorField(out, psi0.grid, psi0.time + T)


@dataclass(frozen=True)
class PlaneWaveSolution:
    k: np.ndarray
    branch: int
    mass: float

    def __post_init__(self):
        if self.branch not in (1, -1):
            raise ValueError("branch must be +1 or -1")

    @property
    def energy(self) -> float:
        return self.branch * math.sqrt(float(np.sum(np.square(self.k))) + self.mass**2)

    @property
    def spinor(self) -> np.ndarray:
        w, v = np.linalg.eigh(dirac_symbol(self.k, self.mass))
        s = v[:, 1] if self.branch > 0 else v[:, 0]
        # fix the global phase so the first nonzero entry is real positive
        j = 0 if abs(s[0]) > 1e-12 else 1
        return s * np.exp(-1j * np.angle(s[j]))

    def field(self, grid: BravaisGrid, t: float = 0.0) -> SpinorField:
        """Plane wave normalized to unit norm on the torus."""
        pos = grid.positions()
        ph = np.exp(1j * (pos @ np.asarray(self.k, dtype=float) - self.energy * t))
        amp = 1.0 / math.sqrt(grid.torus.area)
        psi = amp * self.spinor[:, None, None] * ph[None]
        return SpinorField(psi, grid, t)


# ---------------------------------------------------------------------------
# curved space, finite differences


def _d4(f, axis, h):
    return (
        8.0 * (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis))
        - (np.roll(f, -2, axis=axis) - np.roll(f, 2, axis=axis))
    ) / (12.0 * h)


@dataclass(frozen=True)
class HamiltonianField:
    """Pauli coefficients of ``B^x``, ``B^y`` and the mass field on a grid.

    ``bx`` and ``by`` have shape ``(2, n1, n2)`` holding the ``sigma^x`` and
    ``sigma^y`` components.
    """

    grid: BravaisGrid
    bx: np.ndarray
    by: np.ndarray
    mt: np.ndarray
    time: float = 0.0

    @property
    def h(self) -> float:
        return self.grid.eps

    def matrices(self):
        """``(B^x, B^y)`` as ``(n1, n2, 2, 2)`` complex arrays."""
        out = []
        for b in (self.bx, self.by):
            m = np.zeros(b.shape[1:] + (2, 2), dtype=complex)
            m[..., 0, 1] = b[0] - 1j * b[1]
            m[..., 1, 0] = b[0] + 1j * b[1]
            out.append(m)
        return tuple(out)

    def max_speed(self) -> float:
        """Largest operator norm of ``B^x`` or ``B^y`` over the grid."""
        return float(max(np.hypot(*self.bx).max(), np.hypot(*self.by).max()))

    def cfl_bound(self) -> float:
        return CFL_LIMIT * self.h / self.max_speed()

    def apply(self, chi: np.ndarray) -> np.ndarray:
        """``H chi`` for ``chi`` of shape ``(2, n1, n2)``."""
        m = self.grid.gradient_matrix()
        h = self.h

        def bmul(b, f):
            return np.stack([(b[0] - 1j * b[1]) * f[1], (b[0] + 1j * b[1]) * f[0]])

        def grad(f):
            da = _d4(f, 1, h)
            db = _d4(f, 2, h)
            return m[0, 0] * da + m[0, 1] * db, m[1, 0] * da + m[1, 1] * db

        gx, gy = grad(chi)
        bxc = bmul(self.bx, chi)
        byc = bmul(self.by, chi)
        dbx, _ = grad(bxc)
        _, dby = grad(byc)
        out = -0.5j * (bmul(self.bx, gx) + dbx + bmul(self.by, gy) + dby)
        out[0] += self.mt * chi[0]
        out[1] -= self.mt * chi[1]
        return out


def build_generator(metric: MetricFamily, grid: BravaisGrid, t: float = 0.0,
                    mass: float = 0.0) -> HamiltonianField:
    pos = grid.positions()
    e = metric.tetrad_field(t, pos[..., 0], pos[..., 1])
    lapse = e[..., 0, 0]
    bx = np.stack([e[..., 1, 1] / lapse, e[..., 1, 2] / lapse])
    by = np.stack([e[..., 2, 1] / lapse, e[..., 2, 2] / lapse])
    return HamiltonianField(grid, bx, by, mass / lapse, t)


def apply_H(field: HamiltonianField, chi: SpinorField) -> SpinorField:
    return SpinorField(field.apply(chi.psi), chi.grid, chi.time)


def evolve_rk4(chi0: SpinorField, metric: MetricFamily, T: float, dt: float | None = None,
               mass: float = 0.0, drift_budget: float = DRIFT_BUDGET) -> SpinorField:
    """Integrate ``d chi/dt = -i H chi`` from ``chi0.time`` for time ``T``.

    ``dt`` defaults to a quarter of ``h / max|B|``, capped at ``DT_MAX``
    and ``0.05 / max|m~|`` because RK4 slowly damps oscillating modes, and
    is shrunk so an integer number of steps lands on ``T``.  Raises :class:`CFLError` when
    ``dt`` exceeds the stability bound and :class:`DriftError` when the
    relative norm drift exceeds ``drift_budget``.
    """
    grid = chi0.grid
    t = chi0.time
    gen = build_generator(metric, grid, t, mass)
    bound = gen.cfl_bound()
    if dt is None:
        dt = min(DEFAULT_COURANT * grid.eps / gen.max_speed(), DT_MAX)
        mmax = float(np.abs(gen.mt).max())
        if mmax > 0:
            dt = min(dt, MASS_PHASE_STEP / mmax)
    if dt > bound * (1 + 1e-12):
        raise CFLError(f"dt = {dt:.6g} exceeds the CFL bound {bound:.6g}")
    if T == 0:
        return SpinorField(chi0.psi.copy(), grid, t)
    nsteps = max(1, int(math.ceil(T / dt - 1e-9)))
    dt = T / nsteps
    static = metric.is_static
    chi = chi0.psi.copy()
    n0 = float(np.sum(np.abs(chi) ** 2))

    def rhs(time, f):
        g = gen if static else build_generator(metric, grid, time, mass)
        return -1j * g.apply(f)

    for n in range(nsteps):
        tn = t + n * dt
        if not static:
            g = build_generator(metric, grid, tn, mass)
            if dt > g.cfl_bound() * (1 + 1e-12):
                raise CFLError(f"dt = {dt:.6g} exceeds the CFL bound at t = {tn:.6g}")
        k1 = rhs(tn, chi)
        k2 = rhs(tn + dt / 2, chi + (dt / 2) * k1)
        k3 = rhs(tn + dt / 2, chi + (dt / 2) * k2)
        k4 = rhs(tn + dt, chi + dt * k3)
        chi = chi + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    drift = abs(float(np.sum(np.abs(chi) ** 2)) - n0) / n0 if n0 else 0.0
    if drift > drift_budget:
        raise DriftError(f"relative norm drift {drift:.3g} exceeds budget {drift_budget:.3g}")
    return SpinorField(chi, grid, t + T)


def chi_from_psi(psi: SpinorField, metric: MetricFamily, t: float | None = None) -> SpinorField:
    """Pointwise rescaling ``chi = g^{1/4} (e^t_0)^{1/2} psi``."""
    t = psi.time if t is None else t
    pos = psi.positions()
    f = sqrt_det_factor(metric, t, pos[..., 0], pos[..., 1])
    return SpinorField(psi.psi * f[None], psi.grid, psi.time)


def psi_from_chi(chi: SpinorField, metric: MetricFamily, t: float | None = None) -> SpinorField:
    t = chi.time if t is None else t
    pos = chi.positions()
    f = sqrt_det_factor(metric, t, pos[..., 0], pos[..., 1])
    return SpinorField(chi.psi / f[None], chi.grid, chi.time)
