"""Metrics, tetrads and deformation fields of (2+1)-dimensional spacetimes.

Index conventions: a metric is a 3x3 array ``g[mu, nu]`` with ``mu, nu`` in
``(t, x, y)``; a tetrad is stored as the inverse vierbein ``e[mu, a]`` with
the frame index ``a`` in ``(0, 1, 2)``.  Orthonormality reads
``e.T @ g @ e == ETA``.

All metrics handled here have no shift (``g_tx = g_ty = 0``).  The tetrad
gauge is fixed by ``e^t_a = 0`` for ``a = 1, 2``, ``e^t_0 = 1/sqrt(g_tt)``
and an upper-triangular spatial block ``L^{-T}`` where ``L`` is the lower
Cholesky factor of ``-g_spatial``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import ExpressionError, MetricExpression, variables

ETA = np.diag([1.0, -1.0, -1.0])


class MetricError(ValueError):
    """The metric violates the signature or block-form requirements."""


@dataclass(frozen=True)
class SpacetimePoint:
    t: float
    x: float
    y: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.t, self.x, self.y)):
            raise ValueError(f"non-finite spacetime point {self}")


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Metric2p1:
    """Metric components at one point, signature (+, -, -)."""

    g: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        g = _readonly(self.g)
        if g.shape != (3, 3):
            raise MetricError(f"metric must be 3x3, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise MetricError("metric has non-finite entries")
        if not np.allclose(g, g.T, rtol=0, atol=1e-14 * max(1.0, np.abs(g).max())):
            raise MetricError("metric is not symmetric")
        object.__setattr__(self, "g", g)
        _check_signature(g[..., 0, 0], g[..., 1:, 1:], g[..., 0, 1:])

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.g))


@dataclass(frozen=True)
class Tetrad:
    """Inverse vierbein ``e^mu_a`` (rows mu, columns a)."""

    e: np.ndarray
    forward: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        e = _readonly(self.e)
        if e.shape != (3, 3):
            raise ValueError(f"tetrad must be 3x3, got {e.shape}")
        object.__setattr__(self, "e", e)
        # e^mu_a e_nu^a = delta  ->  forward[nu, a] = inv(e)[a, nu]
        object.__setattr__(self, "forward", _readonly(np.linalg.inv(e).T))

    @property
    def lapse(self) -> float:
        """``e^t_0``."""
        return float(self.e[0, 0])


@dataclass(frozen=True)
class CoordinateTransform:
    """Block transform ``diag(1, lam)`` acting on (t, x, y); ``x' = Gamma x``."""

    lam: np.ndarray

    def __post_init__(self):
        lam = _readonly(self.lam)
        if lam.shape != (2, 2):
            raise ValueError("spatial block must be 2x2")
        object.__setattr__(self, "lam", lam)

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(3)
        m[1:, 1:] = self.lam
        return m


def _check_signature(gtt, spatial, shift):
    gtt = np.asarray(gtt)
    if np.any(np.abs(np.asarray(shift)) > 0):
        raise MetricError("metrics with a shift (g_tx, g_ty != 0) are not supported")
    if np.any(~(gtt > 0)):
        raise MetricError("g_tt must be positive")
    s = -np.asarray(spatial)
    s11 = s[..., 0, 0]
    det = s11 * s[..., 1, 1] - s[..., 0, 1] * s[..., 1, 0]
    if np.any(~(s11 > 0)) or np.any(~(det > 0)):
        raise MetricError("spatial block of the metric must be negative-definite")


def tetrad_field(g: np.ndarray) -> np.ndarray:
    """Gauge-fixed inverse vierbeins for a stack of metrics ``(..., 3, 3)``."""
    g = np.asarray(g, dtype=float)
    _check_signature(g[..., 0, 0], g[..., 1:, 1:], g[..., 0, 1:])
    e = np.zeros(g.shape)
    e[..., 0, 0] = 1.0 / np.sqrt(g[..., 0, 0])
    s11 = -g[..., 1, 1]
    s12 = -g[..., 1, 2]
    s22 = -g[..., 2, 2]
    l11 = np.sqrt(s11)
    l21 = s12 / l11
    l22 = np.sqrt(s22 - l21 * l21)
    e[..., 1, 1] = 1.0 / l11
    e[..., 1, 2] = -l21 / (l11 * l22)
    e[..., 2, 2] = 1.0 / l22
    return e


def build_tetrad(metric: Metric2p1, p: SpacetimePoint | None = None) -> Tetrad:
    """Tetrad of ``metric`` in the Cholesky gauge.

    ``p`` is accepted for symmetry with the metric families; a
    :class:`Metric2p1` is already evaluated at its point.
    """
    return Tetrad(tetrad_field(metric.g))


def deformation_field(e: np.ndarray) -> np.ndarray:
    """``Lambda^s_a = e^s_a / e^t_0`` for tetrads ``(..., 3, 3)`` -> ``(..., 2, 3)``."""
    e = np.asarray(e, dtype=float)
    lapse = e[..., 0, 0]
    if np.any(~(lapse > 0)):
        raise MetricError("e^t_0 must be positive")
    return e[..., 1:, :] / lapse[..., None, None]


def deformation_at(tetrad: Tetrad) -> np.ndarray:
    return deformation_field(tetrad.e)


def orthonormality_residual(g, e) -> float:
    """``max |e^T g e - eta|`` over a stack."""
    g = np.asarray(g, dtype=float)
    e = np.asarray(e, dtype=float)
    r = np.einsum("...ma,...mn,...nb->...ab", e, g, e) - ETA
    return float(np.abs(r).max())


def inverse_residual(e) -> float:
    """``max |e^mu_a e_nu^a - delta|`` with the forward vierbein from inversion."""
    e = np.asarray(e, dtype=float)
    fwd = np.swapaxes(np.linalg.inv(e), -1, -2)
    r = np.einsum("...ma,...na->...mn", e, fwd) - np.eye(3)
    return float(np.abs(r).max())


def regauge(e) -> np.ndarray:
    """Bring tetrads ``(..., 3, 3)`` into the Cholesky gauge by a spatial rotation.

    Any two tetrads of one metric differ by an orthogonal spatial block
    ``R``; the gauge representative has an upper-triangular spatial block with
    positive diagonal, which is the flipped Cholesky factor of ``A A^T``.
    """
    e = np.array(e, dtype=float)
    a = e[..., 1:, 1:]
    m = np.einsum("...ij,...kj->...ik", a, a)
    flip = m[..., ::-1, ::-1]
    low = np.linalg.cholesky(flip)
    e[..., 1:, 1:] = low[..., ::-1, ::-1]
    return e


def transform_metric(gamma: CoordinateTransform, g: Metric2p1, e: Tetrad):
    """Apply ``g' = Gamma^-T g Gamma^-1`` and ``e' = Gamma e``."""
    m = gamma.matrix
    if abs(np.linalg.det(m)) < 1e-300 or np.linalg.cond(m) > 1e14:
        raise MetricError("coordinate transform is singular")
    minv = np.linalg.inv(m)
    g2 = minv.T @ g.g @ minv
    g2 = 0.5 * (g2 + g2.T)
    return Metric2p1(g2, provenance=g.provenance), Tetrad(m @ e.e)


# ---------------------------------------------------------------------------
# metric families


def _as_field(value, shape):
    return np.broadcast_to(np.asarray(value, dtype=float), shape)


def _expression(src, name):
    if isinstance(src, (int, float)):
        src = repr(float(src))
    try:
        return MetricExpression(src)
    except ExpressionError as exc:
        raise ExpressionError(f"{name}: {exc.args[0]}", exc.offset, exc.source) from None


class MetricFamily:
    """A metric sampled as a function of (t, x, y)."""

    family = ""

    @property
    def is_static(self) -> bool:
        return True

    def metric_field(self, t, x, y) -> np.ndarray:
        raise NotImplementedError

    def tetrad_field(self, t, x, y) -> np.ndarray:
        return tetrad_field(self.metric_field(t, x, y))

    def deformation_field(self, t, x, y) -> np.ndarray:
        return deformation_field(self.tetrad_field(t, x, y))

    def metric_at(self, p: SpacetimePoint) -> Metric2p1:
        return Metric2p1(self.metric_field(p.t, p.x, p.y), provenance=self.family)

    def tetrad_at(self, p: SpacetimePoint) -> Tetrad:
        return Tetrad(self.tetrad_field(p.t, p.x, p.y))


class FlatMetric(MetricFamily):
    family = "flat"

    def metric_field(self, t, x, y):
        shape = np.broadcast(np.asarray(t), np.asarray(x), np.asarray(y)).shape
        return np.broadcast_to(ETA, shape + (3, 3)).copy()

    def __repr__(self):
        return "FlatMetric()"


class HomogeneousMetric(MetricFamily):
    """Position-independent deformation ``lam`` (entries may depend on t).

    The tetrad is ``Gamma`` applied to the canonical one, so the deformation
    field equals ``lam`` itself rather than its Cholesky-gauge rotation.
    """

    family = "homogeneous"

    def __init__(self, lam):
        rows = [list(r) for r in lam]
        if len(rows) != 2 or any(len(r) != 2 for r in rows):
            raise ValueError("lambda must be a 2x2 array")
        self.entries = [
            [_expression(v, f"lambda[{i}][{j}]") for j, v in enumerate(r)]
            for i, r in enumerate(rows)
        ]
        for row in self.entries:
            for ex in row:
                if {"x", "y"} & variables(ex.tree):
                    raise ValueError("homogeneous lambda entries may depend on t only")

    @property
    def is_static(self):
        return not any(ex.depends_on_time for row in self.entries for ex in row)

    def lam(self, t=0.0) -> np.ndarray:
        return np.array([[float(ex(t=t)) for ex in row] for row in self.entries])

    def _lam_field(self, t, shape):
        t = np.asarray(t, dtype=float)
        out = np.empty(shape + (2, 2))
        for i in range(2):
            for j in range(2):
                out[..., i, j] = _as_field(self.entries[i][j](t=t), shape)
        det = out[..., 0, 0] * out[..., 1, 1] - out[..., 0, 1] * out[..., 1, 0]
        if np.any(np.abs(det) < 1e-14):
            raise MetricError("homogeneous lambda is singular")
        return out

    def metric_field(self, t, x, y):
        shape = np.broadcast(np.asarray(t), np.asarray(x), np.asarray(y)).shape
        lam = self._lam_field(t, shape)
        inv = np.linalg.inv(lam)
        g = np.zeros(shape + (3, 3))
        g[..., 0, 0] = 1.0
        g[..., 1:, 1:] = -np.einsum("...ki,...kj->...ij", inv, inv)
        return g

    def tetrad_field(self, t, x, y):
        shape = np.broadcast(np.asarray(t), np.asarray(x), np.asarray(y)).shape
        e = np.zeros(shape + (3, 3))
        e[..., 0, 0] = 1.0
        e[..., 1:, 1:] = self._lam_field(t, shape)
        return e

    def __repr__(self):
        return f"HomogeneousMetric({[[ex.source for ex in r] for r in self.entries]})"


class ConformalMetric(MetricFamily):
    """``diag(1, -f^2, -f^2)``."""

    family = "conformal"

    def __init__(self, f):
        self.f = _expression(f, "f")

    @property
    def is_static(self):
        return not self.f.depends_on_time

    def metric_field(self, t, x, y):
        shape = np.broadcast(np.asarray(t), np.asarray(x), np.asarray(y)).shape
        f = _as_field(self.f(t, x, y), shape)
        if np.any(~np.isfinite(f)) or np.any(f == 0):
            raise MetricError("conformal factor must be finite and nonzero")
        g = np.zeros(shape + (3, 3))
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = -f * f
        g[..., 2, 2] = -f * f
        return g

    def __repr__(self):
        return f"ConformalMetric({self.f.source!r})"


class CustomMetric(MetricFamily):
    """Block metric with expression entries ``g_tt``, ``g_xx``, ``g_yy``, ``g_xy``."""

    family = "custom"

    def __init__(self, g_tt="1", g_xx="-1", g_yy="-1", g_xy="0"):
        self.g_tt = _expression(g_tt, "g_tt")
        self.g_xx = _expression(g_xx, "g_xx")
        self.g_yy = _expression(g_yy, "g_yy")
        self.g_xy = _expression(g_xy, "g_xy")

    @property
    def is_static(self):
        return not any(
            ex.depends_on_time for ex in (self.g_tt, self.g_xx, self.g_yy, self.g_xy)
        )

    def metric_field(self, t, x, y):
        shape = np.broadcast(np.asarray(t), np.asarray(x), np.asarray(y)).shape
        g = np.zeros(shape + (3, 3))
        g[..., 0, 0] = _as_field(self.g_tt(t, x, y), shape)
        g[..., 1, 1] = _as_field(self.g_xx(t, x, y), shape)
        g[..., 2, 2] = _as_field(self.g_yy(t, x, y), shape)
        gxy = _as_field(self.g_xy(t, x, y), shape)
        g[..., 1, 2] = gxy
        g[..., 2, 1] = gxy
        if not np.all(np.isfinite(g)):
            raise MetricError("custom metric has non-finite entries")
        return g

    def __repr__(self):
        return (
            f"CustomMetric(g_tt={self.g_tt.source!r}, g_xx={self.g_xx.source!r}, "
            f"g_yy={self.g_yy.source!r}, g_xy={self.g_xy.source!r})"
        )


def sqrt_det_factor(metric: MetricFamily, t, x, y) -> np.ndarray:
    """``g^{1/4} (e^t_0)^{1/2}``, the factor turning psi into chi."""
    g = metric.metric_field(t, x, y)
    e = metric.tetrad_field(t, x, y)
    det = np.abs(np.linalg.det(g))
    return det**0.25 * np.sqrt(e[..., 0, 0])
