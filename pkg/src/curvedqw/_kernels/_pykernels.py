"""Pure numpy implementations of the hot kernels.

Semantics match ``_ckernels.pyx`` exactly; results agree to rounding.
"""

import numpy as np


def _residual(x, tgt, u):
    # x: (3, 3) rows n^i; tgt: (2, 3); u: (3, 2)
    f = np.empty(9)
    f[:6] = (u.T @ x - tgt).ravel()
    f[6:] = np.einsum("ic,ic->i", x, x) - 1.0
    return f


def _jacobian(x, u):
    jac = np.zeros((9, 9))
    for j in range(2):
        for c in range(3):
            for i in range(3):
                jac[3 * j + c, 3 * i + c] = u[i, j]
    for i in range(3):
        jac[6 + i, 3 * i : 3 * i + 3] = 2.0 * x[i]
    return jac


def newton_solve(tgt, u, seed, out, tol=1e-12, maxiter=50, maxhalve=20):
    """Damped Newton for the 9x9 duality system; writes into ``out``.

    Returns True on convergence (``max|F| < tol``).
    """
    x = np.array(seed, dtype=float).reshape(3, 3)
    f = _residual(x, tgt, u)
    fnorm = np.sqrt(f @ f)
    polished = False
    for _ in range(maxiter + 2):
        if np.abs(f).max() < tol and polished:
            out[...] = x
            return True
        if np.abs(f).max() < tol:
            # one extra full step takes the quadratic gain down to rounding
            polished = True
            try:
                xn = x + np.linalg.solve(_jacobian(x, u), -f).reshape(3, 3)
            except np.linalg.LinAlgError:
                continue
            fn = _residual(xn, tgt, u)
            if np.sqrt(fn @ fn) <= fnorm:
                x, f, fnorm = xn, fn, np.sqrt(fn @ fn)
            continue
        try:
            dx = np.linalg.solve(_jacobian(x, u), -f).reshape(3, 3)
        except np.linalg.LinAlgError:
            return False
        s = 1.0
        for _h in range(maxhalve + 1):
            xn = x + s * dx
            fn = _residual(xn, tgt, u)
            fnn = np.sqrt(fn @ fn)
            if fnn < fnorm or np.abs(fn).max() < tol:
                break
            s *= 0.5
        else:
            return False
        x, f, fnorm = xn, fn, fnn
    return False


def newton_sweep(targets, u, seed, out, tol=1e-12, maxiter=50, maxhalve=20):
    """Continuation sweep; returns the first failing index or ``len(targets)``."""
    m = targets.shape[0]
    prev = np.array(seed, dtype=float)
    for k in range(m):
        if not newton_solve(targets[k], u, prev, out[k], tol, maxiter, maxhalve):
            return k
        prev = out[k]
    return m


def _apply(U, up, dn):
    return (U[..., 0, 0] * up + U[..., 0, 1] * dn, U[..., 1, 0] * up + U[..., 1, 1] * dn)


def _apply_dagger(U, up, dn):
    return (
        np.conj(U[..., 0, 0]) * up + np.conj(U[..., 1, 0]) * dn,
        np.conj(U[..., 0, 1]) * up + np.conj(U[..., 1, 1]) * dn,
    )


def bravais_factor(psi, U, gamma, eps, da, db):
    """In place: ``psi <- U^dag T U exp(-i eps gamma) psi`` for one direction."""
    phase = np.exp(-1j * eps * gamma)
    up, dn = _apply(U, phase * psi[0], phase * psi[1])
    up = np.roll(up, (da, db), axis=(0, 1))
    dn = np.roll(dn, (-da, -db), axis=(0, 1))
    psi[0], psi[1] = _apply_dagger(U, up, dn)


def tri_substep(psi, Usrc, Utgt, gamma, eps, offsets):
    """In place rotation substep on the edge field ``psi`` of shape ``(2, 3, m1, m2)``.

    ``Usrc[k]``/``gamma[k]``: coin and phase applied when leaving side ``k``;
    ``Utgt[k]``: coin whose adjoint is applied on arrival at side ``k``;
    ``offsets[k]``: cell offset of the edge feeding the down component of side ``k``.
    """
    phase = np.exp(-1j * eps * gamma)
    up, dn = _apply(Usrc, phase * psi[0], phase * psi[1])
    new_up = np.roll(up, 1, axis=0)
    new_dn = np.empty_like(dn)
    for k in range(3):
        oa, ob = offsets[k]
        new_dn[k] = np.roll(dn[(k - 1) % 3], (-oa, -ob), axis=(0, 1))
    psi[0], psi[1] = _apply_dagger(Utgt, new_up, new_dn)
