import numpy as np
import pytest

from curvedqw import honeycomb
from curvedqw.coins import compile_coins
from curvedqw.geometry import ConformalMetric, CustomMetric, FlatMetric, HomogeneousMetric
from curvedqw.harness import delta_field, gaussian_packet, l2_distance, restrict
from curvedqw.honeycomb import SpinorField, WalkParams, mass_phase, step, translate
from curvedqw.lattice import BravaisGrid, honeycomb_directions, square_directions
from curvedqw.oracle import evolve_rk4

HC = honeycomb_directions()
ANISO = CustomMetric(g_xx="-(1+0.2*sin(y))^2", g_yy="-(1+0.15*cos(x))^2", g_xy="0.2*sin(x+y)")


def grid(n=16, eps=0.2, dirs=HC):
    return BravaisGrid(n, n, eps, dirs)


def random_field(g, seed=0):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=(2,) + g.shape) + 1j * rng.normal(size=(2,) + g.shape)
    return SpinorField(psi, g)


def test_translate_moves_components_oppositely():
    g = grid(8)
    psi = np.zeros((2, 8, 8), complex)
    psi[0, 3, 3] = 1
    psi[1, 3, 3] = 2
    out = translate(SpinorField(psi, g), 0)
    assert out.psi[0, 4, 3] == 1
    assert out.psi[1, 2, 3] == 2
    back = translate(out, 0, inverse=True)
    np.testing.assert_array_equal(back.psi, psi)
    # direction 2 steps by (-1, -1) and wraps
    psi = np.zeros((2, 8, 8), complex)
    psi[0, 0, 0] = 1
    assert translate(SpinorField(psi, g), 2).psi[0, 7, 7] == 1


def test_uniform_field_is_invariant_in_flat_space():
    g = grid(8)
    coins = compile_coins(FlatMetric(), g)
    psi = SpinorField(np.ones((2, 8, 8), complex) * np.array([0.6, 0.8j])[:, None, None], g)
    out = step(psi, coins, WalkParams(0.2))
    np.testing.assert_allclose(out.psi, psi.psi, atol=1e-15)
    assert out.time == pytest.approx(0.2)


def test_mass_phase_on_uniform_field():
    g = grid(8, 0.1)
    coins = compile_coins(FlatMetric(), g)
    psi = SpinorField(np.stack([np.ones((8, 8)), np.zeros((8, 8))]).astype(complex), g)
    out = step(psi, coins, WalkParams(0.1, mass=0.5))
    np.testing.assert_allclose(out.psi[0], np.exp(-0.05j), atol=1e-15)
    np.testing.assert_allclose(out.psi[1], 0, atol=1e-15)
    a = np.ones((2, 3), complex)
    mass_phase(a, np.array(1.0), 0.5)
    np.testing.assert_allclose(a[0], np.exp(-0.5j))
    np.testing.assert_allclose(a[1], np.exp(0.5j))


def test_mass_uses_lapse():
    g = grid(8, 0.1)
    metric = CustomMetric(g_tt="0.25", g_xx="-1", g_yy="-1")
    coins = compile_coins(metric, g)
    np.testing.assert_allclose(WalkParams(0.1, 1.0).mass_field(coins), 0.5)


@pytest.mark.parametrize(
    "metric", [FlatMetric(), ConformalMetric("1+0.3*sin(x)*sin(y)"), ANISO],
)
@pytest.mark.parametrize("dirs", [HC, square_directions()])
def test_step_is_unitary(metric, dirs):
    if dirs.is_square and not isinstance(metric, FlatMetric):
        pytest.skip("curved metrics are not square-feasible")
    g = grid(16, 0.2, dirs)
    coins = compile_coins(metric, g)
    psi = random_field(g)
    out = step(psi, coins, WalkParams(0.2, 0.7))
    assert out.norm() == pytest.approx(psi.norm(), rel=1e-13)


def test_step_is_linear():
    g = grid(12, 0.2)
    coins = compile_coins(ANISO, g)
    p = WalkParams(0.2, 0.4)
    a, b = random_field(g, 1), random_field(g, 2)
    lhs = step(SpinorField(a.psi + 2j * b.psi, g), coins, p).psi
    rhs = step(a, coins, p).psi + 2j * step(b, coins, p).psi
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)


@pytest.mark.parametrize("metric", [FlatMetric(), ANISO])
def test_light_cone(metric):
    g = grid(40, 0.2)
    psi0 = delta_field(g, (20, 20))
    dist = g.lattice_distance(20, 20)
    traj = honeycomb.evolve(psi0, metric, WalkParams(0.2, 0.3), 6, dump_every=1)
    for n, fld in traj.snapshots:
        support = np.abs(fld.psi).sum(axis=0) > 0
        assert dist[support].max() <= 2 * n


def test_zero_steps_returns_input():
    g = grid(8)
    psi = random_field(g)
    traj = honeycomb.evolve(psi, ANISO, WalkParams(0.2), 0)
    assert traj.final is psi
    assert traj.coin_compiles == 0


def test_static_metric_compiles_once_and_recompiling_is_bitwise_identical():
    g = grid(16)
    psi = gaussian_packet(g, 1.0, (1.0, 0.0))
    p = WalkParams(0.2, 0.5)
    once = honeycomb.evolve(psi, ANISO, p, 10)
    every = honeycomb.evolve(psi, ANISO, p, 10, recompile_every=1)
    assert once.coin_compiles == 1
    assert every.coin_compiles == 10
    np.testing.assert_array_equal(once.final.psi, every.final.psi)


def test_time_dependent_metric_recompiles():
    g = grid(8)
    metric = HomogeneousMetric([["1+0.1*t", 0], [0, 1]])
    traj = honeycomb.evolve(random_field(g), metric, WalkParams(0.2), 5)
    assert traj.coin_compiles == 5


def test_observer_and_snapshots():
    g = grid(8)
    seen = []
    traj = honeycomb.evolve(random_field(g), FlatMetric(), WalkParams(0.2), 6, dump_every=3,
                            observer=lambda n, f: seen.append((n, f.time)))
    assert [n for n, _ in seen] == list(range(7))
    assert [n for n, _ in traj.snapshots] == [0, 3, 6]
    assert seen[-1][1] == pytest.approx(1.2)


def test_long_run_norm_drift():
    g = grid(32, 0.2)
    psi = gaussian_packet(g, 1.0, (1.0, 0.5))
    traj = honeycomb.evolve(psi, ANISO, WalkParams(0.2, 0.5), 1000)
    assert abs(traj.final.norm() - psi.norm()) < 1e-10


def test_coin_shape_mismatch():
    coins = compile_coins(FlatMetric(), grid(8))
    with pytest.raises(ValueError):
        step(random_field(grid(10)), coins, WalkParams(0.2))


def _aniso_errors(zero_gamma):
    """Walk error against the continuum on the anisotropic metric for eps = 0.4 ... 0.05."""
    # narrow packet: its tail at the seam of this small torus stays below 1e-4
    L, T, m, w = 6.4, 1.6, 0.5, 0.75
    og = grid(128, L / 128)
    ref = evolve_rk4(gaussian_packet(og, w, (1.0, 0.5)), ANISO, T, mass=m)
    errs = []
    for eps in (0.4, 0.2, 0.1, 0.05):
        n = int(round(L / eps))
        g = grid(n, eps)
        coins = compile_coins(ANISO, g)
        if zero_gamma:
            coins = type(coins)(**{**coins.__dict__, "gamma": np.zeros_like(coins.gamma)})
        psi = gaussian_packet(g, w, (1.0, 0.5))
        for _ in range(int(round(T / eps))):
            psi = step(psi, coins, WalkParams(eps, m))
        errs.append(l2_distance(psi, restrict(ref, g)))
    return np.array(errs)


@pytest.mark.slow
def test_gamma_phase_is_needed_for_convergence():
    with_gamma = _aniso_errors(False)
    without = _aniso_errors(True)
    assert with_gamma[2] / with_gamma[3] > 1.7
    # without the phase correction the error stalls at a finite value
    assert without[2] / without[3] < 1.4
    assert without[3] > 2 * with_gamma[3]
