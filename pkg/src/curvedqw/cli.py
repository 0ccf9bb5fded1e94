"""Command line front end: ``cqw {compile,run,study,oracle,dispersion} --config PATH``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import harness, honeycomb, oracle, snapshot, triangular
from .coins import CoinError, beta_matrices, compile_coins, pauli, solve_betas
from .config import ConfigError, RunConfig, load_config, spinor_value
from .geometry import FlatMetric, HomogeneousMetric, MetricError
from .honeycomb import WalkParams
from .lattice import BravaisGrid, TriangularGrid, directions_for, honeycomb_directions

log = logging.getLogger("curvedqw")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_COIN = 3
EXIT_ORACLE = 4


def fmt(v) -> str:
    return f"{float(v):.17g}"


def resolve_threads(flag) -> int:
    env = os.environ.get("CQW_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"CQW_THREADS must be an integer, got {env!r}") from None
    elif flag is not None:
        n = flag
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ConfigError("thread count must be positive")
    return n


def make_grid(cfg: RunConfig):
    if cfg.kind == "triangular":
        return TriangularGrid(cfg.n1, cfg.n2, cfg.epsilon)
    return BravaisGrid(cfg.n1, cfg.n2, cfg.epsilon, directions_for(cfg.kind))


def initial_field(cfg: RunConfig, grid):
    (kind, spec), = cfg.initial.items()
    if kind == "gaussian":
        return harness.gaussian_packet(
            grid, spec.get("width", 1.0), tuple(spec.get("momentum", (0.0, 0.0))),
            spinor_value(spec.get("spinor")), spec.get("center"),
        )
    if kind == "plane_wave":
        return harness.plane_wave(grid, spec["k"], spec.get("branch", 1), cfg.mass)
    site = spec.get("site")
    if site is not None:
        if len(site) != len(grid.shape):
            raise ConfigError(f"delta site needs {len(grid.shape)} indices", "/initial/delta/site")
        site = tuple(int(s) % n for s, n in zip(site, grid.shape))
    return harness.delta_field(grid, site, spinor_value(spec.get("spinor"), (1.0, 1.0)))


OBS_COLUMNS = ["step", "time", "norm", "mean_x", "mean_y", "spread"]


class ObservableWriter:
    def __init__(self, path, densities=False):
        self.fh = open(path, "w", newline="")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.densities = densities
        cols = OBS_COLUMNS + (["density_up", "density_down"] if densities else [])
        self.writer.writerow(cols)

    def __call__(self, step, fld):
        ob = harness.observables(fld)
        row = [str(step), fmt(fld.time), fmt(ob.norm), fmt(ob.mean_x), fmt(ob.mean_y), fmt(ob.spread)]
        if self.densities:
            row += [fmt(ob.density_up), fmt(ob.density_down)]
        self.writer.writerow(row)

    def close(self):
        self.fh.close()


def snapshot_name(step: int, prefix="snapshot") -> str:
    return f"{prefix}_{step:06d}.cqw"


# ---------------------------------------------------------------------------
# verbs


def cmd_compile(cfg: RunConfig, out: Path, threads: int):
    grid = make_grid(cfg)
    coins = compile_coins(cfg.metric, grid, 0.0, threads=threads)
    beta = beta_matrices(coins.U)
    c2 = float(np.abs(beta - pauli(coins.n)).max())
    with open(out / "coins.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        tri = isinstance(grid, TriangularGrid)
        w.writerow((["side"] if tri else []) + ["a", "b", "direction", "theta", "phi", "gamma",
                                                  "nx", "ny", "nz", "lapse"])
        for idx in np.ndindex(*coins.shape):
            for i in range(coins.n.shape[0]):
                key = (i,) + idx
                n = coins.n[key]
                w.writerow([str(v) for v in idx] + [str(i), fmt(coins.theta[key]), fmt(coins.phi[key]),
                           fmt(coins.gamma[key]), fmt(n[0]), fmt(n[1]), fmt(n[2]),
                           fmt(coins.lapse[idx])])
    summary = {"lattice": cfg.kind, "dims": list(coins.shape), "epsilon": cfg.epsilon,
               "time": 0.0, "c1_residual": coins.residual, "c2_residual": c2}
    (out / "coins.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    log.info("compiled %s coins, C1 residual %.3g, C2 residual %.3g", cfg.kind, coins.residual, c2)


def cmd_run(cfg: RunConfig, out: Path, threads: int):
    grid = make_grid(cfg)
    psi0 = initial_field(cfg, grid)
    writer = ObservableWriter(out / "observables.csv", "densities" in cfg.observables)
    mod = triangular if isinstance(grid, TriangularGrid) else honeycomb
    try:
        traj = mod.evolve(psi0, cfg.metric, WalkParams(cfg.epsilon, cfg.mass), cfg.steps,
                          recompile_every=cfg.recompile_every, dump_every=cfg.dump_every,
                          observer=writer, threads=threads)
    finally:
        writer.close()
    for step, fld in traj.snapshots:
        snapshot.write(out / snapshot_name(step), fld)
    n0, n1 = psi0.norm(), traj.final.norm()
    log.info("%d steps, %d coin compiles, norm %.17g -> %.17g", cfg.steps, traj.coin_compiles, n0, n1)
    if cfg.study is not None:
        cmd_study(cfg, out, threads)


def study_setup(cfg: RunConfig) -> harness.StudySetup:
    (kind, spec), = cfg.initial.items()
    if kind != "gaussian":
        raise ConfigError("convergence studies need a gaussian initial state", "/initial")
    if cfg.n1 != cfg.n2:
        raise ConfigError("convergence studies need a square torus (n1 == n2)", "/lattice")
    if "center" in spec:
        log.warning("study packets are centred on the torus; ignoring initial.gaussian.center")
    sites = 2 * cfg.n1 if cfg.kind == "triangular" else cfg.n1
    return harness.StudySetup(
        lattice=cfg.kind, metric=cfg.metric, mass=cfg.mass,
        time=float(cfg.study.get("time", cfg.T)), domain=sites * cfg.epsilon,
        width=spec.get("width", 1.0), momentum=tuple(spec.get("momentum", (0.0, 0.0))),
        spinor=spinor_value(spec.get("spinor")),
    )


def cmd_study(cfg: RunConfig, out: Path, threads: int):
    if cfg.study is None:
        raise ConfigError("missing study section", "/study")
    setup = study_setup(cfg)
    report = harness.convergence_study(setup, cfg.study["epsilons"], threads=threads)
    report.write_csv(out / "study.csv")
    report.write_json(out / "study.json")
    log.info("study slope %.4f (fit residual %.3g)", report.slope, report.fit_residual)


def cmd_oracle(cfg: RunConfig, out: Path, threads: int):
    grid = make_grid(cfg)
    if isinstance(grid, TriangularGrid):
        grid = BravaisGrid(2 * cfg.n1, 2 * cfg.n2, cfg.epsilon, honeycomb_directions())
    chi0 = initial_field(cfg, grid)
    if isinstance(cfg.metric, FlatMetric):
        chi = oracle.flat_evolve(chi0, cfg.mass, cfg.T)
    else:
        chi = oracle.evolve_rk4(chi0, cfg.metric, cfg.T, mass=cfg.mass)
    writer = ObservableWriter(out / "oracle_observables.csv", "densities" in cfg.observables)
    try:
        writer(0, chi0)
        writer(cfg.steps, chi)
    finally:
        writer.close()
    snapshot.write(out / snapshot_name(cfg.steps, "oracle"), chi)


def cmd_dispersion(cfg: RunConfig, out: Path, threads: int):
    if not isinstance(cfg.metric, (FlatMetric, HomogeneousMetric)):
        raise ConfigError("dispersion needs a flat or homogeneous metric", "/metric/family")
    if not cfg.metric.is_static:
        raise ConfigError("dispersion needs a time-independent metric", "/metric")
    lam = cfg.metric.deformation_field(0.0, 0.0, 0.0)
    dirs = directions_for(cfg.kind)
    betas = solve_betas(lam, dirs)
    ks = cfg.dispersion_k or [[0.1 * j, 0.0] for j in range(11)]
    bx = lam[0, 1] * np.array([[0, 1], [1, 0]]) + lam[0, 2] * np.array([[0, -1j], [1j, 0]])
    by = lam[1, 1] * np.array([[0, 1], [1, 0]]) + lam[1, 2] * np.array([[0, -1j], [1j, 0]])
    with open(out / "dispersion.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kx", "ky", "phase_minus", "phase_plus", "continuum_minus", "continuum_plus"])
        for k in ks:
            lo, hi = harness.dispersion_extract(betas.n, cfg.mass, cfg.epsilon, k)
            h = bx * k[0] + by * k[1] + cfg.mass * np.diag([1.0, -1.0])
            e = np.linalg.eigvalsh(h)
            w.writerow([fmt(k[0]), fmt(k[1]), fmt(lo), fmt(hi),
                        fmt(cfg.epsilon * e[0]), fmt(cfg.epsilon * e[1])])


VERBS = {
    "compile": cmd_compile,
    "run": cmd_run,
    "study": cmd_study,
    "oracle": cmd_oracle,
    "dispersion": cmd_dispersion,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cqw", description="Quantum walks in curved (2+1)-d spacetime.")
    p.add_argument("verb", choices=sorted(VERBS))
    p.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides output.directory)")
    p.add_argument("--threads", type=int, metavar="N", help="worker threads (default: all cores)")
    p.add_argument("--quiet", action="store_true", help="only report warnings and errors")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        threads = resolve_threads(args.threads)
        cfg = load_config(args.config)
        out = Path(args.out or cfg.output_dir or "cqw_out")
        out.mkdir(parents=True, exist_ok=True)
        VERBS[args.verb](cfg, out, threads)
    except (ConfigError, MetricError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except CoinError as exc:
        log.error("coin compilation failed: %s", exc)
        return EXIT_COIN
    except (oracle.OracleError, harness.OracleNotConverged) as exc:
        log.error("oracle failure: %s", exc)
        return EXIT_ORACLE
    except harness.StudyError as exc:
        log.error("study error: %s", exc)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
