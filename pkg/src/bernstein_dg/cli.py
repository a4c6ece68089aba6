"""Command-line experiments: mass-solver accuracy, CG iteration counts,
DG right-hand-side timing and acoustic convergence runs.

Every subcommand prints its report as CSV and optionally writes it to
``--out``.
"""

from __future__ import annotations

import argparse
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy.linalg
from threadpoolctl import threadpool_limits

from . import __version__
from .counters import OpCounter
from .dg import AcousticDG, AcousticState, plane_wave, standing_wave, write_state_csv
from .mass import cg_solve, dense
from .mass_solve import block_gauss_solve, factor
from .mesh import build_structured_mesh
from .multiindex import dim
from .report import ExperimentReport

__all__ = [
    "SOLVERS",
    "cmd_mass_accuracy",
    "cmd_cg_iterations",
    "cmd_timing",
    "cmd_acoustics",
    "loglog_slope",
    "observed_orders",
    "build_parser",
    "main",
]

SOLVERS = ("dense", "cg", "cg-fixed", "block", "block-gauss")
DEFAULT_SEED = 20130501


def _environment() -> dict:
    return {
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "machine": platform.machine(),
    }


def _rel_errors(x, ref):
    err = x - ref
    return (float(np.abs(err).max() / np.abs(ref).max()),
            float(np.linalg.norm(err) / np.linalg.norm(ref)))


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def observed_orders(h, err) -> list:
    """Convergence rates between successive refinements; first entry None."""
    out = [None]
    for k in range(1, len(h)):
        out.append(float(np.log(err[k - 1] / err[k]) / np.log(h[k - 1] / h[k])))
    return out


def _mass_solver(name: str, d: int, n: int, tol: float):
    """Return ``solve(y) -> (x, iterations)`` for one reference matrix."""
    if name == "dense":
        cho = scipy.linalg.cho_factor(dense(d, n), lower=True)
        return lambda y: (scipy.linalg.cho_solve(cho, y), None)
    if name == "block":
        fac = factor(d, n)
        return lambda y: (fac.solve(y), None)
    if name == "block-gauss":
        return lambda y: (block_gauss_solve(d, n, y), None)
    if name in ("cg", "cg-fixed"):
        # n + 1 distinct eigenvalues: exact arithmetic would finish in n + 1 steps
        fixed = name == "cg-fixed"

        def run(y):
            r = cg_solve(y, d, n, tol=0.0 if fixed else tol,
                         max_iter=n + 1 if fixed else None)
            return r.x, r.iterations

        return run
    raise ValueError(f"unknown solver {name!r}; choose from {SOLVERS}")


def cmd_mass_accuracy(dims=(1, 2, 3), n_max: int = 16, solvers=("dense", "cg", "block"),
                      trials: int = 5, seed: int = DEFAULT_SEED, tol: float = 1e-12,
                      degrees=None) -> ExperimentReport:
    """Relative error of each solver on ``M x = y`` with random x in [-1, 1].

    The right-hand side is formed by a dense float product; errors are the
    maximum over *trials* random vectors.
    """
    rep = ExperimentReport(
        "mass-accuracy",
        ["d", "n", "solver", "rel_err_inf", "rel_err_2", "iterations", "seconds"],
        metadata={"trials": trials, "seed": seed, "tol": tol, **_environment()})
    rng = np.random.default_rng(seed)
    degrees = list(range(1, n_max + 1)) if degrees is None else list(degrees)
    for d in dims:
        for n in degrees:
            M = dense(d, n)
            xs = rng.uniform(-1.0, 1.0, size=(trials, dim(d, n)))
            for name in solvers:
                solve = _mass_solver(name, d, n, tol)
                e_inf = e_2 = 0.0
                iters = None
                t0 = time.perf_counter()
                for x in xs:
                    sol, it = solve(M @ x)
                    a, b = _rel_errors(sol, x)
                    e_inf, e_2 = max(e_inf, a), max(e_2, b)
                    if it is not None:
                        iters = it if iters is None else max(iters, it)
                rep.add(d=d, n=n, solver=name, rel_err_inf=e_inf, rel_err_2=e_2,
                        iterations=iters, seconds=(time.perf_counter() - t0) / trials)
    return rep


def cmd_cg_iterations(dims=(1, 2, 3), n_max: int = 16, tol: float = 1e-12,
                      seed: int = DEFAULT_SEED, degrees=None) -> ExperimentReport:
    """CG iterations needed to reach relative residual *tol*."""
    rep = ExperimentReport(
        "cg-study",
        ["d", "n", "iterations", "converged", "rel_residual", "rel_err_inf"],
        metadata={"tol": tol, "seed": seed, **_environment()})
    rng = np.random.default_rng(seed)
    degrees = list(range(1, n_max + 1)) if degrees is None else list(degrees)
    for d in dims:
        for n in degrees:
            x = rng.uniform(-1.0, 1.0, size=dim(d, n))
            r = cg_solve(dense(d, n) @ x, d, n, tol=tol)
            rep.add(d=d, n=n, iterations=r.iterations, converged=r.converged,
                    rel_residual=r.residual, rel_err_inf=_rel_errors(r.x, x)[0])
    return rep


def cmd_timing(m: int = 32, degrees=range(1, 16), reps: int = 5, opcount: bool = False,
               seed: int = DEFAULT_SEED, fit_range=(5, 15), threads: int | None = 1,
               solver: str = "block") -> ExperimentReport:
    """Median wall time of one DG right-hand-side evaluation per degree.

    With *opcount*, also records the operation count of one evaluation
    (volume, facet and mass-solve work).  Log-log slopes over the degrees in
    *fit_range* go into the metadata.
    """
    cols = ["m", "n", "cells", "dofs", "seconds"]
    if opcount:
        cols += ["ops_total", "ops_solve"]
    rep = ExperimentReport("timing", cols, metadata={
        "reps": reps, "threads": threads if threads else "default", "solver": solver,
        **_environment()})
    mesh = build_structured_mesh(m, periodic=True)
    rng = np.random.default_rng(seed)
    with threadpool_limits(limits=threads):
        for n in degrees:
            dg = AcousticDG(mesh, n, solver=solver)
            u = rng.uniform(-1.0, 1.0, size=dg.zeros().shape)
            dg.rhs(u)  # warm caches
            times = []
            for _ in range(reps):
                t0 = time.perf_counter()
                dg.rhs(u)
                times.append(time.perf_counter() - t0)
            row = dict(m=m, n=n, cells=mesh.n_cells, dofs=u.size,
                       seconds=float(np.median(times)))
            if opcount:
                c = OpCounter()
                dg.rhs(u, c)
                row["ops_total"] = c.total
                row["ops_solve"] = c.elevations + c.axpy + c.scaling + c.base_solve
            rep.add(**row)
    lo, hi = fit_range
    sel = [r for r in rep.rows if lo <= r["n"] <= hi]
    if len(sel) >= 2:
        ns = [r["n"] for r in sel]
        rep.metadata["fit_range"] = f"{lo}-{hi}"
        rep.metadata["wall_slope"] = loglog_slope(ns, [r["seconds"] for r in sel])
        if opcount:
            rep.metadata["opcount_slope"] = loglog_slope(ns, [r["ops_total"] for r in sel])
    return rep


def _constant_state(bc):
    u = (0.0, 0.0) if bc == "wall" else (0.5, -0.25)

    def exact(x, y, t):
        one = np.ones_like(x + y)
        return np.stack([one, u[0] * one, u[1] * one])

    return exact


def cmd_acoustics(meshes=(8, 16, 32), n: int = 2, flux: str = "rusanov", bc: str = "periodic",
                  t_final: float = 0.5, cfl: float = 0.5, initial: str = "plane-wave",
                  solver: str = "block", snapshot_dir=None) -> ExperimentReport:
    """Run the acoustics solver on a sequence of meshes; report L2 errors.

    Periodic runs use a plane wave along x; wall runs use a standing wave
    that satisfies the reflecting condition on the unit square.
    """
    if bc not in ("periodic", "wall"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    if initial == "plane-wave":
        exact = plane_wave() if bc == "periodic" else standing_wave()
    elif initial == "constant":
        exact = _constant_state(bc)
    else:
        raise ValueError(f"unknown initial state {initial!r}")
    rep = ExperimentReport(
        "acoustics",
        ["m", "n", "flux", "bc", "h", "steps", "err_p", "err_u1", "err_u2", "err", "order"],
        metadata={"t_final": t_final, "cfl": cfl, "initial": initial, "solver": solver,
                  **_environment()})
    hs, errs = [], []
    for m in meshes:
        mesh = build_structured_mesh(m, periodic=bc == "periodic")
        dg = AcousticDG(mesh, n, flux=flux, solver=solver)
        u0 = dg.project(exact, 0.0)
        u, steps = dg.run(u0, t_final, cfl)
        e = dg.l2_error(u, exact, t_final)
        hs.append(1.0 / m)
        errs.append(float(np.linalg.norm(e)))
        rep.add(m=m, n=n, flux=flux, bc=bc, h=1.0 / m, steps=steps, err_p=float(e[0]),
                err_u1=float(e[1]), err_u2=float(e[2]), err=errs[-1])
        if snapshot_dir is not None:
            out = Path(snapshot_dir)
            out.mkdir(parents=True, exist_ok=True)
            write_state_csv(AcousticState(n, u), out / f"state_m{m}_n{n}.csv")
    for row, order in zip(rep.rows, observed_orders(hs, errs)):
        row["order"] = order
    return rep


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bernstein-dg", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", type=Path, help="write the CSV report here")
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        return sp

    sp = common(sub.add_parser("mass-accuracy", help="relative error of mass solvers"))
    sp.add_argument("--dim", type=int, nargs="+", default=[1, 2, 3])
    sp.add_argument("--degree", type=int, nargs="+", help="explicit degree list")
    sp.add_argument("--degree-max", type=int, default=16)
    sp.add_argument("--solver", nargs="+", choices=SOLVERS,
                    default=["dense", "cg", "cg-fixed", "block"])
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--reps", type=int, default=5, help="random trials per (d, n)")

    sp = common(sub.add_parser("cg-study", help="CG iterations to a residual tolerance"))
    sp.add_argument("--dim", type=int, nargs="+", default=[1, 2, 3])
    sp.add_argument("--degree", type=int, nargs="+")
    sp.add_argument("--degree-max", type=int, default=16)
    sp.add_argument("--tol", type=float, default=1e-12)

    sp = common(sub.add_parser("timing", help="wall time of the DG right-hand side"))
    sp.add_argument("--mesh", type=int, default=32)
    sp.add_argument("--degree", type=int, nargs="+")
    sp.add_argument("--degree-max", type=int, default=15)
    sp.add_argument("--reps", type=int, default=5)
    sp.add_argument("--opcount", action="store_true", help="also record operation counts")
    sp.add_argument("--solver", choices=["block", "dense"], default="block")
    sp.add_argument("--threads", type=int, default=1,
                    help="BLAS thread limit; 0 leaves the library default")

    sp = common(sub.add_parser("acoustics", help="acoustics convergence run"))
    sp.add_argument("--mesh", type=int, nargs="+", default=[8, 16, 32])
    sp.add_argument("--degree", type=int, default=2)
    sp.add_argument("--flux", choices=["rusanov", "upwind"], default="rusanov")
    sp.add_argument("--bc", choices=["periodic", "wall"], default="periodic")
    sp.add_argument("--cfl", type=float, default=0.5)
    sp.add_argument("--tfinal", type=float, default=0.5)
    sp.add_argument("--initial", choices=["plane-wave", "constant"], default="plane-wave")
    sp.add_argument("--solver", choices=["block", "dense"], default="block")
    sp.add_argument("--snapshots", type=Path, help="directory for final-state CSV dumps")
    return p


def _degrees(args, start=1):
    return args.degree if args.degree else list(range(start, args.degree_max + 1))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "mass-accuracy":
            rep = cmd_mass_accuracy(args.dim, solvers=args.solver, trials=args.reps,
                                    seed=args.seed, tol=args.tol, degrees=_degrees(args))
        elif args.command == "cg-study":
            rep = cmd_cg_iterations(args.dim, tol=args.tol, seed=args.seed,
                                    degrees=_degrees(args))
        elif args.command == "timing":
            rep = cmd_timing(args.mesh, _degrees(args), reps=args.reps, opcount=args.opcount,
                             seed=args.seed, threads=args.threads or None,
                             solver=args.solver)
        else:
            rep = cmd_acoustics(args.mesh, args.degree, args.flux, args.bc, args.tfinal,
                                args.cfl, args.initial, args.solver, args.snapshots)
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = rep.to_csv()
    sys.stdout.write(text)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
