"""Command line front end: ``stochhom {field,solve,sweep,refine,dos,bench}``.

Every command writes its resolved configuration (``config.txt``, key=value)
next to its CSV outputs; feeding that file back through ``--params``
reproduces the run.  Exit codes: 0 success, 2 invalid configuration,
3 non-convergence when ``--strict`` is set.
"""

from __future__ import annotations

import argparse
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import fileio
from .assembly import assemble_rhs, assemble_total, export_matrix_market
from .ensemble import (
    default_workers,
    quartic_diagnostics,
    quartic_sweep,
    scaling_fit,
    std_dev_sweep,
    systematic_error_sweep,
)
from .errors import InputError, NumericalError, ParameterError
from .field import EnsembleParams, ensemble_seed, sample_field
from .homogenize import CorrectorPair, estimate_order, homogenized_matrix, refinement_study
from .solver import DEFAULT_MAX_ITER, build_preconditioner, pcg_solve
from .spectral import clustering_report, dense_eigenvalues, dos_curve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3

SOLVE_COLUMNS = ["index", "seed", "a11", "a12", "a21", "a22", "iters1", "iters2", "res1", "res2", "converged"]
TIMING_COLUMNS = ["index", "t_assembly", "t_rhs", "t_solve"]


class ConfigError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError as exc:
        raise ConfigError(f"expected a comma separated list of integers, got {text!r}") from exc


# --- configuration resolution --------------------------------------------------


def _setting(args, cfg, name, key, conv, default):
    v = getattr(args, name, None)
    if v is not None:
        return v
    if key in cfg:
        try:
            return conv(cfg[key])
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad value for {key}: {cfg[key]!r}") from exc
    return default


def resolve(args) -> dict:
    """Merge ``--params`` file, command line flags and defaults into one flat config."""
    cfg = fileio.read_config(args.params) if args.params else {}
    r: dict = {"command": args.command}
    r["L"] = _setting(args, cfg, "L", "L", int, 4)
    r["m0"] = _setting(args, cfg, "m0", "m0", int, 8)
    r["alpha"] = _setting(args, cfg, "alpha", "alpha", Fraction, Fraction(1, 4))
    r["lambda"] = _setting(args, cfg, "lam", "lambda", float, 0.4)
    r["tol"] = _setting(args, cfg, "tol", "tol", float, 1e-8)
    r["delta"] = _setting(args, cfg, "delta", "delta", float, 0.0)
    r["max_iter"] = _setting(args, cfg, "max_iter", "max_iter", int, DEFAULT_MAX_ITER)
    r["seed"] = _setting(args, cfg, "seed", "seed", int, 1)
    r["index"] = _setting(args, cfg, "index", "index", int, 1)
    r["n_realizations"] = _setting(args, cfg, "n_realizations", "n_realizations", int, 1)
    L_list = getattr(args, "L_list", None)
    r["L_list"] = _int_list(L_list) if L_list else _int_list(cfg.get("L_list", "2,4,8,16"))
    grids = getattr(args, "grids", None)
    r["grid_list"] = _int_list(grids) if grids else _int_list(cfg.get("grid_list", "32,64,128,256"))
    r["eta"] = _setting(args, cfg, "eta", "eta", float, None)
    r["tables"] = getattr(args, "tables", None) or cfg.get("tables", "std,systematic,quartic")
    if args.serial:
        r["workers"] = 1
    else:
        r["workers"] = _setting(args, cfg, "workers", "workers", int, default_workers())
    if r["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    if r["n_realizations"] < 1:
        raise ConfigError("n-realizations must be >= 1")
    if r["max_iter"] < 1:
        raise ConfigError("max-iter must be >= 1")
    if r["delta"] < 0:
        raise ConfigError("delta must be >= 0")
    if r["eta"] is not None and not r["eta"] > 0:
        raise ConfigError("eta must be positive")
    return r


def _params(r) -> EnsembleParams:
    return EnsembleParams(r["L"], r["m0"], r["alpha"], r["lambda"], r["tol"])


def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(out: Path, r: dict) -> None:
    cfg = {k: v for k, v in r.items() if k not in ("command",) and v is not None}
    fileio.write_config(out / "config.txt", cfg)


# --- commands -------------------------------------------------------------------


def cmd_field(args, r) -> int:
    params = _params(r)
    out = _out(args)
    field = sample_field(params, ensemble_seed(r["seed"], params.L), r["index"])
    fileio.write_field(out / "field.txt", field)
    fileio.write_centers(out / "centers.csv", field.centers)
    _echo_config(out, r)
    print(f"field n={params.n} inclusions={len(field.centers)} coverage={field.coverage:.4f} -> {out}")
    return EXIT_OK


def _solve_one(params, seed, index, tol, max_iter, precond, dump_dir=None):
    t0 = time.perf_counter()
    field = sample_field(params, seed, index)
    A = assemble_total(field)
    t1 = time.perf_counter()
    rhs = [assemble_rhs(field, params.lam, i) for i in (1, 2)]
    t2 = time.perf_counter()
    sols, reports = [], []
    for f in rhs:
        u, rep = pcg_solve(A, precond, f, tol, max_iter)
        sols.append(u)
        reports.append(rep)
    hom = homogenized_matrix(field, CorrectorPair(sols[0], sols[1], tuple(reports)))
    t3 = time.perf_counter()
    if dump_dir is not None:
        export_matrix_market(dump_dir / f"A_{index}.mtx", A)
    return hom, (t1 - t0, t2 - t1, t3 - t2)


def cmd_solve(args, r) -> int:
    params = _params(r)
    out = _out(args)
    seed = ensemble_seed(r["seed"], params.L)
    precond = build_preconditioner(params.n, params.lam, r["delta"])
    rows, timings = [], []
    all_converged = True
    dump = out if args.dump_matrix else None
    for index in range(r["index"], r["index"] + r["n_realizations"]):
        hom, (ta, tr, ts) = _solve_one(params, seed, index, r["tol"], r["max_iter"], precond, dump)
        all_converged &= hom.converged
        rows.append({"index": index, "seed": r["seed"], "a11": hom.a11, "a12": hom.a12, "a21": hom.a21,
                     "a22": hom.a22, "iters1": hom.iterations[0], "iters2": hom.iterations[1],
                     "res1": hom.residuals[0], "res2": hom.residuals[1], "converged": hom.converged})
        timings.append({"index": index, "t_assembly": ta, "t_rhs": tr, "t_solve": ts})
    fileio.write_csv(out / "realizations.csv", rows, SOLVE_COLUMNS)
    fileio.write_csv(out / "timings.csv", timings, TIMING_COLUMNS)
    _echo_config(out, r)
    print(f"solved {len(rows)} realization(s) n={params.n}; converged={all_converged} -> {out}")
    if not all_converged:
        print("warning: PCG did not converge for at least one realization", file=sys.stderr)
        if args.strict:
            return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_sweep(args, r) -> int:
    base = _params(r)
    out = _out(args)
    N = r["n_realizations"]
    if N < 2:
        raise ConfigError("sweep needs --n-realizations >= 2")
    tables = [t.strip() for t in r["tables"].split(",") if t.strip()]
    unknown = set(tables) - {"std", "systematic", "quartic"}
    if unknown:
        raise ConfigError(f"unknown table(s): {sorted(unknown)}")
    cache: dict = {}
    summary: dict = {"config": dict(r), "tables": {}}
    converged = True

    def fit(table, column):
        pts = [(row["L"], row[column]) for row in table.rows]
        try:
            slope, intercept, r2 = scaling_fit(pts)
        except ParameterError:
            return None
        return {"slope": slope, "intercept": intercept, "r2": r2}

    if "std" in tables:
        t = std_dev_sweep(base, r["L_list"], N, r["seed"], r["workers"], cache)
        fileio.write_csv(out / "std_dev.csv", t.rows, t.columns)
        summary["tables"]["std_dev"] = {"rows": t.rows, "fit_std_a12": fit(t, "std_a12"),
                                        "fit_std_diag_diff": fit(t, "std_diag_diff")}
    if "systematic" in tables:
        t = systematic_error_sweep(base, r["L_list"], N, r["seed"], r["workers"], cache)
        fileio.write_csv(out / "systematic_error.csv", t.rows, t.columns)
        summary["tables"]["systematic_error"] = {"rows": t.rows, "fit_diff": fit(t, "diff")}
    if "quartic" in tables:
        t = quartic_sweep(base, r["L_list"], r["seed"], N, r["workers"], cache)
        fileio.write_csv(out / "quartic_diff.csv", t.rows, t.columns)
        summary["tables"]["quartic_diff"] = {"rows": t.rows}
        largest = cache[(max(r["L_list"]), N)]
        diag = quartic_diagnostics(largest)
        summary["quartic_diagnostics"] = diag
    for (L, n_real), stats in sorted(cache.items()):
        converged &= stats.converged
    summary["converged"] = converged
    fileio.write_json(out / "summary.json", summary)
    _echo_config(out, r)
    print(f"sweep over L={r['L_list']} with N={N} -> {out}")
    if not converged and args.strict:
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_refine(args, r) -> int:
    out = _out(args)
    res = refinement_study(r["L"], r["lambda"], r["alpha"], ensemble_seed(r["seed"], r["L"]), r["grid_list"],
                           tol=min(r["tol"], 1e-11), index=r["index"])
    rows = [{"n_coarse": lv.n_coarse, "n_fine": lv.n_fine, "rel_diff": lv.rel_diff, "iterations": lv.iterations}
            for lv in res.levels]
    factors = list(res.decay_factors)
    for row, fct in zip(rows[1:], factors):
        row["decay_factor"] = fct
    rows[0]["decay_factor"] = float("nan")
    fileio.write_csv(out / "refinement.csv", rows, ["n_coarse", "n_fine", "rel_diff", "iterations", "decay_factor"])
    summary = {"config": dict(r), "differences": res.differences, "decay_factors": factors}
    if len(rows) >= 2:
        summary["order"] = estimate_order(res)
    fileio.write_json(out / "summary.json", summary)
    _echo_config(out, r)
    print(f"refinement over grids {r['grid_list']}: " + ", ".join(f"{d:.3e}" for d in res.differences))
    return EXIT_OK


def cmd_dos(args, r) -> int:
    params = _params(r)
    out = _out(args)
    seed = ensemble_seed(r["seed"], params.L)
    N = r["n_realizations"]
    fields = [sample_field(params, seed, i) for i in range(r["index"], r["index"] + N)]
    if N == 1:
        eigs = dense_eigenvalues(assemble_total(fields[0]))
        curve = dos_curve(eigs, r["eta"])
        t, curves, avg, eta = curve.t_grid, curve.values[None], curve.values, curve.eta
        extra = {"min_eigenvalue": float(eigs[0])}
    else:
        rep = clustering_report(fields, params.lam, r["eta"])
        t, curves, avg, eta = rep["t"], rep["curves"], rep["average"], rep["eta"]
        extra = {"scatter": rep["scatter"], "min_eigenvalues": rep["min_eigenvalues"]}
    columns = ["t"] + [f"r{i}" for i in range(r["index"], r["index"] + N)] + ["average"]
    rows = []
    for k in range(len(t)):
        row = {"t": t[k], "average": avg[k]}
        for j, i in enumerate(range(r["index"], r["index"] + N)):
            row[f"r{i}"] = curves[j, k]
        rows.append(row)
    fileio.write_csv(out / "dos.csv", rows, columns)
    integrals = [float(np.trapezoid(c, t)) for c in curves]
    fileio.write_json(out / "summary.json", {"config": dict(r), "eta": eta, "integrals": integrals, **extra})
    _echo_config(out, r)
    print(f"DOS for {N} realization(s), dimension {params.M}, eta={eta:.4g} -> {out}")
    return EXIT_OK


def cmd_bench(args, r) -> int:
    """Assembly / load / solve timings versus the number of inclusions (L**2)."""
    out = _out(args)
    rows = []
    for L in r["L_list"]:
        params = EnsembleParams(L, r["m0"], r["alpha"], r["lambda"], r["tol"])
        seed = ensemble_seed(r["seed"], L)
        precond = build_preconditioner(params.n, params.lam, r["delta"])
        hom, (ta, tr, ts) = _solve_one(params, seed, r["index"], r["tol"], r["max_iter"], precond)
        rows.append({"L": L, "inclusions": L * L, "n": params.n, "t_assembly": ta, "t_rhs": tr,
                     "t_solve": ts, "iterations": sum(hom.iterations)})
        print(f"L={L:4d} n={params.n:5d} assembly={ta:.3f}s rhs={tr:.3f}s solve={ts:.3f}s iters={sum(hom.iterations)}")
    fileio.write_csv(out / "bench.csv", rows, ["L", "inclusions", "n", "t_assembly", "t_rhs", "t_solve", "iterations"])
    _echo_config(out, r)
    return EXIT_OK


COMMANDS = {"field": cmd_field, "solve": cmd_solve, "sweep": cmd_sweep, "refine": cmd_refine,
            "dos": cmd_dos, "bench": cmd_bench}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="key=value configuration file")
    common.add_argument("--out-dir", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--index", type=int, help="first realization index (>= 1)")
    common.add_argument("--L", type=int, help="RVE size (inclusions per side)")
    common.add_argument("--m0", type=int, help="grid cells per inclusion pitch (power of two)")
    common.add_argument("--alpha", type=Fraction, help="overlap factor, e.g. 1/4")
    common.add_argument("--lambda", dest="lam", type=float, help="contrast in (0, 1]")
    common.add_argument("--tol", type=float, help="PCG relative residual tolerance")
    common.add_argument("--max-iter", dest="max_iter", type=int, help="PCG iteration cap (default 200)")
    common.add_argument("--delta", type=float, help="preconditioner shift (default 0)")
    common.add_argument("--n-realizations", dest="n_realizations", type=int, help="ensemble size N")
    common.add_argument("--L-list", dest="L_list", help="comma separated L values")
    common.add_argument("--grids", help="comma separated grid sizes for refine")
    common.add_argument("--eta", type=float, help="DOS broadening width")
    common.add_argument("--tables", help="sweep tables: std,systematic,quartic")
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument("--serial", action="store_true", help="single process, bit-reproducible")
    common.add_argument("--strict", action="store_true", help="exit 3 if any solve fails to converge")
    common.add_argument("--dump-matrix", action="store_true", help="write A as MatrixMarket (solve)")

    parser = argparse.ArgumentParser(prog="stochhom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "field": "sample one coefficient field and dump it",
        "solve": "homogenize realizations and write per-realization rows",
        "sweep": "Monte-Carlo statistics over a list of L",
        "refine": "grid refinement study for one configuration",
        "dos": "density of states of small operators",
        "bench": "timings versus number of inclusions",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        r = resolve(args)
        return COMMANDS[args.command](args, r)
    except (ConfigError, ParameterError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
