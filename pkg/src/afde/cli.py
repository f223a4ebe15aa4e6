"""Command line entry point.

    afde similarity --m 0.8 0.4
    afde eval barenblatt_1d --m 0.5 --t 1 --points "0;1;2"
    afde run --config run.toml --out out/
    afde profile --config profile.toml --out out/
    afde verify smoothing [--config exp.toml] [--out dir] [--seed 0] [--format svg]
    afde report out/smoothing-<hash>.json [--format svg]

Exit codes: 0 success, 1 config/validation error, 2 numerical failure,
3 verification criterion failed. AFDE_THREADS caps BLAS threads.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import closed_forms as cf
from .config import RunConfig, config_hash, default_experiment_params, load_config
from .errors import ConfigError, NumericalFailure, VerificationFailure
from .grid import ScalarField, TensorGrid, sample, write_snapshot_csv
from .report import emit_report, format_text, read_json, write_csv, write_svg, report_stem
from .similarity import ExponentError, derive_similarity, validate_exponents
from .solver import solve_cauchy, solve_profile
from .verify import EXPERIMENTS, ExperimentReport

log = logging.getLogger("afde")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3
FORMS = ("barenblatt_1d", "vss_1d", "isotropic", "partition", "sandwich")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; usage problems are config errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--out", type=Path, help="output directory (default: config output.dir)")
    common.add_argument("--seed", type=int, help="random seed (u64)")
    common.add_argument("--format", choices=("json", "csv", "svg", "text"), action="append", help="extra output formats")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="afde", description="Anisotropic fast diffusion numerics")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("similarity", parents=[common], help="print the exponent table")
    s.add_argument("--m", type=float, nargs="+", help="exponents m_1..m_N")

    e = sub.add_parser("eval", parents=[common], help="evaluate a closed form at points (CSV)")
    e.add_argument("form", choices=FORMS)
    e.add_argument("--m", type=float, nargs="+")
    e.add_argument("--t", type=float, default=1.0)
    e.add_argument("--C", type=float, default=1.0, help="free constant (barenblatt_1d, isotropic)")
    e.add_argument("--K", type=float, default=1.0, help="sandwich constant")
    e.add_argument("--points", help="points separated by ';', coordinates by ','")
    e.add_argument("--points-file", type=Path, help="CSV with one point per row (header optional)")

    sub.add_parser("run", parents=[common], help="evolve the equation from the [run] block")
    sub.add_parser("profile", parents=[common], help="solve for the self-similar profile")

    v = sub.add_parser("verify", parents=[common], help="run an experiment")
    v.add_argument("experiment", choices=sorted(EXPERIMENTS))

    r = sub.add_parser("report", parents=[common], help="re-render a stored JSON report")
    r.add_argument("path", type=Path)
    return p


def _exponents_from(args, cfg: RunConfig | None):
    if getattr(args, "m", None):
        return validate_exponents(len(args.m), args.m)
    if cfg is not None:
        return cfg.exponents
    raise ConfigError("exponents required: pass --m or --config")


def _formats(args, cfg: RunConfig | None) -> list[str]:
    f = list(cfg.output.formats) if cfg else ["json"]
    for x in args.format or []:
        if x not in f:
            f.append(x)
    return f


def _out_dir(args, cfg: RunConfig | None) -> Path:
    if args.out is not None:
        return args.out
    return Path(cfg.output.dir) if cfg else Path("out")


def cmd_similarity(args, cfg) -> int:
    me = _exponents_from(args, cfg)
    se = derive_similarity(me)
    tab = {"N": me.N, "m": list(me.m), **se.table()}
    print(json.dumps(tab, indent=2))
    print(f"{'axis':>4} {'m':>10} {'sigma':>10} {'a':>10} {'gamma':>10} {'mu':>10}")
    for i in range(me.N):
        print(f"{i + 1:>4} {me.m[i]:>10.6g} {se.sigma[i]:>10.6g} {se.a[i]:>10.6g} {se.gamma[i]:>10.6g} {se.mu[i]:>10.6g}")
    print(f"alpha={se.alpha:.6g} beta={se.beta:.6g}")
    return EXIT_OK


def _read_points(args) -> np.ndarray:
    if args.points_file is not None:
        rows = []
        with open(args.points_file, newline="") as fh:
            for row in csv.reader(fh):
                try:
                    rows.append([float(x) for x in row])
                except ValueError:
                    if rows:
                        raise ConfigError(f"{args.points_file}: non-numeric row {row}") from None
        pts = rows
    elif args.points:
        try:
            pts = [[float(x) for x in chunk.split(",")] for chunk in args.points.split(";") if chunk.strip()]
        except ValueError as e:
            raise ConfigError(f"--points: {e}") from None
    else:
        raise ConfigError("eval needs --points or --points-file")
    if not pts or len({len(p) for p in pts}) != 1:
        raise ConfigError("points must be non-empty and share one dimension")
    return np.asarray(pts, dtype=float)


def cmd_eval(args, cfg) -> int:
    me = _exponents_from(args, cfg)
    P = _read_points(args)
    if P.shape[1] != me.N:
        raise ConfigError(f"points have {P.shape[1]} coordinates but N={me.N}")
    se = derive_similarity(me)
    if args.form in ("barenblatt_1d", "vss_1d"):
        if me.N != 1:
            raise ConfigError(f"{args.form} needs N=1")
        if args.form == "barenblatt_1d":
            vals = cf.barenblatt_solution_1d(P[:, 0], args.t, me.m[0], args.C)
        else:
            vals = cf.vss_1d(P[:, 0], args.t, me.m[0])
    elif args.form == "isotropic":
        if len(set(me.m)) != 1:
            raise ConfigError("isotropic form needs equal exponents")
        vals = cf.isotropic_profile(P, me.m[0], me.N, args.C)
    elif args.form == "partition":
        vals = cf.partition_min(P, args.t, me, se, cf.surrogate_calibration(me))
    else:
        vals = cf.sandwich_bound(P, me, args.K, se)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(me.N)] + ["value"])
    for p, v in zip(P, np.broadcast_to(vals, (len(P),))):
        w.writerow([f"{x:.17g}" for x in p] + [f"{float(v):.17g}"])
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _need_config(args) -> RunConfig:
    if args.config is None:
        raise ConfigError(f"{args.command} needs --config")
    return load_config(args.config)


def _initial(cfg: RunConfig) -> ScalarField:
    me, r = cfg.exponents, cfg.run
    grid = TensorGrid(cfg.grid.L, cfg.grid.n)
    P = grid.points()
    if r.initial == "barenblatt":
        if me.N != 1:
            raise ConfigError("run.initial = barenblatt needs N=1")
        return sample(lambda p: cf.barenblatt_solution_1d(p[..., 0], r.t0, me.m[0], r.C), grid, r.t0)
    if r.initial == "bump":
        vals = np.clip(1.0 - np.sum(P**2, axis=-1) / r.radius**2, 0.0, None) ** 2
    else:
        vals = np.all(np.abs(P) <= r.radius, axis=-1).astype(float)
    if vals.sum() == 0:
        raise ConfigError("run.radius too small for the grid")
    vals *= r.mass / (vals.sum() * grid.cell_volume)
    return ScalarField(grid, vals, r.t0)


def cmd_run(args, cfg) -> int:
    cfg = cfg or _need_config(args)
    me = cfg.exponents
    solver = cfg.solver
    if solver.bc == "barrier-dirichlet" and solver.barrier is None:
        if cfg.run.initial == "barenblatt":
            m, C = me.m[0], cfg.run.C

            def barrier(p, t):
                return cf.barenblatt_solution_1d(p[..., 0], t, m, C)

        else:
            se, cal = derive_similarity(me), cf.surrogate_calibration(me)

            def barrier(p, t):
                return cf.partition_min(p, t, me, se, cal)

        solver = solver.replace(barrier=barrier)
    tr = solve_cauchy(_initial(cfg), cfg.run.t_end, me, solver)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    stem = report_stem("run", cfg.sha256())
    for k, f in enumerate(tr.fields):
        write_snapshot_csv(f, out / f"{stem}-snap{k:03d}.csv")
    diag = {"config": cfg.to_dict(), "config_sha256": cfg.sha256(), "diagnostics": tr.diagnostics()}
    (out / f"{stem}.json").write_text(json.dumps(diag, indent=2, sort_keys=True) + "\n")
    print(f"run: {len(tr.fields)} snapshots, {tr.steps} steps, mass {tr.mass[0]:.12g} -> {tr.mass[-1]:.12g}, files in {out}")
    return EXIT_OK


def cmd_profile(args, cfg) -> int:
    cfg = cfg or _need_config(args)
    me = cfg.exponents
    se = derive_similarity(me)
    grid = TensorGrid(cfg.grid.L, cfg.grid.n)
    res = solve_profile(cfg.profile.mass, me, se, cfg.solver, grid, dtau0=cfg.profile.dtau0, dtau_max=cfg.profile.dtau_max)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    stem = report_stem("profile", cfg.sha256())
    write_snapshot_csv(res.profile, out / f"{stem}.csv")
    info = {k: getattr(res, k) for k in ("mass", "increment", "residual", "iterations", "tau", "ssni_violation", "symmetry_defect")}
    (out / f"{stem}.json").write_text(json.dumps({"config": cfg.to_dict(), "config_sha256": cfg.sha256(), "result": info}, indent=2, sort_keys=True) + "\n")
    print(f"profile: {res.iterations} iterations, residual {res.residual:.3g}, mass {res.mass:.12g}, files in {out}")
    return EXIT_OK


def cmd_verify(args, cfg) -> int:
    name = args.experiment
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    if cfg is not None and cfg.experiment not in (None, name):
        raise ConfigError(f"config describes experiment {cfg.experiment!r}, not {name!r}")
    if cfg is not None and cfg.experiment_params is not None:
        params = cfg.experiment_params
        if args.seed is not None and hasattr(params, "seed"):
            params = dataclasses.replace(params, seed=seed)
    else:
        params = default_experiment_params(name, seed)
    record = {"experiment": name, "seed": seed, "params": json.loads(json.dumps(dataclasses.asdict(params)))}
    sha = config_hash(record)
    rep: ExperimentReport = EXPERIMENTS[name][1](params)
    d = rep.to_dict()
    d["config"] = record
    files = emit_report(d, _out_dir(args, cfg), sha, _formats(args, cfg))
    d["config_sha256"] = sha
    print(format_text(d))
    print(f"elapsed {rep.elapsed:.1f}s; wrote " + ", ".join(str(f) for f in files))
    if not rep.passed:
        raise VerificationFailure(f"{name}: " + ", ".join(k for k, v in rep.verdicts.items() if not v.passed))
    return EXIT_OK


def cmd_report(args, cfg) -> int:
    try:
        d = read_json(args.path)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read report {args.path}: {e}") from None
    ExperimentReport.from_dict(d)  # schema check
    print(format_text(d))
    out = args.out or args.path.parent
    stem = args.path.stem
    for f in args.format or []:
        if f == "svg":
            p = write_svg(d, Path(out) / f"{stem}.svg")
            print(f"wrote {p}" if p else "no plottable series")
        elif f == "csv":
            print(f"wrote {write_csv(d, Path(out) / f'{stem}.csv')}")
    return EXIT_OK


COMMANDS = {
    "similarity": cmd_similarity,
    "eval": cmd_eval,
    "run": cmd_run,
    "profile": cmd_profile,
    "verify": cmd_verify,
    "report": cmd_report,
}


def _limit_threads():
    n = os.environ.get("AFDE_THREADS")
    if not n:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(int(n))


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_CONFIG
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        _limit_threads()
        cfg = load_config(args.config) if args.config is not None else None
        return COMMANDS[args.command](args, cfg)
    except ConfigError as e:
        for msg in e.errors:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except ExponentError as e:
        for msg in e.violations:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except VerificationFailure as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return EXIT_VERIFY
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
