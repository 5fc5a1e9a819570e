"""Command line front end.

Commands: ``build-gasket``, ``thresholds``, ``three-solutions``, ``verify``.
A JSON config file (``--config``) supplies defaults; flags override it.

Exit codes: 0 success, 2 precondition violation, 3 solver non-convergence,
4 verification or ordering failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .critical import CSV_HEADER, PipelineError, SolutionReport, SolverOptions, is_converged, three_solutions
from .energy import DiscreteFunction
from .functional import FunctionalContext, SolverError
from .gasket import build_level
from .nonlinearity import ProblemSpec, from_config
from .thresholds import compute_constants, threshold_report

EXIT_OK, EXIT_PRECONDITION, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4

DEFAULTS = {
    "N": 3, "m": 4, "r": 1.5, "s": 1.8, "q": 4.0,
    "lam": "auto", "eta": "auto", "seed": 0,
    "tol": 1e-8, "rtol": 1e-8, "path_points": 41, "max_iter": 500,
    "out": "out",
}


class PreconditionError(ValueError):
    pass


def _load_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            cfg.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise PreconditionError(f"cannot read config {args.config}: {exc}") from exc
    for key, val in vars(args).items():
        if val is not None and key not in ("config", "func", "command"):
            cfg[key] = val
    return cfg


def _spec(cfg: dict, lam=0.0, eta=0.0) -> ProblemSpec:
    try:
        return ProblemSpec(int(cfg["N"]), int(cfg["m"]), float(cfg["r"]),
                           float(cfg["s"]), float(cfg["q"]), lam, eta)
    except ValueError as exc:
        raise PreconditionError(str(exc)) from exc


def _options(cfg: dict) -> SolverOptions:
    return SolverOptions(tol=float(cfg["tol"]), rtol=float(cfg["rtol"]),
                         path_points=int(cfg["path_points"]),
                         max_iter=int(cfg["max_iter"]))


def _resolve_lambda(cfg: dict, spec: ProblemSpec) -> float:
    lam = cfg["lam"]
    if lam == "auto":
        return compute_constants(spec.N, spec.q, spec.s).Lambda / 2
    return float(lam)


def _write_values_csv(path: Path, u: DiscreteFunction) -> None:
    coords = u.level.coordinates()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"x{k}" for k in range(coords.shape[1])] + ["value"])
        for i, (xy, val) in enumerate(zip(coords, u.values)):
            w.writerow([i, *(repr(float(c)) for c in xy), repr(float(val))])


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------

def cmd_build_gasket(cfg: dict) -> int:
    try:
        level = build_level(int(cfg["N"]), int(cfg["m"]))
    except ValueError as exc:
        raise PreconditionError(str(exc)) from exc
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    stem = f"gasket_N{level.N}_m{level.m}"
    _dump(out / f"{stem}.json", level.to_dict())
    coords = level.coordinates()
    with (out / f"{stem}_vertices.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"x{k}" for k in range(coords.shape[1])] + ["boundary", "weight"])
        for i, xy in enumerate(coords):
            w.writerow([i, *(repr(float(c)) for c in xy), int(i < level.N),
                        repr(float(level.weights[i]))])
    with (out / f"{stem}_edges.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j"])
        w.writerows(level.edges.tolist())
    print(f"N={level.N} m={level.m}: {level.n_vertices} vertices, "
          f"{len(level.edges)} edges, {len(level.cells)} cells -> {out}/{stem}.*")
    return EXIT_OK


def cmd_thresholds(cfg: dict) -> int:
    spec = _spec(cfg)
    lam = None if cfg.get("lam") in (None, "none") else _resolve_lambda(cfg, spec)
    rep = threshold_report(spec, lam=lam, options=None)
    if cfg.get("lam") == "auto":
        rep.notes.append("lambda = Lambda / 2 (auto)")
    width = max(len(k) for k, _ in rep.table())
    for key, val in rep.table():
        print(f"{key:<{width}}  {val!r}")
    for note in rep.notes:
        print(f"# {note}")
    if cfg.get("json"):
        _dump(Path(cfg["json"]), rep.to_dict())
    return EXIT_OK


def cmd_three_solutions(cfg: dict) -> int:
    spec0 = _spec(cfg)
    lam = _resolve_lambda(cfg, spec0)
    if lam < 0:
        raise PreconditionError("lambda must be >= 0")
    eta = cfg["eta"]
    if eta == "auto":
        thr = threshold_report(spec0, lam=lam)
        if thr.eta_lambda is None:
            raise PreconditionError("eta=auto needs a nonzero u_lambda (lambda > 0)")
        eta = thr.eta_lambda / 2
    spec = _spec(cfg, lam, float(eta))
    result = three_solutions(spec, _options(cfg))

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    problem = {"N": spec.N, "m": spec.m, "r": spec.r, "s": spec.s, "q": spec.q,
               "lambda": spec.lam, "eta": spec.eta, "family": "power"}
    doc = result.to_dict(include_timing=False)
    doc["config"] = {"seed": int(cfg["seed"]), "lam": cfg["lam"], "eta": cfg["eta"],
                     "tol": float(cfg["tol"]), "rtol": float(cfg["rtol"]),
                     "path_points": int(cfg["path_points"])}
    doc["problem"] = problem
    _dump(out / "report.json", doc)
    if result.thresholds.u_lambda is not None:
        _dump(out / "thresholds.json", result.thresholds.to_dict())
    _dump(out / "timing.json", {k: r.wall_time for k, r in result.reports.items()})
    with (out / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for key, rep in result.reports.items():
            w.writerow(rep.csv_row(key))
    for key, rep in result.reports.items():
        _dump(out / f"solution_{key}.json", {"problem": problem, **rep.to_dict(False)})
        _write_values_csv(out / f"solution_{key}.csv", rep.u)

    for note in result.notes:
        print(f"# {note}")
    if not result.applicable:
        print("three-solution construction inapplicable (u_lambda = 0)")
        return EXIT_OK
    m = result.thresholds.m
    energies = {k: r.energy_value for k, r in result.reports.items()}
    line = (f"ordering I1={energies['u1']:.6e} < 0 <= I2={energies['u2']:.6e} "
            f"< m={m:.6e} <= I3={energies['u3']:.6e}: "
            f"{'holds' if result.ordering_holds else 'VIOLATED'}"
            f"{'' if result.in_regime else ' (out of regime, not enforced)'}")
    print(line)
    (out / "ordering.txt").write_text(line + "\n")
    if not result.all_converged:
        return EXIT_SOLVER
    if result.in_regime and not result.ordering_holds:
        return EXIT_VERIFY
    return EXIT_OK


_PROBLEM_KEYS = ("N", "m", "r", "s", "q", "lambda", "eta")


def _verify_one(problem: dict, sol: dict, rel: float = 1e-9) -> tuple[bool, str]:
    rep = SolutionReport.from_dict(sol)
    spec = ProblemSpec(int(problem["N"]), int(problem["m"]), float(problem["r"]),
                       float(problem["s"]), float(problem["q"]),
                       float(problem["lambda"]), float(problem["eta"]))
    fam = {k: v for k, v in problem.items() if k not in _PROBLEM_KEYS}
    nl = from_config({"family": problem.get("family", "power"), **fam}, spec)
    ctx = FunctionalContext(rep.u.level, nl)
    v = ctx.restrict(rep.u)
    I = ctx.I_of(v)
    _, _, rn = ctx.gradient_of(v)
    norm = ctx.norm_of(v)
    opts = SolverOptions()
    ok_I = abs(I - rep.energy_value) <= rel * abs(rep.energy_value) + 1e-300
    ok_res = is_converged(rn, norm, opts) if rep.converged else True
    msg = (f"{rep.kind}: I={I:.6e} (stored {rep.energy_value:.6e}) "
           f"residual={rn:.3e} relative={rn / norm if norm else 0.0:.3e} "
           f"-> {'ok' if ok_I and ok_res else 'FAILED'}")
    return ok_I and ok_res, msg


def cmd_verify(cfg: dict) -> int:
    path = Path(cfg["report"])
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise PreconditionError(f"cannot read report {path}: {exc}") from exc
    problem = doc.get("problem")
    if problem is None:
        raise PreconditionError(f"{path} has no 'problem' section")
    sols = doc["solutions"] if "solutions" in doc else {"solution": doc}
    all_ok = True
    for key, sol in sols.items():
        ok, msg = _verify_one(problem, sol)
        print(f"{key}: {msg}")
        all_ok &= ok
    return EXIT_OK if all_ok else EXIT_VERIFY


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sgdirichlet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, problem=True):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--N", type=int)
        sp.add_argument("--m", type=int)
        if problem:
            sp.add_argument("--r", type=float)
            sp.add_argument("--s", type=float)
            sp.add_argument("--q", type=float)
            sp.add_argument("--lam", help="lambda value or 'auto' (Lambda/2)")

    sp = sub.add_parser("build-gasket", help="write gasket JSON and CSV files")
    common(sp, problem=False)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_build_gasket)

    sp = sub.add_parser("thresholds", help="print c, R, m, Lambda and eta thresholds")
    common(sp)
    sp.add_argument("--json", help="also write the report to this path")
    sp.set_defaults(func=cmd_thresholds)

    sp = sub.add_parser("three-solutions", help="run the three-solution pipeline")
    common(sp)
    sp.add_argument("--eta", help="eta value or 'auto' (eta_lambda/2)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--rtol", type=float)
    sp.add_argument("--path-points", dest="path_points", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_three_solutions)

    sp = sub.add_parser("verify", help="re-check a serialized report")
    sp.add_argument("report")
    sp.add_argument("--config", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        for key in ("lam", "eta"):
            val = cfg.get(key)
            if isinstance(val, str) and val not in ("auto", "none"):
                try:
                    cfg[key] = float(val)
                except ValueError as exc:
                    raise PreconditionError(f"{key} must be a number or 'auto'") from exc
        return args.func(cfg)
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (PipelineError, SolverError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
