"""Batch command line front-end.

    duality-bounds generate --dim 8 --blocks 4 --loss 0.3 --seed 7 -o problem.json
    duality-bounds solve problem.json --with-oracle -o report.json
    duality-bounds verify problem.json --state report.json -o verify.json
    duality-bounds refine problem.json --max-restarts 10 -o trace.json

Exit codes: 0 success / StrongDual, 3 finished with a gap or a failed check,
2 bad input. Reports are deterministic apart from their ``timing`` entry.
``DUALITY_BOUNDS_THREADS`` caps BLAS threads.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import io
from .constraints import default_family, validate_on_designs
from .dual import LagrangianProblem, SolverConfig, eval_dual, minimize_dual
from .exceptions import DesignCapExceeded, DualityBoundsError, IterationLimit
from .quadratic import QuadraticForm
from .refinement import CERT_TOL, RefineConfig, bound_feedback, certify, run_restart_loop
from .scattering import MAX_ENUMERATION_BLOCKS, OBJECTIVES, Design, ScatteringProblem, build_toy_problem, power_objective
from .verification import (
    fd_check_suite,
    violation_bound_at_optimum,
    minimax_cross_check,
    psd_combination_check,
    weak_duality_check,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_GAP = 3
SUITES = ("validity", "fd", "weak", "psd", "violation_bound", "minimax")


class InputError(Exception):
    pass


@dataclass
class RunManifest:
    problem: str
    objective: str = "extinction"
    backgrounds: list = field(default_factory=list)
    constraints: str | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    stages: list = field(default_factory=list)
    out: str | None = None
    seed: int = 0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["out"] = None
        return d


def _parse_design(text: str, J: int) -> Design:
    bits = text.strip()
    if len(bits) != J or set(bits) - {"0", "1"}:
        raise InputError(f"background {text!r} is not a 0/1 string of length {J}")
    return Design(tuple(int(b) for b in bits))


def load_objective(p: ScatteringProblem, spec: str) -> QuadraticForm:
    if spec in OBJECTIVES:
        return power_objective(p, spec)
    path = Path(spec)
    if not path.exists():
        raise InputError(f"objective {spec!r} is neither {OBJECTIVES} nor a file")
    f = io.form_from_dict(io.read_json(path))
    if f.dim != p.dim:
        raise InputError(f"objective has dim {f.dim}, problem has {p.dim}")
    return f


def build_lagrangian(p: ScatteringProblem, m: RunManifest) -> LagrangianProblem:
    if m.constraints:
        cs = io.constraints_from_dict(io.read_json(m.constraints))
    else:
        cs = default_family(p, [_parse_design(b, p.J) for b in m.backgrounds])
    return LagrangianProblem.build(load_objective(p, m.objective), cs, eps_factor=m.solver.eps_factor)


def _state_summary(state) -> dict:
    return {
        "dual_value": state.value,
        "status": state.status.value,
        "grad_norm": state.grad_norm,
        "kkt_residual": state.kkt_residual,
        "iterations": state.iterations,
        "lambda_min": state.lambda_min,
        "lift_alpha": state.lift_alpha,
        "scale": state.scale,
        "phi": state.phi,
        "t_star": state.t_star,
    }


def solve_problem(m: RunManifest, with_oracle: bool = False, cert_tol: float = CERT_TOL):
    """Run one solve; returns ``(report, exit_code)``."""
    start = time.perf_counter()
    p = io.load_problem(m.problem)
    if with_oracle and p.J > MAX_ENUMERATION_BLOCKS:
        raise DesignCapExceeded(f"--with-oracle needs J <= {MAX_ENUMERATION_BLOCKS}, got J={p.J}")
    L = build_lagrangian(p, m)
    report = {"command": "solve", "manifest": m.to_dict(), "eps": L.eps}
    try:
        state = minimize_dual(L, m.solver)
    except IterationLimit as exc:
        state = exc.state
        report["error"] = str(exc)
    report.update(_state_summary(state))
    cert = certify(state, L, cert_tol)
    report["certificate"] = cert.to_dict()
    if with_oracle:
        report["weak_duality"] = weak_duality_check(p, L, state).to_dict()
    report["timing"] = {"wall_time_s": time.perf_counter() - start}
    code = EXIT_OK if cert.strong and "error" not in report else EXIT_GAP
    return report, code


def _load_state(L: LagrangianProblem, path):
    rep = io.read_json(path)
    phi = io.decode_array(rep["phi"], float)
    state = eval_dual(L, phi)
    return dataclasses.replace(state, scale=rep.get("scale"))


def verify_problem(m: RunManifest, suites, state_path=None, points=50, samples=100, seed=0):
    start = time.perf_counter()
    p = io.load_problem(m.problem)
    L = build_lagrangian(p, m)
    results = {}
    validity = validate_on_designs(L.constraints, p)
    results["validity"] = validity.to_dict()
    rest = [s for s in suites if s != "validity"]
    skipped = []
    if validity.passed and rest:
        if state_path is not None:
            state = _load_state(L, state_path)
        else:
            state = minimize_dual(L, m.solver)
        for s in rest:
            if s == "fd":
                results[s] = fd_check_suite(L, points, seed).to_dict()
            elif s == "weak":
                results[s] = weak_duality_check(p, L, state).to_dict()
            elif s == "psd":
                results[s] = psd_combination_check(L, state, samples, seed).to_dict()
            elif s == "violation_bound":
                results[s] = violation_bound_at_optimum(L, state).to_dict()
            elif s == "minimax":
                results[s] = minimax_cross_check(L, p, samples, seed, state).to_dict()
    elif not validity.passed:
        skipped = rest
    if "validity" not in suites:
        results.pop("validity")
    passed = validity.passed and all(r["passed"] for r in results.values())
    report = {
        "command": "verify",
        "manifest": m.to_dict(),
        "suites": results,
        "skipped": skipped,
        "passed": passed,
        "timing": {"wall_time_s": time.perf_counter() - start},
    }
    return report, EXIT_OK if passed else EXIT_GAP


def refine_problem(m: RunManifest, cfg: RefineConfig):
    start = time.perf_counter()
    p = io.load_problem(m.problem)
    L = build_lagrangian(p, m)
    trace = run_restart_loop(L, cfg)
    report = {"command": "refine", "manifest": m.to_dict(), "trace": trace.to_dict()}
    report["restarts"] = len(trace.iterations) - 1
    if trace.final.strong and len(trace.iterations) > 1:
        Lf = bound_feedback(L, trace.objective, trace.final.dual_value)
        try:
            st = minimize_dual(Lf, m.solver)
            report["feedback_bound"] = st.value
        except IterationLimit as exc:
            report["feedback_bound"] = None
            report["feedback_error"] = str(exc)
    report["original_bound"] = trace.iterations[0].dual_value
    report["timing"] = {"wall_time_s": time.perf_counter() - start}
    return report, EXIT_OK if trace.final.strong else EXIT_GAP


# -- argument handling


def _add_problem_args(sp):
    sp.add_argument("--objective", default="extinction",
                    help=f"one of {', '.join(OBJECTIVES)} or a JSON form file {{s, A, v}}")
    sp.add_argument("--backgrounds", nargs="*", default=[], metavar="BITS",
                    help="background designs as 0/1 strings, e.g. 1010")
    sp.add_argument("--constraints", default=None, help="constraint-set JSON replacing the default family")
    sp.add_argument("--eps-factor", type=float, default=SolverConfig.eps_factor)
    sp.add_argument("--grad-tol", type=float, default=SolverConfig.grad_tol)
    sp.add_argument("--max-iters", type=int, default=SolverConfig.max_iters)
    sp.add_argument("--seed", type=int, default=0)


def _manifest(args, problem, stages) -> RunManifest:
    solver = SolverConfig(args.eps_factor, args.grad_tol, args.max_iters, args.seed)
    return RunManifest(
        str(problem), args.objective, list(args.backgrounds), args.constraints, solver,
        list(stages), getattr(args, "out", None), args.seed,
    )


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="duality-bounds", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded toy scattering problem")
    g.add_argument("--dim", type=int, required=True)
    g.add_argument("--blocks", type=int, required=True)
    g.add_argument("--loss", type=float, required=True)
    g.add_argument("--coupling", type=float, default=0.5)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("-o", "--out", required=True)

    s = sub.add_parser("solve", help="minimize the dual and certify")
    s.add_argument("problems", nargs="+")
    _add_problem_args(s)
    s.add_argument("--with-oracle", action="store_true", help="enumerate designs for a weak-duality check")
    s.add_argument("--cert-tol", type=float, default=CERT_TOL)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("-o", "--out", help="report file (single problem)")
    s.add_argument("--out-dir", help="report directory (one <stem>.report.json per problem)")

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("problem")
    _add_problem_args(v)
    v.add_argument("--state", help="solve report whose multipliers are checked")
    v.add_argument("--suite", choices=("all",) + SUITES, default="all")
    v.add_argument("--points", type=int, default=50, help="finite-difference points")
    v.add_argument("--samples", type=int, default=100)
    v.add_argument("-o", "--out", required=True)

    r = sub.add_parser("refine", help="restart loop with source modifications")
    r.add_argument("problem")
    _add_problem_args(r)
    r.add_argument("--max-restarts", type=int, default=10)
    r.add_argument("--hybrid", action="store_true")
    r.add_argument("--single-shot", action="store_true")
    r.add_argument("--a-obj", type=float, default=1.0)
    r.add_argument("--cert-tol", type=float, default=CERT_TOL)
    r.add_argument("-o", "--out", required=True)
    return ap


def _solve_job(job):
    m, with_oracle, cert_tol, out = job
    try:
        report, code = solve_problem(m, with_oracle, cert_tol)
    except (DualityBoundsError, InputError, ValueError, KeyError, OSError) as exc:
        return f"{m.problem}: {type(exc).__name__}: {exc}", EXIT_INPUT
    io.write_json(out, report)
    return None, code


def _cmd_generate(args):
    p = build_toy_problem(args.dim, args.blocks, args.loss, args.coupling, args.seed)
    io.save_problem(args.out, p)
    return EXIT_OK


def _cmd_solve(args):
    if len(args.problems) > 1 and not args.out_dir:
        raise InputError("several problems need --out-dir")
    if not args.out and not args.out_dir:
        raise InputError("give -o or --out-dir")
    jobs = []
    for prob in args.problems:
        if not Path(prob).exists():
            raise InputError(f"missing problem file {prob}")
        if args.out_dir:
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
            out = Path(args.out_dir) / f"{Path(prob).stem}.report.json"
        else:
            out = Path(args.out)
        jobs.append((_manifest(args, prob, ["solve"]), args.with_oracle, args.cert_tol, str(out)))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_solve_job, jobs))
    else:
        results = [_solve_job(j) for j in jobs]
    for msg, _ in results:
        if msg:
            print(msg, file=sys.stderr)
    codes = [c for _, c in results]
    if EXIT_INPUT in codes:
        return EXIT_INPUT
    return EXIT_GAP if EXIT_GAP in codes else EXIT_OK


def _cmd_verify(args):
    for path in (args.problem, args.state, args.constraints):
        if path is not None and not Path(path).exists():
            raise InputError(f"missing input file {path}")
    suites = SUITES if args.suite == "all" else (args.suite,)
    m = _manifest(args, args.problem, suites)
    report, code = verify_problem(m, suites, args.state, args.points, args.samples, args.seed)
    io.write_json(args.out, report)
    return code


def _cmd_refine(args):
    if not Path(args.problem).exists():
        raise InputError(f"missing problem file {args.problem}")
    m = _manifest(args, args.problem, ["refine"])
    cfg = RefineConfig(
        max_restarts=args.max_restarts, cert_tol=args.cert_tol, a_obj=args.a_obj,
        hybrid=args.hybrid, single_shot=args.single_shot, solver=m.solver,
    )
    report, code = refine_problem(m, cfg)
    io.write_json(args.out, report)
    return code


def _limit_threads():
    n = os.environ.get("DUALITY_BOUNDS_THREADS")
    if not n:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    _limit_threads()
    handlers = {
        "generate": _cmd_generate,
        "solve": _cmd_solve,
        "verify": _cmd_verify,
        "refine": _cmd_refine,
    }
    try:
        return handlers[args.command](args)
    except (DualityBoundsError, InputError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
