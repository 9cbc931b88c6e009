"""Command-line interface.

One executable, subcommand style:

  solve      fit the sign-constrained model to CSV data
  check      evaluate design conditions on a design or covariance CSV
  bounds     evaluate the finite-sample bound formulas
  simulate   generate a network instance (topology, design, response)
  study      run the scenario sweep study and write its artifacts
  validate   run the Monte Carlo coverage suites
  plot       re-render an SVG from a study results.csv

Exit codes: 0 success, 1 usage or input error, 2 numerical non-convergence,
3 validation-suite failure. Every JSON summary echoes the seed (null when
the subcommand consumes no randomness). The SIGNLS_OUTPUT_DIR environment
variable supplies the default output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from .bounds import (
    BoundInputs,
    coefficient_l1_bound,
    gaussian_cdf,
    gaussian_tail_constant,
    gradient_event_floor,
    joint_recovery_floor,
    min_signal_threshold,
    oracle_coincidence_floor,
    oracle_prediction_bound,
    residual_gradient_threshold,
    support_recovery_betamin,
)
from .conditions import (
    MAX_ENUMERATION_P,
    block_structure_bound,
    compatibility_constant_exact,
    compatibility_lower_bound,
    few_negative_entries_bound,
    population_transfer,
    positive_eigenvalue,
    strictly_positive_entries_bound,
)
from .experiments import (
    MonteCarloDesign,
    ScenarioConfig,
    build_instance,
    emit_plot,
    make_equicorrelated_design,
    monte_carlo_oracle_events,
    monte_carlo_recovery,
    run_study,
)
from .linalg import (
    CoefficientVector,
    CovarianceMatrix,
    as_matrix,
    covariance,
    load_matrix_csv,
    load_vector_csv,
    save_matrix_csv,
    save_vector_csv,
)
from .solvers import (
    ACTIVE_SET,
    PROJECTED_GRADIENT,
    SolverOptions,
    lambda_max,
    solve_l1_constrained_nnls,
    solve_nnls,
    solve_oracle_nnls,
    verify_kkt,
)
from .tomography import simulate_observations

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_VALIDATION = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and (obj != obj):
        return None
    return obj


def _emit(summary: dict, args, to_stdout: bool = True) -> None:
    text = json.dumps(_jsonify(summary), indent=2, sort_keys=True)
    if to_stdout:
        print(text)
    sink = getattr(args, "json", None)
    if sink:
        with open(sink, "w") as fh:
            fh.write(text + "\n")


def _parse_index_list(text: str) -> np.ndarray:
    try:
        idx = np.array([int(tok) for tok in text.split(",") if tok.strip() != ""], dtype=int)
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {text!r}")
    if idx.size == 0:
        raise ValueError("index list is empty")
    return idx


def _default_out() -> str:
    return os.environ.get("SIGNLS_OUTPUT_DIR", ".")


def _solver_options(args) -> SolverOptions:
    return SolverOptions(
        kkt_tolerance=args.tolerance,
        max_iterations=args.max_iterations,
        algorithm=args.algorithm,
    )


def cmd_solve(args) -> int:
    X = load_matrix_csv(args.design)
    Y = load_vector_csv(args.response)
    opts = _solver_options(args)
    if args.support is not None:
        S = _parse_index_list(args.support)
        sol = solve_oracle_nnls(X, Y, S, opts)
    elif args.l1_bound is not None:
        sol = solve_l1_constrained_nnls(X, Y, args.l1_bound, opts)
    else:
        sol = solve_nnls(X, Y, opts)
    line = ",".join(repr(float(v)) for v in sol.beta.values)
    print(line)
    if args.out:
        save_vector_csv(args.out, sol.beta.values)
    report = verify_kkt(X, Y, sol.beta, tol=opts.kkt_tolerance) if args.support is None and args.l1_bound is None else None
    summary = {
        "command": "solve",
        "seed": None,
        "algorithm": sol.algorithm,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "objective": sol.objective,
        "l1_norm": lambda_max(sol),
        "coefficients": sol.beta.values,
        "kkt": None
        if report is None
        else {
            "stationarity_violation": report.stationarity_violation,
            "complementarity_violation": report.complementarity_violation,
            "feasibility_violation": report.feasibility_violation,
            "passed": report.passed,
        },
    }
    _emit(summary, args, to_stdout=False)
    if not sol.converged:
        sys.stderr.write("solver did not converge\n")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_check(args) -> int:
    if args.design is not None:
        X = as_matrix(load_matrix_csv(args.design))
        Sigma = covariance(X)
    else:
        Sigma = CovarianceMatrix(load_matrix_csv(args.covariance))
    p = Sigma.values.shape[0]
    out = {"command": "check", "seed": None, "p": p}
    pos = positive_eigenvalue(Sigma)
    out["phi_pos"] = {"value": pos.nu, "certified": pos.certified}
    out["strictly_positive"] = {"nu": strictly_positive_entries_bound(Sigma)}
    few = few_negative_entries_bound(Sigma)
    out["few_negative"] = {
        "negative_set": few.negative_set,
        "nu": few.nu,
        "restricted_exact": few.restricted_exact,
    }
    if args.blocks is not None:
        if args.rho is None:
            raise ValueError("--blocks requires --rho")
        blocks = json.loads(args.blocks)
        out["block"] = {"nu": block_structure_bound(Sigma, blocks, args.rho), "rho": args.rho}
    if args.support is not None:
        if args.L is None:
            raise ValueError("--support requires --L")
        S = _parse_index_list(args.support)
        if p <= MAX_ENUMERATION_P:
            comp = compatibility_constant_exact(Sigma, S, args.L)
        else:
            comp = compatibility_lower_bound(Sigma, S, args.L)
        out["compatibility"] = {"phi_sq": comp.phi_sq, "L": comp.L, "method": comp.method}
        if args.population_phi is not None and args.delta is not None:
            tr = population_transfer(args.population_phi, args.delta, args.L, S.size)
            out["transfer"] = {
                "empirical_lower_bound": tr.empirical_lower_bound,
                "delta_threshold": tr.delta_threshold,
                "guaranteed_half": tr.guaranteed_half,
            }
    _emit(out, args)
    return EXIT_OK


def cmd_bounds(args) -> int:
    nu, phi = args.nu, args.phi
    if args.from_check is not None:
        with open(args.from_check) as fh:
            chk = json.load(fh)
        if nu is None:
            if chk.get("phi_pos", {}).get("certified"):
                nu = chk["phi_pos"]["value"]
            else:
                nu = chk.get("strictly_positive", {}).get("nu")
        if phi is None:
            phi = chk.get("compatibility", {}).get("phi_sq")
    if nu is None or phi is None:
        raise ValueError("nu and phi are required (flags or --from-check)")
    inp = BoundInputs(p=args.p, n=args.n, s=args.s, sigma=args.sigma, eta=args.eta, nu=nu, phi=phi)
    out = {
        "command": "bounds",
        "seed": None,
        "inputs": {
            "p": args.p,
            "n": args.n,
            "s": args.s,
            "sigma": args.sigma,
            "eta": args.eta,
            "nu": nu,
            "phi": phi,
        },
        "tail_constant": gaussian_tail_constant(args.p, args.eta),
        "l1_bound": coefficient_l1_bound(inp),
        "signal_threshold": min_signal_threshold(inp),
        "support_threshold": support_recovery_betamin(inp),
        "prediction_bound": oracle_prediction_bound(inp),
    }
    if args.C is not None:
        out["C"] = args.C
        out["gradient_threshold"] = residual_gradient_threshold(args.C, args.sigma, args.n)
        out["normal_cdf_at_C"] = gaussian_cdf(args.C)
        out["joint_recovery_floor"] = joint_recovery_floor(args.p, args.s, args.C)
        out["coincidence_floor"] = oracle_coincidence_floor(args.s, args.C)
        out["gradient_floor"] = gradient_event_floor(args.p, args.C)
    _emit(out, args)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = ScenarioConfig(
        n_nodes=args.n_nodes,
        K=args.k,
        nu_del=args.nu_del,
        sigma_sq=args.sigma_sq,
        s=args.s,
        seed=args.seed,
    )
    inst = build_instance(cfg)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    topo_path = os.path.join(out_dir, "topology.json")
    with open(topo_path, "w") as fh:
        fh.write(inst.topology.to_json())
    design_path = os.path.join(out_dir, "design.csv")
    save_matrix_csv(design_path, inst.X.values)
    truth_path = os.path.join(out_dir, "truth.csv")
    save_vector_csv(truth_path, inst.beta_star.values)
    noise_seed = np.random.SeedSequence(args.seed).spawn(4)[3].spawn(1)[0]
    Y = simulate_observations(inst, noise_seed)
    response_path = os.path.join(out_dir, "response.csv")
    save_vector_csv(response_path, Y)
    summary = {
        "command": "simulate",
        "seed": args.seed,
        "n_nodes": args.n_nodes,
        "K": args.k,
        "nu_del": args.nu_del,
        "sigma_sq": args.sigma_sq,
        "s": args.s,
        "leaves": inst.X.values.shape[0],
        "identifiable_internal": inst.X.values.shape[1],
        "files": {
            "topology": topo_path,
            "design": design_path,
            "truth": truth_path,
            "response": response_path,
        },
    }
    _emit(summary, args)
    return EXIT_OK


def cmd_study(args) -> int:
    progress = (lambda line: sys.stderr.write(line + "\n")) if args.verbose else None
    result = run_study(
        n_scenarios=args.scenarios,
        reps=args.reps,
        grid=args.grid,
        seed=args.seed,
        workers=args.threads,
        out_dir=args.out,
        progress=progress,
    )
    summary = dict(result.aggregate)
    summary["command"] = "study"
    summary["out_dir"] = args.out
    _emit(summary, args)
    return EXIT_OK


def cmd_validate(args) -> int:
    design = make_equicorrelated_design(args.n, args.p, args.rho)
    Sigma = covariance(design)
    nu = positive_eigenvalue(Sigma).nu
    S = np.arange(args.s)
    phi = compatibility_constant_exact(Sigma, S, 4.0 / nu).phi_sq
    inp = BoundInputs(p=args.p, n=args.n, s=args.s, sigma=args.sigma, eta=args.eta, nu=nu, phi=phi)
    beta_min = args.signal_factor * max(
        support_recovery_betamin(inp),
        args.C * args.sigma / np.sqrt(args.n * phi),
    )
    beta = np.zeros(args.p)
    beta[S] = beta_min
    mc = MonteCarloDesign(X=design, beta_star=CoefficientVector(beta), sigma=args.sigma)

    def margin(floor: float) -> float:
        return 3.0 * float(np.sqrt(max(floor * (1.0 - floor), 0.0) / args.trials))

    out = {
        "command": "validate",
        "seed": args.seed,
        "suite": args.suite,
        "trials": args.trials,
        "design": {"n": args.n, "p": args.p, "s": args.s, "rho": args.rho, "sigma": args.sigma},
        "nu": nu,
        "phi": phi,
        "beta_min": beta_min,
    }
    passed = True
    if args.suite in ("recovery", "all"):
        rep = monte_carlo_recovery(mc, trials=args.trials, eta=args.eta, seed=args.seed)
        floor = rep.floor
        checks = {
            "l1": rep.l1_coverage,
            "support": rep.support_coverage,
            "prediction": rep.prediction_coverage,
        }
        suite = {"floor": floor, "margin": margin(floor)}
        for name, freq in checks.items():
            ok = freq >= floor - margin(floor)
            suite[name] = {"frequency": freq, "pass": ok}
            passed = passed and ok
        suite["l1_bound"] = rep.l1_bound
        suite["prediction_bound"] = rep.prediction_bound
        out["recovery"] = suite
    if args.suite in ("oracle", "all"):
        rep = monte_carlo_oracle_events(mc, C=args.C, trials=args.trials, seed=args.seed)
        suite = {"C": args.C}
        for name, freq, floor in (
            ("coincidence", rep.coincidence_frequency, rep.coincidence_floor),
            ("gradient", rep.gradient_frequency, rep.gradient_floor),
        ):
            ok = freq >= floor - margin(floor)
            suite[name] = {"frequency": freq, "floor": floor, "margin": margin(floor), "pass": ok}
            passed = passed and ok
        out["oracle"] = suite
    out["passed"] = passed
    _emit(out, args)
    return EXIT_OK if passed else EXIT_VALIDATION


def cmd_plot(args) -> int:
    curves = {}
    with open(args.results) as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["scenario_id", "lambda_frac", "mean_tp"]:
            raise ValueError("results file must have columns scenario_id,lambda_frac,mean_tp")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            sid, frac, mean = line.split(",")
            curves.setdefault(int(sid), []).append((float(frac), float(mean)))
    ordered = []
    for sid in sorted(curves):
        pts = curves[sid]
        ordered.append((np.array([f for f, _ in pts]), np.array([m for _, m in pts])))
    svg = emit_plot(ordered)
    with open(args.out, "w") as fh:
        fh.write(svg)
    _emit({"command": "plot", "seed": None, "scenarios": len(ordered), "out": args.out}, args)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="signls", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", metavar="subcommand")

    def add_json(p):
        p.add_argument("--json", metavar="PATH", help="also write the JSON summary to this file")

    p = sub.add_parser("solve", help="fit the sign-constrained model to CSV data")
    p.add_argument("--design", required=True, help="design matrix CSV (rows = observations)")
    p.add_argument("--response", required=True, help="response vector CSV (one column)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--l1-bound", type=float, help="add the budget constraint ||b||_1 <= this")
    group.add_argument("--support", help="comma-separated 0-based columns; fit restricted to them")
    p.add_argument("--algorithm", choices=[ACTIVE_SET, PROJECTED_GRADIENT], default=ACTIVE_SET)
    p.add_argument("--tolerance", type=float, default=1e-9, help="relative KKT tolerance")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--out", help="write coefficients to this CSV as well")
    add_json(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="evaluate design conditions")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--design", help="design matrix CSV; its empirical covariance is analyzed")
    src.add_argument("--covariance", help="covariance matrix CSV, analyzed directly")
    p.add_argument("--support", help="comma-separated 0-based support for the compatibility value")
    p.add_argument("--L", type=float, help="cone opening constant for the compatibility value")
    p.add_argument("--blocks", help='JSON block partition, e.g. "[[0,1],[2,3]]"')
    p.add_argument("--rho", type=float, help="off-block magnitude bound used with --blocks")
    p.add_argument("--population-phi", type=float, help="population-level value for the transfer report")
    p.add_argument("--delta", type=float, help="covariance perturbation radius for the transfer report")
    add_json(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bounds", help="evaluate the finite-sample bound formulas")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--nu", type=float, help="lower bound on the positive eigenvalue value")
    p.add_argument("--phi", type=float, help="compatibility value")
    p.add_argument("--C", type=float, help="also evaluate the C-dependent thresholds and floors")
    p.add_argument("--from-check", help="take nu/phi from a check JSON report")
    add_json(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="generate a network instance")
    p.add_argument("--n-nodes", type=int, required=True)
    p.add_argument("--k", type=int, required=True, help="candidate out-neighbours per node")
    p.add_argument("--nu-del", type=float, required=True, help="edge deletion probability")
    p.add_argument("--sigma-sq", type=float, default=0.0, help="noise variance for the response")
    p.add_argument("--s", type=int, default=2, help="number of lossy internal nodes")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=_default_out(), help="output directory")
    add_json(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", help="run the scenario sweep study")
    p.add_argument("--scenarios", type=int, default=100)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--grid", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", default=_default_out(), help="directory for results.csv, aggregate.json, sweep.svg")
    p.add_argument("-v", "--verbose", action="store_true", help="per-scenario log line on stderr")
    add_json(p)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("validate", help="run the Monte Carlo coverage suites")
    p.add_argument("--suite", choices=["recovery", "oracle", "all"], default="all")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--C", type=float, default=2.5)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--signal-factor", type=float, default=1.05,
                   help="beta_min as a multiple of the binding threshold")
    add_json(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plot", help="re-render the sweep SVG from results.csv")
    p.add_argument("--results", required=True, help="long-format results.csv from study")
    p.add_argument("--out", default="sweep.svg")
    add_json(p)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
