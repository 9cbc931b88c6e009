"""Simulation study and Monte Carlo validation harnesses.

The study machinery draws random network scenarios, sweeps the l1 budget
over a fractional grid of lambda_max, and scores support recovery with the
true-positives metric. Reproducibility contract: every random quantity is
derived from a scenario seed through a fixed seed-tree layout, so reruns
(and any parallel schedule) produce byte-identical output.

Seed tree per scenario: SeedSequence(seed) spawns four children used for
(0) topology, (1) support placement, (2) support values, (3) the parent of
per-replicate noise streams.

The Monte Carlo suites check the probabilistic guarantees on a fixed
standardized design: coverage of the l1 error bound, top-s support
recovery, the oracle prediction bound, the restricted-OLS/oracle
coincidence event, and the off-support gradient bound.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .bounds import (
    coefficient_l1_bound,
    BoundInputs,
    gradient_event_floor,
    min_signal_threshold,
    oracle_coincidence_floor,
    oracle_prediction_bound,
    residual_gradient_threshold,
    support_recovery_betamin,
    top_s_support,
)
from .conditions import compatibility_constant_exact, positive_eigenvalue
from .linalg import CoefficientVector, DesignMatrix, covariance
from .solvers import (
    SolverOptions,
    lambda_max,
    solve_l1_constrained_nnls,
    solve_nnls,
    solve_oracle_nnls,
    solve_restricted_ols,
)
from .tomography import TomographyInstance, flow_design_matrix, generate_network

NODE_COUNTS = (25, 50, 100, 200, 400)
NEIGHBOR_COUNTS = (5, 10, 20)
DELETION_PROBS = (0.2, 0.4, 0.6, 0.8, 1.0)
NOISE_VARIANCES = (0.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0)
SPARSITY_LEVELS = (2, 5, 10)

MAX_SCENARIO_ATTEMPTS = 100
# a scenario counts as keeping the full budget optimal when the mean at the
# largest budget is within this fraction of s of the grid maximum
AGGREGATE_TOLERANCE = 0.05


class DegenerateScenarioError(RuntimeError):
    """Raised when a drawn scenario admits no identifiable instance."""


@dataclass(frozen=True)
class ScenarioConfig:
    """One cell of the simulation study.

    n_nodes/K/nu_del shape the network, sigma_sq the noise variance, s the
    number of internal nodes with positive loss. The seed determines the
    whole instance and all replicate noise.
    """

    n_nodes: int
    K: int
    nu_del: float
    sigma_sq: float
    s: int
    seed: int

    def __post_init__(self):
        if self.n_nodes < 2 or self.K < 1 or self.s < 1:
            raise ValueError("n_nodes, K, s must be positive (n_nodes >= 2)")
        if not 0.0 <= self.nu_del <= 1.0:
            raise ValueError("nu_del must lie in [0, 1]")
        if self.sigma_sq < 0:
            raise ValueError("sigma_sq must be nonnegative")


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Per-budget mean true positives for one scenario.

    failures[g] counts replicates whose solve at grid point g did not
    converge; those cells are excluded from the mean (NaN if all failed).
    """

    scenario: ScenarioConfig
    lambda_fracs: np.ndarray
    mean_tp: np.ndarray
    reps: int
    failures: np.ndarray


@dataclass(frozen=True, eq=False)
class StudyResult:
    sweeps: list
    aggregate: dict
    resamples: int


def _scenario_children(seed: int):
    return np.random.SeedSequence(seed).spawn(4)


def build_instance(cfg: ScenarioConfig) -> TomographyInstance:
    """Deterministically build the scenario's network instance.

    Raises DegenerateScenarioError when the topology yields no internal
    nodes, no leaves, or fewer identifiable columns than s.
    """
    topo_seed, support_seed, value_seed, _ = _scenario_children(cfg.seed)
    topo = generate_network(cfg.n_nodes, cfg.K, cfg.nu_del, seed=topo_seed)
    if topo.internal_set.size == 0:
        raise DegenerateScenarioError("no internal nodes")
    if topo.leaf_set.size == 0:
        raise DegenerateScenarioError("no leaves")
    X = flow_design_matrix(topo)
    if X.p < cfg.s:
        raise DegenerateScenarioError(f"only {X.p} identifiable internal nodes for s = {cfg.s}")
    support = np.sort(np.random.default_rng(support_seed).choice(X.p, size=cfg.s, replace=False))
    values = np.abs(np.random.default_rng(value_seed).standard_normal(cfg.s))
    beta = np.zeros(X.p)
    beta[support] = values
    return TomographyInstance(
        X=X,
        beta_star=CoefficientVector(beta),
        sigma=math.sqrt(cfg.sigma_sq),
        topology=topo,
    )


def _draw_config(rng: np.random.Generator, node_counts, neighbor_counts, deletion_probs,
                 noise_variances, sparsity_levels) -> ScenarioConfig:
    return ScenarioConfig(
        n_nodes=int(rng.choice(node_counts)),
        K=int(rng.choice(neighbor_counts)),
        nu_del=float(rng.choice(deletion_probs)),
        sigma_sq=float(rng.choice(noise_variances)),
        s=int(rng.choice(sparsity_levels)),
        seed=int(rng.integers(0, 2**63)),
    )


def sample_scenario_with_attempts(
    rng: np.random.Generator,
    max_attempts: int = MAX_SCENARIO_ATTEMPTS,
    node_counts: Sequence[int] = NODE_COUNTS,
    neighbor_counts: Sequence[int] = NEIGHBOR_COUNTS,
    deletion_probs: Sequence[float] = DELETION_PROBS,
    noise_variances: Sequence[float] = NOISE_VARIANCES,
    sparsity_levels: Sequence[int] = SPARSITY_LEVELS,
):
    """Draw configs until one builds a non-degenerate instance.

    Returns (config, attempts). Each retry is a fresh full draw, so the
    parameter sets keep their marginal distributions conditional on
    buildability. Raises after max_attempts failures.
    """
    for attempt in range(1, max_attempts + 1):
        cfg = _draw_config(rng, node_counts, neighbor_counts, deletion_probs,
                           noise_variances, sparsity_levels)
        try:
            build_instance(cfg)
        except DegenerateScenarioError:
            continue
        return cfg, attempt
    raise DegenerateScenarioError(f"no buildable scenario in {max_attempts} attempts")


def sample_scenario(rng: np.random.Generator, **kwargs) -> ScenarioConfig:
    """Uniform draw from the parameter sets, resampled until buildable."""
    cfg, _ = sample_scenario_with_attempts(rng, **kwargs)
    return cfg


def true_positives(beta_hat, beta_star) -> int:
    """Count hits ranked strictly above the best-ranked false positive.

    Entries are ordered by decreasing estimated value (ties by lower index);
    the score is the number of entries strictly larger than the first entry
    whose true coefficient is zero. The all-zero estimate scores 0 and a
    fully-supported truth scores the full length.
    """
    bh = beta_hat.values if isinstance(beta_hat, CoefficientVector) else np.asarray(beta_hat, dtype=float)
    bs = beta_star.values if isinstance(beta_star, CoefficientVector) else np.asarray(beta_star, dtype=float)
    if bh.shape != bs.shape:
        raise ValueError("estimate and truth must have equal length")
    order = np.argsort(-bh, kind="stable")
    for k in order:
        if bs[k] == 0.0:
            return int(np.sum(bh > bh[k]))
    return int(bh.size)


def run_scenario(
    cfg: ScenarioConfig,
    reps: int = 50,
    grid: int = 20,
    solver_opts: Optional[SolverOptions] = None,
) -> SweepResult:
    """Sweep the l1 budget over a fractional grid for one scenario.

    Per replicate: draw Y, compute lambda_max from the plain NNLS solution,
    then solve the budgeted problem at every fraction. The endpoints skip
    the iterative solver (budget 0 forces the zero vector; the full budget
    reproduces the NNLS solution).
    """
    if grid < 2:
        raise ValueError("grid needs at least the two endpoints")
    if reps < 1:
        raise ValueError("reps must be positive")
    inst = build_instance(cfg)
    noise_parent = _scenario_children(cfg.seed)[3]
    noise_seeds = noise_parent.spawn(reps)
    X = inst.X.values
    mean_signal = X @ inst.beta_star.values
    fracs = np.linspace(0.0, 1.0, grid)
    tp_sum = np.zeros(grid)
    included = np.zeros(grid, dtype=int)
    failures = np.zeros(grid, dtype=int)
    for r in range(reps):
        rng = np.random.default_rng(noise_seeds[r])
        Y = mean_signal if inst.sigma == 0.0 else mean_signal + inst.sigma * rng.standard_normal(mean_signal.size)
        base = solve_nnls(X, Y, solver_opts)
        lmax = lambda_max(base)
        for g, f in enumerate(fracs):
            if f == 0.0 or lmax == 0.0:
                tp = true_positives(np.zeros(X.shape[1]), inst.beta_star)
                ok = True
            elif f == 1.0:
                tp = true_positives(base.beta, inst.beta_star)
                ok = base.converged
            else:
                sol = solve_l1_constrained_nnls(
                    X, Y, f * lmax, solver_opts, start=base.beta.values
                )
                tp = true_positives(sol.beta, inst.beta_star)
                ok = sol.converged
            if ok:
                tp_sum[g] += tp
                included[g] += 1
            else:
                failures[g] += 1
    with np.errstate(invalid="ignore"):
        mean_tp = np.where(included > 0, tp_sum / np.maximum(included, 1), np.nan)
    return SweepResult(
        scenario=cfg,
        lambda_fracs=fracs,
        mean_tp=mean_tp,
        reps=reps,
        failures=failures,
    )


def _scenario_task(args):
    cfg, reps, grid = args
    return run_scenario(cfg, reps=reps, grid=grid)


def study_csv(sweeps: Sequence[SweepResult]) -> str:
    """Long-format table: one row per scenario and grid point."""
    lines = ["scenario_id,lambda_frac,mean_tp"]
    for i, sw in enumerate(sweeps):
        for f, m in zip(sw.lambda_fracs, sw.mean_tp):
            lines.append(f"{i},{repr(float(f))},{repr(float(m))}")
    return "\n".join(lines) + "\n"


def study_aggregate(sweeps: Sequence[SweepResult], tolerance: float = AGGREGATE_TOLERANCE) -> dict:
    """Fraction of scenarios where the full budget is within tolerance*s of
    the best grid point."""
    hits = 0
    for sw in sweeps:
        finite = sw.mean_tp[np.isfinite(sw.mean_tp)]
        if finite.size == 0 or not np.isfinite(sw.mean_tp[-1]):
            continue
        if sw.mean_tp[-1] >= float(np.max(finite)) - tolerance * sw.scenario.s:
            hits += 1
    total = len(sweeps)
    return {
        "scenarios": total,
        "tolerance_fraction": tolerance,
        "fraction_full_budget_near_best": hits / total if total else float("nan"),
        "nonconverged_cells": int(sum(int(sw.failures.sum()) for sw in sweeps)),
    }


def run_study(
    n_scenarios: int = 100,
    reps: int = 10,
    grid: int = 20,
    seed: int = 0,
    workers: int = 1,
    out_dir: Optional[str] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> StudyResult:
    """Draw scenarios, sweep each, aggregate, and optionally write artifacts.

    Scenario configs are drawn sequentially from one master stream (retries
    for degenerate draws consume the stream deterministically), then solved
    in scenario order; worker count cannot change any output byte. With
    out_dir set, writes results.csv, aggregate.json and sweep.svg.
    """
    master = np.random.default_rng(np.random.SeedSequence(seed))
    configs = []
    resamples = 0
    for _ in range(n_scenarios):
        cfg, attempts = sample_scenario_with_attempts(master)
        configs.append(cfg)
        resamples += attempts - 1
    tasks = [(cfg, reps, grid) for cfg in configs]
    sweeps = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, sw in enumerate(pool.map(_scenario_task, tasks)):
                sweeps.append(sw)
                if progress:
                    progress(f"scenario {i + 1}/{n_scenarios} done")
    else:
        for i, task in enumerate(tasks):
            sweeps.append(_scenario_task(task))
            if progress:
                progress(f"scenario {i + 1}/{n_scenarios} done")
    aggregate = study_aggregate(sweeps)
    aggregate["seed"] = seed
    aggregate["reps"] = reps
    aggregate["grid"] = grid
    aggregate["resamples"] = resamples
    if out_dir is not None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "results.csv"), "w") as fh:
            fh.write(study_csv(sweeps))
        with open(os.path.join(out_dir, "aggregate.json"), "w") as fh:
            json.dump(aggregate, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(os.path.join(out_dir, "sweep.svg"), "w") as fh:
            fh.write(emit_plot(sweeps))
    return StudyResult(sweeps=sweeps, aggregate=aggregate, resamples=resamples)


def _plot_curve(item):
    if hasattr(item, "lambda_fracs"):
        return np.asarray(item.lambda_fracs, dtype=float), np.asarray(item.mean_tp, dtype=float)
    fracs, means = item
    return np.asarray(fracs, dtype=float), np.asarray(means, dtype=float)


def emit_plot(sweeps: Sequence) -> str:
    """Plain-text SVG: one polyline of mean true positives per scenario.

    Accepts SweepResult objects or bare (lambda_fracs, mean_tp) pairs.
    """
    if not sweeps:
        raise ValueError("nothing to plot")
    curves = [_plot_curve(item) for item in sweeps]
    width, height = 640.0, 440.0
    left, right, top, bottom = 60.0, 20.0, 20.0, 50.0
    plot_w = width - left - right
    plot_h = height - top - bottom
    y_max = max(1.0, max(float(np.nanmax(m)) if np.any(np.isfinite(m)) else 1.0
                         for _, m in curves))

    def sx(f):
        return left + f * plot_w

    def sy(v):
        return top + (1.0 - v / y_max) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{height:.0f}" fill="white"/>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" '
        'stroke="black" stroke-width="1"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" '
        'stroke="black" stroke-width="1"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        x = sx(frac)
        parts.append(f'<line x1="{x}" y1="{top + plot_h}" x2="{x}" y2="{top + plot_h + 5}" stroke="black"/>')
        parts.append(
            f'<text x="{x}" y="{top + plot_h + 20}" font-size="12" text-anchor="middle">{frac:g}</text>'
        )
    ticks = max(1, int(math.ceil(y_max / 5.0)))
    level = 0.0
    while level <= y_max + 1e-9:
        y = sy(level)
        parts.append(f'<line x1="{left - 5}" y1="{y}" x2="{left}" y2="{y}" stroke="black"/>')
        parts.append(
            f'<text x="{left - 9}" y="{y + 4}" font-size="12" text-anchor="end">{level:g}</text>'
        )
        level += ticks
    parts.append(
        f'<text x="{left + plot_w / 2}" y="{height - 10}" font-size="13" text-anchor="middle">'
        "fraction of the full l1 budget</text>"
    )
    parts.append(
        f'<text x="15" y="{top + plot_h / 2}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 15 {top + plot_h / 2})">mean true positives</text>'
    )
    for i, (fracs, means) in enumerate(curves):
        hue = (i * 47) % 360
        pts = [
            f"{sx(float(f)):.2f},{sy(float(m)):.2f}"
            for f, m in zip(fracs, means)
            if np.isfinite(m)
        ]
        if pts:
            parts.append(
                f'<polyline fill="none" stroke="hsl({hue},60%,45%)" stroke-opacity="0.55" '
                f'stroke-width="1" points="{" ".join(pts)}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Monte Carlo validation of the probabilistic guarantees


def make_equicorrelated_design(n: int, p: int, rho: float) -> DesignMatrix:
    """Standardized deterministic design whose empirical covariance is
    exactly (1-rho) I + rho 11^T.

    The first p rows hold sqrt(n) times the symmetric square root of that
    matrix; remaining rows are zero. Entries are nonnegative for rho >= 0,
    so the strictly-positive-entries condition applies when rho > 0.
    """
    if n < p:
        raise ValueError("need n >= p")
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    a = math.sqrt(1.0 - rho)
    b = math.sqrt(1.0 - rho + p * rho)
    half = a * np.eye(p) + (b - a) / p * np.ones((p, p))
    X = np.zeros((n, p))
    X[:p, :] = math.sqrt(n) * half
    return DesignMatrix(X, standardized=True)


@dataclass(frozen=True, eq=False)
class MonteCarloDesign:
    """Fixed design, truth, and noise level for the validation suites."""

    X: DesignMatrix
    beta_star: CoefficientVector
    sigma: float

    def __post_init__(self):
        if not self.X.standardized:
            raise ValueError("Monte Carlo suites require a standardized design")
        if self.beta_star.p != self.X.p:
            raise ValueError("beta_star length must match the design")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.beta_star.support.size == 0:
            raise ValueError("beta_star must have a nonempty support")


@dataclass(frozen=True, eq=False)
class RecoveryReport:
    """Coverage frequencies for the l1, support, and prediction guarantees."""

    trials: int
    eta: float
    nu: float
    phi: float
    l1_bound: float
    prediction_bound: float
    signal_threshold: float
    support_threshold: float
    l1_coverage: float
    support_coverage: float
    prediction_coverage: float
    floor: float


@dataclass(frozen=True, eq=False)
class OracleEventsReport:
    """Frequencies of the oracle-coincidence and gradient-bound events."""

    trials: int
    C: float
    phi: float
    coincidence_frequency: float
    coincidence_floor: float
    gradient_frequency: float
    gradient_floor: float


def _design_conditions(design: MonteCarloDesign):
    """Exact condition values for a small standardized design."""
    X = design.X
    if X.p > 14:
        raise ValueError("exact condition computation capped at p = 14")
    Sigma = covariance(X)
    if float(np.min(Sigma.values)) <= 0.0:
        raise ValueError("design violates the strictly-positive-entries condition")
    S = design.beta_star.support
    pos = positive_eigenvalue(Sigma)
    if not pos.certified:
        raise ValueError("positive eigenvalue value could not be certified")
    L = 4.0 / pos.nu
    compat = compatibility_constant_exact(Sigma, S, L)
    return Sigma, S, pos.nu, compat.phi_sq


def monte_carlo_recovery(design: MonteCarloDesign, trials: int, eta: float, seed: int) -> RecoveryReport:
    """Measure how often the finite-sample guarantees hold.

    Per trial with fresh Gaussian noise: the l1 error against its bound,
    exact top-s support recovery, and the in-sample prediction gap between
    the full and oracle solutions against its bound. The minimum on-support
    signal must clear the basic threshold or the suite refuses to run.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    _, S, nu, phi = _design_conditions(design)
    X = design.X.values
    n, p = X.shape
    s = S.size
    inp = BoundInputs(p=p, n=n, s=s, sigma=design.sigma, eta=eta, nu=nu, phi=phi)
    l1_bound = coefficient_l1_bound(inp)
    pred_bound = oracle_prediction_bound(inp)
    signal_threshold = min_signal_threshold(inp)
    support_threshold = support_recovery_betamin(inp)
    beta_min = float(np.min(design.beta_star.values[S]))
    if design.sigma > 0 and beta_min <= signal_threshold:
        raise ValueError(
            f"minimum signal {beta_min:.4g} is below the required threshold {signal_threshold:.4g}"
        )
    mean_signal = X @ design.beta_star.values
    seeds = np.random.SeedSequence(seed).spawn(trials)
    l1_hits = support_hits = pred_hits = 0
    for t in range(trials):
        rng = np.random.default_rng(seeds[t])
        Y = mean_signal if design.sigma == 0 else mean_signal + design.sigma * rng.standard_normal(n)
        fit = solve_nnls(X, Y)
        err = float(np.sum(np.abs(fit.beta.values - design.beta_star.values)))
        if err <= l1_bound:
            l1_hits += 1
        if np.array_equal(top_s_support(fit.beta, s), S):
            support_hits += 1
        oracle = solve_oracle_nnls(X, Y, S)
        gap = X @ (oracle.beta.values - fit.beta.values)
        if float(gap @ gap) <= pred_bound:
            pred_hits += 1
    return RecoveryReport(
        trials=trials,
        eta=eta,
        nu=nu,
        phi=phi,
        l1_bound=l1_bound,
        prediction_bound=pred_bound,
        signal_threshold=signal_threshold,
        support_threshold=support_threshold,
        l1_coverage=l1_hits / trials,
        support_coverage=support_hits / trials,
        prediction_coverage=pred_hits / trials,
        floor=1.0 - eta,
    )


def monte_carlo_oracle_events(design: MonteCarloDesign, C: float, trials: int, seed: int) -> OracleEventsReport:
    """Measure the coincidence and gradient events against their floors.

    Coincidence: the support-restricted least-squares solution is entrywise
    nonnegative and therefore equals the oracle solution. Gradient: every
    off-support column's inner product with the oracle residual stays below
    C sigma sqrt(n). Requires the minimum signal at or above
    C sigma / sqrt(n phi).
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if C <= 0:
        raise ValueError("C must be positive")
    _, S, nu, phi = _design_conditions(design)
    X = design.X.values
    n, p = X.shape
    s = S.size
    N = np.setdiff1d(np.arange(p), S)
    beta_min = float(np.min(design.beta_star.values[S]))
    required = C * design.sigma / math.sqrt(n * phi)
    if beta_min < required:
        raise ValueError(
            f"minimum signal {beta_min:.4g} is below the coincidence requirement {required:.4g}"
        )
    threshold = residual_gradient_threshold(C, design.sigma, n)
    mean_signal = X @ design.beta_star.values
    seeds = np.random.SeedSequence(seed).spawn(trials)
    scale = max(1.0, float(np.max(np.abs(design.beta_star.values))))
    coincidence = gradient_ok = 0
    for t in range(trials):
        rng = np.random.default_rng(seeds[t])
        Y = mean_signal if design.sigma == 0 else mean_signal + design.sigma * rng.standard_normal(n)
        ols = solve_restricted_ols(X, Y, S)
        oracle = solve_oracle_nnls(X, Y, S)
        if float(np.max(np.abs(ols.values - oracle.beta.values))) <= 1e-6 * scale:
            coincidence += 1
        residual = Y - X @ oracle.beta.values
        worst = float(np.max(X[:, N].T @ residual)) if N.size else -math.inf
        if worst <= threshold:
            gradient_ok += 1
    return OracleEventsReport(
        trials=trials,
        C=C,
        phi=phi,
        coincidence_frequency=coincidence / trials,
        coincidence_floor=oracle_coincidence_floor(s, C),
        gradient_frequency=gradient_ok / trials,
        gradient_floor=gradient_event_floor(p, C),
    )
