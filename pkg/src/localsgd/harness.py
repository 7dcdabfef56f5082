"""Experiment orchestration: exact enumeration, Monte Carlo, grid search.

The enumeration oracle walks every noise path of a run (for finite noise
support) with its own straightforward implementation of the dynamics, kept
deliberately independent of the ``algorithms`` engine so it can serve as a
brute-force reference for it.  Monte Carlo estimation dispatches to the
compiled kernels for the two heavy problem families and to the vectorized
engine otherwise; replication i of master seed s always runs under
``noise.child_seed(s, i)``, so results do not depend on how work is chunked
or parallelized.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels, noise, rates
from .algorithms import (
    ConstantSchedule,
    RunConfig,
    make_update_rule,
    simulate_batch,
)
from .problems import (
    HardInstance,
    LogisticObjective,
    QuadraticProblem,
    hinge_quadratic_value,
    make_hard_instance,
)

ENUMERATION_BUDGET = 2**22

CSV_COLUMNS = ["algorithm", "M", "K", "R", "eta", "round", "mean_subopt",
               "stderr", "reps", "argmin_flag", "seed"]


# ---------------------------------------------------------------------------
# Exact enumeration oracle
# ---------------------------------------------------------------------------


@dataclass
class ExactResult:
    """Exact distribution of a run's output over all noise paths."""

    outputs: np.ndarray          # (N, d) output point per path
    probabilities: np.ndarray    # (N,)
    suboptimalities: np.ndarray  # (N,)
    mean_suboptimality: float
    mean_output: np.ndarray      # (d,)
    round_means: np.ndarray      # (n_rounds, d): E[x_bar after each round]
    step_means: Optional[np.ndarray] = None  # (T, d) for local/serial patterns

    def output_coordinate(self, j: int = 0) -> np.ndarray:
        return self.outputs[:, j]

    def variance_of(self, j: int = 0) -> float:
        v = self.outputs[:, j]
        mu = float(self.probabilities @ v)
        return float(self.probabilities @ (v - mu) ** 2)


def _enum_draws(problem, config: RunConfig):
    values, probs = (problem.noise_outcomes() or (None, None))
    if values is None:
        raise ValueError("problem noise is not finitely enumerable")
    S = len(values)
    M = 1 if config.algorithm == "serial" else config.M
    if config.algorithm in ("local", "minibatch", "serial"):
        n_slots = config.K * config.R * M
    else:  # thumb_twiddling consumes one draw per machine per round
        n_slots = config.R * M
    if S**n_slots > ENUMERATION_BUDGET:
        raise ValueError(
            f"enumeration budget exceeded: {S}^{n_slots} paths > {ENUMERATION_BUDGET}")
    return np.asarray(values, dtype=np.float64), np.asarray(probs), S, n_slots


def exact_expectation(problem, config: RunConfig) -> ExactResult:
    """Enumerate all noise paths of a run and average exactly.

    Requires finite noise support (e.g. the +/-sigma families) and a path
    count within the enumeration budget.  The dynamics below are a direct
    transcription of the update definitions, independent of the simulation
    engine.
    """
    values, probs, S, n_slots = _enum_draws(problem, config)
    pattern = config.algorithm
    K, R = config.K, config.R
    M = 1 if pattern == "serial" else config.M
    N = S**n_slots
    idx = np.arange(N)
    d = problem.dimension

    def draw(slot):
        digits = (idx // S**slot) % S
        return values[digits], probs[digits]

    x0 = np.zeros(d) if config.x0 is None else np.asarray(config.x0, dtype=np.float64)
    rule = make_update_rule(config)
    # path probability: product over slots of the per-draw probability
    prob_path = np.ones(N)
    for slot in range(n_slots):
        digits = (idx // S**slot) % S
        prob_path *= probs[digits]
    x = np.broadcast_to(x0, (N, M, d)).copy()
    state_xag = x.copy() if config.method == "ac_sa" else None

    # running accumulators for the averaging scheme
    scheme = config.averaging
    name = scheme if isinstance(scheme, str) else scheme.name
    acc = np.zeros((N, d))
    acc_w = 0.0

    def iterate_of(xv, xagv):
        return xv if config.method == "sgd" else xagv

    eff_K = 1 if pattern == "thumb_twiddling" else K
    n_rounds = K * R if pattern == "serial" else R
    local_like = pattern in ("local", "serial")
    round_local_steps = (1 if pattern == "serial" else K) if local_like else 0

    step_weights = None
    if not isinstance(scheme, str):
        step_weights = scheme.weights(K * R if local_like else n_rounds)

    n_steps = K * R if local_like else n_rounds
    step_means = np.empty((n_steps, d)) if local_like else None
    round_means = np.empty((n_rounds, d))

    t_step = 0       # rule step counter
    slot = 0         # noise slot counter
    for r in range(n_rounds):
        if local_like:
            for _ in range(round_local_steps):
                a = rule.alpha_fn(t_step) if config.method == "ac_sa" else None
                if config.method == "ac_sa":
                    q = (1.0 - a) * state_xag + a * x
                else:
                    q = x
                g = np.empty((N, M, d))
                for m in range(M):
                    z, _ = draw(slot + m)
                    g[:, m] = problem.stochastic_gradient(q[:, m], z)
                slot += M
                step = rule.eta(t_step) if config.method == "sgd" else rule.gamma_fn(t_step)
                x = x - step * g
                if config.method == "ac_sa":
                    state_xag = (1.0 - a) * state_xag + a * x
                t_step += 1
                xbar_t = iterate_of(x, state_xag).mean(axis=1)
                step_means[t_step - 1] = prob_path @ xbar_t
                if step_weights is not None or name in ("uniform_all", "machine_time"):
                    w = 1.0 if step_weights is None else step_weights[t_step - 1]
                    acc += w * xbar_t
                    acc_w += w
        else:  # minibatch / thumb_twiddling: one rule step per round
            a = rule.alpha_fn(r) if config.method == "ac_sa" else None
            if config.method == "ac_sa":
                q = (1.0 - a) * state_xag + a * x
            else:
                q = x
            qq = q[:, 0]
            g = np.zeros((N, d))
            for j in range(eff_K * M):
                z, _ = draw(slot + j)
                g += problem.stochastic_gradient(qq, z)
            g /= eff_K * M
            slot += eff_K * M
            step = rule.eta(r) if config.method == "sgd" else rule.gamma_fn(r)
            x = x - step * g[:, None, :]
            if config.method == "ac_sa":
                state_xag = (1.0 - a) * state_xag + a * x
            if step_weights is not None or name in ("uniform_all", "machine_time"):
                w = 1.0 if step_weights is None else step_weights[r]
                acc += w * iterate_of(x, state_xag).mean(axis=1)
                acc_w += w
        # communication: average machines
        x = np.broadcast_to(x.mean(axis=1, keepdims=True), x.shape).copy()
        if config.method == "ac_sa":
            state_xag = np.broadcast_to(state_xag.mean(axis=1, keepdims=True),
                                        state_xag.shape).copy()
        round_means[r] = prob_path @ iterate_of(x, state_xag)[:, 0]
        if name == "uniform_rounds":
            acc += iterate_of(x, state_xag)[:, 0]
            acc_w += 1.0

    if name == "final_iterate":
        out = iterate_of(x, state_xag)[:, 0]
    else:
        if acc_w <= 0:
            raise ValueError("averaging scheme accumulated zero weight")
        out = acc / acc_w

    sub = np.asarray(problem.suboptimality(out), dtype=np.float64)
    return ExactResult(
        outputs=out,
        probabilities=prob_path,
        suboptimalities=sub,
        mean_suboptimality=float(prob_path @ sub),
        mean_output=prob_path @ out,
        round_means=round_means,
        step_means=step_means,
    )


def sorted_atoms(result: ExactResult, coordinate: int = 0):
    """Output-coordinate atoms sorted by value, with matching probabilities."""
    v = result.output_coordinate(coordinate)
    order = np.argsort(v, kind="stable")
    return v[order], result.probabilities[order]


def distribution_discrepancy(a: ExactResult, b: ExactResult, coordinate: int = 0) -> float:
    """Max distance between sorted equal-probability atoms of two outputs."""
    va, pa = sorted_atoms(a, coordinate)
    vb, pb = sorted_atoms(b, coordinate)
    if len(va) != len(vb) or not np.allclose(pa, pb, rtol=0, atol=1e-15):
        raise ValueError("distributions have different atom structure")
    return float(np.abs(va - vb).max())


# ---------------------------------------------------------------------------
# Monte Carlo estimation
# ---------------------------------------------------------------------------


@dataclass
class EstimateResult:
    """Monte Carlo estimate of E[F(output) - F*] and the per-round curve."""

    mean: float
    stderr: float
    reps: int
    round_means: np.ndarray            # (R,)
    round_stderrs: np.ndarray          # (R,)
    config: dict = field(default_factory=dict)
    values: Optional[np.ndarray] = None
    all_diverged: bool = False
    se_undefined: bool = False


def _sample_stats(values: np.ndarray):
    reps = values.shape[0]
    mean = float(values.mean())
    if not math.isfinite(mean):
        return mean, math.inf
    if reps < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(reps))


def _is_constant_sgd(config: RunConfig) -> bool:
    return (config.method == "sgd" and isinstance(config.schedule, ConstantSchedule)
            and config.averaging == "final_iterate")


def _hard_fast_path(problem: HardInstance, config: RunConfig, seeds: np.ndarray):
    """Round suboptimalities via the compiled coordinate kernel.

    Coordinates 1 and 2 are noiseless, hence identical across machines and
    replications; they are iterated directly.  Coordinate 3 runs in the
    kernel.  Returns (out_sub (B,), round_sub (B, R)).
    """
    eta = config.schedule.eta(0)
    x0 = np.zeros(3) if config.x0 is None else np.asarray(config.x0, dtype=np.float64)
    pattern = config.algorithm
    minibatch = pattern in ("minibatch", "thumb_twiddling")
    K_eff = 1 if pattern == "thumb_twiddling" else config.K
    M_eff = 1 if pattern == "serial" else config.M
    R_eff = config.K * config.R if pattern == "serial" else config.R
    K_kernel = 1 if pattern == "serial" else K_eff
    coord3 = np.asarray(kernels.hinge_run(problem.L, problem.c, problem.sigma, eta,
                                          K_kernel, R_eff, M_eff, seeds, x0[2], minibatch))
    # deterministic coordinates: gradient descent, one update per rule step
    steps_per_round = 1 if minibatch else K_kernel
    x1, x2 = x0[0], x0[1]
    c1 = np.empty(R_eff)
    c2 = np.empty(R_eff)
    for r in range(R_eff):
        for _ in range(steps_per_round):
            x1 = x1 - eta * (problem.mu * (x1 - problem.b))
            x2 = x2 - eta * (problem.H * (x2 - problem.b))
        c1[r], c2[r] = x1, x2
    with np.errstate(all="ignore"):
        det = (0.5 * problem.mu * (c1 - problem.b) ** 2
               + 0.5 * problem.H * (c2 - problem.b) ** 2)
        round_sub = det[None, :] + hinge_quadratic_value(problem.L, coord3 - problem.c)
    round_sub = np.where(np.isnan(round_sub), np.inf, round_sub)
    bad = ~np.isfinite(round_sub)
    if bad.any():
        first = np.where(bad.any(axis=1), np.argmax(bad, axis=1), round_sub.shape[1])
        mask = np.arange(round_sub.shape[1])[None, :] >= first[:, None]
        round_sub = np.where(mask, np.inf, round_sub)
    return round_sub[:, -1].copy(), round_sub


def _logistic_fast_path(problem: LogisticObjective, config: RunConfig, seeds: np.ndarray):
    eta = config.schedule.eta(0)
    x0 = np.zeros(problem.dimension) if config.x0 is None else np.asarray(config.x0)
    pattern = config.algorithm
    minibatch = pattern in ("minibatch", "thumb_twiddling")
    K_eff = 1 if pattern == "thumb_twiddling" else config.K
    M_eff = 1 if pattern == "serial" else config.M
    R_eff = config.K * config.R if pattern == "serial" else config.R
    K_kernel = 1 if pattern == "serial" else K_eff
    y = problem.dataset.labels.astype(np.float64) * 2.0 - 1.0
    w = np.asarray(kernels.logistic_run(problem.dataset.features, y, eta, K_kernel,
                                        R_eff, M_eff, seeds, x0, minibatch))
    with np.errstate(all="ignore"):
        round_sub = problem.suboptimality(w)
    round_sub = np.where(np.isnan(round_sub), np.inf, round_sub)
    bad = ~np.isfinite(round_sub)
    if bad.any():
        first = np.where(bad.any(axis=1), np.argmax(bad, axis=1), round_sub.shape[1])
        mask = np.arange(round_sub.shape[1])[None, :] >= first[:, None]
        round_sub = np.where(mask, np.inf, round_sub)
    return round_sub[:, -1].copy(), round_sub


def _mc_round_subopt(problem, config: RunConfig, seeds: np.ndarray):
    if _is_constant_sgd(config):
        if isinstance(problem, HardInstance):
            return _hard_fast_path(problem, config, seeds)
        if isinstance(problem, LogisticObjective):
            return _logistic_fast_path(problem, config, seeds)
    res = simulate_batch(problem, config, seeds)
    return res.suboptimality, res.round_suboptimality


def monte_carlo(problem, config: RunConfig, reps: int, master_seed: int,
                keep_values: bool = False) -> EstimateResult:
    """Estimate E[F(output) - F*] over ``reps`` independent replications."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    seeds = noise.child_seed_np(np.uint64(master_seed), np.arange(reps, dtype=np.uint64))
    out_sub, round_sub = _mc_round_subopt(problem, config, seeds)
    with np.errstate(all="ignore"):
        mean, se = _sample_stats(out_sub)
        r_mean = round_sub.mean(axis=0)
        r_se = (round_sub.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1
                else np.zeros(round_sub.shape[1]))
    r_mean = np.where(np.isnan(r_mean), np.inf, r_mean)
    r_se = np.where(np.isnan(r_se), np.inf, r_se)
    return EstimateResult(
        mean=mean, stderr=se, reps=reps,
        round_means=r_mean, round_stderrs=r_se,
        config=config.describe(),
        values=out_sub if keep_values else None,
        all_diverged=bool(~np.isfinite(out_sub).any()),
        se_undefined=reps < 2,
    )


# ---------------------------------------------------------------------------
# Stepsize grid search (the tuned-curve protocol)
# ---------------------------------------------------------------------------


def stepsize_grid(lo: float = 2.0**-20, hi: float = 2.0**4, per_octave: int = 2) -> np.ndarray:
    """Log-spaced stepsize grid, ``per_octave`` points per factor of two."""
    if not (0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    n = int(round(math.log2(hi / lo) * per_octave)) + 1
    return lo * 2.0 ** (np.arange(n) / per_octave)


@dataclass
class GridCurveResult:
    """min-over-stepsize suboptimality per round, with the tuned stepsizes."""

    etas: np.ndarray             # (G,)
    round_means: np.ndarray      # (G, R)
    round_stderrs: np.ndarray    # (G, R)
    min_curve: np.ndarray        # (R,)
    min_stderr: np.ndarray       # (R,)
    argmin_eta: np.ndarray       # (R,)
    argmin_index: np.ndarray     # (R,) int
    reps: int


def _curve_task(args):
    problem, config, reps, master_seed = args
    est = monte_carlo(problem, config, reps, master_seed)
    return est.round_means, est.round_stderrs


def grid_search_curve(problem, algorithm: str, M: int, K: int, R: int,
                      grid: Sequence[float], reps: int, master_seed: int,
                      workers: int = 1, method: str = "sgd",
                      x0=None) -> GridCurveResult:
    """Per-round tuned curve g(r) = min over the grid of mean suboptimality.

    Ties break toward the smaller stepsize (the grid is ascending and argmin
    takes the first minimizer).  Diverged runs contribute +inf and are
    naturally ignored by the min unless every stepsize diverged.
    """
    grid = np.asarray(sorted(grid), dtype=np.float64)
    if grid.size == 0:
        raise ValueError("stepsize grid is empty")
    tasks = []
    for eta in grid:
        config = RunConfig(algorithm=algorithm, M=M, K=K, R=R,
                           schedule=ConstantSchedule(float(eta)), seed=0,
                           method=method, x0=x0)
        tasks.append((problem, config, reps, master_seed))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_curve_task, tasks))
    else:
        results = [_curve_task(t) for t in tasks]
    means = np.stack([r[0] for r in results])
    ses = np.stack([r[1] for r in results])
    arg = means.argmin(axis=0)
    rounds = np.arange(means.shape[1])
    return GridCurveResult(
        etas=grid, round_means=means, round_stderrs=ses,
        min_curve=means[arg, rounds], min_stderr=ses[arg, rounds],
        argmin_eta=grid[arg], argmin_index=arg, reps=reps,
    )


# ---------------------------------------------------------------------------
# Verification suites
# ---------------------------------------------------------------------------


@dataclass
class InvarianceReport:
    factorizations: list
    max_discrepancy: float
    variance: dict
    variance_ratio_vs_serial: float
    ok: bool


def verify_quadratic_invariance(T: int, M: int, sigma: float, eta: float,
                                H: float = 1.0, x0: float = 1.0,
                                tol: float = 1e-12) -> InvarianceReport:
    """Check that x_bar_T's exact distribution only depends on K*R = T.

    Enumerates every noise path of local SGD on the 1-d quadratic
    F(x) = H x^2 / 2 with +/-sigma gradient noise, for every factorization
    (K, R) of T, and compares the sorted output atoms.  Also checks the
    variance-reduction identity Var_M = Var_serial / M.
    """
    problem = QuadraticProblem(np.array([[H]]), np.array([0.0]), sigma)
    factors = [(k, T // k) for k in range(1, T + 1) if T % k == 0]
    results = {}
    for (K, R) in factors:
        config = RunConfig(algorithm="local", M=M, K=K, R=R,
                           schedule=ConstantSchedule(eta), x0=np.array([x0]))
        results[(K, R)] = exact_expectation(problem, config)
    base = results[factors[0]]
    disc = 0.0
    for kr in factors[1:]:
        disc = max(disc, distribution_discrepancy(base, results[kr]))
    serial = exact_expectation(
        problem,
        RunConfig(algorithm="local", M=1, K=1, R=T,
                  schedule=ConstantSchedule(eta), x0=np.array([x0])),
    )
    var_m = base.variance_of(0)
    var_serial = serial.variance_of(0)
    ratio = var_m / var_serial if var_serial > 0 else math.nan
    return InvarianceReport(
        factorizations=factors,
        max_discrepancy=disc,
        variance={str(kr): results[kr].variance_of(0) for kr in factors},
        variance_ratio_vs_serial=ratio,
        ok=bool(disc <= tol),
    )


@dataclass
class LowerBoundReport:
    etas: np.ndarray
    local_measured: np.ndarray        # (G,) mean suboptimality per stepsize
    local_stderr: np.ndarray
    bound_value: float                # closed-form lower bound at c = 1
    c_fit: float                      # min measured / bound over the grid
    local_tuned: float
    minibatch_tuned: float
    mu: float
    coord2_blowup_checked: bool
    ok: bool


def verify_lower_bound(H: float, lambda_: float, B: float, sigma: float,
                       M: int, K: int, R: int, grid: Sequence[float],
                       reps: int = 1024, master_seed: int = 0) -> LowerBoundReport:
    """Measure local SGD on the hard instance across a stepsize grid.

    Checks that every fixed stepsize leaves suboptimality at least
    c_fit * (lower-bound expression); c_fit is reported so it can be frozen
    into regression tests.  Also reports the grid-tuned minibatch error on
    the same instance, and checks the deterministic coordinate-2 blow-up for
    any grid stepsizes above 2/H.
    """
    if K < 2:
        raise ValueError("the lower-bound construction requires K >= 2")
    problem = make_hard_instance(H, lambda_, B, sigma, K, R)
    grid = np.asarray(sorted(grid), dtype=np.float64)
    conv = rates.STRONGLY_CONVEX if lambda_ > 0 else rates.GENERAL
    bound = rates.rate("local_lower", conv, H, lambda_, B, sigma, M, K, R)

    measured = np.empty(grid.size)
    stderrs = np.empty(grid.size)
    enumerable = 2 ** (K * R * M) <= ENUMERATION_BUDGET and sigma > 0
    for i, eta in enumerate(grid):
        config = RunConfig(algorithm="local", M=M, K=K, R=R,
                           schedule=ConstantSchedule(float(eta)))
        if enumerable:
            measured[i] = exact_expectation(problem, config).mean_suboptimality
            stderrs[i] = 0.0
        else:
            est = monte_carlo(problem, config, reps, master_seed)
            measured[i], stderrs[i] = est.mean, est.stderr

    finite = np.isfinite(measured)
    c_fit = float((measured[finite] / bound).min()) if finite.any() else math.inf

    mb = grid_search_curve(problem, "minibatch", M, K, R, grid, reps, master_seed)
    coord2_ok = True
    b = problem.b
    for eta in grid[grid > 2.0 / H]:
        config = RunConfig(algorithm="local", M=1, K=K, R=R,
                           schedule=ConstantSchedule(float(eta)))
        x2 = simulate_batch(HardInstance(mu=problem.mu, H=H, B=B, sigma=0.0,
                                         lambda_=lambda_),
                            config, np.array([0], dtype=np.uint64)).output_points[0, 1]
        if 0.5 * H * (x2 - b) ** 2 < 0.5 * H * b**2 - 1e-12:
            coord2_ok = False

    return LowerBoundReport(
        etas=grid, local_measured=measured, local_stderr=stderrs,
        bound_value=bound, c_fit=c_fit,
        local_tuned=float(np.nanmin(np.where(finite, measured, np.nan)))
        if finite.any() else math.inf,
        minibatch_tuned=float(mb.min_curve[-1]),
        mu=problem.mu, coord2_blowup_checked=coord2_ok,
        ok=bool(c_fit > 0 and coord2_ok),
    )


# ---------------------------------------------------------------------------
# Sweeps and CSV output
# ---------------------------------------------------------------------------


@dataclass
class SweepSpec:
    """Grid of runs: problems x algorithms x (M, K, R) x stepsizes."""

    problem: dict
    algorithms: list
    M_grid: list
    K_grid: list
    R_grid: list
    eta_lo: float = 2.0**-20
    eta_hi: float = 2.0**4
    eta_per_octave: int = 2
    reps: int = 32
    master_seed: int = 0
    rounds_to_report: Optional[list] = None  # default: every round

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("replications must be >= 1")
        if not (0 < self.eta_lo < self.eta_hi):
            raise ValueError("stepsize grid must be increasing")

    def grid(self) -> np.ndarray:
        return stepsize_grid(self.eta_lo, self.eta_hi, self.eta_per_octave)

    def reported_rounds(self, R: int) -> list:
        if self.rounds_to_report is None:
            return list(range(1, R + 1))
        return [r for r in self.rounds_to_report if 1 <= r <= R]


def format_float(x: float) -> str:
    """17-significant-digit decimal, round-trippable to the same double."""
    return format(float(x), ".17g")


def sweep_rows(problem, spec: SweepSpec, workers: int = 1) -> list:
    """Run the sweep and emit one CSV row per (config, stepsize, round)."""
    rows = []
    for algorithm in spec.algorithms:
        for M in spec.M_grid:
            for K in spec.K_grid:
                for R in spec.R_grid:
                    curve = grid_search_curve(problem, algorithm, M, K, R,
                                              spec.grid(), spec.reps,
                                              spec.master_seed, workers=workers)
                    for gi, eta in enumerate(curve.etas):
                        for rnd in spec.reported_rounds(R):
                            r = rnd - 1
                            rows.append({
                                "algorithm": algorithm, "M": M, "K": K, "R": R,
                                "eta": eta, "round": rnd,
                                "mean_subopt": curve.round_means[gi, r],
                                "stderr": curve.round_stderrs[gi, r],
                                "reps": spec.reps,
                                "argmin_flag": int(curve.argmin_index[r] == gi),
                                "seed": spec.master_seed,
                            })
    return rows


def write_csv(rows: list, path) -> None:
    """Write sweep rows with the fixed column order and 17-digit floats."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            cells = []
            for col in CSV_COLUMNS:
                v = row[col]
                cells.append(format_float(v) if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")
