"""Execution patterns and update rules for the (M, K, R) structure.

An *update rule* is a first-order method whose gradient-query point and state
update are fixed affine maps of the state (SGD and the two-sequence
accelerated method both qualify).  The four execution patterns -- local,
minibatch, thumb-twiddling, serial -- run such a rule over M machines, K
steps per communication round, and R rounds.

Noise keying: the gradient sample consumed at sequential step ``t`` on
machine ``m`` of a run with seed ``s`` is always derived from
``noise.gradient_key(s, t, m)``.  Minibatch consumes, in round ``r``, exactly
the keys ``t in [rK, rK+K)`` that local SGD would; thumb-twiddling takes one
step per round and is keyed like an algorithm with K=1 (its K is pure cost
bookkeeping).  Together with a fixed-order pairwise machine reduction this
makes the degenerate-pattern identities hold bit-for-bit:

* local(K=1)  == thumb-twiddling        (same config otherwise)
* thumb(K=1)  == minibatch(K=1)
* local(M=1)  == serial with T = K*R
* minibatch(M=1, K=1) == serial with T = R
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import noise

PATTERNS = ("local", "minibatch", "thumb_twiddling", "serial")
METHODS = ("sgd", "ac_sa")


# ---------------------------------------------------------------------------
# Deterministic machine reduction
# ---------------------------------------------------------------------------


def pairwise_sum(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """Fixed-order pairwise (adjacent-pairing) sum along ``axis``.

    The reduction tree depends only on the length of the axis, so the result
    is bit-identical no matter how the work is split across workers, and the
    compiled kernels implement the same tree.
    """
    a = np.moveaxis(np.asarray(a), axis, 0)
    n = a.shape[0]
    while n > 1:
        half = n // 2
        s = a[0 : 2 * half : 2] + a[1 : 2 * half : 2]
        if n & 1:
            s = np.concatenate([s, a[n - 1 : n]], axis=0)
        a = s
        n = a.shape[0]
    return a[0]


def machine_mean(a: np.ndarray, axis: int = 0) -> np.ndarray:
    return pairwise_sum(a, axis) / a.shape[axis]


# ---------------------------------------------------------------------------
# Stepsize schedules
# ---------------------------------------------------------------------------


def tuned_constant_stepsize(H: float, B: float, sigma: float, M: int, K: int, R: int) -> float:
    """Optimally tuned constant stepsize for local SGD, general convex case.

    min{ 1/(4H), B sqrt(M) / (sigma sqrt(KR)), (B^2/(H sigma^2 K^2 R))^(1/3) },
    where the cube-root term only participates when K > 1 and M > 1.
    With sigma = 0 the noise terms are vacuous and the cap 1/(4H) is returned.
    """
    if min(H, B) <= 0 or min(M, K, R) < 1:
        raise ValueError("H, B must be positive and M, K, R >= 1")
    cap = 1.0 / (4.0 * H)
    if sigma == 0.0:
        return cap
    eta = min(cap, B * math.sqrt(M) / (sigma * math.sqrt(K * R)))
    if K > 1 and M > 1:
        eta = min(eta, (B**2 / (H * sigma**2 * K**2 * R)) ** (1.0 / 3.0))
    return eta


class ConstantSchedule:
    """eta_t = eta for all t."""

    variant = "constant"

    def __init__(self, eta: float):
        if eta <= 0:
            raise ValueError("stepsize must be positive")
        self.value = float(eta)

    def eta(self, t: int) -> float:
        return self.value

    def describe(self) -> dict:
        return {"variant": self.variant, "eta": self.value}


class TunedConstantSchedule(ConstantSchedule):
    """Constant schedule at the tuned general-convex stepsize."""

    variant = "convex_tuned"

    def __init__(self, H: float, B: float, sigma: float, M: int, K: int, R: int):
        super().__init__(tuned_constant_stepsize(H, B, sigma, M, K, R))
        self._inputs = {"H": H, "B": B, "sigma": sigma, "M": M, "K": K, "R": R}

    def describe(self) -> dict:
        return {"variant": self.variant, "eta": self.value, **self._inputs}


class StagedSchedule:
    """Two-phase strongly convex schedule.

    flavor "tuned" (used with the unsquared staged weights):
        KR <= 2H/lambda:  eta_t = 1/(4H)
        otherwise:        eta_t = 1/(4H) for t <= KR/2,
                          eta_t = 2 / (8H + lambda (t - KR/2)) after.
    flavor "halved_cap" (partner of the squared weights; caps at 1/(2H)):
        KR <= 2H/lambda:  eta_t = 1/(2H)
        otherwise:        eta_t = 1/(2H) for t < KR/2,
                          eta_t = 2 / (4H + lambda (t - KR/2)) from t = KR/2.
    """

    variant = "strongly_convex_staged"

    def __init__(self, H: float, lambda_: float, K: int, R: int, flavor: str = "tuned"):
        if lambda_ <= 0:
            raise ValueError("staged schedule needs lambda > 0")
        if flavor not in ("tuned", "halved_cap"):
            raise ValueError(f"unknown flavor {flavor!r}")
        self.H = float(H)
        self.lambda_ = float(lambda_)
        self.T = K * R
        self.flavor = flavor

    def eta(self, t: int) -> float:
        H, lam, T = self.H, self.lambda_, self.T
        if self.flavor == "tuned":
            if T <= 2 * H / lam or t <= T / 2:
                return 1.0 / (4.0 * H)
            return 2.0 / (8.0 * H + lam * (t - T / 2.0))
        if T <= 2 * H / lam or t < T / 2:
            return 1.0 / (2.0 * H)
        return 2.0 / (4.0 * H + lam * (t - T / 2.0))

    def describe(self) -> dict:
        return {"variant": self.variant, "H": self.H, "lambda": self.lambda_,
                "T": self.T, "flavor": self.flavor}


class InverseTSchedule:
    """eta_t = 2 / (lambda (a + t + 1))."""

    variant = "inverse_t"

    def __init__(self, lambda_: float, a: float):
        if lambda_ <= 0:
            raise ValueError("inverse-t schedule needs lambda > 0")
        if a + 1 <= 0:
            raise ValueError("need a + 1 > 0 so all stepsizes are positive")
        self.lambda_ = float(lambda_)
        self.a = float(a)

    def eta(self, t: int) -> float:
        return 2.0 / (self.lambda_ * (self.a + t + 1.0))

    def describe(self) -> dict:
        return {"variant": self.variant, "lambda": self.lambda_, "a": self.a}


Schedule = Union[ConstantSchedule, StagedSchedule, InverseTSchedule]


# ---------------------------------------------------------------------------
# Averaging schemes
# ---------------------------------------------------------------------------


class WeightedStaged:
    """Weights paired with StagedSchedule, applied to the step averages x_bar_t.

    Unsquared (partner of flavor "tuned"):
        KR <= 2H/lambda: w_t = (1 - lambda/(4H))^(-t-1)
        otherwise:       w_t = 0 for t <= KR/2, 8H/lambda + t - KR/2 after.
    Squared (partner of flavor "halved_cap"):
        KR <= 2H/lambda: w_t = (1 - lambda/(2H))^(-t-1)
        otherwise:       w_t = 0 for t < KR/2, (4H/lambda + t - KR/2)^2 from KR/2.
    """

    def __init__(self, H: float, lambda_: float, K: int, R: int, squared: bool = False):
        if lambda_ <= 0:
            raise ValueError("staged weights need lambda > 0")
        self.H = float(H)
        self.lambda_ = float(lambda_)
        self.T = K * R
        self.squared = squared

    @property
    def name(self) -> str:
        return "weighted_staged_sq" if self.squared else "weighted_staged"

    def weights(self, T: Optional[int] = None) -> np.ndarray:
        T = self.T if T is None else T
        t = np.arange(1, T + 1, dtype=np.float64)
        H, lam = self.H, self.lambda_
        if self.squared:
            if self.T <= 2 * H / lam:
                return (1.0 - lam / (2.0 * H)) ** (-t - 1.0)
            w = np.where(t < self.T / 2.0, 0.0, (4.0 * H / lam + t - self.T / 2.0) ** 2)
            return w
        if self.T <= 2 * H / lam:
            return (1.0 - lam / (4.0 * H)) ** (-t - 1.0)
        return np.where(t <= self.T / 2.0, 0.0, 8.0 * H / lam + t - self.T / 2.0)

    def describe(self) -> dict:
        return {"variant": self.name, "H": self.H, "lambda": self.lambda_, "T": self.T}


AveragingScheme = Union[str, WeightedStaged]

_STEPWISE_SCHEMES = ("uniform_all", "machine_time")


def _averaging_name(scheme: AveragingScheme) -> str:
    return scheme if isinstance(scheme, str) else scheme.name


def averaging_needs_steps(scheme: AveragingScheme) -> bool:
    return isinstance(scheme, WeightedStaged) or scheme in _STEPWISE_SCHEMES


# ---------------------------------------------------------------------------
# Update rules
# ---------------------------------------------------------------------------


class SGDRule:
    """x_{t+1} = x_t - eta_t g; the query point is x_t itself."""

    def __init__(self, schedule: Schedule):
        self.schedule = schedule

    def init(self, x0: np.ndarray) -> tuple:
        return (x0,)

    def query(self, state: tuple, t: int) -> np.ndarray:
        return state[0]

    def step(self, state: tuple, g: np.ndarray, t: int) -> tuple:
        return (state[0] - self.schedule.eta(t) * g,)

    def output(self, state: tuple) -> np.ndarray:
        return state[0]

    def eta(self, t: int) -> float:
        return self.schedule.eta(t)


def acsa_tuned_gamma0(H: float, B: float, sigma: float, M: int, K: int, R: int) -> float:
    """Base stepsize for the accelerated rule: min{1/(4H), B sqrt(M)/(sigma (KR)^1.5)}.

    Chosen so the deterministic part decays like H B^2/(KR)^2 while the noise
    term matches sigma B / sqrt(MKR) when the effective variance is sigma^2/M.
    """
    if sigma == 0.0:
        return 1.0 / (4.0 * H)
    return min(1.0 / (4.0 * H), B * math.sqrt(M) / (sigma * (K * R) ** 1.5))


class ACSARule:
    """Two-sequence accelerated stochastic approximation.

    With 0-based step counter t:

        x_md   = (1 - alpha_t) x_ag + alpha_t x        (query point)
        x'     = x - gamma_t g
        x_ag'  = (1 - alpha_t) x_ag + alpha_t x'

    Defaults alpha_t = 2/(t+2), gamma_t = gamma0 (t+1).  Both maps are affine
    with data-independent coefficients, so the rule is a valid linear-update
    algorithm; with alpha_t = 1 it degenerates to SGD with stepsize gamma_t.
    """

    def __init__(self, gamma0: Optional[float] = None,
                 gamma_fn: Optional[Callable[[int], float]] = None,
                 alpha_fn: Optional[Callable[[int], float]] = None):
        if gamma_fn is None:
            if gamma0 is None or gamma0 <= 0:
                raise ValueError("ac_sa needs a positive gamma0 (or explicit gamma_fn)")
            gamma_fn = lambda t: gamma0 * (t + 1.0)
        self.gamma_fn = gamma_fn
        self.alpha_fn = alpha_fn or (lambda t: 2.0 / (t + 2.0))
        self.gamma0 = gamma0

    def init(self, x0: np.ndarray) -> tuple:
        return (x0, x0)

    def query(self, state: tuple, t: int) -> np.ndarray:
        a = self.alpha_fn(t)
        return (1.0 - a) * state[1] + a * state[0]

    def step(self, state: tuple, g: np.ndarray, t: int) -> tuple:
        a = self.alpha_fn(t)
        gam = self.gamma_fn(t)
        if gam <= 0:
            raise ValueError("non-positive accelerated stepsize")
        x_new = state[0] - gam * g
        return (x_new, (1.0 - a) * state[1] + a * x_new)

    def output(self, state: tuple) -> np.ndarray:
        return state[1]

    def eta(self, t: int) -> float:
        return self.gamma_fn(t)


UpdateRule = Union[SGDRule, ACSARule]


# ---------------------------------------------------------------------------
# Run configuration and trajectories
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """One simulated run: pattern x method over (M, K, R) with a seed."""

    algorithm: str
    M: int
    K: int
    R: int
    schedule: Schedule
    averaging: AveragingScheme = "final_iterate"
    seed: int = 0
    method: str = "sgd"
    gamma0: Optional[float] = None
    x0: Optional[np.ndarray] = None
    keep_steps: bool = False

    def __post_init__(self):
        if self.algorithm not in PATTERNS:
            raise ValueError(f"unknown algorithm pattern {self.algorithm!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if min(self.M, self.K, self.R) < 1:
            raise ValueError("M, K, R must be >= 1")

    @property
    def T(self) -> int:
        """Sequential steps per machine."""
        return self.K * self.R

    @property
    def N(self) -> int:
        """Total gradient evaluations."""
        return self.M * self.K * self.R

    def describe(self) -> dict:
        sched = self.schedule.describe() if hasattr(self.schedule, "describe") else str(self.schedule)
        avg = self.averaging if isinstance(self.averaging, str) else self.averaging.describe()
        return {
            "algorithm": self.algorithm, "method": self.method,
            "M": self.M, "K": self.K, "R": self.R,
            "schedule": sched, "averaging": avg, "seed": self.seed,
            "gamma0": self.gamma0,
            "noise_schema_version": noise.NOISE_SCHEMA_VERSION,
        }


@dataclass
class Trajectory:
    """Recorded output of one run."""

    round_iterates: np.ndarray                 # (R, d): x_bar after each round
    output_point: np.ndarray                   # (d,)
    suboptimality: float                       # F(output) - F*
    round_suboptimality: np.ndarray            # (R,)
    step_iterates: Optional[np.ndarray] = None  # (T, d) when retained
    diverged: bool = False
    diverged_eta: Optional[float] = None
    config: Optional[RunConfig] = None


@dataclass
class BatchRunResult:
    """Vectorized run over a batch of seeds (replications)."""

    round_iterates: np.ndarray                  # (B, R, d)
    output_points: np.ndarray                   # (B, d)
    suboptimality: np.ndarray                   # (B,)
    round_suboptimality: np.ndarray             # (B, R)
    step_iterates: Optional[np.ndarray]         # (B, T, d) when retained
    diverged: np.ndarray                        # (B,) bool
    diverged_eta: np.ndarray                    # (B,) float (nan when finite)


def make_update_rule(config: RunConfig) -> UpdateRule:
    if config.method == "sgd":
        return SGDRule(config.schedule)
    return ACSARule(gamma0=config.gamma0)


# ---------------------------------------------------------------------------
# Core simulation loops
# ---------------------------------------------------------------------------


def _record_mean(rule: UpdateRule, state: tuple, M: int, B: int, d: int) -> np.ndarray:
    out = np.broadcast_to(rule.output(state), (M, B, d))
    return machine_mean(out)


def _average_state(state: tuple, M: int, B: int, d: int) -> tuple:
    return tuple(machine_mean(np.broadcast_to(s, (M, B, d)))[None] for s in state)


def _local_pattern(problem, rule, M, K, R, seeds, x0, keep_steps):
    B, d = seeds.shape[0], problem.dimension
    state = rule.init(np.broadcast_to(x0, (1, B, d)).astype(np.float64))
    m_idx = np.arange(M, dtype=np.uint64)[:, None]
    rounds = np.empty((B, R, d))
    steps = np.empty((B, K * R, d)) if keep_steps else None
    for r in range(R):
        for k in range(K):
            t = r * K + k
            q = np.broadcast_to(rule.query(state, t), (M, B, d))
            u = noise.gradient_key_np(seeds[None, :], np.uint64(t), m_idx)
            z = problem.noise_from_u64(u)
            g = problem.stochastic_gradient(q, z)
            state = rule.step(state, g, t)
            if keep_steps:
                steps[:, t] = _record_mean(rule, state, M, B, d)
        state = _average_state(state, M, B, d)
        rounds[:, r] = rule.output(state)[0]
    return rounds, steps, state


def _minibatch_pattern(problem, rule, M, K, R, seeds, x0, keep_steps):
    """R rule steps; step r consumes all K*M keys of round r at the round start.

    Implemented as per-machine pseudo-updates with the machine's K-gradient
    average, then the pairwise machine mean, which is algebraically the MK
    minibatch step and coincides bit-for-bit with the local pattern at K=1.
    """
    B, d = seeds.shape[0], problem.dimension
    state = rule.init(np.broadcast_to(x0, (1, B, d)).astype(np.float64))
    m_idx = np.arange(M, dtype=np.uint64)[:, None]
    rounds = np.empty((B, R, d))
    steps = np.empty((B, R, d)) if keep_steps else None
    for r in range(R):
        q = np.broadcast_to(rule.query(state, r), (M, B, d))
        grads = np.empty((K, M, B, d))
        for k in range(K):
            t = r * K + k
            u = noise.gradient_key_np(seeds[None, :], np.uint64(t), m_idx)
            z = problem.noise_from_u64(u)
            grads[k] = problem.stochastic_gradient(q, z)
        gbar = pairwise_sum(grads, 0) / K
        state = _average_state(rule.step(state, gbar, r), M, B, d)
        rounds[:, r] = rule.output(state)[0]
        if keep_steps:
            steps[:, r] = rounds[:, r]
    return rounds, steps, state


def simulate_batch(problem, config: RunConfig, seeds, rule: Optional[UpdateRule] = None) -> BatchRunResult:
    """Run one configuration under a batch of seeds (vectorized replications)."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    rule = rule if rule is not None else make_update_rule(config)
    keep = config.keep_steps or averaging_needs_steps(config.averaging)
    x0 = np.zeros(problem.dimension) if config.x0 is None else np.asarray(config.x0, dtype=np.float64)
    if x0.shape != (problem.dimension,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({problem.dimension},)")

    with np.errstate(all="ignore"):
        if config.algorithm == "local":
            rounds, steps, state = _local_pattern(problem, rule, config.M, config.K,
                                                  config.R, seeds, x0, keep)
        elif config.algorithm == "minibatch":
            rounds, steps, state = _minibatch_pattern(problem, rule, config.M, config.K,
                                                      config.R, seeds, x0, keep)
        elif config.algorithm == "thumb_twiddling":
            # one gradient per machine per round: the K = 1 dynamics, K kept
            # only as cost bookkeeping (keys are t = r, matching local(K=1)).
            rounds, steps, state = _minibatch_pattern(problem, rule, config.M, 1,
                                                      config.R, seeds, x0, keep)
        elif config.algorithm == "serial":
            rounds, steps, state = _local_pattern(problem, rule, 1, 1,
                                                  config.K * config.R, seeds, x0, keep)
        else:  # pragma: no cover
            raise AssertionError(config.algorithm)

        output = _resolve_output(rounds, steps, state, rule, config)
        round_sub = problem.suboptimality(rounds)
        out_sub = problem.suboptimality(output)

    # divergence: first round with a non-finite coordinate poisons the rest
    finite = np.isfinite(rounds).all(axis=2)          # (B, R)
    diverged = ~finite.all(axis=1)
    first_bad = np.where(diverged, np.argmin(finite, axis=1), -1)
    n_rounds = rounds.shape[1]
    mask_after = np.arange(n_rounds)[None, :] >= first_bad[:, None]
    bad = diverged[:, None] & mask_after
    round_sub = np.where(bad, np.inf, round_sub)
    round_sub = np.where(np.isnan(round_sub), np.inf, round_sub)
    out_sub = np.where(diverged | np.isnan(out_sub), np.inf, out_sub)

    steps_per_round = config.K if config.algorithm in ("local", "serial") else 1
    bad_eta = np.full(seeds.shape[0], np.nan)
    if diverged.any():
        for b in np.nonzero(diverged)[0]:
            bad_eta[b] = rule.eta(int(first_bad[b]) * steps_per_round)

    return BatchRunResult(
        round_iterates=rounds, output_points=output, suboptimality=out_sub,
        round_suboptimality=round_sub, step_iterates=steps,
        diverged=diverged, diverged_eta=bad_eta,
    )


def _resolve_output(rounds, steps, state, rule, config) -> np.ndarray:
    scheme = config.averaging
    name = _averaging_name(scheme)
    if name == "final_iterate":
        return rule.output(state)[0]
    if name == "uniform_rounds":
        return rounds.mean(axis=1)
    if name in _STEPWISE_SCHEMES:
        # uniform over all step averages x_bar_t, t = 1..T; identical to the
        # per-machine-per-step ("machine time") average of the local iterates.
        return steps.mean(axis=1)
    if isinstance(scheme, WeightedStaged):
        w = scheme.weights(steps.shape[1])
        total = w.sum()
        if total <= 0:
            raise ValueError("weighted averaging has zero total weight")
        return np.einsum("t,btd->bd", w, steps) / total
    raise ValueError(f"unknown averaging scheme {scheme!r}")


def weighted_output(trajectory: Trajectory, scheme) -> np.ndarray:
    """Weighted average of the retained step iterates.

    ``scheme`` is a WeightedStaged instance or an explicit weight vector of
    length T.  Requires the trajectory to have retained per-step iterates.
    """
    if trajectory.step_iterates is None:
        raise ValueError("trajectory did not retain per-step iterates")
    xs = trajectory.step_iterates
    if isinstance(scheme, WeightedStaged):
        w = scheme.weights(xs.shape[0])
    else:
        w = np.asarray(scheme, dtype=np.float64)
        if w.shape != (xs.shape[0],):
            raise ValueError(f"weights have shape {w.shape}, expected ({xs.shape[0]},)")
        if (w < 0).any():
            raise ValueError("weights must be non-negative")
    total = w.sum()
    if total <= 0:
        raise ValueError("zero total weight")
    return (w[:, None] * xs).sum(axis=0) / total


# ---------------------------------------------------------------------------
# Single-run entry points
# ---------------------------------------------------------------------------


def _single(problem, config: RunConfig, rule=None) -> Trajectory:
    res = simulate_batch(problem, config, np.array([config.seed], dtype=np.uint64), rule=rule)
    sub = float(res.suboptimality[0])
    if not res.diverged[0] and sub < -1e-9:
        raise AssertionError(f"suboptimality {sub} below the -1e-9 numerical floor")
    return Trajectory(
        round_iterates=res.round_iterates[0],
        output_point=res.output_points[0],
        suboptimality=sub,
        round_suboptimality=res.round_suboptimality[0],
        step_iterates=None if res.step_iterates is None else res.step_iterates[0],
        diverged=bool(res.diverged[0]),
        diverged_eta=None if not res.diverged[0] else float(res.diverged_eta[0]),
        config=config,
    )


def run(problem, config: RunConfig, rule=None) -> Trajectory:
    """Run any configured pattern and return its trajectory."""
    return _single(problem, config, rule=rule)


def local_run(problem, config: RunConfig, rule=None) -> Trajectory:
    if config.algorithm != "local":
        raise ValueError(f"config.algorithm is {config.algorithm!r}, expected 'local'")
    return _single(problem, config, rule=rule)


def minibatch_run(problem, config: RunConfig, rule=None) -> Trajectory:
    if config.algorithm != "minibatch":
        raise ValueError(f"config.algorithm is {config.algorithm!r}, expected 'minibatch'")
    return _single(problem, config, rule=rule)


def thumb_twiddling_run(problem, config: RunConfig, rule=None) -> Trajectory:
    if config.algorithm != "thumb_twiddling":
        raise ValueError(f"config.algorithm is {config.algorithm!r}, expected 'thumb_twiddling'")
    return _single(problem, config, rule=rule)


def serial_run(problem, T: int, schedule: Schedule, averaging: AveragingScheme = "final_iterate",
               seed: int = 0, method: str = "sgd", gamma0: Optional[float] = None,
               keep_steps: bool = False, x0=None, rule=None) -> Trajectory:
    """Single-machine sequential execution for T steps."""
    if T < 1:
        raise ValueError("T must be >= 1")
    config = RunConfig(algorithm="serial", M=1, K=1, R=T, schedule=schedule,
                       averaging=averaging, seed=seed, method=method, gamma0=gamma0,
                       x0=x0, keep_steps=keep_steps)
    return _single(problem, config, rule=rule)
