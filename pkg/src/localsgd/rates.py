"""Closed-form worst-case error expressions.

Every expression the simulated algorithms are compared against, evaluable at
arbitrary (H, lambda, B, sigma, M, K, R) with all universal constants set to
one and logarithmic factors kept as published.  Expressions are returned as
named terms so the dominant term is inspectable; min-of-branches bounds
report the terms of the selected branch.

``convexity`` is "general" (lambda ignored / allowed 0) or "strongly_convex"
(requires lambda > 0).  M may be ``math.inf`` to evaluate large-fleet limits.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

GENERAL = "general"
STRONGLY_CONVEX = "strongly_convex"

RATE_NAMES = (
    "minibatch",
    "thumb_twiddling",
    "stich2018",
    "stich2019",
    "khaled",
    "local_upper",
    "local_lower",
    "local_quadratic",
    "local_acsa_quadratic",
    "serial",
)


@dataclass(frozen=True)
class RateParams:
    H: float
    lambda_: float
    B: float
    sigma: float
    M: float
    K: float
    R: float

    def __post_init__(self):
        if self.H <= 0 or self.B <= 0 or self.sigma < 0 or self.lambda_ < 0:
            raise ValueError("need H > 0, B > 0, sigma >= 0, lambda >= 0")
        if self.K < 1 or self.R < 1 or self.M < 1:
            raise ValueError("need M, K, R >= 1")


def _stat_term(p: RateParams) -> float:
    """The statistical term sigma B / sqrt(MKR), shared by several bounds."""
    return p.sigma * p.B / math.sqrt(p.M * p.K * p.R)


def _safe_div(num: float, den: float) -> float:
    if den == 0.0:
        return math.inf if num > 0 else 0.0
    return num / den


# --- general convex ---------------------------------------------------------


def _minibatch_g(p):
    return {"optimization": p.H * p.B**2 / p.R, "statistical": _stat_term(p)}


def _thumb_g(p):
    return {"optimization": p.H * p.B**2 / p.R,
            "statistical": p.sigma * p.B / math.sqrt(p.M * p.R)}


def _stich2018_g(p):
    return {
        "round_term": p.H * p.B**2 / p.R ** (2.0 / 3.0),
        "kr_term": p.H * p.B**2 / (p.K * p.R) ** 0.6,
        "statistical": _stat_term(p),
    }


def _stich2019_g(p):
    return {"optimization": p.H * p.B**2 * p.M / p.R, "statistical": _stat_term(p)}


def _khaled_g(p):
    if p.M > p.K * p.R:
        warnings.warn("khaled bound is stated only for M <= KR", stacklevel=4)
    return {
        "noise_term": _safe_div(p.sigma**2 * p.M, p.H * p.R),
        "statistical": (p.H**2 * p.B**2 + p.sigma**2) / (p.H * math.sqrt(p.M * p.K * p.R)),
    }


def _local_upper_g(p):
    parallel = {
        "optimization": p.H * p.B**2 / (p.K * p.R),
        "statistical": _stat_term(p),
        "drift": (p.H * p.sigma**2 * p.B**4) ** (1.0 / 3.0) / (p.K ** (1.0 / 3.0) * p.R ** (2.0 / 3.0)),
    }
    single = {
        "optimization": p.H * p.B**2 / (p.K * p.R),
        "serial_statistical": p.sigma * p.B / math.sqrt(p.K * p.R),
    }
    return _min_branch({"parallel": parallel, "single_machine": single})


def _local_lower_g(p):
    lam = p.lambda_
    opt_candidates = {
        "drift": (p.H ** (1.0 / 3.0) * p.sigma ** (2.0 / 3.0) * p.B ** (4.0 / 3.0)
                  / (p.K * p.R) ** (2.0 / 3.0)),
        "strongly_convex_drift": _safe_div(p.H * p.sigma**2, lam**2 * p.K**2 * p.R**2),
        "trivial": p.H * p.B**2,
    }
    stat_candidates = {
        "statistical": _stat_term(p),
        "strongly_convex_statistical": _safe_div(p.sigma**2, lam * p.M * p.K * p.R),
    }
    o_name = min(opt_candidates, key=opt_candidates.get)
    s_name = min(stat_candidates, key=stat_candidates.get)
    return {o_name: opt_candidates[o_name], s_name: stat_candidates[s_name]}


def _local_quadratic_g(p):
    return {"optimization": p.H * p.B**2 / (p.K * p.R), "statistical": _stat_term(p)}


def _local_acsa_quadratic_g(p):
    return {"optimization": p.H * p.B**2 / (p.K * p.R) ** 2, "statistical": _stat_term(p)}


def _serial_g(p):
    return {"optimization": p.H * p.B**2 / (p.K * p.R),
            "statistical": p.sigma * p.B / math.sqrt(p.K * p.R)}


# --- strongly convex --------------------------------------------------------


def _minibatch_sc(p):
    return {
        "optimization": p.H * p.B**2 * math.exp(-p.lambda_ * p.R / (4.0 * p.H)),
        "statistical": p.sigma**2 / (p.lambda_ * p.M * p.K * p.R),
    }


def _thumb_sc(p):
    return {
        "optimization": p.H * p.B**2 * math.exp(-p.lambda_ * p.R / (4.0 * p.H)),
        "statistical": p.sigma**2 / (p.lambda_ * p.M * p.R),
    }


def _stich2018_sc(p):
    lam = p.lambda_
    hb = p.H**2 * p.B**2 + p.sigma**2
    return {
        "statistical": p.sigma**2 / (lam * p.M * p.K * p.R),
        "kr2_term": p.H * p.sigma**2 / (lam**2 * p.M * p.K**2 * p.R**2),
        "r2_term": p.H * hb / (lam**2 * p.R**2),
        "k3r3_term": p.H**3 * hb / (lam**4 * p.K**3 * p.R**3),
        "r3_term": hb / (lam * p.R**3),
    }


def _stich2019_sc(p):
    return {
        "optimization": p.H * p.K * p.M * p.B**2 * math.exp(-p.lambda_ * p.R / (10.0 * p.H * p.M)),
        "statistical": p.sigma**2 / (p.lambda_ * p.M * p.K * p.R),
    }


def _khaled_sc(p):
    lam = p.lambda_
    if p.M > p.K * p.R:
        warnings.warn("khaled bound is stated only for M <= KR", stacklevel=4)
    return {
        "optimization": p.H * p.B**2 / (p.K**2 * p.R**2),
        "statistical": p.H * p.sigma**2 / (lam**2 * p.M * p.K * p.R),
        "kr2_term": p.H**2 * p.sigma**2 / (lam**3 * p.K * p.R**2),
    }


def _local_upper_sc(p):
    lam = p.lambda_
    decay = p.H * p.B**2 * math.exp(-lam * p.K * p.R / (4.0 * p.H))
    parallel = {
        "optimization": decay,
        "statistical": p.sigma**2 / (lam * p.M * p.K * p.R),
        "drift": (p.H * p.sigma**2 * math.log(9.0 + lam * p.K * p.R / p.H)
                  / (lam**2 * p.K * p.R**2)),
    }
    single = {
        "optimization": decay,
        "serial_statistical": p.sigma**2 / (lam * p.K * p.R),
    }
    return _min_branch({"parallel": parallel, "single_machine": single})


def _serial_sc(p):
    return {
        "optimization": p.H * p.B**2 * math.exp(-p.lambda_ * p.K * p.R / (4.0 * p.H)),
        "statistical": p.sigma**2 / (p.lambda_ * p.K * p.R),
    }


def _local_quadratic_sc(p):
    # serial strongly convex rate at KR steps with variance reduced by M
    return {
        "optimization": p.H * p.B**2 * math.exp(-p.lambda_ * p.K * p.R / (4.0 * p.H)),
        "statistical": p.sigma**2 / (p.lambda_ * p.M * p.K * p.R),
    }


def _min_branch(branches: Dict[str, Dict[str, float]]) -> Dict[str, float]:
    totals = {name: sum(terms.values()) for name, terms in branches.items()}
    best = min(totals, key=totals.get)
    return branches[best]


_TABLE: Dict[Tuple[str, str], Callable[[RateParams], Dict[str, float]]] = {
    ("minibatch", GENERAL): _minibatch_g,
    ("thumb_twiddling", GENERAL): _thumb_g,
    ("stich2018", GENERAL): _stich2018_g,
    ("stich2019", GENERAL): _stich2019_g,
    ("khaled", GENERAL): _khaled_g,
    ("local_upper", GENERAL): _local_upper_g,
    ("local_lower", GENERAL): _local_lower_g,
    ("local_quadratic", GENERAL): _local_quadratic_g,
    ("local_acsa_quadratic", GENERAL): _local_acsa_quadratic_g,
    ("serial", GENERAL): _serial_g,
    ("minibatch", STRONGLY_CONVEX): _minibatch_sc,
    ("thumb_twiddling", STRONGLY_CONVEX): _thumb_sc,
    ("stich2018", STRONGLY_CONVEX): _stich2018_sc,
    ("stich2019", STRONGLY_CONVEX): _stich2019_sc,
    ("khaled", STRONGLY_CONVEX): _khaled_sc,
    ("local_upper", STRONGLY_CONVEX): _local_upper_sc,
    ("local_lower", STRONGLY_CONVEX): _local_lower_g,  # same expression; lambda branches activate
    ("local_quadratic", STRONGLY_CONVEX): _local_quadratic_sc,
    ("serial", STRONGLY_CONVEX): _serial_sc,
}

# Upper bounds whose value is non-increasing as machines are added; the
# published stich2019/khaled bounds grow with M by design, and local_lower is
# a lower bound, so they are excluded from the M-monotonicity property.
M_MONOTONE_UPPER_BOUNDS = (
    "minibatch", "thumb_twiddling", "stich2018", "local_upper",
    "local_quadratic", "local_acsa_quadratic", "serial",
)
R_MONOTONE_BOUNDS = tuple(n for n in RATE_NAMES if n != "local_lower")


def terms(name: str, convexity: str, H: float, lambda_: float, B: float, sigma: float,
          M: float, K: float, R: float) -> Dict[str, float]:
    """Evaluate one rate expression and return its named terms."""
    if name not in RATE_NAMES:
        raise ValueError(f"unknown rate name {name!r}")
    if convexity not in (GENERAL, STRONGLY_CONVEX):
        raise ValueError(f"unknown convexity {convexity!r}")
    key = (name, convexity)
    if key not in _TABLE:
        raise ValueError(f"no {convexity} rate for {name!r} in the model")
    if convexity == STRONGLY_CONVEX and lambda_ <= 0:
        raise ValueError("strongly convex rates require lambda > 0")
    p = RateParams(H=H, lambda_=lambda_, B=B, sigma=sigma, M=M, K=K, R=R)
    return _TABLE[key](p)


def rate(name: str, convexity: str, H: float, lambda_: float, B: float, sigma: float,
         M: float, K: float, R: float) -> float:
    """Value of one rate expression (sum of its terms, constants set to 1)."""
    return sum(terms(name, convexity, H, lambda_, B, sigma, M, K, R).values())


def dominant_term(name: str, convexity: str, H: float, lambda_: float, B: float,
                  sigma: float, M: float, K: float, R: float) -> str:
    """Name of the largest term at these parameters (Table 1's bolded entry)."""
    t = terms(name, convexity, H, lambda_, B, sigma, M, K, R)
    return max(t, key=t.get)


def regime_compare(name_a: str, name_b: str, convexity: str, H: float, lambda_: float,
                   B: float, sigma: float, M: float, K: float, R: float):
    """Compare two expressions; returns (smaller_name, ratio_a_over_b)."""
    va = rate(name_a, convexity, H, lambda_, B, sigma, M, K, R)
    vb = rate(name_b, convexity, H, lambda_, B, sigma, M, K, R)
    ratio = _safe_div(va, vb) if va != vb else 1.0
    return (name_a if va < vb else name_b), ratio
