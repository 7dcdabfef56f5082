"""Deterministic keyed noise streams.

Every stochastic-gradient draw in a run is derived from a 64-bit key that is
a pure function of ``(seed, step index t, machine m)``.  This makes runs
reproducible, makes machines simulatable in any order (or concurrently), and
makes the coupling identities between the local / minibatch / thumb-twiddling
execution patterns testable bit-for-bit: two algorithms that are supposed to
consume "the same" gradient sample really do see the same number.

The key derivation (``NOISE_SCHEMA_VERSION = 1``) is::

    gradient_key(seed, t, m) = mix64(mix64((seed ^ S1) + G*t) + M1*m)
    child_seed(master, i)    = mix64(mix64((master ^ S2) + G*i))
    coordinate_key(u, j)     = mix64(u + C1*(j + 1))

with all arithmetic mod 2**64 and ``mix64`` the splitmix64 finalizer.  The
same integer recipe is implemented three times -- pure Python here, numpy
vectorized here, and in C inside ``_kernels.pyx`` -- and they must stay in
lockstep; ``tests/test_noise.py`` checks this.
"""

from __future__ import annotations

import numpy as np

NOISE_SCHEMA_VERSION = 1

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_STEP_SALT = 0xA3EC647659359ACD
_REP_SALT = 0x9FB21C651E98DF25
_MACHINE_MULT = 0xC2B2AE3D27D4EB4F
_COORD_MULT = 0xD6E8FEB86659FD93


def mix64(x: int) -> int:
    """splitmix64 finalizer on a Python int (wrapping at 64 bits)."""
    x &= _M64
    x = ((x ^ (x >> 30)) * _MIX_A) & _M64
    x = ((x ^ (x >> 27)) * _MIX_B) & _M64
    return x ^ (x >> 31)


def gradient_key(seed: int, t: int, m: int) -> int:
    """Key for the gradient sample at sequential step ``t`` on machine ``m``."""
    h = mix64(((seed & _M64) ^ _STEP_SALT) + _GOLDEN * t)
    return mix64(h + _MACHINE_MULT * m)


def child_seed(master: int, i: int) -> int:
    """Seed for replication ``i`` of a Monte Carlo experiment."""
    return mix64(mix64(((master & _M64) ^ _REP_SALT) + _GOLDEN * i))


def coordinate_key(u: int, j: int) -> int:
    """Expand one draw key into a per-coordinate key (for vector noise)."""
    return mix64((u & _M64) + _COORD_MULT * (j + 1))


def rademacher_from_u64(u: int) -> float:
    """Map a key to a +/-1 sign (top bit)."""
    return 1.0 - 2.0 * ((u >> 63) & 1)


def uniform_from_u64(u: int) -> float:
    """Map a key to a uniform in the open interval (0, 1), 53-bit resolution."""
    return ((u >> 11) + 0.5) * 2.0**-53


# ---------------------------------------------------------------------------
# numpy-vectorized versions; all accept/return uint64 ndarrays and broadcast.
# ---------------------------------------------------------------------------

_U = np.uint64
_GOLDEN_U = _U(_GOLDEN)
_MIX_A_U = _U(_MIX_A)
_MIX_B_U = _U(_MIX_B)
_STEP_SALT_U = _U(_STEP_SALT)
_REP_SALT_U = _U(_REP_SALT)
_MACHINE_MULT_U = _U(_MACHINE_MULT)
_COORD_MULT_U = _U(_COORD_MULT)


def _as_u64(x) -> np.ndarray:
    return np.asarray(x).astype(np.uint64, copy=False)


def mix64_np(x) -> np.ndarray:
    x = _as_u64(x)
    with np.errstate(over="ignore"):
        x = (x ^ (x >> _U(30))) * _MIX_A_U
        x = (x ^ (x >> _U(27))) * _MIX_B_U
        return x ^ (x >> _U(31))


def gradient_key_np(seed, t, m) -> np.ndarray:
    seed, t, m = _as_u64(seed), _as_u64(t), _as_u64(m)
    with np.errstate(over="ignore"):
        h = mix64_np((seed ^ _STEP_SALT_U) + _GOLDEN_U * t)
        return mix64_np(h + _MACHINE_MULT_U * m)


def child_seed_np(master, i) -> np.ndarray:
    master, i = _as_u64(master), _as_u64(i)
    with np.errstate(over="ignore"):
        return mix64_np(mix64_np((master ^ _REP_SALT_U) + _GOLDEN_U * i))


def coordinate_key_np(u, j) -> np.ndarray:
    u, j = _as_u64(u), _as_u64(j)
    with np.errstate(over="ignore"):
        return mix64_np(u + _COORD_MULT_U * (j + _U(1)))


def rademacher_from_u64_np(u) -> np.ndarray:
    u = _as_u64(u)
    return 1.0 - 2.0 * (u >> _U(63)).astype(np.float64)


def uniform_from_u64_np(u) -> np.ndarray:
    u = _as_u64(u)
    return ((u >> _U(11)).astype(np.float64) + 0.5) * 2.0**-53


def index_from_u64_np(u, n: int) -> np.ndarray:
    """Map keys to sample indices in [0, n) by modular reduction."""
    u = _as_u64(u)
    return (u % _U(n)).astype(np.int64)
