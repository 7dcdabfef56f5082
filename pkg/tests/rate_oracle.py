"""Independent re-derivation of the closed-form rate expressions.

Written directly from the published bounds, with no
code shared with localsgd.rates; used to regression-check the library's
evaluator term by term.
"""

import math


def mb_general(H, lam, B, s, M, K, R):
    return H * B * B / R + s * B * (M * K * R) ** -0.5


def tt_general(H, lam, B, s, M, K, R):
    return H * B * B / R + s * B * (M * R) ** -0.5


def stich2018_general(H, lam, B, s, M, K, R):
    return (H * B * B * R ** (-2 / 3)
            + H * B * B * (K * R) ** (-3 / 5)
            + s * B * (M * K * R) ** -0.5)


def stich2019_general(H, lam, B, s, M, K, R):
    return H * B * B * M / R + s * B * (M * K * R) ** -0.5


def khaled_general(H, lam, B, s, M, K, R):
    return s * s * M / (H * R) + (H * H * B * B + s * s) / (H * (M * K * R) ** 0.5)


def local_upper_general(H, lam, B, s, M, K, R):
    branch1 = (H * B * B / (K * R)
               + s * B * (M * K * R) ** -0.5
               + (H * s * s * B ** 4) ** (1 / 3) * K ** (-1 / 3) * R ** (-2 / 3))
    branch2 = H * B * B / (K * R) + s * B * (K * R) ** -0.5
    return min(branch1, branch2)


def local_lower(H, lam, B, s, M, K, R):
    first = [(H ** (1 / 3)) * (s ** (2 / 3)) * (B ** (4 / 3)) * (K * R) ** (-2 / 3),
             H * B * B]
    second = [s * B * (M * K * R) ** -0.5]
    if lam > 0:
        first.append(H * s * s / (lam * lam * K * K * R * R))
        second.append(s * s / (lam * M * K * R))
    return min(first) + min(second)


def local_quadratic_general(H, lam, B, s, M, K, R):
    return H * B * B / (K * R) + s * B * (M * K * R) ** -0.5


def local_acsa_quadratic_general(H, lam, B, s, M, K, R):
    return H * B * B / (K * R) ** 2 + s * B * (M * K * R) ** -0.5


def serial_general(H, lam, B, s, M, K, R):
    return H * B * B / (K * R) + s * B * (K * R) ** -0.5


def mb_sc(H, lam, B, s, M, K, R):
    return H * B * B * math.exp(-lam * R / (4 * H)) + s * s / (lam * M * K * R)


def tt_sc(H, lam, B, s, M, K, R):
    return H * B * B * math.exp(-lam * R / (4 * H)) + s * s / (lam * M * R)


def stich2018_sc(H, lam, B, s, M, K, R):
    hb = H * H * B * B + s * s
    return (s * s / (lam * M * K * R)
            + H * s * s / (lam * lam * M * K * K * R * R)
            + H * hb / (lam * lam * R * R)
            + H ** 3 * hb / (lam ** 4 * K ** 3 * R ** 3)
            + hb / (lam * R ** 3))


def stich2019_sc(H, lam, B, s, M, K, R):
    return (H * K * M * B * B * math.exp(-lam * R / (10 * H * M))
            + s * s / (lam * M * K * R))


def khaled_sc(H, lam, B, s, M, K, R):
    return (H * B * B / (K * K * R * R)
            + H * s * s / (lam * lam * M * K * R)
            + H * H * s * s / (lam ** 3 * K * R * R))


def local_upper_sc(H, lam, B, s, M, K, R):
    decay = H * B * B * math.exp(-lam * K * R / (4 * H))
    branch1 = (decay + s * s / (lam * M * K * R)
               + H * s * s * math.log(9 + lam * K * R / H) / (lam * lam * K * R * R))
    branch2 = decay + s * s / (lam * K * R)
    return min(branch1, branch2)


def serial_sc(H, lam, B, s, M, K, R):
    return H * B * B * math.exp(-lam * K * R / (4 * H)) + s * s / (lam * K * R)


def local_quadratic_sc(H, lam, B, s, M, K, R):
    return H * B * B * math.exp(-lam * K * R / (4 * H)) + s * s / (lam * M * K * R)


GENERAL_ORACLE = {
    "minibatch": mb_general,
    "thumb_twiddling": tt_general,
    "stich2018": stich2018_general,
    "stich2019": stich2019_general,
    "khaled": khaled_general,
    "local_upper": local_upper_general,
    "local_lower": local_lower,
    "local_quadratic": local_quadratic_general,
    "local_acsa_quadratic": local_acsa_quadratic_general,
    "serial": serial_general,
}

STRONGLY_CONVEX_ORACLE = {
    "minibatch": mb_sc,
    "thumb_twiddling": tt_sc,
    "stich2018": stich2018_sc,
    "stich2019": stich2019_sc,
    "khaled": khaled_sc,
    "local_upper": local_upper_sc,
    "local_lower": local_lower,
    "local_quadratic": local_quadratic_sc,
    "serial": serial_sc,
}
