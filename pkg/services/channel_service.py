"""
Analytic expected-statistics model of the asymmetric mode-pairing experiment.

Every round both senders emit a phase-randomised coherent state; the relay
interferes them and an effective detection is exactly one click. Clicks are
paired with the next click within ``l`` rounds and each pair is labelled by
the summed intensities of both parties. This module returns the expected
counts of every label without simulating rounds.
"""
import math
from typing import Dict, List, Tuple

from models import ObservedStats, Tally, Transmittances, Z_COMBINATIONS, X_COMBINATIONS
from schemas import ChannelConfig, ParameterVector, ProtocolConfig
from services.core import bessel_i0, transmittance
from utils.error_handlers import DegenerateChannelError
from utils.logging_config import get_logger

logger = get_logger(__name__)

LEVELS = ("mu", "nu", "o")

# Slot assignments (round i, round j) of one party producing an aggregate label
Z_SLOTS: Dict[str, List[Tuple[str, str]]] = {
    "mu": [("mu", "o"), ("o", "mu")],
    "nu": [("nu", "o"), ("o", "nu")],
    "o": [("o", "o")],
}
X_SLOTS: Dict[str, List[Tuple[str, str]]] = {
    "2mu": [("mu", "mu")],
    "2nu": [("nu", "nu")],
    "o": [("o", "o")],
}

VACUUM_Z = {("mu", "o"), ("o", "mu"), ("nu", "o"), ("o", "nu"), ("o", "o")}
INTERFERING_X = {("2mu", "2mu"), ("2mu", "2nu"), ("2nu", "2mu"), ("2nu", "2nu")}


def _y_and_x(k_a: float, k_b: float, t: Transmittances, p_d: float) -> Tuple[float, float]:
    y = (1.0 - p_d) * math.exp(-(k_a * t.eta_a + k_b * t.eta_b) / 2.0)
    x = math.sqrt(t.eta_a * k_a * t.eta_b * k_b)
    return y, x


def response_prob(k_a: float, k_b: float, t: Transmittances, p_d: float) -> float:
    """Single-round probability of exactly one click, phase averaged"""
    y, x = _y_and_x(k_a, k_b, t, p_d)
    q = 2.0 * y * (bessel_i0(x) - y)
    return min(max(q, 0.0), 1.0)


def _level_maps(g: ParameterVector) -> Tuple[Dict[str, float], Dict[str, float], Dict[str, float], Dict[str, float]]:
    k_a = dict(zip(LEVELS, g.intensities("a")))
    k_b = dict(zip(LEVELS, g.intensities("b")))
    p_a = dict(zip(LEVELS, g.probabilities("a")))
    p_b = dict(zip(LEVELS, g.probabilities("b")))
    return k_a, k_b, p_a, p_b


def response_table(g: ParameterVector, t: Transmittances, p_d: float) -> Dict[Tuple[str, str], float]:
    """q for every (Alice level, Bob level) of the 3x3 intensity grid"""
    k_a, k_b, _, _ = _level_maps(g)
    return {(a, b): response_prob(k_a[a], k_b[b], t, p_d) for a in LEVELS for b in LEVELS}


def avg_response_prob(g: ParameterVector, t: Transmittances, p_d: float) -> float:
    """Average single-round effective-detection probability"""
    _, _, p_a, p_b = _level_maps(g)
    q = response_table(g, t, p_d)
    return sum(p_a[a] * p_b[b] * q[(a, b)] for a in LEVELS for b in LEVELS)


def pairs_per_round(p: float, l: int) -> float:
    """
    Expected number of pairs formed per round

    Rounds per pair are 1/p (wait for a click) plus 1/(p s), s being the
    chance that the next click lands within ``l`` rounds; the rate is the
    reciprocal.
    """
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 0.5
    within = -math.expm1(l * math.log1p(-p))
    return 1.0 / (1.0 / (p * within) + 1.0 / p)


def _misaligned(n: float, t0: float, e_d: float) -> float:
    return (1.0 - e_d) * t0 + e_d * (n - t0)


def _z_tally(combo, pref, p_a, p_b, q, e_d) -> Tally:
    n = t0 = norm = 0.0
    for a_i, a_j in Z_SLOTS[combo[0]]:
        for b_i, b_j in Z_SLOTS[combo[1]]:
            weight = p_a[a_i] * p_a[a_j] * p_b[b_i] * p_b[b_j]
            both = weight * q[(a_i, b_i)] * q[(a_j, b_j)]
            n += both
            norm += weight
            # Both senders empty in the same round: the bits disagree
            if (a_i == "o" and b_i == "o") or (a_j == "o" and b_j == "o"):
                t0 += both
    n, t0, norm = pref * n, pref * t0, pref * norm
    if combo in VACUUM_Z:
        t0 = n / 2.0
    return Tally(n=n, t=_misaligned(n, t0, e_d), N=norm)


def _x_tally(combo, pref, p_a, p_b, q, k_a, k_b, t, p_d, half_width, e_d) -> Tally:
    (a_i, a_j), = X_SLOTS[combo[0]]
    (b_i, b_j), = X_SLOTS[combo[1]]
    weight = p_a[a_i] * p_a[a_j] * p_b[b_i] * p_b[b_j]
    if combo in INTERFERING_X:
        sifting = 2.0 * half_width / math.pi
        y, x = _y_and_x(k_a[a_i], k_b[b_i], t, p_d)
        i0 = bessel_i0(x)
        i0_minus = bessel_i0(x * math.sqrt(2.0 - 2.0 * math.cos(half_width)))
        i0_plus = bessel_i0(x * math.sqrt(2.0 + 2.0 * math.cos(half_width)))
        gain = 4 * y**4 - 8 * y**3 * i0 + 2 * y**2 * (i0_minus + i0_plus)
        error = 2 * y**4 - 4 * y**3 * i0 + 2 * y**2 * i0_minus
        n = pref * sifting * weight * max(gain, 0.0)
        t0 = pref * sifting * weight * min(max(error, 0.0), max(gain, 0.0))
        norm = pref * sifting * weight
    else:
        n = pref * weight * q[(a_i, b_i)] * q[(a_j, b_j)]
        t0 = n / 2.0
        norm = pref * weight
    return Tally(n=n, t=_misaligned(n, t0, e_d), N=norm)


def expected_statistics(g: ParameterVector, cfg: ChannelConfig, proto: ProtocolConfig) -> ObservedStats:
    """
    Expected counts, error counts and pair normalizers for every combination

    Raises:
        DegenerateChannelError: an arm transmits nothing or the average response probability is zero
    """
    t = transmittance(cfg)
    if t.degenerate:
        raise DegenerateChannelError(
            "degenerate channel: transmittance underflows to zero",
            details={"L_A": cfg.L_A, "L_B": cfg.L_B},
        )
    p = avg_response_prob(g, t, cfg.p_d)
    if p <= 0.0 or not math.isfinite(p):
        raise DegenerateChannelError(
            "degenerate channel: average response probability is zero",
            details={"L_A": cfg.L_A, "L_B": cfg.L_B},
        )

    r_p = pairs_per_round(p, proto.l)
    pref = proto.N * r_p / (p * p)
    k_a, k_b, p_a, p_b = _level_maps(g)
    q = response_table(g, t, cfg.p_d)

    stats = ObservedStats(total_pairs=proto.N * r_p, rounds=proto.N)
    for combo in Z_COMBINATIONS:
        stats.z[combo] = _z_tally(combo, pref, p_a, p_b, q, proto.e_d_Z)
    for combo in X_COMBINATIONS:
        stats.x[combo] = _x_tally(
            combo, pref, p_a, p_b, q, k_a, k_b, t, cfg.p_d, proto.phase_half_width, proto.e_d_X
        )
    return stats
