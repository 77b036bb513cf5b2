"""
Shared mathematical primitives: entropy, Poisson weights, fiber loss,
the repeaterless bound and the modified Bessel function I0.
"""
import math

from models import Transmittances
from schemas import ChannelConfig, ParameterVector, Strategy

# Series truncation: stop once the next term is below this share of the sum
BESSEL_SERIES_TOLERANCE = 1e-16
BESSEL_MAX_TERMS = 500


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2(1-x), with h(0) = h(1) = 0"""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy is defined on [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def poisson_coeff(m: int, k: float) -> float:
    """Probability that a coherent pulse of mean k carries m photons"""
    if m < 0 or k < 0:
        raise ValueError(f"need m >= 0 and k >= 0, got m={m}, k={k}")
    if k == 0.0:
        return 1.0 if m == 0 else 0.0
    return math.exp(m * math.log(k) - k - math.lgamma(m + 1))


def _arm_transmittance(length_km: float, alpha: float, eta_d: float) -> float:
    return eta_d * 10.0 ** (-alpha * length_km / 10.0)


def transmittance(cfg: ChannelConfig) -> Transmittances:
    """Per-arm transmittance; extra attenuation stretches the short arm to L_B"""
    short_arm = cfg.L_B if cfg.strategy == Strategy.EXTRA_ATTENUATION else cfg.L_A
    return Transmittances(
        eta_a=_arm_transmittance(short_arm, cfg.alpha, cfg.eta_d),
        eta_b=_arm_transmittance(cfg.L_B, cfg.alpha, cfg.eta_d),
    )


def end_to_end_transmittance(cfg: ChannelConfig) -> float:
    """Transmittance of a direct Alice-Bob fiber of length L_A + L_B"""
    return _arm_transmittance(cfg.total_length, cfg.alpha, cfg.eta_d)


def plob_bound(eta: float) -> float:
    """Repeaterless key-rate bound -log2(1 - eta) in bits per pulse"""
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"PLOB bound needs 0 <= eta < 1, got {eta}")
    return -math.log1p(-eta) / math.log(2.0)


def bessel_i0(x: float) -> float:
    """
    Modified Bessel function of the first kind, order zero, by power series

    I0(x) = sum_k ((x/2)^k / k!)^2. Arguments here stay below ~2, where the
    series converges in a handful of terms.
    """
    if x < 0:
        raise ValueError(f"bessel_i0 expects x >= 0, got {x}")
    quarter_sq = 0.25 * x * x
    term = 1.0
    total = 1.0
    for k in range(1, BESSEL_MAX_TERMS):
        term *= quarter_sq / (k * k)
        if term < BESSEL_SERIES_TOLERANCE * total:
            break
        total += term
    return total


def intensity_ratios(g: ParameterVector, t: Transmittances) -> tuple:
    """
    Received-intensity balance (eta_a mu_a / eta_b mu_b, eta_a nu_a / eta_b nu_b)

    NaN when Bob's arm transmits nothing.
    """
    if t.eta_b == 0.0:
        return (math.nan, math.nan)
    return (
        (t.eta_a * g.mu_a) / (t.eta_b * g.mu_b),
        (t.eta_a * g.nu_a) / (t.eta_b * g.nu_b),
    )
