"""
Finite-key decoy-state estimator chain for the (mu_a, mu_b) Z-pair key.

Expected statistics are treated as observed counts; each count enters the
estimators through the Chernoff bound on the side that keeps the estimate
conservative. Any abort or degenerate signal turns into R = 0 with the
reason recorded on the breakdown.
"""
import math
from typing import List

from models import KeyRateBreakdown, ObservedStats
from schemas import ChannelConfig, ParameterVector, ProtocolConfig, SecurityBudget
from services.channel_service import expected_statistics
from services.core import binary_entropy, poisson_coeff
from services.stats_service import gamma_sampling, lower_for, upper_for
from utils.error_handlers import (
    EstimatorDegenerateError,
    KeyRateToolkitError,
    ProtocolAbortError,
)
from utils.logging_config import get_logger

logger = get_logger(__name__)

# Aggregate labels whose counts the estimators read
CONSUMED_X = [("2nu", "2nu"), ("o", "o"), ("o", "2nu"), ("2nu", "o")]


def _ratio(count: float, normalizer: float) -> float:
    if normalizer <= 0:
        raise EstimatorDegenerateError("estimator degenerate: empty pair normalizer")
    return count / normalizer


def estimate_y11(stats: ObservedStats, budget: SecurityBudget, g: ParameterVector) -> float:
    """Lower bound on the yield of Z-pairs carrying one photon from each sender"""
    a = poisson_coeff
    mu_a, nu_a, mu_b, nu_b = g.mu_a, g.nu_a, g.mu_b, g.nu_b
    z = stats.z

    def low(combo):
        return _ratio(lower_for(z[combo].n, budget), z[combo].N)

    def high(combo):
        return _ratio(upper_for(z[combo].n, budget), z[combo].N)

    signal_weight = a(1, mu_a) * a(2, mu_b)
    decoy_weight = a(1, nu_a) * a(2, nu_b)

    f_lower = (
        signal_weight * low(("nu", "nu"))
        + decoy_weight * a(0, mu_a) * low(("o", "mu"))
        + decoy_weight * a(0, mu_b) * low(("mu", "o"))
        + (signal_weight * a(0, nu_a) * a(0, nu_b) - decoy_weight * a(0, mu_a) * a(0, mu_b)) * low(("o", "o"))
    )
    f_upper = (
        decoy_weight * high(("mu", "mu"))
        + signal_weight * a(0, nu_a) * high(("o", "nu"))
        + signal_weight * a(0, nu_b) * high(("nu", "o"))
    )

    denominator = a(1, nu_a) * a(1, mu_a) * (a(1, nu_b) * a(2, mu_b) - a(1, mu_b) * a(2, nu_b))
    if denominator <= 0:
        raise EstimatorDegenerateError("estimator degenerate: decoy intensities not below signal intensities")

    y11 = min(max((f_lower - f_upper) / denominator, 0.0), 1.0)
    if y11 == 0.0:
        raise EstimatorDegenerateError("estimator degenerate: single-photon yield bound is zero")
    return y11


def compute_M11_Z(y11: float, stats: ObservedStats, g: ParameterVector) -> float:
    """Single-photon pair events among the (mu_a, mu_b) Z-pairs"""
    return stats.z[("mu", "mu")].N * g.mu_a * g.mu_b * math.exp(-g.mu_a - g.mu_b) * y11


def compute_M11_X(y11: float, stats: ObservedStats, g: ParameterVector) -> float:
    """Single-photon pair events among the (2nu_a, 2nu_b) X-pairs, reusing the Z yield"""
    return (stats.x[("2nu", "2nu")].N
            * poisson_coeff(1, 2 * g.nu_a) * poisson_coeff(1, 2 * g.nu_b) * y11)


def estimate_e11_bit(stats: ObservedStats, y11: float, budget: SecurityBudget, g: ParameterVector) -> float:
    """
    Upper bound on the single-photon bit error rate of X-pairs

    Raises:
        ProtocolAbortError: the bound exceeds 0.5
    """
    if y11 <= 0:
        raise EstimatorDegenerateError("estimator degenerate: bit error rate needs a positive yield")
    x = stats.x
    vac_a = poisson_coeff(0, 2 * g.nu_a)
    vac_b = poisson_coeff(0, 2 * g.nu_b)

    t_upper = (
        _ratio(upper_for(x[("2nu", "2nu")].t, budget), x[("2nu", "2nu")].N)
        + vac_a * vac_b * _ratio(upper_for(x[("o", "o")].t, budget), x[("o", "o")].N)
    )
    t_lower = (
        vac_a * _ratio(lower_for(x[("o", "2nu")].t, budget), x[("o", "2nu")].N)
        + vac_b * _ratio(lower_for(x[("2nu", "o")].t, budget), x[("2nu", "o")].N)
    )
    e11 = (t_upper - t_lower) / (poisson_coeff(1, 2 * g.nu_a) * poisson_coeff(1, 2 * g.nu_b) * y11)
    if e11 > 0.5:
        raise ProtocolAbortError(f"abort: single-photon bit error bound {e11:.4g} exceeds 0.5")
    return min(max(e11, 0.0), 0.5)


def phase_error_rate(e11_bit: float, M11_X: float, M11_Z: float, xi: float, finite_size: bool = True) -> float:
    """
    Phase error rate of Z-pair single-photon events, capped at 0.5

    Raises:
        ProtocolAbortError: the cap is reached
    """
    if M11_X <= 0 or M11_Z <= 0:
        raise EstimatorDegenerateError("estimator degenerate: no single-photon pair events")
    correction = gamma_sampling(xi, e11_bit, M11_X, M11_Z) if finite_size else 0.0
    e_ph = min(e11_bit + correction, 0.5)
    if e_ph >= 0.5:
        raise ProtocolAbortError("abort: phase error rate reaches 0.5")
    return e_ph


def error_correction_leakage(M_mumu: float, E_mumu: float, f: float) -> float:
    """Bits revealed during reconciliation of the (mu_a, mu_b) Z-pairs"""
    return f * M_mumu * binary_entropy(E_mumu)


def key_length(M11_Z: float, e11_Z_ph: float, lambda_EC: float, proto: ProtocolConfig) -> float:
    """Extractable secure key length in bits, floored at zero"""
    budget = proto.budget
    length = (
        M11_Z * (1.0 - binary_entropy(e11_Z_ph))
        - lambda_EC
        - math.log2(2.0 / budget.eps_cor)
        - 2.0 * math.log2(1.0 / budget.eps_sec)
    )
    return max(length, 0.0)


def check_counts(stats: ObservedStats) -> List[str]:
    """
    Physicality of the consumed counts: every count positive, every error
    count non-negative. Vacuum-vacuum pairs only click on dark counts and may
    legitimately be empty.
    """
    problems = list(stats.violations())
    entries = [("Z", combo, tally) for combo, tally in stats.z.items()]
    entries += [("X", combo, stats.x[combo]) for combo in CONSUMED_X]
    for basis, combo, tally in entries:
        if combo == ("o", "o"):
            continue
        if not tally.n > 0:
            problems.append(f"{basis}({combo[0]},{combo[1]}) count is not positive")
    return problems


def check_rates(breakdown: KeyRateBreakdown, gain_mumu: float) -> List[str]:
    """Physicality of the derived gains and error rates"""
    problems = []
    if not 0 < breakdown.y11_Z < 1:
        problems.append("single-photon yield outside (0, 1)")
    if not 0 < gain_mumu < 1:
        problems.append("(mu, mu) gain outside (0, 1)")
    if not 0 < breakdown.e11_Z_ph < 0.5:
        problems.append("phase error rate outside (0, 0.5)")
    if not 0 < breakdown.E_mumu < 0.5:
        problems.append("(mu, mu) bit error rate outside (0, 0.5)")
    return problems


def check_physicality(stats: ObservedStats, breakdown: KeyRateBreakdown) -> List[str]:
    """All violated physicality conditions, counts first"""
    signal = stats.z[("mu", "mu")]
    gain = signal.n / signal.N if signal.N > 0 else 0.0
    return check_counts(stats) + check_rates(breakdown, gain)


def secure_key_rate(g: ParameterVector, cfg: ChannelConfig, proto: ProtocolConfig) -> KeyRateBreakdown:
    """
    Full chain: expected statistics, decoy estimation, key length and rate

    Returns a breakdown with R = 2 L / N. Abort, degenerate and physicality
    failures yield R = 0 with ``reason`` populated.
    """
    budget = proto.budget
    partial = {}
    try:
        stats = expected_statistics(g, cfg, proto)
        problems = check_counts(stats)
        if problems:
            return _zero(proto, problems[0], partial)

        y11 = estimate_y11(stats, budget, g)
        partial["y11_Z"] = y11
        partial["M11_Z"] = compute_M11_Z(y11, stats, g)
        partial["M11_X"] = compute_M11_X(y11, stats, g)
        partial["e11_X_bit"] = estimate_e11_bit(stats, y11, budget, g)
        partial["e11_Z_ph"] = phase_error_rate(
            partial["e11_X_bit"], partial["M11_X"], partial["M11_Z"], budget.xi_ee, budget.finite_size
        )
    except KeyRateToolkitError as e:
        return _zero(proto, e.message, partial)

    signal = stats.z[("mu", "mu")]
    breakdown = KeyRateBreakdown(N=proto.N, M_mumu=signal.n, E_mumu=signal.error_rate, **partial)
    problems = check_rates(breakdown, signal.n / signal.N)
    if problems:
        breakdown.reason = problems[0]
        return breakdown

    breakdown.lambda_EC = error_correction_leakage(breakdown.M_mumu, breakdown.E_mumu, proto.f)
    breakdown.L_key = key_length(breakdown.M11_Z, breakdown.e11_Z_ph, breakdown.lambda_EC, proto)
    breakdown.R = 2.0 * breakdown.L_key / proto.N
    if breakdown.L_key == 0.0:
        breakdown.reason = "key length is not positive"
    return breakdown


def _zero(proto: ProtocolConfig, reason: str, partial: dict) -> KeyRateBreakdown:
    logger.debug(f"Zero key rate: {reason}")
    return KeyRateBreakdown.zero(proto.N, reason, **partial)
