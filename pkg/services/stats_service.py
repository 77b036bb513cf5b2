"""
Finite-size statistics: Chernoff bounds on expectations and the
random-sampling-without-replacement correction.
"""
import math

from schemas import SecurityBudget


def _beta(eps: float) -> float:
    if not 0.0 < eps < 1.0:
        raise ValueError(f"failure probability must lie in (0, 1), got {eps}")
    return math.log(1.0 / eps)


def _upper(chi: float, beta: float) -> float:
    return chi + beta + math.sqrt(2.0 * beta * chi + beta * beta)


def _lower(chi: float, beta: float) -> float:
    return max(chi - beta / 2.0 - math.sqrt(2.0 * beta * chi + beta * beta / 4.0), 0.0)


def chernoff_upper(chi: float, eps: float) -> float:
    """Upper bound on the expectation behind an observed count chi"""
    if chi < 0:
        raise ValueError(f"observed count must be non-negative, got {chi}")
    return _upper(chi, _beta(eps))


def chernoff_lower(chi: float, eps: float) -> float:
    """Lower bound on the expectation behind an observed count chi, floored at 0"""
    if chi < 0:
        raise ValueError(f"observed count must be non-negative, got {chi}")
    return _lower(chi, _beta(eps))


def upper_for(chi: float, budget: SecurityBudget) -> float:
    """chernoff_upper at the budget's eps_CB, or chi itself with fluctuations off"""
    return _upper(chi, _beta(budget.eps_CB)) if budget.finite_size else chi


def lower_for(chi: float, budget: SecurityBudget) -> float:
    """chernoff_lower at the budget's eps_CB, or chi itself with fluctuations off"""
    return _lower(chi, _beta(budget.eps_CB)) if budget.finite_size else chi


def gamma_sampling(a: float, b: float, c: float, d: float) -> float:
    """
    Sampling correction between an error rate b seen on c events and the
    rate on d events, with failure probability a

    Zero at b in {0, 1} and wherever the logarithm is not positive (the
    bound carries no information there).
    """
    if c <= 0 or d <= 0:
        raise ValueError(f"sample sizes must be positive, got c={c}, d={d}")
    if b <= 0.0 or b >= 1.0:
        return 0.0
    spread = (c + d) * (1.0 - b) * b / (c * d)
    argument = (c + d) / (2.0 * math.pi * c * d * (1.0 - b) * b * a * a)
    if argument <= 1.0:
        return 0.0
    return math.sqrt(spread * math.log(argument))
