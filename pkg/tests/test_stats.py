"""
Tests for the finite-size statistics
"""
import math

import numpy as np
import pytest

from schemas import SecurityBudget
from services.stats_service import (
    chernoff_lower,
    chernoff_upper,
    gamma_sampling,
    lower_for,
    upper_for,
)

BETA = math.log(1e10)


class TestChernoffBounds:
    """Test the multiplicative Chernoff bounds"""

    def test_upper_at_zero(self):
        """Test an empty count still bounds the expectation by 2 beta"""
        assert chernoff_upper(0.0, 1e-10) == pytest.approx(2 * BETA)
        assert chernoff_upper(0.0, 1e-10) == pytest.approx(46.0517, rel=1e-5)

    def test_upper_direct(self):
        """Test the closed form at chi = 1000"""
        expected = 1000 + BETA + math.sqrt(2 * BETA * 1000 + BETA**2)
        assert chernoff_upper(1000.0, 1e-10) == pytest.approx(expected)

    def test_lower_direct(self):
        """Test the closed form at chi = 1000"""
        expected = 1000 - BETA / 2 - math.sqrt(2 * BETA * 1000 + BETA**2 / 4)
        assert chernoff_lower(1000.0, 1e-10) == pytest.approx(expected)

    def test_lower_floored(self):
        """Test the lower bound never goes negative"""
        assert chernoff_lower(0.0, 1e-10) == 0.0
        assert chernoff_lower(3.0, 1e-10) == 0.0

    def test_sandwich(self):
        """Test lower <= chi <= upper over random inputs"""
        rng = np.random.default_rng(11)
        chis = 10 ** rng.uniform(-3, 12, 10_000)
        epsilons = 10 ** rng.uniform(-15, -0.01, 10_000)
        for chi, eps in zip(chis, epsilons):
            assert chernoff_lower(chi, eps) <= chi < chernoff_upper(chi, eps)

    def test_monotone_in_eps(self):
        """Test both bounds widen as eps shrinks"""
        chi = 5000.0
        uppers = [chernoff_upper(chi, eps) for eps in (1e-2, 1e-5, 1e-10, 1e-15)]
        lowers = [chernoff_lower(chi, eps) for eps in (1e-2, 1e-5, 1e-10, 1e-15)]
        assert uppers == sorted(uppers)
        assert lowers == sorted(lowers, reverse=True)

    def test_relative_width_shrinks(self):
        """Test (upper - lower) / chi vanishes for large counts"""
        widths = [(chernoff_upper(c, 1e-10) - chernoff_lower(c, 1e-10)) / c for c in (1e3, 1e6, 1e9, 1e12)]
        assert widths == sorted(widths, reverse=True)
        assert widths[-1] < 1e-4

    def test_coverage(self):
        """Test binomial draws escape the bounds less often than 10 eps"""
        rng = np.random.default_rng(2024)
        n, p, eps = 10_000, 0.1, 1e-3
        mean = n * p
        draws = rng.binomial(n, p, 100_000)
        unique, counts = np.unique(draws, return_counts=True)
        escaped = 0
        for chi, count in zip(unique, counts):
            if not chernoff_lower(float(chi), eps) <= mean <= chernoff_upper(float(chi), eps):
                escaped += count
        assert escaped / draws.size < 10 * eps

    def test_negative_count_rejected(self):
        """Test negative observations are rejected"""
        with pytest.raises(ValueError):
            chernoff_upper(-1.0, 1e-10)
        with pytest.raises(ValueError):
            chernoff_lower(-1.0, 1e-10)

    def test_budget_without_fluctuations(self):
        """Test the fluctuation-free budget passes counts through"""
        budget = SecurityBudget(finite_size=False)
        assert upper_for(123.0, budget) == 123.0
        assert lower_for(123.0, budget) == 123.0
        assert upper_for(123.0, SecurityBudget()) == pytest.approx(chernoff_upper(123.0, 1e-10))


class TestGammaSampling:
    """Test the random-sampling correction"""

    def test_degenerate_rates(self):
        """Test zero correction at b = 0 and b = 1"""
        assert gamma_sampling(1e-10, 0.0, 1e6, 1e6) == 0.0
        assert gamma_sampling(1e-10, 1.0, 1e6, 1e6) == 0.0

    def test_direct(self):
        """Test the closed form at c = d = 1e6"""
        a, b, c, d = 1e-10, 0.1, 1e6, 1e6
        spread = (c + d) * (1 - b) * b / (c * d)
        argument = (c + d) / (2 * math.pi * c * d * (1 - b) * b * a * a)
        assert gamma_sampling(a, b, c, d) == pytest.approx(math.sqrt(spread * math.log(argument)), rel=1e-12)

    def test_symmetry(self):
        """Test symmetry in (c, d) and in b <-> 1 - b"""
        rng = np.random.default_rng(5)
        for _ in range(200):
            b = float(rng.uniform(0.01, 0.99))
            c, d = (float(v) for v in 10 ** rng.uniform(2, 12, 2))
            assert gamma_sampling(1e-10, b, c, d) == pytest.approx(gamma_sampling(1e-10, b, d, c), rel=1e-12)
            assert gamma_sampling(1e-10, b, c, d) == pytest.approx(gamma_sampling(1e-10, 1 - b, c, d), rel=1e-9)

    def test_vacuous_logarithm_clamped(self):
        """Test a tiny argument yields zero rather than a complex value"""
        assert gamma_sampling(0.9, 0.5, 1e12, 1e12) == 0.0

    def test_nonpositive_sizes_rejected(self):
        """Test c, d <= 0 are rejected"""
        with pytest.raises(ValueError):
            gamma_sampling(1e-10, 0.1, 0.0, 10.0)
        with pytest.raises(ValueError):
            gamma_sampling(1e-10, 0.1, 10.0, -1.0)
