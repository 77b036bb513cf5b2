"""
Tests for the decoy-state estimator chain and the secure key rate
"""
import math
from pathlib import Path

import pytest

from config import load_experiment_config
from models import KeyRateBreakdown, ObservedStats, Tally
from schemas import ChannelConfig, ParameterVector, ProtocolConfig, PsoConfig, SecurityBudget, Strategy
from services.channel_service import expected_statistics
from services.optimizer_service import optimize
from services.security_service import (
    check_counts,
    check_physicality,
    compute_M11_X,
    compute_M11_Z,
    error_correction_leakage,
    estimate_e11_bit,
    estimate_y11,
    key_length,
    phase_error_rate,
    secure_key_rate,
)
from services.stats_service import gamma_sampling
from utils.error_handlers import EstimatorDegenerateError, ProtocolAbortError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

REFERENCE_RATES = [
    ("point_a", 2.95e-5),
    ("point_b", 1.84e-5),
    ("point_c", 5.71e-6),
    ("point_d", 5.89e-6),
    ("point_e", 6.37e-7),
]


def rate_of(name, **protocol_updates):
    config = load_experiment_config(str(CONFIGS / f"{name}.json"))
    proto = config.protocol.model_copy(update=protocol_updates) if protocol_updates else config.protocol
    return secure_key_rate(config.parameters, config.channel, proto)


@pytest.fixture
def point_a():
    return ParameterVector.symmetric(0.424, 0.0213, 0.254, 0.180)


@pytest.fixture
def symmetric_channel():
    return ChannelConfig(L_A=100, L_B=100, strategy=Strategy.SYMMETRIC)


class TestReferencePoints:
    """Test the reference operating points"""

    @pytest.mark.parametrize("name,expected", REFERENCE_RATES)
    def test_rate_within_tolerance(self, name, expected):
        """Test R lies within 25% of the reference rate"""
        breakdown = rate_of(name)
        assert breakdown.reason is None
        assert breakdown.R == pytest.approx(expected, rel=0.25)

    def test_asymmetric_intensity_beats_extra_attenuation(self):
        """Test B > C and D > E at equal total distance"""
        assert rate_of("point_b").R > rate_of("point_c").R
        assert rate_of("point_d").R > rate_of("point_e").R

    @pytest.mark.parametrize("asym_name,extra_name", [("point_b", "point_c"), ("point_d", "point_e")])
    def test_optimized_asymmetric_intensity_doubles_extra_attenuation(self, asym_name, extra_name):
        """Test optimizing both strategies at equal arms leaves asymmetric intensity at least 2x ahead"""
        pso = PsoConfig(n_particles=40, max_iters=80, seed=0)
        fitness = {}
        for name in (asym_name, extra_name):
            config = load_experiment_config(str(CONFIGS / f"{name}.json"))
            result = optimize(config.channel, config.protocol, pso, warm_start=config.parameters)
            fitness[name] = result.fitness
        assert fitness[extra_name] > 0
        assert fitness[asym_name] >= 2 * fitness[extra_name]

    def test_rate_falls_with_length_difference(self):
        """Test A > B > D at 200 km total"""
        a, b, d = (rate_of(f"point_{p}").R for p in "abd")
        assert a > b > d


class TestFiniteKeyOrdering:
    """Test finite-size trends at point A"""

    def test_more_pulses_never_hurt(self):
        """Test R(1e11) <= R(1e12) <= R(1e13)"""
        rates = [rate_of("point_a", N=n).R for n in (1e11, 1e12, 1e13)]
        assert rates == sorted(rates)

    def test_longer_pairing_interval_never_hurts(self):
        """Test R(l=200) <= R(l=2000)"""
        assert rate_of("point_a", l=200).R <= rate_of("point_a", l=2000).R

    def test_fluctuation_free_bound(self, point_a, symmetric_channel):
        """Test switching fluctuations off can only raise R"""
        finite = secure_key_rate(point_a, symmetric_channel, ProtocolConfig())
        asymptotic = secure_key_rate(
            point_a, symmetric_channel, ProtocolConfig(budget=SecurityBudget(finite_size=False))
        )
        assert asymptotic.R >= finite.R > 0


class TestMonotonicity:
    """Test R never grows with noise"""

    def test_dark_counts(self, point_a):
        """Test R is non-increasing in p_d"""
        rates = [
            secure_key_rate(point_a, ChannelConfig(p_d=p_d, strategy=Strategy.SYMMETRIC), ProtocolConfig()).R
            for p_d in (1e-10, 1e-8, 1e-6, 1e-5)
        ]
        for before, after in zip(rates, rates[1:]):
            assert after <= before * (1 + 1e-9)

    def test_x_misalignment(self, point_a, symmetric_channel):
        """Test R is non-increasing in e_d_X"""
        rates = [secure_key_rate(point_a, symmetric_channel, ProtocolConfig(e_d_X=e)).R
                 for e in (0.0, 0.02, 0.05, 0.1, 0.15)]
        for before, after in zip(rates, rates[1:]):
            assert after <= before * (1 + 1e-9)

    def test_z_misalignment(self, point_a, symmetric_channel):
        """Test R is non-increasing in e_d_Z"""
        rates = [secure_key_rate(point_a, symmetric_channel, ProtocolConfig(e_d_Z=e)).R
                 for e in (1e-6, 1e-3, 1e-2, 5e-2)]
        for before, after in zip(rates, rates[1:]):
            assert after <= before * (1 + 1e-9)


class TestEstimators:
    """Test the individual estimator steps"""

    def test_y11_tightens_with_pulses(self, point_a, symmetric_channel):
        """Test the yield bound improves when N doubles"""
        budget = SecurityBudget()
        small = estimate_y11(expected_statistics(point_a, symmetric_channel, ProtocolConfig(N=1e12)), budget, point_a)
        large = estimate_y11(expected_statistics(point_a, symmetric_channel, ProtocolConfig(N=2e12)), budget, point_a)
        assert 0 < small <= large <= 1

    def test_m11_scales_with_yield(self, point_a, symmetric_channel):
        """Test M11 values are linear in y11 and vanish with it"""
        stats = expected_statistics(point_a, symmetric_channel, ProtocolConfig())
        assert compute_M11_Z(0.0, stats, point_a) == 0.0
        assert compute_M11_Z(0.2, stats, point_a) == pytest.approx(2 * compute_M11_Z(0.1, stats, point_a))
        m11_x = compute_M11_X(0.1, stats, point_a)
        assert 0 <= m11_x <= stats.x[("2nu", "2nu")].N

    def test_bit_error_small_without_noise(self, point_a):
        """Test e11 stays far below 0.5 without misalignment or dark counts"""
        cfg = ChannelConfig(p_d=0.0, strategy=Strategy.SYMMETRIC)
        proto = ProtocolConfig(e_d_X=0.0, e_d_Z=0.0, budget=SecurityBudget(finite_size=False))
        stats = expected_statistics(point_a, cfg, proto)
        y11 = estimate_y11(stats, proto.budget, point_a)
        assert estimate_e11_bit(stats, y11, proto.budget, point_a) < 0.2

    def test_bit_error_abort(self, point_a):
        """Test a bound above 0.5 aborts"""
        stats = ObservedStats()
        for combo in stats.x:
            stats.x[combo] = Tally(n=10.0, t=10.0, N=1.0)
        stats.x[("o", "2nu")] = Tally(n=10.0, t=0.0, N=1.0)
        stats.x[("2nu", "o")] = Tally(n=10.0, t=0.0, N=1.0)
        with pytest.raises(ProtocolAbortError):
            estimate_e11_bit(stats, 1e-3, SecurityBudget(finite_size=False), point_a)

    def test_empty_normalizer_is_degenerate(self, point_a):
        """Test zero pair normalizers are reported instead of dividing by zero"""
        with pytest.raises(EstimatorDegenerateError):
            estimate_y11(ObservedStats(), SecurityBudget(), point_a)


class TestPhaseError:
    """Test the phase error rate"""

    def test_zero_bit_error(self):
        """Test e11 = 0 passes through (the correction vanishes)"""
        assert phase_error_rate(0.0, 1e5, 1e6, 1e-10) == 0.0

    def test_direct(self):
        """Test the correction at a known point"""
        expected = 0.05 + gamma_sampling(1e-10, 0.05, 1e5, 1e6)
        assert phase_error_rate(0.05, 1e5, 1e6, 1e-10) == pytest.approx(expected)

    def test_correction_vanishes_for_large_samples(self):
        """Test huge samples leave the bit error rate unchanged"""
        assert phase_error_rate(0.05, 1e20, 1e20, 1e-10) == pytest.approx(0.05, abs=1e-7)

    def test_cap_aborts(self):
        """Test reaching 0.5 aborts"""
        with pytest.raises(ProtocolAbortError):
            phase_error_rate(0.49, 10.0, 10.0, 1e-10)

    def test_fluctuations_off(self):
        """Test no correction without finite-size effects"""
        assert phase_error_rate(0.05, 10.0, 10.0, 1e-10, finite_size=False) == 0.05


class TestKeyLength:
    """Test key length and leakage"""

    def test_leakage(self):
        """Test lambda = f M h(E)"""
        assert error_correction_leakage(1e6, 0.5, 1.1) == pytest.approx(1.1e6)
        assert error_correction_leakage(1e6, 0.0, 1.1) == 0.0

    def test_no_single_photons(self):
        """Test M11 = 0 gives no key"""
        assert key_length(0.0, 0.01, 0.0, ProtocolConfig()) == 0.0

    def test_half_phase_error(self):
        """Test e_ph = 0.5 gives no key"""
        assert key_length(1e9, 0.5, 0.0, ProtocolConfig()) == 0.0

    def test_security_overhead(self):
        """Test the epsilon terms are subtracted"""
        proto = ProtocolConfig()
        expected = 1e6 - math.log2(2 / 1e-10) - 2 * math.log2(1e10)
        assert key_length(1e6, 0.0, 0.0, proto) == pytest.approx(expected)


class TestSecureKeyRate:
    """Test the full chain"""

    def test_breakdown_fields(self, point_a, symmetric_channel):
        """Test R = 2 L / N and the intermediate values are populated"""
        breakdown = secure_key_rate(point_a, symmetric_channel, ProtocolConfig())
        assert isinstance(breakdown, KeyRateBreakdown)
        assert breakdown.R == pytest.approx(2 * breakdown.L_key / 1e13)
        assert 0 < breakdown.e11_X_bit < breakdown.e11_Z_ph < 0.5
        assert breakdown.M11_Z > 0 and breakdown.lambda_EC > 0

    def test_long_distance_gives_zero_with_reason(self, point_a):
        """Test a hopeless channel yields R = 0 and a reason"""
        cfg = ChannelConfig(L_A=400, L_B=400, strategy=Strategy.SYMMETRIC)
        breakdown = secure_key_rate(point_a, cfg, ProtocolConfig(N=1e9))
        assert breakdown.R == 0.0
        assert breakdown.reason

    def test_degenerate_channel_gives_zero(self):
        """Test an all-vacuum source returns R = 0 instead of raising"""
        g = ParameterVector.symmetric(0.5, 0.1, 0.0, 0.0)
        breakdown = secure_key_rate(g, ChannelConfig(p_d=0.0, strategy=Strategy.SYMMETRIC), ProtocolConfig())
        assert breakdown.R == 0.0
        assert "degenerate" in breakdown.reason

    def test_zero_transmittance_gives_zero(self, point_a):
        """Test arms where the loss underflows return R = 0 instead of raising"""
        cfg = ChannelConfig(L_A=20000, L_B=20000, strategy=Strategy.SYMMETRIC)
        breakdown = secure_key_rate(point_a, cfg, ProtocolConfig())
        assert breakdown.R == 0.0
        assert "transmittance underflows" in breakdown.reason

    def test_rate_never_negative(self, symmetric_channel):
        """Test R >= 0 over a grid of vectors"""
        for mu in (0.05, 0.3, 0.9):
            for p_mu in (0.05, 0.5, 0.9):
                g = ParameterVector.symmetric(mu, mu / 10, p_mu, (1 - p_mu) / 3)
                assert secure_key_rate(g, symmetric_channel, ProtocolConfig()).R >= 0.0


class TestPhysicality:
    """Test the physicality checks"""

    def test_clean_point(self, point_a, symmetric_channel):
        """Test point A passes every check"""
        proto = ProtocolConfig()
        stats = expected_statistics(point_a, symmetric_channel, proto)
        breakdown = secure_key_rate(point_a, symmetric_channel, proto)
        assert check_physicality(stats, breakdown) == []

    def test_empty_counts_flagged(self):
        """Test missing counts are named"""
        problems = check_counts(ObservedStats())
        assert any("Z(mu,mu)" in p for p in problems)
        assert not any("(o,o)" in p for p in problems)

    def test_rates_flagged(self, point_a, symmetric_channel):
        """Test out-of-range rates are named"""
        stats = expected_statistics(point_a, symmetric_channel, ProtocolConfig())
        problems = check_physicality(stats, KeyRateBreakdown(N=1e13))
        assert "single-photon yield outside (0, 1)" in problems
