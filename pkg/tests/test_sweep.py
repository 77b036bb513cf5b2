"""
Tests for distance sweeps and their output formats
"""
import json
import math
from unittest.mock import patch

import pytest

from models import KeyRateBreakdown
from schemas import ChannelConfig, OutputFormat, ParameterVector, ProtocolConfig, PsoConfig, Strategy, SweepSpec
from services.security_service import secure_key_rate
from services.sweep_service import (
    COLUMNS,
    SCHEMA_VERSION,
    point_channel,
    render_rows,
    rows_to_csv,
    run_sweep,
    sweep_points,
)
from utils.error_handlers import ConfigurationError, ProtocolAbortError


@pytest.fixture
def point_a():
    return ParameterVector.symmetric(0.424, 0.0213, 0.254, 0.180)


@pytest.fixture
def small_pso():
    return PsoConfig(n_particles=4, max_iters=2, seed=5)


class TestGrid:
    """Test point construction"""

    def test_arm_split(self):
        """Test the total distance is split around delta_L"""
        cfg = point_channel(ChannelConfig(p_d=1e-7), 200.0, 100.0, Strategy.EXTRA_ATTENUATION)
        assert (cfg.L_A, cfg.L_B) == (50.0, 150.0)
        assert cfg.strategy == Strategy.EXTRA_ATTENUATION
        assert cfg.p_d == 1e-7

    def test_grid_order(self):
        """Test distance is the outer loop, then l, then N"""
        spec = SweepSpec(distances=[100, 200], pairing_intervals=[200, 2000], pulse_counts=[1e12, 1e13])
        points = sweep_points(spec, ProtocolConfig())
        assert [(p.total_km, p.l, p.N) for p in points[:4]] == [
            (100, 200, 1e12), (100, 200, 1e13), (100, 2000, 1e12), (100, 2000, 1e13),
        ]
        assert len(points) == 8

    def test_range_spec(self):
        """Test start/stop/step expands inclusively"""
        spec = SweepSpec(start=100, stop=200, step=25)
        assert spec.total_distances() == [100, 125, 150, 175, 200]
        assert [p.l for p in sweep_points(spec, ProtocolConfig(l=500))] == [500] * 5


class TestRunSweep:
    """Test sweep execution"""

    def test_single_point_matches_evaluation(self, point_a, small_pso):
        """Test a one-point sweep reproduces a direct evaluation"""
        spec = SweepSpec(distances=[200], strategy=Strategy.SYMMETRIC, optimize=False)
        rows = run_sweep(spec, ChannelConfig(), ProtocolConfig(), small_pso, parameters=point_a)
        direct = secure_key_rate(point_a, ChannelConfig(strategy=Strategy.SYMMETRIC), ProtocolConfig())
        assert rows[0]["R"] == direct.R
        assert rows[0]["signal_ratio"] == pytest.approx(1.0)
        assert rows[0]["plob_bound"] > rows[0]["R"]

    def test_rate_falls_with_distance(self, point_a, small_pso):
        """Test R decreases along a fixed-vector sweep beyond short distances"""
        spec = SweepSpec(distances=[150, 200, 250, 300], strategy=Strategy.SYMMETRIC, optimize=False)
        rows = run_sweep(spec, ChannelConfig(), ProtocolConfig(), small_pso, parameters=point_a)
        rates = [row["R"] for row in rows]
        assert rates == sorted(rates, reverse=True)

    def test_families_recorded(self, point_a, small_pso):
        """Test each row records its l and N"""
        spec = SweepSpec(distances=[200], strategy=Strategy.SYMMETRIC, optimize=False,
                         pairing_intervals=[200, 2000], pulse_counts=[1e12])
        rows = run_sweep(spec, ChannelConfig(), ProtocolConfig(), small_pso, parameters=point_a)
        assert [(row["l"], row["N"]) for row in rows] == [(200, 1e12), (2000, 1e12)]
        assert rows[0]["R"] <= rows[1]["R"]

    def test_failure_recorded_and_sweep_continues(self, point_a, small_pso):
        """Test an exception at one point yields R = 0 with a reason"""
        spec = SweepSpec(distances=[100, 200], strategy=Strategy.SYMMETRIC, optimize=False)
        good = KeyRateBreakdown(N=1e13, R=1e-5)
        with patch("services.sweep_service.secure_key_rate",
                   side_effect=[ProtocolAbortError("abort: forced"), good]):
            rows = run_sweep(spec, ChannelConfig(), ProtocolConfig(), small_pso, parameters=point_a)
        assert rows[0]["R"] == 0.0 and rows[0]["reason"] == "abort: forced"
        assert rows[1]["R"] == 1e-5

    def test_concurrent_rows_keep_order(self, point_a, small_pso):
        """Test threaded points come back in grid order with identical values"""
        spec = SweepSpec(distances=[100, 150, 200, 250], delta_L=50, optimize=False)
        serial = run_sweep(spec, ChannelConfig(), ProtocolConfig(), small_pso, parameters=point_a)
        threaded = run_sweep(spec, ChannelConfig(), ProtocolConfig(), small_pso, parameters=point_a, workers=4)
        assert serial == threaded

    def test_optimized_rows(self, small_pso):
        """Test optimized rows carry a full feasible vector and both ratios"""
        spec = SweepSpec(distances=[150, 200], delta_L=100)
        rows = run_sweep(spec, ChannelConfig(), ProtocolConfig(), small_pso)
        for row in rows:
            assert set(COLUMNS) <= set(row)
            assert row["R"] >= 0
            assert row["p_o_a"] == pytest.approx(1 - row["p_mu_a"] - row["p_nu_a"])
            assert not math.isnan(row["signal_ratio"])

    def test_fixed_vector_required_without_optimizer(self, small_pso):
        """Test a non-optimizing sweep needs parameters"""
        spec = SweepSpec(distances=[200], optimize=False)
        with pytest.raises(ConfigurationError):
            run_sweep(spec, ChannelConfig(), ProtocolConfig(), small_pso)


class TestOutput:
    """Test CSV and JSON rendering"""

    @pytest.fixture
    def rows(self, point_a, small_pso):
        spec = SweepSpec(distances=[200], strategy=Strategy.SYMMETRIC, optimize=False)
        return run_sweep(spec, ChannelConfig(), ProtocolConfig(), small_pso, parameters=point_a)

    def test_csv_header(self, rows):
        """Test the stable header opens with the schema version column"""
        lines = rows_to_csv(rows).split("\n")
        assert lines[0] == ",".join(COLUMNS)
        assert lines[0].startswith("schema_version,total_km,")
        assert lines[1].split(",")[0] == str(SCHEMA_VERSION)
        assert "\r" not in rows_to_csv(rows)

    def test_csv_precision(self, rows):
        """Test floats carry nine significant digits in exponent form"""
        values = dict(zip(COLUMNS, rows_to_csv(rows).split("\n")[1].split(",")))
        assert values["mu_a"] == "4.24000000e-01"
        assert values["total_km"] == "2.00000000e+02"
        assert values["strategy"] == "symmetric"
        assert float(values["R"]) == pytest.approx(rows[0]["R"], rel=1e-8)

    def test_json(self, rows):
        """Test JSON output carries the schema version and every row"""
        payload = json.loads(render_rows(rows, OutputFormat.JSON))
        assert payload["schema_version"] == SCHEMA_VERSION
        assert payload["columns"] == COLUMNS
        assert payload["rows"][0]["R"] == rows[0]["R"]
