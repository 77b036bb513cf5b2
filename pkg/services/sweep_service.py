"""
Sweeps over total distance, pairing interval and pulse count.

Each point builds a channel from (total distance, delta_L, strategy),
optionally optimizes the source parameters, evaluates the key rate and
records one plot-ready row. Points may run concurrently; rows come back in
the order of the grid.
"""
import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Any, Dict, List, Optional

from models import KeyRateBreakdown
from schemas import ChannelConfig, OutputFormat, ParameterVector, ProtocolConfig, PsoConfig, SweepSpec
from services.core import end_to_end_transmittance, intensity_ratios, plob_bound, transmittance
from services.optimizer_service import optimize
from services.security_service import secure_key_rate
from utils.error_handlers import ConfigurationError, KeyRateToolkitError
from utils.logging_config import get_logger, log_error, log_operation

logger = get_logger(__name__)

SCHEMA_VERSION = 1
FLOAT_FORMAT = "{:.8e}"

COLUMNS = [
    "schema_version", "total_km", "delta_L_km", "strategy", "l", "N", "R", "plob_bound",
    "mu_a", "nu_a", "p_mu_a", "p_nu_a", "mu_b", "nu_b", "p_mu_b", "p_nu_b",
    "signal_ratio", "decoy_ratio",
    "p_o_a", "p_o_b",
    "reason",
]


@dataclass(frozen=True)
class SweepPoint:
    total_km: float
    l: int
    N: float


def point_channel(base: ChannelConfig, total_km: float, delta_L: float, strategy) -> ChannelConfig:
    """Split a total distance into arms differing by delta_L; device settings come from ``base``"""
    values = base.model_dump()
    values.update(L_A=(total_km - delta_L) / 2.0, L_B=(total_km + delta_L) / 2.0, strategy=strategy)
    return ChannelConfig.model_validate(values)


def sweep_points(spec: SweepSpec, proto: ProtocolConfig) -> List[SweepPoint]:
    """Grid in row order: distance outermost, then l, then N"""
    intervals = spec.pairing_intervals or [proto.l]
    counts = spec.pulse_counts or [proto.N]
    return [SweepPoint(d, l, n) for d, l, n in product(spec.total_distances(), intervals, counts)]


def _row(point: SweepPoint, spec: SweepSpec, cfg: ChannelConfig,
         g: Optional[ParameterVector], breakdown: KeyRateBreakdown) -> Dict[str, Any]:
    row: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "total_km": point.total_km,
        "delta_L_km": spec.delta_L,
        "strategy": spec.strategy.value,
        "l": point.l,
        "N": point.N,
        "R": breakdown.R,
        "reason": breakdown.reason or "",
    }
    try:
        row["plob_bound"] = plob_bound(end_to_end_transmittance(cfg))
    except ValueError:
        row["plob_bound"] = float("nan")

    if g is None:
        for name in COLUMNS:
            row.setdefault(name, float("nan"))
        return row

    row.update({
        "mu_a": g.mu_a, "nu_a": g.nu_a, "p_mu_a": g.p_mu_a, "p_nu_a": g.p_nu_a,
        "mu_b": g.mu_b, "nu_b": g.nu_b, "p_mu_b": g.p_mu_b, "p_nu_b": g.p_nu_b,
        "p_o_a": g.p_o_a, "p_o_b": g.p_o_b,
    })
    row["signal_ratio"], row["decoy_ratio"] = intensity_ratios(g, transmittance(cfg))
    return row


def evaluate_point(point: SweepPoint, spec: SweepSpec, base: ChannelConfig, proto: ProtocolConfig,
                   pso: PsoConfig, parameters: Optional[ParameterVector]) -> Dict[str, Any]:
    """
    One sweep row. Failures are recorded as R = 0 with a reason rather than raised.
    """
    started = time.perf_counter()
    cfg = point_channel(base, point.total_km, spec.delta_L, spec.strategy)
    point_proto = proto.model_copy(update={"l": point.l, "N": point.N})
    g = parameters
    try:
        if spec.optimize:
            result = optimize(cfg, point_proto, pso, warm_start=parameters)
            g, breakdown = result.parameters, result.breakdown
        elif parameters is None:
            raise ConfigurationError("A sweep without optimization needs a parameter vector")
        else:
            breakdown = secure_key_rate(parameters, cfg, point_proto)
    except KeyRateToolkitError as e:
        log_error(logger, e, "sweep_point", traceback=False, point=point.total_km)
        breakdown = KeyRateBreakdown.zero(point.N, e.message)
    except ValueError as e:
        log_error(logger, e, "sweep_point", point=point.total_km)
        breakdown = KeyRateBreakdown.zero(point.N, str(e))

    log_operation(logger, "sweep_point", (time.perf_counter() - started) * 1000.0,
                  point=point.total_km, best_rate=breakdown.R)
    return _row(point, spec, cfg, g, breakdown)


def run_sweep(spec: SweepSpec, base: ChannelConfig, proto: ProtocolConfig, pso: PsoConfig,
              parameters: Optional[ParameterVector] = None, workers: int = 1) -> List[Dict[str, Any]]:
    """
    Evaluate every grid point

    Args:
        spec: Distances, strategy and the optional l / N families
        base: Device settings (alpha, eta_d, p_d) shared by all points
        proto: Protocol defaults; l and N are replaced per point
        pso: Swarm settings used when ``spec.optimize`` is set
        parameters: Fixed vector, or the warm start when optimizing
        workers: Points evaluated concurrently

    Returns:
        Rows in grid order
    """
    if not spec.optimize and parameters is None:
        raise ConfigurationError("A sweep without optimization needs a parameter vector")
    points = sweep_points(spec, proto)
    logger.info(f"Sweeping {len(points)} points ({spec.strategy.value}, delta_L={spec.delta_L} km)")

    def job(point: SweepPoint) -> Dict[str, Any]:
        return evaluate_point(point, spec, base, proto, pso, parameters)

    if workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(job, points))
    return [job(point) for point in points]


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return FLOAT_FORMAT.format(value)
    return str(value)


def rows_to_csv(rows: List[Dict[str, Any]]) -> str:
    """CSV text: one header row led by the schema version column, LF line endings"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_format_value(row[name]) for name in COLUMNS])
    return buffer.getvalue()


def rows_to_json(rows: List[Dict[str, Any]]) -> str:
    payload = {"schema_version": SCHEMA_VERSION, "columns": COLUMNS, "rows": rows}
    return json.dumps(payload, indent=2, default=str)


def render_rows(rows: List[Dict[str, Any]], fmt: OutputFormat) -> str:
    return rows_to_json(rows) if fmt == OutputFormat.JSON else rows_to_csv(rows)
