"""
Monte Carlo round-level simulator of the mode-pairing experiment.

Rounds are drawn in vectorised chunks: intensity and phase-slice choices
for both senders, threshold detectors with independent dark counts behind
the relay's beamsplitter. Effective detections are paired greedily with the
next click inside the pairing interval and sifted by basis, giving an
empirical counterpart of the analytic statistics.
"""
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from models import ObservedStats, RoundDraw, Tally, Transmittances, Z_COMBINATIONS, X_COMBINATIONS
from models.statistics import entry_label
from schemas import ChannelConfig, ParameterVector, ProtocolConfig
from services.channel_service import avg_response_prob, expected_statistics, pairs_per_round
from services.core import transmittance
from utils.logging_config import get_logger, log_operation

logger = get_logger(__name__)

VACUUM = 2  # level index of o; 0 is mu, 1 is nu
LABELS_Z = ("mu", "nu", "o")
LABELS_X = ("2mu", "2nu", "o")
PHASE_TOLERANCE = 1e-12


def click_arrays(k_a: np.ndarray, k_b: np.ndarray, phase: np.ndarray, t: Transmittances,
                 p_d: float, rng: np.random.Generator):
    """
    Left/right detector clicks for coherent pulses meeting at a beamsplitter

    ``phase`` is the relative phase of the two pulses at the relay.
    """
    base = (t.eta_a * k_a + t.eta_b * k_b) / 2.0
    swing = np.sqrt(t.eta_a * k_a * t.eta_b * k_b) * np.cos(phase)
    p_left = 1.0 - (1.0 - p_d) * np.exp(-(base + swing))
    p_right = 1.0 - (1.0 - p_d) * np.exp(-(base - swing))
    left = rng.random(k_a.shape) < p_left
    right = rng.random(k_a.shape) < p_right
    return left, right


def simulate_round(g: ParameterVector, t: Transmittances, p_d: float, rng: np.random.Generator,
                   num_slices: int = 16, delta: Optional[float] = None) -> RoundDraw:
    """Draw one round; the reference phase is uniform unless given"""
    levels_a = np.array(g.intensities("a"))
    levels_b = np.array(g.intensities("b"))
    k_a = float(levels_a[rng.choice(3, p=g.probabilities("a"))])
    k_b = float(levels_b[rng.choice(3, p=g.probabilities("b"))])
    theta_a = 2.0 * math.pi * int(rng.integers(num_slices)) / num_slices
    theta_b = 2.0 * math.pi * int(rng.integers(num_slices)) / num_slices
    if delta is None:
        delta = float(rng.uniform(0.0, 2.0 * math.pi))
    left, right = click_arrays(
        np.array([k_a]), np.array([k_b]), np.array([delta + theta_a - theta_b]), t, p_d, rng
    )
    return RoundDraw(k_a=k_a, k_b=k_b, theta_a=theta_a, theta_b=theta_b, delta=delta,
                     click_left=bool(left[0]), click_right=bool(right[0]))


@dataclass
class _Clicks:
    """Effective detections of one shard, in round order"""
    rounds: np.ndarray
    level_a: np.ndarray
    level_b: np.ndarray
    slice_a: np.ndarray
    slice_b: np.ndarray
    left: np.ndarray


def _simulate_clicks(g: ParameterVector, t: Transmittances, p_d: float, n_rounds: int,
                     num_slices: int, chunk: int, rng: np.random.Generator) -> _Clicks:
    levels_a = np.array(g.intensities("a"))
    levels_b = np.array(g.intensities("b"))
    probs_a = np.array(g.probabilities("a"))
    probs_b = np.array(g.probabilities("b"))
    # Reference phase is stable over the run; per-round randomness comes from the slices
    delta = rng.uniform(0.0, 2.0 * math.pi)

    parts = []
    offset = 0
    while offset < n_rounds:
        size = min(chunk, n_rounds - offset)
        level_a = rng.choice(3, size=size, p=probs_a)
        level_b = rng.choice(3, size=size, p=probs_b)
        slice_a = rng.integers(0, num_slices, size=size)
        slice_b = rng.integers(0, num_slices, size=size)
        phase = delta + 2.0 * math.pi * (slice_a - slice_b) / num_slices
        left, right = click_arrays(levels_a[level_a], levels_b[level_b], phase, t, p_d, rng)
        effective = np.flatnonzero(left ^ right)
        parts.append((effective + offset, level_a[effective], level_b[effective],
                      slice_a[effective], slice_b[effective], left[effective]))
        offset += size

    return _Clicks(*(np.concatenate(column) for column in zip(*parts)))


def pair_clicks(rounds: np.ndarray, l: int):
    """
    Greedy pairing: each click takes the next click within ``l`` rounds;
    a click with no partner in reach is dropped

    Returns:
        (first, second) index arrays into ``rounds``
    """
    first, second = [], []
    i = 0
    last = len(rounds) - 1
    while i < last:
        if rounds[i + 1] - rounds[i] <= l:
            first.append(i)
            second.append(i + 1)
            i += 2
        else:
            i += 1
    return np.array(first, dtype=np.int64), np.array(second, dtype=np.int64)


def _party_bases(level_i: np.ndarray, level_j: np.ndarray):
    vac_i = level_i == VACUUM
    vac_j = level_j == VACUUM
    z_basis = vac_i ^ vac_j
    x_basis = (level_i == level_j) & ~vac_i
    zero_basis = vac_i & vac_j
    return z_basis, x_basis, zero_basis


def _tally_pairs(clicks: _Clicks, first: np.ndarray, second: np.ndarray, proto: ProtocolConfig,
                 num_slices: int, rng: np.random.Generator, n_rounds: int) -> ObservedStats:
    a_i, a_j = clicks.level_a[first], clicks.level_a[second]
    b_i, b_j = clicks.level_b[first], clicks.level_b[second]
    za, xa, oa = _party_bases(a_i, a_j)
    zb, xb, ob = _party_bases(b_i, b_j)
    # Aggregate label index: the non-vacuum level, or vacuum for an empty pair
    label_a = np.minimum(a_i, a_j)
    label_b = np.minimum(b_i, b_j)
    size = len(first)

    # Z-pairs: the non-vacuum slot carries the bit (Alice 0 when it is slot i, Bob 0 when it is slot j)
    bit_a_z = np.where(oa, rng.integers(0, 2, size), (a_i == VACUUM).astype(int))
    bit_b_z = np.where(ob, rng.integers(0, 2, size), (b_j == VACUUM).astype(int))
    z_error = (bit_a_z != bit_b_z) ^ (rng.random(size) < proto.e_d_Z)
    z_pair = (za | oa) & (zb | ob)

    # X-pairs: bit from the phase difference of the two slots, kept when alignments agree
    half = proto.phase_half_width
    diff_a = (clicks.slice_a[first] - clicks.slice_a[second]) % num_slices
    diff_b = (clicks.slice_b[first] - clicks.slice_b[second]) % num_slices
    bit_a = (2 * diff_a >= num_slices).astype(int)
    bit_b = (2 * diff_b >= num_slices).astype(int)
    align_a = 2.0 * math.pi * diff_a / num_slices - math.pi * bit_a
    align_b = 2.0 * math.pi * diff_b / num_slices - math.pi * bit_b
    gap = np.abs(align_a - align_b)
    kept_close = gap <= half + PHASE_TOLERANCE
    kept_far = gap >= math.pi - half - PHASE_TOLERANCE
    bit_b = np.where(kept_far & ~kept_close, 1 - bit_b, bit_b)
    both_x = xa & xb
    sifted = ~both_x | kept_close | kept_far

    bit_a = np.where(oa, rng.integers(0, 2, size), bit_a)
    bit_b = np.where(ob, rng.integers(0, 2, size), bit_b)
    parity = clicks.left[first] != clicks.left[second]
    x_error = ((bit_a != bit_b) != parity) ^ (rng.random(size) < proto.e_d_X)
    x_pair = (xa | oa) & (xb | ob) & sifted

    stats = ObservedStats(total_pairs=float(size), rounds=float(n_rounds))
    for combo in Z_COMBINATIONS:
        mask = z_pair & (label_a == LABELS_Z.index(combo[0])) & (label_b == LABELS_Z.index(combo[1]))
        stats.z[combo] = Tally(n=float(np.count_nonzero(mask)), t=float(np.count_nonzero(mask & z_error)))
    for combo in X_COMBINATIONS:
        mask = x_pair & (label_a == LABELS_X.index(combo[0])) & (label_b == LABELS_X.index(combo[1]))
        stats.x[combo] = Tally(n=float(np.count_nonzero(mask)), t=float(np.count_nonzero(mask & x_error)))
    return stats


def _simulate_shard(g, t, p_d, proto, n_rounds, seed, chunk, shard) -> ObservedStats:
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    clicks = _simulate_clicks(g, t, p_d, n_rounds, proto.num_slices, chunk, rng)
    first, second = pair_clicks(clicks.rounds, proto.l)
    stats = _tally_pairs(clicks, first, second, proto, proto.num_slices, rng, n_rounds)
    log_operation(logger, "oracle_shard", (time.perf_counter() - started) * 1000.0,
                  shard=shard, clicks=len(clicks.rounds), pairs=len(first))
    return stats


def simulate_experiment(g: ParameterVector, cfg: ChannelConfig, proto: ProtocolConfig, n_sim: int,
                        seed: int, shards: int = 1, chunk: int = 2_000_000, workers: int = 1) -> ObservedStats:
    """
    Simulate ``n_sim`` rounds and tally the sifted pairs

    Shards are independent experiments with seeds spawned from ``seed``;
    their tallies are summed, so results depend only on (seed, shards).
    Pair normalizers are not observable and stay zero.
    """
    if n_sim < 1:
        raise ValueError(f"n_sim must be >= 1, got {n_sim}")
    t = transmittance(cfg)
    shards = max(1, min(shards, n_sim))
    seeds = np.random.SeedSequence(seed).spawn(shards)
    sizes = [n_sim // shards + (1 if i < n_sim % shards else 0) for i in range(shards)]
    jobs = [(g, t, cfg.p_d, proto, sizes[i], seeds[i], chunk, i) for i in range(shards)]

    if workers > 1 and shards > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(lambda job: _simulate_shard(*job), jobs))
    else:
        results = [_simulate_shard(*job) for job in jobs]

    total = results[0]
    for part in results[1:]:
        total = total.merged(part)
    return total


@dataclass
class OracleEntry:
    label: str
    empirical: float
    expected: float
    z: float
    passed: bool


@dataclass
class OracleComparison:
    """Entry-wise comparison of simulated and analytic statistics"""
    entries: List[OracleEntry] = field(default_factory=list)
    threshold: float = 4.0

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    @property
    def worst(self) -> Optional[OracleEntry]:
        return max(self.entries, key=lambda e: abs(e.z), default=None)


def z_score(empirical: float, expected: float) -> float:
    """Poisson z-score of a count against its expectation"""
    if expected > 0:
        return (empirical - expected) / math.sqrt(expected)
    return 0.0 if empirical == 0 else math.inf


def compare(empirical: ObservedStats, analytic: ObservedStats, threshold: float = 4.0) -> OracleComparison:
    """Compare every n and t entry and the total pair count"""
    report = OracleComparison(threshold=threshold)

    def add(label, observed, expected):
        z = z_score(observed, expected)
        report.entries.append(OracleEntry(label, observed, expected, z, abs(z) <= threshold))

    add("pairs", empirical.total_pairs, analytic.total_pairs)
    for (basis, combo, observed), (_, _, expected) in zip(empirical.entries(), analytic.entries()):
        label = entry_label(basis, combo)
        add(f"n_{label}", observed.n, expected.n)
        add(f"t_{label}", observed.t, expected.t)
    return report


def validate_channel_model(g: ParameterVector, cfg: ChannelConfig, proto: ProtocolConfig, n_sim: int,
                           seed: int, threshold: float = 4.0, shards: int = 1,
                           chunk: int = 2_000_000, workers: int = 1) -> OracleComparison:
    """Run the simulator and the analytic model at the same number of rounds and compare"""
    empirical = simulate_experiment(g, cfg, proto, n_sim, seed, shards=shards, chunk=chunk, workers=workers)
    analytic = expected_statistics(g, cfg, proto.model_copy(update={"N": float(n_sim)}))
    report = compare(empirical, analytic, threshold)
    worst = report.worst
    logger.info(f"Oracle comparison over {n_sim} rounds: worst |z| = {abs(worst.z):.2f} ({worst.label})")
    return report


def expected_pair_count(g: ParameterVector, cfg: ChannelConfig, l: int, n_sim: int) -> float:
    """n_sim times the analytic pairs-per-round rate"""
    t = transmittance(cfg)
    return n_sim * pairs_per_round(avg_response_prob(g, t, cfg.p_d), l)
