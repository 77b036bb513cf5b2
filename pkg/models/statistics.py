"""
Expected (or tallied) detection statistics per intensity combination
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Tuple

Combination = Tuple[str, str]

# Aggregate intensities of the two paired rounds, (Alice, Bob)
Z_COMBINATIONS: List[Combination] = [
    ("mu", "mu"), ("mu", "nu"), ("nu", "mu"),
    ("mu", "o"), ("o", "mu"), ("nu", "nu"),
    ("nu", "o"), ("o", "nu"), ("o", "o"),
]

X_COMBINATIONS: List[Combination] = [
    ("2mu", "2mu"), ("2mu", "2nu"), ("2nu", "2mu"), ("2nu", "2nu"),
    ("2mu", "o"), ("o", "2mu"), ("2nu", "o"), ("o", "2nu"), ("o", "o"),
]


@dataclass
class Tally:
    """Effective detections n, error detections t and pair normalizer N"""
    n: float = 0.0
    t: float = 0.0
    N: float = 0.0

    def __add__(self, other: "Tally") -> "Tally":
        return Tally(self.n + other.n, self.t + other.t, self.N + other.N)

    def scaled(self, factor: float) -> "Tally":
        return Tally(self.n * factor, self.t * factor, self.N * factor)

    @property
    def error_rate(self) -> float:
        return self.t / self.n if self.n > 0 else 0.0


@dataclass
class ObservedStats:
    """Z-pair and X-pair statistics keyed by aggregate intensity combination"""
    z: Dict[Combination, Tally] = field(default_factory=lambda: {c: Tally() for c in Z_COMBINATIONS})
    x: Dict[Combination, Tally] = field(default_factory=lambda: {c: Tally() for c in X_COMBINATIONS})
    total_pairs: float = 0.0
    rounds: float = 0.0

    def entries(self) -> Iterator[Tuple[str, Combination, Tally]]:
        for combo in Z_COMBINATIONS:
            yield "Z", combo, self.z[combo]
        for combo in X_COMBINATIONS:
            yield "X", combo, self.x[combo]

    def merged(self, other: "ObservedStats") -> "ObservedStats":
        """Entry-wise sum; used to combine independent simulation shards"""
        return ObservedStats(
            z={c: self.z[c] + other.z[c] for c in Z_COMBINATIONS},
            x={c: self.x[c] + other.x[c] for c in X_COMBINATIONS},
            total_pairs=self.total_pairs + other.total_pairs,
            rounds=self.rounds + other.rounds,
        )

    def scaled(self, factor: float) -> "ObservedStats":
        return ObservedStats(
            z={c: tally.scaled(factor) for c, tally in self.z.items()},
            x={c: tally.scaled(factor) for c, tally in self.x.items()},
            total_pairs=self.total_pairs * factor,
            rounds=self.rounds * factor,
        )

    def violations(self) -> List[str]:
        """Entries breaking 0 <= t <= n (and n <= N when a normalizer is present)"""
        problems = []
        for basis, combo, tally in self.entries():
            label = entry_label(basis, combo)
            values = (tally.n, tally.t, tally.N)
            if not all(math.isfinite(v) and v >= 0 for v in values):
                problems.append(f"{label}: entries must be finite and non-negative")
            elif tally.t > tally.n * (1 + 1e-12):
                problems.append(f"{label}: error count exceeds count")
            elif tally.N > 0 and tally.n > tally.N * (1 + 1e-12):
                problems.append(f"{label}: count exceeds pair normalizer")
        return problems


def entry_label(basis: str, combo: Combination) -> str:
    return f"{basis}({combo[0]},{combo[1]})"
