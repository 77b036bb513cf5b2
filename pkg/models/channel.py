from dataclasses import dataclass


@dataclass(frozen=True)
class Transmittances:
    """Per-arm transmittance, detector efficiency included; 0 when the loss underflows"""
    eta_a: float
    eta_b: float

    def __post_init__(self):
        for name in ("eta_a", "eta_b"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    @property
    def degenerate(self) -> bool:
        return self.eta_a == 0.0 or self.eta_b == 0.0
