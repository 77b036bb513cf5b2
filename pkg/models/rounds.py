from dataclasses import dataclass


@dataclass(frozen=True)
class RoundDraw:
    """One simulated round: choices of both senders and the relay's clicks"""
    k_a: float
    k_b: float
    theta_a: float
    theta_b: float
    delta: float
    click_left: bool
    click_right: bool

    @property
    def effective(self) -> bool:
        # Exactly one detector clicked
        return self.click_left != self.click_right
