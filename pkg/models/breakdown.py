from dataclasses import dataclass, asdict
from typing import Any, Dict, Optional


@dataclass
class KeyRateBreakdown:
    """Intermediate estimator outputs and the resulting secure key rate"""
    N: float
    y11_Z: float = 0.0
    M11_Z: float = 0.0
    M11_X: float = 0.0
    e11_X_bit: float = 0.5
    e11_Z_ph: float = 0.5
    M_mumu: float = 0.0
    E_mumu: float = 0.0
    lambda_EC: float = 0.0
    L_key: float = 0.0
    R: float = 0.0
    # Why the rate is zero, if it is
    reason: Optional[str] = None

    @classmethod
    def zero(cls, N: float, reason: str, **partial) -> "KeyRateBreakdown":
        return cls(N=N, reason=reason, **partial)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)
