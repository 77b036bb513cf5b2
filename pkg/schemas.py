"""
Validated configuration models for the MP-QKD key-rate toolkit
"""
import math
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Tolerance on the per-party probability simplex
SIMPLEX_TOLERANCE = 1e-9


class Strategy(str, Enum):
    """How the parties deal with unequal arm lengths"""
    SYMMETRIC = "symmetric"
    ASYMMETRIC_INTENSITY = "asymmetric_intensity"
    EXTRA_ATTENUATION = "extra_attenuation"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class ChannelConfig(BaseModel):
    """Fiber arms and detectors between the two senders and the relay"""
    model_config = ConfigDict(frozen=True)

    L_A: float = Field(100.0, ge=0, description="Alice-relay fiber length in km")
    L_B: float = Field(100.0, ge=0, description="Bob-relay fiber length in km")
    alpha: float = Field(0.2, gt=0, description="Fiber loss in dB/km")
    eta_d: float = Field(0.75, gt=0, le=1, description="Detector efficiency")
    p_d: float = Field(1e-8, ge=0, lt=1, description="Dark-count probability per pulse")
    strategy: Strategy = Strategy.ASYMMETRIC_INTENSITY

    @model_validator(mode="after")
    def check_arm_order(self):
        if self.L_B < self.L_A:
            raise ValueError("L_B must not be shorter than L_A (label the shorter arm A)")
        if self.strategy == Strategy.SYMMETRIC and self.L_B != self.L_A:
            raise ValueError("symmetric strategy requires L_A == L_B")
        return self

    @property
    def delta_L(self) -> float:
        return self.L_B - self.L_A

    @property
    def total_length(self) -> float:
        return self.L_A + self.L_B


class SecurityBudget(BaseModel):
    """Failure probabilities of the finite-key analysis"""
    model_config = ConfigDict(frozen=True)

    eps_cor: float = Field(1e-10, gt=0, lt=1)
    eps_sec: float = Field(1e-10, gt=0, lt=1)
    eps_CB: float = Field(1e-10, gt=0, lt=1)
    xi_ee: float = Field(1e-10, gt=0, lt=1)
    # False switches off statistical fluctuations (Chernoff and sampling terms)
    finite_size: bool = True


class ProtocolConfig(BaseModel):
    """Run-level protocol settings"""
    model_config = ConfigDict(frozen=True)

    N: float = Field(1e13, ge=1, description="Total number of pulses")
    l: int = Field(2000, ge=1, description="Maximum pairing interval in rounds")
    num_slices: int = Field(16, ge=2, description="Number of modulated phase slices")
    delta_phase: Optional[float] = Field(None, description="Phase-sifting half-width in radians")
    e_d_X: float = Field(0.1, ge=0, le=0.5)
    e_d_Z: float = Field(1e-6, ge=0, le=0.5)
    f: float = Field(1.1, ge=1, description="Error-correction efficiency")
    budget: SecurityBudget = Field(default_factory=SecurityBudget)

    @field_validator("delta_phase")
    @classmethod
    def check_delta_phase(cls, v):
        if v is not None and not (0 < v <= math.pi / 2):
            raise ValueError("delta_phase must lie in (0, pi/2]")
        return v

    @property
    def phase_half_width(self) -> float:
        """Sifting half-width; one slice width over two by default"""
        if self.delta_phase is not None:
            return self.delta_phase
        return math.pi / self.num_slices


class ParameterVector(BaseModel):
    """Intensities and sending probabilities of both parties"""
    model_config = ConfigDict(frozen=True)

    mu_a: float
    nu_a: float
    o_a: float = 0.0
    p_mu_a: float = Field(ge=0, le=1)
    p_nu_a: float = Field(ge=0, le=1)
    p_o_a: float = Field(ge=0, le=1)
    mu_b: float
    nu_b: float
    o_b: float = 0.0
    p_mu_b: float = Field(ge=0, le=1)
    p_nu_b: float = Field(ge=0, le=1)
    p_o_b: float = Field(ge=0, le=1)

    @model_validator(mode="after")
    def check_source_constraints(self):
        for party in ("a", "b"):
            mu, nu, o = self.intensities(party)
            if o != 0:
                raise ValueError(f"o_{party} must be 0 (vacuum intensity)")
            if not nu > o:
                raise ValueError(f"nu_{party} must be strictly above o_{party}")
            if not nu < mu:
                raise ValueError(f"nu_{party} must be strictly below mu_{party}")
            if not mu < 1:
                raise ValueError(f"mu_{party} must be strictly below 1")
            total = sum(self.probabilities(party))
            if abs(total - 1.0) > SIMPLEX_TOLERANCE:
                raise ValueError(
                    f"p_mu_{party} + p_nu_{party} + p_o_{party} must equal 1, got {total}"
                )
        return self

    def intensities(self, party: str) -> Tuple[float, float, float]:
        """(mu, nu, o) of party 'a' or 'b'"""
        return (getattr(self, f"mu_{party}"), getattr(self, f"nu_{party}"), getattr(self, f"o_{party}"))

    def probabilities(self, party: str) -> Tuple[float, float, float]:
        """(p_mu, p_nu, p_o) of party 'a' or 'b'"""
        return (getattr(self, f"p_mu_{party}"), getattr(self, f"p_nu_{party}"), getattr(self, f"p_o_{party}"))

    def free_vector(self) -> Tuple[float, ...]:
        """The 8 free coordinates (mu_a, nu_a, p_mu_a, p_nu_a, mu_b, nu_b, p_mu_b, p_nu_b)"""
        return (self.mu_a, self.nu_a, self.p_mu_a, self.p_nu_a,
                self.mu_b, self.nu_b, self.p_mu_b, self.p_nu_b)

    @classmethod
    def from_free(cls, free) -> "ParameterVector":
        """Build a vector from the 8 free coordinates; vacuum probabilities fill the simplex"""
        mu_a, nu_a, p_mu_a, p_nu_a, mu_b, nu_b, p_mu_b, p_nu_b = (float(v) for v in free)
        return cls(
            mu_a=mu_a, nu_a=nu_a, p_mu_a=p_mu_a, p_nu_a=p_nu_a, p_o_a=1.0 - p_mu_a - p_nu_a,
            mu_b=mu_b, nu_b=nu_b, p_mu_b=p_mu_b, p_nu_b=p_nu_b, p_o_b=1.0 - p_mu_b - p_nu_b,
        )

    @classmethod
    def symmetric(cls, mu: float, nu: float, p_mu: float, p_nu: float) -> "ParameterVector":
        """Both parties use the same settings"""
        return cls.from_free((mu, nu, p_mu, p_nu, mu, nu, p_mu, p_nu))


class PsoConfig(BaseModel):
    """Settings of the modified particle swarm optimizer"""
    model_config = ConfigDict(frozen=True)

    n_particles: int = Field(200, ge=2)
    max_iters: int = Field(400, ge=1)
    w_init: float = 0.9
    w_final: float = 0.4
    c1_min: float = 0.5
    c1_max: float = 2.5
    c2_min: float = 0.5
    c2_max: float = 2.5
    h: float = Field(0.1, ge=0, lt=1, description="Share of particles re-randomized each iteration")
    zeta: float = Field(1e-4, ge=0, description="Relative improvement threshold")
    patience: int = Field(50, ge=1)
    v_max_frac: float = Field(0.2, gt=0, le=1)
    seed: int = Field(0, ge=0)
    log_every: int = Field(25, ge=1)

    @model_validator(mode="after")
    def check_schedules(self):
        if not (self.w_init >= self.w_final > 0):
            raise ValueError("inertia weights must satisfy w_init >= w_final > 0")
        if not (self.c1_max >= self.c1_min > 0):
            raise ValueError("c1 range must satisfy c1_max >= c1_min > 0")
        if not (self.c2_max >= self.c2_min > 0):
            raise ValueError("c2 range must satisfy c2_max >= c2_min > 0")
        return self


class SweepSpec(BaseModel):
    """A family of operating points to evaluate or optimize"""
    model_config = ConfigDict(frozen=True)

    distances: Optional[List[float]] = Field(None, description="Total distances L_A + L_B in km")
    start: Optional[float] = None
    stop: Optional[float] = None
    step: Optional[float] = None
    delta_L: float = Field(0.0, ge=0)
    strategy: Strategy = Strategy.ASYMMETRIC_INTENSITY
    optimize: bool = True
    pairing_intervals: Optional[List[int]] = None
    pulse_counts: Optional[List[float]] = None
    output: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV

    @model_validator(mode="after")
    def check_range(self):
        if self.distances is None:
            if self.start is None or self.stop is None or self.step is None:
                raise ValueError("give either distances or start/stop/step")
            if self.step <= 0:
                raise ValueError("step must be positive")
            if self.start < 0 or self.stop < self.start:
                raise ValueError("range must satisfy 0 <= start <= stop")
        elif any(d < 0 for d in self.distances):
            raise ValueError("distances must be non-negative")
        if any(d < self.delta_L for d in self.total_distances()):
            raise ValueError("every total distance must be at least delta_L")
        if self.strategy == Strategy.SYMMETRIC and self.delta_L != 0:
            raise ValueError("symmetric strategy requires delta_L == 0")
        if self.pairing_intervals is not None and any(l < 1 for l in self.pairing_intervals):
            raise ValueError("pairing intervals must be >= 1")
        if self.pulse_counts is not None and any(n < 1 for n in self.pulse_counts):
            raise ValueError("pulse counts must be >= 1")
        return self

    def total_distances(self) -> List[float]:
        if self.distances is not None:
            return list(self.distances)
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [self.start + i * self.step for i in range(count)]


class ExperimentConfig(BaseModel):
    """Top-level configuration file layout"""
    model_config = ConfigDict(frozen=True)

    channel: ChannelConfig = Field(default_factory=ChannelConfig)
    protocol: ProtocolConfig = Field(default_factory=ProtocolConfig)
    pso: PsoConfig = Field(default_factory=PsoConfig)
    parameters: Optional[ParameterVector] = None
    sweep: Optional[SweepSpec] = None
