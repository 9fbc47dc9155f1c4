"""Source, channel and detector parameters."""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class ChannelParams:
    """Weak+vacuum decoy source over a lossy fibre.

    Attributes:
        mu, nu1, nu2: mean photon numbers of signal, weak decoy and "vacuum"
            decoy (``nu2 < nu1 < mu``).
        alpha_db_per_km: fibre attenuation.
        distance_km: Alice-Bob distance (for MDI, the total Alice-Bob span;
            each arm carries half).
        dark_rate: dark-count probability per detector gate.
        det_eff: detector efficiency, folded into the total transmittance.
        e_det: misalignment error probability (BB84).
        theta_a, theta_b: MDI polarisation misalignment angles in radians.
    """

    mu: float = 0.4
    nu1: float = 0.1
    nu2: float = 0.0007
    alpha_db_per_km: float = 0.20
    distance_km: float = 0.0
    dark_rate: float = 1e-5
    det_eff: float = 0.2
    e_det: float = 0.033
    theta_a: float = 0.0
    theta_b: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.nu2 < self.nu1 < self.mu):
            raise ValueError(
                f"intensities must satisfy 0 <= nu2 < nu1 < mu, got "
                f"mu={self.mu}, nu1={self.nu1}, nu2={self.nu2}"
            )
        if self.distance_km < 0:
            raise ValueError("distance_km must be >= 0")
        if self.alpha_db_per_km < 0:
            raise ValueError("alpha_db_per_km must be >= 0")
        for name in ("dark_rate", "det_eff", "e_det"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def eta(self) -> float:
        """Total BB84 transmittance including detector efficiency."""
        return self.det_eff * 10.0 ** (-self.alpha_db_per_km * self.distance_km / 10.0)

    @property
    def eta_arm(self) -> float:
        """MDI per-arm transmittance: half the span each, detector folded in."""
        return self.det_eff * 10.0 ** (-self.alpha_db_per_km * self.distance_km / 20.0)

    @property
    def e_mis_mdi(self) -> float:
        """Polarisation misalignment error sin^2(theta_a - theta_b)."""
        return math.sin(self.theta_a - self.theta_b) ** 2

    @property
    def intensities(self) -> tuple[float, float, float]:
        return (self.mu, self.nu1, self.nu2)

    def at(self, distance_km: float) -> "ChannelParams":
        return replace(self, distance_km=float(distance_km))

    def digest(self) -> str:
        """Stable short hash of the parameter values."""
        text = ";".join(f"{f.name}={getattr(self, f.name)!r}" for f in fields(self))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def as_dict(self) -> dict:
        return asdict(self)


# Decoy-BB84 parameter set used for the distance sweeps.
BB84_PRESET = ChannelParams(
    mu=0.4, nu1=0.1, nu2=0.0007, alpha_db_per_km=0.20,
    dark_rate=1e-5, det_eff=0.2, e_det=0.033,
)

# MDI parameter set; detector efficiency is part of the total loss.
MDI_PRESET = ChannelParams(
    mu=0.4, nu1=0.1, nu2=0.0007, alpha_db_per_km=0.20,
    dark_rate=1e-6, det_eff=1.0, e_det=0.0,
    theta_a=0.091, theta_b=-0.091,
)
