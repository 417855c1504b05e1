"""The simulated deployment: link constants, geometry, fading and modulation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .fading import POWER_LAWS, FadingSpec
from .link import Geometry, SystemParams, backscatter_gain, snr_scale

FORWARD_LINK_MODES = ("independent", "shared")


@dataclass(frozen=True)
class Scenario:
    """Everything the analytical and Monte Carlo engines need.

    ``backscatter`` holds one fading spec per AP receive antenna.
    ``forward_link`` selects whether each antenna's capture event sees its own
    forward-link draw (``"independent"``, the assumption behind treating the
    capture indicators as independent) or one draw shared by all antennas
    (``"shared"``).
    """

    params: SystemParams
    geometry: Geometry
    forward: FadingSpec = field(default_factory=FadingSpec.rayleigh)
    backscatter: tuple[FadingSpec, ...] = ()
    receiver: FadingSpec = field(default_factory=FadingSpec.rayleigh)
    gamma_sq: float = 1.0
    schemes: tuple[tuple[str, int], ...] = (("mpsk", 16), ("mqam", 16))
    required_count: int = 3
    forward_link: str = "independent"
    power_law: str = "gamma2"
    name: str = ""

    def __post_init__(self):
        n = self.geometry.n_antennas
        if not self.backscatter:
            object.__setattr__(self, "backscatter", (FadingSpec.rayleigh(),) * n)
        elif len(self.backscatter) == 1 and n > 1:
            object.__setattr__(self, "backscatter", tuple(self.backscatter) * n)
        if len(self.backscatter) != n:
            raise ValueError(f"{len(self.backscatter)} backscatter specs for {n} antennas")
        if not 0.0 <= self.gamma_sq <= 1.0:
            raise ValueError(f"gamma_sq must lie in [0, 1], got {self.gamma_sq}")
        if self.forward_link not in FORWARD_LINK_MODES:
            raise ValueError(f"forward_link must be one of {FORWARD_LINK_MODES}")
        if self.power_law not in POWER_LAWS:
            raise ValueError(f"power_law must be one of {POWER_LAWS}")
        if self.required_count < 1:
            raise ValueError("required_count must be >= 1")

    @property
    def n_antennas(self) -> int:
        return self.geometry.n_antennas

    def zeta(self, i: int) -> float:
        """Deterministic part of the received power at antenna i (W)."""
        return backscatter_gain(i, self.gamma_sq, self.geometry, self.params)

    def xi(self) -> float:
        return snr_scale(self.gamma_sq, self.geometry, self.params)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def with_value(self, variable: str, value: float) -> "Scenario":
        """Copy with one sweep variable changed: ``p_s``, ``gamma_sq``, ``d_f``,
        ``d_r``, ``d_b`` (all antennas), ``d_b[i]`` or ``d_f[i]``."""
        g = self.geometry
        if variable == "p_s":
            return self.with_(params=self.params.with_(p_s=float(value)))
        if variable == "gamma_sq":
            return self.with_(gamma_sq=float(value))
        if variable == "d_f":
            return self.with_(geometry=replace(g, d_f=float(value)))
        if variable == "d_r":
            return self.with_(geometry=replace(g, d_r=float(value)))
        if variable == "d_b":
            return self.with_(geometry=replace(g, d_b=(float(value),) * g.n_antennas))
        for name in ("d_b", "d_f"):
            if variable.startswith(name + "[") and variable.endswith("]"):
                i = int(variable[len(name) + 1:-1])
                current = getattr(g, name)
                dists = list(current) if isinstance(current, tuple) else [current] * g.n_antennas
                dists[i] = float(value)
                return self.with_(geometry=replace(g, **{name: tuple(dists)}))
        raise ValueError(f"unknown sweep variable {variable!r}")
