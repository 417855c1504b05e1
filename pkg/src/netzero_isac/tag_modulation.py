"""Passive tag model: load impedance to reflection coefficient mapping and
M-ary backscatter constellations."""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DegenerateCircuitError(ZeroDivisionError):
    """Load and antenna impedances sum to zero."""


class DuplicatePointError(ValueError):
    """Two loads of a modulator map to the same reflection coefficient."""


@dataclass(frozen=True)
class Impedance:
    resistance: float
    reactance: float = 0.0

    @property
    def z(self) -> complex:
        return complex(self.resistance, self.reactance)

    @classmethod
    def from_complex(cls, z: complex) -> "Impedance":
        z = complex(z)
        return cls(z.real, z.imag)


@dataclass(frozen=True)
class ReflectionCoefficient:
    real_part: float
    imag_part: float = 0.0

    @property
    def gamma(self) -> complex:
        return complex(self.real_part, self.imag_part)

    @property
    def magnitude_sq(self) -> float:
        return self.real_part ** 2 + self.imag_part ** 2

    @classmethod
    def from_complex(cls, g: complex) -> "ReflectionCoefficient":
        g = complex(g)
        return cls(g.real, g.imag)


def reflection_coefficient(load: Impedance, antenna: Impedance) -> ReflectionCoefficient:
    """Gamma = (Z_L - Z_a) / (Z_L + Z_a).

    >>> reflection_coefficient(Impedance(100, 50), Impedance(50))
    ReflectionCoefficient(real_part=0.4, imag_part=0.2)
    """
    den = load.z + antenna.z
    if den == 0:
        raise DegenerateCircuitError(f"Z_L + Z_a = 0 for Z_L={load.z}, Z_a={antenna.z}")
    return ReflectionCoefficient.from_complex((load.z - antenna.z) / den)


def normalize_impedance(load: Impedance, antenna: Impedance) -> complex:
    """Smith-chart normalization Z_L' = Z_L / Z_a."""
    if antenna.z == 0:
        raise ZeroDivisionError("antenna impedance is zero")
    return load.z / antenna.z


def gamma_from_normalized(z_norm: complex) -> complex:
    """(Z' - 1) / (Z' + 1), the Smith-chart form of the reflection coefficient."""
    if z_norm == -1:
        raise DegenerateCircuitError("normalized impedance of -1")
    return (z_norm - 1) / (z_norm + 1)


def load_for_gamma(gamma: complex, antenna: Impedance) -> Impedance:
    """Invert the mapping: Z_L = Z_a (1 + Gamma) / (1 - Gamma)."""
    gamma = complex(gamma)
    if gamma == 1:
        raise DegenerateCircuitError("Gamma = 1 corresponds to an open circuit")
    return Impedance.from_complex(antenna.z * (1 + gamma) / (1 - gamma))


def power_split(gamma: ReflectionCoefficient, incident_power: float) -> tuple[float, float]:
    """Split incident power into (backscattered, absorbed) parts."""
    if incident_power < 0:
        raise ValueError("incident power must be nonnegative")
    back = gamma.magnitude_sq * incident_power
    return back, incident_power - back


def gray_code(k: int) -> int:
    return k ^ (k >> 1)


def _bits(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


def psk_targets(order: int, radius: float, phase: float = 0.0) -> list[complex]:
    """Points r * exp(j(2 pi m / M + phase)) in angular order."""
    return [radius * cmath.exp(1j * (2 * math.pi * m / order + phase)) for m in range(order)]


def psk_labels(order: int) -> list[str]:
    width = int(round(math.log2(order)))
    return [_bits(gray_code(m), width) for m in range(order)]


def qam_targets(order: int, half_spacing: float) -> list[complex]:
    """Square QAM grid with adjacent points 2*half_spacing apart, ordered
    row by row (imaginary axis outer, real axis inner)."""
    side = math.isqrt(order)
    if side * side != order:
        raise ValueError(f"QAM order must be a perfect square, got {order}")
    levels = [(2 * k - side + 1) * half_spacing for k in range(side)]
    return [complex(re, im) for im in levels for re in levels]


def qam_labels(order: int) -> list[str]:
    side = math.isqrt(order)
    width = int(round(math.log2(side)))
    return [_bits(gray_code(q), width) + _bits(gray_code(i), width)
            for q in range(side) for i in range(side)]


@dataclass(frozen=True)
class TagModulator:
    antenna_impedance: Impedance
    load_set: tuple[Impedance, ...]
    symbol_labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        m = len(self.load_set)
        if m < 1 or (m & (m - 1)):
            raise ValueError(f"number of loads must be a power of 2, got {m}")
        if self.symbol_labels and len(self.symbol_labels) != m:
            raise ValueError("one label per load is required")
        if not self.symbol_labels:
            object.__setattr__(self, "symbol_labels", tuple(psk_labels(m)) if m > 1 else ("",))

    @property
    def order(self) -> int:
        return len(self.load_set)

    @classmethod
    def from_targets(cls, antenna: Impedance, targets: Sequence[complex],
                     labels: Sequence[str] | None = None) -> "TagModulator":
        """Build a modulator whose loads realize the given reflection points."""
        loads = tuple(load_for_gamma(g, antenna) for g in targets)
        return cls(antenna, loads, tuple(labels) if labels else ())

    @classmethod
    def psk(cls, antenna: Impedance, order: int, radius: float, phase: float = 0.0):
        return cls.from_targets(antenna, psk_targets(order, radius, phase), psk_labels(order))

    @classmethod
    def qam(cls, antenna: Impedance, order: int, half_spacing: float):
        return cls.from_targets(antenna, qam_targets(order, half_spacing), qam_labels(order))


@dataclass(frozen=True)
class Constellation:
    points: tuple[ReflectionCoefficient, ...]
    labels: tuple[str, ...]
    min_distance: float
    mean_power: float
    degenerate: bool

    @property
    def symbols(self) -> np.ndarray:
        return np.array([p.gamma for p in self.points])


def build_constellation(modulator: TagModulator, dup_tol: float = 1e-12) -> Constellation:
    """Map every load to its reflection coefficient, in label order.

    Reports the minimum pairwise distance and the mean |Gamma|^2. A single
    load carries no information and is flagged as degenerate.
    """
    pts = tuple(reflection_coefficient(z, modulator.antenna_impedance)
                for z in modulator.load_set)
    g = np.array([p.gamma for p in pts])
    if len(g) > 1:
        d = np.abs(g[:, None] - g[None, :])
        d[np.diag_indices(len(g))] = np.inf
        dmin = float(d.min())
        if dmin <= dup_tol:
            i, j = np.unravel_index(np.argmin(d), d.shape)
            raise DuplicatePointError(f"loads {i} and {j} map to the same Gamma {g[i]}")
    else:
        dmin = math.inf
    return Constellation(pts, modulator.symbol_labels, dmin,
                         float(np.mean(np.abs(g) ** 2)), len(g) < 2)


CONSTELLATION_COLUMNS = ("label", "R_L", "X_L", "Gamma_R", "Gamma_I")


def export_constellation(modulator: TagModulator) -> str:
    """Plain-text rows: label, R_L, X_L, Gamma_R, Gamma_I (CSV with header)."""
    const = build_constellation(modulator)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CONSTELLATION_COLUMNS)
    for label, z, p in zip(const.labels, modulator.load_set, const.points):
        # labels are written quoted-safe as strings so leading zeros survive
        w.writerow([f"'{label}'", repr(z.resistance), repr(z.reactance),
                    repr(p.real_part), repr(p.imag_part)])
    return buf.getvalue()


def import_constellation(text: str, antenna: Impedance) -> TagModulator:
    """Inverse of :func:`export_constellation`. Loads are taken from the
    R_L/X_L columns; the Gamma columns are checked for consistency."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("no constellation rows")
    missing = set(CONSTELLATION_COLUMNS) - set(rows[0])
    if missing:
        raise ValueError(f"missing columns: {sorted(missing)}")
    loads, labels = [], []
    for r in rows:
        z = Impedance(float(r["R_L"]), float(r["X_L"]))
        g = reflection_coefficient(z, antenna).gamma
        stated = complex(float(r["Gamma_R"]), float(r["Gamma_I"]))
        if abs(g - stated) > 1e-9:
            raise ValueError(f"row {r['label']}: Gamma {stated} inconsistent with load {z.z}")
        loads.append(z)
        labels.append(r["label"].strip("'"))
    return TagModulator(antenna, tuple(loads), tuple(labels))
