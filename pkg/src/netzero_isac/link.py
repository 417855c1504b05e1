"""Deterministic link budget: unit conversions, path loss, received backscatter
power, SNR scale and the antenna capture indicator."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .numerics import DomainError


# ---------------------------------------------------------------------------
# Unit conversions
# ---------------------------------------------------------------------------

def _out(arr):
    return float(arr) if arr.ndim == 0 else arr


def db_to_linear(db):
    return _out(10.0 ** (np.asarray(db, dtype=float) / 10.0))


def linear_to_db(value):
    arr = np.asarray(value, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"dB of nonpositive value {value!r}")
    return _out(10.0 * np.log10(arr))


def dbm_to_watt(dbm):
    return _out(1e-3 * 10.0 ** (np.asarray(dbm, dtype=float) / 10.0))


def watt_to_dbm(watt):
    return _out(np.asarray(linear_to_db(np.asarray(watt, dtype=float)), dtype=float) + 30.0)


dbi_to_linear = db_to_linear
linear_to_dbi = linear_to_db

_CONVERSIONS = {
    "dBm->W": dbm_to_watt,
    "W->dBm": watt_to_dbm,
    "dBi->linear": dbi_to_linear,
    "linear->dBi": linear_to_dbi,
    "dB->linear": db_to_linear,
    "linear->dB": linear_to_db,
}


def convert(value, direction: str):
    """Dispatch on a direction string such as ``"dBm->W"``."""
    try:
        fn = _CONVERSIONS[direction]
    except KeyError:
        raise ValueError(f"unknown conversion {direction!r}; "
                         f"expected one of {sorted(_CONVERSIONS)}") from None
    return fn(value)


# ---------------------------------------------------------------------------
# Parameters and geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemParams:
    """Scalar link constants, all linear / SI.

    ``g_r_i`` is either one gain shared by every AP receive antenna or a tuple
    with one entry per antenna. ``ref_loss`` (linear) is the
    loss already incurred at the reference distance; 1.0 reproduces the bare
    power law. ``n0`` is only
    needed for SNR computations.
    """

    chi: float = 0.5
    p_s: float = 1.0
    g_tag: float = 1.0
    g_t: float = 1.0
    g_r_i: float | tuple[float, ...] = 1.0
    g_r: float = 1.0
    eta: float = 1.8
    d0: float = 1.0
    p_th: float = 10.0 ** -10.5
    n0: float | None = None
    ref_loss: float = 1.0

    def __post_init__(self):
        if not 0 < self.chi <= 1:
            raise ValueError(f"chi must lie in (0, 1], got {self.chi}")
        gains = [self.g_tag, self.g_t, self.g_r]
        gains += list(self.g_r_i) if isinstance(self.g_r_i, tuple) else [self.g_r_i]
        for name, v in [("p_s", self.p_s), ("eta", self.eta), ("d0", self.d0),
                        ("p_th", self.p_th), ("ref_loss", self.ref_loss)] + \
                [("gain", g) for g in gains]:
            if not v > 0:
                raise ValueError(f"{name} must be > 0, got {v}")
        if self.n0 is not None and not self.n0 > 0:
            raise ValueError(f"n0 must be > 0, got {self.n0}")

    def rx_gain(self, i: int) -> float:
        return self.g_r_i[i] if isinstance(self.g_r_i, tuple) else self.g_r_i

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class Geometry:
    """Link distances in meters.

    ``d_f`` is one transmitter-to-tag distance, or a tuple with one entry per
    antenna when each antenna illuminates the tag over its own forward path.
    """

    d_f: float | tuple[float, ...]
    d_b: tuple[float, ...]
    d_r: float | None = None

    @property
    def n_antennas(self) -> int:
        return len(self.d_b)

    def forward_distance(self, i: int) -> float:
        return self.d_f[i] if isinstance(self.d_f, tuple) else self.d_f

    def common_forward_distance(self) -> float:
        """The single forward distance; per-antenna values must all agree."""
        if not isinstance(self.d_f, tuple):
            return self.d_f
        if len(set(self.d_f)) != 1:
            raise ValueError("per-antenna forward distances differ; no common d_f")
        return self.d_f[0]

    @classmethod
    def from_coordinates(cls, tx: Sequence[float], rx: Sequence[Sequence[float]],
                         tag: Sequence[float], receiver: Sequence[float] | None = None):
        """Distances from 2-D positions (meters)."""
        tag = np.asarray(tag, dtype=float)
        d_f = float(np.linalg.norm(np.asarray(tx, dtype=float) - tag))
        d_b = tuple(float(np.linalg.norm(np.asarray(p, dtype=float) - tag)) for p in rx)
        d_r = None if receiver is None else float(np.linalg.norm(np.asarray(receiver, float) - tag))
        return cls(d_f, d_b, d_r)

    def validate(self, params: SystemParams, required_count: int | None = None) -> list[str]:
        """Return a list of problems (empty when the geometry is usable)."""
        problems = []
        if isinstance(self.d_f, tuple):
            named = [(f"d_f[{i}]", d) for i, d in enumerate(self.d_f)]
            if len(self.d_f) != self.n_antennas:
                problems.append("d_f has a different length than d_b")
        else:
            named = [("d_f", self.d_f)]
        named += [(f"d_b[{i}]", d) for i, d in enumerate(self.d_b)]
        if self.d_r is not None:
            named.append(("d_r", self.d_r))
        for name, d in named:
            if not d >= params.d0:
                problems.append(f"{name}={d} m is below the reference distance d0={params.d0} m")
        if required_count is not None and self.n_antennas < required_count:
            problems.append(f"{self.n_antennas} antennas cannot meet required_count={required_count}")
        if isinstance(params.g_r_i, tuple) and len(params.g_r_i) != self.n_antennas:
            problems.append("g_r_i has a different length than d_b")
        return problems


@dataclass
class ChannelDraw:
    """Fading envelopes for a batch of trials.

    ``h_f`` has shape (trials, N) or (trials, 1) when every antenna sees the
    same forward link; ``h_b`` has shape (trials, N); ``h_r`` shape (trials,).
    """

    h_f: np.ndarray
    h_b: np.ndarray
    h_r: np.ndarray | None = None

    def __post_init__(self):
        self.h_f = np.atleast_2d(np.asarray(self.h_f, dtype=float))
        self.h_b = np.atleast_2d(np.asarray(self.h_b, dtype=float))
        if np.any(self.h_f < 0) or np.any(self.h_b < 0):
            raise ValueError("envelopes must be nonnegative")


# ---------------------------------------------------------------------------
# Link budget
# ---------------------------------------------------------------------------

def path_loss(d, params: SystemParams):
    """Linear power gain (d / d0)^(-eta) / ref_loss."""
    arr = np.asarray(d, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"distance must be > 0, got {d!r}")
    out = (arr / params.d0) ** (-params.eta) / params.ref_loss
    return float(out) if not arr.ndim else out


def _check_gamma_sq(gamma_sq):
    if not 0.0 <= gamma_sq <= 1.0:
        raise ValueError(f"|Gamma|^2 must lie in [0, 1], got {gamma_sq}")


def backscatter_gain(i: int, gamma_sq: float, geom: Geometry, params: SystemParams) -> float:
    """Everything in the received-power product except the fading term:
    chi P_s G_tag G_T G_R^i L(d_f) L(d_b^i) |Gamma|^2, in watts. Received power
    at antenna i is this value times (h_f h_b^i)^2."""
    _check_gamma_sq(gamma_sq)
    return (params.chi * params.p_s * params.g_tag * params.g_t * params.rx_gain(i)
            * path_loss(geom.forward_distance(i), params) * path_loss(geom.d_b[i], params)
            * gamma_sq)


def received_power(i: int, gamma_sq: float, draw: ChannelDraw, geom: Geometry,
                   params: SystemParams) -> np.ndarray:
    """Backscattered power (W) at AP antenna ``i`` for every trial in ``draw``."""
    hf = draw.h_f[:, i] if draw.h_f.shape[1] > 1 else draw.h_f[:, 0]
    hb = draw.h_b[:, i]
    return backscatter_gain(i, gamma_sq, geom, params) * (hf * hb) ** 2


def snr_scale(gamma_sq: float, geom: Geometry, params: SystemParams) -> float:
    """Xi = chi P_s G_tag G_T G_R L(d_f) L(d_r) |Gamma|^2 / N0; the receiver SNR
    of a trial is Xi (h_f h_r)^2."""
    _check_gamma_sq(gamma_sq)
    if params.n0 is None:
        raise ValueError("n0 is required for SNR computations")
    if geom.d_r is None:
        raise ValueError("geometry has no receiver distance d_r")
    return (params.chi * params.p_s * params.g_tag * params.g_t * params.g_r
            * path_loss(geom.common_forward_distance(), params) * path_loss(geom.d_r, params)
            * gamma_sq / params.n0)


def capture_indicator(p_r, params: SystemParams):
    """1 where the received power reaches the sensitivity threshold (ties count)."""
    arr = np.asarray(p_r, dtype=float)
    out = (arr >= params.p_th).astype(np.int8)
    return int(out) if not arr.ndim else out
