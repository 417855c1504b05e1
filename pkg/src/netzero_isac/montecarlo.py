"""Sampling counterparts of the analytical engines.

Trials are cut into fixed-size blocks and block ``b`` always draws from the
stream keyed by (seed, purpose, b). Shards are only worker threads that pick
up blocks, and per-block partial sums are reduced in block order, so results
do not depend on the shard count at all.
"""

from __future__ import annotations

import csv
import gzip
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .fading import POWER_LAWS, FadingSpec, draw_envelope, draw_power, make_rng
from .link import capture_indicator
from .scenario import Scenario
from .ser import SerQuery
from .tag_modulation import Constellation, DuplicatePointError

# stream purposes, part of the RNG key
_DETECTION = 1
_SER = 2
_MGF = 3


@dataclass(frozen=True)
class MonteCarloConfig:
    trials: int = 10 ** 6
    seed: int = 0
    shards: int = 1
    block_size: int = 1 << 16

    def __post_init__(self):
        if self.trials < 1 or self.shards < 1 or self.block_size < 1:
            raise ValueError("trials, shards and block_size must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def blocks(self) -> list[tuple[int, int]]:
        """(block index, trials in block) pairs covering ``trials``."""
        count = -(-self.trials // self.block_size)
        return [(b, min(self.block_size, self.trials - b * self.block_size)) for b in range(count)]


def _map_blocks(mc: MonteCarloConfig, purpose: int, work: Callable[[np.random.Generator, int], object]):
    """Run ``work(rng, size)`` on every block; results come back in block order."""
    def one(block):
        b, size = block
        return work(make_rng(mc.seed, purpose, b), size)

    blocks = mc.blocks()
    if mc.shards == 1:
        return [one(blk) for blk in blocks]
    with ThreadPoolExecutor(max_workers=mc.shards) as pool:
        return list(pool.map(one, blocks))


def _se(p: np.ndarray | float, n: int):
    return np.sqrt(np.asarray(p) * (1 - np.asarray(p)) / n)


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------

def _draw_powers(scenario: Scenario, rng: np.random.Generator, size: int) -> np.ndarray:
    """Received backscatter power, shape (size, N)."""
    n = scenario.n_antennas
    cols = n if scenario.forward_link == "independent" else 1
    h_f = draw_envelope(scenario.forward, (size, cols), rng)
    h_b = np.column_stack([draw_envelope(spec, size, rng) for spec in scenario.backscatter])
    zeta = np.array([scenario.zeta(i) for i in range(n)])
    return zeta * (h_f * h_b) ** 2


@dataclass
class DetectionEstimate:
    p: np.ndarray
    se: np.ndarray
    p_loc: float
    p_loc_se: float
    trials: int
    seed: int


def empirical_detection(scenario: Scenario, mc: MonteCarloConfig) -> DetectionEstimate:
    """Capture frequencies per antenna and of at least ``required_count``
    simultaneous captures."""
    def work(rng, size):
        cap = capture_indicator(_draw_powers(scenario, rng, size), scenario.params)
        return cap.sum(axis=0, dtype=np.int64), int((cap.sum(axis=1) >= scenario.required_count).sum())

    parts = _map_blocks(mc, _DETECTION, work)
    counts = sum(c for c, _ in parts)
    loc = sum(k for _, k in parts)
    p = counts / mc.trials
    p_loc = loc / mc.trials
    return DetectionEstimate(p, _se(p, mc.trials), p_loc, float(_se(p_loc, mc.trials)), mc.trials, mc.seed)


# ---------------------------------------------------------------------------
# Correlation between antennas
# ---------------------------------------------------------------------------

class PearsonAccumulator:
    """Streaming Pearson correlation over columns. Entries with zero variance
    are reported as NaN (undefined)."""

    def __init__(self, columns: int):
        self.n = 0
        self.s = np.zeros(columns)
        self.ss = np.zeros((columns, columns))

    def update(self, data: np.ndarray) -> "PearsonAccumulator":
        data = np.asarray(data, dtype=float)
        self.n += data.shape[0]
        self.s += data.sum(axis=0)
        self.ss += data.T @ data
        return self

    def merge(self, other: "PearsonAccumulator") -> "PearsonAccumulator":
        self.n += other.n
        self.s += other.s
        self.ss += other.ss
        return self

    def matrix(self) -> np.ndarray:
        mean = self.s / self.n
        cov = self.ss / self.n - np.outer(mean, mean)
        var = np.diag(cov).copy()
        scale = np.max(np.abs(self.ss.diagonal()) / self.n, initial=0.0)
        defined = var > 1e-12 * max(scale, 1e-300)
        with np.errstate(invalid="ignore", divide="ignore"):
            rho = cov / np.sqrt(np.outer(var, var))
        rho = np.clip(rho, -1.0, 1.0)
        rho[~np.outer(defined, defined)] = np.nan
        idx = np.flatnonzero(defined)
        rho[idx, idx] = 1.0
        return rho


@dataclass
class CorrelationEstimate:
    capture: np.ndarray
    log_power: np.ndarray
    trials: int
    seed: int


def antenna_correlation(scenario: Scenario, mc: MonteCarloConfig) -> CorrelationEstimate:
    """Pearson correlation of capture indicators and of log received power
    between every pair of antennas (NaN where a variance vanishes)."""
    n = scenario.n_antennas
    if n < 2:
        raise ValueError("correlation needs at least two antennas")
    zeta = np.array([scenario.zeta(i) for i in range(n)])
    # log power is taken relative to zeta so the sums stay O(1)
    with np.errstate(divide="ignore"):
        log_zeta = np.log(zeta)

    def work(rng, size):
        power = _draw_powers(scenario, rng, size)
        cap = PearsonAccumulator(n).update(capture_indicator(power, scenario.params))
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.log(power) - log_zeta
        rel[~np.isfinite(rel)] = 0.0
        return cap, PearsonAccumulator(n).update(rel)

    parts = _map_blocks(mc, _DETECTION, work)
    cap, logp = PearsonAccumulator(n), PearsonAccumulator(n)
    for c, l in parts:
        cap.merge(c)
        logp.merge(l)
    return CorrelationEstimate(cap.matrix(), logp.matrix(), mc.trials, mc.seed)


# ---------------------------------------------------------------------------
# Symbol error rate
# ---------------------------------------------------------------------------

@dataclass
class SerEstimate:
    ser: float
    se: float
    errors: int
    trials: int
    seed: int
    effective_xi_factor: float = 1.0


def _check_points(points: np.ndarray, tol: float = 1e-12):
    d = np.abs(points[:, None] - points[None, :])
    d[np.diag_indices(len(points))] = np.inf
    if d.min() <= tol:
        raise DuplicatePointError("constellation has coincident points")


def empirical_ser(q: SerQuery, constellation: Constellation | Sequence[complex],
                  mc: MonteCarloConfig, mode: str = "ideal", power_law: str = "gamma2",
                  reference_gamma_sq: float | None = None) -> SerEstimate:
    """Symbol-level simulation of y = sqrt(Xi) h s + n with coherent ML detection.

    ``mode="ideal"`` rescales the constellation to unit mean energy, so Xi is
    the mean SNR. ``mode="tag"`` transmits the reflection points themselves,
    scaled by 1/sqrt(reference |Gamma|^2) (default: the largest |Gamma|^2 of
    the constellation); the resulting SNR offset is reported as
    ``effective_xi_factor`` = mean |Gamma_m|^2 / reference.

    Only the channel power |h_f|^2 |h_r|^2 matters under coherent detection,
    so h is drawn as a real amplitude.
    """
    if isinstance(constellation, Constellation):
        points = constellation.symbols
    else:
        points = np.asarray(constellation, dtype=complex)
    if len(points) != q.order:
        raise ValueError(f"constellation has {len(points)} points, query expects {q.order}")
    _check_points(points)
    if power_law not in POWER_LAWS:
        raise ValueError(f"power_law must be one of {POWER_LAWS}")
    energy = float(np.mean(np.abs(points) ** 2))
    if mode == "ideal":
        tx = points / math.sqrt(energy)
        factor = 1.0
    elif mode == "tag":
        ref = reference_gamma_sq if reference_gamma_sq is not None else float(np.max(np.abs(points) ** 2))
        if not ref > 0:
            raise ValueError("reference |Gamma|^2 must be > 0")
        tx = points / math.sqrt(ref)
        factor = energy / ref
    else:
        raise ValueError(f"mode must be 'ideal' or 'tag', got {mode!r}")

    fwd = FadingSpec(omega=q.omega_f)
    rcv = FadingSpec(omega=q.omega_r)

    def work(rng, size):
        x = draw_power(fwd, size, rng, power_law) * draw_power(rcv, size, rng, power_law)
        sent = rng.integers(0, q.order, size)
        noise = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) * math.sqrt(0.5)
        amp = np.sqrt(q.xi * x)
        y = amp * tx[sent] + noise
        with np.errstate(divide="ignore", invalid="ignore"):
            z = y / amp
        decided = np.argmin(np.abs(z[:, None] - tx[None, :]), axis=1)
        return int(np.count_nonzero(decided != sent))

    errors = sum(_map_blocks(mc, _SER, work))
    p = errors / mc.trials
    return SerEstimate(p, float(_se(p, mc.trials)), errors, mc.trials, mc.seed, factor)


# ---------------------------------------------------------------------------
# MGF of the SNR
# ---------------------------------------------------------------------------

@dataclass
class MgfEstimate:
    s: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    trials: int
    seed: int


def empirical_mgf(s_values: Sequence[float], mc: MonteCarloConfig, omega_f: float = 1.0,
                  omega_r: float = 1.0, xi: float = 1.0, power_law: str = "gamma2") -> MgfEstimate:
    """Sample mean of exp(-s gamma), gamma = Xi |h_f|^2 |h_r|^2, with one set
    of draws shared by every s."""
    s = np.asarray(s_values, dtype=float)
    fwd, rcv = FadingSpec(omega=omega_f), FadingSpec(omega=omega_r)

    def work(rng, size):
        g = xi * draw_power(fwd, size, rng, power_law) * draw_power(rcv, size, rng, power_law)
        e = np.exp(-np.outer(g, s))
        return e.sum(axis=0), (e * e).sum(axis=0)

    parts = _map_blocks(mc, _MGF, work)
    total = sum(a for a, _ in parts)
    total_sq = sum(b for _, b in parts)
    mean = total / mc.trials
    var = np.maximum(total_sq / mc.trials - mean ** 2, 0.0)
    return MgfEstimate(s, mean, np.sqrt(var / mc.trials), mc.trials, mc.seed)


# ---------------------------------------------------------------------------
# Trial-level dumps
# ---------------------------------------------------------------------------

@dataclass
class TrialRecord:
    trial: int
    power: tuple[float, ...]
    captured: tuple[int, ...]
    snr: float | None = None
    sent: int | None = None
    decided: int | None = None


def trial_records(scenario: Scenario, mc: MonteCarloConfig, limit: int = 1000,
                  q: SerQuery | None = None, symbols: Sequence[complex] | None = None
                  ) -> Iterator[TrialRecord]:
    """Per-trial records from the first block of the detection stream (the
    same draws :func:`empirical_detection` uses). When ``q`` and ``symbols``
    are given, each record also carries one symbol transmission from the SER
    stream, with ``symbols`` normalized to unit mean energy."""
    size = min(limit, mc.trials, mc.block_size)
    power = _draw_powers(scenario, make_rng(mc.seed, _DETECTION, 0), size)
    cap = capture_indicator(power, scenario.params)
    ser_cols = None
    if q is not None and symbols is not None:
        pts = np.asarray(symbols, dtype=complex)
        tx = pts / math.sqrt(np.mean(np.abs(pts) ** 2))
        rng = make_rng(mc.seed, _SER, 0)
        fwd, rcv = FadingSpec(omega=q.omega_f), FadingSpec(omega=q.omega_r)
        x = draw_power(fwd, size, rng, scenario.power_law) * draw_power(rcv, size, rng, scenario.power_law)
        sent = rng.integers(0, q.order, size)
        noise = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) * math.sqrt(0.5)
        amp = np.sqrt(q.xi * x)
        z = (amp * tx[sent] + noise) / amp
        decided = np.argmin(np.abs(z[:, None] - tx[None, :]), axis=1)
        ser_cols = (q.xi * x, sent, decided)
    for t in range(size):
        rec = TrialRecord(t, tuple(float(v) for v in power[t]), tuple(int(v) for v in cap[t]))
        if ser_cols is not None:
            rec.snr = float(ser_cols[0][t])
            rec.sent = int(ser_cols[1][t])
            rec.decided = int(ser_cols[2][t])
        yield rec


def trial_columns(n_antennas: int) -> list[str]:
    """trial, power_W_<i>..., captured_<i>..., snr, sent, decided."""
    return (["trial"] + [f"power_W_{i}" for i in range(n_antennas)]
            + [f"captured_{i}" for i in range(n_antennas)] + ["snr", "sent", "decided"])


def write_trial_dump(path, records: Sequence[TrialRecord] | Iterator[TrialRecord], n_antennas: int):
    """Gzip-compressed CSV with :func:`trial_columns`; absent SER fields are empty.
    The gzip header carries no timestamp, so equal records give equal bytes."""
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as gz, \
            io.TextIOWrapper(gz, newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trial_columns(n_antennas))
        for r in records:
            w.writerow([r.trial, *map(repr, r.power), *r.captured,
                        "" if r.snr is None else repr(r.snr),
                        "" if r.sent is None else r.sent,
                        "" if r.decided is None else r.decided])
