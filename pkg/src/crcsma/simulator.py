"""Slot-level Monte Carlo of saturated stations contending over sensed channels.

The slot loop lives in a compiled kernel (``_simcore``); when the extension is
missing, or ``CRCSMA_PURE_PYTHON=1`` is set, a draw-for-draw identical Python
kernel is used instead. Both consume the same xoshiro256** stream, so results
do not depend on the backend.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

from . import _simcore_py
from .chain import MacParams, SpectrumParams
from .errors import ContractError, UndefinedEstimateError, ValidationError
from .metrics import Metrics

try:
    if os.environ.get("CRCSMA_PURE_PYTHON") == "1":
        raise ImportError("pure Python kernel forced")
    from . import _simcore as _kernel
    BACKEND = "cython"
except ImportError:
    _kernel = _simcore_py
    BACKEND = "python"

__all__ = [
    "BACKEND",
    "SimConfig",
    "SimStats",
    "MetricComparison",
    "ComparisonReport",
    "simulate",
    "estimate_pc",
    "estimate_throughput",
    "compare",
]

DEFAULT_WARMUP = 10_000
_SEED_LIMIT = 1 << 64


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    ``warmup_slots=None`` discards ``min(10_000, slots // 10)`` slots.
    ``shared_pu=False`` gives every station its own independent view of
    primary-user activity instead of one common ground truth.
    """

    mac: MacParams
    spectrum: SpectrumParams
    slots: int
    seed: int
    warmup_slots: int | None = None
    shared_pu: bool = True

    def __post_init__(self):
        if isinstance(self.slots, bool) or not isinstance(self.slots, int) or self.slots < 1:
            raise ValidationError(f"slots must be an integer >= 1, got {self.slots!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) \
                or not 0 <= self.seed < _SEED_LIMIT:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        warmup = self.warmup_slots
        if warmup is None:
            warmup = min(DEFAULT_WARMUP, self.slots // 10)
            object.__setattr__(self, "warmup_slots", warmup)
        if isinstance(warmup, bool) or not isinstance(warmup, int) or warmup < 0:
            raise ValidationError(f"warmup_slots must be an integer >= 0, got {warmup!r}")
        if warmup >= self.slots:
            raise ValidationError(f"warmup_slots ({warmup}) must be < slots ({self.slots})")


@dataclass(frozen=True)
class SimStats:
    """Counts over the measured (post-warmup) slots.

    ``attempts == successes + collisions``; an attempt collides when another
    secondary station used the same channel in that slot. ``pu_overlaps``
    counts attempts made on a channel a primary user actually held.
    """

    config: SimConfig
    attempts: int
    successes: int
    collisions: int
    idle_slots: int
    busy_blocked_slots: int
    measured_slots: int
    per_station_attempts: tuple[int, ...]
    pu_overlaps: int = 0
    occupied_channel_slots: int = 0
    backend: str = field(default=BACKEND, compare=False)

    @property
    def pu_occupancy(self) -> float:
        views = 1 if self.config.shared_pu else self.config.mac.n
        return self.occupied_channel_slots / (self.measured_slots * self.config.spectrum.c * views)

    @property
    def attempt_rate(self) -> float:
        """Per-station, per-slot attempt frequency (empirical ``tau``)."""
        return self.attempts / (self.measured_slots * self.config.mac.n)


def simulate(config: SimConfig, backend: str | None = None) -> SimStats:
    kernel = _kernel
    if backend == "python":
        kernel = _simcore_py
    elif backend == "cython":
        if BACKEND != "cython":
            raise ValidationError("compiled kernel is not available")
    elif backend is not None:
        raise ValidationError(f"unknown backend {backend!r}")
    mac, sp = config.mac, config.spectrum
    raw = kernel.run_slots(mac.n, mac.m, mac.w, sp.c, float(sp.alpha), float(sp.p_d),
                           float(sp.p_f), config.slots, config.warmup_slots, config.seed,
                           config.shared_pu)
    raw["per_station_attempts"] = tuple(int(x) for x in raw["per_station_attempts"])
    used = "python" if kernel is _simcore_py else "cython"
    return SimStats(config=config, backend=used, **raw)


def estimate_pc(stats: SimStats) -> float:
    if stats.attempts <= 0:
        raise UndefinedEstimateError("no transmission attempts were measured")
    return stats.collisions / stats.attempts


def estimate_throughput(stats: SimStats) -> float:
    if stats.measured_slots <= 0:
        raise UndefinedEstimateError("no slots were measured")
    return stats.successes / stats.measured_slots


def binomial_se(p: float, trials: int) -> float:
    if trials <= 0:
        return float("nan")
    p = min(1.0, max(0.0, p))
    return math.sqrt(p * (1.0 - p) / trials)


@dataclass(frozen=True)
class MetricComparison:
    name: str
    analytic: float
    empirical: float
    std_error: float
    tolerance: float

    @property
    def delta(self) -> float:
        return abs(self.analytic - self.empirical)

    @property
    def passed(self) -> bool:
        # NaN deltas (undefined estimates) never pass
        return self.delta <= self.tolerance


@dataclass(frozen=True)
class ComparisonReport:
    entries: tuple[MetricComparison, ...]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def failed(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries if not e.passed)

    def __getitem__(self, name: str) -> MetricComparison:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


COMPARED_METRICS = ("p_c", "tau", "throughput")


def compare(analytic: Metrics, empirical: SimStats, tolerance: float,
            metrics: tuple[str, ...] = COMPARED_METRICS) -> ComparisonReport:
    """Absolute differences between the analytic and simulated figures.

    With no measured attempts the empirical collision probability counts as 0
    when the model also predicts no attempts, and as undefined (failing)
    otherwise.
    """
    if tolerance < 0:
        raise ValidationError(f"tolerance must be >= 0, got {tolerance}")
    cfg = empirical.config
    if analytic.mac is not None and analytic.mac != cfg.mac:
        raise ContractError(f"MAC parameters differ: {analytic.mac} vs {cfg.mac}")
    if analytic.spectrum is not None and analytic.spectrum != cfg.spectrum:
        raise ContractError(f"spectrum parameters differ: {analytic.spectrum} vs {cfg.spectrum}")
    if analytic.n != cfg.mac.n:
        raise ContractError(f"station counts differ: {analytic.n} vs {cfg.mac.n}")

    entries = []
    for name in metrics:
        if name == "p_c":
            if empirical.attempts > 0:
                value = estimate_pc(empirical)
                se = binomial_se(value, empirical.attempts)
            elif analytic.tau == 0.0:
                value, se = 0.0, 0.0
            else:
                value, se = float("nan"), float("nan")
            entries.append(MetricComparison("p_c", analytic.p_c, value, se, tolerance))
        elif name == "tau":
            value = empirical.attempt_rate
            se = binomial_se(value, empirical.measured_slots * cfg.mac.n)
            entries.append(MetricComparison("tau", analytic.tau, value, se, tolerance))
        elif name == "throughput":
            value = estimate_throughput(empirical)
            se = binomial_se(value, empirical.measured_slots)
            entries.append(MetricComparison("throughput", analytic.throughput, value, se,
                                            tolerance))
        else:
            raise ValidationError(f"unknown metric {name!r}")
    return ComparisonReport(tuple(entries))
