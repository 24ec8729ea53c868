"""Attempt, collision and throughput figures derived from a solved chain."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chain import CrossLayerChain, MacParams, SpectrumParams, solve_fixed_point
from .errors import DomainError, ValidationError

__all__ = [
    "ThroughputMode",
    "Metrics",
    "transmission_prob",
    "transmission_prob_factored",
    "collision_prob",
    "event_probs",
    "throughput",
    "evaluate",
]


class ThroughputMode(str, enum.Enum):
    # ratio form with the slot-duration weight
    EQ16 = "eq16"
    # closed form n*tau*(1-tau)**(n-1), the default
    EQ20 = "eq20"


@dataclass(frozen=True)
class Metrics:
    tau: float
    p_c: float
    p_tr: float
    p_fr: float
    p_coll_slot: float
    throughput: float
    n: int
    rho: float = 1.0
    mode: ThroughputMode = ThroughputMode.EQ20
    mac: MacParams | None = None
    spectrum: SpectrumParams | None = None
    p_c_oneshot: float = float("nan")
    iterations: int = 0
    residual: float = float("nan")


def _check_tau_n(tau, n):
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau must lie in [0, 1], got {tau}")
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValidationError(f"n must be an integer >= 1, got {n!r}")


def transmission_prob(pi, chain: CrossLayerChain) -> float:
    """Stationary mass on states with a zero counter and at least one idle channel."""
    vec = np.asarray(getattr(pi, "pi", pi))
    return float(vec[chain.attempt_mask].sum())


def transmission_prob_factored(mac_marginal: Sequence[Sequence[float]],
                               channel_marginal: Sequence[float]) -> float:
    """Product of the zero-counter mass and the idle-channel mass.

    ``mac_marginal[i][k]`` is the probability of stage ``i``, counter ``k``;
    ``channel_marginal[s]`` that of ``s`` busy channels.
    """
    chan = np.asarray(channel_marginal, dtype=float)
    zero_counter = float(sum(stage[0] for stage in mac_marginal))
    return zero_counter * float(chan[:-1].sum())


def collision_prob(tau: float, n: int) -> float:
    _check_tau_n(tau, n)
    return 1.0 - (1.0 - tau) ** (n - 1)


def event_probs(tau: float, n: int) -> tuple[float, float, float]:
    """``(success, empty, collision)`` probabilities of a slot."""
    _check_tau_n(tau, n)
    p_tr = n * tau * (1.0 - tau) ** (n - 1)
    p_fr = (1.0 - tau) ** n
    return p_tr, p_fr, 1.0 - p_tr - p_fr


def throughput(tau: float, n: int, rho: float = 1.0,
               mode: ThroughputMode | str = ThroughputMode.EQ20) -> float:
    mode = ThroughputMode(mode)
    p_tr, p_fr, p_c = event_probs(tau, n)
    if mode is ThroughputMode.EQ20:
        return p_tr
    if not rho > 0:
        raise DomainError(f"rho must be > 0 in eq16 mode, got {rho}")
    return rho * p_tr / (rho * p_tr + p_fr + p_c)


def evaluate(mac: MacParams, spectrum: SpectrumParams, rho: float = 1.0,
             mode: ThroughputMode | str = ThroughputMode.EQ20) -> Metrics:
    """Solve the fixed point for one configuration and collect every metric."""
    mode = ThroughputMode(mode)
    sol = solve_fixed_point(mac, spectrum)
    p_tr, p_fr, p_coll = event_probs(sol.tau, mac.n)
    return Metrics(
        tau=sol.tau,
        p_c=sol.p_c,
        p_tr=p_tr,
        p_fr=p_fr,
        p_coll_slot=p_coll,
        throughput=throughput(sol.tau, mac.n, rho, mode),
        n=mac.n,
        rho=rho,
        mode=mode,
        mac=mac,
        spectrum=spectrum,
        p_c_oneshot=sol.p_c_oneshot,
        iterations=sol.iterations,
        residual=sol.stationary.residual,
    )
