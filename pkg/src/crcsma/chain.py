"""Tri-dimensional backoff/sensing Markov chain and its stationary solution.

A state ``(i, k, s)`` pairs the backoff stage ``i`` and counter ``k`` that a
station holds at the start of a slot with the number ``s`` of channels it
perceives busy in that same slot. One transition is: the MAC reacts to ``s``
(decrement, freeze, or transmit), then the channel sub-chain steps ``s -> s'``.
States are laid out stage-major, then counter, with ``s`` varying fastest.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse import linalg as splinalg

from .errors import FixedPointError, NonErgodicError, SolverError, ValidationError

__all__ = [
    "MacParams",
    "SpectrumParams",
    "ChainState",
    "CrossLayerChain",
    "StationaryDistribution",
    "FixedPointResult",
    "perceived_busy_prob",
    "channel_subchain_row",
    "channel_subchain_matrix",
    "build_chain",
    "stationary_distribution",
    "power_iteration",
    "closed_class_count",
    "marginals",
    "solve_fixed_point",
]

ROW_SUM_TOL = 1e-12
RESIDUAL_TOL = 1e-10


def _check_int(name, value, minimum):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")


def _check_prob(name, value):
    if not isinstance(value, (int, float, np.floating)) or not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must be a probability in [0, 1], got {value!r}")


@dataclass(frozen=True)
class MacParams:
    """Saturated CSMA/CA: ``n`` stations, stages ``0..m``, windows ``2**i * w``."""

    n: int
    m: int
    w: int

    def __post_init__(self):
        _check_int("n", self.n, 1)
        _check_int("m", self.m, 0)
        _check_int("w", self.w, 1)

    def window(self, stage: int) -> int:
        return self.w << stage

    @property
    def mac_states(self) -> int:
        return self.w * ((1 << (self.m + 1)) - 1)


@dataclass(frozen=True)
class SpectrumParams:
    c: int
    alpha: float
    p_d: float
    p_f: float

    def __post_init__(self):
        _check_int("c", self.c, 1)
        _check_prob("alpha", self.alpha)
        _check_prob("p_d", self.p_d)
        _check_prob("p_f", self.p_f)


def perceived_busy_prob(spectrum: SpectrumParams) -> float:
    """Chance that a single channel looks busy under imperfect sensing."""
    q = spectrum.alpha * spectrum.p_d + (1.0 - spectrum.alpha) * spectrum.p_f
    return min(1.0, max(0.0, q))


def channel_subchain_row(s: int, spectrum: SpectrumParams) -> dict[int, float]:
    """Birth-death step of the perceived-busy count.

    One channel, picked uniformly, is re-sensed busy with probability ``q``.
    Returns ``{s': probability}`` over the reachable neighbours.
    """
    c = spectrum.c
    if not 0 <= s <= c:
        raise IndexError(f"busy count {s} outside [0, {c}]")
    q = perceived_busy_prob(spectrum)
    up = (c - s) / c * q
    down = s / c * (1.0 - q)
    row = {s: 1.0 - up - down}
    if s < c:
        row[s + 1] = up
    if s > 0:
        row[s - 1] = down
    return row


def channel_subchain_matrix(spectrum: SpectrumParams) -> np.ndarray:
    c = spectrum.c
    r = np.zeros((c + 1, c + 1))
    for s in range(c + 1):
        for t, prob in channel_subchain_row(s, spectrum).items():
            r[s, t] = prob
    return r


class ChainState(NamedTuple):
    i: int
    k: int
    s: int


@dataclass(frozen=True, eq=False)
class CrossLayerChain:
    mac: MacParams
    spectrum: SpectrumParams
    p_used: float
    transitions: sparse.csr_matrix = field(repr=False)

    @property
    def c(self) -> int:
        return self.spectrum.c

    @property
    def total_states(self) -> int:
        return self.transitions.shape[0]

    def index(self, i: int, k: int, s: int) -> int:
        mac, c = self.mac, self.spectrum.c
        if not (0 <= i <= mac.m and 0 <= k < mac.window(i) and 0 <= s <= c):
            raise IndexError(f"state {(i, k, s)} outside the state space")
        return _stage_offset(mac.w, i) * (c + 1) + k * (c + 1) + s

    @property
    def states(self) -> list[ChainState]:
        stage, counter, busy = _state_arrays(self.mac.m, self.mac.w, self.spectrum.c)
        return [ChainState(int(i), int(k), int(s)) for i, k, s in zip(stage, counter, busy)]

    @property
    def state_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(stage, counter, busy)`` integer arrays aligned with the state order."""
        return _state_arrays(self.mac.m, self.mac.w, self.spectrum.c)

    @property
    def attempt_mask(self) -> np.ndarray:
        """States in which the station transmits this slot (``k == 0``, ``s < C``)."""
        _, counter, busy = self.state_arrays
        return (counter == 0) & (busy < self.spectrum.c)


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    pi: np.ndarray
    residual: float
    method: str = "direct"


def _stage_offset(w: int, i: int) -> int:
    return w * ((1 << i) - 1)


@functools.lru_cache(maxsize=64)
def _state_arrays(m: int, w: int, c: int):
    stage = np.repeat(np.arange(m + 1), [w << i for i in range(m + 1)])
    counter = np.concatenate([np.arange(w << i) for i in range(m + 1)])
    stage = np.repeat(stage, c + 1)
    counter = np.repeat(counter, c + 1)
    busy = np.tile(np.arange(c + 1), w * ((1 << (m + 1)) - 1))
    for arr in (stage, counter, busy):
        arr.setflags(write=False)
    return stage, counter, busy


@functools.lru_cache(maxsize=32)
def _chain_parts(m: int, w: int, c: int, q: float):
    """Split the transition matrix as ``fixed + (1-p) * success + p * collision``."""
    spectrum = SpectrumParams(c=c, alpha=1.0, p_d=q, p_f=q)
    r = channel_subchain_matrix(spectrum)
    stage, counter, busy = _state_arrays(m, w, c)
    total = stage.size
    cp1 = c + 1
    idx = np.arange(total)

    def expand(src, mac_dst, weight):
        # MAC target (stage, counter) index `mac_dst` with weight, then channel step
        rows, cols, vals = [], [], []
        s_from = busy[src]
        for delta in (-1, 0, 1):
            s_to = s_from + delta
            ok = (s_to >= 0) & (s_to <= c)
            prob = np.zeros(src.size)
            prob[ok] = r[s_from[ok], s_to[ok]]
            keep = ok & (prob > 0) & (weight > 0)
            rows.append(src[keep])
            cols.append(mac_dst[keep] * cp1 + s_to[keep])
            vals.append(weight[keep] * prob[keep])
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)

    mac_index = idx // cp1  # flat (stage, counter) index
    idle = busy < c

    # decrement on an idle slot, freeze when every channel looks busy
    dec = idle & (counter > 0)
    frz = ~idle
    fixed = [expand(idx[dec], mac_index[dec] - 1, np.ones(dec.sum())),
             expand(idx[frz], mac_index[frz], np.ones(frz.sum()))]

    tx = np.flatnonzero(idle & (counter == 0))
    succ, coll = [], []
    w0 = w
    for k2 in range(w0):
        succ.append(expand(tx, np.full(tx.size, k2), np.full(tx.size, 1.0 / w0)))
    next_stage = np.minimum(stage[tx] + 1, m)
    next_win = w << next_stage
    for k2 in range(int(next_win.max()) if tx.size else 0):
        has = next_win > k2
        src = tx[has]
        dst = np.array([_stage_offset(w, j) for j in next_stage[has]], dtype=np.int64) + k2
        coll.append(expand(src, dst, 1.0 / next_win[has]))

    def to_csr(parts):
        if not parts:
            return sparse.csr_matrix((total, total))
        rows = np.concatenate([p[0] for p in parts])
        cols = np.concatenate([p[1] for p in parts])
        vals = np.concatenate([p[2] for p in parts])
        mat = sparse.coo_matrix((vals, (rows, cols)), shape=(total, total)).tocsr()
        mat.sum_duplicates()
        return mat

    return to_csr(fixed), to_csr(succ), to_csr(coll)


def build_chain(mac: MacParams, spectrum: SpectrumParams, p: float) -> CrossLayerChain:
    """Assemble the row-stochastic transition matrix for collision probability ``p``."""
    _check_prob("p", p)
    q = perceived_busy_prob(spectrum)
    fixed, succ, coll = _chain_parts(mac.m, mac.w, spectrum.c, q)
    mat = fixed + (1.0 - p) * succ + p * coll
    mat = sparse.csr_matrix(mat)
    mat.eliminate_zeros()
    return CrossLayerChain(mac=mac, spectrum=spectrum, p_used=float(p), transitions=mat)


def _as_matrix(chain_or_matrix) -> sparse.csr_matrix:
    mat = getattr(chain_or_matrix, "transitions", chain_or_matrix)
    mat = sparse.csr_matrix(mat, dtype=float)
    if mat.shape[0] != mat.shape[1]:
        raise ValidationError(f"transition matrix must be square, got {mat.shape}")
    if mat.nnz and mat.data.min() < 0:
        raise ValidationError("transition matrix has negative entries")
    sums = np.asarray(mat.sum(axis=1)).ravel()
    bad = np.abs(sums - 1.0).max(initial=0.0)
    if bad > ROW_SUM_TOL:
        raise ValidationError(f"transition matrix is not row-stochastic (max |row sum - 1| = {bad:.3g})")
    mat.eliminate_zeros()
    return mat


def _closed_classes(mat: sparse.csr_matrix) -> np.ndarray:
    """Labels of the closed communicating classes, plus the per-state labels."""
    _, labels = csgraph.connected_components(mat, directed=True, connection="strong")
    coo = mat.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    closed = np.setdiff1d(np.unique(labels), labels[coo.row[leaving]])
    return closed, labels


def closed_class_count(mat) -> int:
    """Number of closed communicating classes of the transition graph."""
    return int(_closed_classes(sparse.csr_matrix(mat))[0].size)


def _residual(mat, pi) -> float:
    return float(np.abs(mat.T @ pi - pi).max(initial=0.0))


def power_iteration(chain_or_matrix, start=None, tol: float = 1e-12,
                    max_iter: int = 1_000_000) -> StationaryDistribution:
    """Iterate ``pi <- pi P`` until successive iterates differ by < ``tol``."""
    mat = _as_matrix(chain_or_matrix)
    n = mat.shape[0]
    pi = np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=float).copy()
    if pi.shape != (n,) or pi.min() < 0 or not math.isclose(pi.sum(), 1.0, abs_tol=1e-12):
        raise ValidationError("start must be a probability vector of matching length")
    mat_t = mat.T.tocsr()
    delta = math.inf
    for _ in range(max_iter):
        nxt = mat_t @ pi
        delta = float(np.abs(nxt - pi).max())
        pi = nxt
        if delta < tol:
            pi /= pi.sum()
            return StationaryDistribution(pi=pi, residual=_residual(mat, pi), method="power")
    raise SolverError(f"power iteration did not converge in {max_iter} steps", residual=delta)


def stationary_distribution(chain_or_matrix) -> StationaryDistribution:
    """Unique stationary vector of a chain with a single closed class.

    Solves ``(P^T - I) pi = 0`` with the balance equation of one recurrent
    state replaced by ``pi_j = 1``, then normalises. Falls back to power
    iteration if the direct solution misses the residual tolerance.
    """
    mat = _as_matrix(chain_or_matrix)
    n = mat.shape[0]
    closed, labels = _closed_classes(mat)
    if closed.size != 1:
        raise NonErgodicError(
            f"chain has {closed.size} closed classes; stationary law is not unique")
    # any state of the closed class is recurrent, hence has positive mass
    pin = int(np.flatnonzero(labels == closed[0])[0])

    system = (mat.T - sparse.identity(n, format="csr")).tocoo()
    keep = system.row != pin
    rows = np.append(system.row[keep], pin)
    cols = np.append(system.col[keep], pin)
    vals = np.append(system.data[keep], 1.0)
    a = sparse.csc_matrix((vals, (rows, cols)), shape=(n, n))
    rhs = np.zeros(n)
    rhs[pin] = 1.0
    try:
        pi = np.atleast_1d(splinalg.spsolve(a, rhs))
        ok = bool(np.all(np.isfinite(pi))) and pi.sum() > 0
    except RuntimeError:
        ok = False
    if ok:
        pi = pi / pi.sum()
        if pi.min() < -1e-12:
            ok = False
        else:
            pi = np.clip(pi, 0.0, None)
            pi /= pi.sum()
            residual = _residual(mat, pi)
            if residual <= RESIDUAL_TOL:
                return StationaryDistribution(pi=pi, residual=residual, method="direct")
    result = power_iteration(mat)
    if result.residual > RESIDUAL_TOL:
        raise SolverError("stationary solve missed the residual tolerance", residual=result.residual)
    return result


def marginals(pi, chain: CrossLayerChain) -> tuple[list[np.ndarray], np.ndarray]:
    """MAC marginal (one array per stage, indexed by counter) and busy-count marginal."""
    vec = getattr(pi, "pi", pi)
    c = chain.spectrum.c
    grid = np.asarray(vec).reshape(-1, c + 1)
    mac_flat = grid.sum(axis=1)
    mac = []
    for i in range(chain.mac.m + 1):
        start = _stage_offset(chain.mac.w, i)
        mac.append(mac_flat[start:start + chain.mac.window(i)])
    return mac, grid.sum(axis=0)


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    """Converged chain solution.

    ``p_c`` is the collision probability baked into the chain at convergence;
    ``p_c_oneshot`` recomputes it from the final ``tau``.
    """

    stationary: StationaryDistribution
    tau: float
    p_c: float
    iterations: int
    chain: CrossLayerChain
    p_c_oneshot: float

    def __iter__(self):
        return iter((self.stationary, self.tau, self.p_c, self.iterations))


def _blocked_solution(mac, spectrum):
    # q == 1: every (i, k, C) is absorbing, so there is no unique stationary law.
    # Report the law of a freshly started station: stage 0, counter uniform.
    chain = build_chain(mac, spectrum, 0.0)
    pi = np.zeros(chain.total_states)
    for k in range(mac.w):
        pi[chain.index(0, k, spectrum.c)] = 1.0 / mac.w
    st = StationaryDistribution(pi=pi, residual=_residual(chain.transitions, pi), method="blocked")
    return FixedPointResult(st, 0.0, 0.0, 0, chain, 0.0)


def solve_fixed_point(mac: MacParams, spectrum: SpectrumParams, damping: float = 0.5,
                      tol: float = 1e-9, max_iter: int = 500) -> FixedPointResult:
    """Close the loop between the chain's attempt rate and the collision probability.

    Damped Picard iteration ``p <- (1 - damping) p + damping (1 - (1 - tau(p))**(n-1))``
    from ``p = 0``.
    """
    if perceived_busy_prob(spectrum) >= 1.0:
        return _blocked_solution(mac, spectrum)
    p = 0.0
    history = [p]
    for it in range(1, max_iter + 1):
        chain = build_chain(mac, spectrum, p)
        st = stationary_distribution(chain)
        tau = float(st.pi[chain.attempt_mask].sum())
        target = 1.0 - (1.0 - tau) ** (mac.n - 1)
        p_new = min(1.0, max(0.0, (1.0 - damping) * p + damping * target))
        history.append(p_new)
        if abs(p_new - p) < tol:
            chain = build_chain(mac, spectrum, p_new)
            st = stationary_distribution(chain)
            tau = float(st.pi[chain.attempt_mask].sum())
            oneshot = 1.0 - (1.0 - tau) ** (mac.n - 1)
            return FixedPointResult(st, tau, p_new, it, chain, oneshot)
        p = p_new
    raise FixedPointError(f"fixed point did not converge in {max_iter} iterations",
                          last_iterates=history[-2:])
