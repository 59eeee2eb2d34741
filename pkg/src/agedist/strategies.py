"""Closed-form evaluation of the three window-K baseline strategies.

All three strategies induce small Markov chains over a scalar summary of
the buffer when the interspeaking time is geometric and there are exactly
two importance levels.  S1 sends the oldest important packet in the most
recent K, S2 the newest important in the most recent K, and S3 the newest
important packet older than K slots (falling back to the oldest important
one).  The stationary distributions are reversible-chain closed forms; the
explicit transition matrices are also built here so tests can cross-check
against a numeric stationary solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Geometric, Model

# q = p makes the S1/S3 stationary ratio degenerate; switch to the limit form.
RATIO_SINGULARITY_TOL = 1e-9


@dataclass(frozen=True)
class StrategyCurvePoint:
    strategy: str
    K: int
    delta_e: float
    d: float
    pi: np.ndarray


def _binary_geometric_params(model: Model) -> tuple[float, float, float, float]:
    """(p, q, v1, v2) after validating the closed-form preconditions."""
    if model.v.size != 2:
        raise ValueError("closed-form strategies require exactly two importance values")
    if not isinstance(model.z, Geometric):
        raise ValueError("closed-form strategies require geometric interspeaking times")
    p = model.z.p
    q = model.v.probs[1]
    return p, q, model.v.values[0], model.v.values[1]


def _send_rate_distortion(model: Model, pi0: float) -> float:
    """D from the send-rate identity: unsent mass splits by importance level."""
    p, q, v1, v2 = _binary_geometric_params(model)
    return (1.0 - q - p * pi0) * v1 + (q - p * (1.0 - pi0)) * v2


# ---------------------------------------------------------------------------
# S1: oldest important within the window
# ---------------------------------------------------------------------------


def s1_stationary(model: Model, K: int) -> np.ndarray:
    p, q, _, _ = _binary_geometric_params(model)
    pb, qb = 1.0 - p, 1.0 - q
    pi = np.zeros(K + 1)
    if abs(qb / pb - 1.0) < RATIO_SINGULARITY_TOL:
        pi_K = p / (K * p + pb)
        pi[1:] = pi_K
    else:
        r = qb / pb
        pi_K = (1.0 - r) / (1.0 - (p / q) * r**K)
        pi[1:] = pi_K * r ** (K - np.arange(1, K + 1))
    pi[0] = (qb / q) * pi[1]
    return pi


def s1_point(model: Model, K: int) -> StrategyCurvePoint:
    if K < 1:
        raise ValueError("window size K must be >= 1")
    pi = s1_stationary(model, K)
    delta_e = float(np.arange(-1, K) @ pi + pi[0])  # sum (k-1) pi_k over k >= 1
    d = _send_rate_distortion(model, float(pi[0]))
    return StrategyCurvePoint("S1", K, delta_e, d, pi)


def s1_transition_matrix(model: Model, K: int) -> np.ndarray:
    """Explicit chain over {0..K}; z-sums collapsed with exact geometric tails."""
    p, q, _, _ = _binary_geometric_params(model)
    pb, qb = 1.0 - p, 1.0 - q
    P = np.zeros((K + 1, K + 1))

    def into(x: int, y: int) -> float:
        # from state x >= 1 to state y >= 1
        z0 = max(1, y - x + 1)
        tot = 0.0
        for z in range(z0, K - x + 1):
            tot += pb ** (z - 1) * p * qb ** (z - y + x - 1) * q
        zb = max(z0, K - x + 1)
        tot += q * qb ** (K - y) * pb ** (zb - 1)
        return tot

    for x in range(1, K + 1):
        for y in range(1, K + 1):
            P[x, y] = into(x, y)
        P[x, 0] = (qb / q) * P[x, 1]
    P[0, :] = P[1, :]
    return P


# ---------------------------------------------------------------------------
# S2: newest important within the window (i.i.d. chain)
# ---------------------------------------------------------------------------


def s2_stationary(model: Model, K: int) -> np.ndarray:
    p, q, _, _ = _binary_geometric_params(model)
    pb, qb = 1.0 - p, 1.0 - q
    pi = np.zeros(K + 1)
    a = np.arange(1, K + 1)
    pi[1:] = q * (pb * qb) ** (a - 1)
    pi[0] = 1.0 - pi[1:].sum()
    return pi


def s2_point(model: Model, K: int) -> StrategyCurvePoint:
    if K < 1:
        raise ValueError("window size K must be >= 1")
    pi = s2_stationary(model, K)
    delta_e = float(np.arange(-1, K) @ pi + pi[0])
    d = _send_rate_distortion(model, float(pi[0]))
    return StrategyCurvePoint("S2", K, delta_e, d, pi)


def s2_transition_matrix(model: Model, K: int) -> np.ndarray:
    pi = s2_stationary(model, K)
    return np.tile(pi, (K + 1, 1))


# ---------------------------------------------------------------------------
# S3: newest important older than K slots, else oldest important
# ---------------------------------------------------------------------------


def s3_stationary(model: Model, K: int) -> np.ndarray:
    p, q, _, _ = _binary_geometric_params(model)
    pb, qb = 1.0 - p, 1.0 - q
    r = qb / pb
    pi = np.zeros(K + 2)
    if abs(r - 1.0) < RATIO_SINGULARITY_TOL:
        interior = float(K)
    else:
        interior = r * (1.0 - r**K) / (1.0 - r)  # sum_{a=1..K} r^{K+1-a}
    pi_top = 1.0 / (1.0 + p * interior + (p * qb / q) * r**K)
    pi[K + 1] = pi_top
    pi[1 : K + 1] = p * pi_top * r ** (K + 1 - np.arange(1, K + 1))
    pi[0] = (qb / q) * pi[1]
    return pi


def s3_point(model: Model, K: int) -> StrategyCurvePoint:
    if K < 1:
        raise ValueError("window size K must be >= 1")
    p, q, _, _ = _binary_geometric_params(model)
    pbqb = (1.0 - p) * (1.0 - q)
    pi = s3_stationary(model, K)
    delta_e = float(np.arange(-1, K) @ pi[: K + 1] + pi[0])
    # state K+1 sends at age K-1+Z' with Z' geometric of rate 1 - pb*qb
    delta_e += float(pi[K + 1]) * (1.0 / (1.0 - pbqb) + K - 1)
    d = _send_rate_distortion(model, float(pi[0]))
    return StrategyCurvePoint("S3", K, delta_e, d, pi)


def s3_transition_matrix(model: Model, K: int) -> np.ndarray:
    p, q, _, _ = _binary_geometric_params(model)
    pb, qb = 1.0 - p, 1.0 - q
    denom = 1.0 - pb * qb
    n = K + 2
    P = np.zeros((n, n))
    for a in range(1, K + 1):
        for a2 in range(1, K + 1):
            if a <= a2:
                P[a, a2] = p * q * pb ** (a2 - a) / denom
            else:
                P[a, a2] = p * q * qb ** (a - a2) / denom
        P[a, K + 1] = q * pb ** (K - a + 1) / denom
        P[a, 0] = (qb / q) * P[a, 1]
    for a2 in range(1, K + 1):
        P[K + 1, a2] = p * q * qb ** (K - a2 + 1) / denom
    P[K + 1, 0] = (qb / q) * P[K + 1, 1]
    P[K + 1, K + 1] = 1.0 - P[K + 1, : K + 1].sum()
    P[0, :] = P[1, :]
    return P


# ---------------------------------------------------------------------------
# curves and simulation policies
# ---------------------------------------------------------------------------

_POINT_FN = {"S1": s1_point, "S2": s2_point, "S3": s3_point}


def strategy_point(model: Model, strategy: str, K: int) -> StrategyCurvePoint:
    try:
        fn = _POINT_FN[strategy.upper()]
    except KeyError:
        raise ValueError(f"unknown strategy {strategy!r}; expected S1, S2 or S3") from None
    return fn(model, K)


def strategy_curve(model: Model, strategy: str, k_range) -> list[StrategyCurvePoint]:
    return [strategy_point(model, strategy, K) for K in k_range]


def write_curve_csv(fh, points: list[StrategyCurvePoint]) -> None:
    fh.write("strategy,K,delta_e,d\n")
    for pt in points:
        fh.write(f"{pt.strategy},{pt.K},{pt.delta_e:.12g},{pt.d:.12g}\n")


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary vector of a row-stochastic matrix via a least-squares solve."""
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return pi


class SendLatestPolicy:
    """Always transmit the freshest packet; buffer size 1 suffices."""

    max_buffer = 1

    def __call__(self, entries) -> int:
        return len(entries)


class S1Policy:
    """Oldest important packet within the K most recent; else the freshest."""

    def __init__(self, model: Model, K: int):
        _binary_geometric_params(model)
        self.v_min = model.v.v_min
        self.max_buffer = K

    def __call__(self, entries) -> int:
        for j, v in enumerate(entries):
            if v > self.v_min:
                return j + 1
        return len(entries)


class S2Policy:
    """Newest important packet within the K most recent; else the freshest."""

    def __init__(self, model: Model, K: int):
        _binary_geometric_params(model)
        self.v_min = model.v.v_min
        self.max_buffer = K

    def __call__(self, entries) -> int:
        for j in range(len(entries) - 1, -1, -1):
            if entries[j] > self.v_min:
                return j + 1
        return len(entries)


class S3Policy:
    """Newest important packet older than K slots; else the oldest important.

    Ages matter here, so the buffer is kept untruncated: a packet at
    position j (1-based, oldest first) of a length-l buffer has age l - j.
    """

    def __init__(self, model: Model, K: int):
        _binary_geometric_params(model)
        self.v_min = model.v.v_min
        self.K = K
        self.max_buffer = None

    def __call__(self, entries) -> int:
        l = len(entries)
        oldest_important = 0
        for j in range(l, 0, -1):
            if entries[j - 1] > self.v_min:
                if l - j >= self.K:
                    return j
                oldest_important = j
        if oldest_important:
            return oldest_important
        return l
