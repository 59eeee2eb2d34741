"""Monte Carlo simulation of the discrete-time model; the universal oracle.

Randomness comes from numpy's Philox counter generator, split into two
documented substreams of the config seed via ``SeedSequence.spawn``:
stream 0 drives packet arrivals, stream 1 drives timing.  For geometric
interspeaking times the timing stream is consumed as one Bernoulli success
indicator per slot in *both* the direct and the erasure-commitment modes,
so the two modes see identical arrival and speaking processes under a
shared seed; with a stationary policy their trajectories then coincide
slot for slot.  Cross-language reproducibility is statistical only.

Distortion is charged the moment a packet becomes permanently unsendable:
either a selection passes over it or it falls off the policy's K-window.
Excess age is recorded per speaking instant; standard errors come from
batch means over equal slot spans.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .model import Geometric, Model

DEFAULT_BATCHES = 32


@dataclass(frozen=True)
class SimConfig:
    horizon: int
    seed: int
    model: Model | None = None
    burn_in: int | None = None
    batches: int = DEFAULT_BATCHES

    def __post_init__(self):
        if self.horizon < 10_000:
            raise ValueError(f"horizon must be at least 10^4, got {self.horizon}")
        if self.burn_in is not None and self.horizon < 10 * self.burn_in:
            raise ValueError("horizon must be at least 10x the burn-in")
        if self.batches < 2:
            raise ValueError("need at least two batches for a standard error")

    @property
    def burn(self) -> int:
        return self.horizon // 100 if self.burn_in is None else self.burn_in


@dataclass
class SimResult:
    delta_e: float
    se_delta: float
    d: float
    se_d: float
    horizon: int
    seed: int
    batches: int
    raw_age: float = float("nan")
    batch_delta: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    batch_d: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    def combined_se(self, eta: float) -> float:
        """Batch-means standard error of d + eta * delta_e."""
        comb = self.batch_d + eta * self.batch_delta
        return float(np.std(comb, ddof=1) / np.sqrt(len(comb)))

    def to_json_dict(self) -> dict:
        return {
            "delta_e": self.delta_e,
            "se_delta": self.se_delta,
            "d": self.d,
            "se_d": self.se_d,
            "horizon": self.horizon,
            "seed": self.seed,
        }

    def to_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)


class _Accumulator:
    """Per-batch sums for the two time averages plus the raw-age tally."""

    def __init__(self, horizon: int, burn: int, batches: int):
        self.burn = burn
        self.n_eff = horizon - burn
        self.batches = batches
        self.age = np.zeros(batches)
        self.speaks = np.zeros(batches, dtype=np.int64)
        self.charge = np.zeros(batches)
        self.raw_age = 0.0
        # slot counts of the equal-span batch partition
        edges = [(i * self.n_eff + batches - 1) // batches for i in range(batches + 1)]
        edges[-1] = self.n_eff
        self.slot_counts = np.diff(edges).astype(np.int64)

    def batch_of(self, t: int) -> int:
        return (t - self.burn - 1) * self.batches // self.n_eff

    def add_speak(self, t: int, age: int) -> None:
        if t > self.burn:
            b = self.batch_of(t)
            self.age[b] += age
            self.speaks[b] += 1

    def add_charge(self, t: int, amount: float) -> None:
        if t > self.burn and amount:
            self.charge[self.batch_of(t)] += amount

    def add_charges_at_slots(self, slots: np.ndarray, amounts: np.ndarray) -> None:
        keep = slots > self.burn
        if keep.any():
            bins = (slots[keep] - self.burn - 1) * self.batches // self.n_eff
            np.add.at(self.charge, bins, amounts[keep])

    def add_raw_age(self, a: int, b: int, S: int) -> None:
        """Accumulate sum of (tau - S) over slots tau in (a, b], post burn-in."""
        a = max(a, self.burn)
        if b <= a:
            return
        n = b - a
        self.raw_age += (a + 1 + b) * n / 2.0 - n * S

    def result(self, horizon: int, seed: int) -> SimResult:
        ok = self.speaks > 0
        bm_delta = np.where(ok, self.age / np.maximum(self.speaks, 1), 0.0)[ok]
        bm_d = (self.charge / self.slot_counts)[ok]
        total_speaks = int(self.speaks.sum())
        delta_e = float(self.age.sum() / total_speaks) if total_speaks else 0.0
        d = float(self.charge.sum() / self.n_eff)
        nb = int(ok.sum())
        se_delta = float(np.std(bm_delta, ddof=1) / np.sqrt(nb)) if nb > 1 else float("nan")
        se_d = float(np.std(bm_d, ddof=1) / np.sqrt(nb)) if nb > 1 else float("nan")
        return SimResult(
            delta_e=delta_e,
            se_delta=se_delta,
            d=d,
            se_d=se_d,
            horizon=horizon,
            seed=seed,
            batches=nb,
            raw_age=self.raw_age / self.n_eff,
            batch_delta=bm_delta,
            batch_d=bm_d,
        )


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    arr_ss, tim_ss = np.random.SeedSequence(seed).spawn(2)
    return (
        np.random.Generator(np.random.Philox(arr_ss)),
        np.random.Generator(np.random.Philox(tim_ss)),
    )


def _draw_arrival_values(model: Model, rng: np.random.Generator, n: int) -> np.ndarray:
    cum = np.cumsum(model.v.probs)
    digits = np.searchsorted(cum, rng.random(n), side="right")
    return np.asarray(model.v.values)[np.minimum(digits, len(cum) - 1)]


def _speak_slots(model: Model, rng: np.random.Generator, horizon: int) -> np.ndarray:
    """1-based slots at which the sender speaks."""
    if isinstance(model.z, Geometric):
        return np.flatnonzero(rng.random(horizon) < model.z.p) + 1
    cum = np.cumsum(model.z.probs)
    slots = []
    t = 0
    while t <= horizon:
        gaps = np.searchsorted(cum, rng.random(1024), side="right") + 1
        for g in gaps:
            t += int(g)
            if t > horizon:
                break
            slots.append(t)
    return np.asarray(slots, dtype=np.int64)


def _feasible(model: Model, buffer: list, s: int) -> bool:
    l = len(buffer)
    return 1 <= s <= l and (s == l or buffer[s - 1] > model.v.v_min)


def _absorb_block(buffer: list, block: np.ndarray, t0: int, maxb, acc: _Accumulator) -> None:
    """Append one arrival per slot t0+1.. and charge window fall-offs slot-exactly.

    With a window of maxb, the arrival at slot t0+j evicts the oldest live
    packet once the buffer is full; the eviction slot determines the batch
    the charge lands in, keeping direct and erasure modes bit-identical.
    """
    len0 = len(buffer)
    buffer.extend(block)
    if maxb is None or len(buffer) <= maxb:
        return
    ndrop = len(buffer) - maxb
    dropped = np.asarray(buffer[:ndrop])
    slots = t0 + maxb - len0 + np.arange(1, ndrop + 1)
    acc.add_charges_at_slots(slots, dropped)
    del buffer[:ndrop]


def simulate_policy(config: SimConfig, policy) -> SimResult:
    """Run the direct-mode simulation of a buffer policy.

    ``policy`` maps a buffer (importance values, oldest first) to a 1-based
    selection index and exposes ``max_buffer`` (its window K, or None for an
    untruncated buffer).  Infeasible actions abort with the offending state.
    """
    model = config.model
    if model is None:
        raise ValueError("simulate_policy needs a model in the config")
    arr_rng, tim_rng = _streams(config.seed)
    arrivals = _draw_arrival_values(model, arr_rng, config.horizon)
    speaks = _speak_slots(model, tim_rng, config.horizon)
    acc = _Accumulator(config.horizon, config.burn, config.batches)
    maxb = getattr(policy, "max_buffer", None)

    buffer: list[float] = []
    prev_t = 0
    last_S = 0
    for t in map(int, speaks):
        _absorb_block(buffer, arrivals[prev_t:t], prev_t, maxb, acc)
        l = len(buffer)
        s = int(policy(buffer))
        if not _feasible(model, buffer, s):
            raise RuntimeError(f"policy returned infeasible action {s} for buffer {buffer}")
        acc.add_raw_age(prev_t, t, last_S)
        acc.add_speak(t, l - s)
        if s > 1:
            acc.add_charge(t, sum(buffer[: s - 1]))
        del buffer[:s]
        last_S = t - (l - s)
        prev_t = t
    _absorb_block(buffer, arrivals[prev_t:], prev_t, maxb, acc)
    acc.add_raw_age(prev_t, config.horizon, last_S)
    return acc.result(config.horizon, config.seed)


def simulate_erasure(config: SimConfig, policy) -> SimResult:
    """Erasure-commitment mode: commit before each slot, deliver on success.

    Requires geometric interspeaking times (success probability p, erasure
    probability 1 - p).  The sender commits to the packet its stationary
    policy would select from the current buffer before knowing whether the
    slot's transmission will survive; on success the commitment becomes the
    selection and everything older is charged.
    """
    model = config.model
    if model is None:
        raise ValueError("simulate_erasure needs a model in the config")
    if not isinstance(model.z, Geometric):
        raise ValueError("erasure mode requires geometric interspeaking times")
    arr_rng, tim_rng = _streams(config.seed)
    arrivals = _draw_arrival_values(model, arr_rng, config.horizon)
    success = tim_rng.random(config.horizon) < model.z.p
    acc = _Accumulator(config.horizon, config.burn, config.batches)
    maxb = getattr(policy, "max_buffer", None)

    buffer: list[float] = []
    last_S = 0
    last_T = 0
    for t in range(1, config.horizon + 1):
        buffer.append(arrivals[t - 1])
        if maxb is not None and len(buffer) > maxb:
            drop = len(buffer) - maxb
            acc.add_charge(t, sum(buffer[:drop]))
            del buffer[:drop]
        l = len(buffer)
        s = int(policy(buffer))  # the commitment C_t = t + s - l
        if not _feasible(model, buffer, s):
            raise RuntimeError(f"policy returned infeasible action {s} for buffer {buffer}")
        if success[t - 1]:
            acc.add_raw_age(last_T, t, last_S)
            acc.add_speak(t, l - s)
            if s > 1:
                acc.add_charge(t, sum(buffer[: s - 1]))
            del buffer[:s]
            last_S = t - (l - s)
            last_T = t
    acc.add_raw_age(last_T, config.horizon, last_S)
    return acc.result(config.horizon, config.seed)


def simulate_bit_policy(config: SimConfig, source, policy) -> SimResult:
    """Bit-chunk mode for the headerless problem of the buffer-length MDP.

    The sender holds raw bits (1 important with importance v, 0 with
    importance 1) and transmits N-bit chunks.  ``policy`` is either a plain
    length policy (``action(l)`` gives the chunk end index) or a Tunstall
    threshold policy (``parse_newest_first``); both expose ``n_bits`` and
    ``max_buffer``.
    """
    arr_rng, tim_rng = _streams(config.seed)
    bits = (arr_rng.random(config.horizon) < source.q).astype(np.int8)
    importance = np.where(bits == 1, source.v, 1.0)
    success = tim_rng.random(config.horizon) < source.p
    speaks = np.flatnonzero(success) + 1
    acc = _Accumulator(config.horizon, config.burn, config.batches)
    N = policy.n_bits
    maxb = getattr(policy, "max_buffer", None)
    tunstall = hasattr(policy, "parse_newest_first")

    buf_bits: list[int] = []
    buf_imp: list[float] = []
    prev_t = 0
    for t in map(int, speaks):
        buf_bits.extend(bits[prev_t:t])
        buf_imp.extend(importance[prev_t:t])
        if maxb is not None and len(buf_bits) > maxb:
            drop = len(buf_bits) - maxb
            acc.add_charge(t, sum(buf_imp[:drop]))
            del buf_bits[:drop]
            del buf_imp[:drop]
        l = len(buf_bits)
        if tunstall and l > policy.tau + N:
            sendable = l - policy.tau
            consumed = policy.parse_newest_first(buf_bits, sendable)
            skipped = sendable - consumed
            age = policy.tau
        else:
            s = int(policy.action(l))
            if not (1 <= s <= l):
                raise RuntimeError(f"bit policy returned infeasible s={s} for length {l}")
            skipped = max(s - N, 0)
            age = l - s
        if skipped:
            acc.add_charge(t, sum(buf_imp[:skipped]))
        acc.add_speak(t, age)
        removed = l - age
        del buf_bits[:removed]
        del buf_imp[:removed]
        prev_t = t
    return acc.result(config.horizon, config.seed)
