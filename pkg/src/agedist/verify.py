"""Desk-scale verification battery behind the `verify` CLI command.

Each check is a scaled-down version of one acceptance criterion: exact
closed-form values, solver-vs-oracle agreement, structural properties of
solved policies, converse dominance of the baseline strategies, and
solver-vs-simulator consistency.  The battery returns per-check rows so
the CLI can print a table and exit nonzero on any failure.

``lambda_perturbation`` deliberately shifts the converse intercepts before
the dominance check; it exists as a negative-control hook.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

from .bufferignorant import (
    BinarySource,
    PlainThresholdBitPolicy,
    TunstallThresholdBitPolicy,
    oracle_chain_length,
    threshold_chain_matrix,
    threshold_point,
    tunstall_build,
)
from .model import Geometric, ImportanceDist, Model
from .sim import SimConfig, simulate_bit_policy, simulate_erasure, simulate_policy
from .solver import PolicySolution, generic_policy_iteration, policy_iteration, sweep_eta
from .strategies import (
    s1_point,
    s1_transition_matrix,
    s2_point,
    s3_point,
    s3_transition_matrix,
    stationary_distribution,
    strategy_point,
)


def figure1_model() -> Model:
    return Model(ImportanceDist((1.0, 20.0), (0.7, 0.3)), Geometric(0.2))


def figure2_model() -> Model:
    return Model(ImportanceDist((1.0, 20.0), (0.8, 0.2)), Geometric(0.3))


# ---------------------------------------------------------------------------
# structural checks on solved policies (shared with the test suite)
# ---------------------------------------------------------------------------


def _state_value_sums(sol: PolicySolution) -> list[np.ndarray]:
    """Total importance of every state, per level, by the parent recursion."""
    m = sol.m
    values = np.asarray(sol.values)
    sums: list[np.ndarray] = [np.zeros(1)]
    for l in range(1, sol.K + 1):
        idx = np.arange(m**l)
        sums.append(values[idx // m ** (l - 1)] + sums[l - 1][idx % m ** (l - 1)])
    return sums


def s2prime_violations(sol: PolicySolution) -> list[str]:
    """States that select a stale minimum-importance packet."""
    m = sol.m
    out = []
    for l in range(2, sol.K + 1):
        idx = np.arange(m**l)
        s = sol.actions[l].astype(np.int64)
        digit = (idx // m ** (l - s)) % m
        bad = np.flatnonzero((s < l) & (digit == 0))
        out.extend(f"level {l} state {i}" for i in bad[:5])
    return out


def reach_bound_violations(model: Model, sol: PolicySolution) -> list[str]:
    """Reaching-back actions must satisfy l - s < K_i(eta) for the chosen value.

    Sending the freshest packet (s = l, age 0) carries no reach and is
    exempt; the bound is vacuous there and fails only on the trivial
    minimum-importance case.
    """
    m = sol.m
    kvals = model.reach_bounds(sol.eta)
    out = []
    for l in range(2, sol.K + 1):
        idx = np.arange(m**l)
        s = sol.actions[l].astype(np.int64)
        digit = (idx // m ** (l - s)) % m
        bad = np.flatnonzero((s < l) & ~((l - s) < kvals[digit]))
        out.extend(f"level {l} state {i} action {s[i]}" for i in bad[:5])
    return out


def property1_violations(model: Model, sol: PolicySolution, tol: float = 1e-10) -> list[str]:
    """Prefix-decomposition laws of optimal actions and relative values."""
    m = sol.m
    mu = model.mu
    mu_sums = _state_value_sums(sol)
    out = []
    for l in range(2, sol.K + 1):
        idx = np.arange(m**l)
        s_q = sol.actions[l].astype(np.int64)
        h_q = sol.h[l]
        for j in range(1, l):
            suf_idx = idx % m ** (l - j)
            s_suf = sol.actions[l - j][suf_idx]
            ok_act = (s_q == j + s_suf) | (s_q <= j)
            if not ok_act.all():
                i = int(np.flatnonzero(~ok_act)[0])
                out.append(f"P1(i) level {l} split {j} state {i}")
            h_suf = sol.h[l - j][suf_idx]
            prefix = mu_sums[j][idx // m ** (l - j)]
            ok_h = (h_suf <= h_q + tol) & (h_q <= prefix / mu + h_suf + tol)
            if not ok_h.all():
                i = int(np.flatnonzero(~ok_h)[0])
                out.append(f"P1(ii) level {l} split {j} state {i}")
    return out


def property2_violations(model: Model, sol: PolicySolution, tol: float = 1e-10) -> list[str]:
    """Non-B1 states must satisfy h = b1/mu + h(parent)."""
    m = sol.m
    mu = model.mu
    values = np.asarray(sol.values)
    out = []
    for l in range(2, sol.K + 1):
        idx = np.arange(m**l)
        chain = sol.actions[l] != 1
        expect = values[idx // m ** (l - 1)] / mu + sol.h[l - 1][idx % m ** (l - 1)]
        gap = np.abs(sol.h[l] - expect)
        bad = np.flatnonzero(chain & (gap > tol))
        out.extend(f"level {l} state {i} gap {gap[i]:.2e}" for i in bad[:5])
    return out


# ---------------------------------------------------------------------------
# the battery
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def run_battery(
    model: Model | None = None,
    *,
    seed: int = 20240,
    horizon: int = 150_000,
    lambda_perturbation: float = 0.0,
) -> list[CheckResult]:
    checks: list[CheckResult] = []
    fig1 = model if model is not None else figure1_model()
    fig2 = figure2_model()

    def add(name: str, passed: bool, detail: str = "") -> None:
        checks.append(CheckResult(name, bool(passed), detail))

    # 1. distortion floor closed form
    d1, d2 = figure1_model().d_min(), fig2.d_min()
    add("d_min closed form", abs(d1 - 2.7) < 1e-12 and abs(d2 - 0.7) < 1e-12, f"{d1:.12f}, {d2:.12f}")

    # 2. send-latest optimality above eta_max
    lam_ref = fig1.mean_importance * (fig1.mu - 1.0) / fig1.mu
    ok = True
    for eta in (fig1.eta_max(), 2 * fig1.eta_max()):
        sol = policy_iteration(fig1, eta)
        ok &= abs(sol.lam - lam_ref) < 1e-9 and abs(sol.delta_e) < 1e-12
    add("send-latest above eta_max", ok, f"lambda ref {lam_ref:.6f}")

    # 3. extreme-state thresholds
    ok = True
    vspan = fig1.v.v_max - fig1.v.v_min
    for L in (2, 3):
        thr = vspan / (fig1.mu * (L - 1))
        st = (fig1.v.v_max,) + (fig1.v.v_min,) * (L - 1)
        ok &= policy_iteration(fig1, thr - 1e-6, L).action_for(st) == 1
        ok &= policy_iteration(fig1, thr + 1e-6, L).action_for(st) == L
    add("extreme-state threshold flip", ok)

    # 4. efficient vs generic agreement
    ok = True
    detail = ""
    for K in (1, 2, 3):
        for eta in (0.7, 1.3):
            a = policy_iteration(fig1, eta, K)
            b = generic_policy_iteration(fig1, eta, K)
            same = abs(a.lam - b.lam) < 1e-9 and all(
                np.array_equal(x, y) for x, y in zip(a.actions[1:], b.actions[1:])
            )
            if not same:
                ok = False
                detail = f"mismatch at K={K}, eta={eta}"
    add("efficient vs generic policy iteration", ok, detail)

    # 5+6. structural properties of solved trees
    ok = True
    detail = ""
    for eta in (0.6, 1.0, 2.0):
        sol = policy_iteration(fig1, eta, min(fig1.buffer_bound(eta), 4))
        gen = generic_policy_iteration(fig1, eta, min(fig1.buffer_bound(eta), 4))
        for tag, s in (("efficient", sol), ("generic", gen)):
            bad = (
                reach_bound_violations(fig1, s)
                + s2prime_violations(s)
                + property1_violations(fig1, s)
                + property2_violations(fig1, s)
            )
            if bad:
                ok = False
                detail = f"{tag} eta={eta}: {bad[0]}"
    add("reach bound and properties 1-2", ok, detail)

    # 7. solver vs simulator
    sol = policy_iteration(fig1, 1.0)
    res = simulate_policy(SimConfig(horizon=horizon, seed=seed, model=fig1), sol)
    gap = abs(res.d + 1.0 * res.delta_e - sol.lam)
    se = res.combined_se(1.0)
    add("solver vs simulator", gap < 4 * se, f"gap {gap:.5f} vs 4se {4 * se:.5f}")

    # 8. strategies: stationary solves and converse dominance
    ok = True
    for K in (1, 3, 6):
        pi1 = s1_point(fig1, K).pi
        pi3 = s3_point(fig1, K).pi
        ok &= np.abs(pi1 - stationary_distribution(s1_transition_matrix(fig1, K))).max() < 1e-10
        ok &= np.abs(pi3 - stationary_distribution(s3_transition_matrix(fig1, K))).max() < 1e-10
    curve = sweep_eta(fig1, list(np.geomspace(fig1.eta_max(), 0.6, 8)))
    converse = [(eta, j + lambda_perturbation) for eta, j in curve.converse]
    margin = min(
        min(pt.d + eta * pt.delta_e - j for eta, j in converse)
        for name in ("S1", "S2", "S3")
        for pt in (strategy_point(fig1, name, K) for K in range(1, 13))
    )
    ok &= margin >= -1e-6
    add("strategy stationary + converse dominance", ok, f"margin {margin:.3e}")

    # 9. threshold-policy closed form vs chain solve
    src = BinarySource.from_model(figure1_model(), 3)
    ok = True
    for tau in (0, 2, 5):
        pt = threshold_point(src, tau)
        L = oracle_chain_length(src, tau)
        num = stationary_distribution(threshold_chain_matrix(src, tau, L))
        ok &= max(abs(pt.pi_of(l) - num[l - 1]) for l in range(1, L - 2)) < 1e-9
        ok &= abs(pt.pi_sum() - 1.0) < 1e-10
    ok &= abs(threshold_point(src, 0).d - src.mu_v * (1 - src.p) ** src.N) < 1e-12
    add("threshold-policy closed forms", ok)

    # 10. tunstall dictionaries and the coded improvement
    dic = tunstall_build(src.q, 2**src.N)
    ok = abs(dic.kraft_sum() - 1.0) < 1e-12 and dic.expected_parse_length >= src.N
    tau = 2
    plain = threshold_point(src, tau)
    bit = simulate_bit_policy(
        SimConfig(horizon=horizon, seed=seed), src, TunstallThresholdBitPolicy(src, tau, dic)
    )
    ok &= bit.d <= plain.d + 2 * bit.se_d
    add("tunstall kraft/E[L]/improvement", ok, f"bit d {bit.d:.4f} vs plain {plain.d:.4f}")

    # 11. erasure-commitment equivalence
    sol = policy_iteration(fig1, 1.0)
    cfg = SimConfig(horizon=horizon, seed=seed, model=fig1)
    direct = simulate_policy(cfg, sol)
    eras_same = simulate_erasure(cfg, sol)
    eras_other = simulate_erasure(SimConfig(horizon=horizon, seed=seed + 1, model=fig1), sol)
    ok = eras_same.d == direct.d and eras_same.delta_e == direct.delta_e
    ok &= abs(eras_other.d - direct.d) < 4 * (eras_other.se_d + direct.se_d)
    ok &= abs(eras_other.delta_e - direct.delta_e) < 4 * (
        eras_other.se_delta + direct.se_delta
    )
    add("erasure equivalence", ok)

    return checks


def print_report(checks: list[CheckResult], fh=None) -> bool:
    fh = fh or sys.stdout
    width = max(len(c.name) for c in checks)
    all_ok = True
    for c in checks:
        mark = "PASS" if c.passed else "FAIL"
        all_ok &= c.passed
        suffix = f"  ({c.detail})" if c.detail else ""
        fh.write(f"{c.name:<{width}}  {mark}{suffix}\n")
    fh.write(("all checks passed" if all_ok else "FAILURES present") + "\n")
    return all_ok
