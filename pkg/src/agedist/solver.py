"""Average-cost policy iteration over the truncated buffer MDP.

Two solver routes are provided.  The efficient route exploits the chain
structure of improving policies: every state either sends its oldest packet
(the B1 set) or inherits its parent's choice, so relative values obey
``h(b) = b1/mu + h(parent(b))`` and policy evaluation reduces to a linear
system over B1 alone.  The generic route is textbook policy iteration with
a dense full-state linear solve and an exhaustive argmin; it exists as the
correctness oracle for the efficient route and is only tractable for small
depths.

Cost convention: the average cost per speaking instant is
``lambda = d + eta * delta_e`` where ``d`` is distortion per time slot and
``delta_e`` is expected excess age per speaking instant.  The evaluation
system is linear in the one-step cost, so the two components are recovered
by re-solving with the age terms or the distortion terms switched off.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .model import Model
from .statetree import StateTree

TIE_TOL = 1e-12
RESIDUAL_TOL = 1e-9
MAX_ITERS = 1000

POLICY_FORMAT = "agedist-policy-v1"


# ---------------------------------------------------------------------------
# one-step and full C-values
# ---------------------------------------------------------------------------


def one_step_cost(model: Model, eta: float, state, s: int) -> float:
    """(1/mu) * sum of skipped importances + eta * (l - s)."""
    l = len(state)
    if not (1 <= s <= l):
        raise ValueError(f"action {s} infeasible for buffer length {l}")
    return sum(state[: s - 1]) / model.mu + eta * (l - s)


def _forgetting_terms(model: Model, tree: StateTree, digits, l: int, s: int) -> float:
    """Distortion charged to packets that fall off the K-window unsent."""
    K = tree.K
    mu = model.mu
    tot = model.mean_importance / mu * model.z_excess_mean(K)
    for k in range(s + 1, l + 1):
        tot += tree.values[digits[k - 1]] / mu * model.z_tail(K + k - l)
    return tot


def _transition_blocks(model: Model, tree: StateTree, l: int, i: int, s: int):
    """Probability-weighted h-expectation blocks reached from (state, action).

    Yields ``(weight, level, start, k)``: the next state lies in the level
    slice ``[start, start + m**k)`` with block weights ``weight * wprob[k]``.
    The final element carries the lumped tail Pr(Z >= K) into the all-fresh
    level-K block; interspeak times that empty the leftover exactly are kept
    out of it to avoid double counting.
    """
    K, m = tree.K, tree.m
    lm = l - s
    suf = i % (m**lm)
    for k in range(1, min(K - lm, K - 1) + 1):
        yield model.z_pmf(k), lm + k, suf * m**k, k
    for k in range(K - lm + 1, K):
        keep = K - k
        yield model.z_pmf(k), K, (i % (m**keep)) * m**k, k
    yield model.z_tail(K), K, 0, K


def _c_value_node(
    model: Model,
    tree: StateTree,
    h_levels,
    l: int,
    i: int,
    s: int,
    eta_w: float,
    distortion: bool,
) -> float:
    digits = tree.digits_of(l, i)
    val = eta_w * (l - s)
    if distortion:
        val += sum(tree.values[d] for d in digits[: s - 1]) / model.mu
        val += _forgetting_terms(model, tree, digits, l, s)
    for w, level, start, k in _transition_blocks(model, tree, l, i, s):
        if w == 0.0:
            continue
        block = h_levels[level][start : start + tree.m**k]
        val += w * float(block @ tree.wprob[k])
    return val


def c_value(model: Model, tree: StateTree, h_levels, state, s: int, eta: float) -> float:
    """Expected one-step-plus-continuation cost C_h(b, s) on the truncated tree."""
    l, i = tree.locate(state)
    if not (1 <= s <= l):
        raise ValueError(f"action {s} infeasible for buffer length {l}")
    return _c_value_node(model, tree, h_levels, l, i, s, eta, True)


# ---------------------------------------------------------------------------
# kappa recursion: C_h(b, 1) for every node in O(K |V|^K)
# ---------------------------------------------------------------------------


def _kappa_pass(model: Model, tree: StateTree, h_levels, distortion: bool = True):
    """kappa arrays for levels 0..K-1 (only parents are ever queried)."""
    K = tree.K
    mu = model.mu
    kappa: list[np.ndarray] = [np.empty(0)] * K
    base = model.z_tail(K) * float(h_levels[K] @ tree.wprob[K])
    if distortion:
        base += model.mean_importance / mu * model.z_excess_mean(K)
    kappa[0] = np.array([base])
    for l in range(1, K):
        n = tree.level_size[l]
        idx = np.arange(n)
        eh = tree.level_suffix_expectation(l, K - l, h_levels)
        kap = model.z_pmf(K - l) * eh + kappa[l - 1][tree.parent_index(l, idx)]
        if distortion:
            kap += model.z_tail(K - l + 1) * tree.values[tree.first_digit(l, idx)] / mu
        kappa[l] = kap
    return kappa


def kappa_update(model: Model, tree: StateTree, h_levels):
    """Public wrapper over the kappa recursion (full-cost mode)."""
    return _kappa_pass(model, tree, h_levels, distortion=True)


def _c1_per_parent(model: Model, tree: StateTree, h_levels, kappa, l: int) -> np.ndarray:
    """sum_z p_z E[h(parent || V^z)] + kappa(parent), per level-(l-1) node."""
    psum = kappa[l - 1].copy()
    for z in range(1, tree.K - l + 1):
        psum += model.z_pmf(z) * tree.level_suffix_expectation(l - 1, z, h_levels)
    return psum


def _c1_pass(model: Model, tree: StateTree, h_levels, eta_w: float, distortion: bool):
    """C_h(b, 1) for every node, levels 1..K."""
    kappa = _kappa_pass(model, tree, h_levels, distortion)
    c1: list[np.ndarray] = [np.empty(0)] * (tree.K + 1)
    for l in range(1, tree.K + 1):
        per_parent = _c1_per_parent(model, tree, h_levels, kappa, l)
        idx = np.arange(tree.level_size[l])
        c1[l] = eta_w * (l - 1) + per_parent[tree.parent_index(l, idx)]
    return c1


# ---------------------------------------------------------------------------
# chain-policy evaluation: linear system over B1
# ---------------------------------------------------------------------------


def _init_send_latest(model: Model, tree: StateTree) -> None:
    """Install s(b) = l(b): every node chains to its parent, B1 is empty."""
    mu = model.mu
    tree.action[1][:] = 1
    tree.cost[1][:] = 0.0
    tree.po[1][:] = -1
    for l in range(2, tree.K + 1):
        idx = np.arange(tree.level_size[l])
        par = tree.parent_index(l, idx)
        tree.action[l][:] = tree.action[l - 1][par] + 1
        tree.cost[l][:] = tree.cost[l - 1][par] + tree.values[tree.first_digit(l, idx)] / mu
        tree.po[l][:] = -1
    tree.b1_list = []


def _evaluate_chain(model: Model, tree: StateTree, eta_w: float, distortion: bool):
    """Solve the reduced system with unknowns {h(b') : b' in B1} + lambda.

    Relies on the chain identity: every node's relative value equals its
    accumulated edge cost plus the value of its nearest B1 ancestor (zero if
    that ancestor is a singleton).  Edge costs vanish in age-only mode.
    """
    m_unknown = len(tree.b1_list)
    n = m_unknown + 1
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    rows = list(tree.b1_list) + [(1, 0)]
    for r, (l, i) in enumerate(rows):
        if r < m_unknown:
            A[r, r] += 1.0
        A[r, m_unknown] += 1.0  # lambda column
        const = eta_w * (l - 1)
        if distortion:
            const += _forgetting_terms(model, tree, tree.digits_of(l, i), l, 1)
        for w, level, start, k in _transition_blocks(model, tree, l, i, 1):
            if w == 0.0:
                continue
            size = tree.m**k
            wts = w * tree.wprob[k]
            if distortion:
                const += float(wts @ tree.cost[level][start : start + size])
            cols = tree.po[level][start : start + size]
            contrib = np.bincount(cols + 1, weights=wts, minlength=m_unknown + 1)
            A[r, :m_unknown] -= contrib[1 : m_unknown + 1]
        rhs[r] = const
    try:
        u = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            f"singular policy-evaluation system (|B1|={m_unknown}); "
            "unichain invariant violated"
        ) from exc
    lam = float(u[m_unknown])
    upad = np.concatenate(([0.0], u[:m_unknown]))
    h_levels = [np.zeros(sz) for sz in tree.level_size]
    for l in range(1, tree.K + 1):
        h_levels[l] = upad[tree.po[l] + 1]
        if distortion:
            h_levels[l] = h_levels[l] + tree.cost[l]
    return lam, h_levels


def _check_residuals(model, tree, h_levels, lam, eta_w, distortion) -> float:
    """Re-derive C_h(b,1) through the kappa route and check B1 equations."""
    c1 = _c1_pass(model, tree, h_levels, eta_w, distortion)
    worst = abs(lam - float(c1[1][0]))
    for l, i in tree.b1_list:
        worst = max(worst, abs(float(h_levels[l][i]) + lam - float(c1[l][i])))
    return worst


def evaluate_policy(model: Model, tree: StateTree, actions, eta: float):
    """Evaluate a chain-structured stationary policy; returns (lambda, h).

    ``actions`` is a per-level list of action arrays.  Policies produced by
    the improvement step always satisfy s(b) in {1, s(parent)+1}; anything
    else cannot be represented by the reduced system and is rejected.
    """
    _install_actions(model, tree, actions)
    lam, h_levels = _evaluate_chain(model, tree, eta, True)
    worst = _check_residuals(model, tree, h_levels, lam, eta, True)
    if worst > RESIDUAL_TOL:
        raise RuntimeError(f"policy evaluation residual {worst:.3e} exceeds {RESIDUAL_TOL}")
    tree.h = h_levels
    return lam, h_levels


def evaluate_components(model: Model, tree: StateTree, actions=None):
    """(delta_e, d) of the installed (or given) policy via two synthetic solves."""
    if actions is not None:
        _install_actions(model, tree, actions)
    delta_e, _ = _evaluate_chain(model, tree, 1.0, False)
    d, _ = _evaluate_chain(model, tree, 0.0, True)
    return delta_e, d


def _install_actions(model: Model, tree: StateTree, actions) -> None:
    """Set cost/po/b1 bookkeeping for an explicit chain-form action table."""
    mu = model.mu
    if not np.all(np.asarray(actions[1]) == 1):
        raise ValueError("length-1 states must take action 1")
    tree.action[1][:] = 1
    tree.cost[1][:] = 0.0
    tree.po[1][:] = -1
    tree.b1_list = []
    for l in range(2, tree.K + 1):
        acts = np.asarray(actions[l], dtype=np.int32)
        idx = np.arange(tree.level_size[l])
        par = tree.parent_index(l, idx)
        chain = tree.action[l - 1][par] + 1
        is_b1 = acts == 1
        if not np.all(is_b1 | (acts == chain)):
            bad = int(np.flatnonzero(~(is_b1 | (acts == chain)))[0])
            raise ValueError(
                f"action table is not chain-structured at state {tree.entries_of(l, bad)}"
            )
        b1mu = tree.values[tree.first_digit(l, idx)] / mu
        tree.action[l][:] = acts
        tree.cost[l][:] = np.where(is_b1, 0.0, tree.cost[l - 1][par] + b1mu)
        po = tree.po[l - 1][par].copy()
        new = np.flatnonzero(is_b1)
        po[new] = len(tree.b1_list) + np.arange(len(new))
        tree.po[l][:] = po
        tree.b1_list.extend((l, int(j)) for j in new)


# ---------------------------------------------------------------------------
# policy improvement
# ---------------------------------------------------------------------------


def _policy_improve(model: Model, tree: StateTree, h_levels, lam: float, eta: float) -> bool:
    """One improvement sweep; updates the tree's policy fields in place.

    Returns True when any action changed.  A node switches to sending its
    oldest packet only when that is strictly better than inheriting the
    parent's best by more than the tie guard, and when the reach bound for
    the oldest packet's importance permits it; ties therefore stay with the
    freshest feasible packet.
    """
    mu = model.mu
    kvals = model.reach_bounds(eta)
    kappa = _kappa_pass(model, tree, h_levels, True)
    changed = False

    tree.action[1][:] = 1
    tree.temp[1][:] = lam
    tree.cost[1][:] = 0.0
    tree.po[1][:] = -1
    b1_list: list[tuple[int, int]] = []
    for l in range(2, tree.K + 1):
        idx = np.arange(tree.level_size[l])
        par = tree.parent_index(l, idx)
        first = tree.first_digit(l, idx)
        b1mu = tree.values[first] / mu
        per_parent = _c1_per_parent(model, tree, h_levels, kappa, l)
        c1 = eta * (l - 1) + per_parent[par]
        chain_val = tree.temp[l - 1][par] + b1mu
        take = (l <= kvals[first]) & (c1 < chain_val - TIE_TOL)
        new_actions = np.where(take, 1, tree.action[l - 1][par] + 1).astype(np.int32)
        if not np.array_equal(new_actions, tree.action[l]):
            changed = True
        tree.action[l][:] = new_actions
        tree.temp[l][:] = np.where(take, c1, chain_val)
        tree.cost[l][:] = np.where(take, 0.0, tree.cost[l - 1][par] + b1mu)
        po = tree.po[l - 1][par].copy()
        new = np.flatnonzero(take)
        po[new] = len(b1_list) + np.arange(len(new))
        tree.po[l][:] = po
        b1_list.extend((l, int(j)) for j in new)
    tree.b1_list = b1_list
    return changed


def policy_improve(model: Model, tree: StateTree, h_levels, lam: float, eta: float):
    """Public improvement step: returns (per-level action arrays, B1 set)."""
    _policy_improve(model, tree, h_levels, lam, eta)
    return [a.copy() for a in tree.action], list(tree.b1_list)


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------


@dataclass
class PolicySolution:
    """A converged stationary policy with its average cost and components."""

    eta: float
    K: int
    lam: float
    delta_e: float
    d: float
    iters: int
    values: tuple[float, ...]
    actions: list[np.ndarray]
    h: list[np.ndarray]
    b1: list[tuple[int, int]] = field(default_factory=list)
    model_hash: str = ""

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def b1_size(self) -> int:
        return len(self.b1)

    @property
    def max_buffer(self) -> int:
        return self.K

    def action_for(self, entries) -> int:
        l = len(entries)
        if l == 0 or l > self.K:
            raise ValueError(f"buffer length {l} outside 1..{self.K}")
        digit = {v: d for d, v in enumerate(self.values)}
        i = 0
        for v in entries:
            i = i * self.m + digit[float(v)]
        return int(self.actions[l][i])

    def __call__(self, entries) -> int:
        return self.action_for(entries)

    def b1_states(self):
        m = self.m
        for l, i in self.b1:
            digits = [(i // m**p) % m for p in range(l - 1, -1, -1)]
            yield tuple(self.values[d] for d in digits)

    def to_json(self, path: str) -> None:
        doc = {
            "format": POLICY_FORMAT,
            "model_hash": self.model_hash,
            "eta": self.eta,
            "K": self.K,
            "lambda": self.lam,
            "delta_e": self.delta_e,
            "d": self.d,
            "values": list(self.values),
            "actions": [_rle_encode(self.actions[l]) for l in range(self.K + 1)],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)

    @classmethod
    def from_json(cls, path: str, model: Model | None = None) -> "PolicySolution":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != POLICY_FORMAT:
            raise ValueError(f"unsupported policy file format {doc.get('format')!r}")
        if model is not None and doc["model_hash"] != model.config_hash():
            raise ValueError("policy file was solved for a different model")
        actions = [np.array(_rle_decode(rle), dtype=np.int32) for rle in doc["actions"]]
        K = int(doc["K"])
        sol = cls(
            eta=float(doc["eta"]),
            K=K,
            lam=float(doc["lambda"]),
            delta_e=float(doc["delta_e"]),
            d=float(doc["d"]),
            iters=0,
            values=tuple(float(v) for v in doc["values"]),
            actions=actions,
            h=[],
            model_hash=doc["model_hash"],
        )
        return sol


def _rle_encode(arr) -> list[list[int]]:
    out: list[list[int]] = []
    for x in np.asarray(arr, dtype=np.int64):
        if out and out[-1][0] == int(x):
            out[-1][1] += 1
        else:
            out.append([int(x), 1])
    return out


def _rle_decode(rle) -> list[int]:
    out: list[int] = []
    for value, count in rle:
        out.extend([int(value)] * int(count))
    return out


# ---------------------------------------------------------------------------
# efficient policy iteration
# ---------------------------------------------------------------------------


def policy_iteration(
    model: Model,
    eta: float,
    K: int | None = None,
    *,
    max_iters: int = MAX_ITERS,
    tree: StateTree | None = None,
    warm: bool = False,
) -> PolicySolution:
    """Efficient policy iteration; returns the converged PolicySolution.

    Starts from send-latest (or from the actions already installed on
    ``tree`` when warm-starting an eta sweep) and alternates the reduced
    evaluation with the chain improvement until the action table is a fixed
    point.
    """
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if K is None:
        K = model.buffer_bound(eta)
    if tree is None:
        tree = StateTree(model, K)
        warm = False
    elif tree.K != K:
        raise ValueError(f"tree depth {tree.K} does not match requested K={K}")
    if not warm:
        _init_send_latest(model, tree)

    lam = float("nan")
    h_levels = tree.h
    for it in range(1, max_iters + 1):
        lam, h_levels = _evaluate_chain(model, tree, eta, True)
        worst = _check_residuals(model, tree, h_levels, lam, eta, True)
        if worst > RESIDUAL_TOL:
            raise RuntimeError(
                f"policy evaluation residual {worst:.3e} exceeds {RESIDUAL_TOL} "
                f"(eta={eta}, K={K}, iter={it})"
            )
        tree.h = h_levels
        if not _policy_improve(model, tree, h_levels, lam, eta):
            iters = it
            break
    else:
        raise RuntimeError(
            f"policy iteration did not converge within {max_iters} iterations "
            f"(eta={eta}, K={K}, lambda={lam})"
        )

    delta_e, d = evaluate_components(model, tree)
    return PolicySolution(
        eta=eta,
        K=K,
        lam=lam,
        delta_e=delta_e,
        d=d,
        iters=iters,
        values=tuple(model.v.values),
        actions=[a.copy() for a in tree.action],
        h=[x.copy() for x in h_levels],
        b1=list(tree.b1_list),
        model_hash=model.config_hash(),
    )


# ---------------------------------------------------------------------------
# generic policy iteration (oracle route)
# ---------------------------------------------------------------------------


def _evaluate_full(model: Model, tree: StateTree, actions, eta_w: float, distortion: bool):
    """Dense policy evaluation over every state; reference h([v_min]) = 0."""
    K = tree.K
    n_states = tree.node_count() - 1
    n = n_states  # unknowns: every non-reference h plus lambda
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    lam_col = n - 1
    for l in range(1, K + 1):
        for i in range(tree.level_size[l]):
            r = tree.level_offset[l] + i - 1
            own = r - 0  # column of h(l, i) is its row index; reference row 0 has no column
            if r != 0:
                A[r, own - 1] += 1.0
            A[r, lam_col] += 1.0
            s = int(actions[l][i])
            const = eta_w * (l - s)
            if distortion:
                digits = tree.digits_of(l, i)
                const += sum(tree.values[d] for d in digits[: s - 1]) / model.mu
                const += _forgetting_terms(model, tree, digits, l, s)
            for w, level, start, k in _transition_blocks(model, tree, l, i, s):
                if w == 0.0:
                    continue
                size = tree.m**k
                wts = w * tree.wprob[k]
                cols = tree.level_offset[level] + start + np.arange(size) - 1
                mask = cols != 0
                np.add.at(A[r], cols[mask] - 1, -wts[mask])
            rhs[r] = const
    u = np.linalg.solve(A, rhs)
    lam = float(u[lam_col])
    h_levels = [np.zeros(sz) for sz in tree.level_size]
    for l in range(1, K + 1):
        for i in range(tree.level_size[l]):
            c = tree.level_offset[l] + i - 1
            h_levels[l][i] = 0.0 if c == 0 else u[c - 1]
    return lam, h_levels


def generic_policy_iteration(
    model: Model, eta: float, K: int, *, max_iters: int = MAX_ITERS
) -> PolicySolution:
    """Textbook policy iteration with exhaustive argmin; the oracle route."""
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    tree = StateTree(model, K)
    actions = [np.full(tree.level_size[l], l, dtype=np.int32) for l in range(K + 1)]
    lam = float("nan")
    h_levels = None
    for it in range(1, max_iters + 1):
        lam, h_levels = _evaluate_full(model, tree, actions, eta, True)
        changed = False
        for l in range(1, K + 1):
            for i in range(tree.level_size[l]):
                digits = tree.digits_of(l, i)
                best_s = l
                best_c = _c_value_node(model, tree, h_levels, l, i, l, eta, True)
                for s in range(l - 1, 0, -1):
                    if digits[s - 1] == 0:
                        continue  # stale minimum-importance packet: outside the class
                    cval = _c_value_node(model, tree, h_levels, l, i, s, eta, True)
                    if cval < best_c - TIE_TOL:
                        best_s, best_c = s, cval
                if best_s != actions[l][i]:
                    changed = True
                    actions[l][i] = best_s
        if not changed:
            iters = it
            break
    else:
        raise RuntimeError(
            f"generic policy iteration did not converge within {max_iters} iterations "
            f"(eta={eta}, K={K})"
        )
    delta_e, _ = _evaluate_full(model, tree, actions, 1.0, False)
    d, _ = _evaluate_full(model, tree, actions, 0.0, True)
    b1 = [
        (l, i)
        for l in range(2, K + 1)
        for i in range(tree.level_size[l])
        if actions[l][i] == 1
    ]
    return PolicySolution(
        eta=eta,
        K=K,
        lam=lam,
        delta_e=delta_e,
        d=d,
        iters=iters,
        values=tuple(model.v.values),
        actions=[a.copy() for a in actions],
        h=[x.copy() for x in h_levels],
        b1=b1,
        model_hash=model.config_hash(),
    )


# ---------------------------------------------------------------------------
# eta sweep and the straight-line converse
# ---------------------------------------------------------------------------


@dataclass
class CurvePoint:
    eta: float
    lam: float
    delta_e: float
    d: float
    K: int
    b1_size: int
    iters: int


@dataclass
class TradeoffCurve:
    points: list[CurvePoint] = field(default_factory=list)
    converse: list[tuple[float, float]] = field(default_factory=list)
    exact_until: float | None = None
    failures: list[tuple[float, str]] = field(default_factory=list)

    def min_margin(self, delta_e: float, d: float) -> float:
        """min over converse lines of d + eta*delta_e - J*(eta); >= 0 means dominated."""
        if not self.converse:
            raise ValueError("empty converse family")
        return min(d + eta * delta_e - j for eta, j in self.converse)

    def write_points_csv(self, fh) -> None:
        fh.write("eta,lambda,delta_e,d,K,b1_size,iters\n")
        for p in self.points:
            fh.write(
                f"{p.eta:.12g},{p.lam:.12g},{p.delta_e:.12g},{p.d:.12g},"
                f"{p.K},{p.b1_size},{p.iters}\n"
            )

    def write_converse_csv(self, fh) -> None:
        fh.write("eta,intercept\n")
        for eta, j in self.converse:
            fh.write(f"{eta:.12g},{j:.12g}\n")


def _extend_tree(model: Model, old: StateTree, K_new: int) -> StateTree:
    """Deeper tree carrying over the converged policy; fresh levels chain."""
    tree = StateTree(model, K_new)
    mu = model.mu
    for l in range(1, old.K + 1):
        tree.action[l][:] = old.action[l]
        tree.cost[l][:] = old.cost[l]
        tree.po[l][:] = old.po[l]
    tree.b1_list = list(old.b1_list)
    for l in range(old.K + 1, K_new + 1):
        idx = np.arange(tree.level_size[l])
        par = tree.parent_index(l, idx)
        tree.action[l][:] = tree.action[l - 1][par] + 1
        tree.cost[l][:] = tree.cost[l - 1][par] + tree.values[tree.first_digit(l, idx)] / mu
        tree.po[l][:] = tree.po[l - 1][par]
    return tree


def sweep_eta(model: Model, etas, *, max_iters: int = MAX_ITERS) -> TradeoffCurve:
    """Solve a decreasing eta sequence with warm starts; emit the converse family."""
    etas = [float(e) for e in etas]
    if not etas:
        raise ValueError("empty eta sequence")
    if any(e <= 0 for e in etas):
        raise ValueError("eta values must be positive")
    if any(b >= a for a, b in zip(etas, etas[1:])):
        raise ValueError("eta sequence must be strictly decreasing")

    curve = TradeoffCurve()
    tree: StateTree | None = None
    for eta in etas:
        try:
            K = model.buffer_bound(eta)
            if tree is None:
                tree = StateTree(model, K)
                sol = policy_iteration(model, eta, K, max_iters=max_iters, tree=tree)
            else:
                if K > tree.K:
                    tree = _extend_tree(model, tree, K)
                sol = policy_iteration(
                    model, eta, tree.K, max_iters=max_iters, tree=tree, warm=True
                )
        except (ValueError, RuntimeError) as exc:
            curve.failures.append((eta, str(exc)))
            continue
        curve.points.append(
            CurvePoint(eta, sol.lam, sol.delta_e, sol.d, sol.K, sol.b1_size, sol.iters)
        )
        curve.converse.append((eta, sol.lam))
    if len(curve.points) >= 2:
        p, q = curve.points[-2], curve.points[-1]
        curve.exact_until = (p.lam - q.lam) / (p.eta - q.eta)
    return curve
