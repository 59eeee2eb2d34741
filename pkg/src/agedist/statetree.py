"""Suffix trie over truncated buffer states, stored as flat per-level arrays.

A buffer state is a sequence of importance values, oldest first.  The trie
parent relation drops the oldest entry, so the children of a state prepend
one value in front of it.  Nodes are laid out breadth first; within level
``l`` a state maps to the mixed-radix integer whose most significant digit
is the oldest entry.  That layout makes the three access patterns the
solver needs O(1) index arithmetic:

* parent of ``(l, i)``       -> ``(l-1, i % m**(l-1))``
* child  ``v || b``          -> ``(l+1, digit(v) * m**l + i)``
* appended block ``b || V^k``-> level ``l+k`` slice ``[i*m**k, (i+1)*m**k)``
"""

from __future__ import annotations

import numpy as np

from .model import Model

# Dense storage cap: |V|**(K+1) nodes must fit in 2**24.
NODE_CAP = 1 << 24


def max_depth(alphabet_size: int) -> int:
    """Largest K whose dense trie fits under NODE_CAP."""
    if alphabet_size == 1:
        return NODE_CAP - 1
    k = 1
    while alphabet_size ** (k + 2) <= NODE_CAP:
        k += 1
    return k


class StateTree:
    """Trie over all buffers of length <= K plus the empty root.

    Topology is immutable; the per-node solver fields (``action``, ``h``,
    ``cost``, ``temp``, ``po``) are plain numpy arrays owned by whichever
    solve is currently running.
    """

    def __init__(self, model: Model, K: int):
        if K < 1:
            raise ValueError(f"tree depth must be >= 1, got {K}")
        m = model.v.size
        cap = max_depth(m)
        if K > cap:
            digits = (K + 1) * np.log10(m)
            est = f"{sum(m**l for l in range(K + 1))}" if digits < 18 else f"~10^{digits:.0f}"
            raise ValueError(
                f"K={K} exceeds the dense-storage cap {cap} for |V|={m} "
                f"(would need {est} nodes)"
            )
        self.model = model
        self.K = K
        self.m = m
        self.values = np.asarray(model.v.values, dtype=np.float64)
        self.alpha = np.asarray(model.v.probs, dtype=np.float64)
        self.level_size = [m**l for l in range(K + 1)]
        self.level_offset = np.cumsum([0] + self.level_size).tolist()
        self._value_to_digit = {v: d for d, v in enumerate(model.v.values)}

        # Product weights over appended blocks: wprob[k][j] = Pr(V^k == digits of j).
        self.wprob: list[np.ndarray] = [np.ones(1)]
        for _ in range(K):
            self.wprob.append(np.outer(self.alpha, self.wprob[-1]).ravel())

        # Per-node solver fields, one array per level (level 0 is the root).
        self.action = [np.zeros(n, dtype=np.int32) for n in self.level_size]
        self.h = [np.zeros(n) for n in self.level_size]
        self.cost = [np.zeros(n) for n in self.level_size]
        self.temp = [np.zeros(n) for n in self.level_size]
        self.po = [np.full(n, -1, dtype=np.int64) for n in self.level_size]
        self.b1_list: list[tuple[int, int]] = []

    # -- bookkeeping -------------------------------------------------------

    def node_count(self) -> int:
        return sum(self.level_size)

    def first_digit(self, level: int, idx) -> np.ndarray:
        """Digit of the oldest entry (most significant position)."""
        return idx // self.level_size[level - 1]

    def parent_index(self, level: int, idx) -> np.ndarray:
        return idx % self.level_size[level - 1]

    def digits_of(self, level: int, idx: int) -> tuple[int, ...]:
        out = []
        for pos in range(level - 1, -1, -1):
            out.append((idx // self.m**pos) % self.m)
        return tuple(out)

    def entries_of(self, level: int, idx: int) -> tuple[float, ...]:
        return tuple(float(self.values[d]) for d in self.digits_of(level, idx))

    # -- global BFS ids ----------------------------------------------------

    def index_of(self, state) -> int:
        """Global breadth-first node id of a buffer state (root = 0)."""
        l = len(state)
        if l > self.K:
            raise ValueError(f"state length {l} exceeds tree depth {self.K}")
        idx = 0
        for v in state:
            d = self._value_to_digit.get(float(v))
            if d is None:
                raise ValueError(f"entry {v!r} is not an importance value of the model")
            idx = idx * self.m + d
        return self.level_offset[l] + idx

    def state_of(self, node_id: int) -> tuple[float, ...]:
        if not (0 <= node_id < self.node_count()):
            raise ValueError(f"node id {node_id} out of range")
        level = next(l for l in range(self.K + 1) if node_id < self.level_offset[l + 1])
        return self.entries_of(level, node_id - self.level_offset[level])

    def locate(self, state) -> tuple[int, int]:
        """(level, local index) of a buffer state."""
        gid = self.index_of(state)
        level = next(l for l in range(self.K + 1) if gid < self.level_offset[l + 1])
        return level, gid - self.level_offset[level]

    # -- expectations ------------------------------------------------------

    def expectation_over_suffix(self, level: int, idx: int, k: int, arr=None) -> float:
        """E over V^k of field(b || V^k) for the node (level, idx); field defaults to h."""
        if level + k > self.K:
            raise ValueError(f"suffix length {k} overflows depth {self.K} from level {level}")
        if arr is None:
            arr = self.h
        if k == 0:
            return float(arr[level][idx])
        mk = self.m**k
        block = arr[level + k][idx * mk : (idx + 1) * mk]
        return float(block @ self.wprob[k])

    def level_suffix_expectation(self, level: int, k: int, arr=None) -> np.ndarray:
        """E[field(b || V^k)] for every node of a level at once."""
        if arr is None:
            arr = self.h
        if k == 0:
            return arr[level]
        mk = self.m**k
        return arr[level + k].reshape(self.level_size[level], mk) @ self.wprob[k]

    # -- debug surface -----------------------------------------------------

    def dump(self, fh) -> None:
        """Write `state,action,h` lines for inspection (not a stable format)."""
        fh.write("state,action,h\n")
        for level in range(1, self.K + 1):
            for idx in range(self.level_size[level]):
                state = "|".join(f"{v:g}" for v in self.entries_of(level, idx))
                fh.write(f"{state},{self.action[level][idx]},{self.h[level][idx]:.12g}\n")
