"""Finitely generated groups through ordered generator systems, and finite
Cayley-graph windows with per-level metrics.

Conventions, fixed once:
  * Left Cayley graphs throughout: (p, q) is a level-r edge iff sigma_i p = q
    or sigma_i q = p for some i <= r.
  * Every window element carries a shortlex key (the least generator word
    reaching it, ordered by length then by (generator index, sign) with +
    before -).  Shortlex order is the single global tie-breaker.
  * Window distances are computed inside the window; pairs in different
    level-r components get INFINITE.
"""

from __future__ import annotations

import math
from collections import deque
from math import comb

from .certificates import Certificate
from .errors import (
    BallEscapesWindow,
    BudgetExhausted,
    ElementOutsideWindow,
    WindowTooSmall,
)

INFINITE = math.inf


# ---------------------------------------------------------------------------
# Backends.  Each backend is a generator system: it provides group arithmetic
# on canonically-encoded elements plus the ordered generator list sigma_i.
# ---------------------------------------------------------------------------


class ZLattice:
    """Integer lattice Z^d with sigma_i = e_i, eventually constant at e_d.

    For d = 1 this is Z with sigma_i = 1 for all i.  Elements are coordinate
    tuples.
    """

    def __init__(self, dim: int = 1):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.name = "Z" if dim == 1 else f"Z^{dim}"

    def identity(self):
        return (0,) * self.dim

    def mul(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def inv(self, a):
        return tuple(-x for x in a)

    def generator(self, i: int):
        j = min(i, self.dim) - 1
        g = [0] * self.dim
        g[j] = 1
        return tuple(g)

    def effective_generators(self, level: int) -> int:
        return min(level, self.dim)

    def encode(self, a):
        return a

    def decode(self, data):
        return tuple(int(x) for x in data)

    def ball_count(self, level: int, t: int) -> int:
        # lattice points of L1 norm <= t in dimension min(level, dim)
        d = self.effective_generators(level)
        return sum(2**k * comb(d, k) * comb(t, k) for k in range(0, d + 1))

    def subgroup_order(self, level: int):
        return INFINITE

    def far_point(self, T: int):
        g = [0] * self.dim
        g[0] = T
        return 1, tuple(g)

    def spec(self) -> dict:
        return {"backend": "lattice", "dim": self.dim}


class FreeGroup:
    """Free group F_k; elements are reduced words (tuples of nonzero ints,
    letter +j / -j for sigma_j^{+-1}).  sigma_i eventually constant at a_k."""

    def __init__(self, rank: int = 2):
        if rank < 1:
            raise ValueError("rank must be >= 1")
        self.rank = rank
        self.name = f"F_{rank}"

    def identity(self):
        return ()

    def mul(self, a, b):
        out = list(a)
        for letter in b:
            if out and out[-1] == -letter:
                out.pop()
            else:
                out.append(letter)
        return tuple(out)

    def inv(self, a):
        return tuple(-x for x in reversed(a))

    def generator(self, i: int):
        return (min(i, self.rank),)

    def effective_generators(self, level: int) -> int:
        return min(level, self.rank)

    def encode(self, a):
        return a

    def decode(self, data):
        return tuple(int(x) for x in data)

    def ball_count(self, level: int, t: int) -> int:
        k = self.effective_generators(level)
        if k == 1:
            return 2 * t + 1
        # 1 + 2k * ((2k-1)^t - 1) / (2k-2)
        return 1 + 2 * k * ((2 * k - 1) ** t - 1) // (2 * k - 2)

    def subgroup_order(self, level: int):
        return INFINITE

    def far_point(self, T: int):
        return 1, (1,) * T

    def spec(self) -> dict:
        return {"backend": "free", "rank": self.rank}


class DirectSumZ2:
    """Direct sum of Z/2 copies; sigma_j = e_{indices[j-1]}.

    Elements are frozensets of coordinate indices.  The default index
    sequence 1, 2, 3, ... gives infinitely many fresh generators (the locally
    finite regime); an explicit list allows duplicated generators for chain
    condition tests.
    """

    def __init__(self, indices: list[int] | None = None):
        self.indices = list(indices) if indices is not None else None
        self.name = "sum-Z/2"

    def identity(self):
        return frozenset()

    def mul(self, a, b):
        return a ^ b

    def inv(self, a):
        return a

    def _index(self, i: int) -> int:
        if self.indices is None:
            return i
        if i <= len(self.indices):
            return self.indices[i - 1]
        return self.indices[-1]

    def generator(self, i: int):
        return frozenset({self._index(i)})

    def distinct_count(self, level: int) -> int:
        return len({self._index(i) for i in range(1, level + 1)})

    def effective_generators(self, level: int) -> int:
        return self.distinct_count(level)

    def encode(self, a):
        return a

    def decode(self, data):
        return frozenset(int(x) for x in data)

    def ball_count(self, level: int, t: int) -> int:
        d = self.distinct_count(level)
        return sum(comb(d, j) for j in range(0, min(t, d) + 1))

    def subgroup_order(self, level: int):
        return 2 ** self.distinct_count(level)

    def far_point(self, T: int):
        # Gamma_n has diameter = number of distinct indices among sigma_1..n.
        if self.indices is None:
            return T, frozenset(range(1, T + 1))
        seen: set[int] = set()
        for i, idx in enumerate(self.indices, start=1):
            seen.add(idx)
            if len(seen) >= T:
                return i, frozenset(seen)
        raise BudgetExhausted(f"no level reaches diameter {T} with given indices")

    def spec(self) -> dict:
        return {"backend": "sum_z2", "indices": self.indices}


class TableGroup:
    """Finite group given by a multiplication table (element ids 0..n-1,
    id 0 the identity) and an ordered generator list of element ids."""

    def __init__(self, table: list[list[int]], generators: list[int],
                 eventually_constant: bool = True, name: str = "table"):
        self.table = table
        self.order = len(table)
        self.gen_ids = list(generators)
        self.eventually_constant = eventually_constant
        self.name = name
        self._inv = [0] * self.order
        for a in range(self.order):
            for b in range(self.order):
                if table[a][b] == 0:
                    self._inv[a] = b
                    break

    def identity(self):
        return 0

    def mul(self, a, b):
        return self.table[a][b]

    def inv(self, a):
        return self._inv[a]

    def generator(self, i: int):
        if i <= len(self.gen_ids):
            return self.gen_ids[i - 1]
        if self.eventually_constant:
            return self.gen_ids[-1]
        raise BudgetExhausted(f"generator index {i} beyond finite list")

    def effective_generators(self, level: int) -> int:
        return min(level, len(self.gen_ids))

    def encode(self, a):
        return a

    def decode(self, data):
        return int(data) if not isinstance(data, list) else int(data[0])

    def _bfs_ball(self, level: int, t: int | None):
        gens = [self.generator(i) for i in range(1, self.effective_generators(level) + 1)]
        moves = set(gens) | {self._inv[g] for g in gens}
        dist = {0: 0}
        q = deque([0])
        while q:
            x = q.popleft()
            if t is not None and dist[x] >= t:
                continue
            for g in moves:
                y = self.table[g][x]  # left multiplication
                if y not in dist:
                    dist[y] = dist[x] + 1
                    q.append(y)
        return dist

    def ball_count(self, level: int, t: int) -> int:
        return len(self._bfs_ball(level, t))

    def subgroup_order(self, level: int):
        return len(self._bfs_ball(level, None))

    def far_point(self, T: int):
        n = 1
        while True:
            if n > len(self.gen_ids) and not self.eventually_constant:
                raise BudgetExhausted(f"no element at distance >= {T}")
            dist = self._bfs_ball(n, None)
            far = [x for x, d in dist.items() if d >= T]
            if far:
                return n, min(far)
            if n >= len(self.gen_ids):
                raise BudgetExhausted(f"no element at distance >= {T}")
            n += 1

    def spec(self) -> dict:
        return {"backend": "table", "order": self.order}


def cyclic_table_group(n: int) -> TableGroup:
    """Z/n as a table backend (handy for tests)."""
    table = [[(a + b) % n for b in range(n)] for a in range(n)]
    return TableGroup(table, generators=[1 % n], name=f"Z/{n}")


def make_group(spec: dict):
    kind = spec.get("backend", "lattice")
    if kind == "lattice":
        return ZLattice(int(spec.get("dim", 1)))
    if kind == "free":
        return FreeGroup(int(spec.get("rank", 2)))
    if kind == "sum_z2":
        return DirectSumZ2(spec.get("indices"))
    if kind == "cyclic":
        return cyclic_table_group(int(spec["n"]))
    raise ValueError(f"unknown backend {kind!r}")


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------


class CayleyWindow:
    """All elements within distance ``radius`` of the identity in G_levels,
    with adjacency available at every level r <= levels.

    Immutable after construction.  Elements are indexed 0..N-1 in shortlex
    order; all library code works with indices.
    """

    def __init__(self, gs, radius: int, levels: int):
        if radius < 0 or levels < 1:
            raise ValueError("radius >= 0 and levels >= 1 required")
        self.gs = gs
        self.radius = radius
        self.levels = levels
        moves = []
        for i in range(1, levels + 1):
            g = gs.generator(i)
            moves.append((i, g))
            gi = gs.inv(g)
            if gs.encode(gi) != gs.encode(g):
                moves.append((i, gi))
        self._moves = moves

        e = gs.identity()
        elements = [e]
        index = {gs.encode(e): 0}
        depth = [0]
        frontier = [0]
        d = 0
        while frontier and d < radius:
            nxt = []
            for idx in frontier:  # frontier already in shortlex order
                x = elements[idx]
                for gen_i, g in moves:
                    y = gs.mul(g, x)  # left action
                    key = gs.encode(y)
                    if key not in index:
                        index[key] = len(elements)
                        elements.append(y)
                        depth.append(d + 1)
                        nxt.append(index[key])
            frontier = nxt
            d += 1
        self.elements = elements
        self.index = index
        self.depth = depth  # distance to identity at top level
        self.n = len(elements)

        # neighbor lists: for each element, unique neighbors with the least
        # generator index realizing the edge (level filter is gen <= r)
        nbrs: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for idx, x in enumerate(elements):
            seen: dict[int, int] = {}
            for gen_i, g in moves:
                y = gs.mul(g, x)
                j = index.get(gs.encode(y))
                if j is None or j == idx:
                    continue
                if j not in seen or gen_i < seen[j]:
                    seen[j] = gen_i
            nbrs[idx] = sorted(((gen, j) for j, gen in seen.items()))
        self.nbrs = nbrs
        self._adj_cache: dict[int, list[list[int]]] = {}

    # -- basic queries ----------------------------------------------------

    def idx_of(self, element) -> int:
        key = self.gs.encode(element)
        if key not in self.index:
            raise ElementOutsideWindow(f"{element!r} not in window")
        return self.index[key]

    def adj(self, level: int) -> list[list[int]]:
        if level > self.levels:
            raise BallEscapesWindow(f"level {level} > window levels {self.levels}")
        if level not in self._adj_cache:
            self._adj_cache[level] = [
                [j for g, j in row if g <= level] for row in self.nbrs
            ]
        return self._adj_cache[level]

    def dist_from(self, center: int, level: int, tmax: int | None = None) -> dict[int, int]:
        """BFS distances from one center at the given level."""
        adj = self.adj(level)
        dist = {center: 0}
        q = deque([center])
        while q:
            x = q.popleft()
            dx = dist[x]
            if tmax is not None and dx >= tmax:
                continue
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dx + 1
                    q.append(y)
        return dist

    def multisource_dist(self, sources, level: int, tmax: int | None = None) -> dict[int, int]:
        adj = self.adj(level)
        dist = {s: 0 for s in sources}
        q = deque(dist)
        while q:
            x = q.popleft()
            dx = dist[x]
            if tmax is not None and dx >= tmax:
                continue
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dx + 1
                    q.append(y)
        return dist

    def ball(self, center: int, t: int, level: int) -> list[int]:
        """Indices at level-distance <= t from center, shortlex sorted.

        Requires the ball to fit: depth(center) + t <= radius.
        """
        if self.depth[center] + t > self.radius:
            raise BallEscapesWindow(
                f"ball(center depth {self.depth[center]}, t={t}) escapes radius {self.radius}")
        return sorted(self.dist_from(center, level, tmax=t))

    def distance(self, x: int, y: int, level: int):
        if not (0 <= x < self.n and 0 <= y < self.n):
            raise ElementOutsideWindow("index out of range")
        if x == y:
            return 0
        adj = self.adj(level)
        dist = {x: 0}
        q = deque([x])
        while q:
            a = q.popleft()
            for b in adj[a]:
                if b not in dist:
                    dist[b] = dist[a] + 1
                    if b == y:
                        return dist[b]
                    q.append(b)
        return INFINITE

    def core_indices(self, core: int) -> list[int]:
        return [i for i in range(self.n) if self.depth[i] <= core]

    def word(self, idx: int):
        """Serializable canonical form of an element."""
        x = self.elements[idx]
        enc = self.gs.encode(x)
        if isinstance(enc, tuple):
            return list(enc)
        if isinstance(enc, frozenset):
            return sorted(enc)
        return enc


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def ball(win: CayleyWindow, center, t: int, level: int) -> list:
    """Elements (not indices) of the level-ball around a center element."""
    c = win.idx_of(center) if not isinstance(center, int) else center
    return [win.elements[i] for i in win.ball(c, t, level)]


def distance(win: CayleyWindow, x, y, level: int):
    xi = win.idx_of(x) if not isinstance(x, int) else x
    yi = win.idx_of(y) if not isinstance(y, int) else y
    return win.distance(xi, yi, level)


def far_point_index(gs, T: int, budget: int):
    """Smallest n <= budget with some gamma in Gamma_n at distance >= T from e."""
    if T < 1:
        raise ValueError("T >= 1 required")
    n, witness = gs.far_point(T)
    if n > budget:
        raise BudgetExhausted(f"n_T = {n} exceeds budget {budget}")
    return n, witness


def _span_in_window(win: CayleyWindow, level: int) -> tuple[set[int], bool]:
    """BFS span of Gamma_level inside the window.

    Returns (indices, closed) where closed means no frontier element had a
    neighbor escaping the window, i.e. the subgroup is fully contained.
    """
    gs = win.gs
    seen = {0}
    q = deque([0])
    closed = True
    while q:
        x = q.popleft()
        elem = win.elements[x]
        for i in range(1, level + 1):
            for g in (gs.generator(i), gs.inv(gs.generator(i))):
                y = gs.mul(g, elem)
                j = win.index.get(gs.encode(y))
                if j is None:
                    closed = False
                    continue
                if j not in seen:
                    seen.add(j)
                    q.append(j)
    return seen, closed


def validate_generator_chain(gs, depth: int, window: CayleyWindow | None = None) -> Certificate:
    """Check the standing hypothesis: if Gamma_n != Gamma then
    sigma_{n+1} not in Gamma_n; and |Gamma_n| >= 2^n whenever Gamma_n is
    fully visible in the window."""
    if depth < 1:
        raise ValueError("depth >= 1 required")
    win = window or CayleyWindow(gs, radius=max(2 * depth, 8), levels=depth + 1)
    witnesses = []
    measured = {}
    for n in range(1, depth + 1):
        span, closed = _span_in_window(win, n)
        measured[f"gamma_{n}"] = len(span)
        if closed and len(span) < 2**n:
            witnesses.append((n, "cardinality", len(span)))
        if n < depth:
            # Gamma_n = Gamma "as seen" when it escapes or spans everything.
            is_whole = (not closed) or len(span) == win.n
            if not is_whole:
                try:
                    g_next = win.idx_of(gs.generator(n + 1))
                except ElementOutsideWindow:
                    raise WindowTooSmall(f"sigma_{n+1} outside window")
                if g_next in span:
                    witnesses.append((n, "chain", f"sigma_{n+1} in Gamma_{n}"))
    return Certificate(
        name="generator-chain",
        passed=not witnesses,
        core=win.radius,
        witnesses=witnesses,
        measured=measured,
    )
