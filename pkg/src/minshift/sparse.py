"""Marker machinery: greedy r-sparse sets, ambient-maximal sparse sets, and
s-net verification on windows."""

from __future__ import annotations

from dataclasses import dataclass, field

from .certificates import Certificate
from .groups import CayleyWindow


@dataclass
class MarkerSet:
    """An r-sparse set of window indices, maximal on the interior region.

    ``ambient`` remembers the parent set the greedy selection ran over (the
    S in "S-maximal"), already minus the forbidden region.
    """

    indices: list[int]
    r: int
    level: int
    interior: int
    ambient: frozenset[int] | None = None
    meta: dict = field(default_factory=dict)

    def as_set(self) -> set[int]:
        return set(self.indices)

    def to_json(self, win: CayleyWindow) -> dict:
        return {
            "r": self.r,
            "level": self.level,
            "interior": self.interior,
            "elements": [win.word(i) for i in sorted(self.indices)],
        }


def greedy_maximal_sparse(
    win: CayleyWindow,
    S,
    r: int,
    level: int,
    forbidden=frozenset(),
    interior: int | None = None,
) -> MarkerSet:
    """Shortlex-greedy S-maximal r-sparse subset of S \\ forbidden.

    Candidates are taken in shortlex order; one is added when its
    level-distance to everything already chosen exceeds r.  Maximality is
    asserted only for candidates within ``interior`` of the identity
    (window-boundary candidates may be undecidable).
    """
    if interior is None:
        interior = max(win.radius - r, 0)
    cand = frozenset(S) - frozenset(forbidden)
    chosen: list[int] = []
    blocked = [False] * win.n
    for i in range(win.n):  # window indices are shortlex-sorted
        if i not in cand or blocked[i]:
            continue
        chosen.append(i)
        for j in win.dist_from(i, level, tmax=r):
            blocked[j] = True
    return MarkerSet(indices=chosen, r=r, level=level, interior=interior,
                     ambient=cand)


def verify_sparse(win: CayleyWindow, T, r: int, level: int) -> Certificate:
    """Pairwise level-distance > r, checked exhaustively via BFS balls."""
    tset = set(T)
    witnesses = []
    for i in sorted(tset):
        near = win.dist_from(i, level, tmax=r)
        for j in near:
            if j != i and j in tset:
                witnesses.append((win.word(i), win.word(j), near[j]))
                break
        if witnesses:
            break
    return Certificate(name="r-sparse", passed=not witnesses,
                       witnesses=witnesses, measured={"r": r, "size": len(tset)})


def verify_interior_maximal(
    win: CayleyWindow, T, S, r: int, level: int, interior: int,
    forbidden=frozenset(),
) -> Certificate:
    """No element of S \\ forbidden within the interior can be added."""
    tset = set(T)
    near_t = win.multisource_dist(tset, level, tmax=r) if tset else {}
    witnesses = []
    for i in frozenset(S) - frozenset(forbidden):
        if win.depth[i] > interior or i in tset:
            continue
        if i not in near_t:
            witnesses.append(win.word(i))
            if len(witnesses) >= 3:
                break
    return Certificate(name="interior-maximal", passed=not witnesses,
                       witnesses=witnesses,
                       measured={"interior": interior, "r": r})


def verify_net(win: CayleyWindow, T, s: int, level: int, core: int) -> Certificate:
    """Every x with d(e, x) <= core has some y in T at level-distance <= s."""
    if core + s > win.radius:
        raise ValueError(f"core {core} + s {s} exceeds window radius {win.radius}")
    tset = set(T)
    covered = win.multisource_dist(tset, level, tmax=s) if tset else {}
    witnesses = []
    for i in win.core_indices(core):
        if i not in covered:
            witnesses.append(win.word(i))
            break
    return Certificate(name="s-net", passed=not witnesses, core=core,
                       witnesses=witnesses,
                       measured={"s": s, "size": len(tset)})


def net_radius_from_lemma(s: int, r: int) -> int:
    """Net radius guaranteed for an S-maximal r-sparse set inside an s-net S."""
    if s < 0 or r < 0:
        raise ValueError("s, r >= 0 required")
    return s + r
