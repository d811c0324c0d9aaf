"""Distance-r proper colorings, the separating interleave, and the finite
freeness witness for the orbit-closure embedding."""

from __future__ import annotations

from dataclasses import dataclass

from .certificates import Certificate
from .errors import DepthMismatch
from .groups import CayleyWindow
from .labeling import Labeling


@dataclass
class ProperColoring:
    """Per-r greedy colorings of the distance-<=r graphs H_r, encoded as
    fixed-width bit blocks and concatenated."""

    r_max: int
    colors: list[list[int]]   # colors[r-1][idx]
    widths: list[int]         # bits per block

    def bits(self, idx: int) -> str:
        out = []
        for r in range(self.r_max):
            out.append(format(self.colors[r][idx], f"0{self.widths[r]}b"))
        return "".join(out)


def proper_coloring(win: CayleyWindow, r_max: int) -> ProperColoring:
    """Greedy shortlex coloring of each H_r (edges between elements at
    G_r-distance <= r); degree+1 colors suffice on the finite window."""
    colors = []
    widths = []
    for r in range(1, r_max + 1):
        level = min(r, win.levels)
        col = [-1] * win.n
        top = 0
        for i in range(win.n):
            used = set()
            for j in win.dist_from(i, level, tmax=r):
                if j != i and col[j] >= 0:
                    used.add(col[j])
            c = 0
            while c in used:
                c += 1
            col[i] = c
            top = max(top, c)
        colors.append(col)
        widths.append(max(1, top.bit_length()))
    return ProperColoring(r_max=r_max, colors=colors, widths=widths)


def verify_proper(win: CayleyWindow, pc: ProperColoring) -> Certificate:
    """No H_r edge is monochromatic in block r, exhaustively."""
    witnesses = []
    for r in range(1, pc.r_max + 1):
        level = min(r, win.levels)
        col = pc.colors[r - 1]
        for i in range(win.n):
            for j in win.dist_from(i, level, tmax=r):
                if j != i and col[j] == col[i]:
                    witnesses.append((r, win.word(i), win.word(j)))
                    break
            if witnesses:
                break
        if witnesses:
            break
    return Certificate(name="proper-coloring", passed=not witnesses,
                       witnesses=witnesses,
                       measured={"widths": pc.widths})


def interleave(a: str, b: str) -> str:
    if len(a) != len(b):
        raise DepthMismatch(f"lengths {len(a)} != {len(b)}")
    return "".join(x + y for x, y in zip(a, b))


def deinterleave(s: str) -> tuple[str, str]:
    if len(s) % 2:
        raise DepthMismatch("odd length")
    return s[0::2], s[1::2]


def bernoulli_freeness_witness(lab: Labeling, r: int, depth: int,
                               test_core: int | None = None) -> Certificate:
    """For every p in the core and every gamma != e within G_r-distance r of
    the identity, the depth-truncated labels of gamma p and p differ: the
    finite witness that orbit-closure limits stay free."""
    win = lab.win
    gs = win.gs
    if test_core is None:
        test_core = max(0, lab.core - r)
    level = min(r, win.levels)
    gammas = [g for g in win.dist_from(0, level, tmax=r) if g != 0]
    witnesses = []
    checked = 0
    for p in win.core_indices(test_core):
        for g in gammas:
            moved = win.idx_of(gs.mul(win.elements[g], win.elements[p]))
            checked += 1
            if lab.label(moved, depth) == lab.label(p, depth):
                witnesses.append((win.word(p), win.word(g)))
                break
        if witnesses:
            break
    return Certificate(name="bernoulli-freeness-witness",
                       passed=not witnesses, core=test_core,
                       witnesses=witnesses,
                       measured={"depth": depth, "pairs": checked})
