"""Patching: transplant a donor-ball neighborhood around a host marker, then
rebuild the marker hierarchy and colors on the transition annulus.

Regular n-patch: copy radius s_n + r_{n-1}, dirty radius s_n + 4 r_{n-1}.
Supersize n-patch: copy radius 3 r_n, dirty radius 7 r_n, and the extra host
precondition that no level-(n+1) marker sits within 20 r_n.

Every patch returns a fresh labeling plus a diff log (element, field, old,
new); the changed set is contained in the dirty ball by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    ColoringStuck,
    CoreExhausted,
    OverlapViolation,
    PreconditionViolated,
)
from .labeling import Labeling, _avoidance_set, _cyclic_modulus


@dataclass
class PatchRequest:
    kind: str            # "regular" | "supersize"
    donor: Labeling
    donor_center: int    # x, a level-n marker of the donor
    host_center: int     # y, a level-n marker of the host
    stage: int           # n

    def radii(self) -> tuple[int, int]:
        st = self.donor.sched.stage(self.stage)
        if self.kind == "regular":
            r_prev = self.donor.sched.stage(self.stage - 1).r if self.stage > 1 else 0
            return st.s + r_prev, st.s + 4 * r_prev
        if self.kind == "supersize":
            return 3 * st.r, 7 * st.r
        raise ValueError(f"unknown patch kind {self.kind!r}")


@dataclass
class DiffEntry:
    element: int
    layer: int | str     # 1-based layer, or "C"
    old: int
    new: int


@dataclass
class PatchResult:
    labeling: Labeling
    diff: list[DiffEntry] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def _check_preconditions(host: Labeling, req: PatchRequest):
    n = req.stage
    if n > host.depth or n > req.donor.depth:
        raise PreconditionViolated(f"stage {n} beyond materialized depth")
    q = host.q_value(n)
    if req.donor.layers[n - 1][req.donor_center] != q:
        raise PreconditionViolated("donor center is not a level-n marker")
    if host.layers[n - 1][req.host_center] != q:
        raise PreconditionViolated("host center is not a level-n marker")
    copy_r, dirty_r = req.radii()
    win = host.win
    if win.depth[req.host_center] + dirty_r > host.core:
        raise CoreExhausted(
            f"dirty ball radius {dirty_r} at depth {win.depth[req.host_center]} "
            f"escapes core {host.core}")
    if win.depth[req.donor_center] + copy_r > req.donor.core:
        raise CoreExhausted("donor ball escapes donor core")
    if req.kind == "supersize" and host.depth > n:
        st = host.sched.stage(n)
        level = min(host.sched.stage(n + 1).f, win.levels)
        near = win.dist_from(req.host_center, level, tmax=20 * st.r)
        for z in host.q_set(n + 1):
            if z in near:
                raise PreconditionViolated(
                    f"level-{n+1} marker within 20 r_{n} of host center")


def _transport(host: Labeling, req: PatchRequest, out: Labeling,
               copy_ball: dict[int, int], diff: list[DiffEntry]):
    """Copy donor labels via z -> z y^{-1} x for layers <= n and C-bits <= n."""
    win = host.win
    gs = win.gs
    n = req.stage
    shift = gs.mul(gs.inv(win.elements[req.host_center]),
                   win.elements[req.donor_center])  # y^{-1} x
    mask = (1 << n) - 1
    for z in copy_ball:
        src = win.idx_of(gs.mul(win.elements[z], shift))
        for m in range(1, n + 1):
            old = out.layers[m - 1][z]
            new = req.donor.layers[m - 1][src]
            if old != new:
                out.layers[m - 1][z] = new
                diff.append(DiffEntry(z, m, old, new))
        old_c = out.c_bits[z]
        new_c = (old_c & ~mask) | (req.donor.c_bits[src] & mask)
        if new_c != old_c:
            out.c_bits[z] = new_c
            diff.append(DiffEntry(z, "C", old_c, new_c))


def _rebuild_annulus(out: Labeling, req: PatchRequest, annulus: list[int],
                     diff: list[DiffEntry], notes: list[str]):
    """The lambda-hierarchy of the patching proof, then greedy recoloring.

    lambda_1 is a maximal r_1-sparse extension of the already-fixed layer-1
    markers; lambda_i extends layer i inside lambda_{i-1}.  The hierarchy goes
    up to n-1 for regular patches and n for supersize ones; the top layer
    keeps host markers that remain sparse.
    """
    if not annulus:
        return
    win, sched = out.win, out.sched
    n = req.stage
    lam_top = n if req.kind == "supersize" else n - 1
    ann = set(annulus)

    def set_value(z: int, m: int, v: int):
        old = out.layers[m - 1][z]
        if old != v:
            out.layers[m - 1][z] = v
            diff.append(DiffEntry(z, m, old, v))

    prev_candidates: set[int] | None = None  # annulus members of lambda_{i-1}
    for m in range(1, n + 1):
        st = sched.stage(m)
        level = min(st.f, win.levels)
        q = st.q
        fixed = {i for i in range(win.n)
                 if i not in ann and out.layers[m - 1][i] == q}
        forbidden = _avoidance_set(out, m)
        if m <= lam_top:
            cand_pool = ann if m == 1 else (prev_candidates or set())
            chosen: set[int] = set()
            blocked = win.multisource_dist(fixed, level, tmax=st.r) if fixed else {}
            for i in sorted(cand_pool):
                if i in blocked or i in forbidden:
                    continue
                chosen.add(i)
                for jdx in win.dist_from(i, level, tmax=st.r):
                    blocked.setdefault(jdx, st.r)
            for z in sorted(ann):
                set_value(z, m, q if z in chosen else -1)  # -1: recolor below
            prev_candidates = chosen
        else:
            # top layer: keep still-sparse host markers, drop the rest
            keep: set[int] = set()
            others = fixed | keep
            for z in sorted(ann):
                if out.layers[m - 1][z] != q:
                    continue
                near = win.dist_from(z, level, tmax=st.r)
                if any(w != z and w in near for w in others):
                    set_value(z, m, -1)
                    notes.append(f"dropped layer-{m} marker at {win.word(z)}")
                else:
                    keep.add(z)
                    others.add(z)
            for z in sorted(ann):
                if out.layers[m - 1][z] != q:
                    set_value(z, m, -1)
        cells = [z for z in sorted(ann) if out.layers[m - 1][z] == -1]
        for z, v in _annulus_colors(out, m, cells, notes).items():
            set_value(z, m, v)


def _annulus_colors(out: Labeling, m: int, cells: list[int],
                    notes: list[str]) -> dict[int, int]:
    """Colors for the wiped annulus cells of layer m.

    Under the cyclic policy the position formula is used: it is context-free,
    so identical patch neighborhoods rebuild identically regardless of patch
    order (greedy mex reads radius r_m and would couple neighboring patches).
    A seam check falls back to mex when transported labels clash with the
    formula.
    """
    if not cells:
        return {}
    win, sched = out.win, out.sched
    st = sched.stage(m)
    level = min(st.f, win.levels)
    q = st.q
    mod = _cyclic_modulus(win, st) if sched.coloring == "cyclic" else None
    if mod is not None:
        gs = win.gs
        values: dict[int, int] = {}
        for z in cells:
            if gs.dim == 1:
                values[z] = win.elements[z][0] % mod
            else:
                base = st.r + 1
                acc = 0
                for c in reversed(win.elements[z]):
                    acc = acc * base + (c % base)
                values[z] = acc % mod
        if _seam_clean(out, m, values, level, st.r):
            return values
        notes.append(f"layer-{m} annulus fell back to greedy recoloring")
    # greedy mex, shortlex order; Rule 3 guarantees a free color
    values = {}
    for z in cells:
        used = set()
        for jdx in win.dist_from(z, level, tmax=st.r):
            if jdx == z:
                continue
            used.add(values.get(jdx, out.layers[m - 1][jdx]))
        c = 0
        while c in used or c == q:
            c += 1
        if c >= st.card_f:
            raise ColoringStuck(f"annulus layer {m} at {win.word(z)}")
        values[z] = c
    return values


def _seam_clean(out: Labeling, m: int, values: dict[int, int], level: int,
                r: int) -> bool:
    """No two equal layer-m values within distance r once ``values`` land."""
    win = out.win
    layer = out.layers[m - 1]
    for z, v in values.items():
        for jdx in win.dist_from(z, level, tmax=r):
            if jdx == z:
                continue
            other = values.get(jdx, layer[jdx])
            if other == v:
                return False
    return True


def patch(host: Labeling, req: PatchRequest) -> PatchResult:
    """Apply one patch; all postcondition bullets hold on the output:
    labels outside the dirty ball and layers above n are untouched, the copy
    ball carries transported donor labels, and the annulus is rebuilt clean.
    """
    _check_preconditions(host, req)
    win = host.win
    n = req.stage
    copy_r, dirty_r = req.radii()
    level = min(host.sched.stage(n).f, win.levels)
    dist = win.dist_from(req.host_center, level, tmax=dirty_r)
    copy_ball = {z: d for z, d in dist.items() if d <= copy_r}
    annulus = [z for z, d in dist.items() if copy_r < d < dirty_r]

    out = host.copy()
    diff: list[DiffEntry] = []
    notes: list[str] = []
    _transport(host, req, out, copy_ball, diff)
    _rebuild_annulus(out, req, annulus, diff, notes)
    out.invalidate()
    out.stage_tag = host.stage_tag

    # strictness downgrade when the patch reached the identity's avoidance ball
    if host.strict:
        for m in range(1, n + 1):
            radius = host.sched.avoidance_radius(m)
            lvl = min(host.sched.stage(m).f, win.levels)
            near = win.dist_from(0, lvl, tmax=radius)
            q = host.q_value(m)
            if any(out.layers[m - 1][z] == q for z in near):
                out.strict = False
                notes.append(f"condition (4) lost at layer {m}; almost-clean now")
                break
    return PatchResult(labeling=out, diff=diff, notes=notes)


def simultaneous_patch(host: Labeling, reqs: list[PatchRequest]) -> PatchResult:
    """Apply pairwise-disjoint patches; equals sequential application in any
    order.  Disjointness of the dirty balls is asserted, not assumed."""
    if not reqs:
        return PatchResult(labeling=host.copy())
    win = host.win
    regions: list[set[int]] = []
    for req in reqs:
        _, dirty_r = req.radii()
        level = min(host.sched.stage(req.stage).f, win.levels)
        regions.append(set(win.dist_from(req.host_center, level, tmax=dirty_r)))
    for a in range(len(reqs)):
        for b in range(a + 1, len(reqs)):
            if regions[a] & regions[b]:
                raise OverlapViolation(
                    f"dirty balls of patches {a} and {b} overlap "
                    f"(hosts {win.word(reqs[a].host_center)}, "
                    f"{win.word(reqs[b].host_center)})")
    current = host
    all_diff: list[DiffEntry] = []
    all_notes: list[str] = []
    for req in reqs:
        res = patch(current, req)
        current = res.labeling
        all_diff.extend(res.diff)
        all_notes.extend(res.notes)
    return PatchResult(labeling=current, diff=all_diff, notes=all_notes)
