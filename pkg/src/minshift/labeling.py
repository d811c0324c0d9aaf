"""Layered labelings on windows: marker layers plus distance-r colorings,
labeled-ball extraction with canonical hashing, the type census, and
syndeticity scanning.

A labeling assigns each window element a C-prefix (D bits) and one value per
materialized layer m, with the distinguished marker value q_m = |F_m| - 1.
Marker layers form the nested sparse hierarchy; non-marker values form
distance-r_m proper colorings.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .certificates import Certificate, merge
from .errors import (
    BallEscapesCore,
    ColoringStuck,
    LevelMismatch,
    WindowTooSmall,
)
from .groups import CayleyWindow, ZLattice
from .schedule import Schedule
from .sparse import greedy_maximal_sparse, verify_interior_maximal, verify_sparse


class Labeling:
    """Mutable during construction/patching, treated as immutable afterwards."""

    def __init__(self, win: CayleyWindow, sched: Schedule, c_depth: int,
                 strict: bool = True):
        self.win = win
        self.sched = sched
        self.c_depth = c_depth
        self.c_bits = [0] * win.n
        self.layers: list[list[int]] = []
        self.core = win.radius
        self.strict = strict
        self.stage_tag = "theta^1"
        self.notes: list[str] = []
        self._q_cache: dict[int, list[int]] = {}

    @property
    def depth(self) -> int:
        return len(self.layers)

    def q_value(self, m: int) -> int:
        return self.sched.stage(m).q

    def q_set(self, m: int) -> list[int]:
        if m not in self._q_cache:
            q = self.q_value(m)
            layer = self.layers[m - 1]
            self._q_cache[m] = [i for i in range(self.win.n) if layer[i] == q]
        return self._q_cache[m]

    def label(self, idx: int, j: int) -> tuple[int, tuple[int, ...]]:
        """j-truncated label: first j C-bits and layers 1..j."""
        mask = (1 << j) - 1
        return (self.c_bits[idx] & mask,
                tuple(self.layers[m][idx] for m in range(j)))

    def copy(self) -> "Labeling":
        out = Labeling(self.win, self.sched, self.c_depth, self.strict)
        out.c_bits = list(self.c_bits)
        out.layers = [list(layer) for layer in self.layers]
        out.core = self.core
        out.stage_tag = self.stage_tag
        out.notes = list(self.notes)
        return out

    def invalidate(self):
        self._q_cache.clear()

    def equal_on(self, other: "Labeling", indices) -> bool:
        for i in indices:
            if self.c_bits[i] != other.c_bits[i]:
                return False
            for m in range(min(self.depth, other.depth)):
                if self.layers[m][i] != other.layers[m][i]:
                    return False
        return True


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _avoidance_set(lab: Labeling, m: int) -> set[int]:
    st = lab.sched.stage(m)
    radius = lab.sched.avoidance_factor * st.s
    level = min(st.f, lab.win.levels)
    return set(lab.win.dist_from(0, level, tmax=radius))


def _cyclic_modulus(win: CayleyWindow, st) -> int | None:
    gs = win.gs
    if not isinstance(gs, ZLattice):
        return None
    if gs.dim == 1:
        return st.spacing if st.spacing is not None else st.r + 1
    mod = (st.r + 1) ** gs.dim
    return mod if mod < st.card_f else None


def _color_layer(lab: Labeling, m: int, markers: set[int]) -> list[int]:
    win, st = lab.win, lab.sched.stage(m)
    level = min(st.f, win.levels)
    q = st.q
    values = [q] * win.n
    policy = lab.sched.coloring
    mod = _cyclic_modulus(win, st) if policy == "cyclic" else None
    if mod is not None:
        gs = win.gs
        if gs.dim == 1:
            for i in range(win.n):
                if i not in markers:
                    values[i] = win.elements[i][0] % mod
        else:
            base = st.r + 1
            for i in range(win.n):
                if i not in markers:
                    coords = win.elements[i]
                    acc = 0
                    for c in reversed(coords):
                        acc = acc * base + (c % base)
                    values[i] = acc % mod
        return values
    # greedy mex in shortlex order; Rule 3 guarantees a free color
    for i in range(win.n):
        if i in markers:
            continue
        used = set()
        for j in win.dist_from(i, level, tmax=st.r):
            if j != i and (j < i or j in markers):
                used.add(values[j])
        c = 0
        while c in used or c == q:
            c += 1
        if c >= st.card_f:
            raise ColoringStuck(f"layer {m}: no color at {win.word(i)}")
        values[i] = c
    return values


def extend_layer(lab: Labeling, m: int) -> None:
    """Materialize layer m on top of layers 1..m-1 (must exist)."""
    if m != lab.depth + 1:
        raise ValueError(f"layer {m} cannot follow depth {lab.depth}")
    if m > lab.sched.depth:
        raise ValueError(f"schedule has no stage {m}")
    st = lab.sched.stage(m)
    level = min(st.f, lab.win.levels)
    if lab.win.radius <= st.r:
        raise WindowTooSmall(f"radius {lab.win.radius} <= r_{m} = {st.r}")
    ambient = range(lab.win.n) if m == 1 else lab.q_set(m - 1)
    forbidden = _avoidance_set(lab, m)
    marker_set = greedy_maximal_sparse(
        lab.win, ambient, st.r, level, forbidden=forbidden,
        interior=lab.win.radius - st.r)
    markers = marker_set.as_set()
    lab.layers.append(_color_layer(lab, m, markers))
    layer = lab.layers[-1]
    for i in markers:
        layer[i] = st.q
    lab.core = min(lab.core, lab.win.radius - st.r)
    lab.invalidate()


def _spread_bits(seed: list[int], shift: int, depth: int) -> int:
    """Digit-spreading prefix: bit 2^n repeats the first seed digit, the
    positions in between carry the later digits."""
    def x(k: int) -> int:  # 1-indexed seed digit
        return seed[(shift + k - 1) % len(seed)]

    out = 0
    for a in range(1, depth + 1):
        if a & (a - 1) == 0:
            bit = x(1)
        else:
            n = a.bit_length() - 1  # 2^n < a < 2^{n+1}
            bit = x(a - (1 << n) + 1)
        out |= bit << (a - 1)
    return out


def initial_clean_labeling(win: CayleyWindow, sched: Schedule, depth: int,
                           c_init: str = "zero", c_depth: int | None = None,
                           seed: list[int] | None = None) -> Labeling:
    """Layer-by-layer construction: greedy marker hierarchy avoiding the
    identity ball, then a distance-r_m proper coloring per layer."""
    if c_depth is None:
        c_depth = max(depth, sched.depth) + 1
    lab = Labeling(win, sched, c_depth=c_depth)
    for m in range(1, depth + 1):
        extend_layer(lab, m)
    if c_init == "zero":
        pass
    elif c_init == "hash":
        for i in range(win.n):
            h = hashlib.sha1(repr(win.word(i)).encode()).digest()
            lab.c_bits[i] = int.from_bytes(h[:8], "big") & ((1 << c_depth) - 1)
    elif c_init == "spread":
        s = seed or [1, 0, 1, 1, 0, 0, 1, 0]
        for i in range(win.n):
            shift = win.elements[i][0] if isinstance(win.gs, ZLattice) else i
            lab.c_bits[i] = _spread_bits(s, shift % len(s), c_depth)
    else:
        raise ValueError(f"unknown c_init {c_init!r}")
    return lab


def inject_spare_defect(lab: Labeling, m: int, idx: int) -> int:
    """Recolor one non-marker cell with a layer-m color that is unused in the
    window.  Cleanliness survives (the value collides with nothing), but the
    cell's neighborhood becomes a rare pattern that only codeball
    installation can make syndetic."""
    layer = lab.layers[m - 1]
    if layer[idx] == lab.q_value(m):
        raise ValueError("cannot corrupt a marker cell")
    used = set(layer)
    spare = None
    for c in range(lab.sched.stage(m).card_f - 1):
        if c not in used:
            spare = c
            break
    if spare is None:
        raise ValueError(f"layer {m} has no unused color")
    layer[idx] = spare
    lab.invalidate()
    lab.notes.append(f"spare-color defect at {lab.win.word(idx)} layer {m}")
    return spare


# ---------------------------------------------------------------------------
# Cleanliness verification
# ---------------------------------------------------------------------------


def _check_coloring(lab: Labeling, m: int) -> Certificate:
    """Condition (3): values distinct within level-f(m) distance r_m."""
    win, st = lab.win, lab.sched.stage(m)
    level = min(st.f, win.levels)
    layer = lab.layers[m - 1]
    witnesses = []
    gs = win.gs
    if isinstance(gs, ZLattice) and gs.dim == 1:
        by_value: dict[int, list[int]] = {}
        for i in range(win.n):
            by_value.setdefault(layer[i], []).append(win.elements[i][0])
        for v, coords in by_value.items():
            coords.sort()
            for a, b in zip(coords, coords[1:]):
                if 0 < b - a <= st.r:
                    witnesses.append(([a], [b], v))
                    break
            if witnesses:
                break
    else:
        stride = 1 if win.n <= 10**4 else max(1, win.n // 10**4)
        for i in range(0, win.n, stride):
            for j, d in win.dist_from(i, level, tmax=st.r).items():
                if j != i and layer[j] == layer[i]:
                    witnesses.append((win.word(i), win.word(j), layer[i]))
                    break
            if witnesses:
                break
    return Certificate(name=f"condition-3-layer-{m}", passed=not witnesses,
                       witnesses=witnesses, measured={"r": st.r})


def verify_clean(lab: Labeling, strict: bool | None = None,
                 core: int | None = None) -> Certificate:
    """Conditions (1)-(3) of clean labelings, plus (4) iff strict."""
    if strict is None:
        strict = lab.strict
    if core is None:
        core = lab.core
    win, sched = lab.win, lab.sched
    parts: list[Certificate] = []
    for m in range(1, lab.depth + 1):
        st = sched.stage(m)
        level = min(st.f, win.levels)
        q = lab.q_set(m)
        parts.append(verify_sparse(win, q, st.r, level))
        parts[-1].name = f"condition-{1 if m == 1 else 2}-sparse-layer-{m}"
        ambient = range(win.n) if m == 1 else lab.q_set(m - 1)
        forb = _avoidance_set(lab, m)
        interior = min(core, win.radius - st.r)
        cert = verify_interior_maximal(win, q, ambient, st.r, level, interior,
                                       forbidden=forb)
        cert.name = f"condition-{1 if m == 1 else 2}-maximal-layer-{m}"
        parts.append(cert)
        if m > 1:
            prev_q = set(lab.q_set(m - 1))
            bad = [win.word(i) for i in q if i not in prev_q][:3]
            parts.append(Certificate(name=f"condition-2-nested-layer-{m}",
                                     passed=not bad, witnesses=bad))
        parts.append(_check_coloring(lab, m))
        if strict:
            radius = sched.avoidance_factor * st.s
            near = win.dist_from(0, level, tmax=radius)
            bad = [win.word(i) for i in q if i in near][:3]
            parts.append(Certificate(name=f"condition-4-layer-{m}",
                                     passed=not bad, witnesses=bad,
                                     measured={"radius": radius}))
    out = merge("clean" if strict else "almost-clean", parts)
    out.core = core
    return out


# ---------------------------------------------------------------------------
# Labeled balls
# ---------------------------------------------------------------------------


def _canon(enc):
    if isinstance(enc, frozenset):
        return tuple(sorted(enc))
    return enc


@dataclass(eq=False)
class LabeledBall:
    """A center-relative labeled pattern.  Relative coordinates are y z^{-1}
    (right quotient), so translation-isomorphism is plain pattern equality."""

    j: int
    t: int
    level: int
    center: int
    pattern: dict
    hash: str
    lab: Labeling = field(repr=False, default=None)

    def __eq__(self, other):
        return (self.j, self.t, self.hash) == (other.j, other.t, other.hash)

    def __hash__(self):
        return hash((self.j, self.t, self.hash))


def extract_ball(lab: Labeling, z: int, t: int, j: int) -> LabeledBall:
    if j > lab.depth or j > lab.c_depth:
        raise LevelMismatch(f"truncation depth {j} beyond materialized {lab.depth}")
    win = lab.win
    st = lab.sched.stage(j)
    level = min(st.f, win.levels)
    if win.depth[z] + t > lab.core:
        raise BallEscapesCore(
            f"ball({win.word(z)}, t={t}) escapes core {lab.core}")
    gs = win.gs
    z_inv = gs.inv(win.elements[z])
    pattern = {}
    for y in win.dist_from(z, level, tmax=t):
        rel = _canon(gs.encode(gs.mul(win.elements[y], z_inv)))
        pattern[rel] = lab.label(y, j)
    digest = hashlib.sha1(
        repr(sorted(pattern.items())).encode()).hexdigest()[:16]
    return LabeledBall(j=j, t=t, level=level, center=z, pattern=pattern,
                       hash=digest, lab=lab)


def ball_isomorphic(b1: LabeledBall, b2: LabeledBall) -> bool:
    if (b1.j, b1.t) != (b2.j, b2.t):
        raise LevelMismatch(f"({b1.j},{b1.t}) vs ({b2.j},{b2.t})")
    return b1.pattern == b2.pattern


def fully_contains(big: LabeledBall, small: LabeledBall):
    """Inner center w with d(center, w) + t' < t and an isomorphic sub-ball,
    searched in shortlex order; None when absent."""
    lab = big.lab
    win = lab.win
    slack = big.t - small.t - 1
    if slack < 0:
        return None
    for w in sorted(win.dist_from(big.center, big.level, tmax=slack)):
        sub = extract_ball(lab, w, small.t, small.j)
        if sub.pattern == small.pattern:
            return w
    return None


@dataclass
class BallType:
    ball: LabeledBall
    count: int
    sites: list[int]


def enumerate_ball_types(lab: Labeling, j: int, radius: int,
                         core: int | None = None) -> list[BallType]:
    """Census of j-truncated radius balls up to isomorphism, canonically
    ordered by hash; each type keeps its occurrence sites."""
    win = lab.win
    if core is None:
        core = lab.core - radius
    if core < 0:
        raise BallEscapesCore("census radius exceeds core")
    types: dict[str, BallType] = {}
    for i in win.core_indices(core):
        b = extract_ball(lab, i, radius, j)
        ty = types.get(b.hash)
        if ty is None:
            types[b.hash] = BallType(ball=b, count=1, sites=[i])
        else:
            ty.count += 1
            ty.sites.append(i)
    return [types[h] for h in sorted(types)]


def is_syndetic(lab: Labeling, pattern: LabeledBall, rho: int, j: int,
                test_core: int | None = None,
                occurrences: list[int] | None = None) -> Certificate:
    """(rho, j)-syndeticity: every element of the test core has an occurrence
    of the pattern within level-f(j) distance rho."""
    win = lab.win
    st = lab.sched.stage(j)
    level = min(st.f, win.levels)
    if test_core is None:
        test_core = max(0, lab.core - rho - pattern.t)
    if occurrences is None:
        occurrences = []
        for i in win.core_indices(lab.core - pattern.t):
            b = extract_ball(lab, i, pattern.t, pattern.j)
            if b.hash == pattern.hash:
                occurrences.append(i)
    covered = win.multisource_dist(occurrences, level, tmax=rho) \
        if occurrences else {}
    witnesses = []
    for g in win.core_indices(test_core):
        if g not in covered:
            witnesses.append(win.word(g))
            break
    return Certificate(name="syndetic", passed=not witnesses, core=test_core,
                       witnesses=witnesses,
                       measured={"rho": rho, "j": j,
                                 "occurrences": len(occurrences)})
