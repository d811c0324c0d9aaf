"""Certificates for the main theorems' finite-window content: minimality
(syndeticity of every occurring pattern), freeness (separation depths),
stability of the stage sequence, and the counting bounds behind them.

The density bound is normatively the half-radius form
density(U) <= |B_s| / |B_{floor(t/2)}| (disjoint-balls argument); the literal
|B_s| / |B_t| comparison is reported informationally alongside.
"""

from __future__ import annotations

from fractions import Fraction

from .certificates import Certificate, merge
from .errors import CoreTooSmall, NotSeparated
from .groups import CayleyWindow, INFINITE
from .labeling import Labeling, enumerate_ball_types, is_syndetic
from .pipeline import StageState
from .schedule import Schedule


def syndetic_radius(sched: Schedule, t: int, j: int = 1) -> tuple[int, int]:
    """Stage n for a j-labeled radius-t pattern (least with s_n > t and
    n >= j, so the pattern embeds in a stage-n census ball) and the scaled
    analogue of the 3 r_{n+1} syndeticity radius."""
    n = None
    for st in sched.stages:
        if st.s > t and st.m >= j:
            n = st.m
            break
    if n is None or n + 1 > sched.depth:
        raise CoreTooSmall(
            f"certifying (j={j}, t={t}) patterns needs a stage n >= {j} with "
            f"s_n > {t} and its successor; schedule depth {sched.depth}")
    return n, 3 * sched.stage(n + 1).r


def verify_minimality(limit: Labeling, sched: Schedule, max_j: int,
                      max_t: int, test_core: int | None = None) -> Certificate:
    """Every occurring (j, t) ball type is syndetic at the schedule's radius."""
    parts = []
    type_total = 0
    for j in range(1, min(max_j, limit.depth) + 1):
        for t in range(1, max_t + 1):
            _, rho = syndetic_radius(sched, t, j)
            core = test_core
            if core is None:
                core = limit.core - rho - t
            if core < 0:
                raise CoreTooSmall(
                    f"syndeticity radius {rho} exceeds core slack")
            census = enumerate_ball_types(limit, j, t)
            type_total += len(census)
            for ty in census:
                cert = is_syndetic(limit, ty.ball, rho, j, test_core=core,
                                   occurrences=ty.sites)
                cert.name = f"syndetic-j{j}-t{t}-{ty.ball.hash}"
                parts.append(cert)
    out = merge("minimality", parts)
    out.measured["types"] = type_total
    out.core = limit.core
    return out


def separation_depth(lab: Labeling, x: int, y: int) -> int | None:
    """Least truncation depth where the labels of x and y differ."""
    for s in range(1, lab.depth + 1):
        if lab.label(x, s) != lab.label(y, s):
            return s
    return None


def verify_freeness(limit: Labeling, sched: Schedule, r_max: int,
                    test_core: int | None = None) -> Certificate:
    """For each r <= r_max, the least S_r separating all pairs at
    G_r-distance <= r; passes iff every S_r exists."""
    win = limit.win
    if test_core is None:
        test_core = max(0, limit.core - r_max)
    table: dict[int, int] = {}
    witnesses = []
    for r in range(1, r_max + 1):
        level = min(r, win.levels)
        worst = 0
        for x in win.core_indices(test_core):
            for y, d in win.dist_from(x, level, tmax=r).items():
                if y <= x:
                    continue
                s = separation_depth(limit, x, y)
                if s is None:
                    witnesses.append((r, win.word(x), win.word(y)))
                    break
                worst = max(worst, s)
            if witnesses:
                break
        if witnesses:
            break
        table[r] = worst
    return Certificate(name="freeness", passed=not witnesses, core=test_core,
                       witnesses=witnesses, measured={"S_r": table})


def density_bound(win: CayleyWindow, V, t: int, s: int, level: int,
                  core: int) -> Certificate:
    """Empirical density of the s-neighborhood of a t-separated set V against
    the half-radius bound, with the literal epsilon reported."""
    if s >= t:
        raise ValueError("s < t required")
    vset = set(V)
    for v in vset:
        near = win.dist_from(v, level, tmax=t)
        for w in near:
            if w != v and w in vset:
                raise NotSeparated(
                    f"{win.word(v)} and {win.word(w)} at distance {near[w]} <= {t}")
    u = win.multisource_dist(vset, level, tmax=s) if vset else {}
    core_idx = win.core_indices(core)
    hit = sum(1 for i in core_idx if i in u)
    density = Fraction(hit, len(core_idx))
    gs = win.gs
    bound_half = Fraction(gs.ball_count(level, s), gs.ball_count(level, t // 2))
    literal = Fraction(gs.ball_count(level, s), gs.ball_count(level, t))
    return Certificate(
        name="density-bound",
        passed=density <= bound_half,
        core=core,
        witnesses=[] if density <= bound_half else [str(density)],
        measured={"density": str(density),
                  "literal_epsilon": str(literal),
                  "literal_holds": density <= literal},
        bounds={"half_radius": str(bound_half)},
    )


def verify_stability(states: list[StageState]) -> Certificate:
    """Changed-point sets Q_n stay away from the identity (measured exclusion)
    and are sparse in the core per the half-radius density bound."""
    if len(states) < 2:
        raise ValueError("need at least two stages")
    parts = []
    for prev, cur in zip(states, states[1:]):
        lab = prev.labeling
        win = lab.win
        sched = lab.sched
        n = prev.stage
        st_next = sched.stage(n + 1)
        q = [y for y in lab.q_set(n + 1)]
        changed = [d.element for d in cur.change_log]
        name = f"stability-{n}->{n+1}"
        if not changed:
            parts.append(Certificate(name=name, passed=True,
                                     measured={"changed": 0}))
            continue
        measured_excl = min(win.depth[e] for e in changed)
        dirty = st_next.s + 4 * sched.stage(n).r
        host_floor = min((win.depth[y] for y in q), default=0)
        predicted = max(0, host_floor - dirty - sched.stage(n).r)
        level = min(st_next.f, win.levels)
        dist_v = win.multisource_dist(q, level) if q else {}
        s_meas = max(dist_v.get(e, 0) for e in changed)
        cert = density_bound(win, q, st_next.r, max(s_meas, 1), level,
                             core=lab.core - st_next.r)
        ok = measured_excl >= predicted and cert.passed
        parts.append(Certificate(
            name=name, passed=ok,
            witnesses=[] if ok else [{"exclusion": measured_excl,
                                      "predicted": predicted}],
            measured={"changed": len(changed),
                      "exclusion_radius": measured_excl,
                      "predicted_floor": predicted,
                      "dirty_radius": s_meas,
                      "density": cert.measured["density"]},
            bounds=cert.bounds))
    return merge("stability", parts)


def stability_symbolic(sched: Schedule, gs) -> Certificate:
    """Exact-mode Rule 2 implication: 10^{m+1} |B_{5 s_{m+1}}| <= |B_{r/10}|
    forces the stage-change density below 10^{-(m+1)}."""
    parts = []
    for prev, cur in zip(sched.stages, sched.stages[1:]):
        m = prev.m
        lhs = 10 ** (m + 1) * gs.ball_count(cur.f, 5 * cur.s)
        rhs = gs.ball_count(cur.f, cur.r // 10)
        order = gs.subgroup_order(cur.f)
        card_ok = order == INFINITE or lhs < order
        parts.append(Certificate(
            name=f"rule2-implication-{m+1}",
            passed=lhs <= rhs and card_ok,
            witnesses=[] if (lhs <= rhs and card_ok) else [str(lhs)],
            measured={"growth_margin": str(Fraction(rhs, lhs))}))
    return merge("stability-symbolic", parts)
