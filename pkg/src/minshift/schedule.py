"""Parameter sequences: the exact big-integer schedule of the rules in force
(s_m, f(m), r_m, |F_m|, kappa_m) and desk-scale schedules driven by observed
type counts instead of the full labeling count kappa.

Exact mode is a calculator; its stage >= 2 magnitudes are astronomical and no
labeling is ever materialized under it.  Scaled mode preserves the structural
inequalities with small constants and is what actual window runs consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import BackendCannotCount, CapacityExceeded, Infeasible
from .groups import INFINITE, CayleyWindow, ZLattice

# kappa is materialized only below this many bits (exact mode refuses beyond).
KAPPA_BIT_CAP = 1 << 24


@dataclass
class StageParams:
    m: int
    s: int
    f: int
    r: int
    card_f: int
    kappa: int | None = None          # exact mode; None = beyond bit cap
    tau: int | None = None            # scaled mode: observed type count
    install: int | None = None        # scaled mode: sites actually required
    spacing: int | None = None        # expected marker spacing (Z, d = 1)
    notes: list[str] = field(default_factory=list)

    @property
    def q(self) -> int:
        """Distinguished marker label: the last value of F_m."""
        return self.card_f - 1


@dataclass
class ScaledConfig:
    """Desk-scale substitute for the exact rule magnitudes.

    ``site_spacing`` (the paper's 20) keeps simultaneous supersize patches
    disjoint and must stay >= 20.  ``growth`` scales the interleave sum bound
    on r.  ``avoidance_factor`` scales the identity-ball radius of the marker
    avoidance condition (10 in exact mode).  ``empirical_types``: size stages
    from observed type counts rather than kappa.
    """

    s1: int = 2
    site_spacing: int = 20
    growth: int = 1
    avoidance_factor: int = 1
    empirical_types: bool = True
    coloring: str = "cyclic"          # "cyclic" (lattice) or "greedy"
    install_all: bool = False
    stride_factor: int | None = None  # target-radius stride; default c + 5

    def validate(self):
        if self.s1 < 1:
            raise Infeasible("s_1 >= 1 required")
        if self.site_spacing < 20:
            raise Infeasible("site spacing multiplier c >= 20 required "
                             "(patch disjointness arithmetic)")
        if self.growth < 1 or self.avoidance_factor < 1:
            raise Infeasible("all multipliers must be >= 1")
        if self.coloring not in ("cyclic", "greedy"):
            raise Infeasible(f"unknown coloring policy {self.coloring!r}")

    @property
    def stride(self) -> int:
        return self.stride_factor if self.stride_factor is not None else self.site_spacing + 5


@dataclass
class Schedule:
    mode: str                      # "exact" | "scaled"
    group_spec: dict
    stages: list[StageParams]
    avoidance_factor: int          # exact: 10
    site_spacing: int              # exact: 20
    growth: int                    # exact: 1000
    stride_factor: int            # exact: 100 (= 5c)
    coloring: str = "greedy"
    install_all: bool = False
    next_s: int | None = None      # s_{stages+1} preview when computable

    def stage(self, m: int) -> StageParams:
        return self.stages[m - 1]

    @property
    def depth(self) -> int:
        return len(self.stages)

    def avoidance_radius(self, m: int) -> int:
        return self.avoidance_factor * self.stage(m).s

    def to_json(self) -> dict:
        out = {
            "mode": self.mode,
            "group": self.group_spec,
            "avoidance_factor": self.avoidance_factor,
            "site_spacing": self.site_spacing,
            "growth": self.growth,
            "stride_factor": self.stride_factor,
            "coloring": self.coloring,
            "install_all": self.install_all,
            "next_s": str(self.next_s) if self.next_s is not None else None,
            "stages": [],
        }
        for st in self.stages:
            out["stages"].append({
                "m": st.m,
                "s": str(st.s),
                "f": str(st.f),
                "r": str(st.r),
                "card_f": str(st.card_f),
                "kappa": str(st.kappa) if st.kappa is not None else None,
                "tau": st.tau,
                "install": st.install,
                "spacing": st.spacing,
                "notes": st.notes,
            })
        return out


# ---------------------------------------------------------------------------
# Exact mode
# ---------------------------------------------------------------------------


def _ball_ge(gs, f: int, t: int, target: int) -> bool:
    """|B_t(G_f)| >= target, avoiding astronomically long integers where a
    cheap exponential lower bound already decides."""
    if hasattr(gs, "rank"):
        k = gs.effective_generators(f)
        if k >= 2 and t * ((2 * k - 1).bit_length() - 1) > target.bit_length():
            return True  # (2k-1)^t alone clears the target
        if t > 10**6:
            raise BackendCannotCount(f"free-group ball at radius {t} undecidable cheaply")
    return gs.ball_count(f, t) >= target


def _min_r_for_growth(gs, f: int, target: int) -> int:
    """Least r with |B_{floor(r/10)}(G_f)| >= target (binary search; ball
    growth is monotone in the radius)."""
    hi = 1
    while not _ball_ge(gs, f, hi, target):
        hi *= 2
        if hi > 10**400:
            raise BackendCannotCount("growth radius search exploded")
    lo = 0
    while lo < hi:
        mid = (lo + hi) // 2
        if _ball_ge(gs, f, mid, target):
            hi = mid
        else:
            lo = mid + 1
    return 10 * lo


def _kappa(card_f: int, ball: int) -> int | None:
    if ball * card_f.bit_length() > KAPPA_BIT_CAP:
        return None
    return card_f**ball


def exact_schedule(gs, stages: int) -> Schedule:
    """The rules verbatim: s_1 = 10, then Rule 1/2/3 with minimal choices.

    Raises BackendCannotCount when a value required for the requested number
    of stages cannot be computed exactly (e.g. kappa beyond the bit cap, or
    ball counts without closed form at astronomical radii).
    """
    if stages < 1:
        raise ValueError("stages >= 1")
    out: list[StageParams] = []
    s = 10
    # f(1): 10 |B_50(G_f)| < |Gamma_f|
    f = 1
    while True:
        order = gs.subgroup_order(f)
        if order == INFINITE or 10 * gs.ball_count(f, 5 * s) < order:
            break
        f += 1
        if f > 10**6:
            raise BackendCannotCount("f(1) search exploded")
    r_hist = [0]
    s_hist = []
    m = 1
    while True:
        target = 10**m * gs.ball_count(f, 5 * s)
        r = _min_r_for_growth(gs, f, target)
        if m > 1:
            s_hist_sum = sum(5 * r_hist[j - 1] + s_hist[j - 1] for j in range(1, m)) \
                + 5 * r_hist[m - 1] + s
            r = max(r, 1000 * s_hist_sum)
            # growth is monotone in r, so the max still satisfies it
        ball_r = _try_ball(gs, f, r)
        if ball_r is None or ball_r.bit_length() > KAPPA_BIT_CAP:
            raise BackendCannotCount(f"|B_r{m}| not materializable exactly")
        card_f = ball_r + 1
        kappa = _kappa(card_f, gs.ball_count(f, s))
        st = StageParams(m=m, s=s, f=f, r=r, card_f=card_f, kappa=kappa)
        st.notes.append(f"r_{m} from growth target 10^{m}|B_{{5 s_{m}}}|"
                        + (" and Rule 2 sum bound" if m > 1 else ""))
        out.append(st)
        s_hist.append(s)
        r_hist.append(r)
        if m == stages:
            break
        # Rule 1: s_{m+1} = 1000 r_m kappa_m
        if kappa is None:
            raise BackendCannotCount(
                f"kappa_{m} exceeds {KAPPA_BIT_CAP} bits; cannot size stage {m+1}")
        s = 1000 * r * kappa
        # Rule 2: f(m+1) > f(m), > n_{1000 r_m kappa_m}, cardinality bound
        n_t = far_point_level(gs, s)
        f_next = max(f, n_t) + 1
        while True:
            order = gs.subgroup_order(f_next)
            if order == INFINITE:
                break
            ball = _try_ball(gs, f_next, 5 * s)
            if ball is None:
                raise BackendCannotCount(
                    f"|B_{{5 s_{m+1}}}(G_{f_next})| not computable exactly")
            if 10 ** (m + 1) * ball < order:
                break
            f_next += 1
            if f_next > 10**7:
                raise BackendCannotCount("f search exploded")
        f = f_next
        m += 1
    sched = Schedule(
        mode="exact",
        group_spec=gs.spec(),
        stages=out,
        avoidance_factor=10,
        site_spacing=20,
        growth=1000,
        stride_factor=100,
        coloring="greedy",
    )
    last = out[-1]
    if last.kappa is not None:
        sched.next_s = 1000 * last.r * last.kappa
    return sched


def _try_ball(gs, level: int, t: int) -> int | None:
    """Exact ball count, or None when the value itself would be astronomically
    long or needs astronomically many summation terms."""
    if isinstance(gs, ZLattice):
        return gs.ball_count(level, t)
    if hasattr(gs, "rank"):  # free group closed form, exponential in t
        k = gs.effective_generators(level)
        if k >= 2 and t * (2 * k - 1).bit_length() > KAPPA_BIT_CAP:
            return None
        return gs.ball_count(level, t)
    if hasattr(gs, "distinct_count"):
        d = gs.distinct_count(level)
        if t >= d:
            return 2**d
        if t > 10**6:
            return None
        return gs.ball_count(level, t)
    if t > 10**6:
        return None
    return gs.ball_count(level, t)


def far_point_level(gs, T: int) -> int:
    """n_T without materializing a witness (Lemma kival, closed forms)."""
    if hasattr(gs, "dim") or hasattr(gs, "rank"):
        return 1
    if hasattr(gs, "distinct_count") and gs.indices is None:
        return T
    n, _ = gs.far_point(T)
    return n


def rule_assertions(sched: Schedule, gs) -> list[tuple[str, bool]]:
    """Every Rule 1-3 inequality, evaluated with exact integers."""
    checks: list[tuple[str, bool]] = []
    seq: list[int] = []
    for st in sched.stages:
        seq.extend([st.s, st.r])
    checks.append(("interleaving s1<r1<s2<r2<...",
                   all(a < b for a, b in zip(seq, seq[1:]))))
    for st in sched.stages:
        checks.append((f"Rule 3: |B_r{st.m}| < |F_{st.m}|",
                       gs.ball_count(st.f, st.r) < st.card_f))
        growth_target = 10**st.m * gs.ball_count(st.f, 5 * st.s)
        checks.append((f"growth: |B_r{st.m}/10| >= 10^{st.m} |B_5s{st.m}|",
                       gs.ball_count(st.f, st.r // 10) >= growth_target))
        order = gs.subgroup_order(st.f)
        ok = order == INFINITE or 10**st.m * gs.ball_count(st.f, 5 * st.s) < order
        checks.append((f"Rule 2 cardinality at f({st.m})", ok))
        if st.m > 1:
            prev = sched.stage(st.m - 1)
            bound = 1000 * sum(5 * sched.stage(j - 1).r if j > 1 else 0
                               for j in range(1, st.m + 1))
            bound += 1000 * sum(sched.stage(j).s for j in range(1, st.m + 1))
            checks.append((f"Rule 2: r_{st.m} >= 1000 sum", st.r >= bound))
            if prev.kappa is not None:
                checks.append((f"Rule 1: s_{st.m} = 1000 r kappa",
                               st.s == 1000 * prev.r * prev.kappa))
        if st.kappa is not None:
            checks.append((f"kappa_{st.m} = |F|^|B_s|",
                           st.kappa == st.card_f ** gs.ball_count(st.f, st.s)))
    return checks


# ---------------------------------------------------------------------------
# Scaled mode
# ---------------------------------------------------------------------------


@dataclass
class StageFeedback:
    """What stage m actually produced: census size and sites to install."""
    tau: int
    install: int


def _roundup(x: int, mult: int) -> int:
    return mult * ((x + mult - 1) // mult)


def _expected_spacing(r: int, prev_spacing: int) -> int:
    """Marker spacing on Z when layer candidates sit on a prev_spacing grid."""
    return _roundup(r + 1, prev_spacing)


def _capacity_need(install: int, r: int, cfg: ScaledConfig) -> int:
    """Smallest s_{m+1} whose annulus hosts ``install`` sites (Z arithmetic;
    other backends are checked constructively by select_annulus_sites)."""
    if install <= 0:
        return 0
    stride = cfg.stride * r + 1
    per_side = (install + 1) // 2
    span = (per_side - 1) * stride if per_side > 1 else 0
    return 3 * (span + 20 * r + stride)


def scaled_schedule(gs, stages: int, cfg: ScaledConfig,
                    feedback: list[StageFeedback]) -> Schedule:
    """Build a runnable schedule from observed per-stage feedback.

    ``feedback[m-1]`` sizes s_{m+1}; entries beyond what is supplied fall
    back to the periodic prediction tau_m = expected spacing (valid for the
    cyclic coloring on Z, where the stage-m labeling is exactly periodic).
    """
    cfg.validate()
    if stages < 1:
        raise ValueError("stages >= 1")
    is_z = isinstance(gs, ZLattice) and gs.dim == 1
    out: list[StageParams] = []
    s = cfg.s1
    r_prev = 0
    spacing_prev = 1
    interleave_sum = 0
    for m in range(1, stages + 1):
        interleave_sum += 5 * r_prev + s
        # the 2(a s + p_prev) term blocks the mirrored first marker, keeping
        # greedy marker classes single-phase so patch transports stay aligned
        r = max(s + 1,
                2 * (s + 4 * r_prev) + 2,
                2 * (cfg.avoidance_factor * s + spacing_prev) + 2,
                cfg.growth * interleave_sum)
        card_f = gs.ball_count(m, r) + 1
        if not card_f > gs.ball_count(m, r):
            raise Infeasible(f"Rule 3 violated at stage {m}")
        spacing = _expected_spacing(r, spacing_prev) if is_z else None
        st = StageParams(m=m, s=s, f=m, r=r, card_f=card_f, spacing=spacing)
        st.notes.append(f"r_{m} = max(interleave, patch disjointness, "
                        f"growth {cfg.growth} * sum)")
        out.append(st)
        if m == stages:
            break
        if m <= len(feedback):
            fb = feedback[m - 1]
        else:
            pred = spacing if spacing is not None else card_f
            fb = StageFeedback(tau=pred, install=pred if cfg.install_all else 0)
        st.tau, st.install = fb.tau, fb.install
        need = _capacity_need(fb.install, r, cfg)
        if fb.tau > 0:
            contain = (spacing if spacing is not None else 2 * r) + s + 1
        else:
            contain = 0
        s = max(r + 1, contain, need)
        r_prev = r
        spacing_prev = spacing if spacing is not None else 1
    sched = Schedule(
        mode="scaled",
        group_spec=gs.spec(),
        stages=out,
        avoidance_factor=cfg.avoidance_factor,
        site_spacing=cfg.site_spacing,
        growth=cfg.growth,
        stride_factor=cfg.stride,
        coloring=cfg.coloring,
        install_all=cfg.install_all,
    )
    _check_scaled(sched, gs)
    return sched


def _check_scaled(sched: Schedule, gs):
    seq: list[int] = []
    for st in sched.stages:
        seq.extend([st.s, st.r])
    if not all(a < b for a, b in zip(seq, seq[1:])):
        raise Infeasible(f"interleaving failed: {seq}")
    for st in sched.stages:
        if not gs.ball_count(st.f, st.r) < st.card_f:
            raise Infeasible(f"Rule 3 violated at stage {st.m}")
    for prev, nxt in zip(sched.stages, sched.stages[1:]):
        if prev.install:
            need = _capacity_need(prev.install, prev.r,
                                  ScaledConfig(site_spacing=sched.site_spacing,
                                               stride_factor=sched.stride_factor))
            if nxt.s < need:
                raise CapacityExceeded(
                    f"annulus of s_{nxt.m} = {nxt.s} cannot host "
                    f"{prev.install} sites (needs {need})")


# ---------------------------------------------------------------------------
# Annulus site selection (Rule 1 / Lemma largeenough shape)
# ---------------------------------------------------------------------------


def select_annulus_sites(win: CayleyWindow, z: int, m: int, T,
                         count: int, sched: Schedule) -> list[int]:
    """Pick ``count`` elements of T in the annulus [s_{m+1}/3, 2 s_{m+1}/3]
    around z, pairwise further apart than c * r_m at level f(m+1).

    Construction: walk target radii spaced ``stride_factor * r_m`` through
    the annulus, snap each shell candidate to the nearest T-point (a
    2 r_m-net), keep those that respect the pairwise spacing.
    """
    if count == 0:
        return []
    st = sched.stage(m)
    if sched.depth > m:
        s_next = sched.stage(m + 1).s
        level = sched.stage(m + 1).f
    elif sched.next_s is not None:
        s_next, level = sched.next_s, st.f + 1
    else:
        raise Infeasible(f"no s_{m+1} available for annulus selection")
    level = min(level, win.levels)
    r = st.r
    c = sched.site_spacing
    stride = sched.stride_factor * r + 1
    inner = s_next // 3 + 10 * r
    outer = 2 * s_next // 3 - 10 * r
    if win.depth[z] + 2 * s_next // 3 + 2 * r > win.radius:
        raise CapacityExceeded("annulus escapes window")
    dist_z = win.dist_from(z, level)
    tset = set(T)
    shells: dict[int, list[int]] = {}
    for idx, d in dist_z.items():
        shells.setdefault(d, []).append(idx)
    sites: list[int] = []
    target = inner
    while target <= outer and len(sites) < count:
        for cand in sorted(shells.get(target, ())):
            snap = _snap_to_net(win, cand, tset, 2 * r, level)
            if snap is None:
                continue
            dz = dist_z.get(snap)
            if dz is None or not (s_next / 3 <= dz <= 2 * s_next / 3):
                continue
            if snap in sites:
                continue
            near = win.dist_from(snap, level, tmax=c * r)
            if any(w in near for w in sites):
                continue
            sites.append(snap)
            if len(sites) >= count:
                break
        target += stride
    if len(sites) < count:
        raise CapacityExceeded(
            f"annulus hosts only {len(sites)} of {count} sites "
            f"(s_{m+1} = {s_next}, spacing > {c * r})")
    return sites


def _snap_to_net(win: CayleyWindow, x: int, tset: set[int], tmax: int,
                 level: int) -> int | None:
    dist = win.dist_from(x, level, tmax=tmax)
    best = None
    best_d = tmax + 1
    for idx, d in dist.items():
        if idx in tset and (d < best_d or (d == best_d and idx < best)):
            best, best_d = idx, d
    return best
