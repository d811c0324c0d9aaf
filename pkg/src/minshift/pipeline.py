"""The stage-advance engine: codeball construction (round one), the repair
cascade, global codeball propagation (round two), and the stabilized limit.

A run alternates schedule extension and labeling work: the census of stage m
feeds the sizing of stage m+1 (observed type counts replace kappa), the next
marker layer is materialized, and the stage advances.  Every quantifier is a
core quantifier; each stage records the radius its guarantees hold on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .certificates import Certificate
from .errors import (
    BallEscapesCore,
    CapacityExceeded,
    CascadeDiverged,
    CoreExhausted,
    NoMarkerInCore,
    NothingStabilized,
    SearchExhausted,
    WindowTooSmall,
)
from .groups import INFINITE, CayleyWindow, ZLattice
from .labeling import (
    BallType,
    LabeledBall,
    Labeling,
    enumerate_ball_types,
    extend_layer,
    extract_ball,
    initial_clean_labeling,
)
from .patcher import DiffEntry, PatchRequest, simultaneous_patch
from .schedule import ScaledConfig, Schedule, StageFeedback, scaled_schedule, select_annulus_sites


@dataclass
class Codeball:
    j: int
    ball: LabeledBall
    donor: Labeling
    center: int
    directory: dict[str, int]  # census-type hash -> inner center index


@dataclass
class RepairEvent:
    level: int     # the i of the i-repair
    center: int    # the Bad_i element that was patched


@dataclass
class StageState:
    stage: int
    labeling: Labeling
    codeballs: dict[int, Codeball] = field(default_factory=dict)
    census: list[BallType] = field(default_factory=list)
    change_log: list[DiffEntry] = field(default_factory=list)
    repair_events: list[RepairEvent] = field(default_factory=list)
    certificates: list[Certificate] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Bad sets and repair
# ---------------------------------------------------------------------------


def bad_set(lab: Labeling, i: int, codeball: Codeball) -> list[int]:
    """Level-i markers whose s_i-ball is not isomorphic to the i-codeball."""
    st = lab.sched.stage(i)
    win = lab.win
    out = []
    for y in lab.q_set(i):
        if win.depth[y] + st.s > lab.core:
            continue
        if extract_ball(lab, y, st.s, i).hash != codeball.ball.hash:
            out.append(y)
    return out


def repair(lab: Labeling, i: int, codeball: Codeball):
    """Patch the codeball's s_i + r_{i-1} neighborhood around every Bad_i
    element; Bad_i of the output is empty."""
    bad = bad_set(lab, i, codeball)
    if not bad:
        return lab, []
    reqs = [PatchRequest("regular", codeball.donor, codeball.center, y, i)
            for y in bad]
    res = simultaneous_patch(lab, reqs)
    return res.labeling, [RepairEvent(level=i, center=y) for y in bad]


def repair_cascade(lab: Labeling, top: int, codeballs: dict[int, Codeball]):
    """Sweep i = top..2, then assert every Bad_i is empty.

    Also assembles the touched-region chains from the repair events and
    certifies their diameters against the reach bound the emptiness argument
    needs (r_{i-1}/10 with exact magnitudes, r_{i-1}/2 scaled).
    """
    events: list[RepairEvent] = []
    for i in range(top, 1, -1):
        if i not in codeballs:
            continue
        lab, evs = repair(lab, i, codeballs[i])
        events.extend(evs)
    for i in range(2, top + 1):
        if i in codeballs:
            residue = bad_set(lab, i, codeballs[i])
            if residue:
                raise CascadeDiverged(
                    f"Bad_{i} nonempty after sweep: "
                    f"{[lab.win.word(y) for y in residue[:3]]}")
    cert = _chain_certificate(lab, events)
    return lab, events, cert


def _chain_certificate(lab: Labeling, events: list[RepairEvent]) -> Certificate:
    win, sched = lab.win, lab.sched
    if not events:
        return Certificate(name="repair-chains", passed=True,
                           measured={"chains": 0})
    regions = []
    for ev in events:
        st = sched.stage(ev.level)
        r_prev = sched.stage(ev.level - 1).r if ev.level > 1 else 0
        radius = st.s + 5 * r_prev
        level = min(st.f, win.levels)
        regions.append((ev.level, set(win.dist_from(ev.center, level, tmax=radius))))
    # merge intersecting regions into chains
    chains: list[tuple[int, set[int]]] = []
    for lvl, reg in regions:
        merged = False
        for k, (mlvl, mreg) in enumerate(chains):
            if mreg & reg:
                chains[k] = (max(mlvl, lvl), mreg | reg)
                merged = True
                break
        if not merged:
            chains.append((lvl, reg))
    witnesses = []
    measured = []
    divisor = 10 if sched.mode == "exact" else 2
    for top_level, members in chains:
        diam = _diameter(win, members, min(sched.stage(top_level).f, win.levels))
        bound = sched.stage(top_level).r / divisor  # r_{i-1} with i = top+1
        measured.append({"levels<=": top_level, "diameter": diam, "bound": bound})
        if diam >= bound:
            witnesses.append({"diameter": diam, "bound": bound})
    return Certificate(name="repair-chains", passed=not witnesses,
                       witnesses=witnesses,
                       measured={"chains": len(chains), "detail": measured})


def _diameter(win: CayleyWindow, members: set[int], level: int) -> int:
    gs = win.gs
    if isinstance(gs, ZLattice) and gs.dim == 1:
        coords = [win.elements[i][0] for i in members]
        return max(coords) - min(coords)
    best = 0
    for i in members:
        dist = win.dist_from(i, level)
        best = max(best, max(dist.get(j, 0) for j in members))
    return best


# ---------------------------------------------------------------------------
# Round one: the codeball
# ---------------------------------------------------------------------------


def _far_threshold(sched: Schedule, m: int) -> int:
    st = sched.stage(m)
    spacing = st.spacing if st.spacing is not None else st.r + 1
    return sched.avoidance_radius(m) + st.s + 2 * spacing


def census_feedback(lab: Labeling, m: int) -> tuple[list[BallType], StageFeedback]:
    """Census of stage m plus the install demand for sizing stage m+1.

    A type recurs inside the next codeball for free when it occurs in the
    far field on the side the codeball center will be picked from; everything
    else (identity-region anomalies, opposite-side flavors) needs an annulus
    site.  build_codeball re-checks presence against the actual ball.
    """
    st = lab.sched.stage(m)
    census = enumerate_ball_types(lab, m, st.s)
    if lab.sched.install_all:
        install = len(census)
    else:
        far = _far_threshold(lab.sched, m)
        win = lab.win
        gs = win.gs
        one_dim = isinstance(gs, ZLattice) and gs.dim == 1
        spacing = st.spacing if st.spacing is not None else st.r + 1

        def naturally_present(ty: BallType) -> bool:
            # a type recurs in the codeball iff it shows up in a generic
            # far-field stretch on the center's side (one full period wide)
            for site in ty.sites:
                d = win.depth[site]
                if one_dim:
                    c = win.elements[site][0]
                    if far <= c <= far + 4 * spacing:
                        return True
                elif d >= far:
                    return True
            return False

        install = sum(1 for ty in census if not naturally_present(ty))
    return census, StageFeedback(tau=len(census), install=install)


def build_codeball(state: StageState):
    """Round one: pick the least feasible level-(n+1) marker, install every
    census type that the ball does not already contain, run the cascade, and
    cut the codeball."""
    lab = state.labeling
    n = state.stage
    sched, win = lab.sched, lab.win
    st_next = sched.stage(n + 1)
    st = sched.stage(n)
    census = state.census or enumerate_ball_types(lab, n, st.s)

    z = None
    for c in lab.q_set(n + 1):
        if win.depth[c] + st_next.s <= lab.core:
            z = c
            break
    if z is None:
        raise NoMarkerInCore(f"no level-{n+1} marker with an s_{n+1}-ball in core")

    level_next = min(st_next.f, win.levels)
    dist_z = win.dist_from(z, level_next, tmax=st_next.s)
    if sched.install_all:
        missing = list(census)
    else:
        missing = []
        for ty in census:
            present = any(dist_z.get(s, INFINITE) + st.s < st_next.s
                          for s in ty.sites)
            if not present:
                missing.append(ty)

    events: list[RepairEvent] = []
    hat = lab
    if missing:
        planned = sched.stage(n).install
        if planned is not None and len(missing) > planned:
            err = CapacityExceeded(
                f"stage {n} needs {len(missing)} installs, planned {planned}")
            err.install_correction = (n, len(missing))
            raise err
        sites = select_annulus_sites(win, z, n, lab.q_set(n), len(missing), sched)
        reqs = []
        for ty, w in zip(missing, sites):
            donor_center = _find_donor(lab, n, ty)
            reqs.append(PatchRequest("supersize", lab, donor_center, w, n))
        hat = simultaneous_patch(lab, reqs).labeling
    if state.codeballs:
        hat, events, chain_cert = repair_cascade(hat, n, state.codeballs)
        state.certificates.append(chain_cert)

    ball = extract_ball(hat, z, st_next.s, n + 1)
    directory = _containment_directory(hat, z, census, n, st.s, st_next.s)
    return Codeball(j=n + 1, ball=ball, donor=hat, center=z,
                    directory=directory), events


def _find_donor(lab: Labeling, n: int, ty: BallType) -> int:
    """A level-n marker whose 2 r_n ball fully contains the type; exists
    because the marker set is a net (Lemma net)."""
    win = lab.win
    st = lab.sched.stage(n)
    level = min(st.f, win.levels)
    markers = set(lab.q_set(n))
    for w in ty.sites:
        near = win.dist_from(w, level, tmax=2 * st.r - st.s - 1)
        cands = sorted((d, i) for i, d in near.items() if i in markers)
        for d, cand in cands:
            if win.depth[cand] + 3 * st.r <= lab.core:
                return cand
    raise SearchExhausted(
        f"no donor marker hosts type {ty.ball.hash} (window too small)")


def _containment_directory(lab: Labeling, z: int, census: list[BallType],
                           n: int, t_small: int, t_big: int) -> dict[str, int]:
    """For each census type, the first inner center of the codeball whose
    sub-ball realizes it; raises when a type is missing (the induction
    invariant would break)."""
    win = lab.win
    level = min(lab.sched.stage(n + 1).f, win.levels)
    slack = t_big - t_small - 1
    seen: dict[str, int] = {}
    for w in sorted(win.dist_from(z, level, tmax=slack)):
        h = extract_ball(lab, w, t_small, n).hash
        if h not in seen:
            seen[h] = w
    directory = {}
    missing = []
    for ty in census:
        if ty.ball.hash in seen:
            directory[ty.ball.hash] = seen[ty.ball.hash]
        else:
            missing.append(ty.ball.hash)
    if missing:
        raise SearchExhausted(
            f"codeball misses {len(missing)} census types: {missing[:3]}")
    return directory


# ---------------------------------------------------------------------------
# Round two and the advance driver
# ---------------------------------------------------------------------------


def advance_stage(state: StageState) -> StageState:
    """Build the (n+1)-codeball, patch it around every level-(n+1) marker of
    Theta^n, cascade repairs, and certify the summary invariant."""
    lab = state.labeling
    n = state.stage
    sched, win = lab.sched, lab.win
    st_next = sched.stage(n + 1)
    codeball, events = build_codeball(state)

    r_n = sched.stage(n).r
    dirty = st_next.s + 4 * r_n
    hosts = [y for y in lab.q_set(n + 1) if win.depth[y] + dirty <= lab.core]
    if codeball.center not in hosts:
        hosts.append(codeball.center)
    reqs = [PatchRequest("regular", codeball.donor, codeball.center, y, n + 1)
            for y in sorted(hosts)]
    res = simultaneous_patch(lab, reqs)
    new_lab = res.labeling

    codeballs = dict(state.codeballs)
    codeballs[n + 1] = codeball
    new_lab, cascade_events, chain_cert = repair_cascade(new_lab, n + 1, codeballs)
    new_lab.stage_tag = f"theta^{n + 1}"

    change_log = _diff_labelings(lab, new_lab)
    new_state = StageState(
        stage=n + 1,
        labeling=new_lab,
        codeballs=codeballs,
        change_log=change_log,
        repair_events=events + cascade_events,
    )
    new_state.certificates.append(chain_cert)
    new_state.certificates.append(verify_summ(new_state))
    return new_state


def _diff_labelings(old: Labeling, new: Labeling) -> list[DiffEntry]:
    diff = []
    depth = min(old.depth, new.depth)
    for i in range(old.win.n):
        if old.c_bits[i] != new.c_bits[i]:
            diff.append(DiffEntry(i, "C", old.c_bits[i], new.c_bits[i]))
        for m in range(depth):
            if old.layers[m][i] != new.layers[m][i]:
                diff.append(DiffEntry(i, m + 1, old.layers[m][i],
                                      new.layers[m][i]))
    return diff


def verify_summ(state: StageState) -> Certificate:
    """Every level-j marker in core carries a ball isomorphic to B_j."""
    lab = state.labeling
    win = lab.win
    witnesses = []
    checked = 0
    for j, cb in sorted(state.codeballs.items()):
        s_j = lab.sched.stage(j).s
        for z in lab.q_set(j):
            if win.depth[z] + s_j > lab.core:
                continue
            checked += 1
            if extract_ball(lab, z, s_j, j).hash != cb.ball.hash:
                witnesses.append((j, win.word(z)))
    return Certificate(name="summ", passed=not witnesses, stage=state.stage,
                       core=lab.core, witnesses=witnesses,
                       measured={"markers_checked": checked})


def stabilized_limit(states: list[StageState], win: CayleyWindow):
    """The label of z is final once every remaining stage's changes stay
    further out than z; reports the surviving core radius."""
    if len(states) < 2:
        raise NothingStabilized("need at least two stages")
    final = states[-1].labeling
    exclusion = final.core
    for st in states[1:]:
        if st.change_log:
            nearest = min(win.depth[d.element] for d in st.change_log)
            exclusion = min(exclusion, nearest - 1)
    if exclusion < 0:
        raise NothingStabilized("changes reached the identity; no core survives")
    limit = final.copy()
    limit.core = min(final.core, exclusion)
    limit.stage_tag = "theta^inf"
    cert = Certificate(
        name="stabilized-limit", passed=True, core=limit.core,
        measured={"exclusion_radius": exclusion,
                  "stages": len(states)})
    return limit, cert


# ---------------------------------------------------------------------------
# Full run driver
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    window: CayleyWindow
    schedule: Schedule
    states: list[StageState]
    limit: Labeling | None = None
    limit_cert: Certificate | None = None


def plan_radius(gs, cfg: ScaledConfig, stages: int,
                feedback: list[StageFeedback] | None = None,
                test_core: int = 600) -> int:
    """Window radius so that the requested stage count fits with margins for
    the certificates, given the feedback known so far (missing stages use the
    periodic prediction; the run re-checks everything)."""
    sched = scaled_schedule(gs, stages, cfg, feedback or [])
    last = sched.stage(stages)
    prev_r = sched.stage(stages - 1).r if stages > 1 else 0
    spacing = last.spacing if last.spacing is not None else last.r + 1
    z_max = sched.avoidance_radius(stages) + spacing
    build_need = z_max + 2 * spacing + last.s + 4 * prev_r
    cert_need = test_core + 3 * last.r + last.s
    return max(build_need, cert_need) + last.r + 8


GROWTH_ERRORS = (WindowTooSmall, CapacityExceeded, CoreExhausted,
                 NoMarkerInCore, BallEscapesCore)


def run_pipeline(gs, cfg: ScaledConfig, stages: int,
                 radius: int | None = None,
                 c_depth: int | None = None) -> RunResult:
    """Build Theta^1 and advance stage by stage with census feedback.

    Stage sizes depend on measured type counts, which the initial plan cannot
    know; when the planned window turns out too small, the run restarts with
    the feedback gathered so far (a deterministic probe-and-retry loop)."""
    if c_depth is None:
        c_depth = stages + 1
    hint: list[StageFeedback] = []
    last_err = None
    for _ in range(8):
        r_now = radius if radius is not None else plan_radius(gs, cfg, stages, hint)
        try:
            return _run_once(gs, cfg, stages, r_now, c_depth)
        except GROWTH_ERRORS as err:
            if radius is not None:
                raise
            fb = getattr(err, "feedback", None)
            if fb is None or fb == hint:
                raise  # no new sizing information; honest failure
            hint = fb
            last_err = err
    raise WindowTooSmall(f"window sizing did not converge: {last_err}")


def _run_once(gs, cfg: ScaledConfig, stages: int, radius: int,
              c_depth: int) -> RunResult:
    win = CayleyWindow(gs, radius, levels=stages)
    feedback: list[StageFeedback] = []
    sched = scaled_schedule(gs, stages, cfg, feedback)
    lab = initial_clean_labeling(win, sched, depth=1, c_depth=c_depth)
    state = StageState(stage=1, labeling=lab)
    states = [state]
    try:
        state.census, fb = census_feedback(lab, 1)
        feedback.append(fb)
        for n in range(1, stages):
            new_sched = scaled_schedule(gs, stages, cfg, feedback)
            _swap_schedule(states, new_sched)
            if state.labeling.depth < n + 1:
                extend_layer(state.labeling, n + 1)
            state = advance_stage(state)
            if n + 1 < stages:
                state.census, fb = census_feedback(state.labeling, n + 1)
                feedback.append(fb)
            states.append(state)
    except GROWTH_ERRORS as err:
        err.feedback = feedback
        raise
    result = RunResult(window=win, schedule=states[-1].labeling.sched,
                       states=states)
    if len(states) >= 2:
        result.limit, result.limit_cert = stabilized_limit(states, win)
    return result


def _swap_schedule(states: list[StageState], sched: Schedule):
    """Replace the schedule on live labelings; built-stage parameters must
    be unchanged (feedback only sizes later stages)."""
    for st in states:
        old = st.labeling.sched
        for m in range(1, st.labeling.depth + 1):
            a, b = old.stage(m), sched.stage(m)
            if (a.s, a.f, a.r, a.card_f) != (b.s, b.f, b.r, b.card_f):
                raise RuntimeError(f"schedule extension mutated stage {m}")
        st.labeling.sched = sched
        for cb in st.codeballs.values():
            cb.donor.sched = sched
