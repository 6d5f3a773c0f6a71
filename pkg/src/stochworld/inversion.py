"""Inverse models that predict the past.

A journey starts in the initial state and walks arrows until it first
returns there or enters a black hole.  Expected per-arrow traversal counts
per journey satisfy a linear flow system; normalizing the counts per target
state yields the inbound probabilities, i.e. the arrows of the inverse
model.  Monte-Carlo journey simulation provides the same statistics
empirically and serves as an independent oracle.

Inversion requires the absence of white peaks: over those, any inbound
probabilities whatsoever would be consistent, so the toolkit refuses to
guess.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Mapping, Optional

import numpy as np

from .analysis import find_black_hole, find_white_peak
from .core import Arrow, Model, Policy, ProbInterval, canonical
from .errors import JourneyError, ModelError, WhitePeakError

_EPS = 1e-12


@dataclass(frozen=True)
class JourneyStatistics:
    """Expected per-journey visit and traversal counts."""

    visit_counts: Mapping[str, float]
    arrow_counts: Mapping[tuple, float]
    return_count: float
    absorption_counts: Mapping[str, float]


def _reachable(model: Model, start: str) -> set:
    adj: dict = {s.id: [] for s in model.states}
    for a in model.arrows:
        if a.effective().hi > 0.0:
            adj[a.source].append(a.target)
    seen, stack = {start}, [start]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def _propagating_states(model: Model) -> tuple:
    """States journeys can stand on: reachable and outside black holes."""
    s0 = model.initial_state.id
    black = find_black_hole(model)
    reach = _reachable(model, s0)
    nt = [s.id for s in model.states if s.id in reach and s.id not in black]
    for sid in nt:
        total = 0.0
        for a in model.out_index.get(sid, ()):
            eff = a.effective()
            if not eff.is_point:
                raise JourneyError(
                    f"journey statistics need point probabilities (arrow {a.source} "
                    f"{a.label} {a.target} is an interval)"
                )
            total += eff.mid
        if abs(total - 1.0) > 1e-6:
            raise JourneyError(
                f"journeys do not terminate: state {sid} outgoing probability sum {total:g}"
            )
    return tuple(nt), black


def journey_statistics(model: Model) -> JourneyStatistics:
    """Solve the journey flow system for expected visit and arrow counts."""
    s0 = model.initial_state.id
    nt, black = _propagating_states(model)
    others = [s for s in nt if s != s0]
    pos = {s: i for i, s in enumerate(others)}

    # v(s0) = 1; v(s) = sum_k v(k) p(k, s) over propagating k
    n = len(others)
    q = np.zeros((n, n))
    c = np.zeros(n)
    for a in model.arrows:
        if a.source not in set(nt) or a.target not in pos:
            continue
        p = a.effective().mid
        j = pos[a.target]
        if a.source == s0:
            c[j] += p
        else:
            q[pos[a.source], j] += p
    try:
        x = np.linalg.solve(np.eye(n) - q.T, c) if n else np.zeros(0)
    except np.linalg.LinAlgError as exc:
        raise JourneyError(f"singular flow system: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise JourneyError("flow system produced non-finite visit counts")

    visits = {s0: 1.0}
    visits.update({s: float(x[i]) for s, i in pos.items()})
    arrow_counts: dict = {}
    return_count = 0.0
    absorption: dict = {}
    nt_set = set(nt)
    for a in model.arrows:
        if a.source not in nt_set:
            continue
        count = visits[a.source] * a.effective().mid
        arrow_counts[a.key] = count
        if a.target == s0:
            return_count += count
        elif a.target in black:
            absorption[a.target] = absorption.get(a.target, 0.0) + count
    return JourneyStatistics(visits, arrow_counts, return_count, absorption)


def _reverse_from_counts(model: Model, counts: Mapping[tuple, float], kind: str) -> Model:
    """Build the reversed model with inbound probabilities from counts."""
    inflow: dict = {s.id: 0.0 for s in model.states}
    for (src, label, dst), c in counts.items():
        inflow[dst] += c

    notes = []
    reversed_arrows = []
    if kind in ("mdp", "mdp-fixed"):
        # split each reversed probability into action part and arrow part
        q: dict = {}
        for a in model.arrows:
            denom = inflow[a.target]
            q[(a.target, a.label, a.source)] = (
                counts.get(a.key, 0.0) / denom if denom > _EPS else None
            )
        uniform_states = sorted({src for (src, _, _), v in q.items() if v is None})
        for sid in uniform_states:
            keys = [k for k in q if k[0] == sid]
            for k in keys:
                q[k] = 1.0 / len(keys)
        if uniform_states:
            notes.append("uniform-inbound: " + " ".join(uniform_states))
        label_mass: dict = {}
        for (src, label, dst), v in q.items():
            label_mass[(src, label)] = label_mass.get((src, label), 0.0) + v
        for (src, label, dst), v in q.items():
            lp = label_mass[(src, label)]
            ap = v / lp if lp > _EPS else 1.0 / sum(1 for k in q if k[:2] == (src, label))
            reversed_arrows.append(
                Arrow(src, label, dst, ProbInterval.point(lp), ProbInterval.point(ap))
            )
    else:
        grouped: dict = {}
        for a in model.arrows:
            grouped.setdefault(a.target, []).append(a)
        uniform_states = []
        for dst, arrows in grouped.items():
            denom = inflow[dst]
            if denom > _EPS:
                probs = [counts.get(a.key, 0.0) / denom for a in arrows]
            else:
                probs = [1.0 / len(arrows)] * len(arrows)
                uniform_states.append(dst)
            for a, p in zip(arrows, probs):
                reversed_arrows.append(
                    Arrow(dst, a.label, a.source, a.label_prob, ProbInterval.point(p))
                )
        if uniform_states:
            notes.append("uniform-inbound: " + " ".join(sorted(uniform_states)))

    return canonical(
        replace(
            model,
            kind=kind,
            arrows=tuple(reversed_arrows),
            meta=tuple(notes),
        )
    )


def invert_chain(model: Model) -> Model:
    """Analytic inversion of a single-label chain from its journey flow."""
    if not model.single_label:
        raise ModelError("invert_chain needs a single-label model; see invert_mdp_fixed")
    peak = find_white_peak(model)
    if peak:
        raise WhitePeakError(peak)
    stats = journey_statistics(model)
    return _reverse_from_counts(model, stats.arrow_counts, model.kind)


def simulate_journeys(model: Model, journeys: int, seed: int) -> JourneyStatistics:
    """Empirical journey statistics from vectorized random walks."""
    if journeys <= 0:
        raise JourneyError("no statistics: journeys must be positive")
    s0 = model.initial_state.id
    nt, black = _propagating_states(model)
    nt_set = set(nt)
    ids = [s.id for s in model.states]
    index = {sid: i for i, sid in enumerate(ids)}
    arrows = sorted((a for a in model.arrows if a.source in nt_set), key=lambda a: a.key)
    if not arrows:
        raise JourneyError("no statistics: the initial state has no outgoing arrows")

    per_state: dict = {index[s]: [] for s in nt}
    for ai, a in enumerate(arrows):
        per_state[index[a.source]].append(ai)
    max_deg = max(len(v) for v in per_state.values())
    cum = np.ones((len(ids), max_deg))
    aid = np.zeros((len(ids), max_deg), dtype=np.int64)
    tgt = np.array([index[a.target] for a in arrows], dtype=np.int64)
    for si, alist in per_state.items():
        probs = np.array([arrows[ai].effective().mid for ai in alist])
        cum[si, : len(alist)] = np.cumsum(probs)
        cum[si, len(alist) :] = 1.0 + _EPS
        aid[si, : len(alist)] = alist
        if len(alist) < max_deg:
            aid[si, len(alist) :] = alist[-1]

    rng = np.random.default_rng(seed)
    s0_idx = index[s0]
    black_mask = np.zeros(len(ids), dtype=bool)
    for b in black:
        black_mask[index[b]] = True

    cur = np.full(journeys, s0_idx, dtype=np.int64)
    arrow_counts = np.zeros(len(arrows))
    visit_counts = np.zeros(len(ids))
    visit_counts[s0_idx] = journeys
    returns = 0
    absorbed_at = np.zeros(len(ids))
    for _ in range(1_000_000):
        if cur.size == 0:
            break
        u = rng.random(cur.size)
        choice = (u[:, None] > cum[cur]).sum(axis=1)
        taken = aid[cur, choice]
        arrow_counts += np.bincount(taken, minlength=len(arrows))
        nxt = tgt[taken]
        done_return = nxt == s0_idx
        done_black = black_mask[nxt]
        returns += int(done_return.sum())
        absorbed_at += np.bincount(nxt[done_black], minlength=len(ids))
        alive = ~(done_return | done_black)
        visit_counts += np.bincount(nxt[alive], minlength=len(ids))
        cur = nxt[alive]
    else:
        raise JourneyError("journeys do not terminate within the step cap")

    scale = 1.0 / journeys
    return JourneyStatistics(
        visit_counts={ids[i]: float(v) * scale for i, v in enumerate(visit_counts) if v},
        arrow_counts={a.key: float(c) * scale for a, c in zip(arrows, arrow_counts)},
        return_count=returns * scale,
        absorption_counts={
            ids[i]: float(v) * scale for i, v in enumerate(absorbed_at) if v
        },
    )


def monte_carlo_invert(model: Model, journeys: int, seed: int) -> Model:
    """Like invert_chain but with empirical counts; deterministic given seed."""
    if not model.single_label:
        raise ModelError("monte_carlo_invert needs a single-label model")
    peak = find_white_peak(model)
    if peak:
        raise WhitePeakError(peak)
    stats = simulate_journeys(model, journeys, seed)
    return _reverse_from_counts(model, stats.arrow_counts, model.kind)


# -- decision-process inversion -------------------------------------------------


def _model_policy(model: Model) -> Policy:
    probs = {}
    for (s, label), arrows in model.out_by_label.items():
        lp = arrows[0].label_prob
        if not lp.is_point:
            raise ModelError(
                f"model carries interval agent probabilities; supply an explicit policy"
            )
        probs[(s, label)] = lp.mid
    return Policy(probs)


def compose_policy(model: Model, policy: Policy) -> Model:
    """Fix the agent: replace label probabilities with the policy's points."""
    policy.check(model)
    arrows = tuple(
        replace(a, label_prob=ProbInterval.point(policy.of(a.source, a.label)))
        for a in model.arrows
    )
    return replace(model, kind="mdp-fixed", arrows=arrows)


def invert_mdp_fixed(model: Model, policy: Optional[Policy] = None) -> Model:
    """Invert a decision process under a fixed policy; result is mdp-fixed."""
    if model.kind not in ("mdp", "mdp-fixed", "mdp-plus", "smdp"):
        raise ModelError(f"invert_mdp_fixed does not apply to {model.kind} models")
    composed = compose_policy(model, policy if policy is not None else _model_policy(model))
    peak = find_white_peak(composed)
    if peak:
        raise WhitePeakError(peak)
    stats = journey_statistics(composed)
    return _reverse_from_counts(composed, stats.arrow_counts, "mdp-fixed")


def _simplex_box_vertices(bounds, tol=1e-9):
    """Vertices of {x in prod [lo,hi] : sum x = 1}."""
    n = len(bounds)
    if n == 0:
        return [()]
    if n == 1:
        lo, hi = bounds[0]
        return [(1.0,)] if lo - tol <= 1.0 <= hi + tol else []
    verts = set()
    for free in range(n):
        rest = [i for i in range(n) if i != free]
        for bits in itertools.product((0, 1), repeat=n - 1):
            x = [0.0] * n
            total = 0.0
            for i, b in zip(rest, bits):
                x[i] = bounds[i][1] if b else bounds[i][0]
                total += x[i]
            xf = 1.0 - total
            lo, hi = bounds[free]
            if lo - tol <= xf <= hi + tol:
                x[free] = min(max(xf, lo), hi)
                verts.add(tuple(round(v, 12) for v in x))
    return sorted(verts)


def _sample_simplex_box(bounds, rng):
    """Random point of {x in prod [lo,hi] : sum x = 1}, coordinate by coordinate."""
    n = len(bounds)
    x = [0.0] * n
    done = 0.0
    for i in range(n):
        lo_rest = sum(b[0] for b in bounds[i + 1 :])
        hi_rest = sum(b[1] for b in bounds[i + 1 :])
        lo = max(bounds[i][0], 1.0 - done - hi_rest)
        hi = min(bounds[i][1], 1.0 - done - lo_rest)
        if hi < lo - 1e-12:
            return None
        x[i] = lo if i == n - 1 else lo + (hi - lo) * rng.random()
        done += x[i]
    x[-1] = 1.0 - sum(x[:-1])
    return tuple(x)


def invert_mdp_plus(
    model: Model,
    mode: str = "vertex",
    budget: int = 10_000,
    seed: Optional[int] = None,
) -> Model:
    """Approximate interval inversion over a family of interval resolutions.

    Every resolution pins the agent and the world to points, is inverted as
    an MDP Fixed, and the reversed probabilities are hulled per arrow.  The
    bounds are certified only over the explored family (an inner
    approximation of the true intervals).
    """
    if mode == "vertex-enumeration":
        mode = "vertex"
    if model.kind not in ("mdp-plus", "smdp", "mdp", "mdp-fixed"):
        raise ModelError(f"invert_mdp_plus does not apply to {model.kind} models")
    peak = find_white_peak(model)
    if peak:
        raise WhitePeakError(peak)

    agent_groups = []  # (state, labels)
    for s in model.states:
        labels = model.labels_from(s.id)
        if labels:
            agent_groups.append((s.id, labels))
    world_groups = sorted(model.out_by_label)  # (state, label)

    def group_bounds():
        agent = [
            [
                (model.agent_interval(s, l).lo, model.agent_interval(s, l).hi)
                for l in labels
            ]
            for s, labels in agent_groups
        ]
        world = [
            [(a.arrow_prob.lo, a.arrow_prob.hi) for a in model.out_by_label[g]]
            for g in world_groups
        ]
        return agent, world

    agent_bounds, world_bounds = group_bounds()

    def resolutions():
        if mode == "vertex":
            per_group = [_simplex_box_vertices(b) for b in agent_bounds + world_bounds]
            if any(not g for g in per_group):
                return
            yield from itertools.islice(itertools.product(*per_group), budget)
        elif mode == "monte-carlo":
            if seed is None:
                raise ModelError("monte-carlo interval inversion needs a seed")
            rng = np.random.default_rng(seed)
            for _ in range(budget):
                pick = [_sample_simplex_box(b, rng) for b in agent_bounds + world_bounds]
                if all(p is not None for p in pick):
                    yield tuple(pick)
        else:
            raise ModelError(f"unknown inversion mode {mode!r}")

    n_agent = len(agent_groups)
    lp_hull: dict = {}
    ap_hull: dict = {}
    explored = 0
    valid = 0
    for combo in resolutions():
        explored += 1
        agent_pick = combo[:n_agent]
        world_pick = combo[n_agent:]
        by_key = {}
        for (sid, labels), vec in zip(agent_groups, agent_pick):
            for l, p in zip(labels, vec):
                by_key[("lp", sid, l)] = p
        for g, vec in zip(world_groups, world_pick):
            for a, p in zip(model.out_by_label[g], vec):
                by_key[("ap",) + a.key] = p
        resolved = replace(
            model,
            kind="mdp-fixed",
            arrows=tuple(
                replace(
                    a,
                    label_prob=ProbInterval.point(by_key[("lp", a.source, a.label)]),
                    arrow_prob=ProbInterval.point(by_key[("ap",) + a.key]),
                )
                for a in model.arrows
            ),
        )
        try:
            inv = invert_mdp_fixed(resolved)
        except (WhitePeakError, JourneyError):
            continue
        valid += 1
        for a in inv.arrows:
            lo, hi = lp_hull.get((a.source, a.label), (1.0, 0.0))
            lp_hull[(a.source, a.label)] = (min(lo, a.label_prob.lo), max(hi, a.label_prob.hi))
            lo, hi = ap_hull.get(a.key, (1.0, 0.0))
            ap_hull[a.key] = (min(lo, a.arrow_prob.lo), max(hi, a.arrow_prob.hi))

    if valid == 0:
        raise JourneyError(f"budget exhausted with zero valid resolutions (explored {explored})")

    arrows = tuple(
        Arrow(
            dst,
            label,
            src,
            ProbInterval(*lp_hull[(dst, label)]),
            ProbInterval(*ap_hull[(dst, label, src)]),
        )
        for (dst, label, src) in sorted(ap_hull)
    )
    return canonical(
        replace(
            model,
            kind="mdp-plus",
            arrows=arrows,
            meta=(f"approximate: bounds certified over {valid} explored resolutions",),
        )
    )
